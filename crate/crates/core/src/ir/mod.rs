//! A small statement-level IR and per-function control-flow graphs.
//!
//! Instructions carry a linear `index` that follows source order, which is
//! the location model the detector compares against. Values are kept as
//! little trees so the detector can ask whether an operand depends on
//! `msg.sender` without a separate data-flow pass.

mod lower;
mod scope;

use std::collections::VecDeque;
use std::fmt::{self, Write as _};

use serde::Serialize;

use crate::frontend::{FunctionInfo, Span};

pub use lower::{lower_function, lower_tree, LowerOptions};
pub use scope::{linearize, state_variables, StateVariable, Ty, TypeTable};

/// A value as the detector sees it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Value {
    MsgSender,
    Var(String),
    Index(Box<Value>, Box<Value>),
    Member(Box<Value>, String),
    /// Return value of the internal call instruction at this index.
    Call(usize),
    /// Anything computed from its children (arithmetic, casts, tuples).
    Op(Vec<Value>),
    Literal(String),
    /// Values whose dependence is not tracked: hashes, external call
    /// results, type expressions.
    Opaque,
}

impl Value {
    pub fn index(base: Value, key: Value) -> Self {
        Value::Index(Box::new(base), Box::new(key))
    }

    pub fn member(base: Value, name: impl Into<String>) -> Self {
        Value::Member(Box::new(base), name.into())
    }

    /// Every sub-value, this one included, in pre-order.
    pub fn walk(&self, f: &mut impl FnMut(&Value)) {
        f(self);
        match self {
            Value::Index(b, k) => {
                b.walk(f);
                k.walk(f);
            }
            Value::Member(b, _) => b.walk(f),
            Value::Op(vs) => vs.iter().for_each(|v| v.walk(f)),
            _ => {}
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::MsgSender => f.write_str("msg.sender"),
            Value::Var(v) => f.write_str(v),
            Value::Index(b, k) => write!(f, "{b}[{k}]"),
            Value::Member(b, m) => write!(f, "{b}.{m}"),
            Value::Call(i) => write!(f, "ret#{i}"),
            Value::Op(vs) => {
                f.write_str("op(")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str(")")
            }
            Value::Literal(l) => f.write_str(l),
            Value::Opaque => f.write_str("?"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Receiver {
    This,
    Contract(String),
    Address,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Qualifier {
    Super,
    /// A contract or library name, as in `Base.f()` or `SafeMath.add(a, b)`.
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct InternalCallee {
    pub name: String,
    pub qualifier: Option<Qualifier>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum InstrKind {
    /// Built-in value transfer: `transfer`, `send`, or a call carrying value.
    Transfer,
    StateWrite(String),
    /// `call`, `delegatecall`, `staticcall` (and the old `callcode`).
    LowLevelCall(String),
    HighLevelCall { receiver: Receiver, member: String },
    /// Operands are the arguments, receiver first for bound library calls.
    InternalCall(InternalCallee),
    SolidityCall(String),
    /// Operands are the leaves of the condition's comparisons.
    Condition,
    /// Write to a local; operands are the sources.
    Assign(String),
    Return,
    Other,
}

impl InstrKind {
    pub fn is_selfdestruct(&self) -> bool {
        matches!(self, InstrKind::SolidityCall(n) if n == "selfdestruct" || n == "suicide")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IrInstruction {
    pub index: usize,
    pub kind: InstrKind,
    pub operands: Vec<Value>,
    pub span: Span,
}

impl fmt::Display for IrInstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{} ", self.index)?;
        match &self.kind {
            InstrKind::Transfer => f.write_str("TRANSFER")?,
            InstrKind::StateWrite(v) => write!(f, "STATE_WRITE {v}")?,
            InstrKind::LowLevelCall(m) => write!(f, "LOW_LEVEL_CALL {m}")?,
            InstrKind::HighLevelCall { member, .. } => write!(f, "HIGH_LEVEL_CALL {member}")?,
            InstrKind::InternalCall(c) => match &c.qualifier {
                Some(Qualifier::Super) => write!(f, "INTERNAL_CALL super.{}", c.name)?,
                Some(Qualifier::Named(q)) => write!(f, "INTERNAL_CALL {q}.{}", c.name)?,
                None => write!(f, "INTERNAL_CALL {}", c.name)?,
            },
            InstrKind::SolidityCall(n) => write!(f, "SOLIDITY_CALL {n}")?,
            InstrKind::Condition => f.write_str("CONDITION")?,
            InstrKind::Assign(t) => write!(f, "ASSIGN {t}")?,
            InstrKind::Return => f.write_str("RETURN")?,
            InstrKind::Other => f.write_str("OTHER")?,
        }
        for (i, v) in self.operands.iter().enumerate() {
            f.write_str(if i == 0 { " " } else { ", " })?;
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

pub type BlockId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BasicBlock {
    pub id: BlockId,
    pub instructions: Vec<IrInstruction>,
    /// Lowered from a construct the IR does not model (inline assembly,
    /// try/catch); contributes neither risky actions nor checks.
    pub opaque: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Target {
    Block(BlockId),
    Return,
    Revert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EdgeLabel {
    Seq,
    True,
    False,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Edge {
    pub from: BlockId,
    pub to: Target,
    pub label: EdgeLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cfg {
    pub blocks: Vec<BasicBlock>,
    pub edges: Vec<Edge>,
    pub entry: BlockId,
}

impl Cfg {
    pub fn block(&self, id: BlockId) -> &BasicBlock {
        &self.blocks[id]
    }

    pub fn successors(&self, id: BlockId) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.from == id)
    }

    /// All instructions in index order.
    pub fn instructions(&self) -> Vec<&IrInstruction> {
        let mut all: Vec<&IrInstruction> = self.blocks.iter().flat_map(|b| &b.instructions).collect();
        all.sort_by_key(|i| i.index);
        all
    }

    pub fn instruction(&self, index: usize) -> Option<&IrInstruction> {
        self.blocks
            .iter()
            .flat_map(|b| &b.instructions)
            .find(|i| i.index == index)
    }

    /// Block ids reachable from the entry, in breadth-first order.
    pub fn reachable(&self) -> Vec<BlockId> {
        let mut seen = vec![false; self.blocks.len()];
        let mut order = Vec::new();
        let mut queue = VecDeque::from([self.entry]);
        seen[self.entry] = true;
        while let Some(b) = queue.pop_front() {
            order.push(b);
            for e in self.successors(b) {
                if let Target::Block(t) = e.to {
                    if !seen[t] {
                        seen[t] = true;
                        queue.push_back(t);
                    }
                }
            }
        }
        order
    }

    /// Adjacency as `(from, to, label)` triples, sorted.
    pub fn adjacency(&self) -> Vec<(BlockId, Target, EdgeLabel)> {
        let mut v: Vec<_> = self.edges.iter().map(|e| (e.from, e.to, e.label)).collect();
        v.sort();
        v
    }

    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{}\" {{", dot_escape(name));
        out.push_str("  node [shape=box, fontname=monospace];\n");
        for b in &self.blocks {
            let mut label = format!("B{}{}\\l", b.id, if b.opaque { " (opaque)" } else { "" });
            for i in &b.instructions {
                label.push_str(&dot_escape(&i.to_string()));
                label.push_str("\\l");
            }
            let _ = writeln!(out, "  b{} [label=\"{}\"];", b.id, label);
        }
        let exits = |t: Target| self.edges.iter().any(|e| e.to == t);
        if exits(Target::Return) {
            out.push_str("  ret [label=\"return\", shape=doublecircle];\n");
        }
        if exits(Target::Revert) {
            out.push_str("  revert [label=\"revert\", shape=octagon];\n");
        }
        for e in &self.edges {
            let to = match e.to {
                Target::Block(t) => format!("b{t}"),
                Target::Return => "ret".into(),
                Target::Revert => "revert".into(),
            };
            let label = match e.label {
                EdgeLabel::Seq => String::new(),
                EdgeLabel::True => " [label=\"T\"]".into(),
                EdgeLabel::False => " [label=\"F\"]".into(),
            };
            let _ = writeln!(out, "  b{} -> {}{};", e.from, to, label);
        }
        out.push_str("}\n");
        out
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModifierInvocation {
    pub name: String,
    pub args: Vec<Value>,
    pub span: Span,
}

/// One lowered function, modifier, constructor, fallback or receive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IrFunction {
    pub info: FunctionInfo,
    pub params: Vec<String>,
    /// Names of named return variables (empty names for unnamed ones).
    pub returns: Vec<String>,
    pub modifiers: Vec<ModifierInvocation>,
    pub cfg: Cfg,
    /// Spans of constructs lowered as opaque blocks.
    pub unsupported: Vec<Span>,
}

impl IrFunction {
    pub fn param_position(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p == name)
    }
}
