//! Syntax tree to IR lowering.

use std::collections::{HashMap, HashSet};

use solang_parser::helpers::CodeLocation;
use solang_parser::pt::{
    ContractDefinition, ContractPart, Expression, FunctionAttribute, Statement, StorageLocation,
};

use super::scope::{linearize, Ty, TypeTable};
use super::{
    BasicBlock, BlockId, Cfg, Edge, EdgeLabel, InstrKind, InternalCallee, IrFunction,
    IrInstruction, ModifierInvocation, Qualifier, Receiver, Target, Value,
};
use crate::frontend::normalize::THROW_MARKER;
use crate::frontend::{function_info, ident, FunctionRef, Span, SyntaxTree};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LowerOptions {
    /// External-call member names treated as value transfers.
    pub token_transfer_patterns: Vec<String>,
}

const HASH_BUILTINS: [&str; 9] = [
    "keccak256", "sha3", "sha256", "ripemd160", "ecrecover", "blockhash", "gasleft", "addmod",
    "mulmod",
];
const LOW_LEVEL: [&str; 4] = ["call", "delegatecall", "staticcall", "callcode"];

/// Lowers every function-like definition in the tree, in source order.
pub fn lower_tree(tree: &SyntaxTree, opts: &LowerOptions) -> Vec<IrFunction> {
    let table = TypeTable::new(tree);
    tree.function_refs()
        .into_iter()
        .map(|f| lower_function(&table, f, opts))
        .collect()
}

pub fn lower_function(table: &TypeTable<'_>, f: FunctionRef<'_>, opts: &LowerOptions) -> IrFunction {
    let info = function_info(f);
    let mut l = Lowerer::new(table, f.contract, opts);
    let def = f.def;
    let params: Vec<String> = def
        .params
        .iter()
        .map(|(_, p)| p.as_ref().map(|p| ident(&p.name).to_string()).unwrap_or_default())
        .collect();
    let returns: Vec<String> = def
        .returns
        .iter()
        .map(|(_, p)| p.as_ref().map(|p| ident(&p.name).to_string()).unwrap_or_default())
        .collect();
    for (_, p) in def.params.iter().chain(&def.returns) {
        if let Some(p) = p {
            if let Some(n) = &p.name {
                l.locals.insert(n.name.clone(), table.resolve(&p.ty));
            }
        }
    }
    if let Some(body) = &def.body {
        l.collect_locals(body);
    }
    let modifiers = def
        .attributes
        .iter()
        .filter_map(|a| match a {
            FunctionAttribute::BaseOrModifier(loc, base) => {
                let name = base
                    .name
                    .identifiers
                    .iter()
                    .map(|i| i.name.as_str())
                    .collect::<Vec<_>>()
                    .join(".");
                if table.is_contract_name(&name) {
                    return None;
                }
                let args = base
                    .args
                    .iter()
                    .flatten()
                    .map(|e| l.pure_value(e))
                    .collect();
                Some(ModifierInvocation {
                    name,
                    args,
                    span: Span::of(loc),
                })
            }
            _ => None,
        })
        .collect();
    if let Some(body) = &def.body {
        l.stmt(body);
        // falling off the end returns
        l.edge(l.cur, Target::Return, EdgeLabel::Seq);
    }
    let (cfg, unsupported) = l.finish();
    IrFunction {
        info,
        params,
        returns,
        modifiers,
        cfg,
        unsupported,
    }
}

struct Lowerer<'t, 'a> {
    table: &'t TypeTable<'a>,
    contract: Option<&'a ContractDefinition>,
    state: HashMap<String, Ty>,
    locals: HashMap<String, Ty>,
    opts: &'t LowerOptions,
    blocks: Vec<BasicBlock>,
    edges: Vec<Edge>,
    cur: BlockId,
    next_index: usize,
    /// (continue target, break target) of enclosing loops.
    loops: Vec<(BlockId, BlockId)>,
    unsupported: Vec<Span>,
}

impl<'t, 'a> Lowerer<'t, 'a> {
    fn new(table: &'t TypeTable<'a>, contract: Option<&'a ContractDefinition>, opts: &'t LowerOptions) -> Self {
        let mut state = HashMap::new();
        if let Some(c) = contract {
            for c in linearize(table.tree, c) {
                for p in &c.parts {
                    if let ContractPart::VariableDefinition(v) = p {
                        if let Some(n) = &v.name {
                            state.entry(n.name.clone()).or_insert_with(|| table.resolve(&v.ty));
                        }
                    }
                }
            }
        }
        Lowerer {
            table,
            contract,
            state,
            locals: HashMap::new(),
            opts,
            blocks: vec![BasicBlock {
                id: 0,
                instructions: Vec::new(),
                opaque: false,
            }],
            edges: Vec::new(),
            cur: 0,
            next_index: 0,
            loops: Vec::new(),
            unsupported: Vec::new(),
        }
    }

    // ---- scopes

    fn collect_locals(&mut self, s: &Statement) {
        match s {
            Statement::Block { statements, .. } => statements.iter().for_each(|s| self.collect_locals(s)),
            Statement::VariableDefinition(_, decl, _) => {
                if let Some(n) = &decl.name {
                    let ty = self.table.resolve(&decl.ty);
                    self.locals.insert(n.name.clone(), ty);
                }
            }
            Statement::Expression(_, Expression::Assign(_, lhs, _)) => {
                if let Expression::List(_, params) = lhs.as_ref() {
                    for (_, p) in params {
                        if let Some(p) = p {
                            if let Some(n) = &p.name {
                                self.locals.insert(n.name.clone(), self.table.resolve(&p.ty));
                            }
                        }
                    }
                }
            }
            Statement::If(_, _, a, b) => {
                self.collect_locals(a);
                if let Some(b) = b {
                    self.collect_locals(b);
                }
            }
            Statement::While(_, _, b) | Statement::DoWhile(_, b, _) => self.collect_locals(b),
            Statement::For(_, init, _, _, body) => {
                if let Some(i) = init {
                    self.collect_locals(i);
                }
                if let Some(b) = body {
                    self.collect_locals(b);
                }
            }
            Statement::Try(_, _, ret, catches) => {
                if let Some((params, body)) = ret {
                    for (_, p) in params {
                        if let Some(n) = p.as_ref().and_then(|p| p.name.as_ref()) {
                            self.locals.insert(n.name.clone(), Ty::Unknown);
                        }
                    }
                    self.collect_locals(body);
                }
                for c in catches {
                    match c {
                        solang_parser::pt::CatchClause::Simple(_, p, body) => {
                            if let Some(n) = p.as_ref().and_then(|p| p.name.as_ref()) {
                                self.locals.insert(n.name.clone(), Ty::Unknown);
                            }
                            self.collect_locals(body);
                        }
                        solang_parser::pt::CatchClause::Named(_, _, p, body) => {
                            if let Some(n) = &p.name {
                                self.locals.insert(n.name.clone(), Ty::Unknown);
                            }
                            self.collect_locals(body);
                        }
                    }
                }
            }
            _ => {}
        }
    }

    fn is_local(&self, name: &str) -> bool {
        self.locals.contains_key(name)
    }

    fn is_state(&self, name: &str) -> bool {
        !self.is_local(name) && self.state.contains_key(name)
    }

    fn declared(&self, name: &str) -> bool {
        self.locals.contains_key(name) || self.state.contains_key(name)
    }

    fn current_contract(&self) -> String {
        self.contract.map(|c| ident(&c.name).to_string()).unwrap_or_default()
    }

    fn ty_of(&self, e: &Expression) -> Ty {
        match e {
            Expression::Variable(id) => {
                if let Some(t) = self.locals.get(&id.name).or_else(|| self.state.get(&id.name)) {
                    t.clone()
                } else if id.name == "this" {
                    Ty::Contract(self.current_contract())
                } else {
                    Ty::Unknown
                }
            }
            Expression::MemberAccess(_, base, m) => {
                if let Expression::Variable(b) = base.as_ref() {
                    let global = !self.declared(&b.name);
                    match (b.name.as_str(), m.name.as_str()) {
                        ("msg", "sender") | ("tx", "origin") | ("block", "coinbase") if global => {
                            return Ty::Address
                        }
                        _ => {}
                    }
                }
                match self.ty_of(base) {
                    Ty::Struct(s) => self.table.struct_field(&s, &m.name),
                    _ => Ty::Unknown,
                }
            }
            Expression::ArraySubscript(_, base, _) => match self.ty_of(base) {
                Ty::Mapping(v) | Ty::Array(v) => *v,
                _ => Ty::Unknown,
            },
            Expression::FunctionCall(_, callee, _) => match callee.as_ref() {
                Expression::Type(..) => self.table.resolve(callee),
                Expression::Variable(id) if self.table.is_type_name(&id.name) => self.table.resolve(callee),
                Expression::Variable(id) if self.looks_like_cast(&id.name) => Ty::Contract(id.name.clone()),
                _ => Ty::Unknown,
            },
            Expression::Parenthesis(_, inner) => self.ty_of(inner),
            _ => Ty::Unknown,
        }
    }

    /// An undeclared capitalized callee taking one argument is most likely a
    /// conversion to an interface type from another file.
    fn looks_like_cast(&self, name: &str) -> bool {
        name.starts_with(|c: char| c.is_ascii_uppercase())
            && !self.declared(name)
            && !self.is_known_function(name)
            && !self.table.is_event(name)
            && !self.table.is_error(name)
    }

    fn is_known_function(&self, name: &str) -> bool {
        let in_contract = self.contract.is_some_and(|c| {
            linearize(self.table.tree, c).into_iter().any(|c| {
                c.parts.iter().any(|p| matches!(p, ContractPart::FunctionDefinition(f) if ident(&f.name) == name))
            })
        });
        in_contract || self.table.free_functions().iter().any(|f| ident(&f.name) == name)
    }

    // ---- graph construction

    fn emit(&mut self, kind: InstrKind, operands: Vec<Value>, span: Span) -> usize {
        let index = self.next_index;
        self.next_index += 1;
        self.blocks[self.cur].instructions.push(IrInstruction {
            index,
            kind,
            operands,
            span,
        });
        index
    }

    fn new_block(&mut self, opaque: bool) -> BlockId {
        let id = self.blocks.len();
        self.blocks.push(BasicBlock {
            id,
            instructions: Vec::new(),
            opaque,
        });
        id
    }

    fn edge(&mut self, from: BlockId, to: Target, label: EdgeLabel) {
        self.edges.push(Edge { from, to, label });
    }

    fn jump(&mut self, to: BlockId) {
        self.edge(self.cur, Target::Block(to), EdgeLabel::Seq);
    }

    /// Ends the current block with an exit and continues in a fresh block
    /// that nothing jumps to (pruned later unless a label makes it live).
    fn terminate(&mut self, to: Target) {
        self.edge(self.cur, to, EdgeLabel::Seq);
        self.cur = self.new_block(false);
    }

    fn finish(self) -> (Cfg, Vec<Span>) {
        let prelim = Cfg {
            blocks: self.blocks,
            edges: self.edges,
            entry: 0,
        };
        let mut live = prelim.reachable();
        live.sort_unstable();
        let mut remap = vec![usize::MAX; prelim.blocks.len()];
        for (new, old) in live.iter().enumerate() {
            remap[*old] = new;
        }
        let blocks = live
            .iter()
            .enumerate()
            .map(|(new, old)| BasicBlock {
                id: new,
                ..prelim.blocks[*old].clone()
            })
            .collect();
        let mut edges: Vec<Edge> = prelim
            .edges
            .iter()
            .filter(|e| remap[e.from] != usize::MAX)
            .map(|e| Edge {
                from: remap[e.from],
                to: match e.to {
                    Target::Block(t) => Target::Block(remap[t]),
                    other => other,
                },
                label: e.label,
            })
            .collect();
        let mut seen = HashSet::new();
        edges.retain(|e| seen.insert(*e));
        (
            Cfg {
                blocks,
                edges,
                entry: 0,
            },
            self.unsupported,
        )
    }

    fn opaque(&mut self, span: Span) {
        self.unsupported.push(span);
        let b = self.new_block(true);
        self.jump(b);
        let next = self.new_block(false);
        self.edge(b, Target::Block(next), EdgeLabel::Seq);
        self.cur = next;
    }

    // ---- statements

    fn stmt(&mut self, s: &Statement) {
        match s {
            Statement::Block { statements, .. } => statements.iter().for_each(|s| self.stmt(s)),
            Statement::Expression(loc, e) => self.expr_stmt(e, Span::of(loc)),
            Statement::VariableDefinition(loc, decl, init) => {
                if let Some(init) = init {
                    let v = self.eval(init);
                    let name = ident(&decl.name).to_string();
                    let _ = decl.storage.as_ref().map(|s: &StorageLocation| s);
                    self.emit(InstrKind::Assign(name), vec![v], Span::of(loc));
                }
            }
            Statement::If(_, cond, then, els) => {
                self.condition(cond);
                let from = self.cur;
                let then_b = self.new_block(false);
                let else_b = els.as_ref().map(|_| self.new_block(false));
                let join = self.new_block(false);
                self.edge(from, Target::Block(then_b), EdgeLabel::True);
                self.edge(from, Target::Block(else_b.unwrap_or(join)), EdgeLabel::False);
                self.cur = then_b;
                self.stmt(then);
                self.jump(join);
                if let (Some(b), Some(els)) = (else_b, els) {
                    self.cur = b;
                    self.stmt(els);
                    self.jump(join);
                }
                self.cur = join;
            }
            Statement::While(_, cond, body) => {
                let header = self.new_block(false);
                self.jump(header);
                self.cur = header;
                self.condition(cond);
                let cond_end = self.cur;
                let body_b = self.new_block(false);
                let exit = self.new_block(false);
                self.edge(cond_end, Target::Block(body_b), EdgeLabel::True);
                self.edge(cond_end, Target::Block(exit), EdgeLabel::False);
                self.loops.push((header, exit));
                self.cur = body_b;
                self.stmt(body);
                self.jump(header);
                self.loops.pop();
                self.cur = exit;
            }
            Statement::DoWhile(_, body, cond) => {
                let body_b = self.new_block(false);
                let cond_b = self.new_block(false);
                let exit = self.new_block(false);
                self.jump(body_b);
                self.loops.push((cond_b, exit));
                self.cur = body_b;
                self.stmt(body);
                self.jump(cond_b);
                self.loops.pop();
                self.cur = cond_b;
                self.condition(cond);
                self.edge(self.cur, Target::Block(body_b), EdgeLabel::True);
                self.edge(self.cur, Target::Block(exit), EdgeLabel::False);
                self.cur = exit;
            }
            Statement::For(_, init, cond, next, body) => {
                if let Some(i) = init {
                    self.stmt(i);
                }
                let header = self.new_block(false);
                self.jump(header);
                self.cur = header;
                if let Some(c) = cond {
                    self.condition(c);
                }
                let cond_end = self.cur;
                let body_b = self.new_block(false);
                let latch = self.new_block(false);
                let exit = self.new_block(false);
                let into_body = if cond.is_some() { EdgeLabel::True } else { EdgeLabel::Seq };
                self.edge(cond_end, Target::Block(body_b), into_body);
                if cond.is_some() {
                    self.edge(cond_end, Target::Block(exit), EdgeLabel::False);
                }
                self.loops.push((latch, exit));
                self.cur = body_b;
                if let Some(b) = body {
                    self.stmt(b);
                }
                self.jump(latch);
                self.loops.pop();
                self.cur = latch;
                if let Some(n) = next {
                    self.expr_stmt(n, Span::of(&n.loc()));
                }
                self.jump(header);
                self.cur = exit;
            }
            Statement::Continue(_) => {
                if let Some(&(cont, _)) = self.loops.last() {
                    self.terminate(Target::Block(cont));
                }
            }
            Statement::Break(_) => {
                if let Some(&(_, brk)) = self.loops.last() {
                    self.terminate(Target::Block(brk));
                }
            }
            Statement::Return(loc, e) => {
                let vals = match e {
                    Some(Expression::List(_, items)) => items
                        .iter()
                        .map(|(_, p)| p.as_ref().map(|p| self.eval(&p.ty)).unwrap_or(Value::Opaque))
                        .collect(),
                    Some(e) => vec![self.eval(e)],
                    None => Vec::new(),
                };
                self.emit(InstrKind::Return, vals, Span::of(loc));
                self.terminate(Target::Return);
            }
            Statement::Revert(loc, _, args) => {
                let vals = args.iter().map(|a| self.eval(a)).collect();
                self.emit(InstrKind::SolidityCall("revert".into()), vals, Span::of(loc));
                self.terminate(Target::Revert);
            }
            Statement::RevertNamedArgs(loc, _, args) => {
                let vals = args.iter().map(|a| self.eval(&a.expr)).collect();
                self.emit(InstrKind::SolidityCall("revert".into()), vals, Span::of(loc));
                self.terminate(Target::Revert);
            }
            Statement::Emit(loc, e) => {
                let vals = match e {
                    Expression::FunctionCall(_, _, args) => args.iter().map(|a| self.eval(a)).collect(),
                    Expression::NamedFunctionCall(_, _, args) => args.iter().map(|a| self.eval(&a.expr)).collect(),
                    _ => Vec::new(),
                };
                self.emit(InstrKind::Other, vals, Span::of(loc));
            }
            Statement::Assembly { loc, .. } => self.opaque(Span::of(loc)),
            Statement::Try(loc, ..) => self.opaque(Span::of(loc)),
            Statement::Args(..) | Statement::Error(..) => {}
        }
    }

    fn expr_stmt(&mut self, e: &Expression, span: Span) {
        match e {
            Expression::FunctionCall(_, callee, args) => {
                if let Expression::Variable(id) = callee.as_ref() {
                    if !self.declared(&id.name) && !self.is_known_function(&id.name) {
                        match id.name.as_str() {
                            "require" | "assert" => {
                                if let Some(cond) = args.first() {
                                    self.condition(cond);
                                    for extra in &args[1..] {
                                        self.eval(extra);
                                    }
                                }
                                let next = self.new_block(false);
                                self.edge(self.cur, Target::Revert, EdgeLabel::False);
                                self.edge(self.cur, Target::Block(next), EdgeLabel::True);
                                self.cur = next;
                                return;
                            }
                            "revert" => {
                                let vals = args.iter().map(|a| self.eval(a)).collect();
                                self.emit(InstrKind::SolidityCall("revert".into()), vals, span);
                                self.terminate(Target::Revert);
                                return;
                            }
                            _ => {}
                        }
                    }
                }
                self.eval(e);
            }
            Expression::Variable(id) if id.name == THROW_MARKER => {
                self.emit(InstrKind::SolidityCall("revert".into()), Vec::new(), span);
                self.terminate(Target::Revert);
            }
            Expression::Variable(id) if id.name == "_" => {
                self.emit(InstrKind::Other, Vec::new(), span);
            }
            _ => {
                self.eval(e);
            }
        }
    }

    /// Lowers a branch condition into one `Condition` whose operands are
    /// the leaves of its comparison and logical operators.
    fn condition(&mut self, cond: &Expression) {
        let mut leaves = Vec::new();
        self.flatten(cond, &mut leaves);
        self.emit(InstrKind::Condition, leaves, Span::of(&cond.loc()));
    }

    fn flatten(&mut self, e: &Expression, out: &mut Vec<Value>) {
        match e {
            Expression::And(_, l, r)
            | Expression::Or(_, l, r)
            | Expression::Equal(_, l, r)
            | Expression::NotEqual(_, l, r)
            | Expression::Less(_, l, r)
            | Expression::More(_, l, r)
            | Expression::LessEqual(_, l, r)
            | Expression::MoreEqual(_, l, r) => {
                self.flatten(l, out);
                self.flatten(r, out);
            }
            Expression::Not(_, x) | Expression::Parenthesis(_, x) => self.flatten(x, out),
            _ => {
                let v = self.eval(e);
                out.push(v);
            }
        }
    }

    // ---- expressions

    fn eval(&mut self, e: &Expression) -> Value {
        use Expression as E;
        match e {
            E::MemberAccess(_, base, m) => {
                if let E::Variable(b) = base.as_ref() {
                    if b.name == "msg" && m.name == "sender" && !self.declared("msg") {
                        return Value::MsgSender;
                    }
                }
                let b = self.eval(base);
                Value::member(b, m.name.clone())
            }
            E::Variable(id) => Value::Var(id.name.clone()),
            E::ArraySubscript(_, base, Some(key)) => {
                let b = self.eval(base);
                let k = self.eval(key);
                Value::index(b, k)
            }
            E::ArraySubscript(_, base, None) => {
                self.eval(base);
                Value::Opaque
            }
            E::ArraySlice(_, base, from, to) => {
                let mut vs = vec![self.eval(base)];
                for x in [from, to].into_iter().flatten() {
                    vs.push(self.eval(x));
                }
                Value::Op(vs)
            }
            E::Parenthesis(_, inner) => self.eval(inner),
            E::FunctionCall(..) | E::NamedFunctionCall(..) => self.call(e),
            E::FunctionCallBlock(_, inner, _) => {
                self.eval(inner);
                Value::Opaque
            }
            E::New(loc, inner) => {
                let vals = match inner.as_ref() {
                    E::FunctionCall(_, _, args) => args.iter().map(|a| self.eval(a)).collect(),
                    E::NamedFunctionCall(_, _, args) => args.iter().map(|a| self.eval(&a.expr)).collect(),
                    _ => Vec::new(),
                };
                self.emit(InstrKind::Other, vals, Span::of(loc));
                Value::Opaque
            }
            E::Assign(loc, lhs, rhs) => {
                let v = self.eval(rhs);
                self.write(lhs, vec![v.clone()], Span::of(loc));
                v
            }
            E::AssignOr(loc, lhs, rhs)
            | E::AssignAnd(loc, lhs, rhs)
            | E::AssignXor(loc, lhs, rhs)
            | E::AssignShiftLeft(loc, lhs, rhs)
            | E::AssignShiftRight(loc, lhs, rhs)
            | E::AssignAdd(loc, lhs, rhs)
            | E::AssignSubtract(loc, lhs, rhs)
            | E::AssignMultiply(loc, lhs, rhs)
            | E::AssignDivide(loc, lhs, rhs)
            | E::AssignModulo(loc, lhs, rhs) => {
                let r = self.eval(rhs);
                let cur = self.pure_value(lhs);
                let v = Value::Op(vec![cur, r]);
                self.write(lhs, vec![v.clone()], Span::of(loc));
                v
            }
            E::PostIncrement(loc, x)
            | E::PostDecrement(loc, x)
            | E::PreIncrement(loc, x)
            | E::PreDecrement(loc, x) => {
                let cur = self.pure_value(x);
                self.write(x, vec![Value::Op(vec![cur.clone()])], Span::of(loc));
                cur
            }
            E::Delete(loc, x) => {
                self.write(x, Vec::new(), Span::of(loc));
                Value::Opaque
            }
            E::Not(_, x) | E::BitwiseNot(_, x) | E::UnaryPlus(_, x) | E::Negate(_, x) => {
                Value::Op(vec![self.eval(x)])
            }
            E::Power(_, l, r)
            | E::Multiply(_, l, r)
            | E::Divide(_, l, r)
            | E::Modulo(_, l, r)
            | E::Add(_, l, r)
            | E::Subtract(_, l, r)
            | E::ShiftLeft(_, l, r)
            | E::ShiftRight(_, l, r)
            | E::BitwiseAnd(_, l, r)
            | E::BitwiseXor(_, l, r)
            | E::BitwiseOr(_, l, r)
            | E::Less(_, l, r)
            | E::More(_, l, r)
            | E::LessEqual(_, l, r)
            | E::MoreEqual(_, l, r)
            | E::Equal(_, l, r)
            | E::NotEqual(_, l, r)
            | E::And(_, l, r)
            | E::Or(_, l, r) => {
                let a = self.eval(l);
                let b = self.eval(r);
                Value::Op(vec![a, b])
            }
            E::ConditionalOperator(_, c, a, b) => {
                let c = self.eval(c);
                let a = self.eval(a);
                let b = self.eval(b);
                Value::Op(vec![c, a, b])
            }
            E::List(_, items) => Value::Op(
                items
                    .iter()
                    .map(|(_, p)| p.as_ref().map(|p| self.eval(&p.ty)).unwrap_or(Value::Opaque))
                    .collect(),
            ),
            E::ArrayLiteral(_, items) => Value::Op(items.iter().map(|i| self.eval(i)).collect()),
            E::BoolLiteral(_, b) => Value::Literal(b.to_string()),
            E::NumberLiteral(_, n, exp, _) => Value::Literal(if exp.is_empty() {
                n.clone()
            } else {
                format!("{n}e{exp}")
            }),
            E::RationalNumberLiteral(_, a, b, _, _) => Value::Literal(format!("{a}.{b}")),
            E::HexNumberLiteral(_, n, _) | E::AddressLiteral(_, n) => Value::Literal(n.clone()),
            E::StringLiteral(parts) => {
                Value::Literal(format!("\"{}\"", parts.iter().map(|p| p.string.as_str()).collect::<String>()))
            }
            E::HexLiteral(parts) => Value::Literal(parts.iter().map(|p| p.hex.as_str()).collect()),
            E::Type(..) => Value::Opaque,
        }
    }

    /// Value of an expression without emitting anything; calls become opaque.
    fn pure_value(&self, e: &Expression) -> Value {
        use Expression as E;
        match e {
            E::MemberAccess(_, base, m) => {
                if let E::Variable(b) = base.as_ref() {
                    if b.name == "msg" && m.name == "sender" && !self.declared("msg") {
                        return Value::MsgSender;
                    }
                }
                Value::member(self.pure_value(base), m.name.clone())
            }
            E::Variable(id) => Value::Var(id.name.clone()),
            E::ArraySubscript(_, base, Some(key)) => Value::index(self.pure_value(base), self.pure_value(key)),
            E::Parenthesis(_, inner) => self.pure_value(inner),
            E::Add(_, l, r)
            | E::Subtract(_, l, r)
            | E::Multiply(_, l, r)
            | E::Divide(_, l, r)
            | E::Equal(_, l, r)
            | E::NotEqual(_, l, r)
            | E::And(_, l, r)
            | E::Or(_, l, r) => Value::Op(vec![self.pure_value(l), self.pure_value(r)]),
            E::NumberLiteral(_, n, _, _) => Value::Literal(n.clone()),
            E::BoolLiteral(_, b) => Value::Literal(b.to_string()),
            E::FunctionCall(_, callee, args) if matches!(callee.as_ref(), E::Type(..)) => {
                Value::Op(args.iter().map(|a| self.pure_value(a)).collect())
            }
            _ => Value::Opaque,
        }
    }

    /// Evaluates subexpressions of an assignment target that may have side
    /// effects (calls inside index expressions).
    fn eval_target_parts(&mut self, e: &Expression) {
        match e {
            Expression::ArraySubscript(_, base, key) => {
                self.eval_target_parts(base);
                if let Some(k) = key {
                    self.eval(k);
                }
            }
            Expression::MemberAccess(_, base, _) | Expression::Parenthesis(_, base) => self.eval_target_parts(base),
            _ => {}
        }
    }

    fn write(&mut self, target: &Expression, sources: Vec<Value>, span: Span) {
        match target.strip_parentheses() {
            Expression::List(_, items) => {
                for (_, p) in items.iter() {
                    let Some(p) = p else { continue };
                    match &p.name {
                        Some(n) => {
                            self.emit(InstrKind::Assign(n.name.clone()), sources.clone(), span);
                        }
                        None => self.write(&p.ty, sources.clone(), span),
                    }
                }
            }
            t => {
                self.eval_target_parts(t);
                let kind = match root_name(t) {
                    Some(n) if self.is_state(n) => InstrKind::StateWrite(n.to_string()),
                    Some(n) => InstrKind::Assign(n.to_string()),
                    None => InstrKind::Other,
                };
                self.emit(kind, sources, span);
            }
        }
    }

    fn call(&mut self, e: &Expression) -> Value {
        let span = Span::of(&e.loc());
        let (mut callee, args): (&Expression, Vec<&Expression>) = match e {
            Expression::FunctionCall(_, c, args) => (c, args.iter().collect()),
            Expression::NamedFunctionCall(_, c, args) => (c, args.iter().map(|a| &a.expr).collect()),
            _ => unreachable!("call() on a non-call expression"),
        };
        let mut value: Option<&Expression> = None;
        loop {
            match callee {
                Expression::FunctionCallBlock(_, inner, block) => {
                    if let Statement::Args(_, named) = block.as_ref() {
                        if let Some(v) = named.iter().find(|n| n.name.name == "value") {
                            value = Some(&v.expr);
                        }
                    }
                    callee = inner;
                }
                // pre-0.7 `addr.call.value(v)(...)` and `.gas(g)`
                Expression::FunctionCall(_, inner, a) if a.len() == 1 => match inner.as_ref() {
                    Expression::MemberAccess(_, b, m)
                        if (m.name == "value" || m.name == "gas")
                            && matches!(b.as_ref(), Expression::MemberAccess(..)) =>
                    {
                        if m.name == "value" {
                            value = Some(&a[0]);
                        }
                        callee = b;
                    }
                    _ => break,
                },
                Expression::Parenthesis(_, inner) => callee = inner,
                _ => break,
            }
        }
        match callee {
            Expression::Variable(id) => self.plain_call(&id.name, &args, span),
            Expression::MemberAccess(_, base, m) => self.member_call(base, &m.name, &args, value, span),
            Expression::Type(..) => Value::Op(args.iter().map(|a| self.eval(a)).collect()),
            other => {
                self.eval(other);
                let vals = args.iter().map(|a| self.eval(a)).collect();
                self.emit(InstrKind::Other, vals, span);
                Value::Opaque
            }
        }
    }

    fn plain_call(&mut self, name: &str, args: &[&Expression], span: Span) -> Value {
        let vals: Vec<Value> = args.iter().map(|a| self.eval(a)).collect();
        let builtin = !self.declared(name) && !self.is_known_function(name);
        if builtin {
            match name {
                "selfdestruct" | "suicide" => {
                    self.emit(InstrKind::SolidityCall(name.into()), vals, span);
                    return Value::Opaque;
                }
                "require" | "assert" => {
                    self.emit(InstrKind::Condition, vals, span);
                    return Value::Opaque;
                }
                "revert" => {
                    self.emit(InstrKind::SolidityCall("revert".into()), vals, span);
                    return Value::Opaque;
                }
                "type" => return Value::Opaque,
                n if HASH_BUILTINS.contains(&n) => {
                    self.emit(InstrKind::SolidityCall(n.into()), vals, span);
                    return Value::Opaque;
                }
                _ => {}
            }
            if self.table.is_type_name(name) || self.table.is_error(name) || self.looks_like_cast(name) && vals.len() == 1
            {
                return Value::Op(vals);
            }
            if self.table.is_event(name) {
                self.emit(InstrKind::Other, vals, span);
                return Value::Opaque;
            }
        }
        if self.declared(name) {
            // call through a function-typed variable
            self.emit(InstrKind::Other, vals, span);
            return Value::Opaque;
        }
        let idx = self.emit(
            InstrKind::InternalCall(InternalCallee {
                name: name.to_string(),
                qualifier: None,
            }),
            vals,
            span,
        );
        Value::Call(idx)
    }

    fn member_call(
        &mut self,
        base: &Expression,
        member: &str,
        args: &[&Expression],
        value: Option<&Expression>,
        span: Span,
    ) -> Value {
        let base = base.strip_parentheses();
        let mut receiver_is_this = false;
        if let Expression::Variable(b) = base {
            if !self.declared(&b.name) {
                match b.name.as_str() {
                    "abi" | "bytes" | "string" => {
                        let vals = args.iter().map(|a| self.eval(a)).collect::<Vec<_>>();
                        self.emit(InstrKind::SolidityCall(format!("{}.{member}", b.name)), vals.clone(), span);
                        return Value::Op(vals);
                    }
                    "msg" | "block" | "tx" => {
                        let vals = args.iter().map(|a| self.eval(a)).collect();
                        self.emit(InstrKind::SolidityCall(format!("{}.{member}", b.name)), vals, span);
                        return Value::Opaque;
                    }
                    "super" => {
                        let vals = args.iter().map(|a| self.eval(a)).collect();
                        let idx = self.emit(
                            InstrKind::InternalCall(InternalCallee {
                                name: member.into(),
                                qualifier: Some(Qualifier::Super),
                            }),
                            vals,
                            span,
                        );
                        return Value::Call(idx);
                    }
                    "this" => receiver_is_this = true,
                    n if self.table.is_contract_name(n) => {
                        let vals = args.iter().map(|a| self.eval(a)).collect();
                        let idx = self.emit(
                            InstrKind::InternalCall(InternalCallee {
                                name: member.into(),
                                qualifier: Some(Qualifier::Named(n.into())),
                            }),
                            vals,
                            span,
                        );
                        return Value::Call(idx);
                    }
                    _ => {}
                }
            }
        }
        let recv = self.eval(base);
        let mut vals: Vec<Value> = args.iter().map(|a| self.eval(a)).collect();
        let value = value.map(|v| self.eval(v));
        let ty = self.ty_of(base);
        let receiver = if receiver_is_this {
            Receiver::This
        } else {
            match &ty {
                Ty::Address => Receiver::Address,
                Ty::Contract(c) => Receiver::Contract(c.clone()),
                _ => Receiver::Unknown,
            }
        };
        let addressish = matches!(ty, Ty::Address | Ty::Contract(_) | Ty::Unknown);
        if LOW_LEVEL.contains(&member) && addressish {
            if let Some(v) = value {
                self.emit(InstrKind::Transfer, vec![recv.clone(), v], span);
            }
            vals.insert(0, recv);
            self.emit(InstrKind::LowLevelCall(member.into()), vals, span);
            return Value::Opaque;
        }
        if (member == "transfer" || member == "send") && vals.len() == 1 && !receiver_is_this {
            let builtin = match &ty {
                Ty::Address | Ty::Unknown => true,
                Ty::Contract(c) => !self.table.contract_defines(c, member, 1),
                _ => false,
            };
            if builtin {
                vals.insert(0, recv);
                self.emit(InstrKind::Transfer, vals, span);
                return Value::Opaque;
            }
        }
        if (member == "push" || member == "pop") && !matches!(ty, Ty::Address | Ty::Contract(_)) {
            if let Some(root) = root_name(base) {
                let kind = if self.is_state(root) {
                    InstrKind::StateWrite(root.to_string())
                } else {
                    InstrKind::Assign(root.to_string())
                };
                self.emit(kind, vals, span);
                return Value::Opaque;
            }
        }
        if !receiver_is_this {
            if let Some(lib) = self.table.bound_library(member, vals.len() + 1) {
                vals.insert(0, recv);
                let idx = self.emit(
                    InstrKind::InternalCall(InternalCallee {
                        name: member.into(),
                        qualifier: Some(Qualifier::Named(lib.into())),
                    }),
                    vals,
                    span,
                );
                return Value::Call(idx);
            }
        }
        if !(addressish || receiver_is_this) {
            self.emit(InstrKind::Other, vals, span);
            return Value::Opaque;
        }
        if let Some(v) = value {
            self.emit(InstrKind::Transfer, vec![recv.clone(), v], span);
        }
        vals.insert(0, recv);
        if self.opts.token_transfer_patterns.iter().any(|p| p == member) {
            self.emit(InstrKind::Transfer, vals, span);
        } else {
            self.emit(
                InstrKind::HighLevelCall {
                    receiver,
                    member: member.into(),
                },
                vals,
                span,
            );
        }
        Value::Opaque
    }
}

/// The variable an lvalue ultimately writes: `a` in `a[i].b = ..`.
pub(crate) fn root_name(e: &Expression) -> Option<&str> {
    match e {
        Expression::Variable(id) => Some(&id.name),
        Expression::ArraySubscript(_, b, _) | Expression::MemberAccess(_, b, _) | Expression::Parenthesis(_, b) => {
            root_name(b)
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;
    use crate::ir::IrFunction;

    fn lower(src: &str) -> Vec<IrFunction> {
        lower_tree(&parse(src).unwrap(), &LowerOptions::default())
    }

    fn kinds(f: &IrFunction) -> Vec<InstrKind> {
        f.cfg.instructions().into_iter().map(|i| i.kind.clone()).collect()
    }

    #[test]
    fn simple_bank_withdraw() {
        let src = "contract SimpleBank { mapping(address => uint256) private balances;
            function withdraw(uint256 amount) external {
                require(balances[msg.sender] >= amount, \"Insufficient balance\");
                balances[msg.sender] -= amount;
            } }";
        let f = &lower(src)[0];
        assert_eq!(f.cfg.blocks.len(), 2);
        assert_eq!(f.cfg.blocks[0].instructions[0].kind, InstrKind::Condition);
        assert_eq!(
            f.cfg.blocks[0].instructions[0].operands,
            vec![Value::index(Value::Var("balances".into()), Value::MsgSender), Value::Var("amount".into())]
        );
        assert_eq!(f.cfg.blocks[1].instructions[0].kind, InstrKind::StateWrite("balances".into()));
        assert!(f.cfg.edges.contains(&Edge { from: 0, to: Target::Revert, label: EdgeLabel::False }));
        assert!(f.cfg.edges.contains(&Edge { from: 0, to: Target::Block(1), label: EdgeLabel::True }));
    }

    #[test]
    fn selfdestruct_and_transfers() {
        let src = "contract C { address owner;
            function a(address payable b) external { selfdestruct(b); }
            function s() public { suicide(owner); }
            function t(address payable to) public { to.transfer(1); to.send(2); }
            function v(address to) public { to.call{value: 1}(\"\"); to.call.value(2)(); to.delegatecall(\"\"); }
        }";
        let fs = lower(src);
        assert_eq!(kinds(&fs[0]), vec![InstrKind::SolidityCall("selfdestruct".into())]);
        assert!(kinds(&fs[1])[0].is_selfdestruct());
        assert_eq!(kinds(&fs[2]), vec![InstrKind::Transfer, InstrKind::Transfer]);
        assert_eq!(
            kinds(&fs[3]),
            vec![
                InstrKind::Transfer,
                InstrKind::LowLevelCall("call".into()),
                InstrKind::Transfer,
                InstrKind::LowLevelCall("call".into()),
                InstrKind::LowLevelCall("delegatecall".into()),
            ]
        );
    }

    #[test]
    fn locals_shadow_state() {
        let src = "contract C { uint x; uint[] xs; struct S { uint a; } S s;
            function f(uint x) public { x = 1; }
            function g() public { uint y; y = 2; x += 1; delete x; x++; xs.push(1); s.a = 3; }
        }";
        let fs = lower(src);
        assert_eq!(kinds(&fs[0]), vec![InstrKind::Assign("x".into())]);
        let g = kinds(&fs[1]);
        assert_eq!(g[0], InstrKind::Assign("y".into()));
        assert!(g[1..].iter().all(|k| matches!(k, InstrKind::StateWrite(_))), "{g:?}");
        assert_eq!(g.len(), 6);
    }

    #[test]
    fn calls_are_classified() {
        let src = "interface IToken { function transfer(address to, uint v) external returns (bool); }
            library L { function add(uint a, uint b) internal pure returns (uint) { return a + b; } }
            contract B { function hook() internal {} }
            contract C is B { using L for uint; IToken token;
            function f(uint a) public { token.transfer(msg.sender, a); IToken(msg.sender).transfer(msg.sender, 1);
                a.add(1); L.add(a, 2); g(); super.hook(); this.f(1); keccak256(abi.encodePacked(a)); }
            function g() internal {} }";
        let fs = lower(src);
        let f = fs.iter().find(|f| f.info.name == "f").unwrap();
        let k = kinds(f);
        assert!(matches!(&k[0], InstrKind::HighLevelCall { receiver: Receiver::Contract(c), member } if c == "IToken" && member == "transfer"));
        assert!(matches!(&k[1], InstrKind::HighLevelCall { .. }));
        assert!(matches!(&k[2], InstrKind::InternalCall(c) if c.qualifier == Some(Qualifier::Named("L".into()))));
        assert_eq!(f.cfg.instructions()[2].operands.len(), 2);
        assert!(matches!(&k[3], InstrKind::InternalCall(c) if c.name == "add"));
        assert!(matches!(&k[4], InstrKind::InternalCall(c) if c.name == "g" && c.qualifier.is_none()));
        assert!(matches!(&k[5], InstrKind::InternalCall(c) if c.qualifier == Some(Qualifier::Super)));
        assert!(matches!(&k[6], InstrKind::HighLevelCall { receiver: Receiver::This, .. }));
        assert_eq!(k[7], InstrKind::SolidityCall("abi.encodePacked".into()));
        assert_eq!(k[8], InstrKind::SolidityCall("keccak256".into()));
    }

    #[test]
    fn token_patterns_promote() {
        let src = "contract C { function f(address t) public { IERC20(t).transfer(msg.sender, 1); } }";
        let tree = parse(src).unwrap();
        let opts = LowerOptions {
            token_transfer_patterns: vec!["transfer".into()],
        };
        let fs = lower_tree(&tree, &opts);
        assert_eq!(kinds(&fs[0]), vec![InstrKind::Transfer]);
        let fs = lower_tree(&tree, &LowerOptions::default());
        assert!(matches!(kinds(&fs[0])[0], InstrKind::HighLevelCall { .. }));
    }

    #[test]
    fn empty_body_is_single_block() {
        let f = &lower("contract C { function f() public {} }")[0];
        assert_eq!(f.cfg.blocks.len(), 1);
        assert!(f.cfg.blocks[0].instructions.is_empty());
        assert_eq!(f.cfg.adjacency(), vec![(0, Target::Return, EdgeLabel::Seq)]);
    }

    #[test]
    fn assembly_is_opaque() {
        let f = &lower("contract C { function f() public { assembly { sstore(0, 1) } } }")[0];
        assert_eq!(f.unsupported.len(), 1);
        assert!(f.cfg.blocks.iter().any(|b| b.opaque));
    }

    #[test]
    fn legacy_throw_reverts() {
        let src = "pragma solidity ^0.4.24; contract C { address owner; function f() public { if (msg.sender != owner) throw; selfdestruct(owner); } }";
        let f = &lower(src)[0];
        assert!(f.cfg.edges.iter().any(|e| e.to == Target::Revert));
        assert!(kinds(f).iter().any(|k| k.is_selfdestruct()));
    }

    #[test]
    fn indices_unique_and_increasing_in_blocks() {
        let src = "contract C { uint x; function f(uint a) public { for (uint i = 0; i < a; i++) { if (i == 2) { continue; } x = i; } while (a > 0) { a--; if (a == 1) break; } return; } }";
        let f = &lower(src)[0];
        let mut seen = std::collections::HashSet::new();
        for b in &f.cfg.blocks {
            for w in b.instructions.windows(2) {
                assert!(w[0].index < w[1].index);
            }
            for i in &b.instructions {
                assert!(seen.insert(i.index));
            }
        }
        assert_eq!(f.cfg.reachable().len(), f.cfg.blocks.len());
    }
}
