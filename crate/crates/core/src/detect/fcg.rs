//! Function call graph over one parsed source.

use std::collections::HashMap;

use serde::Serialize;

use crate::frontend::{FunctionInfo, FunctionKind, Signature, SyntaxTree};
use crate::ir::{
    linearize, lower_tree, Cfg, InstrKind, InternalCallee, IrFunction, LowerOptions, Qualifier, Receiver,
    Value,
};
use crate::sensitive::SensitiveLabel;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FcgNode {
    pub function: FunctionInfo,
    pub cfg: Cfg,
    pub sensitivity: SensitiveLabel,
    /// Resolved modifiers, in invocation order.
    pub modifiers: Vec<NodeId>,
    /// Arguments passed to each entry of `modifiers`.
    pub modifier_args: Vec<Vec<Value>>,
    pub params: Vec<String>,
    pub returns: Vec<String>,
}

impl FcgNode {
    pub fn name(&self) -> &str {
        &self.function.name
    }

    pub fn visibility(&self) -> crate::frontend::Visibility {
        self.function.visibility
    }

    pub fn kind(&self) -> FunctionKind {
        self.function.kind
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    /// Same call frame: plain, `super.`, qualified and library calls.
    Internal,
    /// A message call to a function defined in this source (`this.f()`,
    /// `C(addr).f()`).
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct FcgEdge {
    pub caller: NodeId,
    pub callee: NodeId,
    pub call_index: usize,
    pub kind: CallKind,
}

/// A call site whose target is not defined in this source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExternalCallSite {
    pub caller: NodeId,
    pub call_index: usize,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fcg {
    pub nodes: Vec<FcgNode>,
    pub edges: Vec<FcgEdge>,
    pub external: Vec<ExternalCallSite>,
}

impl Fcg {
    pub fn node(&self, id: NodeId) -> &FcgNode {
        &self.nodes[id]
    }

    pub fn callees_at(&self, caller: NodeId, call_index: usize) -> impl Iterator<Item = &FcgEdge> {
        self.edges
            .iter()
            .filter(move |e| e.caller == caller && e.call_index == call_index)
    }

    pub fn internal_edges_from(&self, caller: NodeId) -> impl Iterator<Item = &FcgEdge> {
        self.edges
            .iter()
            .filter(move |e| e.caller == caller && e.kind == CallKind::Internal)
    }

    /// `(caller, callee)` qualified names, for comparison with other views
    /// of the same graph.
    pub fn edge_names(&self) -> Vec<(String, String)> {
        let mut v: Vec<_> = self
            .edges
            .iter()
            .map(|e| (self.nodes[e.caller].function.qualified_name(), self.nodes[e.callee].function.qualified_name()))
            .collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn find(&self, qualified: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.function.qualified_name() == qualified)
    }
}

struct Resolver<'a> {
    tree: &'a SyntaxTree,
    fns: &'a [IrFunction],
    by_contract: HashMap<&'a str, Vec<NodeId>>,
}

impl<'a> Resolver<'a> {
    fn new(tree: &'a SyntaxTree, fns: &'a [IrFunction]) -> Self {
        let mut by_contract: HashMap<&str, Vec<NodeId>> = HashMap::new();
        for (i, f) in fns.iter().enumerate() {
            by_contract.entry(f.info.contract_name.as_str()).or_default().push(i);
        }
        Self { tree, fns, by_contract }
    }

    fn matching(&self, contract: &str, name: &str, arity: usize, modifier: bool) -> Vec<NodeId> {
        self.by_contract
            .get(contract)
            .into_iter()
            .flatten()
            .copied()
            .filter(|&i| {
                let f = &self.fns[i].info;
                f.name == name
                    && f.parameter_types.len() == arity
                    && (f.kind == FunctionKind::Modifier) == modifier
                    && f.has_body
            })
            .collect()
    }

    /// Contract names searched for `name`, most derived first.
    fn levels(&self, contract: &str, skip_self: bool) -> Vec<String> {
        let Some(c) = self.tree.contract(contract) else {
            return Vec::new();
        };
        linearize(self.tree, c)
            .into_iter()
            .skip(usize::from(skip_self))
            .map(|c| crate::frontend::ident(&c.name).to_string())
            .collect()
    }

    fn first_level(&self, levels: &[String], name: &str, arity: usize, modifier: bool) -> Vec<NodeId> {
        for l in levels {
            let hits = self.matching(l, name, arity, modifier);
            if !hits.is_empty() {
                return hits;
            }
        }
        Vec::new()
    }

    fn internal(&self, caller: &FunctionInfo, callee: &InternalCallee, arity: usize) -> Vec<NodeId> {
        match &callee.qualifier {
            None => {
                let hits = self.first_level(&self.levels(&caller.contract_name, false), &callee.name, arity, false);
                if hits.is_empty() {
                    self.matching("", &callee.name, arity, false)
                } else {
                    hits
                }
            }
            Some(Qualifier::Super) => self.first_level(&self.levels(&caller.contract_name, true), &callee.name, arity, false),
            Some(Qualifier::Named(q)) => self.first_level(&self.levels(q, false), &callee.name, arity, false),
        }
    }

    fn modifier(&self, caller: &FunctionInfo, name: &str, arity: usize) -> Option<NodeId> {
        self.first_level(&self.levels(&caller.contract_name, false), name, arity, true)
            .into_iter()
            .next()
    }

    fn message_call(&self, caller: &FunctionInfo, receiver: &Receiver, member: &str, arity: usize) -> Vec<NodeId> {
        let target = match receiver {
            Receiver::This => caller.contract_name.as_str(),
            Receiver::Contract(t) => t.as_str(),
            _ => return Vec::new(),
        };
        let hits = self.first_level(&self.levels(target, false), member, arity, false);
        hits.into_iter()
            .filter(|&i| self.fns[i].info.visibility.is_entry_point())
            .collect()
    }
}

/// Builds the call graph. `labels` assigns sensitivity to the functions
/// they match; every other node is labeled not sensitive.
pub fn build_fcg(tree: &SyntaxTree, labels: &[(Signature, SensitiveLabel)], opts: &LowerOptions) -> Fcg {
    let fns = lower_tree(tree, opts);
    build_fcg_from(tree, fns, labels)
}

pub fn build_fcg_from(tree: &SyntaxTree, fns: Vec<IrFunction>, labels: &[(Signature, SensitiveLabel)]) -> Fcg {
    let r = Resolver::new(tree, &fns);
    let mut edges = Vec::new();
    let mut external = Vec::new();
    let mut mods: Vec<(Vec<NodeId>, Vec<Vec<Value>>)> = Vec::new();
    for (id, f) in fns.iter().enumerate() {
        let (mut ids, mut args) = (Vec::new(), Vec::new());
        for m in &f.modifiers {
            if let Some(mid) = r.modifier(&f.info, &m.name, m.args.len()) {
                ids.push(mid);
                args.push(m.args.clone());
            }
        }
        mods.push((ids, args));
        for ins in f.cfg.instructions() {
            let (targets, kind, name) = match &ins.kind {
                InstrKind::InternalCall(c) => (r.internal(&f.info, c, ins.operands.len()), CallKind::Internal, &c.name),
                InstrKind::HighLevelCall { receiver, member } => (
                    r.message_call(&f.info, receiver, member, ins.operands.len().saturating_sub(1)),
                    CallKind::External,
                    member,
                ),
                _ => continue,
            };
            if targets.is_empty() {
                external.push(ExternalCallSite {
                    caller: id,
                    call_index: ins.index,
                    name: name.clone(),
                });
            }
            for callee in targets {
                edges.push(FcgEdge {
                    caller: id,
                    callee,
                    call_index: ins.index,
                    kind,
                });
            }
        }
    }
    let nodes = fns
        .into_iter()
        .zip(mods)
        .map(|(f, (modifiers, modifier_args))| {
            let sensitivity = labels
                .iter()
                .find(|(s, _)| f.info.kind != FunctionKind::Modifier && f.info.matches(s))
                .map(|(_, l)| l.clone())
                .unwrap_or_else(SensitiveLabel::none);
            FcgNode {
                function: f.info,
                cfg: f.cfg,
                sensitivity,
                modifiers,
                modifier_args,
                params: f.params,
                returns: f.returns,
            }
        })
        .collect();
    Fcg { nodes, edges, external }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    fn fcg(src: &str) -> Fcg {
        build_fcg(&parse(src).unwrap(), &[], &LowerOptions::default())
    }

    #[test]
    fn single_node_no_edges() {
        let g = fcg("contract EtherCharity { function donate(address payable b) external { selfdestruct(b); } }");
        assert_eq!(g.nodes.len(), 1);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn chain_and_resolution_rules() {
        let src = "library L { function inc(uint a) internal pure returns (uint) { return a + 1; } }
            interface I { function ping() external; }
            contract A { function g() internal virtual {} function h(uint) internal {} }
            contract B is A { using L for uint;
                function g() internal override { super.g(); h(1); }
                function f(I i) public { g(); A.h(2); uint x = 1; x.inc(); this.k(); i.ping(); }
                function k() public {} }";
        let g = fcg(src);
        let mut names = g.edge_names();
        names.sort();
        assert_eq!(
            names,
            vec![
                ("B.f(I)".to_string(), "A.h(uint256)".to_string()),
                ("B.f(I)".into(), "B.g()".into()),
                ("B.f(I)".into(), "B.k()".into()),
                ("B.f(I)".into(), "L.inc(uint256)".into()),
                ("B.g()".into(), "A.g()".into()),
                ("B.g()".into(), "A.h(uint256)".into()),
            ]
        );
        let f = g.find("B.f(I)").unwrap();
        let kinds: Vec<_> = g.edges.iter().filter(|e| e.caller == f).map(|e| e.kind).collect();
        assert_eq!(kinds.iter().filter(|k| **k == CallKind::External).count(), 1);
        assert_eq!(g.external.len(), 1);
        assert_eq!(g.external[0].name, "ping");
    }

    #[test]
    fn modifiers_are_linked() {
        let src = "contract O { address owner; modifier onlyOwner() { require(msg.sender == owner); _; }
            modifier at(address a) { require(msg.sender == a); _; }
            function f() public onlyOwner at(owner) {} }";
        let g = fcg(src);
        let f = g.find("O.f()").unwrap();
        assert_eq!(g.nodes[f].modifiers.len(), 2);
        assert_eq!(g.nodes[f].modifier_args[1], vec![Value::Var("owner".into())]);
    }
}
