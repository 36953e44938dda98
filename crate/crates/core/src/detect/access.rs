//! Locating `msg.sender` permission checks.

use std::cell::Cell;
use std::collections::{BTreeSet, HashSet};

use serde::Serialize;

use super::fcg::{CallKind, Fcg, NodeId};
use super::AnalysisTimeout;
use crate::deadline::Deadline;
use crate::ir::{InstrKind, Value};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AcScope {
    #[serde(rename = "self")]
    Self_,
    /// Qualified names of the call chain, nearest callee first.
    Callee { path: Vec<String> },
    Modifier { name: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct AcLocation {
    pub scope: AcScope,
    /// Position in the analyzed function: 0 for modifiers, the call-site
    /// index for callee checks, the condition's own index otherwise.
    pub index: usize,
}

/// Search context shared by one question about one function.
pub struct Search<'g> {
    pub fcg: &'g Fcg,
    pub max_depth: usize,
    pub deadline: &'g Deadline,
    /// Longest call chain (in edges) any traversal entered.
    pub max_path: Cell<usize>,
}

impl<'g> Search<'g> {
    pub fn new(fcg: &'g Fcg, max_depth: usize, deadline: &'g Deadline) -> Self {
        Self {
            fcg,
            max_depth,
            deadline,
            max_path: Cell::new(0),
        }
    }

    pub(crate) fn enter(&self, depth: usize) -> Result<(), AnalysisTimeout> {
        debug_assert!(depth <= self.max_depth);
        if depth > self.max_path.get() {
            self.max_path.set(depth);
        }
        self.deadline.check().map_err(|e| AnalysisTimeout { limit: e.limit })
    }

    /// Whether `v`, read inside `node`, can carry the value of `msg.sender`.
    /// `bound` lists the node's parameters known to be dependent; `depth`
    /// is the number of call edges already traversed.
    pub fn is_msg_sender_dependent(
        &self,
        v: &Value,
        node: NodeId,
        bound: &BTreeSet<usize>,
        depth: usize,
    ) -> Result<bool, AnalysisTimeout> {
        let mut seen = HashSet::new();
        self.dep(v, node, bound, depth, &mut seen)
    }

    fn dep(
        &self,
        v: &Value,
        node: NodeId,
        bound: &BTreeSet<usize>,
        depth: usize,
        seen: &mut HashSet<(NodeId, String)>,
    ) -> Result<bool, AnalysisTimeout> {
        let n = self.fcg.node(node);
        Ok(match v {
            Value::MsgSender => true,
            Value::Literal(_) | Value::Opaque => false,
            Value::Index(b, k) => self.dep(b, node, bound, depth, seen)? || self.dep(k, node, bound, depth, seen)?,
            Value::Member(b, _) => self.dep(b, node, bound, depth, seen)?,
            Value::Op(vs) => {
                for x in vs {
                    if self.dep(x, node, bound, depth, seen)? {
                        return Ok(true);
                    }
                }
                false
            }
            Value::Var(name) => {
                if n.params.iter().position(|p| p == name).is_some_and(|i| bound.contains(&i)) {
                    return Ok(true);
                }
                if !seen.insert((node, name.clone())) {
                    return Ok(false);
                }
                for ins in n.cfg.instructions() {
                    if ins.kind == InstrKind::Assign(name.clone()) {
                        for src in &ins.operands {
                            if self.dep(src, node, bound, depth, seen)? {
                                return Ok(true);
                            }
                        }
                    }
                }
                false
            }
            Value::Call(site) => {
                if depth + 1 > self.max_depth {
                    return Ok(false);
                }
                let Some(call) = n.cfg.instruction(*site) else {
                    return Ok(false);
                };
                let callees: Vec<NodeId> = self
                    .fcg
                    .callees_at(node, *site)
                    .filter(|e| e.kind == CallKind::Internal)
                    .map(|e| e.callee)
                    .collect();
                for c in callees {
                    let cb = self.bind(&call.operands, node, bound, depth, seen)?;
                    self.enter(depth + 1)?;
                    let callee = self.fcg.node(c);
                    let mut inner = HashSet::new();
                    for ins in callee.cfg.instructions() {
                        if ins.kind == InstrKind::Return {
                            for r in &ins.operands {
                                if self.dep(r, c, &cb, depth + 1, &mut inner)? {
                                    return Ok(true);
                                }
                            }
                        }
                    }
                    for r in callee.returns.iter().filter(|r| !r.is_empty()) {
                        if self.dep(&Value::Var(r.clone()), c, &cb, depth + 1, &mut inner)? {
                            return Ok(true);
                        }
                    }
                }
                false
            }
        })
    }

    /// Positions of `args` (evaluated in `node`) that are dependent.
    fn bind(
        &self,
        args: &[Value],
        node: NodeId,
        bound: &BTreeSet<usize>,
        depth: usize,
        seen: &mut HashSet<(NodeId, String)>,
    ) -> Result<BTreeSet<usize>, AnalysisTimeout> {
        let mut out = BTreeSet::new();
        for (i, a) in args.iter().enumerate() {
            if self.dep(a, node, bound, depth, seen)? {
                out.insert(i);
            }
        }
        Ok(out)
    }

    /// Index of the first qualifying condition in `node`'s own body.
    fn own_check(&self, node: NodeId, bound: &BTreeSet<usize>, depth: usize) -> Result<Option<usize>, AnalysisTimeout> {
        for b in &self.fcg.node(node).cfg.blocks {
            self.deadline.check().map_err(|e| AnalysisTimeout { limit: e.limit })?;
            if b.opaque {
                continue;
            }
            for ins in &b.instructions {
                if ins.kind != InstrKind::Condition {
                    continue;
                }
                for op in &ins.operands {
                    if self.is_msg_sender_dependent(op, node, bound, depth)? {
                        return Ok(Some(ins.index));
                    }
                }
            }
        }
        Ok(None)
    }

    /// Whether `node` or anything it calls internally within the remaining
    /// depth contains a qualifying check. Returns the call path to the
    /// function holding it (empty for `node` itself).
    fn check_below(
        &self,
        node: NodeId,
        bound: &BTreeSet<usize>,
        depth: usize,
        stack: &mut Vec<NodeId>,
    ) -> Result<Option<Vec<String>>, AnalysisTimeout> {
        self.enter(depth)?;
        if self.own_check(node, bound, depth)?.is_some() {
            return Ok(Some(Vec::new()));
        }
        if depth == self.max_depth {
            return Ok(None);
        }
        stack.push(node);
        let n = self.fcg.node(node);
        let mut edges: Vec<_> = self.fcg.internal_edges_from(node).copied().collect();
        edges.sort_by_key(|e| (e.call_index, e.callee));
        for e in edges {
            if stack.contains(&e.callee) {
                continue;
            }
            let Some(call) = n.cfg.instruction(e.call_index) else { continue };
            let mut seen = HashSet::new();
            let cb = self.bind(&call.operands, node, bound, depth, &mut seen)?;
            if let Some(mut path) = self.check_below(e.callee, &cb, depth + 1, stack)? {
                path.insert(0, self.fcg.node(e.callee).function.qualified_name());
                stack.pop();
                return Ok(Some(path));
            }
        }
        stack.pop();
        Ok(None)
    }

    /// The earliest permission check guarding `node`: its modifiers, its own
    /// body, or internal callees within the depth bound.
    pub fn access_control_search(&self, node: NodeId) -> Result<Option<AcLocation>, AnalysisTimeout> {
        let n = self.fcg.node(node);
        let none = BTreeSet::new();
        self.enter(0)?;
        for (m, args) in n.modifiers.iter().zip(&n.modifier_args) {
            let mut seen = HashSet::new();
            let bound = self.bind(args, node, &none, 0, &mut seen)?;
            if self.check_below(*m, &bound, 0, &mut vec![node])?.is_some() {
                return Ok(Some(AcLocation {
                    scope: AcScope::Modifier {
                        name: self.fcg.node(*m).function.name.clone(),
                    },
                    index: 0,
                }));
            }
        }
        let own = self.own_check(node, &none, 0)?;
        let mut best = own.map(|i| AcLocation {
            scope: AcScope::Self_,
            index: i,
        });
        if self.max_depth == 0 {
            return Ok(best);
        }
        let mut edges: Vec<_> = self.fcg.internal_edges_from(node).copied().collect();
        edges.sort_by_key(|e| (e.call_index, e.callee));
        for e in edges {
            if best.as_ref().is_some_and(|b| b.index <= e.call_index) {
                break;
            }
            if e.callee == node {
                continue;
            }
            let Some(call) = n.cfg.instruction(e.call_index) else { continue };
            let mut seen = HashSet::new();
            let cb = self.bind(&call.operands, node, &none, 0, &mut seen)?;
            if let Some(mut path) = self.check_below(e.callee, &cb, 1, &mut vec![node])? {
                path.insert(0, self.fcg.node(e.callee).function.qualified_name());
                best = Some(AcLocation {
                    scope: AcScope::Callee { path },
                    index: e.call_index,
                });
                break;
            }
        }
        Ok(best)
    }
}
