//! The four risky actions.

use std::collections::BTreeMap;

use serde::Serialize;

use super::access::Search;
use super::fcg::NodeId;
use super::AnalysisTimeout;
use crate::frontend::Span;
use crate::ir::{InstrKind, IrInstruction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskyAction {
    RiskyTransfer,
    RiskyStateWrite,
    LowLevelExternalCall,
    Selfdestruct,
}

impl RiskyAction {
    pub const ALL: [RiskyAction; 4] = [
        RiskyAction::RiskyTransfer,
        RiskyAction::RiskyStateWrite,
        RiskyAction::LowLevelExternalCall,
        RiskyAction::Selfdestruct,
    ];

    pub fn rule_id(self) -> &'static str {
        match self {
            RiskyAction::RiskyTransfer => "risky-transfer",
            RiskyAction::RiskyStateWrite => "risky-state-write",
            RiskyAction::LowLevelExternalCall => "low-level-call",
            RiskyAction::Selfdestruct => "unprotected-selfdestruct",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RiskyAction::RiskyTransfer => "risky transfer",
            RiskyAction::RiskyStateWrite => "risky state write",
            RiskyAction::LowLevelExternalCall => "low-level call",
            RiskyAction::Selfdestruct => "selfdestruct",
        }
    }
}

/// Where a risky action happens, seen from the analyzed function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RiskyLocation {
    /// Instruction index in the analyzed function; the call site when the
    /// action itself is in a callee.
    pub index: usize,
    pub span: Span,
    /// Qualified name of the function holding the action instruction.
    pub in_function: String,
    pub action_span: Span,
}

struct Hit {
    index: usize,
    span: Span,
    node: NodeId,
    action_span: Span,
}

impl<'g> Search<'g> {
    /// Earliest location of each risky action in `node` and its internal
    /// callees within the depth bound. Modifier bodies are not part of the
    /// scope.
    pub fn risky_actions_search(&self, node: NodeId) -> Result<Vec<(RiskyAction, RiskyLocation)>, AnalysisTimeout> {
        let mut hits: BTreeMap<&'static str, Hit> = BTreeMap::new();
        let mut record = |key: &'static str, h: Hit| match hits.get(key) {
            Some(e) if e.index <= h.index => {}
            _ => {
                hits.insert(key, h);
            }
        };
        let mut stack = vec![node];
        self.scan(node, 0, None, &mut stack, &mut |ins, at, holder| {
            let key = match &ins.kind {
                InstrKind::Transfer => "transfer",
                InstrKind::StateWrite(_) => "write",
                InstrKind::LowLevelCall(_) => "lowlevel",
                k if k.is_selfdestruct() => "selfdestruct",
                _ => return,
            };
            let (index, span) = at.unwrap_or((ins.index, ins.span));
            record(
                key,
                Hit {
                    index,
                    span,
                    node: holder,
                    action_span: ins.span,
                },
            );
        })?;
        let loc = |h: &Hit| RiskyLocation {
            index: h.index,
            span: h.span,
            in_function: self.fcg.node(h.node).function.qualified_name(),
            action_span: h.action_span,
        };
        let mut out = Vec::new();
        let transfer = hits.get("transfer");
        let write = hits.get("write");
        if let (Some(t), None) = (transfer, write) {
            out.push((RiskyAction::RiskyTransfer, loc(t)));
        }
        if let (Some(w), None) = (write, transfer) {
            out.push((RiskyAction::RiskyStateWrite, loc(w)));
        }
        if let Some(h) = hits.get("lowlevel") {
            out.push((RiskyAction::LowLevelExternalCall, loc(h)));
        }
        if let Some(h) = hits.get("selfdestruct") {
            out.push((RiskyAction::Selfdestruct, loc(h)));
        }
        Ok(out)
    }

    /// Visits every instruction of `node` and of internal callees within
    /// depth. `at` is the first-level call site through which a callee was
    /// entered.
    fn scan(
        &self,
        node: NodeId,
        depth: usize,
        at: Option<(usize, Span)>,
        stack: &mut Vec<NodeId>,
        f: &mut impl FnMut(&IrInstruction, Option<(usize, Span)>, NodeId),
    ) -> Result<(), AnalysisTimeout> {
        self.enter(depth)?;
        let n = self.fcg.node(node);
        for b in &n.cfg.blocks {
            if b.opaque {
                continue;
            }
            for ins in &b.instructions {
                f(ins, at, node);
            }
        }
        if depth == self.max_depth {
            return Ok(());
        }
        let mut edges: Vec<_> = self.fcg.internal_edges_from(node).copied().collect();
        edges.sort_by_key(|e| (e.call_index, e.callee));
        for e in edges {
            if stack.contains(&e.callee) {
                continue;
            }
            let site = at.or_else(|| n.cfg.instruction(e.call_index).map(|i| (i.index, i.span)));
            stack.push(e.callee);
            self.scan(e.callee, depth + 1, site, stack, f)?;
            stack.pop();
        }
        Ok(())
    }
}
