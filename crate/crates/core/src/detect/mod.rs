//! Access-control vulnerability detection over a call graph.
//!
//! For each sensitive entry point the earliest `msg.sender` check and the
//! earliest occurrence of each risky action are located on the same linear
//! index scale; an action is reported when no check comes before it.

pub mod access;
pub mod fcg;
pub mod risky;

use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

pub use access::{AcLocation, AcScope, Search};
pub use fcg::{build_fcg, build_fcg_from, CallKind, ExternalCallSite, Fcg, FcgEdge, FcgNode, NodeId};
pub use risky::{RiskyAction, RiskyLocation};

use crate::config::AnalysisOptions;
use crate::deadline::Deadline;
use crate::frontend::{line_col, FunctionKind, Signature, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("analysis exceeded its time limit of {limit:?}")]
pub struct AnalysisTimeout {
    pub limit: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AcStatus {
    NoCheck,
    CheckAfterAction { check: AcLocation },
}

/// Where a finding lands in the scanned repository.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Origin {
    pub path: String,
    /// Reflection rounds the completed contract needed.
    pub iterations: usize,
    pub span: Span,
    pub start_line: usize,
    pub start_column: usize,
    pub end_line: usize,
    pub end_column: usize,
}

impl Origin {
    pub fn new(path: impl Into<String>, source: &str, span: Span, iterations: usize) -> Self {
        let (start_line, start_column) = char_line_col(source, span.start);
        let (end_line, end_column) = char_line_col(source, span.end);
        Self {
            path: path.into(),
            iterations,
            span,
            start_line,
            start_column,
            end_line,
            end_column,
        }
    }
}

/// 1-based line and code-point column of a byte offset.
fn char_line_col(source: &str, offset: usize) -> (usize, usize) {
    let (line, _) = line_col(source, offset);
    let mut off = offset.min(source.len());
    while !source.is_char_boundary(off) {
        off -= 1;
    }
    let start = source[..off].rfind('\n').map_or(0, |i| i + 1);
    (line, source[start..off].chars().count() + 1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub contract_name: String,
    pub function: Signature,
    pub risky_action: RiskyAction,
    pub location: RiskyLocation,
    pub ac_status: AcStatus,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectOutcome {
    pub findings: Vec<Finding>,
    /// Sensitive functions that were checked, flagged or not.
    pub analyzed: Vec<NodeId>,
    /// Longest call chain any traversal entered.
    pub max_path: usize,
}

fn is_entry(n: &FcgNode) -> bool {
    n.function.has_body
        && n.function.visibility.is_entry_point()
        && !matches!(n.function.kind, FunctionKind::Modifier | FunctionKind::Constructor)
}

/// Internal functions called, within the depth bound, from an entry point
/// that has no permission check of its own.
fn reachable_internal(s: &Search<'_>, fcg: &Fcg) -> Result<Vec<NodeId>, AnalysisTimeout> {
    let mut out = Vec::new();
    for (id, n) in fcg.nodes.iter().enumerate() {
        if !is_entry(n) || s.access_control_search(id)?.is_some() {
            continue;
        }
        let mut frontier = vec![id];
        let mut seen = vec![id];
        for _ in 0..s.max_depth {
            let mut next = Vec::new();
            for &f in &frontier {
                for e in fcg.internal_edges_from(f) {
                    if !seen.contains(&e.callee) {
                        seen.push(e.callee);
                        next.push(e.callee);
                    }
                }
            }
            frontier = next;
        }
        out.extend(seen.into_iter().skip(1));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

pub fn detect(fcg: &Fcg, opts: &AnalysisOptions, deadline: &Deadline) -> Result<Vec<Finding>, AnalysisTimeout> {
    detect_with_stats(fcg, opts, deadline).map(|o| o.findings)
}

pub fn detect_with_stats(fcg: &Fcg, opts: &AnalysisOptions, deadline: &Deadline) -> Result<DetectOutcome, AnalysisTimeout> {
    let s = Search::new(fcg, opts.max_call_depth, deadline);
    let mut targets: Vec<NodeId> = fcg
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| n.sensitivity.is_sensitive && is_entry(n))
        .map(|(i, _)| i)
        .collect();
    if opts.include_reachable_internal {
        for id in reachable_internal(&s, fcg)? {
            let n = fcg.node(id);
            let internal = !n.function.visibility.is_entry_point() && n.function.kind == FunctionKind::Function;
            if internal && n.sensitivity.is_sensitive && n.function.has_body && !targets.contains(&id) {
                targets.push(id);
            }
        }
        targets.sort_unstable();
    }
    let mut findings = Vec::new();
    for &id in &targets {
        let n = fcg.node(id);
        let check = s.access_control_search(id)?;
        for (action, loc) in s.risky_actions_search(id)? {
            let ac_status = match &check {
                None => AcStatus::NoCheck,
                Some(c) if c.index > loc.index => AcStatus::CheckAfterAction { check: c.clone() },
                Some(_) => continue,
            };
            findings.push(Finding {
                contract_name: n.function.contract_name.clone(),
                function: n.function.signature(),
                risky_action: action,
                origin: Origin {
                    span: loc.span,
                    ..Origin::default()
                },
                location: loc,
                ac_status,
            });
        }
    }
    Ok(DetectOutcome {
        findings,
        analyzed: targets,
        max_path: s.max_path.get(),
    })
}
