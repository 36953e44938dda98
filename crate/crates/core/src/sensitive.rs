//! Which functions are worth analyzing.
//!
//! The model-driven path asks the gateway for signatures and checks them
//! against the parsed inventory; the heuristic path looks for the four
//! operation kinds directly in the lowered IR. Both are combined per
//! function.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::frontend::{list_functions, FunctionInfo, FunctionKind, Signature, SyntaxTree};
use crate::gateway::template::{bindings, CODE};
use crate::gateway::{render_prompt, Gateway, GatewayError, PromptTemplate};
use crate::ir::{lower_tree, InstrKind, IrFunction, LowerOptions, Receiver};
use crate::scanner::ContractFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitiveOperation {
    Selfdestruct,
    Transfer,
    ExternalCall,
    StateWrite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Llm,
    Heuristic,
    ForcedAllFunctions,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SensitiveLabel {
    pub is_sensitive: bool,
    pub operations: BTreeSet<SensitiveOperation>,
    pub provenance: Provenance,
}

impl SensitiveLabel {
    fn with(operations: BTreeSet<SensitiveOperation>, provenance: Provenance) -> Self {
        Self {
            is_sensitive: !operations.is_empty() || provenance == Provenance::ForcedAllFunctions,
            operations,
            provenance,
        }
    }

    pub fn none() -> Self {
        Self::with(BTreeSet::new(), Provenance::Heuristic)
    }

    pub fn heuristic(operations: BTreeSet<SensitiveOperation>) -> Self {
        Self::with(operations, Provenance::Heuristic)
    }

    pub fn llm(operations: BTreeSet<SensitiveOperation>) -> Self {
        Self::with(operations, Provenance::Llm)
    }

    pub fn forced(operations: BTreeSet<SensitiveOperation>) -> Self {
        Self::with(operations, Provenance::ForcedAllFunctions)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LocateError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("response is not a signature list")]
    UnparsableResponse { response: String },
}

/// Operations that appear directly in one lowered body.
pub fn direct_operations(f: &IrFunction) -> BTreeSet<SensitiveOperation> {
    let mut ops = BTreeSet::new();
    for b in &f.cfg.blocks {
        for i in &b.instructions {
            match &i.kind {
                k if k.is_selfdestruct() => {
                    ops.insert(SensitiveOperation::Selfdestruct);
                }
                InstrKind::Transfer => {
                    ops.insert(SensitiveOperation::Transfer);
                }
                InstrKind::LowLevelCall(_) => {
                    ops.insert(SensitiveOperation::ExternalCall);
                }
                InstrKind::HighLevelCall { receiver, .. } if *receiver != Receiver::This => {
                    ops.insert(SensitiveOperation::ExternalCall);
                }
                InstrKind::StateWrite(_) => {
                    ops.insert(SensitiveOperation::StateWrite);
                }
                _ => {}
            }
        }
    }
    ops
}

fn labelable(info: &FunctionInfo) -> bool {
    info.kind != FunctionKind::Modifier && info.has_body
}

/// Heuristic label for every implemented, non-modifier function, sensitive
/// or not, in source order.
pub fn heuristic_labels(tree: &SyntaxTree, opts: &LowerOptions) -> Vec<(FunctionInfo, SensitiveLabel)> {
    lower_tree(tree, opts)
        .into_iter()
        .filter(|f| labelable(&f.info))
        .map(|f| {
            let ops = direct_operations(&f);
            (f.info, SensitiveLabel::heuristic(ops))
        })
        .collect()
}

/// The sensitive functions found by the heuristic, as contract-qualified
/// signatures.
pub fn locate_sensitive_heuristic(tree: &SyntaxTree, opts: &LowerOptions) -> Vec<(Signature, SensitiveLabel)> {
    heuristic_labels(tree, opts)
        .into_iter()
        .filter(|(_, l)| l.is_sensitive)
        .map(|(info, l)| (qualified(&info), l))
        .collect()
}

pub fn qualified(info: &FunctionInfo) -> Signature {
    let mut s = info.signature();
    if !info.contract_name.is_empty() {
        s.contract = Some(info.contract_name.clone());
    }
    s
}

/// Single-contract mode: every implemented non-modifier function.
pub fn force_all(tree: &SyntaxTree, opts: &LowerOptions) -> Vec<(FunctionInfo, SensitiveLabel)> {
    lower_tree(tree, opts)
        .into_iter()
        .filter(|f| labelable(&f.info))
        .map(|f| {
            let ops = direct_operations(&f);
            (f.info, SensitiveLabel::forced(ops))
        })
        .collect()
}

/// Asks the model which functions in `file` are sensitive.
pub fn locate_sensitive_llm(file: &ContractFile, gateway: &Gateway) -> Result<Vec<Signature>, LocateError> {
    let prompt = render_prompt(&PromptTemplate::sensitive_location(), &bindings([(CODE, file.source.as_str())]))?;
    let response = gateway.complete(&prompt)?;
    parse_signature_list(&response).ok_or(LocateError::UnparsableResponse { response })
}

/// Reads a signature list out of a model response: a JSON array of
/// strings (optionally fenced, optionally wrapped in a one-key object), or
/// one signature per line. `None` when any entry is not a signature.
pub fn parse_signature_list(response: &str) -> Option<Vec<Signature>> {
    let body = first_fence(response).unwrap_or(response).trim();
    if body.is_empty() {
        return Some(Vec::new());
    }
    if let Ok(v) = serde_json::from_str::<serde_json::Value>(body) {
        let arr = match &v {
            serde_json::Value::Array(a) => a,
            serde_json::Value::Object(m) if m.len() == 1 => m.values().next()?.as_array()?,
            _ => return None,
        };
        return arr
            .iter()
            .map(|e| e.as_str().and_then(Signature::parse))
            .collect();
    }
    let lines: Vec<&str> = body
        .lines()
        .map(|l| strip_bullet(l.trim()))
        .filter(|l| !l.is_empty())
        .collect();
    if lines.len() == 1 && lines[0].eq_ignore_ascii_case("none") {
        return Some(Vec::new());
    }
    lines.into_iter().map(Signature::parse).collect()
}

fn strip_bullet(l: &str) -> &str {
    let l = l.trim_start_matches(['-', '*', '•']).trim_start();
    let digits = l.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 && l[digits..].starts_with(['.', ')']) {
        l[digits + 1..].trim_start()
    } else {
        l
    }
}

pub(crate) fn first_fence(text: &str) -> Option<&str> {
    let start = text.find("```")?;
    let after = &text[start + 3..];
    let body_start = after.find('\n')? + 1;
    let body = &after[body_start..];
    let end = body.find("```").unwrap_or(body.len());
    Some(&body[..end])
}

/// Splits model-proposed signatures into those naming a real function and
/// those that do not. A signature without a contract qualifier may resolve
/// to several functions.
pub fn validate_signatures(candidates: &[Signature], tree: &SyntaxTree) -> (Vec<FunctionInfo>, Vec<Signature>) {
    let inventory: Vec<FunctionInfo> = list_functions(tree)
        .into_iter()
        .filter(|f| f.kind != FunctionKind::Modifier)
        .collect();
    let mut validated: Vec<FunctionInfo> = Vec::new();
    let mut hallucinated = Vec::new();
    for c in candidates {
        let hits: Vec<&FunctionInfo> = inventory.iter().filter(|f| f.matches(c)).collect();
        if hits.is_empty() {
            if !hallucinated.contains(c) {
                hallucinated.push(c.clone());
            }
            continue;
        }
        for h in hits {
            if !validated.contains(h) {
                validated.push(h.clone());
            }
        }
    }
    (validated, hallucinated)
}

/// Labels for model-selected functions: the operations of the function and
/// of every same-file function it can reach through internal calls.
pub fn llm_labels(
    tree: &SyntaxTree,
    validated: &[FunctionInfo],
    opts: &LowerOptions,
) -> Vec<(FunctionInfo, SensitiveLabel)> {
    let fns = lower_tree(tree, opts);
    let direct: Vec<BTreeSet<SensitiveOperation>> = fns.iter().map(direct_operations).collect();
    let mut by_name: HashMap<(&str, usize), Vec<usize>> = HashMap::new();
    for (i, f) in fns.iter().enumerate() {
        if f.info.has_body && f.info.kind != FunctionKind::Modifier {
            by_name.entry((f.info.name.as_str(), f.info.parameter_types.len())).or_default().push(i);
        }
    }
    let callees = |i: usize| -> Vec<usize> {
        let mut out = Vec::new();
        for b in &fns[i].cfg.blocks {
            for ins in &b.instructions {
                if let InstrKind::InternalCall(c) = &ins.kind {
                    let arity = ins.operands.len();
                    for key in [(c.name.as_str(), arity), (c.name.as_str(), arity.saturating_sub(1))] {
                        if let Some(v) = by_name.get(&key) {
                            out.extend(v);
                        }
                    }
                }
            }
        }
        out
    };
    validated
        .iter()
        .filter(|v| labelable(v))
        .filter_map(|v| {
            let start = fns.iter().position(|f| &f.info == v)?;
            let mut seen = BTreeSet::from([start]);
            let mut stack = vec![start];
            let mut ops = BTreeSet::new();
            while let Some(i) = stack.pop() {
                ops.extend(direct[i].iter().copied());
                for c in callees(i) {
                    if seen.insert(c) {
                        stack.push(c);
                    }
                }
            }
            Some((v.clone(), SensitiveLabel::llm(ops)))
        })
        .collect()
}

/// Union of model and heuristic labels, keyed by function. A function the
/// model named keeps `Llm` provenance; operation sets are merged.
pub fn merge_labels(
    llm: Vec<(FunctionInfo, SensitiveLabel)>,
    heuristic: Vec<(FunctionInfo, SensitiveLabel)>,
) -> Vec<(FunctionInfo, SensitiveLabel)> {
    let mut out: BTreeMap<(usize, String), (FunctionInfo, SensitiveLabel)> = BTreeMap::new();
    for (info, label) in heuristic.into_iter().filter(|(_, l)| l.is_sensitive) {
        out.insert((info.source_span.start, info.qualified_name()), (info, label));
    }
    for (info, label) in llm.into_iter().filter(|(_, l)| l.is_sensitive) {
        let key = (info.source_span.start, info.qualified_name());
        let merged = match out.remove(&key) {
            Some((_, h)) => SensitiveLabel::llm(label.operations.union(&h.operations).copied().collect()),
            None => label,
        };
        out.insert(key, (info, merged));
    }
    out.into_values().collect()
}
