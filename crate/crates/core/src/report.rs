//! The scan report and its three renderings.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::completion::CompletionStatus;
use crate::detect::{AcStatus, Finding, RiskyAction};
use crate::sensitive::{Provenance, SensitiveOperation};

pub const TOOL_NAME: &str = "guardscan";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Sarif,
    Text,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "sarif" => Ok(Self::Sarif),
            "text" => Ok(Self::Text),
            other => Err(format!("unknown format `{other}` (expected json, sarif or text)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        Self {
            name: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConfigEcho {
    pub root: String,
    pub mode: String,
    pub excluded_dirs: Vec<String>,
    pub max_call_depth: usize,
    pub time_limit_ms: u64,
    pub reflection_max_iters: usize,
    pub heuristic: bool,
    pub llm: String,
    pub compiler: String,
    pub include_reachable_internal: bool,
    pub token_transfer_patterns: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FileState {
    Scanned,
    Excluded,
    ParseFailed,
    Unreadable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileStatus {
    pub path: String,
    pub status: FileState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Flagged,
    Clean,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SnippetStatus {
    pub path: String,
    pub contract: String,
    pub function: String,
    pub provenance: Provenance,
    pub operations: BTreeSet<SensitiveOperation>,
    pub completion: CompletionStatus,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compiler_version: Option<String>,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cause: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    TimeLimit,
    CompileFailed,
    Modified,
    Analysis,
    Gateway,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    pub kind: FailureKind,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Hallucination {
    pub path: String,
    pub signature: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnparsableResponse {
    pub path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    pub stage: String,
    pub response: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub files_discovered: usize,
    pub files_scanned: usize,
    pub files_excluded: usize,
    pub files_parse_failed: usize,
    pub files_unreadable: usize,
    pub analyzed: usize,
    pub flagged: usize,
    pub clean: usize,
    pub failed: usize,
    pub findings: usize,
}

/// Wall-clock milliseconds per phase, summed over workers. Not part of
/// the canonical JSON.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Timings {
    pub discover_ms: u64,
    pub extract_ms: u64,
    pub complete_ms: u64,
    pub detect_ms: u64,
    pub total_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Report {
    pub tool: ToolInfo,
    pub config: ConfigEcho,
    pub files: Vec<FileStatus>,
    pub snippets: Vec<SnippetStatus>,
    pub findings: Vec<Finding>,
    pub failures: Vec<Failure>,
    pub hallucinated: Vec<Hallucination>,
    pub unparsable_responses: Vec<UnparsableResponse>,
    pub summary: Summary,
    #[serde(skip)]
    pub timings: Timings,
}

impl Report {
    /// Sorts every list and recomputes the summary.
    pub fn finalize(&mut self) {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        self.snippets
            .sort_by(|a, b| (&a.path, &a.contract, &a.function).cmp(&(&b.path, &b.contract, &b.function)));
        self.findings.sort_by(|a, b| {
            let ka = (&a.origin.path, &a.contract_name, a.function.to_string(), a.location.index, a.risky_action);
            let kb = (&b.origin.path, &b.contract_name, b.function.to_string(), b.location.index, b.risky_action);
            ka.cmp(&kb)
        });
        self.failures
            .sort_by(|a, b| (&a.path, &a.function, &a.reason).cmp(&(&b.path, &b.function, &b.reason)));
        self.hallucinated
            .sort_by(|a, b| (&a.path, &a.signature).cmp(&(&b.path, &b.signature)));
        self.unparsable_responses
            .sort_by(|a, b| (&a.path, &a.function, &a.stage).cmp(&(&b.path, &b.function, &b.stage)));
        let count = |s: FileState| self.files.iter().filter(|f| f.status == s).count();
        let outcome = |o: Outcome| self.snippets.iter().filter(|s| s.outcome == o).count();
        self.summary = Summary {
            files_discovered: self.files.len(),
            files_scanned: count(FileState::Scanned),
            files_excluded: count(FileState::Excluded),
            files_parse_failed: count(FileState::ParseFailed),
            files_unreadable: count(FileState::Unreadable),
            analyzed: self.snippets.len(),
            flagged: outcome(Outcome::Flagged),
            clean: outcome(Outcome::Clean),
            failed: outcome(Outcome::Failed),
            findings: self.findings.len(),
        };
    }

    /// 0 without findings, 1 with.
    pub fn exit_code(&self) -> i32 {
        i32::from(!self.findings.is_empty())
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => self.to_canonical_json(),
            ReportFormat::Sarif => self.to_sarif(),
            ReportFormat::Text => self.to_text(),
        }
    }

    pub fn emit(&self, format: ReportFormat, sink: &Path) -> io::Result<()> {
        std::fs::write(sink, self.render(format))
    }

    pub fn to_canonical_json(&self) -> String {
        let v = serde_json::to_value(self).expect("report is serializable");
        let mut s = serde_json::to_string_pretty(&canonicalize(v)).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn to_sarif(&self) -> String {
        let rules: Vec<Value> = RiskyAction::ALL
            .iter()
            .map(|a| {
                json!({
                    "id": a.rule_id(),
                    "name": rule_name(*a),
                    "shortDescription": { "text": rule_short(*a) },
                    "fullDescription": { "text": rule_full(*a) },
                    "defaultConfiguration": { "level": "error" },
                })
            })
            .collect();
        let results: Vec<Value> = self
            .findings
            .iter()
            .map(|f| {
                let rule_index = RiskyAction::ALL.iter().position(|a| *a == f.risky_action).unwrap_or(0);
                let status = match &f.ac_status {
                    AcStatus::NoCheck => "no msg.sender check".to_string(),
                    AcStatus::CheckAfterAction { check } => format!("msg.sender check only after the action (at #{})", check.index),
                };
                json!({
                    "ruleId": f.risky_action.rule_id(),
                    "ruleIndex": rule_index,
                    "level": "error",
                    "message": {
                        "text": format!("{} in {}.{}: {}", f.risky_action.label(), f.contract_name, f.function, status),
                    },
                    "locations": [{
                        "physicalLocation": {
                            "artifactLocation": { "uri": f.origin.path },
                            "region": {
                                "startLine": f.origin.start_line.max(1),
                                "startColumn": f.origin.start_column.max(1),
                                "endLine": f.origin.end_line.max(1),
                                "endColumn": f.origin.end_column.max(1),
                            }
                        }
                    }],
                })
            })
            .collect();
        let doc = json!({
            "$schema": "https://json.schemastore.org/sarif-2.1.0.json",
            "version": "2.1.0",
            "runs": [{
                "tool": {
                    "driver": {
                        "name": self.tool.name,
                        "version": self.tool.version,
                        "rules": rules,
                    }
                },
                "columnKind": "unicodeCodePoints",
                "results": results,
            }]
        });
        let mut s = serde_json::to_string_pretty(&canonicalize(doc)).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut rows: Vec<[String; 4]> = vec![["FILE".into(), "FUNCTION".into(), "RISKY ACTION".into(), "STATUS".into()]];
        for f in &self.findings {
            let status = match &f.ac_status {
                AcStatus::NoCheck => "no check".to_string(),
                AcStatus::CheckAfterAction { check } => format!("check after action (#{})", check.index),
            };
            rows.push([
                format!("{}:{}", f.origin.path, f.origin.start_line),
                format!("{}.{}", f.contract_name, f.function),
                f.risky_action.label().to_string(),
                status,
            ]);
        }
        let widths: Vec<usize> = (0..4).map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for r in &rows {
            let line = (0..4)
                .map(|c| format!("{:<w$}", r[c], w = widths[c]))
                .collect::<Vec<_>>()
                .join("  ");
            out.push_str(line.trim_end());
            out.push('\n');
        }
        let s = &self.summary;
        let _ = writeln!(
            out,
            "\n{} files ({} scanned, {} excluded, {} unparsable, {} unreadable); {} functions analyzed: {} flagged, {} clean, {} failed",
            s.files_discovered, s.files_scanned, s.files_excluded, s.files_parse_failed, s.files_unreadable, s.analyzed, s.flagged, s.clean, s.failed
        );
        if !self.hallucinated.is_empty() {
            let _ = writeln!(out, "{} hallucinated signatures", self.hallucinated.len());
        }
        let t = &self.timings;
        let _ = writeln!(
            out,
            "time: discover {} ms, extract {} ms, complete {} ms, detect {} ms, total {} ms",
            t.discover_ms, t.extract_ms, t.complete_ms, t.detect_ms, t.total_ms
        );
        out
    }
}

fn rule_name(a: RiskyAction) -> &'static str {
    match a {
        RiskyAction::RiskyTransfer => "RiskyTransfer",
        RiskyAction::RiskyStateWrite => "RiskyStateWrite",
        RiskyAction::LowLevelExternalCall => "LowLevelExternalCall",
        RiskyAction::Selfdestruct => "Selfdestruct",
    }
}

fn rule_short(a: RiskyAction) -> &'static str {
    match a {
        RiskyAction::RiskyTransfer => "Ether transfer reachable without a caller check",
        RiskyAction::RiskyStateWrite => "State write reachable without a caller check",
        RiskyAction::LowLevelExternalCall => "Low-level call reachable without a caller check",
        RiskyAction::Selfdestruct => "selfdestruct reachable without a caller check",
    }
}

fn rule_full(a: RiskyAction) -> &'static str {
    match a {
        RiskyAction::RiskyTransfer => "The function sends ether and updates no state variable, and no msg.sender-dependent condition runs before the transfer.",
        RiskyAction::RiskyStateWrite => "The function modifies a state variable without any accompanying transfer, and no msg.sender-dependent condition runs before the write.",
        RiskyAction::LowLevelExternalCall => "The function performs call, delegatecall or staticcall before any msg.sender-dependent condition.",
        RiskyAction::Selfdestruct => "The function can destroy the contract before any msg.sender-dependent condition.",
    }
}

/// Recursively sorts object keys.
pub fn canonicalize(v: Value) -> Value {
    match v {
        Value::Object(m) => {
            let mut entries: Vec<(String, Value)> = m.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut out = Map::new();
            for (k, v) in entries {
                out.insert(k, canonicalize(v));
            }
            Value::Object(out)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(canonicalize).collect()),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_keys_are_sorted() {
        let v = canonicalize(json!({"b": 1, "a": {"z": [ {"y": 1, "x": 2} ], "c": null}}));
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"{"a":{"c":null,"z":[{"x":2,"y":1}]},"b":1}"#);
    }

    #[test]
    fn empty_report() {
        let mut r = Report::default();
        r.finalize();
        assert_eq!(r.exit_code(), 0);
        assert_eq!(r.to_canonical_json(), r.to_canonical_json());
        assert!(!r.to_canonical_json().contains("timings"));
        let sarif: Value = serde_json::from_str(&r.to_sarif()).unwrap();
        assert_eq!(sarif["runs"][0]["tool"]["driver"]["rules"].as_array().unwrap().len(), 4);
    }
}
