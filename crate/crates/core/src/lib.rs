//! Access-control vulnerability detection for Solidity repositories,
//! including repositories that do not compile as a whole.
//!
//! The pipeline: [`scanner`] selects candidate files, [`sensitive`] picks the
//! functions worth analyzing, [`completion`] turns each one into a
//! standalone contract via a language model and a compiler feedback loop,
//! [`ir`] lowers the result into per-function control-flow graphs, and
//! [`detect`] searches the call graph for risky actions that run before (or
//! without) a `msg.sender` permission check. [`pipeline`] wires it together
//! and [`report`] renders the outcome.

pub mod completion;
pub mod config;
pub mod deadline;
pub mod detect;
pub mod frontend;
pub mod gateway;
pub mod ir;
pub mod pipeline;
pub mod report;
pub mod scanner;
pub mod sensitive;
pub mod version;

pub use config::{AnalysisOptions, ConfigError, ScanConfig, ScanMode};
pub use detect::{AcLocation, AcScope, AcStatus, Fcg, FcgNode, Finding, RiskyAction};
pub use frontend::{FunctionInfo, FunctionKind, FunctionSnippet, Signature, Span, Visibility};
pub use pipeline::{run_pipeline, run_pipeline_with, PipelineOptions};
pub use report::{Report, ReportFormat};
pub use scanner::{ContractFile, PathClass};
pub use sensitive::{Provenance, SensitiveLabel, SensitiveOperation};
pub use version::VersionConstraint;
