use std::path::PathBuf;
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_EXCLUDED_DIRS: [&str; 10] = [
    "interface",
    "interfaces",
    "library",
    "libraries",
    "util",
    "utils",
    "mock",
    "mocks",
    "test",
    "tests",
];

pub const DEFAULT_MAX_CALL_DEPTH: usize = 3;
pub const DEFAULT_TIME_LIMIT: Duration = Duration::from_secs(30 * 60);
pub const DEFAULT_REFLECTION_MAX_ITERS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    /// Non-compilable repository: extract, complete, then analyze snippets.
    Repository,
    /// Compilable contracts: every function is analyzed directly.
    SingleContract,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("max_call_depth must be at least 1")]
    ZeroDepth,
    #[error("time_limit must be positive")]
    ZeroTimeLimit,
    #[error("reflection_max_iters must be at least 1")]
    ZeroReflection,
    #[error("jobs must be at least 1")]
    ZeroJobs,
    #[error("{0}")]
    Invalid(String),
}

/// Everything that steers one scan. Transport settings for the language
/// model live with the gateway, not here.
#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub root: PathBuf,
    pub excluded_dirs: Vec<String>,
    pub mode: ScanMode,
    pub max_call_depth: usize,
    pub time_limit: Duration,
    pub reflection_max_iters: usize,
    /// Run the syntactic sensitive-function heuristic (unioned with the
    /// model's answer when both are available).
    pub heuristic: bool,
    /// Also report internal/private sensitive functions reachable from an
    /// unguarded public entry point.
    pub include_reachable_internal: bool,
    /// Member-call names promoted from `HighLevelCall` to `Transfer`
    /// (for example `transfer`, `transferFrom` on token contracts).
    pub token_transfer_patterns: Vec<String>,
    pub jobs: usize,
}

impl ScanConfig {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            excluded_dirs: DEFAULT_EXCLUDED_DIRS.iter().map(|s| s.to_string()).collect(),
            mode: ScanMode::Repository,
            max_call_depth: DEFAULT_MAX_CALL_DEPTH,
            time_limit: DEFAULT_TIME_LIMIT,
            reflection_max_iters: DEFAULT_REFLECTION_MAX_ITERS,
            heuristic: true,
            include_reachable_internal: false,
            token_transfer_patterns: Vec::new(),
            jobs: std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_call_depth == 0 {
            return Err(ConfigError::ZeroDepth);
        }
        if self.time_limit.is_zero() {
            return Err(ConfigError::ZeroTimeLimit);
        }
        if self.reflection_max_iters == 0 {
            return Err(ConfigError::ZeroReflection);
        }
        if self.jobs == 0 {
            return Err(ConfigError::ZeroJobs);
        }
        Ok(())
    }

    pub fn analysis(&self) -> AnalysisOptions {
        AnalysisOptions {
            max_call_depth: self.max_call_depth,
            include_reachable_internal: self.include_reachable_internal,
            token_transfer_patterns: self.token_transfer_patterns.clone(),
        }
    }
}

/// The subset of the configuration the IR builder and detector consume.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnalysisOptions {
    pub max_call_depth: usize,
    pub include_reachable_internal: bool,
    pub token_transfer_patterns: Vec<String>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            max_call_depth: DEFAULT_MAX_CALL_DEPTH,
            include_reachable_internal: false,
            token_transfer_patterns: Vec::new(),
        }
    }
}
