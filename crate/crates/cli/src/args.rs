//! Command-line flags, the optional TOML configuration file, and how the
//! two combine.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use clap::{Parser, Subcommand};
use guardscan_core::{ReportFormat, ScanConfig, ScanMode};
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(name = "guardscan", version, about = "Find access-control vulnerabilities in Solidity repositories")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scan a repository (or a single file) and report findings.
    Scan(ScanArgs),
}

#[derive(Debug, clap::Args)]
pub struct ScanArgs {
    /// Repository root or a single .sol file.
    pub root: PathBuf,

    /// `repo` completes snippets first; `single` analyzes compilable files as they are.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<ScanMode>,

    /// Directory names to skip (replaces the default list).
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub exclude_dirs: Option<Vec<String>>,

    #[arg(long)]
    pub max_depth: Option<usize>,

    /// Per-contract budget, e.g. `30min` or `500ms`.
    #[arg(long, value_parser = humantime::parse_duration)]
    pub time_limit: Option<Duration>,

    /// `off`, `live`, `record:FILE` or `replay:FILE`.
    #[arg(long, value_parser = LlmChoice::from_str)]
    pub llm: Option<LlmChoice>,

    /// `json`, `sarif` or `text`.
    #[arg(long, value_parser = ReportFormat::from_str)]
    pub format: Option<ReportFormat>,

    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// TOML file with the same keys as the long flags (underscores for dashes).
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long)]
    pub jobs: Option<usize>,

    /// Directory of `solc-<version>` binaries.
    #[arg(long)]
    pub compiler_dir: Option<PathBuf>,

    #[arg(long)]
    pub reflection_max_iters: Option<usize>,

    /// Write a Graphviz CFG per analyzed function into this directory.
    #[arg(long)]
    pub dump_cfg: Option<PathBuf>,

    /// Also analyze internal sensitive functions reachable from unguarded entry points.
    #[arg(long)]
    pub include_reachable_internal: bool,

    /// Member calls treated as transfers, e.g. `transfer,transferFrom`.
    #[arg(long, value_delimiter = ',')]
    pub token_transfer_patterns: Option<Vec<String>>,

    /// Disable the syntactic sensitive-function heuristic.
    #[arg(long)]
    pub no_heuristic: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LlmChoice {
    Off,
    Live,
    Record(PathBuf),
    Replay(PathBuf),
}

impl FromStr for LlmChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "off" => Ok(Self::Off),
            None if s == "live" => Ok(Self::Live),
            Some(("record", p)) if !p.is_empty() => Ok(Self::Record(p.into())),
            Some(("replay", p)) if !p.is_empty() => Ok(Self::Replay(p.into())),
            _ => Err(format!("expected off, live, record:FILE or replay:FILE, got `{s}`")),
        }
    }
}

fn parse_mode(s: &str) -> Result<ScanMode, String> {
    match s {
        "repo" | "repository" => Ok(ScanMode::Repository),
        "single" => Ok(ScanMode::SingleContract),
        _ => Err(format!("expected repo or single, got `{s}`")),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub mode: Option<String>,
    pub exclude_dirs: Option<Vec<String>>,
    pub max_depth: Option<usize>,
    pub time_limit: Option<String>,
    pub llm: Option<String>,
    pub format: Option<String>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub compiler_dir: Option<PathBuf>,
    pub reflection_max_iters: Option<usize>,
    pub dump_cfg: Option<PathBuf>,
    pub include_reachable_internal: Option<bool>,
    pub token_transfer_patterns: Option<Vec<String>>,
    pub heuristic: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// Everything `scan` needs once flags and file are merged.
#[derive(Debug)]
pub struct Settings {
    pub config: ScanConfig,
    pub llm: LlmChoice,
    pub format: ReportFormat,
    pub out: Option<PathBuf>,
    pub compiler_dir: Option<PathBuf>,
    pub dump_cfg: Option<PathBuf>,
}

impl ScanArgs {
    /// Flags win over the configuration file, which wins over defaults.
    pub fn resolve(self) -> Result<Settings, String> {
        let file = match &self.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let mut config = ScanConfig::new(&self.root);
        if let Some(m) = self.mode.map(Ok).or_else(|| file.mode.as_deref().map(parse_mode)) {
            config.mode = m?;
        }
        if let Some(d) = self.exclude_dirs.or(file.exclude_dirs) {
            config.excluded_dirs = d;
        }
        if let Some(d) = self.max_depth.or(file.max_depth) {
            config.max_call_depth = d;
        }
        let time_limit = match (self.time_limit, file.time_limit) {
            (Some(t), _) => Some(t),
            (None, Some(s)) => Some(humantime::parse_duration(&s).map_err(|e| format!("time_limit: {e}"))?),
            (None, None) => None,
        };
        if let Some(t) = time_limit {
            config.time_limit = t;
        }
        if let Some(j) = self.jobs.or(file.jobs) {
            config.jobs = j;
        }
        if let Some(r) = self.reflection_max_iters.or(file.reflection_max_iters) {
            config.reflection_max_iters = r;
        }
        config.include_reachable_internal =
            self.include_reachable_internal || file.include_reachable_internal.unwrap_or(false);
        if let Some(p) = self.token_transfer_patterns.or(file.token_transfer_patterns) {
            config.token_transfer_patterns = p;
        }
        config.heuristic = !self.no_heuristic && file.heuristic.unwrap_or(true);

        let llm = match (self.llm, file.llm) {
            (Some(l), _) => l,
            (None, Some(s)) => s.parse()?,
            (None, None) => LlmChoice::Off,
        };
        let format = match (self.format, file.format) {
            (Some(f), _) => f,
            (None, Some(s)) => s.parse()?,
            (None, None) => ReportFormat::Text,
        };
        config.validate().map_err(|e| e.to_string())?;
        Ok(Settings {
            config,
            llm,
            format,
            out: self.out.or(file.out),
            compiler_dir: self.compiler_dir.or(file.compiler_dir),
            dump_cfg: self.dump_cfg.or(file.dump_cfg),
        })
    }
}
