//! Compiler drivers.
//!
//! [`SolcDriver`] runs real `solc` binaries from a directory. When none are
//! installed, [`SyntaxCheckDriver`] stands in: it checks the version
//! pragma, parses, and rejects undeclared identifiers, which covers the
//! failures a completion round typically produces.

use std::io::Read as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use semver::Version;
use serde::Serialize;
use thiserror::Error;

use super::syntax;
use crate::frontend::line_col;
use crate::scanner::extract_pragma;
use crate::version::VersionConstraint;

pub const ENV_SOLC_DIR: &str = "GUARDSCAN_SOLC_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    /// `line:column`, 1-based, when the compiler gave one.
    pub location: Option<String>,
}

impl Diagnostic {
    pub fn error(message: impl Into<String>, location: Option<String>) -> Self {
        Self {
            severity: Severity::Error,
            message: message.into(),
            location,
        }
    }

    pub fn at(source: &str, offset: usize, message: impl Into<String>) -> Self {
        let (l, c) = line_col(source, offset);
        Self::error(message, Some(format!("{l}:{c}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompileResult {
    pub success: bool,
    pub diagnostics: Vec<Diagnostic>,
}

impl CompileResult {
    /// `success` is forced false when any diagnostic is an error.
    pub fn new(exit_ok: bool, diagnostics: Vec<Diagnostic>) -> Self {
        let success = exit_ok && !diagnostics.iter().any(|d| d.severity == Severity::Error);
        Self { success, diagnostics }
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Error)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("no installed compiler satisfies {0}")]
    CompilerUnavailable(String),
    #[error("compiler crashed: {0}")]
    CompilerCrash(String),
}

pub trait CompilerDriver: Send + Sync {
    /// Installed versions, ascending.
    fn versions(&self) -> Vec<Version>;

    fn compile_with(&self, source: &str, version: &Version) -> Result<CompileResult, CompileError>;

    fn name(&self) -> &'static str;
}

/// Version choice: the originating file's pragma, then the candidate's own
/// pragma, then the newest installed compiler.
pub fn select_version(
    driver: &dyn CompilerDriver,
    file_constraint: Option<&VersionConstraint>,
    source: &str,
) -> Result<Version, CompileError> {
    let available = driver.versions();
    let own = extract_pragma(source).ok().flatten();
    let constraint = file_constraint.or(own.as_ref());
    match constraint {
        Some(c) => c
            .select(&available)
            .cloned()
            .ok_or_else(|| CompileError::CompilerUnavailable(c.to_string())),
        None => available
            .last()
            .cloned()
            .ok_or_else(|| CompileError::CompilerUnavailable("any version".into())),
    }
}

pub fn compile(
    driver: &dyn CompilerDriver,
    source: &str,
    file_constraint: Option<&VersionConstraint>,
) -> Result<(Version, CompileResult), CompileError> {
    let v = select_version(driver, file_constraint, source)?;
    let r = driver.compile_with(source, &v)?;
    Ok((v, r))
}

/// Versions a syntax-only driver pretends to have.
pub fn default_virtual_versions() -> Vec<Version> {
    let mut out = Vec::new();
    for (minor, patches) in [(4, 11..=26), (5, 0..=17), (6, 0..=12), (7, 0..=6), (8, 0..=28)] {
        for p in patches {
            out.push(Version::new(0, minor, p));
        }
    }
    out
}

/// Parse-and-resolve check standing in for `solc` when no binary is
/// installed. It is stricter than nothing and looser than the real
/// compiler: type errors go unnoticed.
#[derive(Debug, Clone)]
pub struct SyntaxCheckDriver {
    versions: Vec<Version>,
}

impl Default for SyntaxCheckDriver {
    fn default() -> Self {
        Self {
            versions: default_virtual_versions(),
        }
    }
}

impl SyntaxCheckDriver {
    pub fn with_versions(mut versions: Vec<Version>) -> Self {
        versions.sort();
        Self { versions }
    }
}

impl CompilerDriver for SyntaxCheckDriver {
    fn versions(&self) -> Vec<Version> {
        self.versions.clone()
    }

    fn compile_with(&self, source: &str, version: &Version) -> Result<CompileResult, CompileError> {
        if !self.versions.contains(version) {
            return Err(CompileError::CompilerUnavailable(version.to_string()));
        }
        Ok(CompileResult::new(true, syntax::check(source, version)))
    }

    fn name(&self) -> &'static str {
        "syntax-check"
    }
}

/// A directory of `solc-<version>` (or `solc-v<version>`) executables.
#[derive(Debug, Clone)]
pub struct SolcDriver {
    binaries: Vec<(Version, PathBuf)>,
    pub timeout: Duration,
}

impl SolcDriver {
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let mut binaries = Vec::new();
        for entry in std::fs::read_dir(dir)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if !name.starts_with("solc") {
                continue;
            }
            if let Some(v) = version_in_name(&name) {
                binaries.push((v, entry.path()));
            }
        }
        binaries.sort();
        binaries.dedup_by(|a, b| a.0 == b.0);
        Ok(Self {
            binaries,
            timeout: Duration::from_secs(60),
        })
    }

    pub fn from_env() -> Option<Self> {
        let dir = std::env::var_os(ENV_SOLC_DIR)?;
        Self::from_dir(Path::new(&dir)).ok().filter(|d| !d.binaries.is_empty())
    }

    pub fn is_empty(&self) -> bool {
        self.binaries.is_empty()
    }
}

fn version_in_name(name: &str) -> Option<Version> {
    let bytes = name.as_bytes();
    for start in 0..bytes.len() {
        if !bytes[start].is_ascii_digit() || (start > 0 && bytes[start - 1].is_ascii_digit()) {
            continue;
        }
        let end = name[start..]
            .find(|c: char| !(c.is_ascii_digit() || c == '.'))
            .map_or(name.len(), |e| start + e);
        if let Ok(v) = Version::parse(name[start..end].trim_end_matches('.')) {
            return Some(v);
        }
    }
    None
}

impl CompilerDriver for SolcDriver {
    fn versions(&self) -> Vec<Version> {
        self.binaries.iter().map(|(v, _)| v.clone()).collect()
    }

    fn compile_with(&self, source: &str, version: &Version) -> Result<CompileResult, CompileError> {
        let bin = self
            .binaries
            .iter()
            .find(|(v, _)| v == version)
            .map(|(_, p)| p)
            .ok_or_else(|| CompileError::CompilerUnavailable(version.to_string()))?;
        let dir = tempfile::tempdir().map_err(|e| CompileError::CompilerCrash(e.to_string()))?;
        let file = dir.path().join("Contract.sol");
        std::fs::write(&file, source).map_err(|e| CompileError::CompilerCrash(e.to_string()))?;
        let mut child = Command::new(bin)
            .arg("--bin")
            .arg(&file)
            .current_dir(dir.path())
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => {
                    CompileError::CompilerUnavailable(version.to_string())
                }
                _ => CompileError::CompilerCrash(e.to_string()),
            })?;
        let mut stderr = child.stderr.take().expect("piped stderr");
        let reader = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stderr.read_to_string(&mut s);
            s
        });
        let started = Instant::now();
        let status = loop {
            match child.try_wait() {
                Ok(Some(s)) => break s,
                Ok(None) if started.elapsed() > self.timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(CompileError::CompilerCrash(format!("timed out after {:?}", self.timeout)));
                }
                Ok(None) => std::thread::sleep(Duration::from_millis(5)),
                Err(e) => return Err(CompileError::CompilerCrash(e.to_string())),
            }
        };
        let text = reader.join().unwrap_or_default();
        match status.code() {
            Some(0) => Ok(CompileResult::new(true, parse_solc_output(&text))),
            Some(1) => {
                let mut diags = parse_solc_output(&text);
                if !diags.iter().any(|d| d.severity == Severity::Error) {
                    diags.push(Diagnostic::error(text.trim().to_string(), None));
                }
                Ok(CompileResult::new(false, diags))
            }
            Some(c) => Err(CompileError::CompilerCrash(format!("exit status {c}: {}", text.trim()))),
            None => Err(CompileError::CompilerCrash(format!("terminated by signal: {}", text.trim()))),
        }
    }

    fn name(&self) -> &'static str {
        "solc"
    }
}

/// Splits compiler stderr into diagnostics. Both the old one-line format
/// (`file:3:5: Error: ...`) and the newer block format (`Error: ...` followed
/// by ` --> file:3:5:`) are recognized; message text is kept verbatim.
pub fn parse_solc_output(text: &str) -> Vec<Diagnostic> {
    let mut out: Vec<Diagnostic> = Vec::new();
    for block in text.split("\n\n") {
        let block = block.trim_matches('\n');
        if block.trim().is_empty() {
            continue;
        }
        let first = block.lines().next().unwrap_or("");
        let severity = if first.contains("Error") {
            Severity::Error
        } else if first.contains("Warning") {
            Severity::Warning
        } else {
            Severity::Info
        };
        out.push(Diagnostic {
            severity,
            message: block.to_string(),
            location: location_in(block),
        });
    }
    out
}

fn location_in(block: &str) -> Option<String> {
    for line in block.lines() {
        let l = line.trim_start().trim_start_matches("-->").trim();
        let mut parts = l.split(':');
        let _file = parts.next()?;
        let (Some(a), Some(b)) = (parts.next(), parts.next()) else {
            continue;
        };
        let (a, b) = (a.trim(), b.trim());
        if !a.is_empty() && !b.is_empty() && a.bytes().all(|c| c.is_ascii_digit()) && b.bytes().all(|c| c.is_ascii_digit()) {
            return Some(format!("{a}:{b}"));
        }
    }
    None
}
