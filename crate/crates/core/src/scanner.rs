//! Repository walking and candidate-file selection.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;
use walkdir::WalkDir;

use crate::config::ScanConfig;
use crate::frontend::normalize::strip_comments;
use crate::version::{MalformedPragma, VersionConstraint};

pub const SOLIDITY_EXTENSION: &str = ".sol";

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("repository root `{0}` does not exist")]
    RootNotFound(PathBuf),
    #[error("cannot walk `{path}`: {source}")]
    Walk {
        path: PathBuf,
        #[source]
        source: walkdir::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathClass {
    Include,
    Exclude,
}

/// A candidate source file. Immutable after discovery.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractFile {
    /// Repository-relative, `/`-separated.
    pub path: String,
    pub source: String,
    pub version_constraint: Option<VersionConstraint>,
    /// Set when a `pragma solidity` directive exists but cannot be parsed.
    /// The file stays in scope.
    pub pragma_error: Option<String>,
}

impl ContractFile {
    pub fn new(path: impl Into<String>, source: impl Into<String>) -> Self {
        let source = source.into();
        let (version_constraint, pragma_error) = match extract_pragma(&source) {
            Ok(v) => (v, None),
            Err(e) => (None, Some(e.to_string())),
        };
        Self {
            path: path.into(),
            source,
            version_constraint,
            pragma_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnreadableFile {
    pub path: String,
    pub error: String,
}

/// Full outcome of a walk: included files plus the bookkeeping the report
/// needs for everything else that was seen.
#[derive(Debug, Clone, Default)]
pub struct Discovery {
    pub files: Vec<ContractFile>,
    pub excluded: Vec<String>,
    pub unreadable: Vec<UnreadableFile>,
}

/// `Exclude` iff a directory segment (never the file name) equals one of
/// `excluded`, ignoring ASCII case.
pub fn classify_path(path: &str, excluded: &[String]) -> PathClass {
    let mut segments: Vec<&str> = path.split(['/', '\\']).filter(|s| !s.is_empty()).collect();
    segments.pop();
    let hit = segments
        .iter()
        .any(|seg| excluded.iter().any(|ex| ex.eq_ignore_ascii_case(seg)));
    if hit {
        PathClass::Exclude
    } else {
        PathClass::Include
    }
}

pub fn discover_contracts(config: &ScanConfig) -> Result<Vec<ContractFile>, ScanError> {
    Ok(walk_repository(config)?.files)
}

pub fn walk_repository(config: &ScanConfig) -> Result<Discovery, ScanError> {
    let root = &config.root;
    if !root.exists() {
        return Err(ScanError::RootNotFound(root.clone()));
    }
    let mut found: Vec<(String, PathBuf)> = Vec::new();
    if root.is_file() {
        let name = root
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        if name.ends_with(SOLIDITY_EXTENSION) {
            found.push((name, root.clone()));
        }
    } else {
        for entry in WalkDir::new(root).follow_links(false) {
            let entry = entry.map_err(|source| ScanError::Walk {
                path: root.clone(),
                source,
            })?;
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = relative_path(root, entry.path());
            if rel.ends_with(SOLIDITY_EXTENSION) {
                found.push((rel, entry.into_path()));
            }
        }
    }
    found.sort();

    let mut discovery = Discovery::default();
    for (rel, full) in found {
        if classify_path(&rel, &config.excluded_dirs) == PathClass::Exclude {
            discovery.excluded.push(rel);
            continue;
        }
        match fs::read(&full).map(String::from_utf8) {
            Ok(Ok(source)) => discovery.files.push(ContractFile::new(rel, source)),
            Ok(Err(e)) => discovery.unreadable.push(UnreadableFile {
                path: rel,
                error: format!("not valid UTF-8: {e}"),
            }),
            Err(e) => discovery.unreadable.push(UnreadableFile {
                path: rel,
                error: e.to_string(),
            }),
        }
    }
    Ok(discovery)
}

fn relative_path(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Range of the first `pragma solidity` directive, ignoring commented-out
/// directives.
pub fn extract_pragma(source: &str) -> Result<Option<VersionConstraint>, MalformedPragma> {
    let code = strip_comments(source);
    let bytes = code.as_bytes();
    let mut search = 0;
    while let Some(off) = code[search..].find("pragma") {
        let start = search + off;
        search = start + "pragma".len();
        let boundary_before = start == 0 || !is_ident_byte(bytes[start - 1]);
        if !boundary_before {
            continue;
        }
        let rest = &code[search..];
        let trimmed = rest.trim_start();
        if trimmed.len() == rest.len() {
            continue;
        }
        let Some(after) = trimmed.strip_prefix("solidity") else {
            continue;
        };
        if after.as_bytes().first().is_some_and(|b| is_ident_byte(*b)) {
            continue;
        }
        let Some(end) = after.find(';') else {
            return Err(MalformedPragma {
                text: after.trim().to_string(),
                reason: "unterminated pragma".into(),
            });
        };
        return VersionConstraint::parse(&after[..end]).map(Some);
    }
    Ok(None)
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$'
}
