//! Turning a function snippet into a contract that compiles.
//!
//! The model writes a first candidate, the compiler judges it, and on
//! failure the diagnostics go back to the model for another round. A
//! contract that compiles is only accepted if the original function text
//! is still in it.

pub mod compiler;
mod syntax;

use std::collections::HashMap;
use std::sync::Mutex;

use serde::Serialize;
use thiserror::Error;

pub use compiler::{
    compile, select_version, CompileError, CompileResult, CompilerDriver, Diagnostic, Severity,
    SolcDriver, SyntaxCheckDriver,
};

use crate::deadline::Deadline;
use crate::frontend::{contains_unmodified, FunctionSnippet};
use crate::gateway::template::{bindings, CODE, CONTRACT, ERROR_MESSAGE, NAME};
use crate::gateway::{digest, render_prompt, Gateway, GatewayError, PromptTemplate};
use crate::sensitive::first_fence;
use crate::version::VersionConstraint;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompletionError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("response contains no contract source")]
    UnparsableResponse { response: String },
    #[error("reflection needs at least one error diagnostic")]
    NoDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletionStatus {
    Compiled,
    CompileFailed,
    Modified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompletedContract {
    pub source: String,
    pub snippet: FunctionSnippet,
    /// Reflection rounds used; 0 when the first candidate compiled.
    pub iterations: usize,
    pub compiler_version: Option<String>,
    pub status: CompletionStatus,
    /// Why a `CompileFailed` contract stopped.
    pub cause: Option<String>,
    /// Diagnostics of the last compilation.
    pub diagnostics: Vec<Diagnostic>,
}

/// Pulls contract source out of a model response: the first fenced block,
/// or the whole response when there is none.
pub fn extract_source(response: &str) -> Result<String, CompletionError> {
    let body = first_fence(response).unwrap_or(response).trim();
    if body.is_empty() {
        return Err(CompletionError::UnparsableResponse {
            response: response.to_string(),
        });
    }
    Ok(body.to_string())
}

pub fn complete_snippet(snippet: &FunctionSnippet, gateway: &Gateway) -> Result<String, CompletionError> {
    let prompt = render_prompt(&PromptTemplate::snippet_completion(), &bindings([(CODE, snippet.text.as_str())]))?;
    extract_source(&gateway.complete(&prompt)?)
}

pub fn reflect_and_fix(
    contract: &str,
    errors: &[Diagnostic],
    name: &str,
    gateway: &Gateway,
) -> Result<String, CompletionError> {
    if errors.is_empty() {
        return Err(CompletionError::NoDiagnostics);
    }
    let messages = errors
        .iter()
        .map(|d| match &d.location {
            Some(l) if !d.message.contains(l.as_str()) => format!("{l}: {}", d.message),
            _ => d.message.clone(),
        })
        .collect::<Vec<_>>()
        .join("\n");
    let prompt = render_prompt(
        &PromptTemplate::reflection_fix(),
        &bindings([(CONTRACT, contract), (ERROR_MESSAGE, messages.as_str()), (NAME, name)]),
    )?;
    extract_source(&gateway.complete(&prompt)?)
}

/// Compile results keyed by source digest and compiler version, shared
/// across snippets of one scan.
#[derive(Default)]
pub struct CompileCache {
    entries: Mutex<HashMap<(String, String), CompileResult>>,
    hits: Mutex<usize>,
}

impl CompileCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn hits(&self) -> usize {
        *self.hits.lock().unwrap()
    }

    fn compile(
        &self,
        driver: &dyn CompilerDriver,
        source: &str,
        file_constraint: Option<&VersionConstraint>,
    ) -> Result<(semver::Version, CompileResult), CompileError> {
        let version = select_version(driver, file_constraint, source)?;
        let key = (digest(source), version.to_string());
        if let Some(r) = self.entries.lock().unwrap().get(&key) {
            *self.hits.lock().unwrap() += 1;
            return Ok((version, r.clone()));
        }
        let r = driver.compile_with(source, &version)?;
        self.entries.lock().unwrap().insert(key, r.clone());
        Ok((version, r))
    }
}

pub struct Completer<'a> {
    pub gateway: Option<&'a Gateway>,
    pub driver: &'a dyn CompilerDriver,
    pub max_iters: usize,
    pub cache: Option<&'a CompileCache>,
}

impl Completer<'_> {
    /// Runs the compile and reflect loop for one snippet. Without a gateway
    /// the candidate is `fallback` (normally the snippet's own file) and no
    /// reflection happens.
    pub fn complete_until_compilable(
        &self,
        snippet: &FunctionSnippet,
        file_constraint: Option<&VersionConstraint>,
        fallback: &str,
        deadline: &Deadline,
    ) -> CompletedContract {
        let mut out = CompletedContract {
            source: String::new(),
            snippet: snippet.clone(),
            iterations: 0,
            compiler_version: None,
            status: CompletionStatus::CompileFailed,
            cause: None,
            diagnostics: Vec::new(),
        };
        let first = match self.gateway {
            Some(g) => complete_snippet(snippet, g),
            None => Ok(fallback.to_string()),
        };
        let mut candidate = match first {
            Ok(c) => c,
            Err(e) => {
                out.cause = Some(e.to_string());
                return out;
            }
        };
        loop {
            out.source = candidate.clone();
            if deadline.expired() {
                out.cause = Some(format!("time limit of {:?} reached", deadline.limit()));
                return out;
            }
            let compiled = match self.cache {
                Some(c) => c.compile(self.driver, &candidate, file_constraint),
                None => compile(self.driver, &candidate, file_constraint),
            };
            let (version, result) = match compiled {
                Ok(x) => x,
                Err(e) => {
                    out.cause = Some(e.to_string());
                    return out;
                }
            };
            out.compiler_version = Some(version.to_string());
            out.diagnostics = result.diagnostics.clone();
            if result.success {
                out.status = if contains_unmodified(&candidate, snippet) {
                    CompletionStatus::Compiled
                } else {
                    CompletionStatus::Modified
                };
                return out;
            }
            let Some(g) = self.gateway else {
                out.cause = Some("compilation failed".into());
                return out;
            };
            if out.iterations >= self.max_iters {
                out.cause = Some(format!("still failing after {} reflection rounds", out.iterations));
                return out;
            }
            let errors: Vec<Diagnostic> = result.errors().cloned().collect();
            match reflect_and_fix(&candidate, &errors, &snippet.info.name, g) {
                Ok(next) => {
                    candidate = next;
                    out.iterations += 1;
                }
                Err(e) => {
                    out.cause = Some(e.to_string());
                    return out;
                }
            }
        }
    }
}
