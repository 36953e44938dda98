//! End-to-end orchestration: discover, label, complete, analyze, report.

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use log::{debug, warn};
use rayon::prelude::*;

use crate::completion::{compile, CompileCache, CompletedContract, Completer, CompilerDriver, CompletionStatus};
use crate::config::{ConfigError, ScanConfig, ScanMode};
use crate::deadline::Deadline;
use crate::detect::{build_fcg, detect_with_stats, Finding, Origin};
use crate::frontend::{list_functions, normalize, parse, FunctionInfo, FunctionKind, FunctionSnippet, SyntaxTree};
use crate::gateway::{Gateway, GatewayMode};
use crate::ir::LowerOptions;
use crate::report::{
    ConfigEcho, Failure, FailureKind, FileState, FileStatus, Hallucination, Outcome, Report, SnippetStatus,
    UnparsableResponse,
};
use crate::scanner::{walk_repository, ContractFile};
use crate::sensitive::{
    force_all, heuristic_labels, llm_labels, locate_sensitive_llm, merge_labels, qualified, validate_signatures,
    LocateError, SensitiveLabel,
};

#[derive(Debug, Clone, Default)]
pub struct PipelineOptions {
    /// Write one Graphviz file per analyzed function here.
    pub dump_cfg_dir: Option<PathBuf>,
}

#[derive(Default)]
struct Clock {
    extract: AtomicU64,
    complete: AtomicU64,
    detect: AtomicU64,
}

impl Clock {
    fn add(slot: &AtomicU64, since: Instant) {
        slot.fetch_add(since.elapsed().as_millis() as u64, Ordering::Relaxed);
    }
}

/// What one file contributes to the report.
#[derive(Default)]
struct FilePart {
    status: Option<FileStatus>,
    snippets: Vec<SnippetStatus>,
    findings: Vec<Finding>,
    failures: Vec<Failure>,
    hallucinated: Vec<Hallucination>,
    unparsable: Vec<UnparsableResponse>,
}

struct Ctx<'a> {
    config: &'a ScanConfig,
    gateway: Option<&'a Gateway>,
    driver: &'a dyn CompilerDriver,
    lower: LowerOptions,
    cache: CompileCache,
    clock: Clock,
    opts: &'a PipelineOptions,
    dump_lock: Mutex<()>,
}

pub fn run_pipeline(
    config: &ScanConfig,
    gateway: Option<&Gateway>,
    driver: &dyn CompilerDriver,
) -> Result<Report, ConfigError> {
    run_pipeline_with(config, gateway, driver, &PipelineOptions::default())
}

pub fn run_pipeline_with(
    config: &ScanConfig,
    gateway: Option<&Gateway>,
    driver: &dyn CompilerDriver,
    opts: &PipelineOptions,
) -> Result<Report, ConfigError> {
    config.validate()?;
    if config.mode == ScanMode::Repository && gateway.is_none() && !config.heuristic {
        return Err(ConfigError::Invalid(
            "repository mode needs a language model or the heuristic extractor".into(),
        ));
    }
    let started = Instant::now();
    let discovery = walk_repository(config).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let discover_ms = started.elapsed().as_millis() as u64;

    let ctx = Ctx {
        config,
        gateway,
        driver,
        lower: LowerOptions {
            token_transfer_patterns: config.token_transfer_patterns.clone(),
        },
        cache: CompileCache::new(),
        clock: Clock::default(),
        opts,
        dump_lock: Mutex::new(()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| ConfigError::Invalid(format!("cannot start worker pool: {e}")))?;
    let parts: Vec<FilePart> = pool.install(|| {
        discovery
            .files
            .par_iter()
            .map(|f| match config.mode {
                ScanMode::Repository => scan_repository_file(&ctx, f),
                ScanMode::SingleContract => scan_single_file(&ctx, f),
            })
            .collect()
    });

    let mut report = Report {
        config: echo(config, gateway, driver),
        ..Report::default()
    };
    for path in discovery.excluded {
        report.files.push(FileStatus {
            path,
            status: FileState::Excluded,
            detail: None,
        });
    }
    for u in discovery.unreadable {
        report.files.push(FileStatus {
            path: u.path,
            status: FileState::Unreadable,
            detail: Some(u.error),
        });
    }
    for p in parts {
        report.files.extend(p.status);
        report.snippets.extend(p.snippets);
        report.findings.extend(p.findings);
        report.failures.extend(p.failures);
        report.hallucinated.extend(p.hallucinated);
        report.unparsable_responses.extend(p.unparsable);
    }
    report.timings.discover_ms = discover_ms;
    report.timings.extract_ms = ctx.clock.extract.load(Ordering::Relaxed);
    report.timings.complete_ms = ctx.clock.complete.load(Ordering::Relaxed);
    report.timings.detect_ms = ctx.clock.detect.load(Ordering::Relaxed);
    report.timings.total_ms = started.elapsed().as_millis() as u64;
    report.finalize();
    Ok(report)
}

fn echo(config: &ScanConfig, gateway: Option<&Gateway>, driver: &dyn CompilerDriver) -> ConfigEcho {
    ConfigEcho {
        root: config.root.to_string_lossy().replace('\\', "/"),
        mode: match config.mode {
            ScanMode::Repository => "repo".into(),
            ScanMode::SingleContract => "single".into(),
        },
        excluded_dirs: config.excluded_dirs.clone(),
        max_call_depth: config.max_call_depth,
        time_limit_ms: config.time_limit.as_millis() as u64,
        reflection_max_iters: config.reflection_max_iters,
        heuristic: config.heuristic,
        llm: match gateway.map(Gateway::mode) {
            None => "off",
            Some(GatewayMode::Live) => "live",
            Some(GatewayMode::Record) => "record",
            Some(GatewayMode::Replay) => "replay",
        }
        .into(),
        compiler: driver.name().to_string(),
        include_reachable_internal: config.include_reachable_internal,
        token_transfer_patterns: config.token_transfer_patterns.clone(),
    }
}

fn scanned(path: &str) -> Option<FileStatus> {
    Some(FileStatus {
        path: path.to_string(),
        status: FileState::Scanned,
        detail: None,
    })
}

fn parse_or_record(file: &ContractFile, part: &mut FilePart) -> Option<SyntaxTree> {
    match parse(&file.source) {
        Ok(t) => Some(t),
        Err(e) => {
            part.status = Some(FileStatus {
                path: file.path.clone(),
                status: FileState::ParseFailed,
                detail: Some(e.to_string()),
            });
            None
        }
    }
}

/// Whether detection looks at this function as a target at all.
fn analyzable(info: &FunctionInfo, include_internal: bool) -> bool {
    info.has_body
        && info.kind == FunctionKind::Function
        && (info.visibility.is_entry_point() || include_internal)
        || info.has_body && matches!(info.kind, FunctionKind::Fallback | FunctionKind::Receive)
}

fn scan_repository_file(ctx: &Ctx<'_>, file: &ContractFile) -> FilePart {
    let mut part = FilePart::default();
    let t0 = Instant::now();
    let Some(tree) = parse_or_record(file, &mut part) else {
        return part;
    };
    part.status = scanned(&file.path);

    let mut llm = Vec::new();
    if let Some(g) = ctx.gateway {
        match locate_sensitive_llm(file, g) {
            Ok(sigs) => {
                let (validated, hallucinated) = validate_signatures(&sigs, &tree);
                part.hallucinated.extend(hallucinated.into_iter().map(|s| Hallucination {
                    path: file.path.clone(),
                    signature: s.to_string(),
                }));
                llm = llm_labels(&tree, &validated, &ctx.lower);
            }
            Err(LocateError::UnparsableResponse { response }) => part.unparsable.push(UnparsableResponse {
                path: file.path.clone(),
                function: None,
                stage: "locate".into(),
                response,
            }),
            Err(e) => part.failures.push(Failure {
                path: file.path.clone(),
                function: None,
                kind: FailureKind::Gateway,
                reason: e.to_string(),
            }),
        }
    }
    let heuristic = if ctx.config.heuristic {
        heuristic_labels(&tree, &ctx.lower)
    } else {
        Vec::new()
    };
    let labels: Vec<(FunctionInfo, SensitiveLabel)> = merge_labels(llm, heuristic)
        .into_iter()
        .filter(|(i, _)| analyzable(i, ctx.config.include_reachable_internal))
        .collect();
    Clock::add(&ctx.clock.extract, t0);

    for (info, label) in labels {
        let snippet = FunctionSnippet {
            text: tree.text(info.source_span).to_string(),
            info,
            origin: file.path.clone(),
        };
        analyze_snippet(ctx, file, snippet, label, &mut part);
    }
    part
}

fn analyze_snippet(ctx: &Ctx<'_>, file: &ContractFile, snippet: FunctionSnippet, label: SensitiveLabel, part: &mut FilePart) {
    let deadline = Deadline::after(ctx.config.time_limit);
    let t0 = Instant::now();
    let completer = Completer {
        gateway: ctx.gateway,
        driver: ctx.driver,
        max_iters: ctx.config.reflection_max_iters,
        cache: Some(&ctx.cache),
    };
    let completed = completer.complete_until_compilable(&snippet, file.version_constraint.as_ref(), &file.source, &deadline);
    Clock::add(&ctx.clock.complete, t0);

    let mut status = SnippetStatus {
        path: file.path.clone(),
        contract: snippet.info.contract_name.clone(),
        function: snippet.info.signature().to_string(),
        provenance: label.provenance,
        operations: label.operations.clone(),
        completion: completed.status,
        iterations: completed.iterations,
        compiler_version: completed.compiler_version.clone(),
        outcome: Outcome::Failed,
        cause: completed.cause.clone(),
    };
    let fail = |kind: FailureKind, reason: String| Failure {
        path: file.path.clone(),
        function: Some(snippet.info.qualified_name()),
        kind,
        reason,
    };
    match completed.status {
        CompletionStatus::Compiled => {}
        CompletionStatus::Modified => {
            part.failures.push(fail(
                FailureKind::Modified,
                "completed contract does not contain the snippet unmodified".into(),
            ));
            part.snippets.push(status);
            return;
        }
        CompletionStatus::CompileFailed => {
            let kind = if deadline.expired() {
                FailureKind::TimeLimit
            } else {
                FailureKind::CompileFailed
            };
            let reason = completed.cause.clone().unwrap_or_else(|| "compilation failed".into());
            part.failures.push(fail(kind, reason));
            part.snippets.push(status);
            return;
        }
    }

    let t1 = Instant::now();
    let result = detect_completed(ctx, file, &snippet, &label, &completed, &deadline);
    Clock::add(&ctx.clock.detect, t1);
    match result {
        Ok(findings) => {
            status.outcome = if findings.is_empty() { Outcome::Clean } else { Outcome::Flagged };
            part.findings.extend(findings);
        }
        Err((kind, reason)) => {
            status.cause = Some(reason.clone());
            part.failures.push(fail(kind, reason));
        }
    }
    part.snippets.push(status);
}

/// The function in `tree` that corresponds to `snippet`: same normalized
/// text first, then same signature.
fn locate_in_completed<'t>(tree: &SyntaxTree, snippet: &FunctionSnippet, fns: &'t [FunctionInfo]) -> Option<&'t FunctionInfo> {
    let want = normalize(&snippet.text);
    let candidates = || fns.iter().filter(|f| f.kind != FunctionKind::Modifier && f.has_body);
    candidates()
        .find(|f| normalize(tree.text(f.source_span)) == want)
        .or_else(|| {
            let sig = snippet.info.signature();
            candidates().find(|f| f.matches(&sig) && f.contract_name == snippet.info.contract_name)
        })
        .or_else(|| candidates().find(|f| f.matches(&snippet.info.signature())))
}

fn detect_completed(
    ctx: &Ctx<'_>,
    file: &ContractFile,
    snippet: &FunctionSnippet,
    label: &SensitiveLabel,
    completed: &CompletedContract,
    deadline: &Deadline,
) -> Result<Vec<Finding>, (FailureKind, String)> {
    let tree = parse(&completed.source).map_err(|e| (FailureKind::Analysis, format!("completed contract does not parse: {e}")))?;
    let fns = list_functions(&tree);
    let target = locate_in_completed(&tree, snippet, &fns)
        .ok_or_else(|| (FailureKind::Analysis, "snippet not found in completed contract".to_string()))?
        .clone();
    let labels = vec![(qualified(&target), label.clone())];
    let fcg = build_fcg(&tree, &labels, &ctx.lower);
    let outcome = detect_with_stats(&fcg, &ctx.config.analysis(), deadline)
        .map_err(|e| (FailureKind::TimeLimit, e.to_string()))?;
    debug!("{}: {} max path {}", file.path, target.qualified_name(), outcome.max_path);
    dump_cfgs(ctx, file, &fcg, &outcome.analyzed);

    // Map completed-contract spans back into the repository file. Exact
    // text lets us shift precisely; otherwise fall back to the function.
    let completed_text = tree.text(target.source_span);
    let exact = completed_text == snippet.text;
    let delta = snippet.info.source_span.start as isize - target.source_span.start as isize;
    let findings = outcome
        .findings
        .into_iter()
        .filter(|f| f.contract_name == target.contract_name && f.function == target.signature())
        .map(|mut f| {
            let inside = f.location.span.start >= target.source_span.start && f.location.span.end <= target.source_span.end;
            let span = if exact && inside {
                f.location.span.shift(delta)
            } else {
                snippet.info.source_span
            };
            f.contract_name = snippet.info.contract_name.clone();
            f.location.span = span;
            f.origin = Origin::new(file.path.clone(), &file.source, span, completed.iterations);
            f
        })
        .collect();
    Ok(findings)
}

fn dump_cfgs(ctx: &Ctx<'_>, file: &ContractFile, fcg: &crate::detect::Fcg, ids: &[usize]) {
    let Some(dir) = &ctx.opts.dump_cfg_dir else { return };
    let _guard = ctx.dump_lock.lock().unwrap();
    if let Err(e) = std::fs::create_dir_all(dir) {
        warn!("cannot create {}: {e}", dir.display());
        return;
    }
    for &id in ids {
        let n = fcg.node(id);
        let name = n.function.qualified_name();
        let stem: String = format!("{}__{}", file.path, name)
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '_' { c } else { '_' })
            .collect();
        let path = dir.join(format!("{stem}.dot"));
        if let Err(e) = std::fs::write(&path, n.cfg.to_dot(&name)) {
            warn!("cannot write {}: {e}", path.display());
        }
    }
}

fn scan_single_file(ctx: &Ctx<'_>, file: &ContractFile) -> FilePart {
    let mut part = FilePart::default();
    let t0 = Instant::now();
    let Some(tree) = parse_or_record(file, &mut part) else {
        return part;
    };
    part.status = scanned(&file.path);
    let labels: Vec<(FunctionInfo, SensitiveLabel)> = force_all(&tree, &ctx.lower)
        .into_iter()
        .filter(|(i, _)| analyzable(i, ctx.config.include_reachable_internal))
        .collect();
    Clock::add(&ctx.clock.extract, t0);

    let deadline = Deadline::after(ctx.config.time_limit);
    let t1 = Instant::now();
    let compiled = compile(ctx.driver, &file.source, file.version_constraint.as_ref());
    Clock::add(&ctx.clock.complete, t1);
    let status_for = |info: &FunctionInfo, label: &SensitiveLabel, version: Option<String>, completion: CompletionStatus| SnippetStatus {
        path: file.path.clone(),
        contract: info.contract_name.clone(),
        function: info.signature().to_string(),
        provenance: label.provenance,
        operations: label.operations.clone(),
        completion,
        iterations: 0,
        compiler_version: version,
        outcome: Outcome::Failed,
        cause: None,
    };
    let (version, ok, reason) = match compiled {
        Ok((v, r)) => {
            let reason = r
                .errors()
                .next()
                .map(|d| d.message.clone())
                .unwrap_or_else(|| "compilation failed".into());
            (Some(v.to_string()), r.success, reason)
        }
        Err(e) => (None, false, e.to_string()),
    };
    if !ok {
        for (info, label) in &labels {
            let mut s = status_for(info, label, version.clone(), CompletionStatus::CompileFailed);
            s.cause = Some(reason.clone());
            part.snippets.push(s);
            part.failures.push(Failure {
                path: file.path.clone(),
                function: Some(info.qualified_name()),
                kind: FailureKind::CompileFailed,
                reason: reason.clone(),
            });
        }
        return part;
    }

    let t2 = Instant::now();
    let sig_labels: Vec<_> = labels.iter().map(|(i, l)| (qualified(i), l.clone())).collect();
    let fcg = build_fcg(&tree, &sig_labels, &ctx.lower);
    let outcome = detect_with_stats(&fcg, &ctx.config.analysis(), &deadline);
    Clock::add(&ctx.clock.detect, t2);
    match outcome {
        Ok(outcome) => {
            dump_cfgs(ctx, file, &fcg, &outcome.analyzed);
            for &id in &outcome.analyzed {
                let info = &fcg.node(id).function;
                let label = &fcg.node(id).sensitivity;
                let mine: Vec<Finding> = outcome
                    .findings
                    .iter()
                    .filter(|f| f.contract_name == info.contract_name && f.function == info.signature())
                    .cloned()
                    .map(|mut f| {
                        f.origin = Origin::new(file.path.clone(), &file.source, f.location.span, 0);
                        f
                    })
                    .collect();
                let mut s = status_for(info, label, version.clone(), CompletionStatus::Compiled);
                s.outcome = if mine.is_empty() { Outcome::Clean } else { Outcome::Flagged };
                part.snippets.push(s);
                part.findings.extend(mine);
            }
        }
        Err(e) => {
            for (info, label) in &labels {
                let mut s = status_for(info, label, version.clone(), CompletionStatus::Compiled);
                s.cause = Some(e.to_string());
                part.snippets.push(s);
                part.failures.push(Failure {
                    path: file.path.clone(),
                    function: Some(info.qualified_name()),
                    kind: FailureKind::TimeLimit,
                    reason: e.to_string(),
                });
            }
        }
    }
    part
}
