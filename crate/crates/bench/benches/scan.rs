use std::time::Duration;

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use guardscan_bench::{fixtures, sources};
use guardscan_core::completion::SyntaxCheckDriver;
use guardscan_core::deadline::Deadline;
use guardscan_core::detect::{build_fcg, detect};
use guardscan_core::frontend::{contains_unmodified, extract_snippet, parse};
use guardscan_core::ir::LowerOptions;
use guardscan_core::sensitive::{heuristic_labels, qualified};
use guardscan_core::{run_pipeline, AnalysisOptions, ContractFile, ScanConfig, Signature};

fn frontend(c: &mut Criterion) {
    let corpus = sources("corpus");
    c.bench_function("parse corpus", |b| {
        b.iter(|| {
            for (_, src) in &corpus {
                black_box(parse(src).unwrap());
            }
        })
    });
    let lower = LowerOptions::default();
    let trees: Vec<_> = corpus.iter().map(|(_, s)| parse(s).unwrap()).collect();
    c.bench_function("heuristic labels over corpus", |b| {
        b.iter(|| {
            for t in &trees {
                black_box(heuristic_labels(t, &lower));
            }
        })
    });

    let (_, bank) = sources("reference").into_iter().find(|(n, _)| n == "simple_bank.sol").unwrap();
    let file = ContractFile::new("simple_bank.sol", bank.clone());
    let tree = parse(&bank).unwrap();
    let snippet = extract_snippet(&file, &tree, &Signature::parse("withdraw(uint256)").unwrap()).unwrap();
    c.bench_function("unmodified check", |b| b.iter(|| contains_unmodified(black_box(&bank), &snippet)));
}

fn detection(c: &mut Criterion) {
    let lower = LowerOptions::default();
    let opts = AnalysisOptions::default();
    let prepared: Vec<_> = sources("corpus")
        .into_iter()
        .map(|(_, src)| {
            let tree = parse(&src).unwrap();
            let labels: Vec<_> = heuristic_labels(&tree, &lower).into_iter().map(|(i, l)| (qualified(&i), l)).collect();
            (tree, labels)
        })
        .collect();
    c.bench_function("call graph and detection over corpus", |b| {
        b.iter(|| {
            for (tree, labels) in &prepared {
                let g = build_fcg(tree, labels, &lower);
                black_box(detect(&g, &opts, &Deadline::unbounded()).unwrap());
            }
        })
    });

    let (_, lattice) = sources("pathological").remove(0);
    let tree = parse(&lattice).unwrap();
    let labels: Vec<_> = heuristic_labels(&tree, &lower).into_iter().map(|(i, l)| (qualified(&i), l)).collect();
    let g = build_fcg(&tree, &labels, &lower);
    let mut group = c.benchmark_group("lattice by depth");
    for depth in [4usize, 8, 12] {
        let o = AnalysisOptions { max_call_depth: depth, ..AnalysisOptions::default() };
        group.bench_function(depth.to_string(), |b| b.iter(|| black_box(detect(&g, &o, &Deadline::unbounded()).unwrap())));
    }
    group.finish();
}

fn pipeline(c: &mut Criterion) {
    let cfg = ScanConfig::new(fixtures().join("corpus"));
    let driver = SyntaxCheckDriver::default();
    let mut group = c.benchmark_group("pipeline");
    group.measurement_time(Duration::from_secs(10));
    group.bench_function("offline corpus scan", |b| b.iter(|| black_box(run_pipeline(&cfg, None, &driver).unwrap())));
    group.finish();
}

criterion_group!(benches, frontend, detection, pipeline);
criterion_main!(benches);
