mod common;

use std::fs;
use std::path::Path;

use guardscan_core::config::DEFAULT_EXCLUDED_DIRS;
use guardscan_core::scanner::{classify_path, discover_contracts, walk_repository};
use guardscan_core::{PathClass, ScanConfig};
use common::oracles::{segment_oracle, PATHS};
use proptest::prelude::*;

/// Plain recursive walk applying the exclusion rule segment by segment.
fn oracle_walk(root: &Path, rel: &str, excluded: &[&str], out: &mut Vec<String>) {
    let mut entries: Vec<_> = fs::read_dir(root.join(rel)).unwrap().map(|e| e.unwrap()).collect();
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let name = e.file_name().into_string().unwrap();
        let child = if rel.is_empty() { name.clone() } else { format!("{rel}/{name}") };
        let ty = e.file_type().unwrap();
        if ty.is_dir() {
            if excluded.iter().any(|x| x.eq_ignore_ascii_case(&name)) {
                continue;
            }
            oracle_walk(root, &child, excluded, out);
        } else if ty.is_file() && name.ends_with(".sol") {
            out.push(child);
        }
    }
}

fn tree(files: &[&str]) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for f in files {
        let p = dir.path().join(f);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(&p, "pragma solidity ^0.8.0;\ncontract A {}\n").unwrap();
    }
    dir
}

const LAYOUT: &[&str] = &[
    "a/utils/x.sol",
    "a/core/y.sol",
    "contracts/Token.sol",
    "contracts/interfaces/IToken.sol",
    "contracts/Mocks/MockToken.sol",
    "src/mockery/Token.sol",
    "src/test.sol",
    "src/lib/Math.sol",
    "src/libraries/SafeMath.sol",
    "tests/Foo.t.sol",
    "deep/a/b/c/d/Vault.sol",
    "deep/a/UTIL/e.sol",
    "README.md",
    "contracts/Token.sol.bak",
];

#[test]
fn walk_matches_oracle() {
    let dir = tree(LAYOUT);
    let config = ScanConfig::new(dir.path());
    let got: Vec<String> = discover_contracts(&config).unwrap().into_iter().map(|f| f.path).collect();
    let mut want = Vec::new();
    oracle_walk(dir.path(), "", &DEFAULT_EXCLUDED_DIRS, &mut want);
    want.sort();
    assert_eq!(got, want);
    assert!(got.contains(&"a/core/y.sol".to_string()));
    assert!(!got.contains(&"a/utils/x.sol".to_string()));
    assert!(got.contains(&"src/test.sol".to_string()));
    assert!(got.contains(&"src/mockery/Token.sol".to_string()));
}

#[test]
fn nested_example() {
    let dir = tree(&["a/utils/x.sol", "a/core/y.sol"]);
    let got: Vec<String> = discover_contracts(&ScanConfig::new(dir.path())).unwrap().into_iter().map(|f| f.path).collect();
    assert_eq!(got, vec!["a/core/y.sol"]);
}

#[test]
fn walk_is_deterministic_and_accounts_for_everything() {
    let dir = tree(LAYOUT);
    let config = ScanConfig::new(dir.path());
    let a = walk_repository(&config).unwrap();
    let b = walk_repository(&config).unwrap();
    assert_eq!(a.files, b.files);
    assert_eq!(a.excluded, b.excluded);
    let sol = LAYOUT.iter().filter(|p| p.ends_with(".sol")).count();
    assert_eq!(a.files.len() + a.excluded.len() + a.unreadable.len(), sol);
    for f in &a.files {
        assert_eq!(classify_path(&f.path, &config.excluded_dirs), PathClass::Include);
    }
}

#[test]
fn fixture_trees_only_yield_included_paths() {
    for sub in ["reference", "corpus", "pathological", ""] {
        let config = ScanConfig::new(common::fixtures().join(sub));
        for f in discover_contracts(&config).unwrap() {
            assert_eq!(classify_path(&f.path, &config.excluded_dirs), PathClass::Include, "{}", f.path);
        }
    }
}

#[test]
fn invalid_utf8_is_unreadable() {
    let dir = tree(&["ok.sol"]);
    fs::write(dir.path().join("bad.sol"), [0xff, 0xfe, 0x00]).unwrap();
    let d = walk_repository(&ScanConfig::new(dir.path())).unwrap();
    assert_eq!(d.files.len(), 1);
    assert_eq!(d.unreadable.len(), 1);
    assert_eq!(d.unreadable[0].path, "bad.sol");
}

#[test]
fn classify_matches_segment_oracle_on_table() {
    let excluded: Vec<String> = DEFAULT_EXCLUDED_DIRS.iter().map(|s| s.to_string()).collect();
    let mut mismatches = Vec::new();
    for p in PATHS {
        let want = if segment_oracle(p, &DEFAULT_EXCLUDED_DIRS) { PathClass::Include } else { PathClass::Exclude };
        if classify_path(p, &excluded) != want {
            mismatches.push(p);
        }
    }
    assert!(mismatches.is_empty(), "{mismatches:?}");
    assert_eq!(classify_path("src/mockery/Token.sol", &excluded), PathClass::Include);
}

fn segment() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("mock".to_string()),
        Just("Mocks".to_string()),
        Just("TEST".to_string()),
        Just("utils".to_string()),
        "[a-zA-Z_]{1,8}",
    ]
}

proptest! {
    #[test]
    fn classify_agrees_with_oracle(dirs in prop::collection::vec(segment(), 0..5), file in segment()) {
        let path = dirs.iter().chain([&format!("{file}.sol")]).cloned().collect::<Vec<_>>().join("/");
        let excluded: Vec<String> = DEFAULT_EXCLUDED_DIRS.iter().map(|s| s.to_string()).collect();
        let want = if segment_oracle(&path, &DEFAULT_EXCLUDED_DIRS) { PathClass::Include } else { PathClass::Exclude };
        prop_assert_eq!(classify_path(&path, &excluded), want);
    }

    #[test]
    fn classify_ignores_case_and_file_name(dirs in prop::collection::vec(segment(), 0..5), file in segment()) {
        let excluded: Vec<String> = DEFAULT_EXCLUDED_DIRS.iter().map(|s| s.to_string()).collect();
        let path = dirs.iter().chain([&format!("{file}.sol")]).cloned().collect::<Vec<_>>().join("/");
        let upper = path.to_ascii_uppercase().replace(".SOL", ".sol");
        prop_assert_eq!(classify_path(&path, &excluded), classify_path(&upper, &excluded));
        let renamed = dirs.iter().chain([&"mocks.sol".to_string()]).cloned().collect::<Vec<_>>().join("/");
        prop_assert_eq!(classify_path(&path, &excluded), classify_path(&renamed, &excluded));
    }
}
