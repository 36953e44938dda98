mod common;

use std::collections::BTreeSet;

use guardscan_core::frontend::{list_functions, parse};
use guardscan_core::ir::LowerOptions;
use guardscan_core::sensitive::{
    force_all, heuristic_labels, llm_labels, locate_sensitive_heuristic, locate_sensitive_llm, merge_labels, qualified,
    validate_signatures, LocateError,
};
use guardscan_core::gateway::template::{bindings, CODE};
use guardscan_core::gateway::{render_prompt, Gateway, PromptTemplate, Transcript};
use guardscan_core::{ContractFile, FunctionKind, Provenance, SensitiveOperation, Signature};
use proptest::prelude::*;

use SensitiveOperation::*;

/// Statements with the operations they perform, written down by hand.
const POOL: [(&str, &[SensitiveOperation]); 9] = [
    ("selfdestruct(payable(owner));", &[Selfdestruct]),
    ("payable(msg.sender).transfer(1);", &[Transfer]),
    ("payable(msg.sender).send(1);", &[Transfer]),
    ("owner.call(\"\");", &[ExternalCall]),
    ("count = count + 1;", &[StateWrite]),
    ("balances[msg.sender] = 0;", &[StateWrite]),
    ("require(count > 0);", &[]),
    ("emit Ping(count);", &[]),
    ("token.totalSupply();", &[ExternalCall]),
];

fn contract(bodies: &[Vec<usize>]) -> String {
    let mut s = String::from(
        "pragma solidity ^0.8.0;\ninterface IToken { function totalSupply() external view returns (uint256); }\ncontract Gen {\n    address owner;\n    uint256 count;\n    IToken token;\n    mapping(address => uint256) balances;\n    event Ping(uint256 v);\n",
    );
    for (i, b) in bodies.iter().enumerate() {
        s += &format!("    function f{i}() public {{\n");
        for (k, &stmt) in b.iter().enumerate() {
            s += &format!("        uint256 local{k} = {k};\n        local{k} = local{k} + 1;\n");
            s += &format!("        {}\n", POOL[stmt].0);
        }
        s += "    }\n";
    }
    s + "}\n"
}

fn expected(body: &[usize]) -> BTreeSet<SensitiveOperation> {
    body.iter().flat_map(|&i| POOL[i].1.iter().copied()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn heuristic_matches_statement_oracle(bodies in prop::collection::vec(prop::collection::vec(0..POOL.len(), 0..5), 1..6)) {
        let src = contract(&bodies);
        let tree = parse(&src).unwrap();
        let got = heuristic_labels(&tree, &LowerOptions::default());
        prop_assert_eq!(got.len(), bodies.len());
        for ((info, label), body) in got.iter().zip(&bodies) {
            let want = expected(body);
            prop_assert_eq!(&label.operations, &want, "{}", info.name);
            prop_assert_eq!(label.is_sensitive, !want.is_empty());
        }
    }

    #[test]
    fn validation_partitions_candidates(picks in prop::collection::vec(0usize..40, 0..30)) {
        let src = std::fs::read_to_string(common::fixtures().join("frontend/overloads.sol")).unwrap();
        let tree = parse(&src).unwrap();
        let inv: Vec<_> = list_functions(&tree).into_iter().filter(|f| f.kind != FunctionKind::Modifier).collect();
        let cands: Vec<Signature> = picks
            .iter()
            .map(|&p| if p < inv.len() { qualified(&inv[p]) } else { Signature::new(format!("ghost{p}"), vec!["uint256".into()]) })
            .collect();
        let (ok, bad) = validate_signatures(&cands, &tree);
        for c in &cands {
            let hit = ok.iter().any(|f| f.matches(c));
            prop_assert!(hit != bad.contains(c), "{} must be in exactly one side", c);
        }
        for f in &ok {
            prop_assert!(cands.iter().any(|c| f.matches(c)));
        }
        let mut rev = cands.clone();
        rev.reverse();
        let (ok2, bad2) = validate_signatures(&rev, &tree);
        let names = |v: &[guardscan_core::FunctionInfo]| v.iter().map(|f| f.qualified_name()).collect::<BTreeSet<_>>();
        prop_assert_eq!(names(&ok), names(&ok2));
        prop_assert_eq!(bad.iter().collect::<BTreeSet<_>>(), bad2.iter().collect::<BTreeSet<_>>());
    }
}

#[test]
fn heuristic_agrees_with_manifest() {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for f in common::manifest()["fixtures"].as_array().unwrap() {
        let path = f["path"].as_str().unwrap();
        let src = std::fs::read_to_string(common::fixtures().join(path)).unwrap();
        let tree = parse(&src).unwrap();
        let got: BTreeSet<String> = locate_sensitive_heuristic(&tree, &LowerOptions::default())
            .into_iter()
            .map(|(s, _)| s.to_string())
            .collect();
        let want: BTreeSet<String> = common::strings(&f["sensitive"]).into_iter().collect();
        tp += got.intersection(&want).count();
        fp += got.difference(&want).count();
        fn_ += want.difference(&got).count();
        assert_eq!(got, want, "{path}");
    }
    assert!(tp > 0);
    assert_eq!((fp, fn_), (0, 0));
}

#[test]
fn every_selfdestruct_site_is_labeled() {
    for (path, src) in common::manifest_sources() {
        let tree = parse(&src).unwrap();
        for (info, label) in heuristic_labels(&tree, &LowerOptions::default()) {
            let body = &src[info.source_span.start..info.source_span.end];
            let toks = common::mutate::token_stream(body);
            let direct = toks.windows(2).any(|w| w[0] == "selfdestruct" && w[1] == "(");
            assert_eq!(direct, label.operations.contains(&Selfdestruct), "{path}: {}", info.qualified_name());
        }
    }
}

#[test]
fn single_mode_labels_all_implemented_functions() {
    let src = std::fs::read_to_string(common::fixtures().join("frontend/inventory.sol")).unwrap();
    let tree = parse(&src).unwrap();
    let forced = force_all(&tree, &LowerOptions::default());
    let want: Vec<String> = list_functions(&tree)
        .into_iter()
        .filter(|f| f.has_body && f.kind != FunctionKind::Modifier)
        .map(|f| f.qualified_name())
        .collect();
    let got: Vec<String> = forced.iter().map(|(i, _)| i.qualified_name()).collect();
    assert_eq!(got, want);
    assert!(forced.iter().all(|(_, l)| l.is_sensitive && l.provenance == Provenance::ForcedAllFunctions));
}

#[test]
fn merge_is_order_independent() {
    let (_, src) = common::manifest_sources().into_iter().find(|(p, _)| p.ends_with("eai_token.sol")).unwrap();
    let tree = parse(&src).unwrap();
    let inv: Vec<_> = list_functions(&tree).into_iter().filter(|f| f.has_body && f.kind != FunctionKind::Modifier).collect();
    let llm = llm_labels(&tree, &inv, &LowerOptions::default());
    let heur = heuristic_labels(&tree, &LowerOptions::default());
    let a = merge_labels(llm.clone(), heur.clone());
    let mut llm_r = llm.clone();
    llm_r.reverse();
    let mut heur_r = heur.clone();
    heur_r.reverse();
    let b = merge_labels(llm_r, heur_r);
    assert_eq!(a, b);
    assert!(a.iter().all(|(_, l)| l.is_sensitive));
    for (info, label) in &a {
        let h = heur.iter().find(|(i, _)| i == info).map(|(_, l)| l.operations.clone()).unwrap_or_default();
        assert!(h.is_subset(&label.operations), "{}", info.qualified_name());
    }
}

#[test]
fn llm_path_keeps_real_signatures_only() {
    let (path, src) = common::manifest_sources().into_iter().find(|(p, _)| p.ends_with("simple_bank.sol")).unwrap();
    let file = ContractFile::new(path, src.clone());
    let prompt = render_prompt(&PromptTemplate::sensitive_location(), &bindings([(CODE, src.as_str())])).unwrap();
    let mut t = Transcript::new();
    t.push(prompt.clone(), "```json\n[\"withdraw(uint256)\", \"drain()\"]\n```");
    let sigs = locate_sensitive_llm(&file, &Gateway::replay(t)).unwrap();
    let tree = parse(&src).unwrap();
    let (ok, bad) = validate_signatures(&sigs, &tree);
    assert_eq!(ok.iter().map(|f| f.qualified_name()).collect::<Vec<_>>(), vec!["SimpleBank.withdraw(uint256)"]);
    assert_eq!(bad, vec![Signature::parse("drain()").unwrap()]);

    let mut t = Transcript::new();
    t.push(prompt, "The withdraw function looks risky to me.");
    assert!(matches!(locate_sensitive_llm(&file, &Gateway::replay(t)), Err(LocateError::UnparsableResponse { .. })));
}
