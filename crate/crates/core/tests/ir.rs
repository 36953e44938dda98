mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::oracles::token_writes;
use guardscan_core::frontend::parse;
use guardscan_core::ir::{lower_tree, state_variables, EdgeLabel, InstrKind, IrFunction, LowerOptions, Target};
use guardscan_core::FunctionKind;

fn fixture(rel: &str) -> String {
    std::fs::read_to_string(common::fixtures().join(rel)).unwrap()
}

fn kind_name(k: &InstrKind) -> String {
    match k {
        InstrKind::Transfer => "Transfer".into(),
        InstrKind::StateWrite(v) => format!("StateWrite({v})"),
        InstrKind::LowLevelCall(m) => format!("LowLevelCall({m})"),
        InstrKind::HighLevelCall { member, .. } => format!("HighLevelCall({member})"),
        InstrKind::InternalCall(c) => format!("InternalCall({})", c.name),
        InstrKind::SolidityCall(n) => format!("SolidityCall({n})"),
        InstrKind::Condition => "Condition".into(),
        InstrKind::Assign(v) => format!("Assign({v})"),
        InstrKind::Return => "Return".into(),
        InstrKind::Other => "Other".into(),
    }
}

struct Golden {
    entry: String,
    blocks: BTreeMap<String, Vec<String>>,
    edges: BTreeSet<(String, String, String)>,
}

fn load_golden(rel: &str) -> Golden {
    let mut g = Golden {
        entry: String::new(),
        blocks: BTreeMap::new(),
        edges: BTreeSet::new(),
    };
    for line in fixture(rel).lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        if let Some(rest) = line.strip_prefix("entry ") {
            g.entry = rest.to_string();
        } else if let Some(rest) = line.strip_prefix("block ") {
            let (name, kinds) = rest.split_once(':').unwrap();
            let kinds = kinds.split(", ").map(str::trim).filter(|k| !k.is_empty()).map(str::to_string).collect();
            g.blocks.insert(name.to_string(), kinds);
        } else if let Some(rest) = line.strip_prefix("edge ") {
            let p: Vec<&str> = rest.split_whitespace().collect();
            g.edges.insert((p[0].into(), p[1].into(), p[2].into()));
        } else {
            panic!("bad golden line {line}");
        }
    }
    g
}

/// Searches for a block bijection that maps the golden graph onto `f`'s CFG.
fn isomorphic(g: &Golden, f: &IrFunction) -> bool {
    let cfg = &f.cfg;
    let names: Vec<&String> = g.blocks.keys().collect();
    if names.len() != cfg.blocks.len() {
        return false;
    }
    let kinds: Vec<Vec<String>> = cfg
        .blocks
        .iter()
        .map(|b| b.instructions.iter().map(|i| kind_name(&i.kind)).collect())
        .collect();
    let actual: BTreeSet<(usize, String, String)> = cfg
        .edges
        .iter()
        .map(|e| {
            let label = match e.label {
                EdgeLabel::Seq => "Seq",
                EdgeLabel::True => "T",
                EdgeLabel::False => "F",
            };
            let to = match e.to {
                Target::Block(b) => format!("#{b}"),
                Target::Return => "return".into(),
                Target::Revert => "revert".into(),
            };
            (e.from, label.to_string(), to)
        })
        .collect();
    fn search(
        k: usize,
        names: &[&String],
        g: &Golden,
        kinds: &[Vec<String>],
        actual: &BTreeSet<(usize, String, String)>,
        entry: usize,
        map: &mut BTreeMap<String, usize>,
        used: &mut Vec<bool>,
    ) -> bool {
        if k == names.len() {
            let mapped: BTreeSet<(usize, String, String)> = g
                .edges
                .iter()
                .map(|(a, l, b)| {
                    let to = match b.as_str() {
                        "return" | "revert" => b.clone(),
                        _ => format!("#{}", map[b]),
                    };
                    (map[a], l.clone(), to)
                })
                .collect();
            return &mapped == actual;
        }
        let name = names[k];
        for cand in 0..kinds.len() {
            if used[cand] || kinds[cand] != g.blocks[name] || ((*name == g.entry) != (cand == entry)) {
                continue;
            }
            used[cand] = true;
            map.insert(name.clone(), cand);
            if search(k + 1, names, g, kinds, actual, entry, map, used) {
                return true;
            }
            map.remove(name);
            used[cand] = false;
        }
        false
    }
    search(0, &names, g, &kinds, &actual, cfg.entry, &mut BTreeMap::new(), &mut vec![false; kinds.len()])
}

fn lowered(rel: &str) -> Vec<IrFunction> {
    let tree = parse(&fixture(rel)).unwrap();
    lower_tree(&tree, &LowerOptions::default())
}

#[test]
fn nested_if_matches_hand_drawn_graph() {
    let fs = lowered("ir/nested_if.sol");
    assert!(isomorphic(&load_golden("ir/nested_if.golden"), &fs[0]), "{}", fs[0].cfg.to_dot("f"));
}

#[test]
fn loop_and_require_match_hand_drawn_graph() {
    let fs = lowered("ir/loop_require.sol");
    assert!(isomorphic(&load_golden("ir/loop_require.golden"), &fs[0]), "{}", fs[0].cfg.to_dot("g"));
}

#[test]
fn golden_check_rejects_a_mislabeled_edge() {
    let fs = lowered("ir/nested_if.sol");
    let mut g = load_golden("ir/nested_if.golden");
    let e = ("outer".to_string(), "T".to_string(), "inner".to_string());
    g.edges.remove(&e);
    g.edges.insert(("outer".into(), "F".into(), "inner".into()));
    assert!(!isomorphic(&g, &fs[0]));
}

#[test]
fn inherited_state_variables() {
    let src = fixture("ir/inherit.sol");
    let tree = parse(&src).unwrap();
    let leaf = tree.contract("Leaf").unwrap();
    let got: Vec<(String, String)> = state_variables(&tree, leaf)
        .into_iter()
        .map(|v| (v.contract_name, v.name))
        .collect();
    let want = [
        ("Base", "owner"),
        ("Base", "fee"),
        ("Middle", "balances"),
        ("Middle", "fee2"),
        ("Leaf", "paused"),
        ("Leaf", "history"),
        ("Leaf", "slot"),
    ];
    assert_eq!(got, want.map(|(c, n)| (c.to_string(), n.to_string())));
    let act = lowered("ir/inherit.sol").into_iter().find(|f| f.info.name == "act").unwrap();
    let writes: BTreeSet<String> = act
        .cfg
        .instructions()
        .iter()
        .filter_map(|i| match &i.kind {
            InstrKind::StateWrite(v) => Some(v.clone()),
            _ => None,
        })
        .collect();
    let want: BTreeSet<String> = ["balances", "history", "slot", "paused", "owner"].map(String::from).into();
    assert_eq!(writes, want, "the local `fee` shadows the inherited one");
}

#[test]
fn state_writes_agree_with_token_oracle() {
    let mut sources = common::manifest_sources();
    for extra in ["ir/inherit.sol", "ir/nested_if.sol", "ir/loop_require.sol", "frontend/inventory.sol"] {
        sources.push((extra.to_string(), fixture(extra)));
    }
    let mut checked = 0;
    for (path, src) in sources {
        let tree = parse(&src).unwrap();
        for f in lower_tree(&tree, &LowerOptions::default()) {
            if !f.info.has_body || f.info.kind == FunctionKind::Modifier || f.info.contract_name.is_empty() {
                continue;
            }
            let contract = tree.contract(&f.info.contract_name).unwrap();
            let state: BTreeSet<String> = state_variables(&tree, contract).into_iter().map(|v| v.name).collect();
            let body = &src[f.info.source_span.start..f.info.source_span.end];
            let (written, mut locals) = token_writes(body);
            locals.extend(f.params.iter().cloned());
            locals.extend(f.returns.iter().cloned());
            let want: BTreeSet<String> = written
                .into_iter()
                .filter(|w| state.contains(w) && !locals.contains(w))
                .collect();
            let got: BTreeSet<String> = f
                .cfg
                .instructions()
                .iter()
                .filter_map(|i| match &i.kind {
                    InstrKind::StateWrite(v) => Some(v.clone()),
                    _ => None,
                })
                .collect();
            assert_eq!(got, want, "{path}: {}", f.info.qualified_name());
            checked += 1;
        }
    }
    assert!(checked > 60, "{checked}");
}

#[test]
fn indices_are_unique_and_blocks_partition_instructions() {
    let mut sources = common::manifest_sources();
    sources.push(("pathological/lattice.sol".into(), fixture("pathological/lattice.sol")));
    for (path, src) in sources {
        let tree = parse(&src).unwrap();
        for f in lower_tree(&tree, &LowerOptions::default()) {
            let all: Vec<usize> = f.cfg.blocks.iter().flat_map(|b| b.instructions.iter().map(|i| i.index)).collect();
            let uniq: BTreeSet<usize> = all.iter().copied().collect();
            assert_eq!(uniq.len(), all.len(), "{path}: {}", f.info.qualified_name());
            for b in &f.cfg.blocks {
                assert!(b.instructions.windows(2).all(|w| w[0].index < w[1].index));
            }
            let reach: BTreeSet<usize> = f.cfg.reachable().into_iter().collect();
            assert_eq!(reach.len(), f.cfg.blocks.len(), "{path}: every block reachable");
        }
    }
}

#[test]
fn selfdestruct_call_sites_are_classified() {
    for (path, src) in common::manifest_sources() {
        let tree = parse(&src).unwrap();
        for f in lower_tree(&tree, &LowerOptions::default()) {
            if !f.info.has_body {
                continue;
            }
            let body = &src[f.info.source_span.start..f.info.source_span.end];
            let toks = common::mutate::token_stream(body);
            let sites = toks.windows(2).filter(|w| (w[0] == "selfdestruct" || w[0] == "suicide") && w[1] == "(").count();
            let got = f.cfg.instructions().iter().filter(|i| i.kind.is_selfdestruct()).count();
            assert_eq!(got, sites, "{path}: {}", f.info.qualified_name());
        }
    }
}

#[test]
fn empty_body_is_one_empty_block() {
    let tree = parse("contract E { function f() public {} }").unwrap();
    let f = &lower_tree(&tree, &LowerOptions::default())[0];
    assert_eq!(f.cfg.blocks.len(), 1);
    assert!(f.cfg.blocks[0].instructions.is_empty());
}
