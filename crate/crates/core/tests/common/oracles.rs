//! Independent oracles shared by the integration tests and the acceptance
//! run. Nothing here goes through the library's own analyses.

use std::collections::{BTreeMap, BTreeSet};

use guardscan_core::frontend::{list_functions, parse};
use guardscan_core::{FunctionInfo, FunctionKind};

use super::mutate::{lex, Kind};

// ---- call graph

pub type Tok<'a> = (Kind, &'a str);

pub fn code_tokens(src: &str) -> Vec<Tok<'_>> {
    lex(src)
        .into_iter()
        .filter(|t| !matches!(t.kind, Kind::Space | Kind::Comment))
        .map(|t| (t.kind, &src[t.start..t.end]))
        .collect()
}

/// `name -> bases` from `contract X is A, B {` headers.
pub fn bases(toks: &[Tok<'_>]) -> BTreeMap<String, Vec<String>> {
    let mut out = BTreeMap::new();
    for i in 0..toks.len() {
        if matches!(toks[i].1, "contract" | "library" | "interface") && toks.get(i + 1).is_some_and(|t| t.0 == Kind::Ident) {
            let mut bs = Vec::new();
            let mut j = i + 2;
            if toks.get(j).map(|t| t.1) == Some("is") {
                j += 1;
                while j < toks.len() && toks[j].1 != "{" {
                    if toks[j].0 == Kind::Ident && toks.get(j + 1).is_some_and(|t| t.1 == "," || t.1 == "{") {
                        bs.push(toks[j].1.to_string());
                    }
                    j += 1;
                }
            }
            out.insert(toks[i + 1].1.to_string(), bs);
        }
    }
    out
}

pub fn linear(name: &str, bases: &BTreeMap<String, Vec<String>>) -> Vec<String> {
    fn go(n: &str, b: &BTreeMap<String, Vec<String>>, seen: &mut BTreeSet<String>, out: &mut Vec<String>) {
        if !b.contains_key(n) || !seen.insert(n.to_string()) {
            return;
        }
        for x in &b[n] {
            go(x, b, seen, out);
        }
        out.push(n.to_string());
    }
    let mut out = Vec::new();
    go(name, bases, &mut BTreeSet::new(), &mut out);
    out.reverse();
    out
}

/// Number of top-level arguments in the parenthesized list opening at `open`.
pub fn arity(toks: &[Tok<'_>], open: usize) -> usize {
    let mut depth = 0;
    let mut commas = 0;
    let mut any = false;
    for t in &toks[open..] {
        match t.1 {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => {
                depth -= 1;
                if depth == 0 {
                    break;
                }
            }
            "," if depth == 1 => commas += 1,
            _ => {}
        }
        if depth >= 1 && !(depth == 1 && t.1 == "(") {
            any = true;
        }
    }
    if any {
        commas + 1
    } else {
        0
    }
}

pub fn oracle_edges(src: &str) -> BTreeSet<(String, String)> {
    let tree = parse(src).unwrap();
    let inv: Vec<FunctionInfo> = list_functions(&tree);
    let all = code_tokens(src);
    let bases = bases(&all);
    let libraries: BTreeSet<String> = all
        .windows(2)
        .filter(|w| w[0].1 == "library")
        .map(|w| w[1].1.to_string())
        .collect();
    let find = |contract: &str, name: &str, n: usize, entry_only: bool| -> Vec<&FunctionInfo> {
        inv.iter()
            .filter(|f| {
                f.contract_name == contract
                    && f.name == name
                    && f.parameter_types.len() == n
                    && f.has_body
                    && f.kind != FunctionKind::Modifier
                    && (!entry_only || f.visibility.is_entry_point())
            })
            .collect()
    };
    let in_levels = |levels: &[String], name: &str, n: usize, entry_only: bool| -> Vec<&FunctionInfo> {
        for l in levels {
            let hits = find(l, name, n, entry_only);
            if !hits.is_empty() {
                return hits;
            }
        }
        Vec::new()
    };
    let mut out = BTreeSet::new();
    for f in inv.iter().filter(|f| f.has_body) {
        let text = &src[f.source_span.start..f.source_span.end];
        let open = text.find('{').unwrap();
        let toks = code_tokens(&text[open..]);
        let own = linear(&f.contract_name, &bases);
        for i in 0..toks.len() {
            if toks[i].0 != Kind::Ident || toks.get(i + 1).map(|t| t.1) != Some("(") {
                continue;
            }
            let name = toks[i].1;
            let prev = if i > 0 { toks[i - 1].1 } else { "" };
            if matches!(prev, "function" | "emit" | "new" | "event" | "modifier") {
                continue;
            }
            let n = arity(&toks, i + 1);
            let hits: Vec<&FunctionInfo> = if prev == "." {
                let recv = toks[i - 2];
                match recv.1 {
                    "super" => in_levels(&own[1..], name, n, false),
                    "this" => in_levels(&own, name, n, true),
                    ")" => {
                        // `Name(expr).member(...)`
                        let mut depth = 0;
                        let mut j = i - 2;
                        loop {
                            match toks[j].1 {
                                ")" => depth += 1,
                                "(" => depth -= 1,
                                _ => {}
                            }
                            if depth == 0 {
                                break;
                            }
                            j -= 1;
                        }
                        match toks.get(j.wrapping_sub(1)) {
                            Some(t) if bases.contains_key(t.1) => in_levels(&linear(t.1, &bases), name, n, true),
                            _ => Vec::new(),
                        }
                    }
                    r if bases.contains_key(r) => in_levels(&linear(r, &bases), name, n, false),
                    _ => libraries.iter().flat_map(|l| find(l, name, n + 1, false)).collect(),
                }
            } else {
                let h = in_levels(&own, name, n, false);
                if h.is_empty() {
                    find("", name, n, false)
                } else {
                    h
                }
            };
            for h in hits {
                out.insert((f.qualified_name(), h.qualified_name()));
            }
        }
    }
    out
}

// ---- state writes

/// Token-level oracle: names written by assignment, compound assignment,
/// `++`/`--`, `delete`, or `.push`/`.pop` on a lvalue chain rooted at an
/// identifier. Declarations (`T x = ...`) are skipped and reported as locals.
pub fn token_writes(body: &str) -> (BTreeSet<String>, BTreeSet<String>) {
    let toks: Vec<(Kind, &str, usize, usize)> = lex(body)
        .into_iter()
        .filter(|t| !matches!(t.kind, Kind::Space | Kind::Comment))
        .map(|t| (t.kind, &body[t.start..t.end], t.start, t.end))
        .collect();
    let text = |i: usize| toks.get(i).map_or("", |t| t.1);
    let adjacent = |i: usize| i + 1 < toks.len() && toks[i].3 == toks[i + 1].2;
    // leftmost index of the lvalue chain ending at `end`
    let chain_start = |mut i: usize| -> Option<usize> {
        loop {
            match text(i) {
                "]" => {
                    let mut depth = 0;
                    loop {
                        match text(i) {
                            "]" => depth += 1,
                            "[" => depth -= 1,
                            _ => {}
                        }
                        if depth == 0 {
                            break;
                        }
                        i = i.checked_sub(1)?;
                    }
                    i = i.checked_sub(1)?;
                }
                _ if toks[i].0 == Kind::Ident => {
                    if i >= 2 && text(i - 1) == "." {
                        i -= 2;
                    } else {
                        return Some(i);
                    }
                }
                _ => return None,
            }
        }
    };
    let mut writes = BTreeSet::new();
    let mut locals = BTreeSet::new();
    let statement_start = |i: usize| i == 0 || matches!(text(i - 1), ";" | "{" | "}" | "(" | ",");
    let mut i = 0;
    while i < toks.len() {
        let t = text(i);
        let prev = if i > 0 { text(i - 1) } else { "" };
        let next = text(i + 1);
        let mut lhs_end = None;
        if t == "=" && next != "=" && next != ">" && !matches!(prev, "=" | "!" | "<" | ">") {
            let compound = matches!(prev, "+" | "-" | "*" | "/" | "%" | "|" | "&" | "^") && i > 0 && toks[i - 1].3 == toks[i].2;
            lhs_end = Some(if compound { i - 2 } else { i - 1 });
        } else if (t == "+" || t == "-") && next == t && adjacent(i) {
            if i > 0 && (toks[i - 1].0 == Kind::Ident || text(i - 1) == "]") {
                lhs_end = Some(i - 1);
            } else if toks.get(i + 2).is_some_and(|x| x.0 == Kind::Ident) {
                writes.insert(text(i + 2).to_string());
            }
            i += 1;
        } else if t == "delete" {
            writes.insert(text(i + 1).to_string());
        } else if (t == "push" || t == "pop") && prev == "." && next == "(" {
            lhs_end = Some(i - 2);
        }
        if let Some(end) = lhs_end {
            if let Some(s) = chain_start(end) {
                let root = text(s);
                if statement_start(s) || text(s.wrapping_sub(1)) == "." {
                    writes.insert(root.to_string());
                } else if s > 0 && (toks[s - 1].0 == Kind::Ident || text(s - 1) == "]") && s == end {
                    locals.insert(root.to_string());
                }
            }
        }
        i += 1;
    }
    (writes, locals)
}

// ---- path classes

/// Exact-segment comparison, written without the library's helpers.
pub fn segment_oracle(path: &str, excluded: &[&str]) -> bool {
    let norm = path.replace('\\', "/");
    let parts: Vec<&str> = norm.split('/').filter(|s| !s.is_empty()).collect();
    let dirs = &parts[..parts.len().saturating_sub(1)];
    !dirs
        .iter()
        .any(|d| excluded.iter().any(|x| d.to_ascii_lowercase() == x.to_ascii_lowercase()))
}

pub const PATHS: [&str; 50] = [
    "Token.sol",
    "src/Token.sol",
    "src/mock/Token.sol",
    "src/mocks/Token.sol",
    "src/mockery/Token.sol",
    "src/Mock/Token.sol",
    "src/MOCKS/Token.sol",
    "mock.sol",
    "src/mock.sol",
    "test/Foo.sol",
    "tests/Foo.sol",
    "testing/Foo.sol",
    "contest/Foo.sol",
    "src/test.sol",
    "src/tests.sol",
    "utils/Math.sol",
    "util/Math.sol",
    "src/utilities/Math.sol",
    "src/Utils/Math.sol",
    "lib/Math.sol",
    "library/Math.sol",
    "libraries/Math.sol",
    "src/libs/Math.sol",
    "interface/IERC20.sol",
    "interfaces/IERC20.sol",
    "src/Interfaces/IERC20.sol",
    "src/interfaced/IERC20.sol",
    "src/IInterface.sol",
    "a/b/c/d/e.sol",
    "a/b/test/d/e.sol",
    "a/b/c/d/test.sol",
    "a\\mocks\\b.sol",
    "a\\core\\b.sol",
    "a//mocks//b.sol",
    "/abs/path/x.sol",
    "/abs/tests/x.sol",
    "contracts/token/ERC20.sol",
    "contracts/token/mocks/ERC20Mock.sol",
    "contracts/Mocked/ERC20.sol",
    "node_modules/x/y.sol",
    "x/utils.sol",
    "x/utils/utils.sol",
    "x/utilsv2/y.sol",
    "x/_mocks/y.sol",
    "x/mocks_/y.sol",
    "x/ test /y.sol",
    "test",
    "tests/",
    "interfaces/",
    "deep/deeper/libraries/deepest/z.sol",
];

