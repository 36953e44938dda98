#![allow(dead_code)]

//! A test-side Solidity lexer and two mutation generators: layout-only
//! rewrites and single-token edits. Shared with the acceptance harness.

use rand::rngs::StdRng;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Ident,
    Number,
    Str,
    Punct,
    Space,
    Comment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tok {
    pub kind: Kind,
    pub start: usize,
    pub end: usize,
}

pub fn lex(src: &str) -> Vec<Tok> {
    let b = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let start = i;
        let c = b[i];
        let kind = if c.is_ascii_whitespace() {
            while i < b.len() && b[i].is_ascii_whitespace() {
                i += 1;
            }
            Kind::Space
        } else if c == b'/' && b.get(i + 1) == Some(&b'/') {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
            Kind::Comment
        } else if c == b'/' && b.get(i + 1) == Some(&b'*') {
            i += 2;
            while i + 1 < b.len() && !(b[i] == b'*' && b[i + 1] == b'/') {
                i += 1;
            }
            i = (i + 2).min(b.len());
            Kind::Comment
        } else if c == b'"' || c == b'\'' {
            i += 1;
            while i < b.len() && b[i] != c && b[i] != b'\n' {
                if b[i] == b'\\' {
                    i += 1;
                }
                i += 1;
            }
            i = (i + 1).min(b.len());
            Kind::Str
        } else if c.is_ascii_alphabetic() || c == b'_' || c == b'$' {
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'$') {
                i += 1;
            }
            Kind::Ident
        } else if c.is_ascii_digit() {
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'.') {
                i += 1;
            }
            Kind::Number
        } else {
            i += 1;
            while i < b.len() && !src.is_char_boundary(i) {
                i += 1;
            }
            Kind::Punct
        };
        out.push(Tok { kind, start, end: i });
    }
    out
}

/// Tokens with layout and comments dropped, as text.
pub fn token_stream(src: &str) -> Vec<&str> {
    lex(src)
        .into_iter()
        .filter(|t| !matches!(t.kind, Kind::Space | Kind::Comment))
        .map(|t| &src[t.start..t.end])
        .collect()
}

fn random_space(rng: &mut StdRng) -> String {
    let n = rng.random_range(1..=4);
    (0..n).map(|_| [' ', '\t', '\n', ' '][rng.random_range(0..4)]).collect()
}

/// Rewrites whitespace runs and inserts comments inside them. Never
/// creates whitespace where there was none.
pub fn layout_mutation(src: &str, rng: &mut StdRng) -> String {
    let mut out = String::with_capacity(src.len() + 32);
    let toks = lex(src);
    let mut changed = false;
    for (k, t) in toks.iter().enumerate() {
        let text = &src[t.start..t.end];
        let last = k + 1 == toks.len();
        match t.kind {
            Kind::Space if rng.random_bool(0.3) || (last && !changed) => {
                changed = true;
                let after_line_comment = k > 0 && src[toks[k - 1].start..].starts_with("//");
                if after_line_comment && out.ends_with(&src[toks[k - 1].start..toks[k - 1].end]) {
                    out.push('\n');
                }
                match rng.random_range(0..3) {
                    0 => out.push_str(&random_space(rng)),
                    1 => {
                        out.push_str(&random_space(rng));
                        out.push_str("/* note */");
                        out.push_str(&random_space(rng));
                    }
                    _ => {
                        out.push(' ');
                        out.push_str("// note");
                        out.push('\n');
                        out.push_str(&random_space(rng));
                    }
                }
            }
            Kind::Comment if rng.random_bool(0.5) => {
                changed = true;
                // swap one comment for another; a line comment keeps its line end
                out.push_str("/* was a comment */");
            }
            _ => out.push_str(text),
        }
    }
    if !changed {
        out.insert_str(0, "\n/* leading */ ");
    }
    out
}

const PUNCT: &[&str] = &["+", "-", "*", "(", ")", "{", "}", ";", ",", "=", "<", ">", "!", "."];

/// One token edit inside `src[range]`: replace, delete, or insert before.
/// The first and last code token of the range are only ever replaced, so
/// the edit cannot be absorbed by the surrounding text.
pub fn token_mutation(src: &str, range: (usize, usize), rng: &mut StdRng) -> String {
    let code: Vec<Tok> = lex(src)
        .into_iter()
        .filter(|t| t.start >= range.0 && t.end <= range.1 && !matches!(t.kind, Kind::Space | Kind::Comment))
        .collect();
    assert!(code.len() >= 3, "range too small to mutate");
    let k = rng.random_range(0..code.len());
    let t = &code[k];
    let text = &src[t.start..t.end];
    let interior = k > 0 && k + 1 < code.len();
    let op = if interior { rng.random_range(0..3) } else { 0 };
    let (start, end, with) = match op {
        0 => {
            let with = match t.kind {
                Kind::Ident => format!("{text}Q"),
                Kind::Number => format!("{text}7"),
                Kind::Str => format!("{}Z{}", &text[..1], &text[1..]),
                _ => {
                    let mut p = PUNCT[rng.random_range(0..PUNCT.len())];
                    while p == text {
                        p = PUNCT[rng.random_range(0..PUNCT.len())];
                    }
                    p.to_string()
                }
            };
            (t.start, t.end, with)
        }
        1 => (t.start, t.end, String::new()),
        _ => (t.start, t.start, "zq ".to_string()),
    };
    format!("{}{}{}", &src[..start], with, &src[end..])
}
