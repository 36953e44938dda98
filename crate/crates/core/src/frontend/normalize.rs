//! Comment stripping and whitespace canonicalization.
//!
//! Both passes walk the text with a tiny lexer that understands `//` and
//! `/* */` comments and single/double-quoted string literals, so comment
//! markers inside literals are left alone and literal contents survive
//! byte-for-byte.

use serde::Serialize;

use super::FunctionSnippet;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct NormalizedCode {
    pub text: String,
}

enum Piece<'a> {
    Code(&'a str),
    /// The flag is false for a literal cut off by a line end.
    Literal(&'a str, bool),
    Comment(&'a str),
    Space(&'a str),
}

fn pieces<'a>(src: &'a str) -> Vec<Piece<'a>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut code_start = 0;
    let flush = |out: &mut Vec<Piece<'a>>, from: usize, to: usize| {
        if to > from {
            out.push(Piece::Code(&src[from..to]));
        }
    };
    while i < bytes.len() {
        let b = bytes[i];
        if b == b'/' && bytes.get(i + 1) == Some(&b'/') {
            flush(&mut out, code_start, i);
            let start = i;
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            out.push(Piece::Comment(&src[start..i]));
            code_start = i;
        } else if b == b'/' && bytes.get(i + 1) == Some(&b'*') {
            flush(&mut out, code_start, i);
            let start = i;
            i += 2;
            while i < bytes.len() && !(bytes[i] == b'*' && bytes.get(i + 1) == Some(&b'/')) {
                i += 1;
            }
            i = (i + 2).min(bytes.len());
            out.push(Piece::Comment(&src[start..i]));
            code_start = i;
        } else if b == b'"' || b == b'\'' {
            flush(&mut out, code_start, i);
            let start = i;
            let mut closed = false;
            i += 1;
            loop {
                match bytes.get(i) {
                    None => break,
                    // unterminated literal: stop before the line end
                    Some(b'\n') => break,
                    Some(&c) if c == b => {
                        i += 1;
                        closed = true;
                        break;
                    }
                    Some(b'\\') if bytes.get(i + 1).is_some_and(|n| *n != b'\n') => i += 2,
                    Some(_) => i += 1,
                }
            }
            while !src.is_char_boundary(i) {
                i += 1;
            }
            out.push(Piece::Literal(&src[start..i], closed));
            code_start = i;
        } else if (b as char).is_ascii_whitespace() || (b >= 0x80 && starts_unicode_space(&src[i..])) {
            flush(&mut out, code_start, i);
            let start = i;
            while i < bytes.len() {
                let c = src[i..].chars().next().unwrap();
                if !c.is_whitespace() {
                    break;
                }
                i += c.len_utf8();
            }
            out.push(Piece::Space(&src[start..i]));
            code_start = i;
        } else {
            i += 1;
            while i < bytes.len() && !src.is_char_boundary(i) {
                i += 1;
            }
        }
    }
    flush(&mut out, code_start, bytes.len());
    out
}

fn starts_unicode_space(s: &str) -> bool {
    s.chars().next().is_some_and(char::is_whitespace)
}

/// Replaces every comment with one space, keeping everything else,
/// including whitespace, verbatim.
pub fn strip_comments(src: &str) -> String {
    let mut out = String::with_capacity(src.len());
    for piece in pieces(src) {
        match piece {
            Piece::Code(s) | Piece::Literal(s, _) | Piece::Space(s) => out.push_str(s),
            Piece::Comment(_) => out.push(' '),
        }
    }
    out
}

/// Placeholder spelled in place of the pre-0.5 `throw` statement, which
/// the grammar no longer accepts. Same length, so spans are unaffected.
pub const THROW_MARKER: &str = "$thrw";

/// Rewrites `throw` keywords outside comments and literals to
/// [`THROW_MARKER`]; `None` when the text has none.
pub fn mask_throw(src: &str) -> Option<String> {
    let mut out = String::with_capacity(src.len());
    let mut found = false;
    for piece in pieces(src) {
        match piece {
            Piece::Code(s) => {
                let mut rest = s;
                while let Some(pos) = rest.find("throw") {
                    let before = rest[..pos].chars().next_back();
                    let after = rest[pos + 5..].chars().next();
                    let word = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric() || c == '_' || c == '$');
                    out.push_str(&rest[..pos]);
                    if word(before) || word(after) {
                        out.push_str("throw");
                    } else {
                        out.push_str(THROW_MARKER);
                        found = true;
                    }
                    rest = &rest[pos + 5..];
                }
                out.push_str(rest);
            }
            Piece::Literal(s, _) | Piece::Space(s) | Piece::Comment(s) => out.push_str(s),
        }
    }
    found.then_some(out)
}

/// Drops comments, collapses each maximal whitespace run (comments count as
/// whitespace) to one space and trims the ends. Literals are untouched.
pub fn normalize(src: &str) -> NormalizedCode {
    let mut text = String::with_capacity(src.len());
    let mut pending_space = false;
    // a cut-off literal must stay cut off by a line end, or re-lexing the
    // output would extend it
    let mut open_literal = false;
    for piece in pieces(src) {
        match piece {
            Piece::Space(_) | Piece::Comment(_) => pending_space = true,
            Piece::Code(s) | Piece::Literal(s, _) => {
                if pending_space && !text.is_empty() {
                    text.push(if open_literal { '\n' } else { ' ' });
                }
                pending_space = false;
                open_literal = matches!(piece, Piece::Literal(_, false));
                text.push_str(s);
            }
        }
    }
    NormalizedCode { text }
}

/// Whether the snippet survives, modulo layout and comments, inside the
/// completed contract. Comparison is case-sensitive.
pub fn contains_unmodified(completed: &str, original: &FunctionSnippet) -> bool {
    contains_normalized(completed, &original.text)
}

pub fn contains_normalized(haystack: &str, needle: &str) -> bool {
    let needle = normalize(needle).text;
    normalize(haystack).text.contains(&needle)
}
