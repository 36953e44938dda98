//! Solidity `pragma solidity` version ranges.
//!
//! Solidity follows npm-style range syntax: comparators separated by
//! whitespace form a conjunction, `||` separates alternatives, `^`/`~`
//! expand to bounded ranges, and partial versions (`0.8`) act as x-ranges.

use std::fmt;

use semver::Version;
use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed version constraint `{text}`: {reason}")]
pub struct MalformedPragma {
    pub text: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Exact,
    Greater,
    GreaterEq,
    Less,
    LessEq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Comparator {
    op: Op,
    version: Version,
}

impl Comparator {
    fn matches(&self, v: &Version) -> bool {
        match self.op {
            Op::Exact => v == &self.version,
            Op::Greater => v > &self.version,
            Op::GreaterEq => v >= &self.version,
            Op::Less => v < &self.version,
            Op::LessEq => v <= &self.version,
        }
    }
}

/// A version range, kept in its source form for display and expanded into
/// plain comparators for matching.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VersionConstraint {
    text: String,
    alternatives: Vec<Vec<Comparator>>,
}

impl VersionConstraint {
    pub fn parse(text: &str) -> Result<Self, MalformedPragma> {
        let text = text.trim();
        let err = |reason: &str| MalformedPragma {
            text: text.to_string(),
            reason: reason.to_string(),
        };
        if text.is_empty() {
            return Err(err("empty range"));
        }
        let mut alternatives = Vec::new();
        for alt in text.split("||") {
            let tokens = tokenize(alt).map_err(|r| err(&r))?;
            if tokens.is_empty() {
                return Err(err("empty alternative"));
            }
            let mut set = Vec::new();
            let mut i = 0;
            while i < tokens.len() {
                // hyphen range `a - b`
                if i + 2 < tokens.len() && tokens[i + 1] == "-" {
                    let from = Partial::parse(&tokens[i]).map_err(|r| err(&r))?;
                    let to = Partial::parse(&tokens[i + 2]).map_err(|r| err(&r))?;
                    set.push(Comparator {
                        op: Op::GreaterEq,
                        version: from.floor(),
                    });
                    set.extend(to.upper_inclusive());
                    i += 3;
                    continue;
                }
                set.extend(expand(&tokens[i]).map_err(|r| err(&r))?);
                i += 1;
            }
            alternatives.push(set);
        }
        Ok(Self {
            text: text.to_string(),
            alternatives,
        })
    }

    pub fn matches(&self, version: &Version) -> bool {
        self.alternatives
            .iter()
            .any(|set| set.iter().all(|c| c.matches(version)))
    }

    /// Picks the newest of `available` that satisfies the range.
    pub fn select<'a>(&self, available: &'a [Version]) -> Option<&'a Version> {
        available.iter().filter(|v| self.matches(v)).max()
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

impl fmt::Display for VersionConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl Serialize for VersionConstraint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

/// Splits one alternative into comparator tokens, gluing operators to the
/// version that follows them (`>= 0.5.0` and `>=0.5.0` are the same token).
fn tokenize(s: &str) -> Result<Vec<String>, String> {
    let mut out: Vec<String> = Vec::new();
    let mut pending_op = String::new();
    for word in s.split_whitespace() {
        if word == "-" {
            if !pending_op.is_empty() {
                return Err("operator before hyphen".into());
            }
            out.push(word.to_string());
            continue;
        }
        if word.chars().all(|c| "<>=^~".contains(c)) {
            pending_op.push_str(word);
            continue;
        }
        out.push(format!("{pending_op}{word}"));
        pending_op.clear();
    }
    if !pending_op.is_empty() {
        return Err(format!("dangling operator `{pending_op}`"));
    }
    Ok(out)
}

/// A version with possibly missing or wildcard components.
#[derive(Debug, Clone, Copy)]
struct Partial {
    major: Option<u64>,
    minor: Option<u64>,
    patch: Option<u64>,
}

impl Partial {
    fn parse(s: &str) -> Result<Self, String> {
        let s = s.strip_prefix('v').unwrap_or(s);
        if s.is_empty() {
            return Err("missing version".into());
        }
        let mut parts = [None; 3];
        let mut count = 0;
        for (i, p) in s.split('.').enumerate() {
            if i >= 3 {
                return Err(format!("too many components in `{s}`"));
            }
            count += 1;
            parts[i] = match p {
                "*" | "x" | "X" => None,
                _ => Some(
                    p.parse::<u64>()
                        .map_err(|_| format!("bad version component `{p}`"))?,
                ),
            };
        }
        // a wildcard swallows everything after it
        for i in 0..count {
            if parts[i].is_none() {
                for slot in parts.iter_mut().skip(i) {
                    *slot = None;
                }
                break;
            }
        }
        Ok(Self {
            major: parts[0],
            minor: parts[1],
            patch: parts[2],
        })
    }

    fn floor(&self) -> Version {
        Version::new(
            self.major.unwrap_or(0),
            self.minor.unwrap_or(0),
            self.patch.unwrap_or(0),
        )
    }

    /// Exclusive upper bound implied by the missing components, if any.
    fn xrange_ceiling(&self) -> Option<Version> {
        match (self.major, self.minor, self.patch) {
            (None, _, _) => None,
            (Some(ma), None, _) => Some(Version::new(ma + 1, 0, 0)),
            (Some(ma), Some(mi), None) => Some(Version::new(ma, mi + 1, 0)),
            _ => None,
        }
    }

    fn is_complete(&self) -> bool {
        self.patch.is_some()
    }

    fn upper_inclusive(&self) -> Vec<Comparator> {
        if self.is_complete() {
            vec![Comparator {
                op: Op::LessEq,
                version: self.floor(),
            }]
        } else {
            self.xrange_ceiling()
                .map(|v| Comparator {
                    op: Op::Less,
                    version: v,
                })
                .into_iter()
                .collect()
        }
    }
}

fn expand(token: &str) -> Result<Vec<Comparator>, String> {
    let (op, rest) = split_op(token);
    let p = Partial::parse(rest)?;
    let ge = |v: Version| Comparator {
        op: Op::GreaterEq,
        version: v,
    };
    let lt = |v: Version| Comparator {
        op: Op::Less,
        version: v,
    };
    Ok(match op {
        "" | "=" => {
            if p.is_complete() {
                vec![Comparator {
                    op: Op::Exact,
                    version: p.floor(),
                }]
            } else {
                let mut v = vec![ge(p.floor())];
                v.extend(p.xrange_ceiling().map(lt));
                v
            }
        }
        "^" => {
            let floor = p.floor();
            let ceiling = match (p.major, p.minor, p.patch) {
                (None, _, _) => None,
                (Some(ma), _, _) if ma > 0 => Some(Version::new(ma + 1, 0, 0)),
                (Some(0), None, _) => Some(Version::new(1, 0, 0)),
                (Some(0), Some(mi), _) if mi > 0 => Some(Version::new(0, mi + 1, 0)),
                (Some(0), Some(0), None) => Some(Version::new(0, 1, 0)),
                (Some(0), Some(0), Some(pa)) => Some(Version::new(0, 0, pa + 1)),
                _ => unreachable!(),
            };
            let mut v = vec![ge(floor)];
            v.extend(ceiling.map(lt));
            v
        }
        "~" => {
            let ceiling = match (p.major, p.minor) {
                (None, _) => None,
                (Some(ma), None) => Some(Version::new(ma + 1, 0, 0)),
                (Some(ma), Some(mi)) => Some(Version::new(ma, mi + 1, 0)),
            };
            let mut v = vec![ge(p.floor())];
            v.extend(ceiling.map(lt));
            v
        }
        ">=" => vec![ge(p.floor())],
        ">" => match p.xrange_ceiling() {
            Some(c) if !p.is_complete() => vec![ge(c)],
            _ => vec![Comparator {
                op: Op::Greater,
                version: p.floor(),
            }],
        },
        "<" => vec![lt(p.floor())],
        "<=" => p.upper_inclusive(),
        other => return Err(format!("unknown operator `{other}`")),
    })
}

fn split_op(token: &str) -> (&str, &str) {
    let n = token
        .char_indices()
        .find(|(_, c)| !"<>=^~".contains(*c))
        .map(|(i, _)| i)
        .unwrap_or(token.len());
    token.split_at(n)
}
