use std::fmt;

use serde::{Serialize, Serializer};

/// `name(type,...)`, optionally qualified by a contract name. Parameter
/// names and data locations are never part of a signature.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Signature {
    pub contract: Option<String>,
    pub name: String,
    pub param_types: Vec<String>,
}

impl Signature {
    pub fn new(name: impl Into<String>, param_types: Vec<String>) -> Self {
        Self {
            contract: None,
            name: name.into(),
            param_types: param_types.iter().map(|t| canonical_type(t)).collect(),
        }
    }

    /// Forgiving parse of signatures as a language model tends to write
    /// them: `withdraw(uint256)`, `function withdraw(uint amount) external`,
    /// `Bank.withdraw(uint256 amount)`.
    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim().trim_matches(|c| c == '`' || c == '"' || c == '\'');
        let text = text.strip_prefix("function ").unwrap_or(text).trim_start();
        let open = text.find('(')?;
        let close = matching_paren(text, open)?;
        let head = text[..open].trim();
        let (contract, name) = match head.rsplit_once('.') {
            Some((c, n)) => (Some(c.trim().to_string()), n.trim()),
            None => (None, head),
        };
        if name.is_empty() || !name.chars().all(is_ident_char) || name.starts_with(|c: char| c.is_ascii_digit()) {
            return None;
        }
        if contract.as_deref().is_some_and(|c| c.is_empty() || !c.chars().all(is_ident_char)) {
            return None;
        }
        let params = &text[open + 1..close];
        let mut param_types = Vec::new();
        for raw in split_top_level(params) {
            let raw = raw.trim();
            if raw.is_empty() {
                continue;
            }
            param_types.push(param_type(raw)?);
        }
        Some(Self {
            contract,
            name: name.to_string(),
            param_types,
        })
    }

    pub fn arity(&self) -> usize {
        self.param_types.len()
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(c) = &self.contract {
            write!(f, "{c}.")?;
        }
        write!(f, "{}({})", self.name, self.param_types.join(","))
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$'
}

fn matching_paren(text: &str, open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (i, c) in text[open..].char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(open + i);
                }
            }
            _ => {}
        }
    }
    None
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

const LOCATIONS: [&str; 3] = ["memory", "storage", "calldata"];

/// Type of one parameter declaration, dropping locations and the name.
fn param_type(raw: &str) -> Option<String> {
    // mapping(...) parameters (internal functions only) keep their full text
    if raw.starts_with("mapping") {
        let close = raw.rfind(')')?;
        return Some(canonical_type(&raw[..=close]));
    }
    let mut words: Vec<&str> = raw
        .split_whitespace()
        .filter(|w| !LOCATIONS.contains(w) && *w != "indexed")
        .collect();
    if words.is_empty() {
        return None;
    }
    if words.len() > 1 {
        let last = *words.last().unwrap();
        if last != "payable" && last.chars().all(is_ident_char) {
            words.pop();
        }
    }
    Some(canonical_type(&words.join(" ")))
}

/// Canonical spelling used for matching: `uint` → `uint256`,
/// `address payable` → `address`, no whitespace.
pub fn canonical_type(ty: &str) -> String {
    let compact: String = ty.split_whitespace().collect::<Vec<_>>().join(" ");
    let compact = compact.replace("address payable", "address");
    let end = compact.find(['[', '(']).unwrap_or(compact.len());
    let (base, suffix) = compact.split_at(end);
    let base = match base.trim() {
        "uint" => "uint256",
        "int" => "int256",
        "byte" => "bytes1",
        "ufixed" => "ufixed128x18",
        "fixed" => "fixed128x18",
        other => other,
    };
    let mut out = String::with_capacity(compact.len());
    out.push_str(base);
    out.extend(suffix.chars().filter(|c| !c.is_whitespace()));
    if base.starts_with("mapping") {
        return out.replace(' ', "");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_shapes() {
        let s = Signature::parse("withdraw(uint256)").unwrap();
        assert_eq!(s.to_string(), "withdraw(uint256)");
        let s = Signature::parse("function withdraw(uint amount) external").unwrap();
        assert_eq!(s.to_string(), "withdraw(uint256)");
        let s = Signature::parse("`donate(address payable beneficiary)`").unwrap();
        assert_eq!(s.to_string(), "donate(address)");
        let s = Signature::parse("Bank.f(string memory name, uint[] calldata xs)").unwrap();
        assert_eq!(s.contract.as_deref(), Some("Bank"));
        assert_eq!(s.param_types, vec!["string", "uint256[]"]);
        let s = Signature::parse("deposit()").unwrap();
        assert_eq!(s.arity(), 0);
    }

    #[test]
    fn rejects_non_signatures() {
        assert!(Signature::parse("no parens here").is_none());
        assert!(Signature::parse("(uint256)").is_none());
        assert!(Signature::parse("a b(uint)").is_none());
        assert!(Signature::parse("f(uint").is_none());
    }

    #[test]
    fn canonical_types() {
        assert_eq!(canonical_type("uint"), "uint256");
        assert_eq!(canonical_type("uint [ ]"), "uint256[]");
        assert_eq!(canonical_type("address payable"), "address");
        assert_eq!(canonical_type("IERC20"), "IERC20");
        assert_eq!(canonical_type("byte"), "bytes1");
    }
}
