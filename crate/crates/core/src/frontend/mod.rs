//! Solidity front end: parsing, function inventory, snippet extraction.
//!
//! Grammar-level parsing is delegated to `solang-parser`; everything the
//! analysis needs on top of the raw tree (function inventory, signature
//! matching, canonical type names, spans) lives here.

pub mod normalize;
pub mod signature;
pub mod visit;

use std::fmt;

use serde::Serialize;
use solang_parser::pt::{
    self, ContractDefinition, ContractPart, ContractTy, Expression, FunctionAttribute,
    FunctionDefinition, FunctionTy, Loc, SourceUnitPart,
};
use thiserror::Error;

use crate::scanner::ContractFile;
pub use normalize::{contains_unmodified, normalize, NormalizedCode};
pub use signature::{canonical_type, Signature};

/// Half-open byte range into a source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn of(loc: &Loc) -> Self {
        match loc {
            Loc::File(_, s, e) => Self::new(*s, *e),
            _ => Self::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn shift(&self, delta: isize) -> Self {
        Self::new(
            (self.start as isize + delta) as usize,
            (self.end as isize + delta) as usize,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseDiagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse failed: {}", .diagnostics.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ParseFailure {
    pub diagnostics: Vec<ParseDiagnostic>,
}

/// 1-based line and column of a byte offset.
pub fn line_col(source: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(source.len());
    let before = &source[..offset];
    let line = before.bytes().filter(|b| *b == b'\n').count() + 1;
    let col = before.rfind('\n').map(|n| offset - n).unwrap_or(offset + 1);
    (line, col)
}

/// A successfully parsed source unit together with its text.
#[derive(Debug, Clone)]
pub struct SyntaxTree {
    pub source: String,
    pub unit: pt::SourceUnit,
}

pub fn parse(source: &str) -> Result<SyntaxTree, ParseFailure> {
    let masked = normalize::mask_throw(source);
    let text = masked.as_deref().unwrap_or(source);
    let parsed = std::panic::catch_unwind(|| solang_parser::parse(text, 0));
    match parsed {
        Ok(Ok((unit, _comments))) => Ok(SyntaxTree {
            source: source.to_string(),
            unit,
        }),
        Ok(Err(diags)) => Err(ParseFailure {
            diagnostics: diags
                .into_iter()
                .map(|d| {
                    let (line, column) = line_col(source, Span::of(&d.loc).start);
                    ParseDiagnostic {
                        line,
                        column,
                        message: d.message,
                    }
                })
                .collect(),
        }),
        Err(_) => Err(ParseFailure {
            diagnostics: vec![ParseDiagnostic {
                line: 1,
                column: 1,
                message: "parser aborted".into(),
            }],
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Visibility {
    Public,
    External,
    Internal,
    Private,
}

impl Visibility {
    pub fn is_entry_point(self) -> bool {
        matches!(self, Visibility::Public | Visibility::External)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum FunctionKind {
    Function,
    Constructor,
    Modifier,
    Fallback,
    Receive,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct FunctionInfo {
    pub name: String,
    pub parameter_types: Vec<String>,
    pub visibility: Visibility,
    pub kind: FunctionKind,
    pub modifiers: Vec<String>,
    /// Empty for free functions declared at file level.
    pub contract_name: String,
    pub source_span: Span,
    pub has_body: bool,
}

impl FunctionInfo {
    pub fn signature(&self) -> Signature {
        Signature {
            contract: None,
            name: self.name.clone(),
            param_types: self.parameter_types.clone(),
        }
    }

    pub fn qualified_name(&self) -> String {
        if self.contract_name.is_empty() {
            self.signature().to_string()
        } else {
            format!("{}.{}", self.contract_name, self.signature())
        }
    }

    /// Whether `sig` names this function under the forgiving matching rules:
    /// same name, arity and canonical parameter types; an optional contract
    /// qualifier must agree.
    pub fn matches(&self, sig: &Signature) -> bool {
        if sig.contract.as_deref().is_some_and(|c| c != self.contract_name) {
            return false;
        }
        self.name == sig.name
            && self.parameter_types.len() == sig.param_types.len()
            && self
                .parameter_types
                .iter()
                .zip(&sig.param_types)
                .all(|(a, b)| a == b)
    }
}

/// A function definition paired with its enclosing contract.
#[derive(Debug, Clone, Copy)]
pub struct FunctionRef<'a> {
    pub contract: Option<&'a ContractDefinition>,
    pub def: &'a FunctionDefinition,
}

impl SyntaxTree {
    pub fn contracts(&self) -> impl Iterator<Item = &ContractDefinition> {
        self.unit.0.iter().filter_map(|p| match p {
            SourceUnitPart::ContractDefinition(c) => Some(c.as_ref()),
            _ => None,
        })
    }

    pub fn contract(&self, name: &str) -> Option<&ContractDefinition> {
        self.contracts().find(|c| ident(&c.name) == name)
    }

    /// Every function, constructor, modifier, fallback and receive
    /// definition in source order.
    pub fn function_refs(&self) -> Vec<FunctionRef<'_>> {
        let mut out = Vec::new();
        for part in &self.unit.0 {
            match part {
                SourceUnitPart::FunctionDefinition(def) => out.push(FunctionRef {
                    contract: None,
                    def,
                }),
                SourceUnitPart::ContractDefinition(c) => {
                    for p in &c.parts {
                        if let ContractPart::FunctionDefinition(def) = p {
                            out.push(FunctionRef {
                                contract: Some(c),
                                def,
                            });
                        }
                    }
                }
                _ => {}
            }
        }
        out
    }

    pub fn text(&self, span: Span) -> &str {
        &self.source[span.start..span.end]
    }
}

pub fn ident(id: &Option<pt::Identifier>) -> &str {
    id.as_ref().map(|i| i.name.as_str()).unwrap_or("")
}

pub fn is_interface(c: &ContractDefinition) -> bool {
    matches!(c.ty, ContractTy::Interface(_))
}

pub fn is_library(c: &ContractDefinition) -> bool {
    matches!(c.ty, ContractTy::Library(_))
}

pub fn function_info(f: FunctionRef<'_>) -> FunctionInfo {
    let def = f.def;
    let contract_name = f.contract.map(|c| ident(&c.name).to_string()).unwrap_or_default();
    let name = ident(&def.name).to_string();
    let kind = match def.ty {
        FunctionTy::Constructor => FunctionKind::Constructor,
        FunctionTy::Modifier => FunctionKind::Modifier,
        FunctionTy::Fallback => FunctionKind::Fallback,
        FunctionTy::Receive => FunctionKind::Receive,
        FunctionTy::Function if def.name.is_none() => FunctionKind::Fallback,
        // pre-0.5 constructors are spelled as a function named after the
        // contract; anything else (including near misses) is a function.
        FunctionTy::Function if !contract_name.is_empty() && name == contract_name => {
            FunctionKind::Constructor
        }
        FunctionTy::Function => FunctionKind::Function,
    };
    let name = match kind {
        _ if !name.is_empty() => name,
        FunctionKind::Constructor => "constructor".to_string(),
        FunctionKind::Receive => "receive".to_string(),
        FunctionKind::Fallback => "fallback".to_string(),
        _ => name,
    };
    let explicit = def.attributes.iter().find_map(|a| match a {
        FunctionAttribute::Visibility(v) => Some(match v {
            pt::Visibility::External(_) => Visibility::External,
            pt::Visibility::Public(_) => Visibility::Public,
            pt::Visibility::Internal(_) => Visibility::Internal,
            pt::Visibility::Private(_) => Visibility::Private,
        }),
        _ => None,
    });
    let visibility = explicit.unwrap_or(match kind {
        FunctionKind::Modifier => Visibility::Internal,
        FunctionKind::Fallback | FunctionKind::Receive => Visibility::External,
        // free functions are internal; contract members default to public
        _ if f.contract.is_none() => Visibility::Internal,
        _ => Visibility::Public,
    });
    let modifiers = def
        .attributes
        .iter()
        .filter_map(|a| match a {
            FunctionAttribute::BaseOrModifier(_, base) => Some(
                base.name
                    .identifiers
                    .iter()
                    .map(|i| i.name.as_str())
                    .collect::<Vec<_>>()
                    .join("."),
            ),
            _ => None,
        })
        .collect();
    let parameter_types = def
        .params
        .iter()
        .map(|(_, p)| p.as_ref().map(|p| type_name(&p.ty)).unwrap_or_default())
        .collect();
    FunctionInfo {
        name,
        parameter_types,
        visibility,
        kind,
        modifiers,
        contract_name,
        source_span: Span::of(&def.loc),
        has_body: def.body.is_some(),
    }
}

pub fn list_functions(tree: &SyntaxTree) -> Vec<FunctionInfo> {
    tree.function_refs().into_iter().map(function_info).collect()
}

/// Canonical name of a type expression.
pub fn type_name(expr: &Expression) -> String {
    canonical_type(&raw_type_name(expr))
}

fn raw_type_name(expr: &Expression) -> String {
    match expr {
        Expression::Type(_, ty) => match ty {
            pt::Type::Address | pt::Type::AddressPayable | pt::Type::Payable => "address".into(),
            pt::Type::Bool => "bool".into(),
            pt::Type::String => "string".into(),
            pt::Type::Int(n) => format!("int{n}"),
            pt::Type::Uint(n) => format!("uint{n}"),
            pt::Type::Bytes(n) => format!("bytes{n}"),
            pt::Type::Rational => "fixed".into(),
            pt::Type::DynamicBytes => "bytes".into(),
            pt::Type::Mapping { key, value, .. } => {
                format!("mapping({}=>{})", raw_type_name(key), raw_type_name(value))
            }
            pt::Type::Function { .. } => "function".into(),
        },
        Expression::Variable(id) => id.name.clone(),
        Expression::MemberAccess(_, base, id) => format!("{}.{}", raw_type_name(base), id.name),
        Expression::ArraySubscript(_, base, None) => format!("{}[]", raw_type_name(base)),
        Expression::ArraySubscript(_, base, Some(len)) => {
            let len = match len.as_ref() {
                Expression::NumberLiteral(_, n, _, _) => n.clone(),
                Expression::Variable(id) => id.name.clone(),
                _ => "?".into(),
            };
            format!("{}[{len}]", raw_type_name(base))
        }
        Expression::Parenthesis(_, inner) => raw_type_name(inner),
        _ => "?".into(),
    }
}

/// Raw text of one function definition, as found in its file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FunctionSnippet {
    pub info: FunctionInfo,
    pub text: String,
    pub origin: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SnippetError {
    #[error("no function matching `{0}`")]
    SignatureNotFound(String),
    #[error(transparent)]
    Parse(#[from] ParseFailure),
}

pub fn extract_snippet(
    file: &ContractFile,
    tree: &SyntaxTree,
    signature: &Signature,
) -> Result<FunctionSnippet, SnippetError> {
    let info = list_functions(tree)
        .into_iter()
        .find(|f| f.kind != FunctionKind::Modifier && f.matches(signature))
        .ok_or_else(|| SnippetError::SignatureNotFound(signature.to_string()))?;
    Ok(FunctionSnippet {
        text: tree.text(info.source_span).to_string(),
        info,
        origin: file.path.clone(),
    })
}

/// Parses the file and extracts one function by signature.
pub fn extract_snippet_from(
    file: &ContractFile,
    signature: &Signature,
) -> Result<FunctionSnippet, SnippetError> {
    let tree = parse(&file.source)?;
    extract_snippet(file, &tree, signature)
}
