//! The checks behind [`super::SyntaxCheckDriver`].

use std::collections::HashSet;

use semver::Version;
use solang_parser::pt::{
    ContractDefinition, ContractPart, Expression, FunctionAttribute, FunctionDefinition, FunctionTy,
    SourceUnitPart, Statement,
};

use super::compiler::Diagnostic;
use crate::frontend::normalize::THROW_MARKER;
use crate::frontend::visit::{walk_expr, walk_stmt_exprs, walk_stmts};
use crate::frontend::{ident, parse, SyntaxTree};
use crate::ir::linearize;
use crate::scanner::extract_pragma;

const BUILTINS: &[&str] = &[
    "msg", "block", "tx", "abi", "this", "super", "selfdestruct", "require", "assert", "revert",
    "keccak256", "sha256", "ripemd160", "ecrecover", "blockhash", "gasleft", "addmod", "mulmod",
    "type", "payable", "address", "bool", "string", "bytes", "_", "var",
];
const PRE_05_BUILTINS: &[&str] = &["suicide", "sha3", "throw", THROW_MARKER];
const PRE_07_BUILTINS: &[&str] = &["now"];

fn v(minor: u64, patch: u64) -> Version {
    Version::new(0, minor, patch)
}

pub fn check(source: &str, version: &Version) -> Vec<Diagnostic> {
    match extract_pragma(source) {
        Err(e) => return vec![Diagnostic::error(format!("ParserError: {e}"), None)],
        Ok(Some(c)) if !c.matches(version) => {
            let at = source.find("pragma").unwrap_or(0);
            return vec![Diagnostic::at(
                source,
                at,
                format!("ParserError: Source file requires different compiler version (current compiler is {version})"),
            )];
        }
        Ok(_) => {}
    }
    let tree = match parse(source) {
        Ok(t) => t,
        Err(f) => {
            return f
                .diagnostics
                .into_iter()
                .map(|d| Diagnostic::error(format!("ParserError: {}", d.message), Some(format!("{}:{}", d.line, d.column))))
                .collect()
        }
    };
    if tree.contracts().next().is_none() {
        return vec![Diagnostic::error("Error: source defines no contract, interface or library", None)];
    }
    let mut out = version_checks(&tree, version);
    out.extend(undeclared(&tree, version));
    out
}

fn all_functions(tree: &SyntaxTree) -> Vec<(Option<&ContractDefinition>, &FunctionDefinition)> {
    tree.function_refs().into_iter().map(|r| (r.contract, r.def)).collect()
}

fn version_checks(tree: &SyntaxTree, version: &Version) -> Vec<Diagnostic> {
    let src = tree.source.as_str();
    let mut out = Vec::new();
    for (c, f) in all_functions(tree) {
        if *version >= v(5, 0) && f.ty == FunctionTy::Function {
            if let (Some(c), Some(n)) = (c, &f.name) {
                if ident(&c.name) == n.name {
                    out.push(Diagnostic::at(
                        src,
                        f.loc.start(),
                        "SyntaxError: Functions are not allowed to have the same name as the contract. If you intend this to be a constructor, use \"constructor(...) { ... }\" to define it.",
                    ));
                }
            }
        }
        let Some(body) = &f.body else { continue };
        walk_stmts(body, &mut |s| {
            if let Statement::VariableDefinition(loc, decl, _) = s {
                if *version >= v(5, 0) && matches!(&decl.ty, Expression::Variable(id) if id.name == "var") {
                    out.push(Diagnostic::at(src, loc.start(), "SyntaxError: Use of the \"var\" keyword is disallowed."));
                }
            }
            if let Statement::Expression(loc, Expression::Variable(id)) = s {
                if id.name == THROW_MARKER && *version >= v(5, 0) {
                    out.push(Diagnostic::at(src, loc.start(), "ParserError: Expected primary expression (\"throw\" is no longer supported)."));
                }
            }
        });
        walk_stmt_exprs(body, &mut |e| match e {
            Expression::FunctionCallBlock(loc, ..) if *version < v(6, 2) => {
                out.push(Diagnostic::at(src, loc.start(), "ParserError: Function call options require 0.6.2 or later."));
            }
            Expression::FunctionCall(loc, callee, _) if *version >= v(7, 0) => {
                if let Expression::MemberAccess(_, base, m) = callee.as_ref() {
                    if (m.name == "value" || m.name == "gas") && matches!(base.as_ref(), Expression::MemberAccess(..)) {
                        out.push(Diagnostic::at(
                            src,
                            loc.start(),
                            format!("TypeError: Using \".{}(...)\" is deprecated. Use \"{{{}: ...}}\" instead.", m.name, m.name),
                        ));
                    }
                }
            }
            _ => {}
        });
    }
    out
}

#[derive(Default)]
struct Scope<'a> {
    names: HashSet<&'a str>,
}

impl<'a> Scope<'a> {
    fn add(&mut self, n: &'a Option<solang_parser::pt::Identifier>) {
        if let Some(n) = n {
            self.names.insert(&n.name);
        }
    }
}

fn file_scope<'a>(tree: &'a SyntaxTree, version: &Version) -> Scope<'a> {
    let mut s = Scope::default();
    s.names.extend(BUILTINS);
    if *version < v(5, 0) {
        s.names.extend(PRE_05_BUILTINS);
    }
    if *version < v(7, 0) {
        s.names.extend(PRE_07_BUILTINS);
    }
    for part in &tree.unit.0 {
        match part {
            SourceUnitPart::ContractDefinition(c) => s.add(&c.name),
            SourceUnitPart::StructDefinition(x) => s.add(&x.name),
            SourceUnitPart::EnumDefinition(x) => s.add(&x.name),
            SourceUnitPart::EventDefinition(x) => s.add(&x.name),
            SourceUnitPart::ErrorDefinition(x) => s.add(&x.name),
            SourceUnitPart::FunctionDefinition(x) => s.add(&x.name),
            SourceUnitPart::VariableDefinition(x) => s.add(&x.name),
            SourceUnitPart::TypeDefinition(x) => {
                s.names.insert(&x.name.name);
            }
            _ => {}
        }
    }
    s
}

fn add_contract_members<'a>(s: &mut Scope<'a>, c: &'a ContractDefinition) {
    for p in &c.parts {
        match p {
            ContractPart::StructDefinition(x) => s.add(&x.name),
            ContractPart::EventDefinition(x) => s.add(&x.name),
            ContractPart::EnumDefinition(x) => s.add(&x.name),
            ContractPart::ErrorDefinition(x) => s.add(&x.name),
            ContractPart::VariableDefinition(x) => s.add(&x.name),
            ContractPart::FunctionDefinition(x) => s.add(&x.name),
            ContractPart::TypeDefinition(x) => {
                s.names.insert(&x.name.name);
            }
            _ => {}
        }
    }
}

/// Whether every base of `c`, transitively, is defined in this file.
fn bases_known(tree: &SyntaxTree, c: &ContractDefinition) -> bool {
    let lin = linearize(tree, c);
    lin.iter().all(|c| {
        c.base
            .iter()
            .all(|b| b.name.identifiers.last().is_some_and(|i| tree.contract(&i.name).is_some()))
    })
}

fn function_locals<'a>(s: &mut Scope<'a>, f: &'a FunctionDefinition) {
    for (_, p) in f.params.iter().chain(&f.returns) {
        if let Some(p) = p {
            s.add(&p.name);
        }
    }
    let Some(body) = &f.body else { return };
    walk_stmts(body, &mut |st| match st {
        Statement::VariableDefinition(_, d, _) => s.add(&d.name),
        Statement::Expression(_, Expression::Assign(_, lhs, _)) => {
            if let Expression::List(_, ps) = lhs.as_ref() {
                for p in ps.iter().filter_map(|(_, p)| p.as_ref()) {
                    s.add(&p.name);
                }
            }
        }
        Statement::Try(_, _, ret, catches) => {
            if let Some((ps, _)) = ret {
                for p in ps.iter().filter_map(|(_, p)| p.as_ref()) {
                    s.add(&p.name);
                }
            }
            for c in catches {
                match c {
                    solang_parser::pt::CatchClause::Simple(_, p, _) => {
                        if let Some(p) = p {
                            s.add(&p.name);
                        }
                    }
                    solang_parser::pt::CatchClause::Named(_, _, p, _) => s.add(&p.name),
                }
            }
        }
        _ => {}
    });
}

fn undeclared(tree: &SyntaxTree, version: &Version) -> Vec<Diagnostic> {
    if tree.unit.0.iter().any(|p| matches!(p, SourceUnitPart::ImportDirective(_))) {
        return Vec::new();
    }
    let src = tree.source.as_str();
    let base_scope = file_scope(tree, version);
    let mut out = Vec::new();
    let mut report = |scope: &Scope<'_>, e: &Expression| {
        if let Expression::Variable(id) = e {
            if !scope.names.contains(id.name.as_str()) {
                out.push(Diagnostic::at(
                    src,
                    id.loc.start(),
                    format!("DeclarationError: Undeclared identifier `{}`.", id.name),
                ));
            }
        }
    };
    for (c, f) in all_functions(tree) {
        let mut scope = Scope {
            names: base_scope.names.clone(),
        };
        if let Some(c) = c {
            if !bases_known(tree, c) {
                continue;
            }
            for part in linearize(tree, c) {
                add_contract_members(&mut scope, part);
            }
        }
        function_locals(&mut scope, f);
        for (_, p) in f.params.iter().chain(&f.returns) {
            if let Some(p) = p {
                walk_expr(&p.ty, &mut |e| report(&scope, e));
            }
        }
        for a in &f.attributes {
            if let FunctionAttribute::BaseOrModifier(_, b) = a {
                if let Some(first) = b.name.identifiers.first() {
                    if !scope.names.contains(first.name.as_str()) {
                        report(&scope, &Expression::Variable(first.clone()));
                    }
                }
                for arg in b.args.iter().flatten() {
                    walk_expr(arg, &mut |e| report(&scope, e));
                }
            }
        }
        if let Some(body) = &f.body {
            walk_stmt_exprs(body, &mut |e| report(&scope, e));
        }
    }
    for c in tree.contracts() {
        if !bases_known(tree, c) {
            continue;
        }
        let mut scope = Scope {
            names: base_scope.names.clone(),
        };
        for part in linearize(tree, c) {
            add_contract_members(&mut scope, part);
        }
        for p in &c.parts {
            if let ContractPart::VariableDefinition(var) = p {
                walk_expr(&var.ty, &mut |e| report(&scope, e));
                if let Some(init) = &var.initializer {
                    walk_expr(init, &mut |e| report(&scope, e));
                }
            }
        }
    }
    out
}
