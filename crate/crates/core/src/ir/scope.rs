//! File-level name tables: declared types, state variables, inheritance.

use std::collections::{HashMap, HashSet};

use serde::Serialize;
use solang_parser::pt::{
    self, ContractDefinition, ContractPart, Expression, FunctionDefinition, FunctionTy,
    SourceUnitPart, UsingList,
};

use crate::frontend::{ident, is_library, type_name, SyntaxTree};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct StateVariable {
    pub name: String,
    pub contract_name: String,
    pub declared_type: String,
}

/// Coarse static types, as much as call classification needs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Ty {
    Address,
    Contract(String),
    Mapping(Box<Ty>),
    Array(Box<Ty>),
    Struct(String),
    Elementary,
    Unknown,
}

/// `contract` followed by its bases, most derived first. Only bases
/// defined in the same source are included.
pub fn linearize<'a>(tree: &'a SyntaxTree, contract: &'a ContractDefinition) -> Vec<&'a ContractDefinition> {
    fn visit<'a>(
        tree: &'a SyntaxTree,
        c: &'a ContractDefinition,
        seen: &mut HashSet<String>,
        out: &mut Vec<&'a ContractDefinition>,
    ) {
        if !seen.insert(ident(&c.name).to_string()) {
            return;
        }
        for base in &c.base {
            let name = base.name.identifiers.last().map(|i| i.name.as_str()).unwrap_or("");
            if let Some(b) = tree.contract(name) {
                visit(tree, b, seen, out);
            }
        }
        out.push(c);
    }
    let mut out = Vec::new();
    visit(tree, contract, &mut HashSet::new(), &mut out);
    out.reverse();
    out
}

/// State variables visible in `contract`, inherited ones first.
pub fn state_variables(tree: &SyntaxTree, contract: &ContractDefinition) -> Vec<StateVariable> {
    let mut out: Vec<StateVariable> = Vec::new();
    for c in linearize(tree, contract).into_iter().rev() {
        for part in &c.parts {
            if let ContractPart::VariableDefinition(v) = part {
                let name = ident(&v.name);
                if name.is_empty() || out.iter().any(|s| s.name == name) {
                    continue;
                }
                out.push(StateVariable {
                    name: name.to_string(),
                    contract_name: ident(&c.name).to_string(),
                    declared_type: type_name(&v.ty),
                });
            }
        }
    }
    out
}

/// Names declared at file or contract level, indexed for lookups during
/// lowering and call-graph resolution.
pub struct TypeTable<'a> {
    pub tree: &'a SyntaxTree,
    contracts: HashMap<&'a str, &'a ContractDefinition>,
    structs: HashMap<&'a str, &'a pt::StructDefinition>,
    enums: HashSet<&'a str>,
    events: HashSet<&'a str>,
    errors: HashSet<&'a str>,
    user_types: HashSet<&'a str>,
    free_functions: Vec<&'a FunctionDefinition>,
    /// Libraries named in any `using ... for` directive.
    using_libraries: Vec<&'a str>,
}

impl<'a> TypeTable<'a> {
    pub fn new(tree: &'a SyntaxTree) -> Self {
        let mut t = TypeTable {
            tree,
            contracts: HashMap::new(),
            structs: HashMap::new(),
            enums: HashSet::new(),
            events: HashSet::new(),
            errors: HashSet::new(),
            user_types: HashSet::new(),
            free_functions: Vec::new(),
            using_libraries: Vec::new(),
        };
        for part in &tree.unit.0 {
            match part {
                SourceUnitPart::ContractDefinition(c) => {
                    t.contracts.insert(ident(&c.name), c);
                    for p in &c.parts {
                        t.add_part(p);
                    }
                }
                SourceUnitPart::StructDefinition(s) => {
                    t.structs.insert(ident(&s.name), s);
                }
                SourceUnitPart::EnumDefinition(e) => {
                    t.enums.insert(ident(&e.name));
                }
                SourceUnitPart::EventDefinition(e) => {
                    t.events.insert(ident(&e.name));
                }
                SourceUnitPart::ErrorDefinition(e) => {
                    t.errors.insert(ident(&e.name));
                }
                SourceUnitPart::TypeDefinition(d) => {
                    t.user_types.insert(d.name.name.as_str());
                }
                SourceUnitPart::FunctionDefinition(f) => t.free_functions.push(f),
                SourceUnitPart::Using(u) => t.add_using(u),
                _ => {}
            }
        }
        t
    }

    fn add_part(&mut self, p: &'a ContractPart) {
        match p {
            ContractPart::StructDefinition(s) => {
                self.structs.insert(ident(&s.name), s);
            }
            ContractPart::EnumDefinition(e) => {
                self.enums.insert(ident(&e.name));
            }
            ContractPart::EventDefinition(e) => {
                self.events.insert(ident(&e.name));
            }
            ContractPart::ErrorDefinition(e) => {
                self.errors.insert(ident(&e.name));
            }
            ContractPart::TypeDefinition(d) => {
                self.user_types.insert(d.name.name.as_str());
            }
            ContractPart::Using(u) => self.add_using(u),
            _ => {}
        }
    }

    fn add_using(&mut self, u: &'a pt::Using) {
        match &u.list {
            UsingList::Library(path) => {
                if let Some(last) = path.identifiers.last() {
                    self.using_libraries.push(&last.name);
                }
            }
            UsingList::Functions(fs) => {
                for f in fs {
                    if f.path.identifiers.len() > 1 {
                        self.using_libraries.push(&f.path.identifiers[0].name);
                    }
                }
            }
            UsingList::Error => {}
        }
    }

    pub fn contract(&self, name: &str) -> Option<&'a ContractDefinition> {
        self.contracts.get(name).copied()
    }

    pub fn is_contract_name(&self, name: &str) -> bool {
        self.contracts.contains_key(name)
    }

    pub fn is_library_name(&self, name: &str) -> bool {
        self.contracts.get(name).is_some_and(|c| is_library(c))
    }

    pub fn is_struct(&self, name: &str) -> bool {
        self.structs.contains_key(name)
    }

    pub fn is_event(&self, name: &str) -> bool {
        self.events.contains(name)
    }

    pub fn is_error(&self, name: &str) -> bool {
        self.errors.contains(name)
    }

    pub fn is_type_name(&self, name: &str) -> bool {
        self.contracts.contains_key(name)
            || self.structs.contains_key(name)
            || self.enums.contains(name)
            || self.user_types.contains(name)
    }

    pub fn free_functions(&self) -> &[&'a FunctionDefinition] {
        &self.free_functions
    }

    /// Functions (not modifiers) named `name` with `arity` parameters
    /// declared directly in `contract`.
    pub fn declared_functions(
        &self,
        contract: &'a ContractDefinition,
        name: &str,
        arity: usize,
    ) -> Vec<&'a FunctionDefinition> {
        contract
            .parts
            .iter()
            .filter_map(|p| match p {
                ContractPart::FunctionDefinition(f)
                    if f.ty != FunctionTy::Modifier
                        && ident(&f.name) == name
                        && f.params.len() == arity =>
                {
                    Some(f.as_ref())
                }
                _ => None,
            })
            .collect()
    }

    /// Whether `contract` or one of its same-file bases declares a function
    /// `name` taking `arity` arguments.
    pub fn contract_defines(&self, contract: &str, name: &str, arity: usize) -> bool {
        let Some(c) = self.contract(contract) else {
            return false;
        };
        linearize(self.tree, c)
            .into_iter()
            .any(|c| !self.declared_functions(c, name, arity).is_empty())
    }

    /// A library reachable through `using ... for` that provides a function
    /// `name` whose first parameter would bind the receiver.
    pub fn bound_library(&self, name: &str, arity_with_receiver: usize) -> Option<&'a str> {
        self.using_libraries.iter().copied().find(|lib| {
            self.contract(lib)
                .is_some_and(|c| !self.declared_functions(c, name, arity_with_receiver).is_empty())
        })
    }

    /// Type of a type expression.
    pub fn resolve(&self, ty: &Expression) -> Ty {
        match ty {
            Expression::Type(_, t) => match t {
                pt::Type::Address | pt::Type::AddressPayable | pt::Type::Payable => Ty::Address,
                pt::Type::Mapping { value, .. } => Ty::Mapping(Box::new(self.resolve(value))),
                _ => Ty::Elementary,
            },
            Expression::Variable(id) => self.named(&id.name),
            Expression::MemberAccess(_, _, id) => self.named(&id.name),
            Expression::ArraySubscript(_, base, _) => Ty::Array(Box::new(self.resolve(base))),
            Expression::Parenthesis(_, inner) => self.resolve(inner),
            _ => Ty::Unknown,
        }
    }

    fn named(&self, name: &str) -> Ty {
        if self.contracts.contains_key(name) {
            Ty::Contract(name.to_string())
        } else if self.structs.contains_key(name) {
            Ty::Struct(name.to_string())
        } else if self.enums.contains(name) || self.user_types.contains(name) {
            Ty::Elementary
        } else if name == "var" {
            Ty::Unknown
        } else {
            // a type declared in a file we cannot see; contracts and
            // interfaces are by far the most common case
            Ty::Contract(name.to_string())
        }
    }

    pub fn struct_field(&self, name: &str, field: &str) -> Ty {
        self.structs
            .get(name)
            .and_then(|s| s.fields.iter().find(|f| ident(&f.name) == field))
            .map(|f| self.resolve(&f.ty))
            .unwrap_or(Ty::Unknown)
    }
}
