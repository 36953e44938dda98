use std::collections::BTreeMap;

use serde::Serialize;

use super::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TemplateId {
    SensitiveLocation,
    SnippetCompletion,
    ReflectionFix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub text: String,
    /// Placeholder names, written as `[NAME]` in `text`.
    pub placeholders: Vec<String>,
}

pub const CODE: &str = "CODE";
pub const CONTRACT: &str = "CONTRACT";
pub const ERROR_MESSAGE: &str = "ERROR MESSAGE";
pub const NAME: &str = "NAME";

const SENSITIVE_LOCATION: &str = "\
You are auditing a Solidity smart contract for access control problems.
Find every sensitive function in the contract below. A function is sensitive \
when its body, directly or through the functions it calls, does at least one \
of the following:
- Selfdestruct: destroys the contract (selfdestruct or suicide), sending any remaining ether to some address.
- Transfer: moves ether or tokens held by the contract to some address.
- External contract call: calls a function on a different contract.
- State variable modification: changes a variable stored in contract storage.

Answer with a JSON array of the signatures of the sensitive functions and \
nothing else. Write each signature as name(type1,type2) with parameter types \
only, for example [\"withdraw(uint256)\", \"setOwner(address)\"]. Answer [] \
when no function is sensitive.

Contract:
[CODE]
";

const SNIPPET_COMPLETION: &str = "\
The Solidity function below was cut out of a larger project and cannot be \
compiled by itself. Write a minimal, self-contained Solidity source file that \
contains this function and compiles with solc.

Rules:
- Copy the function exactly as given. Do not rename it, do not change, \
reorder or remove any of its statements, and do not add statements to it.
- Do not add new logic. Only declare what the function needs to compile: \
the enclosing contract, state variables, structs, enums, events, errors, \
modifiers, and interfaces for external contracts it calls.
- Do not use import statements.
- Start the file with a pragma solidity line that suits the syntax of the function.
- Reply with the complete source in one ```solidity code block.

Function:
[CODE]
";

const REFLECTION_FIX: &str = "\
The Solidity source below does not compile.

Source:
[CONTRACT]

Compiler output:
[ERROR MESSAGE]

Fix the compilation errors. The function [NAME] must remain exactly as it is; \
change only the code around it and do not add new logic. Reply with the \
complete corrected source in one ```solidity code block.
";

impl PromptTemplate {
    pub fn new(id: TemplateId, text: impl Into<String>, placeholders: &[&str]) -> Self {
        Self {
            id,
            text: text.into(),
            placeholders: placeholders.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn sensitive_location() -> Self {
        Self::new(TemplateId::SensitiveLocation, SENSITIVE_LOCATION, &[CODE])
    }

    pub fn snippet_completion() -> Self {
        Self::new(TemplateId::SnippetCompletion, SNIPPET_COMPLETION, &[CODE])
    }

    pub fn reflection_fix() -> Self {
        Self::new(
            TemplateId::ReflectionFix,
            REFLECTION_FIX,
            &[CONTRACT, ERROR_MESSAGE, NAME],
        )
    }

    pub fn builtin(id: TemplateId) -> Self {
        match id {
            TemplateId::SensitiveLocation => Self::sensitive_location(),
            TemplateId::SnippetCompletion => Self::snippet_completion(),
            TemplateId::ReflectionFix => Self::reflection_fix(),
        }
    }
}

/// Substitutes `[NAME]` placeholders in a single left-to-right pass, so
/// bound text that happens to contain a placeholder is never expanded again.
pub fn render_prompt(
    template: &PromptTemplate,
    bindings: &BTreeMap<String, String>,
) -> Result<String, GatewayError> {
    for p in &template.placeholders {
        if !bindings.contains_key(p) {
            return Err(GatewayError::MissingBinding(p.clone()));
        }
    }
    let text = &template.text;
    let mut out = String::with_capacity(text.len() + bindings.values().map(String::len).sum::<usize>());
    let mut rest = text.as_str();
    'outer: while let Some(pos) = rest.find('[') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos + 1..];
        for p in &template.placeholders {
            if let Some(after) = tail.strip_prefix(p.as_str()).and_then(|t| t.strip_prefix(']')) {
                out.push_str(&bindings[p]);
                rest = after;
                continue 'outer;
            }
        }
        out.push('[');
        rest = tail;
    }
    out.push_str(rest);
    Ok(out)
}

pub fn bindings<const N: usize>(pairs: [(&str, &str); N]) -> BTreeMap<String, String> {
    pairs
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
