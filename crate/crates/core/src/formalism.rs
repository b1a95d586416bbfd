//! Formalisms, artifacts and the registry every other module consults.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::diagnostic::{has_errors, Diagnostic};
use crate::element::{Element, ElementSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormalismError {
    #[error("invalid formalism id {0:?}: expected [a-z][a-z0-9-]*")]
    InvalidId(String),
    #[error("formalism {0} is already registered")]
    DuplicateFormalism(FormalismId),
    #[error("formalism {0} is not registered")]
    UnknownFormalism(FormalismId),
    #[error("{element} cannot be represented in {target}: {reason}")]
    UnrepresentableElement {
        element: Box<Element>,
        target: FormalismId,
        reason: String,
    },
}

/// Short lowercase identifier of a formalism, e.g. `uml-mini`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FormalismId(String);

impl FormalismId {
    pub fn new(token: impl Into<String>) -> Result<Self, FormalismError> {
        let token = token.into();
        let mut chars = token.chars();
        let valid = matches!(chars.next(), Some('a'..='z'))
            && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-');
        if valid {
            Ok(Self(token))
        } else {
            Err(FormalismError::InvalidId(token))
        }
    }

    /// For identifiers known to be valid at compile time.
    pub(crate) fn known(token: &'static str) -> Self {
        Self::new(token).expect("static formalism id is valid")
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FormalismId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for FormalismId {
    type Err = FormalismError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

/// A render failure reported by a codec, before it is tied to a target id.
#[derive(Debug, Clone, PartialEq)]
pub struct Unrepresentable {
    pub element: Element,
    pub reason: String,
}

impl Unrepresentable {
    pub fn new(element: &Element, reason: impl Into<String>) -> Self {
        Self {
            element: element.clone(),
            reason: reason.into(),
        }
    }
}

/// A parse/validate/render triple for one surface syntax.
///
/// Implementations are pure: the same input always yields the same output.
pub trait Codec: Send + Sync {
    fn parse(&self, content: &str) -> Result<ElementSet, Vec<Diagnostic>>;

    /// Parse diagnostics, or structural findings when parsing succeeds.
    fn validate(&self, content: &str) -> Vec<Diagnostic> {
        match self.parse(content) {
            Ok(_) => Vec::new(),
            Err(diagnostics) => diagnostics,
        }
    }

    /// Canonical text: one declaration per line, single spaces.
    fn render(&self, set: &ElementSet) -> Result<String, Unrepresentable>;

    /// Grammar sketch shown to completion backends.
    fn grammar(&self) -> &'static str;
}

#[derive(Clone)]
pub struct Formalism {
    pub id: FormalismId,
    pub display_name: String,
    pub description: String,
    pub codec: Arc<dyn Codec>,
}

impl fmt::Debug for Formalism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Formalism")
            .field("id", &self.id)
            .field("display_name", &self.display_name)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Authored,
    Translated { plan: String, attempts: usize },
}

/// Raw content expressed in exactly one formalism.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub formalism: FormalismId,
    pub content: String,
    pub provenance: Provenance,
}

impl Artifact {
    pub fn authored(formalism: FormalismId, content: impl Into<String>) -> Self {
        Self {
            formalism,
            content: content.into(),
            provenance: Provenance::Authored,
        }
    }

    pub fn translated(
        formalism: FormalismId,
        content: impl Into<String>,
        plan: impl Into<String>,
        attempts: usize,
    ) -> Self {
        Self {
            formalism,
            content: content.into(),
            provenance: Provenance::Translated {
                plan: plan.into(),
                attempts,
            },
        }
    }
}

/// Write-once registry of formalisms. Entries are never overwritten.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    formalisms: BTreeMap<FormalismId, Formalism>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, formalism: Formalism) -> Result<FormalismId, FormalismError> {
        if self.formalisms.contains_key(&formalism.id) {
            return Err(FormalismError::DuplicateFormalism(formalism.id));
        }
        let id = formalism.id.clone();
        self.formalisms.insert(id.clone(), formalism);
        Ok(id)
    }

    pub fn get(&self, id: &FormalismId) -> Result<&Formalism, FormalismError> {
        self.formalisms
            .get(id)
            .ok_or_else(|| FormalismError::UnknownFormalism(id.clone()))
    }

    /// Looks up a formalism by its textual token.
    pub fn resolve(&self, token: &str) -> Result<&Formalism, FormalismError> {
        self.get(&FormalismId::new(token)?)
    }

    pub fn contains(&self, id: &FormalismId) -> bool {
        self.formalisms.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.formalisms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.formalisms.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &FormalismId> {
        self.formalisms.keys()
    }

    pub fn parse(&self, artifact: &Artifact) -> Result<Result<ElementSet, Vec<Diagnostic>>, FormalismError> {
        Ok(self.get(&artifact.formalism)?.codec.parse(&artifact.content))
    }

    pub fn validate(&self, artifact: &Artifact) -> Result<Vec<Diagnostic>, FormalismError> {
        Ok(self.get(&artifact.formalism)?.codec.validate(&artifact.content))
    }

    /// `true` when validation reports no errors (warnings allowed).
    pub fn is_valid(&self, artifact: &Artifact) -> Result<bool, FormalismError> {
        Ok(!has_errors(&self.validate(artifact)?))
    }

    pub fn render(&self, set: &ElementSet, target: &FormalismId) -> Result<String, FormalismError> {
        self.get(target)?
            .codec
            .render(set)
            .map_err(|u| FormalismError::UnrepresentableElement {
                element: Box::new(u.element),
                target: target.clone(),
                reason: u.reason,
            })
    }
}
