//! Structured validator findings.
//!
//! Diagnostics are data: codecs return them instead of failing, and the
//! repair loop serializes them back into prompts. Codes are stable strings;
//! the full list lives in [`codes`].

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// 1-based line and column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl Location {
    pub fn new(line: usize, column: usize) -> Self {
        Self { line, column }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: &'static str,
    pub message: String,
    pub location: Option<Location>,
    pub hint: Option<String>,
}

impl Diagnostic {
    pub fn error(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            code,
            message: message.into(),
            location: None,
            hint: None,
        }
    }

    pub fn warning(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            ..Self::error(code, message)
        }
    }

    pub fn at(mut self, location: Location) -> Self {
        self.location = Some(location);
        self
    }

    pub fn at_line(self, line: usize, column: usize) -> Self {
        self.at(Location::new(line, column))
    }

    pub fn with_hint(mut self, hint: impl Into<String>) -> Self {
        self.hint = Some(hint.into());
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    /// The `code @ line: message` form used in repair prompts and logs.
    pub fn feedback_line(&self) -> String {
        match self.location {
            Some(loc) => format!("{} @ {}: {}", self.code, loc.line, self.message),
            None => format!("{} @ -: {}", self.code, self.message),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.severity, self.code)?;
        if let Some(loc) = self.location {
            write!(f, " {}:{}", loc.line, loc.column)?;
        }
        write!(f, ": {}", self.message)?;
        if let Some(hint) = &self.hint {
            write!(f, " (hint: {hint})")?;
        }
        Ok(())
    }
}

pub fn has_errors(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(Diagnostic::is_error)
}

/// Every diagnostic code emitted by this crate.
pub mod codes {
    pub const SYNTAX_UNEXPECTED_TOKEN: &str = "syntax.unexpected-token";
    pub const SYNTAX_MISSING_IDENT: &str = "syntax.missing-ident";
    pub const SYNTAX_UNBALANCED_PAREN: &str = "syntax.unbalanced-paren";
    pub const SYNTAX_UNTERMINATED: &str = "syntax.unterminated";
    pub const SYNTAX_JSON: &str = "syntax.json";

    pub const UML_DUPLICATE_CLASS: &str = "uml.duplicate-class";
    pub const UML_DUPLICATE_ATTRIBUTE: &str = "uml.duplicate-attribute";
    pub const UML_UNKNOWN_CLASS: &str = "uml.unknown-class";
    pub const UML_BAD_CARDINALITY: &str = "uml.bad-cardinality";

    pub const ER_MISSING_KEY: &str = "er.missing-key";
    pub const ER_MULTIPLE_KEYS: &str = "er.multiple-keys";
    pub const ER_DUPLICATE_ENTITY: &str = "er.duplicate-entity";
    pub const ER_DUPLICATE_ATTRIBUTE: &str = "er.duplicate-attribute";
    pub const ER_UNKNOWN_ENTITY: &str = "er.unknown-entity";

    pub const FOL_NON_HORN: &str = "fol.non-horn";
    pub const FOL_FACT_UNSUPPORTED: &str = "fol.fact-unsupported";
    pub const FOL_DUPLICATE_RULE: &str = "fol.duplicate-rule";
    pub const FOL_UNSAFE_VARIABLE: &str = "fol.unsafe-variable";

    pub const TAB_NESTED_UNSUPPORTED: &str = "tab.nested-unsupported";
    pub const TAB_HETEROGENEOUS_RECORD: &str = "tab.heterogeneous-record";
    pub const TAB_NOT_ARRAY: &str = "tab.not-array";
    pub const TAB_NOT_OBJECT: &str = "tab.not-object";
    pub const TAB_DUPLICATE_COLUMN: &str = "tab.duplicate-column";
    pub const TAB_RAGGED_ROW: &str = "tab.ragged-row";

    pub const MERGE_CONFLICT: &str = "merge.conflict";

    pub const TRANSLATE_UNREPRESENTABLE: &str = "translate.unrepresentable";
    pub const TRANSLATE_SOURCE_INVALID: &str = "translate.source-invalid";

    pub const SCRIPT_INVALID: &str = "script.invalid";
    pub const SCRIPT_UNCERTIFIED: &str = "script.uncertified";

    pub const ALL: &[&str] = &[
        SYNTAX_UNEXPECTED_TOKEN,
        SYNTAX_MISSING_IDENT,
        SYNTAX_UNBALANCED_PAREN,
        SYNTAX_UNTERMINATED,
        SYNTAX_JSON,
        UML_DUPLICATE_CLASS,
        UML_DUPLICATE_ATTRIBUTE,
        UML_UNKNOWN_CLASS,
        UML_BAD_CARDINALITY,
        ER_MISSING_KEY,
        ER_MULTIPLE_KEYS,
        ER_DUPLICATE_ENTITY,
        ER_DUPLICATE_ATTRIBUTE,
        ER_UNKNOWN_ENTITY,
        FOL_NON_HORN,
        FOL_FACT_UNSUPPORTED,
        FOL_DUPLICATE_RULE,
        FOL_UNSAFE_VARIABLE,
        TAB_NESTED_UNSUPPORTED,
        TAB_HETEROGENEOUS_RECORD,
        TAB_NOT_ARRAY,
        TAB_NOT_OBJECT,
        TAB_DUPLICATE_COLUMN,
        TAB_RAGGED_ROW,
        MERGE_CONFLICT,
        TRANSLATE_UNREPRESENTABLE,
        TRANSLATE_SOURCE_INVALID,
        SCRIPT_INVALID,
        SCRIPT_UNCERTIFIED,
    ];
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feedback_line_format() {
        let d = Diagnostic::error(codes::ER_MISSING_KEY, "entity A has no key").at_line(3, 1);
        assert_eq!(d.feedback_line(), "er.missing-key @ 3: entity A has no key");
        let d = Diagnostic::warning(codes::FOL_UNSAFE_VARIABLE, "x");
        assert_eq!(d.feedback_line(), "fol.unsafe-variable @ -: x");
    }

    #[test]
    fn codes_are_unique() {
        let mut all = codes::ALL.to_vec();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), codes::ALL.len());
    }
}
