//! Translate, validate, feed the diagnostics back, retry under a budget.

use std::fmt::Write as _;

use thiserror::Error;

use crate::diagnostic::{has_errors, Diagnostic};
use crate::formalism::{Artifact, FormalismId};
use crate::translate::backend::{BackendError, CompletionBackend};
use crate::translate::prompt::{Feedback, DEFAULT_TEMPLATE};
use crate::translate::script::digest;
use crate::translate::{TranslateError, TranslationOutcome, TranslatorKind, TranslatorSpec, Translators};

pub const DEFAULT_MAX_ATTEMPTS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct RepairPolicy {
    pub max_attempts: usize,
    /// Placeholders as in [`crate::translate::prompt::DEFAULT_TEMPLATE`].
    pub prompt_template: String,
    /// When set, warnings also count as failure.
    pub stop_on_warning: bool,
}

impl Default for RepairPolicy {
    fn default() -> Self {
        Self {
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            prompt_template: DEFAULT_TEMPLATE.to_string(),
            stop_on_warning: false,
        }
    }
}

impl RepairPolicy {
    pub fn with_max_attempts(max_attempts: usize) -> Result<Self, RepairError> {
        let policy = Self {
            max_attempts,
            ..Self::default()
        };
        policy.check()?;
        Ok(policy)
    }

    pub fn check(&self) -> Result<(), RepairError> {
        if self.max_attempts == 0 {
            return Err(RepairError::InvalidPolicy("max_attempts must be at least 1".into()));
        }
        if !self.prompt_template.contains("{source-content}") {
            return Err(RepairError::InvalidPolicy("prompt template lacks {source-content}".into()));
        }
        Ok(())
    }

    fn accepts(&self, diagnostics: &[Diagnostic]) -> bool {
        if self.stop_on_warning {
            diagnostics.is_empty()
        } else {
            !has_errors(diagnostics)
        }
    }
}

/// One backend call. `error` is set when the call itself failed, in which
/// case the candidate is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct RepairAttempt {
    pub prompt: String,
    pub candidate: String,
    pub diagnostics: Vec<Diagnostic>,
    pub error: Option<BackendError>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RepairStatus {
    Valid,
    BudgetExhausted,
    BackendError(BackendError),
}

impl RepairStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RepairStatus::Valid => "valid",
            RepairStatus::BudgetExhausted => "budget-exhausted",
            RepairStatus::BackendError(_) => "backend-error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairTrace {
    pub attempts: Vec<RepairAttempt>,
    pub outcome: RepairStatus,
}

impl RepairTrace {
    pub fn len(&self) -> usize {
        self.attempts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attempts.is_empty()
    }

    /// One `key=value` line per attempt, then a summary line:
    ///
    /// ```text
    /// attempt=1 digest=<sha256 of candidate> codes=er.missing-key,syntax.json
    /// attempt=2 digest=<...> codes=-
    /// outcome=valid attempts=2
    /// ```
    ///
    /// A failed backend call is written with `digest=-` and `backend_error=true`.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        for (i, a) in self.attempts.iter().enumerate() {
            let codes: Vec<&str> = a.diagnostics.iter().map(|d| d.code).collect();
            let codes = if codes.is_empty() { "-".to_string() } else { codes.join(",") };
            if a.error.is_some() {
                writeln!(out, "attempt={} digest=- codes=- backend_error=true", i + 1).unwrap();
            } else {
                writeln!(out, "attempt={} digest={} codes={codes}", i + 1, digest(&a.candidate)).unwrap();
            }
        }
        writeln!(out, "outcome={} attempts={}", self.outcome.as_str(), self.attempts.len()).unwrap();
        out
    }
}

#[derive(Debug, Error)]
pub enum RepairError {
    #[error("invalid repair policy: {0}")]
    InvalidPolicy(String),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    /// The backend failed; `trace` holds every attempt including the failed call.
    #[error("{error} (after {} attempts)", trace.len())]
    Backend { error: BackendError, trace: RepairTrace },
}

/// Repairs a direct translation from `a` into `target`.
pub fn repair_translate(
    translators: &Translators,
    a: &Artifact,
    target: &FormalismId,
    backend: &dyn CompletionBackend,
    policy: &RepairPolicy,
    seed: u64,
) -> Result<(TranslationOutcome, RepairTrace), RepairError> {
    let spec = TranslatorSpec::new(a.formalism.clone(), target.clone(), TranslatorKind::LlmDirect);
    repair_with_spec(translators, a, &spec, backend, policy, seed)
}

/// As [`repair_translate`], reporting `spec` as the translator. Attempt `k`
/// (1-based) uses seed `seed + k - 1`.
pub fn repair_with_spec(
    translators: &Translators,
    a: &Artifact,
    spec: &TranslatorSpec,
    backend: &dyn CompletionBackend,
    policy: &RepairPolicy,
    seed: u64,
) -> Result<(TranslationOutcome, RepairTrace), RepairError> {
    policy.check()?;
    if a.formalism != spec.source {
        return Err(TranslateError::SourceMismatch {
            expected: spec.source.clone(),
            found: a.formalism.clone(),
        }
        .into());
    }
    translators.registry().get(&spec.source).map_err(TranslateError::from)?;
    let engine = translators.clone().with_template(policy.prompt_template.clone());
    let mut attempts: Vec<RepairAttempt> = Vec::new();
    let mut status = RepairStatus::BudgetExhausted;
    for k in 0..policy.max_attempts {
        let feedback = attempts.last().map(|prev| Feedback {
            candidate: &prev.candidate,
            diagnostics: &prev.diagnostics,
        });
        let prompt = engine.direct_prompt(a, &spec.target, feedback)?;
        match backend.complete(&prompt, &engine.params(), seed.wrapping_add(k as u64)) {
            Ok(candidate) => {
                let diagnostics = engine.validate(&spec.target, &candidate)?;
                let done = policy.accepts(&diagnostics);
                attempts.push(RepairAttempt {
                    prompt,
                    candidate,
                    diagnostics,
                    error: None,
                });
                if done {
                    status = RepairStatus::Valid;
                    break;
                }
            }
            Err(error) => {
                attempts.push(RepairAttempt {
                    prompt,
                    candidate: String::new(),
                    diagnostics: Vec::new(),
                    error: Some(error.clone()),
                });
                let trace = RepairTrace {
                    attempts,
                    outcome: RepairStatus::BackendError(error.clone()),
                };
                return Err(RepairError::Backend { error, trace });
            }
        }
    }
    let last = attempts.last().expect("at least one attempt");
    let outcome = TranslationOutcome {
        artifact: Artifact::translated(spec.target.clone(), &last.candidate, spec.label(), attempts.len()),
        diagnostics: last.diagnostics.clone(),
        attempts: attempts.len(),
        translator: spec.clone(),
    };
    Ok((
        outcome,
        RepairTrace {
            attempts,
            outcome: status,
        },
    ))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::diagnostic::codes;
    use crate::mini::{er, standard_registry, NL_ID};
    use crate::translate::backend::{MockBackend, Step};
    use crate::translate::prompt::DIAGNOSTICS_OPEN;

    const VALID: &str = "entity A {\n  key id: int;\n}\n";
    const MALFORMED: &str = "entity A {\n  x: int;\n}\nentity B {";

    fn setup() -> (Translators, Artifact, FormalismId) {
        let t = Translators::new(Arc::new(standard_registry()));
        let a = Artifact::authored(FormalismId::new(NL_ID).unwrap(), "an A identified by an integer");
        (t, a, FormalismId::new(er::ID).unwrap())
    }

    #[test]
    fn converges_on_second_attempt() {
        let (t, a, target) = setup();
        let mock = MockBackend::schedule("m", vec![Step::Reply(MALFORMED.into()), Step::Reply(VALID.into())]);
        let (out, trace) = repair_translate(&t, &a, &target, &mock, &RepairPolicy::default(), 7).unwrap();
        assert_eq!(trace.outcome, RepairStatus::Valid);
        assert_eq!(trace.len(), 2);
        assert_eq!(out.attempts, 2);
        assert_eq!(mock.calls(), 2);
        assert_eq!(out.artifact.content, VALID);
        let second = &trace.attempts[1].prompt;
        for d in &trace.attempts[0].diagnostics {
            assert!(second.contains(d.code), "{} missing from retry prompt", d.code);
        }
        assert!(second.contains(MALFORMED));
    }

    #[test]
    fn budget_exhaustion() {
        let (t, a, target) = setup();
        let mock = MockBackend::constant("m", MALFORMED);
        let (out, trace) = repair_translate(&t, &a, &target, &mock, &RepairPolicy::default(), 0).unwrap();
        assert_eq!(trace.outcome, RepairStatus::BudgetExhausted);
        assert_eq!(trace.len(), 3);
        assert_eq!(mock.calls(), 3);
        assert!(!trace.attempts[2].diagnostics.is_empty());
        assert!(!out.is_valid());
    }

    #[test]
    fn first_try_has_no_feedback() {
        let (t, a, target) = setup();
        let mock = MockBackend::constant("m", VALID);
        let (_, trace) = repair_translate(&t, &a, &target, &mock, &RepairPolicy::default(), 0).unwrap();
        assert_eq!(trace.len(), 1);
        assert!(!trace.attempts[0].prompt.contains(DIAGNOSTICS_OPEN));
    }

    #[test]
    fn backend_error_keeps_partial_trace() {
        let (t, a, target) = setup();
        let mock = MockBackend::schedule("m", vec![Step::Reply(MALFORMED.into()), Step::Timeout]);
        let err = repair_translate(&t, &a, &target, &mock, &RepairPolicy::default(), 0).unwrap_err();
        let RepairError::Backend { trace, .. } = err else {
            panic!("expected backend error")
        };
        assert_eq!(trace.len(), 2);
        assert_eq!(mock.calls(), 2);
        assert!(trace.to_records().contains("outcome=backend-error attempts=2"));
    }

    #[test]
    fn warnings_block_only_when_asked() {
        let t = Translators::new(Arc::new(standard_registry()));
        let a = Artifact::authored(FormalismId::new(NL_ID).unwrap(), "rules");
        let target = FormalismId::new("fol-pk").unwrap();
        let unsafe_rule = "rule r1: if p($x) then q($y)\n";
        let mock = MockBackend::constant("m", unsafe_rule);
        let (out, trace) = repair_translate(&t, &a, &target, &mock, &RepairPolicy::default(), 0).unwrap();
        assert_eq!(trace.outcome, RepairStatus::Valid);
        assert_eq!(out.diagnostics[0].code, codes::FOL_UNSAFE_VARIABLE);
        let strict = RepairPolicy {
            stop_on_warning: true,
            ..RepairPolicy::default()
        };
        let (_, trace) = repair_translate(&t, &a, &target, &mock, &strict, 0).unwrap();
        assert_eq!(trace.outcome, RepairStatus::BudgetExhausted);
    }

    #[test]
    fn records_format() {
        let (t, a, target) = setup();
        let mock = MockBackend::schedule("m", vec![Step::Reply(MALFORMED.into()), Step::Reply(VALID.into())]);
        let (_, trace) = repair_translate(&t, &a, &target, &mock, &RepairPolicy::default(), 0).unwrap();
        let records = trace.to_records();
        let lines: Vec<&str> = records.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("attempt=1 digest="));
        assert!(lines[1].ends_with("codes=-"));
        assert_eq!(lines[2], "outcome=valid attempts=2");
    }

    #[test]
    fn zero_budget_rejected() {
        assert!(RepairPolicy::with_max_attempts(0).is_err());
    }
}
