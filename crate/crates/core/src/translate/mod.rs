//! Translators between formalisms behind one contract.
//!
//! Three kinds exist. Rule-based translators are deterministic programs for
//! registered pairs. Direct translators send one prompt to a completion
//! backend and return whatever comes back. Scripted translators ask the
//! backend once for a conversion script in the mapping language, certify and
//! cache it, then run it deterministically for every later conversion.

pub mod backend;
pub mod cache;
pub mod oracle;
pub mod prompt;
pub mod rules;
pub mod script;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::diagnostic::{codes, has_errors, Diagnostic};
use crate::formalism::{Artifact, FormalismError, FormalismId, Registry};
use crate::mini::probe_fixture;

use backend::{BackendError, CompletionBackend, CompletionParams};
use cache::{CacheError, CacheKey, ScriptCache};
use prompt::{render_prompt, Feedback, PromptInputs, DEFAULT_TEMPLATE, SCRIPT_TEMPLATE};
use rules::{rule_translate, RulePair};
use script::{ConversionScript, ScriptRuntimeError};

pub const DEFAULT_SYNTHESIS_BUDGET: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TranslatorKind {
    RuleBased,
    LlmDirect,
    LlmScripted,
}

impl TranslatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TranslatorKind::RuleBased => "rule-based",
            TranslatorKind::LlmDirect => "llm-direct",
            TranslatorKind::LlmScripted => "llm-scripted",
        }
    }

    /// Scripted translators are deterministic once their script exists.
    pub fn deterministic(self) -> bool {
        !matches!(self, TranslatorKind::LlmDirect)
    }
}

impl fmt::Display for TranslatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TranslatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rule-based" => Ok(TranslatorKind::RuleBased),
            "llm-direct" => Ok(TranslatorKind::LlmDirect),
            "llm-scripted" => Ok(TranslatorKind::LlmScripted),
            other => Err(format!(
                "unknown translator kind {other:?}, expected rule-based, llm-direct or llm-scripted"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TranslationMode {
    #[default]
    Strict,
    Annotated,
}

impl FromStr for TranslationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(TranslationMode::Strict),
            "annotated" => Ok(TranslationMode::Annotated),
            other => Err(format!("unknown mode {other:?}, expected strict or annotated")),
        }
    }
}

impl fmt::Display for TranslationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TranslationMode::Strict => "strict",
            TranslationMode::Annotated => "annotated",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslatorSpec {
    pub source: FormalismId,
    pub target: FormalismId,
    pub kind: TranslatorKind,
    pub mode: TranslationMode,
    /// In `(0, 1]`.
    pub fidelity_est: f64,
    /// Non-negative, abstract units.
    pub latency_est: f64,
    pub deterministic: bool,
}

impl TranslatorSpec {
    /// Fidelity 1, latency 1, strict mode; determinism follows the kind.
    pub fn new(source: FormalismId, target: FormalismId, kind: TranslatorKind) -> Self {
        Self {
            source,
            target,
            kind,
            mode: TranslationMode::Strict,
            fidelity_est: 1.0,
            latency_est: 1.0,
            deterministic: kind.deterministic(),
        }
    }

    pub fn with_estimates(mut self, fidelity: f64, latency: f64) -> Result<Self, TranslateError> {
        self.fidelity_est = fidelity;
        self.latency_est = latency;
        self.check()?;
        Ok(self)
    }

    pub fn with_mode(mut self, mode: TranslationMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn check(&self) -> Result<(), TranslateError> {
        let invalid = |m: String| Err(TranslateError::InvalidSpec(m));
        if !(self.fidelity_est > 0.0 && self.fidelity_est <= 1.0) {
            return invalid(format!("fidelity {} is outside (0, 1]", self.fidelity_est));
        }
        if !(self.latency_est >= 0.0 && self.latency_est.is_finite()) {
            return invalid(format!("latency {} is not a non-negative number", self.latency_est));
        }
        if self.deterministic != self.kind.deterministic() {
            return invalid(format!("{} translators cannot have deterministic = {}", self.kind, self.deterministic));
        }
        Ok(())
    }

    /// `source->target`, used as artifact provenance.
    pub fn label(&self) -> String {
        format!("{}->{}", self.source, self.target)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationOutcome {
    pub artifact: Artifact,
    pub diagnostics: Vec<Diagnostic>,
    pub attempts: usize,
    pub translator: TranslatorSpec,
}

impl TranslationOutcome {
    /// No error diagnostics; warnings are allowed.
    pub fn is_valid(&self) -> bool {
        !has_errors(&self.diagnostics)
    }
}

#[derive(Debug, Error)]
pub enum TranslateError {
    #[error(transparent)]
    Formalism(#[from] FormalismError),
    #[error("no rule-based translator from {from} to {to}")]
    UnsupportedPair { from: FormalismId, to: FormalismId },
    #[error("translator is {found}, this operation needs {expected}")]
    WrongKind {
        expected: TranslatorKind,
        found: TranslatorKind,
    },
    #[error("artifact is in {found}, translator reads {expected}")]
    SourceMismatch { expected: FormalismId, found: FormalismId },
    #[error("invalid translator: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("no usable {from}->{to} script after {attempts} attempts: {last_error}")]
    ScriptSynthesisFailed {
        from: FormalismId,
        to: FormalismId,
        attempts: usize,
        last_error: String,
    },
    #[error(transparent)]
    ScriptRuntime(#[from] ScriptRuntimeError),
    #[error(transparent)]
    Cache(#[from] CacheError),
}

/// Shared translation engine: registry, script cache and prompt settings.
/// Cheap to clone and safe to use from several threads.
#[derive(Clone)]
pub struct Translators {
    registry: Arc<Registry>,
    cache: Arc<ScriptCache>,
    params: CompletionParams,
    template: String,
    synthesis_budget: usize,
}

impl Translators {
    pub fn new(registry: Arc<Registry>) -> Self {
        Self {
            registry,
            cache: Arc::new(ScriptCache::in_memory()),
            params: CompletionParams::default(),
            template: DEFAULT_TEMPLATE.to_string(),
            synthesis_budget: DEFAULT_SYNTHESIS_BUDGET,
        }
    }

    pub fn with_cache(mut self, cache: Arc<ScriptCache>) -> Self {
        self.cache = cache;
        self
    }

    pub fn with_params(mut self, params: CompletionParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_template(mut self, template: impl Into<String>) -> Self {
        self.template = template.into();
        self
    }

    pub fn with_synthesis_budget(mut self, budget: usize) -> Self {
        assert!(budget >= 1, "synthesis budget must be positive");
        self.synthesis_budget = budget;
        self
    }

    pub fn registry(&self) -> &Arc<Registry> {
        &self.registry
    }

    pub fn cache(&self) -> &Arc<ScriptCache> {
        &self.cache
    }

    pub fn params(&self) -> CompletionParams {
        self.params
    }

    fn check_input(&self, a: &Artifact, spec: &TranslatorSpec, kind: TranslatorKind) -> Result<(), TranslateError> {
        if spec.kind != kind {
            return Err(TranslateError::WrongKind {
                expected: kind,
                found: spec.kind,
            });
        }
        if a.formalism != spec.source {
            return Err(TranslateError::SourceMismatch {
                expected: spec.source.clone(),
                found: a.formalism.clone(),
            });
        }
        self.registry.get(&spec.source)?;
        self.registry.get(&spec.target)?;
        Ok(())
    }

    fn outcome(&self, spec: &TranslatorSpec, content: String, diagnostics: Vec<Diagnostic>) -> TranslationOutcome {
        TranslationOutcome {
            artifact: Artifact::translated(spec.target.clone(), content, spec.label(), 1),
            diagnostics,
            attempts: 1,
            translator: spec.clone(),
        }
    }

    /// Validates `content` in `target`; formalism lookups are checked by callers.
    pub fn validate(&self, target: &FormalismId, content: &str) -> Result<Vec<Diagnostic>, TranslateError> {
        Ok(self.registry.get(target)?.codec.validate(content))
    }

    pub fn translate_rule_based(&self, a: &Artifact, spec: &TranslatorSpec) -> Result<TranslationOutcome, TranslateError> {
        self.check_input(a, spec, TranslatorKind::RuleBased)?;
        let pair = RulePair::of(&spec.source, &spec.target).ok_or_else(|| TranslateError::UnsupportedPair {
            from: spec.source.clone(),
            to: spec.target.clone(),
        })?;
        let out = rule_translate(&self.registry, pair, &spec.source, &spec.target, spec.mode, &a.content)?;
        Ok(self.outcome(spec, out.content, out.diagnostics))
    }

    /// Builds the prompt for one model-backed attempt.
    pub fn direct_prompt(
        &self,
        a: &Artifact,
        target: &FormalismId,
        feedback: Option<Feedback<'_>>,
    ) -> Result<String, TranslateError> {
        let grammar = self.registry.get(target)?.codec.grammar();
        Ok(render_prompt(
            &self.template,
            &PromptInputs {
                source_formalism: a.formalism.as_str(),
                target_formalism: target.as_str(),
                target_grammar: grammar,
                source_content: &a.content,
                feedback,
            },
        ))
    }

    pub fn translate_llm_direct(
        &self,
        a: &Artifact,
        spec: &TranslatorSpec,
        backend: &dyn CompletionBackend,
        seed: u64,
    ) -> Result<TranslationOutcome, TranslateError> {
        self.check_input(a, spec, TranslatorKind::LlmDirect)?;
        let prompt = self.direct_prompt(a, &spec.target, None)?;
        let content = backend.complete(&prompt, &self.params, seed)?;
        let diagnostics = self.validate(&spec.target, &content)?;
        Ok(self.outcome(spec, content, diagnostics))
    }

    /// Returns the cached script for the pair and backend, or asks the
    /// backend for one. A candidate is accepted once it parses and, on the
    /// source's probe fixture, produces output that renders in the target,
    /// validates, and parses back to the same elements.
    pub fn synthesize_conversion_script(
        &self,
        source: &FormalismId,
        target: &FormalismId,
        backend: &dyn CompletionBackend,
        seed: u64,
    ) -> Result<ConversionScript, TranslateError> {
        self.registry.get(source)?;
        self.registry.get(target)?;
        let key = CacheKey::new(source, target, backend.name());
        if let Some(script) = self.cache.get(&key) {
            return Ok(script);
        }
        let writer = self.cache.writer(&key);
        let _guard = writer.lock().expect("script writer lock");
        if let Some(script) = self.cache.get(&key) {
            return Ok(script);
        }
        let probe = probe_fixture(source).unwrap_or("");
        let grammar = self.registry.get(target)?.codec.grammar();
        let mut previous: Option<(String, Diagnostic)> = None;
        for attempt in 0..self.synthesis_budget {
            let diagnostics: Vec<Diagnostic> = previous.iter().map(|(_, d)| d.clone()).collect();
            let feedback = previous.as_ref().map(|(candidate, _)| Feedback {
                candidate,
                diagnostics: &diagnostics,
            });
            let prompt = render_prompt(
                SCRIPT_TEMPLATE,
                &PromptInputs {
                    source_formalism: source.as_str(),
                    target_formalism: target.as_str(),
                    target_grammar: grammar,
                    source_content: probe,
                    feedback,
                },
            );
            let body = backend.complete(&prompt, &self.params, seed + attempt as u64)?;
            match self.certify(source, target, &body, backend.name(), probe) {
                Ok(script) => {
                    self.cache.insert(script.clone())?;
                    return Ok(script);
                }
                Err(problem) => previous = Some((body, problem)),
            }
        }
        let last_error = previous.map(|(_, d)| d.message).unwrap_or_default();
        Err(TranslateError::ScriptSynthesisFailed {
            from: source.clone(),
            to: target.clone(),
            attempts: self.synthesis_budget,
            last_error,
        })
    }

    fn certify(
        &self,
        source: &FormalismId,
        target: &FormalismId,
        body: &str,
        backend: &str,
        probe: &str,
    ) -> Result<ConversionScript, Diagnostic> {
        let script = ConversionScript::parse(source.clone(), target.clone(), body, backend).map_err(|e| {
            Diagnostic::error(codes::SCRIPT_INVALID, e.message.clone()).at_line(e.line, 1)
        })?;
        let uncertified = |m: String| Diagnostic::error(codes::SCRIPT_UNCERTIFIED, m);
        let probe_set = self
            .registry
            .get(source)
            .map_err(|e| uncertified(e.to_string()))?
            .codec
            .parse(probe)
            .map_err(|_| uncertified(format!("probe fixture for {source} does not parse")))?;
        let output = script.run(&probe_set).map_err(|e| uncertified(e.to_string()))?;
        let codec = &self.registry.get(target).map_err(|e| uncertified(e.to_string()))?.codec;
        let text = codec.render(&output).map_err(|u| uncertified(format!("{}: {}", u.element, u.reason)))?;
        if has_errors(&codec.validate(&text)) || codec.parse(&text).ok() != Some(output) {
            return Err(uncertified(format!("probe output does not validate in {target}")));
        }
        Ok(script)
    }

    /// Runs a script on an artifact. Syntax problems in the artifact become
    /// diagnostics; script failures are errors.
    pub fn translate_via_script(&self, a: &Artifact, script: &ConversionScript) -> Result<TranslationOutcome, TranslateError> {
        if a.formalism != script.source {
            return Err(TranslateError::SourceMismatch {
                expected: script.source.clone(),
                found: a.formalism.clone(),
            });
        }
        let spec = TranslatorSpec::new(script.source.clone(), script.target.clone(), TranslatorKind::LlmScripted);
        let set = match self.registry.get(&script.source)?.codec.parse(&a.content) {
            Ok(set) => set,
            Err(diagnostics) => return Ok(self.outcome(&spec, String::new(), diagnostics)),
        };
        let output = script.run(&set)?;
        let (content, diagnostics) = match self.registry.render(&output, &script.target) {
            Ok(text) => {
                let diagnostics = self.validate(&script.target, &text)?;
                (text, diagnostics)
            }
            Err(e) => (String::new(), vec![Diagnostic::error(codes::TRANSLATE_UNREPRESENTABLE, e.to_string())]),
        };
        Ok(self.outcome(&spec, content, diagnostics))
    }

    pub fn translate_scripted(
        &self,
        a: &Artifact,
        spec: &TranslatorSpec,
        backend: &dyn CompletionBackend,
        seed: u64,
    ) -> Result<TranslationOutcome, TranslateError> {
        self.check_input(a, spec, TranslatorKind::LlmScripted)?;
        let script = self.synthesize_conversion_script(&spec.source, &spec.target, backend, seed)?;
        let mut outcome = self.translate_via_script(a, &script)?;
        outcome.translator = spec.clone();
        Ok(outcome)
    }

    /// Dispatches on the translator kind. Rule-based hops ignore the backend.
    pub fn translate(
        &self,
        a: &Artifact,
        spec: &TranslatorSpec,
        backend: &dyn CompletionBackend,
        seed: u64,
    ) -> Result<TranslationOutcome, TranslateError> {
        match spec.kind {
            TranslatorKind::RuleBased => self.translate_rule_based(a, spec),
            TranslatorKind::LlmDirect => self.translate_llm_direct(a, spec, backend, seed),
            TranslatorKind::LlmScripted => self.translate_scripted(a, spec, backend, seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::backend::{MockBackend, Step};
    use super::*;
    use crate::mini::{builtin_registry, er, fol_p9, fol_pk, tab_csv, tab_json, uml};

    fn id(s: &str) -> FormalismId {
        FormalismId::new(s).unwrap()
    }

    fn engine() -> Translators {
        Translators::new(Arc::new(builtin_registry()))
    }

    fn spec(s: &str, t: &str, kind: TranslatorKind) -> TranslatorSpec {
        TranslatorSpec::new(id(s), id(t), kind)
    }

    const JSON: &str = "[\n  {\"id\": 1, \"name\": \"ada\"},\n  {\"id\": 2, \"name\": \"bob\"}\n]\n";

    #[test]
    fn spec_invariants() {
        assert!(spec(uml::ID, er::ID, TranslatorKind::RuleBased).deterministic);
        assert!(!spec(uml::ID, er::ID, TranslatorKind::LlmDirect).deterministic);
        assert!(spec(uml::ID, er::ID, TranslatorKind::RuleBased).with_estimates(0.0, 1.0).is_err());
        assert!(spec(uml::ID, er::ID, TranslatorKind::RuleBased).with_estimates(0.5, -1.0).is_err());
        let mut bad = spec(uml::ID, er::ID, TranslatorKind::LlmDirect);
        bad.deterministic = true;
        assert!(bad.check().is_err());
        assert_eq!("llm-scripted".parse::<TranslatorKind>(), Ok(TranslatorKind::LlmScripted));
    }

    #[test]
    fn rule_based_table_pair() {
        let out = engine()
            .translate_rule_based(
                &Artifact::authored(id(tab_json::ID), JSON),
                &spec(tab_json::ID, tab_csv::ID, TranslatorKind::RuleBased),
            )
            .unwrap();
        assert_eq!(out.artifact.content, "id,name\n1,ada\n2,bob\n");
        assert_eq!(out.attempts, 1);
        assert!(out.diagnostics.is_empty());
    }

    #[test]
    fn rule_based_rejects_other_pairs_and_kinds() {
        let a = Artifact::authored(id(uml::ID), "class A { }");
        let e = engine().translate_rule_based(&a, &spec(uml::ID, fol_pk::ID, TranslatorKind::RuleBased));
        assert!(matches!(e, Err(TranslateError::UnsupportedPair { .. })));
        let e = engine().translate_rule_based(&a, &spec(uml::ID, er::ID, TranslatorKind::LlmDirect));
        assert!(matches!(e, Err(TranslateError::WrongKind { .. })));
        let e = engine().translate_rule_based(&a, &spec(fol_p9::ID, fol_pk::ID, TranslatorKind::RuleBased));
        assert!(matches!(e, Err(TranslateError::SourceMismatch { .. })));
    }

    #[test]
    fn direct_returns_backend_text_and_validates_it() {
        let a = Artifact::authored(id(tab_json::ID), JSON);
        let s = spec(tab_json::ID, tab_csv::ID, TranslatorKind::LlmDirect);
        let ok = MockBackend::constant("m", "id,name\n1,ada\n");
        let out = engine().translate_llm_direct(&a, &s, &ok, 0).unwrap();
        assert_eq!(out.artifact.content, "id,name\n1,ada\n");
        assert!(out.diagnostics.is_empty());
        let bad = MockBackend::constant("m", "id,name\n1\n");
        let out = engine().translate_llm_direct(&a, &s, &bad, 0).unwrap();
        assert!(!out.is_valid());
        let down = MockBackend::schedule("m", vec![Step::Unavailable]);
        assert!(matches!(
            engine().translate_llm_direct(&a, &s, &down, 0),
            Err(TranslateError::Backend(BackendError::Unavailable(_)))
        ));
    }

    #[test]
    fn script_cache_law() {
        let t = engine();
        let backend = MockBackend::constant("m", "map-field * *\n");
        let first = t.synthesize_conversion_script(&id(tab_json::ID), &id(tab_csv::ID), &backend, 0).unwrap();
        let second = t.synthesize_conversion_script(&id(tab_json::ID), &id(tab_csv::ID), &backend, 9).unwrap();
        assert_eq!(first.content_digest, second.content_digest);
        assert_eq!(backend.calls(), 1);
        let s = spec(tab_json::ID, tab_csv::ID, TranslatorKind::LlmScripted);
        for _ in 0..10 {
            let out = t.translate_scripted(&Artifact::authored(id(tab_json::ID), JSON), &s, &backend, 0).unwrap();
            assert_eq!(out.artifact.content, "id,name\n1,ada\n2,bob\n");
        }
        assert_eq!(backend.calls(), 1);
    }

    #[test]
    fn garbage_exhausts_synthesis_budget() {
        let backend = MockBackend::constant("m", "print('hello')");
        let e = engine().synthesize_conversion_script(&id(tab_json::ID), &id(tab_csv::ID), &backend, 0);
        assert!(matches!(e, Err(TranslateError::ScriptSynthesisFailed { attempts: 3, .. })));
        assert_eq!(backend.calls(), 3);
    }

    #[test]
    fn uncertifiable_script_is_retried_with_feedback() {
        let backend = MockBackend::from_fn("m", |prompt, _| {
            Ok(if prompt.contains("script.uncertified") {
                "map-field * *".into()
            } else {
                "drop nothing-here".into()
            })
        });
        let script = engine()
            .synthesize_conversion_script(&id(tab_json::ID), &id(tab_csv::ID), &backend, 0)
            .unwrap();
        assert_eq!(script.body, "map-field * *");
        assert_eq!(backend.calls(), 2);
    }

    #[test]
    fn script_runtime_error_surfaces() {
        let script = ConversionScript::parse(id(tab_json::ID), id(tab_csv::ID), "map-field * *\ndrop ghost", "m").unwrap();
        let e = engine().translate_via_script(&Artifact::authored(id(tab_json::ID), JSON), &script);
        assert!(matches!(e, Err(TranslateError::ScriptRuntime(ScriptRuntimeError { step: 2, .. }))));
    }
}
