//! An offline backend that answers translation prompts from the rule-based
//! pairs, so full pipelines can run without a model.
//!
//! Answers, in order of preference: a registered rule pair; a fenced block or
//! the whole source when it already validates in the target; a verbalization
//! of the source elements when the target is natural language; otherwise the
//! source text unchanged (which then fails validation downstream).

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use super::backend::{BackendError, CompletionBackend, CompletionParams};
use super::prompt::PromptView;
use super::rules::{rule_translate, RulePair};
use super::TranslationMode;
use crate::element::Element;
use crate::formalism::{FormalismId, Registry};
use crate::mini::{er, tab_csv, tab_json, uml, NL_ID};

pub struct OracleBackend {
    registry: Arc<Registry>,
    calls: AtomicUsize,
}

impl OracleBackend {
    pub const NAME: &'static str = "oracle";

    pub fn new(registry: Arc<Registry>) -> Self {
        Self {
            registry,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn valid_in(&self, target: &FormalismId, content: &str) -> bool {
        self.registry
            .get(target)
            .is_ok_and(|f| !crate::diagnostic::has_errors(&f.codec.validate(content)))
    }

    fn answer(&self, view: &PromptView) -> Option<String> {
        let source = FormalismId::new(&view.source_formalism).ok()?;
        let target = FormalismId::new(&view.target_formalism).ok()?;
        if view.script {
            return Some(script_for(&source, &target).to_string());
        }
        if let Some(pair) = RulePair::of(&source, &target) {
            let out = rule_translate(
                &self.registry,
                pair,
                &source,
                &target,
                TranslationMode::Strict,
                &view.source_content,
            )
            .ok()?;
            if !out.content.is_empty() {
                return Some(out.content);
            }
        }
        if let Some(block) = fenced_block(&view.source_content) {
            if self.valid_in(&target, &block) {
                return Some(block);
            }
        }
        if target.as_str() == NL_ID {
            let set = self.registry.get(&source).ok()?.codec.parse(&view.source_content).ok()?;
            return Some(verbalize(set.iter()));
        }
        Some(view.source_content.clone())
    }
}

fn script_for(source: &FormalismId, target: &FormalismId) -> &'static str {
    match (source.as_str(), target.as_str()) {
        (tab_json::ID, tab_csv::ID) | (tab_csv::ID, tab_json::ID) => "map-field * *\n",
        (uml::ID, er::ID) => "synthesize key id int\n",
        _ => "map-field * *\n",
    }
}

fn fenced_block(text: &str) -> Option<String> {
    let start = text.find("```")?;
    let after = &text[start + 3..];
    let body_start = after.find('\n')? + 1;
    let body = &after[body_start..];
    let end = body.find("```")?;
    Some(body[..end].to_string())
}

/// One sentence per element.
pub fn verbalize<'a>(elements: impl Iterator<Item = &'a Element>) -> String {
    let mut out = String::new();
    for e in elements {
        let line = match e {
            Element::EntityDef { name } => format!("There is a kind of thing called {name}."),
            Element::AttributeDef {
                owner,
                name,
                type_name,
                is_key,
            } => {
                let key = if *is_key { ", which identifies it" } else { "" };
                format!("Each {owner} has a {name} of type {type_name}{key}.")
            }
            Element::RelationDef { name, endpoints, .. } => {
                format!("{name} relates {}.", endpoints.join(" and "))
            }
            Element::RuleDef { .. } | Element::RecordField { .. } => format!("{e}."),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

impl CompletionBackend for OracleBackend {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn complete(&self, prompt: &str, _params: &CompletionParams, _seed: u64) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        PromptView::parse(prompt)
            .and_then(|view| self.answer(&view))
            .ok_or_else(|| BackendError::Unavailable("oracle: prompt not understood".into()))
    }
}
