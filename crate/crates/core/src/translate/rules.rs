//! Deterministic translators for the three registered formalism pairs.
//!
//! Schema translation between `uml-mini` and `er-mini` is lossy: er-mini needs
//! a key per entity and has no multiplicities, uml-mini has no keys. Strict
//! mode synthesizes an `int` key and drops multiplicities. Annotated mode does
//! the same but appends `# @...` comment lines recording what it changed, and
//! the reverse direction reads them back to undo the change.

use std::collections::{BTreeMap, BTreeSet};

use crate::diagnostic::{codes, Diagnostic};
use crate::element::{Cardinality, Element, ElementSet};
use crate::formalism::{FormalismError, FormalismId, Registry};
use crate::mini::{er, fol_p9, fol_pk, tab_csv, tab_json, uml};

use super::TranslationMode;

const SYNTH_TAG: &str = "# @synthesized-key";
const CARD_TAG: &str = "# @cardinality";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RulePair {
    UmlToEr,
    ErToUml,
    P9ToPk,
    PkToP9,
    JsonToCsv,
    CsvToJson,
}

impl RulePair {
    pub fn of(source: &FormalismId, target: &FormalismId) -> Option<Self> {
        Some(match (source.as_str(), target.as_str()) {
            (uml::ID, er::ID) => RulePair::UmlToEr,
            (er::ID, uml::ID) => RulePair::ErToUml,
            (fol_p9::ID, fol_pk::ID) => RulePair::P9ToPk,
            (fol_pk::ID, fol_p9::ID) => RulePair::PkToP9,
            (tab_json::ID, tab_csv::ID) => RulePair::JsonToCsv,
            (tab_csv::ID, tab_json::ID) => RulePair::CsvToJson,
            _ => return None,
        })
    }
}

/// Text produced by a rule-based hop, with any diagnostics raised on the way.
/// Content is empty when the source could not be parsed or rendered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleOutput {
    pub content: String,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Default)]
struct Annotations {
    synthesized: BTreeSet<(String, String)>,
    cardinalities: BTreeMap<String, Cardinality>,
}

impl Annotations {
    fn read(content: &str) -> Self {
        let mut out = Self::default();
        for line in content.lines().map(str::trim) {
            let words: Vec<&str> = line.split_whitespace().collect();
            if let Some(rest) = line.strip_prefix(SYNTH_TAG) {
                if let [entity, name] = rest.split_whitespace().collect::<Vec<_>>()[..] {
                    out.synthesized.insert((entity.to_string(), name.to_string()));
                }
            } else if line.starts_with(CARD_TAG) && words.len() == 4 {
                if let Some(card) = parse_cardinality(words[3]) {
                    out.cardinalities.insert(words[2].to_string(), card);
                }
            }
        }
        out
    }

    fn write(&self, out: &mut String) {
        for (entity, name) in &self.synthesized {
            out.push_str(&format!("{SYNTH_TAG} {entity} {name}\n"));
        }
        for (rel, card) in &self.cardinalities {
            out.push_str(&format!("{CARD_TAG} {rel} {card}\n"));
        }
    }
}

fn parse_cardinality(s: &str) -> Option<Cardinality> {
    let (min, max) = s.split_once("..")?;
    let min = min.parse().ok()?;
    let max = match max {
        "*" => None,
        n => Some(n.parse().ok()?),
    };
    Some(Cardinality { min, max })
}

fn fresh_key_name(set: &ElementSet, entity: &str) -> String {
    let taken = |n: &str| {
        set.iter()
            .any(|e| matches!(e, Element::AttributeDef { owner, name, .. } if owner == entity && name == n))
    };
    if !taken("id") {
        return "id".into();
    }
    (1..).map(|i| format!("id{i}")).find(|n| !taken(n)).expect("unbounded")
}

fn uml_to_er(set: &ElementSet) -> (ElementSet, Annotations) {
    let mut notes = Annotations::default();
    let mut out = ElementSet::new();
    for entity in set.entities() {
        let key = fresh_key_name(set, entity);
        out.insert(Element::attribute(entity, &key, "int", true));
        notes.synthesized.insert((entity.to_string(), key));
    }
    for element in set {
        match element {
            Element::AttributeDef {
                owner, name, type_name, ..
            } => {
                out.insert(Element::attribute(owner, name, type_name, false));
            }
            Element::RelationDef {
                name,
                endpoints,
                cardinality,
            } => {
                if let Some(card) = cardinality {
                    notes.cardinalities.insert(name.clone(), *card);
                }
                out.insert(Element::relation(name, endpoints.clone(), None));
            }
            other => {
                out.insert(other.clone());
            }
        }
    }
    (out, notes)
}

fn er_to_uml(set: &ElementSet, notes: &Annotations) -> ElementSet {
    set.iter()
        .filter_map(|element| match element {
            Element::AttributeDef {
                owner, name, type_name, ..
            } => {
                let synthesized = notes.synthesized.contains(&(owner.clone(), name.clone()));
                (!synthesized).then(|| Element::attribute(owner, name, type_name, false))
            }
            Element::RelationDef { name, endpoints, .. } => Some(Element::relation(
                name,
                endpoints.clone(),
                notes.cardinalities.get(name).copied(),
            )),
            other => Some(other.clone()),
        })
        .collect()
}

fn render_diagnostic(err: FormalismError, pair: RulePair) -> Diagnostic {
    match err {
        FormalismError::UnrepresentableElement { element, target, reason } => {
            let code = match (pair, element.as_ref()) {
                (RulePair::P9ToPk, Element::RuleDef { .. }) => codes::FOL_NON_HORN,
                _ => codes::TRANSLATE_UNREPRESENTABLE,
            };
            Diagnostic::error(code, format!("{element} cannot be expressed in {target}: {reason}"))
        }
        other => Diagnostic::error(codes::TRANSLATE_UNREPRESENTABLE, other.to_string()),
    }
}

/// Runs a registered pair. Fails only for an unregistered pair or formalism;
/// problems with the content are reported as diagnostics.
pub fn rule_translate(
    registry: &Registry,
    pair: RulePair,
    source: &FormalismId,
    target: &FormalismId,
    mode: TranslationMode,
    content: &str,
) -> Result<RuleOutput, FormalismError> {
    let set = match registry.get(source)?.codec.parse(content) {
        Ok(set) => set,
        Err(diagnostics) => {
            return Ok(RuleOutput {
                content: String::new(),
                diagnostics,
            })
        }
    };
    let (set, notes) = match pair {
        RulePair::UmlToEr => uml_to_er(&set),
        RulePair::ErToUml => {
            let notes = match mode {
                TranslationMode::Annotated => Annotations::read(content),
                TranslationMode::Strict => Annotations::default(),
            };
            (er_to_uml(&set, &notes), Annotations::default())
        }
        _ => (set, Annotations::default()),
    };
    let mut text = match registry.render(&set, target) {
        Ok(text) => text,
        Err(err) => {
            return Ok(RuleOutput {
                content: String::new(),
                diagnostics: vec![render_diagnostic(err, pair)],
            })
        }
    };
    if mode == TranslationMode::Annotated {
        notes.write(&mut text);
    }
    let diagnostics = registry.get(target)?.codec.validate(&text);
    Ok(RuleOutput {
        content: text,
        diagnostics,
    })
}
