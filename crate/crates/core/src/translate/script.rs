//! The embedded mapping language for conversion scripts.
//!
//! One statement per line, `#` starts a comment:
//!
//! ```text
//! rename OLD NEW              element, entity, field or rule name
//! drop NAME                   removes matching elements (and an entity's attributes)
//! synthesize key NAME TYPE    adds a key to every entity that has none
//! synthesize field NAME VALUE adds a field to every record that lacks it
//! cast NAME TYPE              retypes attributes or converts field values
//! map-field FROM TO           renames a record field; `map-field * *` keeps all
//! ```
//!
//! Execution is a pure function of the input set. A statement that matches
//! nothing is a runtime error, except the two `synthesize` forms and
//! `map-field * *`.

use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::element::{format_float, Element, ElementSet, Scalar};
use crate::formalism::FormalismId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("script line {line}: {message}")]
pub struct ScriptParseError {
    pub line: usize,
    pub message: String,
}

/// `step` is the 1-based index of the failing statement.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("script step {step}: {message}")]
pub struct ScriptRuntimeError {
    pub step: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Statement {
    Rename { from: String, to: String },
    Drop { name: String },
    SynthesizeKey { name: String, type_name: String },
    SynthesizeField { name: String, value: Scalar },
    Cast { name: String, type_name: String },
    MapField { from: String, to: String },
    MapAll,
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Rename { from, to } => write!(f, "rename {from} {to}"),
            Statement::Drop { name } => write!(f, "drop {name}"),
            Statement::SynthesizeKey { name, type_name } => write!(f, "synthesize key {name} {type_name}"),
            Statement::SynthesizeField { name, value } => write!(f, "synthesize field {name} {}", value_literal(value)),
            Statement::Cast { name, type_name } => write!(f, "cast {name} {type_name}"),
            Statement::MapField { from, to } => write!(f, "map-field {from} {to}"),
            Statement::MapAll => f.write_str("map-field * *"),
        }
    }
}

fn value_literal(value: &Scalar) -> String {
    match value {
        Scalar::Null => "null".into(),
        Scalar::Bool(b) => b.to_string(),
        Scalar::Int(i) => i.to_string(),
        Scalar::Float(x) => format_float(x.0),
        Scalar::Text(s) => format!("{s:?}"),
    }
}

fn parse_value(token: &str) -> Scalar {
    if let Some(inner) = token.strip_prefix('"').and_then(|t| t.strip_suffix('"')) {
        return Scalar::text(inner);
    }
    match token {
        "null" => Scalar::Null,
        "true" => Scalar::Bool(true),
        "false" => Scalar::Bool(false),
        _ => token
            .parse::<i64>()
            .map(Scalar::Int)
            .or_else(|_| token.parse::<f64>().map(Scalar::float))
            .unwrap_or_else(|_| Scalar::text(token)),
    }
}

pub fn parse_statements(body: &str) -> Result<Vec<Statement>, ScriptParseError> {
    let mut out = Vec::new();
    for (i, raw) in body.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let words: Vec<&str> = line.split_whitespace().filter(|w| *w != ":").collect();
        if words.is_empty() {
            continue;
        }
        let err = |message: String| ScriptParseError { line: i + 1, message };
        let arity = |n: usize| {
            if words.len() == n {
                Ok(())
            } else {
                Err(err(format!("`{}` takes {} operands", words[..words.len().min(2)].join(" "), n - 1)))
            }
        };
        let s = |k: usize| words[k].to_string();
        let statement = match words[0] {
            "rename" => {
                arity(3)?;
                Statement::Rename { from: s(1), to: s(2) }
            }
            "drop" => {
                arity(2)?;
                Statement::Drop { name: s(1) }
            }
            "cast" => {
                arity(3)?;
                Statement::Cast {
                    name: s(1),
                    type_name: s(2),
                }
            }
            "map-field" => {
                arity(3)?;
                match (words[1], words[2]) {
                    ("*", "*") => Statement::MapAll,
                    ("*", _) | (_, "*") => return Err(err("`*` must appear on both sides".into())),
                    _ => Statement::MapField { from: s(1), to: s(2) },
                }
            }
            "synthesize" => match words.get(1) {
                Some(&"key") => {
                    arity(4)?;
                    Statement::SynthesizeKey {
                        name: s(2),
                        type_name: s(3),
                    }
                }
                Some(&"field") => {
                    arity(4)?;
                    Statement::SynthesizeField {
                        name: s(2),
                        value: parse_value(words[3]),
                    }
                }
                _ => return Err(err("expected `synthesize key` or `synthesize field`".into())),
            },
            other => return Err(err(format!("unknown operation `{other}`"))),
        };
        out.push(statement);
    }
    if out.is_empty() {
        return Err(ScriptParseError {
            line: 1,
            message: "script has no statements".into(),
        });
    }
    Ok(out)
}

/// A parsed, content-addressed conversion program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConversionScript {
    pub source: FormalismId,
    pub target: FormalismId,
    pub body: String,
    pub synthesized_by: String,
    pub content_digest: String,
    statements: Vec<Statement>,
}

pub fn digest(body: &str) -> String {
    hex::encode(Sha256::digest(body.as_bytes()))
}

impl ConversionScript {
    pub fn parse(
        source: FormalismId,
        target: FormalismId,
        body: impl Into<String>,
        synthesized_by: impl Into<String>,
    ) -> Result<Self, ScriptParseError> {
        let body = body.into();
        let statements = parse_statements(&body)?;
        Ok(Self {
            source,
            target,
            content_digest: digest(&body),
            body,
            synthesized_by: synthesized_by.into(),
            statements,
        })
    }

    pub fn statements(&self) -> &[Statement] {
        &self.statements
    }

    pub fn run(&self, set: &ElementSet) -> Result<ElementSet, ScriptRuntimeError> {
        let mut current = set.clone();
        for (i, statement) in self.statements.iter().enumerate() {
            current = apply(statement, current).map_err(|message| ScriptRuntimeError { step: i + 1, message })?;
        }
        Ok(current)
    }
}

fn renamed(element: &Element, from: &str, to: &str) -> Element {
    let swap = |s: &String| if s == from { to.to_string() } else { s.clone() };
    match element {
        Element::EntityDef { name } => Element::EntityDef { name: swap(name) },
        Element::AttributeDef {
            owner,
            name,
            type_name,
            is_key,
        } => Element::AttributeDef {
            owner: swap(owner),
            name: swap(name),
            type_name: type_name.clone(),
            is_key: *is_key,
        },
        Element::RelationDef {
            name,
            endpoints,
            cardinality,
        } => Element::RelationDef {
            name: swap(name),
            endpoints: endpoints.iter().map(swap).collect(),
            cardinality: *cardinality,
        },
        Element::RuleDef {
            name,
            antecedents,
            consequents,
        } => Element::RuleDef {
            name: swap(name),
            antecedents: antecedents.clone(),
            consequents: consequents.clone(),
        },
        Element::RecordField { row, field, value } => Element::field(*row, swap(field), value.clone()),
    }
}

fn mentions(element: &Element, name: &str) -> bool {
    element.name() == name
        || match element {
            Element::AttributeDef { owner, .. } => owner == name,
            Element::RelationDef { endpoints, .. } => endpoints.iter().any(|e| e == name),
            _ => false,
        }
}

fn cast_value(value: &Scalar, type_name: &str) -> Result<Scalar, String> {
    let fail = || format!("cannot cast {} value {value} to {type_name}", value.type_name());
    Ok(match (type_name, value) {
        (_, Scalar::Null) => Scalar::Null,
        ("text", Scalar::Float(f)) => Scalar::text(format_float(f.0)),
        ("text", Scalar::Text(_)) => value.clone(),
        ("text", v) => Scalar::text(v.to_string()),
        ("int", Scalar::Int(_)) => value.clone(),
        ("int", Scalar::Float(f)) if f.fract() == 0.0 && f.abs() < 9.0e15 => Scalar::Int(f.0 as i64),
        ("int", Scalar::Text(s)) => Scalar::Int(s.trim().parse().map_err(|_| fail())?),
        ("float", Scalar::Int(i)) => Scalar::float(*i as f64),
        ("float", Scalar::Float(_)) => value.clone(),
        ("float", Scalar::Text(s)) => match s.trim().parse::<f64>() {
            Ok(f) if f.is_finite() => Scalar::float(f),
            _ => return Err(fail()),
        },
        ("bool", Scalar::Bool(_)) => value.clone(),
        ("bool", Scalar::Text(s)) if s == "true" || s == "false" => Scalar::Bool(s == "true"),
        ("int" | "float" | "bool", _) => return Err(fail()),
        _ => return Err(format!("unknown field type `{type_name}`, expected int, float, text or bool")),
    })
}

fn apply(statement: &Statement, set: ElementSet) -> Result<ElementSet, String> {
    match statement {
        Statement::Rename { from, to } => {
            if !set.iter().any(|e| mentions(e, from)) {
                return Err(format!("no element named `{from}`"));
            }
            let out: ElementSet = set.iter().map(|e| renamed(e, from, to)).collect();
            if out.len() != set.len() {
                return Err(format!("renaming `{from}` to `{to}` merges distinct elements"));
            }
            Ok(out)
        }
        Statement::Drop { name } => {
            let dropped_entity = set.has_entity(name);
            let before = set.len();
            let mut out = set;
            out.retain(|e| {
                let owned = matches!(e, Element::AttributeDef { owner, .. } if dropped_entity && owner == name);
                e.name() != name && !owned
            });
            if out.len() == before {
                return Err(format!("no element named `{name}`"));
            }
            Ok(out)
        }
        Statement::SynthesizeKey { name, type_name } => {
            let keyless: Vec<String> = set
                .entities()
                .filter(|entity| {
                    !set.iter()
                        .any(|e| matches!(e, Element::AttributeDef { owner, is_key: true, .. } if owner == entity))
                })
                .map(str::to_string)
                .collect();
            let mut out = set;
            for entity in keyless {
                let existing = out
                    .iter()
                    .find(|e| matches!(e, Element::AttributeDef { owner, name: n, .. } if *owner == entity && n == name))
                    .cloned();
                if let Some(e) = existing {
                    out.remove(&e);
                    if let Element::AttributeDef { type_name, .. } = e {
                        out.insert(Element::attribute(&entity, name, type_name, true));
                    }
                } else {
                    out.insert(Element::attribute(&entity, name, type_name, true));
                }
            }
            Ok(out)
        }
        Statement::SynthesizeField { name, value } => {
            let mut rows: Vec<usize> = set
                .iter()
                .filter_map(|e| match e {
                    Element::RecordField { row, .. } => Some(*row),
                    _ => None,
                })
                .collect();
            rows.dedup();
            let mut out = set;
            for row in rows {
                let present = out
                    .iter()
                    .any(|e| matches!(e, Element::RecordField { row: r, field, .. } if *r == row && field == name));
                if !present {
                    out.insert(Element::field(row, name, value.clone()));
                }
            }
            Ok(out)
        }
        Statement::Cast { name, type_name } => {
            let mut matched = false;
            let mut out = ElementSet::new();
            for e in set {
                let next = match e {
                    Element::AttributeDef {
                        owner,
                        name: n,
                        is_key,
                        ..
                    } if n == *name => {
                        matched = true;
                        Element::attribute(owner, n, type_name, is_key)
                    }
                    Element::RecordField { row, field, value } if field == *name => {
                        matched = true;
                        Element::field(row, field, cast_value(&value, type_name)?)
                    }
                    other => other,
                };
                out.insert(next);
            }
            if !matched {
                return Err(format!("no attribute or field named `{name}`"));
            }
            Ok(out)
        }
        Statement::MapField { from, to } => {
            let mut matched = false;
            let mut out = ElementSet::new();
            for e in set.iter() {
                let next = match e {
                    Element::RecordField { row, field, value } if field == from => {
                        matched = true;
                        let taken = from != to
                            && set.iter().any(
                                |o| matches!(o, Element::RecordField { row: r, field: f, .. } if r == row && f == to),
                            );
                        if taken {
                            return Err(format!("field `{to}` already exists in row {row}"));
                        }
                        Element::field(*row, to, value.clone())
                    }
                    other => other.clone(),
                };
                out.insert(next);
            }
            if !matched {
                return Err(format!("no field named `{from}`"));
            }
            Ok(out)
        }
        Statement::MapAll => Ok(set),
    }
}
