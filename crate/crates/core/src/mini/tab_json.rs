//! `tab-json`: a JSON array of flat objects with identical keys and scalar values.

use std::sync::Arc;

use serde_json::Value;

use super::tab::{records_to_set, set_to_records, Record};
use crate::diagnostic::{codes, Diagnostic, Location};
use crate::element::{format_float, ElementSet, Scalar};
use crate::formalism::{Codec, Formalism, FormalismId, Unrepresentable};

pub const ID: &str = "tab-json";

const GRAMMAR: &str = "a JSON array of flat objects: [{\"a\": 1, \"b\": \"x\"}, ...]\n\
every object has the same keys; values are null, booleans, numbers or strings\n\
nested arrays or objects are not supported";

pub fn formalism() -> Formalism {
    Formalism {
        id: FormalismId::known(ID),
        display_name: "Tabular records (JSON)".into(),
        description: "Array of flat homogeneous JSON objects".into(),
        codec: Arc::new(JsonCodec),
    }
}

/// Start locations of the objects directly inside the top-level array.
fn record_locations(content: &str) -> Vec<Location> {
    let mut out = Vec::new();
    let (mut depth, mut in_string, mut escaped) = (0usize, false, false);
    for (line_idx, line) in content.lines().enumerate() {
        for (col, c) in line.chars().enumerate() {
            if in_string {
                match (escaped, c) {
                    (true, _) => escaped = false,
                    (false, '\\') => escaped = true,
                    (false, '"') => in_string = false,
                    _ => {}
                }
                continue;
            }
            match c {
                '"' => in_string = true,
                '[' | '{' => {
                    if depth == 1 && c == '{' {
                        out.push(Location::new(line_idx + 1, col + 1));
                    }
                    depth += 1;
                }
                ']' | '}' => depth = depth.saturating_sub(1),
                _ => {}
            }
        }
    }
    out
}

fn scalar(value: &Value) -> Option<Scalar> {
    Some(match value {
        Value::Null => Scalar::Null,
        Value::Bool(b) => Scalar::Bool(*b),
        Value::Number(n) => match n.as_i64() {
            Some(i) => Scalar::Int(i),
            None => Scalar::float(n.as_f64()?),
        },
        Value::String(s) => Scalar::Text(s.clone()),
        Value::Array(_) | Value::Object(_) => return None,
    })
}

fn parse_records(content: &str) -> Result<Vec<Record>, Diagnostic> {
    if content.trim().is_empty() {
        return Ok(Vec::new());
    }
    let value: Value = serde_json::from_str(content).map_err(|e| {
        Diagnostic::error(codes::SYNTAX_JSON, e.to_string()).at_line(e.line().max(1), e.column().max(1))
    })?;
    let Value::Array(items) = value else {
        return Err(Diagnostic::error(codes::TAB_NOT_ARRAY, "top-level value must be an array")
            .at_line(1, 1));
    };
    let locations = record_locations(content);
    let loc_of = |i: usize| locations.get(i).copied().unwrap_or(Location::new(1, 1));
    let mut records: Vec<Record> = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let Value::Object(map) = item else {
            return Err(Diagnostic::error(codes::TAB_NOT_OBJECT, format!("element {i} is not an object"))
                .at(loc_of(i)));
        };
        let mut rec = Record::new();
        for (key, v) in map {
            let s = scalar(v).ok_or_else(|| {
                Diagnostic::error(
                    codes::TAB_NESTED_UNSUPPORTED,
                    format!("field {key:?} of record {i} is nested"),
                )
                .at(loc_of(i))
                .with_hint("flatten nested values into separate scalar fields")
            })?;
            rec.insert(key.clone(), s);
        }
        if let Some(first) = records.first() {
            if !first.keys().eq(rec.keys()) {
                return Err(Diagnostic::error(
                    codes::TAB_HETEROGENEOUS_RECORD,
                    format!("record {i} has different keys than record 0"),
                )
                .at(loc_of(i)));
            }
        }
        records.push(rec);
    }
    Ok(records)
}

fn render_scalar(v: &Scalar) -> String {
    match v {
        Scalar::Null => "null".into(),
        Scalar::Bool(b) => b.to_string(),
        Scalar::Int(i) => i.to_string(),
        Scalar::Float(f) => format_float(f.0),
        Scalar::Text(s) => Value::String(s.clone()).to_string(),
    }
}

struct JsonCodec;

impl Codec for JsonCodec {
    fn parse(&self, content: &str) -> Result<ElementSet, Vec<Diagnostic>> {
        parse_records(content).map(records_to_set).map_err(|d| vec![d])
    }

    fn render(&self, set: &ElementSet) -> Result<String, Unrepresentable> {
        let records = set_to_records(set)?;
        if records.is_empty() {
            return Ok("[]\n".into());
        }
        let lines: Vec<String> = records
            .iter()
            .map(|rec| {
                let fields: Vec<String> = rec
                    .iter()
                    .map(|(k, v)| format!("{}: {}", Value::String(k.clone()), render_scalar(v)))
                    .collect();
                format!("  {{{}}}", fields.join(", "))
            })
            .collect();
        Ok(format!("[\n{}\n]\n", lines.join(",\n")))
    }

    fn grammar(&self) -> &'static str {
        GRAMMAR
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::Element;

    fn codec() -> Arc<dyn Codec> {
        formalism().codec
    }

    #[test]
    fn two_records() {
        let set = codec()
            .parse(r#"[{"a": 1, "b": "x"}, {"a": 2.5, "b": null}]"#)
            .unwrap();
        assert_eq!(set.len(), 4);
        assert!(set.contains(&Element::field(1, "a", Scalar::float(2.5))));
        assert!(set.contains(&Element::field(1, "b", Scalar::Null)));
    }

    #[test]
    fn nested_values_are_rejected() {
        let diags = codec().parse("[\n {\"a\": 1},\n {\"a\": [1, 2]}\n]").unwrap_err();
        assert_eq!(diags[0].code, codes::TAB_NESTED_UNSUPPORTED);
        assert_eq!(diags[0].location, Some(Location::new(3, 2)));
    }

    #[test]
    fn heterogeneous_and_shape_errors() {
        let d = codec().parse(r#"[{"a": 1}, {"b": 1}]"#).unwrap_err();
        assert_eq!(d[0].code, codes::TAB_HETEROGENEOUS_RECORD);
        let d = codec().parse(r#"{"a": 1}"#).unwrap_err();
        assert_eq!(d[0].code, codes::TAB_NOT_ARRAY);
        let d = codec().parse("[{\"a\": 1},\n 3]").unwrap_err();
        assert_eq!(d[0].code, codes::TAB_NOT_OBJECT);
        let d = codec().parse("[{\"a\": 1}\n").unwrap_err();
        assert_eq!(d[0].code, codes::SYNTAX_JSON);
        assert!(d[0].location.unwrap().line <= 2);
    }

    #[test]
    fn render_canonical() {
        let set = codec().parse(r#"[{"b": "x", "a": 1.0}]"#).unwrap();
        assert_eq!(codec().render(&set).unwrap(), "[\n  {\"a\": 1.0, \"b\": \"x\"}\n]\n");
        assert_eq!(codec().render(&ElementSet::new()).unwrap(), "[]\n");
    }
}
