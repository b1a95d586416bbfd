//! `tab-csv`: header line plus comma-separated rows.
//!
//! Unquoted cells are typed: empty is null, `true`/`false` are booleans, and
//! numeric literals are integers or floats. Double-quoted cells are always
//! text, with `""` escaping a quote. Quoted cells cannot span lines.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::tab::{records_to_set, set_to_records, Record};
use crate::diagnostic::{codes, Diagnostic};
use crate::element::{format_float, Element, ElementSet, Scalar};
use crate::formalism::{Codec, Formalism, FormalismId, Unrepresentable};

pub const ID: &str = "tab-csv";

const GRAMMAR: &str = "first line is the header: name,name,...\n\
each following line is one record with the same number of comma-separated cells\n\
\"quoted\" cells are text (\"\" escapes a quote); unquoted cells: empty = null, true/false, numbers, else text";

pub fn formalism() -> Formalism {
    Formalism {
        id: FormalismId::known(ID),
        display_name: "Tabular records (CSV)".into(),
        description: "Header plus comma-separated rows with typed cells".into(),
        codec: Arc::new(CsvCodec),
    }
}

#[derive(Debug, PartialEq)]
struct Cell {
    text: String,
    quoted: bool,
}

fn split_cells(line: &str, line_no: usize) -> Result<Vec<Cell>, Diagnostic> {
    let chars: Vec<char> = line.chars().collect();
    let mut cells = Vec::new();
    let mut i = 0;
    loop {
        let start = i;
        if chars.get(i) == Some(&'"') {
            let mut text = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => {
                        return Err(Diagnostic::error(codes::SYNTAX_UNTERMINATED, "quoted cell is not closed")
                            .at_line(line_no, start + 1))
                    }
                    Some('"') if chars.get(i + 1) == Some(&'"') => {
                        text.push('"');
                        i += 2;
                    }
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some(c) => {
                        text.push(*c);
                        i += 1;
                    }
                }
            }
            cells.push(Cell { text, quoted: true });
        } else {
            let mut text = String::new();
            while let Some(&c) = chars.get(i) {
                if c == ',' {
                    break;
                }
                if c == '"' {
                    return Err(Diagnostic::error(
                        codes::SYNTAX_UNEXPECTED_TOKEN,
                        "quote inside an unquoted cell",
                    )
                    .at_line(line_no, i + 1)
                    .with_hint("quote the whole cell and double inner quotes"));
                }
                text.push(c);
                i += 1;
            }
            cells.push(Cell { text, quoted: false });
        }
        match chars.get(i) {
            None => return Ok(cells),
            Some(',') => i += 1,
            Some(c) => {
                return Err(Diagnostic::error(
                    codes::SYNTAX_UNEXPECTED_TOKEN,
                    format!("expected `,` after quoted cell, found `{c}`"),
                )
                .at_line(line_no, i + 1))
            }
        }
    }
}

fn is_int_literal(s: &str) -> bool {
    let digits = s.strip_prefix('-').unwrap_or(s);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

fn is_float_literal(s: &str) -> bool {
    s.bytes().any(|b| b.is_ascii_digit())
        && s.bytes().all(|b| b.is_ascii_digit() || b"+-.eE".contains(&b))
        && s.parse::<f64>().is_ok_and(f64::is_finite)
}

fn infer(cell: &str) -> Scalar {
    match cell {
        "" => Scalar::Null,
        "true" => Scalar::Bool(true),
        "false" => Scalar::Bool(false),
        _ if is_int_literal(cell) => match cell.parse::<i64>() {
            Ok(i) => Scalar::Int(i),
            Err(_) => Scalar::float(cell.parse().expect("digit string parses as f64")),
        },
        _ if is_float_literal(cell) => Scalar::float(cell.parse().expect("checked literal")),
        _ => Scalar::text(cell),
    }
}

fn parse_records(content: &str) -> Result<Vec<Record>, Diagnostic> {
    if content.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut lines: Vec<&str> = content.split('\n').collect();
    if lines.last() == Some(&"") {
        lines.pop();
    }
    let lines: Vec<&str> = lines.into_iter().map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
    let header = split_cells(lines[0], 1)?;
    let mut seen = BTreeSet::new();
    for (col, cell) in header.iter().enumerate() {
        if !seen.insert(cell.text.as_str()) {
            return Err(Diagnostic::error(
                codes::TAB_DUPLICATE_COLUMN,
                format!("column {:?} appears twice in the header", cell.text),
            )
            .at_line(1, col + 1));
        }
    }
    let mut records = Vec::with_capacity(lines.len() - 1);
    for (idx, line) in lines.iter().enumerate().skip(1) {
        let cells = split_cells(line, idx + 1)?;
        if cells.len() != header.len() {
            return Err(Diagnostic::error(
                codes::TAB_RAGGED_ROW,
                format!("row has {} cells, header has {}", cells.len(), header.len()),
            )
            .at_line(idx + 1, 1));
        }
        let rec: Record = header
            .iter()
            .zip(cells)
            .map(|(name, cell)| {
                let value = if cell.quoted {
                    Scalar::Text(cell.text)
                } else {
                    infer(&cell.text)
                };
                (name.text.clone(), value)
            })
            .collect();
        records.push(rec);
    }
    Ok(records)
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn render_cell(element: &Element, value: &Scalar) -> Result<String, Unrepresentable> {
    Ok(match value {
        Scalar::Null => String::new(),
        Scalar::Bool(b) => b.to_string(),
        Scalar::Int(i) => i.to_string(),
        Scalar::Float(f) => format_float(f.0),
        Scalar::Text(s) => {
            if s.contains(['\n', '\r']) {
                return Err(Unrepresentable::new(element, "line breaks cannot appear in a cell"));
            }
            if s.contains([',', '"']) || infer(s) != *value {
                quote(s)
            } else {
                s.clone()
            }
        }
    })
}

struct CsvCodec;

impl Codec for CsvCodec {
    fn parse(&self, content: &str) -> Result<ElementSet, Vec<Diagnostic>> {
        parse_records(content).map(records_to_set).map_err(|d| vec![d])
    }

    fn render(&self, set: &ElementSet) -> Result<String, Unrepresentable> {
        let records = set_to_records(set)?;
        let Some(first) = records.first() else {
            return Ok(String::new());
        };
        let mut out = String::new();
        let header: Vec<String> = first
            .keys()
            .map(|name| {
                let element = Element::field(0, name, first[name].clone());
                if name.contains(['\n', '\r']) {
                    Err(Unrepresentable::new(&element, "line breaks cannot appear in a column name"))
                } else if name.is_empty() || name.contains([',', '"']) {
                    Ok(quote(name))
                } else {
                    Ok(name.clone())
                }
            })
            .collect::<Result<_, _>>()?;
        out.push_str(&header.join(","));
        out.push('\n');
        for (row, rec) in records.iter().enumerate() {
            let cells = rec
                .iter()
                .map(|(name, value)| render_cell(&Element::field(row, name, value.clone()), value))
                .collect::<Result<Vec<_>, _>>()?;
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        Ok(out)
    }

    fn grammar(&self) -> &'static str {
        GRAMMAR
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn codec() -> Arc<dyn Codec> {
        formalism().codec
    }

    #[test]
    fn header_and_one_row() {
        let set = codec().parse("a,b\n1,2").unwrap();
        let expected: ElementSet = [
            Element::field(0, "a", Scalar::Int(1)),
            Element::field(0, "b", Scalar::Int(2)),
        ]
        .into_iter()
        .collect();
        assert_eq!(set, expected);
    }

    #[test]
    fn typed_and_quoted_cells() {
        let set = codec().parse("a,b,c,d,e\n\"1\",,true,-2.5e3,\"x,\"\"y\"\"\"\n").unwrap();
        assert!(set.contains(&Element::field(0, "a", Scalar::text("1"))));
        assert!(set.contains(&Element::field(0, "b", Scalar::Null)));
        assert!(set.contains(&Element::field(0, "c", Scalar::Bool(true))));
        assert!(set.contains(&Element::field(0, "d", Scalar::float(-2500.0))));
        assert!(set.contains(&Element::field(0, "e", Scalar::text("x,\"y\""))));
        let rendered = codec().render(&set).unwrap();
        assert_eq!(rendered, "a,b,c,d,e\n\"1\",,true,-2500.0,\"x,\"\"y\"\"\"\n");
        assert_eq!(codec().parse(&rendered).unwrap(), set);
    }

    #[test]
    fn single_column_null_rows_survive() {
        let set: ElementSet = [
            Element::field(0, "a", Scalar::Null),
            Element::field(1, "a", Scalar::Int(3)),
        ]
        .into_iter()
        .collect();
        let text = codec().render(&set).unwrap();
        assert_eq!(text, "a\n\n3\n");
        assert_eq!(codec().parse(&text).unwrap(), set);
    }

    #[test]
    fn structural_errors() {
        let d = codec().parse("a,b\n1,2,3").unwrap_err();
        assert_eq!(d[0].code, codes::TAB_RAGGED_ROW);
        assert_eq!(d[0].location.unwrap().line, 2);
        let d = codec().parse("a,a\n1,2").unwrap_err();
        assert_eq!(d[0].code, codes::TAB_DUPLICATE_COLUMN);
        let d = codec().parse("a\n\"open").unwrap_err();
        assert_eq!(d[0].code, codes::SYNTAX_UNTERMINATED);
        let d = codec().parse("a\nx\"y").unwrap_err();
        assert_eq!(d[0].code, codes::SYNTAX_UNEXPECTED_TOKEN);
    }

    #[test]
    fn text_that_looks_typed_is_quoted() {
        for s in ["", "true", "12", "1e5", "-3"] {
            let set: ElementSet = [Element::field(0, "a", Scalar::text(s))].into_iter().collect();
            let text = codec().render(&set).unwrap();
            assert_eq!(codec().parse(&text).unwrap(), set, "{s:?} -> {text:?}");
        }
    }
}
