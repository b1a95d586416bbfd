//! Record-set helpers shared by `tab-json` and `tab-csv`.

use std::collections::BTreeMap;

use crate::element::{Element, ElementSet, Scalar};
use crate::formalism::Unrepresentable;

pub(crate) type Record = BTreeMap<String, Scalar>;

pub(crate) fn records_to_set(records: Vec<Record>) -> ElementSet {
    records
        .into_iter()
        .enumerate()
        .flat_map(|(row, rec)| {
            rec.into_iter()
                .map(move |(field, value)| Element::field(row, field, value))
        })
        .collect()
}

/// Regroups fields into rows `0..n` with identical field names.
pub(crate) fn set_to_records(set: &ElementSet) -> Result<Vec<Record>, Unrepresentable> {
    let mut rows: BTreeMap<usize, Record> = BTreeMap::new();
    for element in set {
        let Element::RecordField { row, field, value } = element else {
            return Err(Unrepresentable::new(element, "tabular formalisms hold record fields only"));
        };
        if let Scalar::Float(f) = value {
            if !f.is_finite() {
                return Err(Unrepresentable::new(element, "non-finite numbers have no text form"));
            }
        }
        let rec = rows.entry(*row).or_default();
        if rec.insert(field.clone(), value.clone()).is_some() {
            return Err(Unrepresentable::new(element, "a field holds two values in the same row"));
        }
    }
    let mut out = Vec::with_capacity(rows.len());
    for (expected, (row, rec)) in rows.into_iter().enumerate() {
        if row != expected {
            let first = rec.iter().next().map(|(f, v)| Element::field(row, f, v.clone()));
            return Err(Unrepresentable::new(
                &first.expect("rows are created non-empty"),
                format!("row indices must be contiguous from 0, missing row {expected}"),
            ));
        }
        if let Some(head) = out.first() {
            let head: &Record = head;
            if !head.keys().eq(rec.keys()) {
                let (f, v) = rec.iter().next().expect("rows are created non-empty");
                return Err(Unrepresentable::new(
                    &Element::field(row, f, v.clone()),
                    "records must share one set of field names",
                ));
            }
        }
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_in_rows_is_rejected() {
        let set: ElementSet = [
            Element::field(0, "a", Scalar::Int(1)),
            Element::field(2, "a", Scalar::Int(2)),
        ]
        .into_iter()
        .collect();
        assert!(set_to_records(&set).is_err());
    }

    #[test]
    fn heterogeneous_rows_are_rejected() {
        let set: ElementSet = [
            Element::field(0, "a", Scalar::Int(1)),
            Element::field(1, "b", Scalar::Int(2)),
        ]
        .into_iter()
        .collect();
        assert!(set_to_records(&set).is_err());
    }
}
