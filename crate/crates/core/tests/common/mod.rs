//! Shared fixtures and element-set generators for integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use ftg_core::element::{Atom, Cardinality, Element, ElementSet, Scalar, Term};
use ftg_core::{Artifact, FormalismId};
use proptest::prelude::*;

pub fn fixtures() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures"))
}

pub fn id(s: &str) -> FormalismId {
    FormalismId::new(s).unwrap()
}

pub fn fixture(name: &str, formalism: &str) -> Artifact {
    let text = std::fs::read_to_string(fixtures().join(name)).unwrap();
    Artifact::authored(id(formalism), text)
}

/// The 20 tab-json corpus files, in name order.
pub fn tab_corpus() -> Vec<Artifact> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(fixtures().join("tab"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| Artifact::authored(id("tab-json"), std::fs::read_to_string(p).unwrap()))
        .collect()
}

const CLASSES: &[&str] = &["Person", "Order", "Item", "Shop", "Account", "Invoice"];
const ATTRS: &[&str] = &["name", "total", "count", "code", "created", "flag", "note"];
const TYPES: &[&str] = &["int", "text", "float", "bool", "date"];
const RELS: &[&str] = &["owns", "places", "holds", "pays", "lists"];

/// Subset of `pool` with at least `min` members, in pool order.
fn subset(pool: &'static [&'static str], min: usize) -> impl Strategy<Value = Vec<&'static str>> {
    prop::collection::vec(any::<bool>(), pool.len()).prop_filter_map("too few", move |mask| {
        let picked: Vec<&str> = pool.iter().zip(mask).filter(|(_, m)| *m).map(|(n, _)| *n).collect();
        (picked.len() >= min).then_some(picked)
    })
}

fn schema(with_keys: bool, with_cardinality: bool) -> impl Strategy<Value = ElementSet> {
    subset(CLASSES, 1).prop_flat_map(move |classes| {
        let n = classes.len();
        let attrs = prop::collection::vec((subset(ATTRS, 0), prop::collection::vec(0..TYPES.len(), ATTRS.len())), n);
        let rels = prop::collection::vec((0..n, 0..n, 0u32..3, prop::option::of(0u32..3)), 0..RELS.len());
        (Just(classes), attrs, rels).prop_map(move |(classes, attrs, rels)| {
            let mut s = ElementSet::new();
            for (class, (names, types)) in classes.iter().zip(attrs) {
                s.insert(Element::entity(*class));
                if with_keys {
                    s.insert(Element::attribute(*class, "id", "int", true));
                }
                for (name, ty) in names.iter().zip(types) {
                    s.insert(Element::attribute(*class, *name, TYPES[ty], false));
                }
            }
            for (i, (a, b, min, extra)) in rels.into_iter().enumerate() {
                let cardinality = with_cardinality.then(|| Cardinality {
                    min,
                    max: extra.map(|e| (min + e).max(1)),
                });
                s.insert(Element::RelationDef {
                    name: RELS[i].into(),
                    endpoints: vec![classes[a].into(), classes[b].into()],
                    cardinality,
                });
            }
            s
        })
    })
}

pub fn uml_set() -> impl Strategy<Value = ElementSet> {
    schema(false, true)
}

pub fn er_set() -> impl Strategy<Value = ElementSet> {
    schema(true, false)
}

const PREDICATES: &[&str] = &["p", "q", "r", "s", "member"];
const VARS: &[&str] = &["x", "y", "z"];
const CONSTS: &[&str] = &["a", "b", "c"];

fn atom(vars: usize) -> impl Strategy<Value = Atom> {
    (0..PREDICATES.len(), prop::collection::vec((any::<bool>(), 0usize..3), 1..3)).prop_map(move |(p, args)| {
        let args = args
            .into_iter()
            .map(|(is_var, i)| {
                if is_var && vars > 0 {
                    Term::var(VARS[i % vars])
                } else {
                    Term::constant(CONSTS[i])
                }
            })
            .collect();
        Atom::new(PREDICATES[p], args)
    })
}

/// Horn rules whose conclusions only use premise variables. `max_heads`
/// bounds the number of consequents.
fn rules(max_heads: usize) -> impl Strategy<Value = ElementSet> {
    let rule = (1usize..=VARS.len(), 1usize..=max_heads).prop_flat_map(|(vars, heads)| {
        (prop::collection::vec(atom(vars), 1..3), prop::collection::vec(atom(0), heads), prop::collection::vec(0..vars, heads))
    });
    prop::collection::vec(rule, 0..5).prop_map(|rules| {
        let mut s = ElementSet::new();
        for (i, (ante, mut heads, picks)) in rules.into_iter().enumerate() {
            let bound: Vec<Term> = ante.iter().flat_map(|a| a.args.clone()).filter(|t| matches!(t, Term::Var(_))).collect();
            for (h, pick) in heads.iter_mut().zip(picks) {
                if let Some(v) = bound.get(pick % bound.len().max(1)) {
                    h.args[0] = v.clone();
                }
            }
            let name = if i % 2 == 0 { format!("rule{i}") } else { format!("r{}", i + 1) };
            s.insert(Element::rule(name, ante, heads));
        }
        s
    })
}

pub fn p9_set() -> impl Strategy<Value = ElementSet> {
    rules(2)
}

pub fn pk_set() -> impl Strategy<Value = ElementSet> {
    rules(1)
}

fn scalar() -> impl Strategy<Value = Scalar> {
    prop_oneof![
        Just(Scalar::Null),
        any::<bool>().prop_map(Scalar::Bool),
        (-1000i64..1000).prop_map(Scalar::Int),
        (-400i32..400).prop_map(|q| Scalar::float(q as f64 / 8.0)),
        prop::sample::select(vec!["", "ada", "a,b", "say \"hi\"", "12", "true", "null", " x ", "1.5"]).prop_map(Scalar::text),
    ]
}

pub fn tab_set() -> impl Strategy<Value = ElementSet> {
    (1usize..4, 0usize..5).prop_flat_map(|(cols, rows)| {
        prop::collection::vec(scalar(), cols * rows).prop_map(move |values| {
            let mut s = ElementSet::new();
            for (i, v) in values.into_iter().enumerate() {
                s.insert(Element::field(i / cols, format!("col{}", i % cols), v));
            }
            s
        })
    })
}
