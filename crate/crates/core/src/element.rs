//! Canonical, order-insensitive content of an artifact.
//!
//! Every codec lowers its surface syntax into an [`ElementSet`]. Two artifacts
//! in different formalisms carry "the same content" exactly when their
//! element sets are equal, which is what the fidelity module measures.

use std::collections::BTreeSet;
use std::fmt;

use ordered_float::OrderedFloat;

/// A scalar value held by a tabular record field.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scalar {
    Null,
    Bool(bool),
    Int(i64),
    Float(OrderedFloat<f64>),
    Text(String),
}

impl Scalar {
    pub fn float(v: f64) -> Self {
        Scalar::Float(OrderedFloat(v))
    }

    pub fn text(v: impl Into<String>) -> Self {
        Scalar::Text(v.into())
    }

    /// Name of the scalar's type as used by `cast` in conversion scripts.
    pub fn type_name(&self) -> &'static str {
        match self {
            Scalar::Null => "null",
            Scalar::Bool(_) => "bool",
            Scalar::Int(_) => "int",
            Scalar::Float(_) => "float",
            Scalar::Text(_) => "text",
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Null => f.write_str("null"),
            Scalar::Bool(b) => write!(f, "{b}"),
            Scalar::Int(i) => write!(f, "{i}"),
            Scalar::Float(x) => f.write_str(&format_float(x.0)),
            Scalar::Text(s) => write!(f, "{s:?}"),
        }
    }
}

/// Shortest round-tripping decimal form that always reads back as a float.
pub(crate) fn format_float(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'E']) || !v.is_finite() {
        s
    } else {
        format!("{s}.0")
    }
}

/// A logic term: a variable or a constant symbol.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn constant(name: impl Into<String>) -> Self {
        Term::Const(name.into())
    }
}

/// A positive atom `pred(t1, ..., tn)`; zero-arity atoms are propositions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Self {
            predicate: predicate.into(),
            args,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, arg) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                match arg {
                    Term::Var(v) => write!(f, "?{v}")?,
                    Term::Const(c) => f.write_str(c)?,
                }
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Association multiplicity `[min..max]`; `max = None` means `*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cardinality {
    pub min: u32,
    pub max: Option<u32>,
}

impl fmt::Display for Cardinality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.max {
            Some(max) => write!(f, "{}..{}", self.min, max),
            None => write!(f, "{}..*", self.min),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Element {
    EntityDef {
        name: String,
    },
    AttributeDef {
        owner: String,
        name: String,
        type_name: String,
        is_key: bool,
    },
    RelationDef {
        name: String,
        endpoints: Vec<String>,
        cardinality: Option<Cardinality>,
    },
    RuleDef {
        name: String,
        antecedents: Vec<Atom>,
        consequents: Vec<Atom>,
    },
    RecordField {
        row: usize,
        field: String,
        value: Scalar,
    },
}

/// What kind of element, used to group elements and for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementKind {
    Entity,
    Attribute,
    Relation,
    Rule,
    Field,
}

/// Identity of an element independent of its payload: `(kind, owner, name)`.
///
/// Two elements with the same key but different payloads are a mutation of
/// one another rather than an unrelated missing/fabricated pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ElementKey {
    pub kind: ElementKind,
    pub owner: String,
    pub name: String,
}

impl Element {
    pub fn entity(name: impl Into<String>) -> Self {
        Element::EntityDef { name: name.into() }
    }

    pub fn attribute(
        owner: impl Into<String>,
        name: impl Into<String>,
        type_name: impl Into<String>,
        is_key: bool,
    ) -> Self {
        Element::AttributeDef {
            owner: owner.into(),
            name: name.into(),
            type_name: type_name.into(),
            is_key,
        }
    }

    pub fn relation(
        name: impl Into<String>,
        endpoints: Vec<String>,
        cardinality: Option<Cardinality>,
    ) -> Self {
        Element::RelationDef {
            name: name.into(),
            endpoints,
            cardinality,
        }
    }

    pub fn rule(name: impl Into<String>, antecedents: Vec<Atom>, consequents: Vec<Atom>) -> Self {
        Element::RuleDef {
            name: name.into(),
            antecedents,
            consequents,
        }
    }

    pub fn field(row: usize, field: impl Into<String>, value: Scalar) -> Self {
        Element::RecordField {
            row,
            field: field.into(),
            value,
        }
    }

    pub fn kind(&self) -> ElementKind {
        match self {
            Element::EntityDef { .. } => ElementKind::Entity,
            Element::AttributeDef { .. } => ElementKind::Attribute,
            Element::RelationDef { .. } => ElementKind::Relation,
            Element::RuleDef { .. } => ElementKind::Rule,
            Element::RecordField { .. } => ElementKind::Field,
        }
    }

    /// The element's own name (attribute, field, entity, relation or rule name).
    pub fn name(&self) -> &str {
        match self {
            Element::EntityDef { name }
            | Element::AttributeDef { name, .. }
            | Element::RelationDef { name, .. }
            | Element::RuleDef { name, .. } => name,
            Element::RecordField { field, .. } => field,
        }
    }

    pub fn key(&self) -> ElementKey {
        let owner = match self {
            Element::AttributeDef { owner, .. } => owner.clone(),
            Element::RecordField { row, .. } => row.to_string(),
            _ => String::new(),
        };
        ElementKey {
            kind: self.kind(),
            owner,
            name: self.name().to_string(),
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::EntityDef { name } => write!(f, "EntityDef({name})"),
            Element::AttributeDef {
                owner,
                name,
                type_name,
                is_key,
            } => write!(f, "AttributeDef({owner},{name},{type_name},{is_key})"),
            Element::RelationDef {
                name,
                endpoints,
                cardinality,
            } => {
                write!(f, "RelationDef({name},[{}]", endpoints.join(","))?;
                if let Some(c) = cardinality {
                    write!(f, ",{c}")?;
                }
                f.write_str(")")
            }
            Element::RuleDef {
                name,
                antecedents,
                consequents,
            } => {
                let join = |atoms: &[Atom]| {
                    atoms
                        .iter()
                        .map(ToString::to_string)
                        .collect::<Vec<_>>()
                        .join(" & ")
                };
                write!(
                    f,
                    "RuleDef({name},[{}],[{}])",
                    join(antecedents),
                    join(consequents)
                )
            }
            Element::RecordField { row, field, value } => {
                write!(f, "RecordField({row},{field},{value})")
            }
        }
    }
}

/// A finite set of elements with set semantics.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ElementSet {
    elements: BTreeSet<Element>,
}

impl ElementSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts an element; returns `false` if it was already present.
    pub fn insert(&mut self, element: Element) -> bool {
        self.elements.insert(element)
    }

    pub fn remove(&mut self, element: &Element) -> bool {
        self.elements.remove(element)
    }

    pub fn contains(&self, element: &Element) -> bool {
        self.elements.contains(element)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Element> {
        self.elements.iter()
    }

    pub fn entities(&self) -> impl Iterator<Item = &str> {
        self.elements.iter().filter_map(|e| match e {
            Element::EntityDef { name } => Some(name.as_str()),
            _ => None,
        })
    }

    pub fn has_entity(&self, name: &str) -> bool {
        self.elements.contains(&Element::entity(name))
    }

    pub fn retain(&mut self, f: impl FnMut(&Element) -> bool) {
        self.elements.retain(f);
    }

    pub fn intersection_len(&self, other: &ElementSet) -> usize {
        self.elements.intersection(&other.elements).count()
    }

    pub fn union_len(&self, other: &ElementSet) -> usize {
        self.len() + other.len() - self.intersection_len(other)
    }

    /// Elements of `self` that are not in `other`, in canonical order.
    pub fn difference<'a>(&'a self, other: &'a ElementSet) -> impl Iterator<Item = &'a Element> {
        self.elements.difference(&other.elements)
    }
}

impl FromIterator<Element> for ElementSet {
    fn from_iter<I: IntoIterator<Item = Element>>(iter: I) -> Self {
        Self {
            elements: iter.into_iter().collect(),
        }
    }
}

impl IntoIterator for ElementSet {
    type Item = Element;
    type IntoIter = std::collections::btree_set::IntoIter<Element>;

    fn into_iter(self) -> Self::IntoIter {
        self.elements.into_iter()
    }
}

impl<'a> IntoIterator for &'a ElementSet {
    type Item = &'a Element;
    type IntoIter = std::collections::btree_set::Iter<'a, Element>;

    fn into_iter(self) -> Self::IntoIter {
        self.elements.iter()
    }
}

impl Extend<Element> for ElementSet {
    fn extend<I: IntoIterator<Item = Element>>(&mut self, iter: I) {
        self.elements.extend(iter);
    }
}
