//! Six desk-scale formalisms with grammars, codecs and structural validators.
//!
//! | id         | content                                       |
//! |------------|-----------------------------------------------|
//! | `uml-mini` | classes, attributes, binary associations      |
//! | `er-mini`  | entities with exactly one key, relationships  |
//! | `fol-p9`   | Prover9-style formulas (Horn rules canonical) |
//! | `fol-pk`   | Pyke-style `rule NAME: if .. then ..`         |
//! | `tab-json` | array of flat homogeneous JSON objects        |
//! | `tab-csv`  | header plus typed comma-separated rows        |
//!
//! A seventh, non-built-in formalism [`NL_ID`] carries free natural-language
//! text; it has no canonical elements and exists so that requests can be
//! planned from and verbalizations planned to.

pub(crate) mod lex;

pub mod er;
pub mod fol_p9;
pub mod fol_pk;
mod tab;
pub mod tab_csv;
pub mod tab_json;
pub mod uml;

use std::sync::Arc;

use crate::diagnostic::Diagnostic;
use crate::element::ElementSet;
use crate::formalism::{Codec, Formalism, FormalismId, Registry, Unrepresentable};

pub const NL_ID: &str = "nl";

pub const BUILTIN_IDS: [&str; 6] = [uml::ID, er::ID, fol_p9::ID, fol_pk::ID, tab_json::ID, tab_csv::ID];

pub fn builtin_codecs() -> Vec<Formalism> {
    vec![
        uml::formalism(),
        er::formalism(),
        fol_p9::formalism(),
        fol_pk::formalism(),
        tab_json::formalism(),
        tab_csv::formalism(),
    ]
}

/// Registry holding exactly the six built-ins.
pub fn builtin_registry() -> Registry {
    let mut registry = Registry::new();
    for f in builtin_codecs() {
        registry.register(f).expect("built-in ids are distinct");
    }
    registry
}

/// Built-ins plus the natural-language node.
pub fn standard_registry() -> Registry {
    let mut registry = builtin_registry();
    registry
        .register(natural_language())
        .expect("nl is not a built-in id");
    registry
}

pub fn natural_language() -> Formalism {
    Formalism {
        id: FormalismId::known(NL_ID),
        display_name: "Natural language".into(),
        description: "Free text; always valid, carries no canonical elements".into(),
        codec: Arc::new(PlainText),
    }
}

struct PlainText;

impl Codec for PlainText {
    fn parse(&self, _content: &str) -> Result<ElementSet, Vec<Diagnostic>> {
        Ok(ElementSet::new())
    }

    fn render(&self, set: &ElementSet) -> Result<String, Unrepresentable> {
        match set.iter().next() {
            None => Ok(String::new()),
            Some(e) => Err(Unrepresentable::new(e, "natural language has no canonical rendering")),
        }
    }

    fn grammar(&self) -> &'static str {
        "free-form natural-language text"
    }
}

/// A small valid artifact per built-in, used to certify conversion scripts.
pub fn probe_fixture(id: &FormalismId) -> Option<&'static str> {
    Some(match id.as_str() {
        uml::ID => "class Person {\n  name: text;\n}\nclass Pet {\n  species: text;\n}\nPerson -- Pet : owns [0..*];\n",
        er::ID => "entity Person {\n  key id: int;\n  name: text;\n}\nentity Pet {\n  key id: int;\n}\nrel owns(Person, Pet);\n",
        fol_p9::ID => "all x (man(x) -> mortal(x)).\nall x all y (parent(x,y) & man(x) -> father(x,y)).\n",
        fol_pk::ID => "rule r1: if man($x) then mortal($x)\nrule r2: if parent($x, $y) & man($x) then father($x, $y)\n",
        tab_json::ID => "[\n  {\"id\": 1, \"name\": \"ada\", \"score\": 9.5},\n  {\"id\": 2, \"name\": \"bob\", \"score\": 7.0}\n]\n",
        tab_csv::ID => "id,name,score\n1,ada,9.5\n2,bob,7.0\n",
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_builtins() {
        assert_eq!(builtin_codecs().len(), 6);
        assert_eq!(builtin_registry().len(), 6);
        assert_eq!(standard_registry().len(), 7);
    }

    #[test]
    fn probes_validate_and_round_trip() {
        let registry = builtin_registry();
        for id in registry.ids() {
            let codec = &registry.get(id).unwrap().codec;
            let probe = probe_fixture(id).unwrap();
            assert!(codec.validate(probe).is_empty(), "{id} probe invalid");
            let set = codec.parse(probe).unwrap();
            assert!(!set.is_empty());
            assert_eq!(codec.parse(&codec.render(&set).unwrap()).unwrap(), set, "{id}");
        }
    }

    #[test]
    fn natural_language_accepts_anything() {
        let nl = natural_language();
        assert!(nl.codec.validate("merge these {{{ ontologies").is_empty());
        assert!(nl.codec.parse("anything").unwrap().is_empty());
    }
}
