//! `er-mini`: entities with exactly one key attribute, and binary relationships.
//!
//! ```text
//! schema := {entity | rel}
//! entity := "entity" IDENT "{" {["key"] IDENT ":" TYPE ";"} "}"
//! rel    := "rel" IDENT "(" IDENT "," IDENT ")" ";"
//! ```

use std::collections::BTreeSet;
use std::sync::Arc;

use super::lex::{check_balance, tokenize, Cursor, LexOptions};
use super::uml::{attributes_by_owner, check_name};
use crate::diagnostic::{codes, Diagnostic, Location};
use crate::element::{Element, ElementSet};
use crate::formalism::{Codec, Formalism, FormalismId, Unrepresentable};

pub const ID: &str = "er-mini";

const RESERVED: &[&str] = &["entity", "rel", "key"];

const GRAMMAR: &str = "schema := {entity | rel}\n\
entity := \"entity\" IDENT \"{\" {[\"key\"] IDENT \":\" TYPE \";\"} \"}\"\n\
rel := \"rel\" IDENT \"(\" IDENT \",\" IDENT \")\" \";\"\n\
every entity has exactly one key attribute; comments start with #";

pub fn formalism() -> Formalism {
    Formalism {
        id: FormalismId::known(ID),
        display_name: "Entity-relationship (mini)".into(),
        description: "Entities with one key attribute each, binary relationships".into(),
        codec: Arc::new(ErCodec),
    }
}

struct AttrDecl {
    name: String,
    type_name: String,
    is_key: bool,
    loc: Location,
}

struct EntityDecl {
    name: String,
    loc: Location,
    attrs: Vec<AttrDecl>,
}

struct RelDecl {
    name: String,
    ends: [(String, Location); 2],
}

struct Schema {
    entities: Vec<EntityDecl>,
    rels: Vec<RelDecl>,
}

fn parse_schema(content: &str) -> Result<Schema, Diagnostic> {
    let tokens = tokenize(
        content,
        &LexOptions {
            comment: Some('#'),
            dollar_vars: false,
        },
    )?;
    check_balance(&tokens)?;
    let mut cur = Cursor::new(&tokens, content);
    let mut schema = Schema {
        entities: Vec::new(),
        rels: Vec::new(),
    };
    while !cur.at_end() {
        if cur.eat_keyword("entity") {
            let (name, loc) = cur.expect_ident("an entity name after `entity`", RESERVED)?;
            cur.expect_punct("{")?;
            let mut attrs = Vec::new();
            while !cur.eat_punct("}") {
                let loc = cur.loc();
                let is_key = cur.eat_keyword("key");
                let (attr, _) = cur.expect_ident("an attribute name", RESERVED)?;
                cur.expect_punct(":")?;
                let (ty, _) = cur.expect_ident("an attribute type", RESERVED)?;
                cur.expect_punct(";")?;
                attrs.push(AttrDecl {
                    name: attr,
                    type_name: ty,
                    is_key,
                    loc,
                });
            }
            schema.entities.push(EntityDecl { name, loc, attrs });
        } else if cur.eat_keyword("rel") {
            let (name, _) = cur.expect_ident("a relationship name after `rel`", RESERVED)?;
            cur.expect_punct("(")?;
            let a = cur.expect_ident("an entity name", RESERVED)?;
            cur.expect_punct(",")?;
            let b = cur.expect_ident("an entity name", RESERVED)?;
            cur.expect_punct(")")?;
            cur.expect_punct(";")?;
            schema.rels.push(RelDecl { name, ends: [a, b] });
        } else {
            return Err(cur.unexpected("`entity` or `rel`"));
        }
    }
    Ok(schema)
}

fn lower(schema: &Schema) -> ElementSet {
    let mut set = ElementSet::new();
    for entity in &schema.entities {
        set.insert(Element::entity(&entity.name));
        for a in &entity.attrs {
            set.insert(Element::attribute(&entity.name, &a.name, &a.type_name, a.is_key));
        }
    }
    for rel in &schema.rels {
        set.insert(Element::relation(
            &rel.name,
            rel.ends.iter().map(|(n, _)| n.clone()).collect(),
            None,
        ));
    }
    set
}

fn structural(schema: &Schema) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for entity in &schema.entities {
        if !seen.insert(entity.name.as_str()) {
            out.push(
                Diagnostic::error(
                    codes::ER_DUPLICATE_ENTITY,
                    format!("entity {} is declared more than once", entity.name),
                )
                .at(entity.loc),
            );
        }
        let mut names = BTreeSet::new();
        for a in &entity.attrs {
            if !names.insert(a.name.as_str()) {
                out.push(
                    Diagnostic::error(
                        codes::ER_DUPLICATE_ATTRIBUTE,
                        format!("attribute {} appears twice in entity {}", a.name, entity.name),
                    )
                    .at(a.loc),
                );
            }
        }
        let keys: Vec<_> = entity.attrs.iter().filter(|a| a.is_key).collect();
        match keys.len() {
            1 => {}
            0 => out.push(
                Diagnostic::error(
                    codes::ER_MISSING_KEY,
                    format!("entity {} has no key attribute", entity.name),
                )
                .at(entity.loc)
                .with_hint("mark exactly one attribute with `key`"),
            ),
            n => out.push(
                Diagnostic::error(
                    codes::ER_MULTIPLE_KEYS,
                    format!("entity {} has {n} key attributes", entity.name),
                )
                .at(keys[1].loc),
            ),
        }
    }
    for rel in &schema.rels {
        for (end, loc) in &rel.ends {
            if !seen.contains(end.as_str()) {
                out.push(
                    Diagnostic::error(
                        codes::ER_UNKNOWN_ENTITY,
                        format!("relationship {} refers to undeclared entity {end}", rel.name),
                    )
                    .at(*loc),
                );
            }
        }
    }
    out
}

struct ErCodec;

impl Codec for ErCodec {
    fn parse(&self, content: &str) -> Result<ElementSet, Vec<Diagnostic>> {
        parse_schema(content).map(|s| lower(&s)).map_err(|d| vec![d])
    }

    fn validate(&self, content: &str) -> Vec<Diagnostic> {
        match parse_schema(content) {
            Ok(schema) => structural(&schema),
            Err(d) => vec![d],
        }
    }

    fn render(&self, set: &ElementSet) -> Result<String, Unrepresentable> {
        let mut rels = Vec::new();
        for element in set {
            match element {
                Element::EntityDef { name } => check_name(element, name, RESERVED)?,
                Element::AttributeDef { name, type_name, .. } => {
                    check_name(element, name, RESERVED)?;
                    check_name(element, type_name, RESERVED)?;
                }
                Element::RelationDef {
                    name,
                    endpoints,
                    cardinality,
                } => {
                    if endpoints.len() != 2 {
                        return Err(Unrepresentable::new(element, "relationships are binary"));
                    }
                    if cardinality.is_some() {
                        return Err(Unrepresentable::new(element, "er-mini has no multiplicities"));
                    }
                    check_name(element, name, RESERVED)?;
                    for end in endpoints {
                        check_name(element, end, RESERVED)?;
                    }
                    rels.push(element);
                }
                Element::RuleDef { .. } | Element::RecordField { .. } => {
                    return Err(Unrepresentable::new(
                        element,
                        "er-mini is a schema formalism without rules or records",
                    ))
                }
            }
        }
        let mut out = String::new();
        for (entity, attrs) in attributes_by_owner(set)? {
            let keys = attrs
                .iter()
                .filter(|a| matches!(a, Element::AttributeDef { is_key: true, .. }))
                .count();
            if keys != 1 {
                return Err(Unrepresentable::new(
                    &Element::entity(entity),
                    format!("entity needs exactly one key attribute, has {keys}"),
                ));
            }
            out.push_str(&format!("entity {entity} {{\n"));
            for attr in attrs {
                if let Element::AttributeDef {
                    name,
                    type_name,
                    is_key,
                    ..
                } = attr
                {
                    let key = if *is_key { "key " } else { "" };
                    out.push_str(&format!("  {key}{name}: {type_name};\n"));
                }
            }
            out.push_str("}\n");
        }
        for rel in rels {
            if let Element::RelationDef { name, endpoints, .. } = rel {
                out.push_str(&format!("rel {name}({}, {});\n", endpoints[0], endpoints[1]));
            }
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
    fn one_key_is_valid() {
        assert!(codec()
            .validate("entity A {\n  key id: int;\n  name: text;\n}")
            .is_empty());
    }

    #[test]
    fn zero_keys_is_reported() {
        let diags = codec().validate("entity A { name: text; }");
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, codes::ER_MISSING_KEY);
        assert_eq!(diags[0].location.unwrap().line, 1);
    }

    #[test]
    fn two_keys_and_unknown_endpoint() {
        let diags = codec().validate("entity A { key a: int; key b: int; }\nrel r(A, B);");
        let found: Vec<_> = diags.iter().map(|d| d.code).collect();
        assert_eq!(found, vec![codes::ER_MULTIPLE_KEYS, codes::ER_UNKNOWN_ENTITY]);
    }

    #[test]
    fn keyless_entity_cannot_render() {
        let set: ElementSet = [Element::entity("A")].into_iter().collect();
        let err = codec().render(&set).unwrap_err();
        assert_eq!(err.element, Element::entity("A"));
    }

    #[test]
    fn keyed_entity_round_trips() {
        let set: ElementSet = [
            Element::entity("A"),
            Element::attribute("A", "id", "int", true),
        ]
        .into_iter()
        .collect();
        let text = codec().render(&set).unwrap();
        assert_eq!(text, "entity A {\n  key id: int;\n}\n");
        assert_eq!(codec().parse(&text).unwrap(), set);
    }

    #[test]
    fn relationship_syntax() {
        let set = codec()
            .parse("entity A { key id: int; }\nentity B { key id: int; }\nrel owns(A, B);")
            .unwrap();
        assert!(set.contains(&Element::relation("owns", vec!["A".into(), "B".into()], None)));
        let diags = codec().parse("rel owns(A B);").unwrap_err();
        assert_eq!(diags[0].code, codes::SYNTAX_UNEXPECTED_TOKEN);
    }
}
