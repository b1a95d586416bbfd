//! `uml-mini`: classes with typed attributes and binary associations.
//!
//! ```text
//! model := {class | assoc}
//! class := "class" IDENT "{" {IDENT ":" TYPE ";"} "}"
//! assoc := IDENT "--" IDENT ":" IDENT ["[" INT ".." (INT | "*") "]"] ";"
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::lex::{check_balance, is_ident, tokenize, Cursor, LexOptions};
use crate::diagnostic::{codes, Diagnostic, Location};
use crate::element::{Cardinality, Element, ElementSet};
use crate::formalism::{Codec, Formalism, FormalismId, Unrepresentable};

pub const ID: &str = "uml-mini";

const RESERVED: &[&str] = &["class"];

const GRAMMAR: &str = "model := {class | assoc}\n\
class := \"class\" IDENT \"{\" {IDENT \":\" TYPE \";\"} \"}\"\n\
assoc := IDENT \"--\" IDENT \":\" IDENT [\"[\" INT \"..\" (INT | \"*\") \"]\"] \";\"\n\
comments start with #";

pub fn formalism() -> Formalism {
    Formalism {
        id: FormalismId::known(ID),
        display_name: "UML (mini)".into(),
        description: "Class models: classes, typed attributes, binary associations".into(),
        codec: Arc::new(UmlCodec),
    }
}

struct ClassDecl {
    name: String,
    loc: Location,
    attrs: Vec<(String, String, Location)>,
}

struct AssocDecl {
    from: (String, Location),
    to: (String, Location),
    name: String,
    cardinality: Option<(Cardinality, Location)>,
}

struct Model {
    classes: Vec<ClassDecl>,
    assocs: Vec<AssocDecl>,
}

fn parse_model(content: &str) -> Result<Model, Diagnostic> {
    let tokens = tokenize(
        content,
        &LexOptions {
            comment: Some('#'),
            dollar_vars: false,
        },
    )?;
    check_balance(&tokens)?;
    let mut cur = Cursor::new(&tokens, content);
    let mut model = Model {
        classes: Vec::new(),
        assocs: Vec::new(),
    };
    while !cur.at_end() {
        if cur.is_keyword("class") {
            model.classes.push(parse_class(&mut cur)?);
        } else {
            model.assocs.push(parse_assoc(&mut cur)?);
        }
    }
    Ok(model)
}

fn parse_class(cur: &mut Cursor<'_>) -> Result<ClassDecl, Diagnostic> {
    cur.expect_keyword("class")?;
    let (name, loc) = cur.expect_ident("a class name after `class`", RESERVED)?;
    cur.expect_punct("{")?;
    let mut attrs = Vec::new();
    while !cur.eat_punct("}") {
        let (attr, loc) = cur.expect_ident("an attribute name", RESERVED)?;
        cur.expect_punct(":")?;
        let (ty, _) = cur.expect_ident("an attribute type", RESERVED)?;
        cur.expect_punct(";")?;
        attrs.push((attr, ty, loc));
    }
    Ok(ClassDecl { name, loc, attrs })
}

fn parse_assoc(cur: &mut Cursor<'_>) -> Result<AssocDecl, Diagnostic> {
    let from = cur.expect_ident("`class` or an association", RESERVED)?;
    cur.expect_punct("--")?;
    let to = cur.expect_ident("the association's target class", RESERVED)?;
    cur.expect_punct(":")?;
    let (name, _) = cur.expect_ident("the association name", RESERVED)?;
    let mut cardinality = None;
    if cur.is_punct("[") {
        let loc = cur.expect_punct("[")?;
        let (min, _) = cur.expect_int()?;
        cur.expect_punct("..")?;
        let max = if cur.eat_punct("*") {
            None
        } else {
            Some(cur.expect_int()?.0)
        };
        cur.expect_punct("]")?;
        cardinality = Some((Cardinality { min, max }, loc));
    }
    cur.expect_punct(";")?;
    Ok(AssocDecl {
        from,
        to,
        name,
        cardinality,
    })
}

fn lower(model: &Model) -> ElementSet {
    let mut set = ElementSet::new();
    for class in &model.classes {
        set.insert(Element::entity(&class.name));
        for (attr, ty, _) in &class.attrs {
            set.insert(Element::attribute(&class.name, attr, ty, false));
        }
    }
    for assoc in &model.assocs {
        set.insert(Element::relation(
            &assoc.name,
            vec![assoc.from.0.clone(), assoc.to.0.clone()],
            assoc.cardinality.map(|(c, _)| c),
        ));
    }
    set
}

fn structural(model: &Model) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for class in &model.classes {
        if !seen.insert(class.name.as_str()) {
            out.push(
                Diagnostic::error(
                    codes::UML_DUPLICATE_CLASS,
                    format!("class {} is declared more than once", class.name),
                )
                .at(class.loc),
            );
        }
        let mut attrs = BTreeSet::new();
        for (attr, _, loc) in &class.attrs {
            if !attrs.insert(attr.as_str()) {
                out.push(
                    Diagnostic::error(
                        codes::UML_DUPLICATE_ATTRIBUTE,
                        format!("attribute {attr} appears twice in class {}", class.name),
                    )
                    .at(*loc),
                );
            }
        }
    }
    for assoc in &model.assocs {
        for (end, loc) in [&assoc.from, &assoc.to] {
            if !seen.contains(end.as_str()) {
                out.push(
                    Diagnostic::error(
                        codes::UML_UNKNOWN_CLASS,
                        format!("association {} refers to undeclared class {end}", assoc.name),
                    )
                    .at(*loc)
                    .with_hint(format!("declare `class {end} {{ }}`")),
                );
            }
        }
        if let Some((Cardinality { min, max: Some(max) }, loc)) = assoc.cardinality {
            if min > max {
                out.push(
                    Diagnostic::error(
                        codes::UML_BAD_CARDINALITY,
                        format!("multiplicity {min}..{max} has min above max"),
                    )
                    .at(loc),
                );
            }
        }
    }
    out
}

pub(crate) fn check_name(element: &Element, name: &str, reserved: &[&str]) -> Result<(), Unrepresentable> {
    if is_ident(name) && !reserved.contains(&name) {
        Ok(())
    } else {
        Err(Unrepresentable::new(
            element,
            format!("`{name}` is not a usable identifier"),
        ))
    }
}

/// Groups attributes under their owning entity, rejecting orphans.
pub(crate) fn attributes_by_owner(
    set: &ElementSet,
) -> Result<BTreeMap<&str, Vec<&Element>>, Unrepresentable> {
    let mut by_owner: BTreeMap<&str, Vec<&Element>> =
        set.entities().map(|name| (name, Vec::new())).collect();
    for element in set {
        if let Element::AttributeDef { owner, .. } = element {
            match by_owner.get_mut(owner.as_str()) {
                Some(list) => list.push(element),
                None => {
                    return Err(Unrepresentable::new(
                        element,
                        format!("owner {owner} is not an entity in the set"),
                    ))
                }
            }
        }
    }
    Ok(by_owner)
}

struct UmlCodec;

impl Codec for UmlCodec {
    fn parse(&self, content: &str) -> Result<ElementSet, Vec<Diagnostic>> {
        parse_model(content).map(|m| lower(&m)).map_err(|d| vec![d])
    }

    fn validate(&self, content: &str) -> Vec<Diagnostic> {
        match parse_model(content) {
            Ok(model) => structural(&model),
            Err(d) => vec![d],
        }
    }

    fn render(&self, set: &ElementSet) -> Result<String, Unrepresentable> {
        let mut relations = Vec::new();
        for element in set {
            match element {
                Element::EntityDef { name } => check_name(element, name, RESERVED)?,
                Element::AttributeDef {
                    name,
                    type_name,
                    is_key,
                    ..
                } => {
                    if *is_key {
                        return Err(Unrepresentable::new(element, "uml-mini has no key attributes"));
                    }
                    check_name(element, name, RESERVED)?;
                    check_name(element, type_name, RESERVED)?;
                }
                Element::RelationDef {
                    name, endpoints, ..
                } => {
                    if endpoints.len() != 2 {
                        return Err(Unrepresentable::new(element, "associations are binary"));
                    }
                    check_name(element, name, RESERVED)?;
                    for end in endpoints {
                        check_name(element, end, RESERVED)?;
                    }
                    relations.push(element);
                }
                Element::RuleDef { .. } | Element::RecordField { .. } => {
                    return Err(Unrepresentable::new(
                        element,
                        "uml-mini is a schema formalism without rules or records",
                    ))
                }
            }
        }
        let mut out = String::new();
        for (class, attrs) in attributes_by_owner(set)? {
            if attrs.is_empty() {
                out.push_str(&format!("class {class} {{ }}\n"));
                continue;
            }
            out.push_str(&format!("class {class} {{\n"));
            for attr in attrs {
                if let Element::AttributeDef { name, type_name, .. } = attr {
                    out.push_str(&format!("  {name}: {type_name};\n"));
                }
            }
            out.push_str("}\n");
        }
        for rel in relations {
            if let Element::RelationDef {
                name,
                endpoints,
                cardinality,
            } = rel
            {
                out.push_str(&format!("{} -- {} : {name}", endpoints[0], endpoints[1]));
                if let Some(c) = cardinality {
                    out.push_str(&format!(" [{c}]"));
                }
                out.push_str(";\n");
            }
        }
        Ok(out)
    }

    fn grammar(&self) -> &'static str {
        GRAMMAR
    }
}
