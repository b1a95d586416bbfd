//! `fol-pk`: Pyke-style forward-chaining rules.
//!
//! ```text
//! rules := {rule}
//! rule  := "rule" IDENT ":" "if" atom {"&" atom} "then" atom
//! atom  := IDENT ["(" term {"," term} ")"]
//! term  := "$" IDENT | IDENT
//! ```

use std::collections::BTreeSet;
use std::sync::Arc;

use super::lex::{check_balance, is_ident, tokenize, Cursor, LexOptions, Tok};
use crate::diagnostic::{codes, Diagnostic, Location};
use crate::element::{Atom, Element, ElementSet, Term};
use crate::formalism::{Codec, Formalism, FormalismId, Unrepresentable};

pub const ID: &str = "fol-pk";

const RESERVED: &[&str] = &["rule", "if", "then"];

const GRAMMAR: &str = "rule := \"rule\" IDENT \":\" \"if\" atom {\"&\" atom} \"then\" atom\n\
atom := IDENT [\"(\" term {\",\" term} \")\"]; term := $VAR | CONSTANT\n\
example: rule r1: if man($x) then mortal($x)\n\
one rule per line; comments start with #";

pub fn formalism() -> Formalism {
    Formalism {
        id: FormalismId::known(ID),
        display_name: "Horn rules (Pyke syntax)".into(),
        description: "Named if/then rules with $-prefixed variables".into(),
        codec: Arc::new(PkCodec),
    }
}

struct RuleDecl {
    name: String,
    loc: Location,
    antecedents: Vec<Atom>,
    consequent: Atom,
}

fn parse_rules(content: &str) -> Result<Vec<RuleDecl>, Diagnostic> {
    let tokens = tokenize(
        content,
        &LexOptions {
            comment: Some('#'),
            dollar_vars: true,
        },
    )?;
    check_balance(&tokens)?;
    let mut cur = Cursor::new(&tokens, content);
    let mut rules = Vec::new();
    while !cur.at_end() {
        cur.expect_keyword("rule")?;
        let (name, loc) = cur.expect_ident("a rule name after `rule`", RESERVED)?;
        cur.expect_punct(":")?;
        cur.expect_keyword("if")?;
        let mut antecedents = vec![parse_atom(&mut cur)?];
        while cur.eat_punct("&") {
            antecedents.push(parse_atom(&mut cur)?);
        }
        cur.expect_keyword("then")?;
        let consequent = parse_atom(&mut cur)?;
        rules.push(RuleDecl {
            name,
            loc,
            antecedents,
            consequent,
        });
    }
    Ok(rules)
}

fn parse_atom(cur: &mut Cursor<'_>) -> Result<Atom, Diagnostic> {
    let (predicate, _) = cur.expect_ident("a predicate", RESERVED)?;
    let mut args = Vec::new();
    if cur.eat_punct("(") {
        loop {
            let term = match cur.peek().map(|t| &t.tok) {
                Some(Tok::Var(v)) => Term::var(v),
                _ => Term::constant(cur.expect_ident("a term", RESERVED)?.0),
            };
            if matches!(term, Term::Var(_)) {
                cur.bump();
            }
            args.push(term);
            if cur.eat_punct(")") {
                break;
            }
            cur.expect_punct(",")?;
        }
    }
    Ok(Atom::new(predicate, args))
}

fn structural(rules: &[RuleDecl]) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut names = BTreeSet::new();
    for rule in rules {
        if !names.insert(rule.name.as_str()) {
            out.push(
                Diagnostic::error(
                    codes::FOL_DUPLICATE_RULE,
                    format!("rule name {} is used more than once", rule.name),
                )
                .at(rule.loc),
            );
        }
        let bound: BTreeSet<&String> = rule
            .antecedents
            .iter()
            .flat_map(|a| &a.args)
            .filter_map(|t| match t {
                Term::Var(v) => Some(v),
                Term::Const(_) => None,
            })
            .collect();
        for t in &rule.consequent.args {
            if let Term::Var(v) = t {
                if !bound.contains(v) {
                    out.push(
                        Diagnostic::warning(
                            codes::FOL_UNSAFE_VARIABLE,
                            format!("${v} in the conclusion of {} is not bound by its premises", rule.name),
                        )
                        .at(rule.loc),
                    );
                }
            }
        }
    }
    out
}

fn render_atom(element: &Element, atom: &Atom) -> Result<String, Unrepresentable> {
    let check = |s: &str| {
        if is_ident(s) && !RESERVED.contains(&s) {
            Ok(())
        } else {
            Err(Unrepresentable::new(element, format!("`{s}` is not a usable identifier")))
        }
    };
    check(&atom.predicate)?;
    if atom.args.is_empty() {
        return Ok(atom.predicate.clone());
    }
    let mut args = Vec::with_capacity(atom.args.len());
    for t in &atom.args {
        match t {
            Term::Var(v) => {
                check(v)?;
                args.push(format!("${v}"));
            }
            Term::Const(c) => {
                check(c)?;
                args.push(c.clone());
            }
        }
    }
    Ok(format!("{}({})", atom.predicate, args.join(", ")))
}

struct PkCodec;

impl Codec for PkCodec {
    fn parse(&self, content: &str) -> Result<ElementSet, Vec<Diagnostic>> {
        let rules = parse_rules(content).map_err(|d| vec![d])?;
        Ok(rules
            .into_iter()
            .map(|r| Element::rule(r.name, r.antecedents, vec![r.consequent]))
            .collect())
    }

    fn validate(&self, content: &str) -> Vec<Diagnostic> {
        match parse_rules(content) {
            Ok(rules) => structural(&rules),
            Err(d) => vec![d],
        }
    }

    fn render(&self, set: &ElementSet) -> Result<String, Unrepresentable> {
        let mut out = String::new();
        for element in set {
            let Element::RuleDef {
                name,
                antecedents,
                consequents,
            } = element
            else {
                return Err(Unrepresentable::new(element, "fol-pk holds rules only"));
            };
            if antecedents.is_empty() {
                return Err(Unrepresentable::new(element, "rules need at least one premise"));
            }
            if consequents.len() != 1 {
                return Err(Unrepresentable::new(element, "fol-pk rules conclude exactly one atom"));
            }
            if !is_ident(name) || RESERVED.contains(&name.as_str()) {
                return Err(Unrepresentable::new(element, "rule name is not an identifier"));
            }
            let premises = antecedents
                .iter()
                .map(|a| render_atom(element, a))
                .collect::<Result<Vec<_>, _>>()?
                .join(" & ");
            let conclusion = render_atom(element, &consequents[0])?;
            out.push_str(&format!("rule {name}: if {premises} then {conclusion}\n"));
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
    fn parses_rule_with_vars_and_constants() {
        let set = codec()
            .parse("rule r1: if parent($x, bob) & male($x) then father($x, bob)")
            .unwrap();
        let expected: ElementSet = [Element::rule(
            "r1",
            vec![
                Atom::new("parent", vec![Term::var("x"), Term::constant("bob")]),
                Atom::new("male", vec![Term::var("x")]),
            ],
            vec![Atom::new("father", vec![Term::var("x"), Term::constant("bob")])],
        )]
        .into_iter()
        .collect();
        assert_eq!(set, expected);
    }

    #[test]
    fn render_is_canonical() {
        let text = "rule  r1 :if man( $x )then mortal($x)";
        let set = codec().parse(text).unwrap();
        assert_eq!(
            codec().render(&set).unwrap(),
            "rule r1: if man($x) then mortal($x)\n"
        );
    }

    #[test]
    fn duplicate_names_and_unsafe_variables() {
        let diags = codec().validate("rule a: if p($x) then q($y)\nrule a: if p($x) then q($x)");
        let found: Vec<_> = diags.iter().map(|d| (d.code, d.severity)).collect();
        assert!(found.contains(&(codes::FOL_UNSAFE_VARIABLE, crate::diagnostic::Severity::Warning)));
        assert!(found.contains(&(codes::FOL_DUPLICATE_RULE, crate::diagnostic::Severity::Error)));
    }

    #[test]
    fn missing_then() {
        let diags = codec().parse("rule r: if p($x) q($x)").unwrap_err();
        assert_eq!(diags[0].code, codes::SYNTAX_UNEXPECTED_TOKEN);
    }

    #[test]
    fn two_conclusions_are_unrepresentable() {
        let set: ElementSet = [Element::rule(
            "r1",
            vec![Atom::new("p", vec![])],
            vec![Atom::new("q", vec![]), Atom::new("s", vec![])],
        )]
        .into_iter()
        .collect();
        assert!(codec().render(&set).is_err());
    }
}
