//! `fol-p9`: Prover9-style first-order formulas.
//!
//! The parser accepts the full connective set (`all`, `exists`, `->`, `<->`,
//! `&`, `|`, `-`). Lowering to elements keeps only the Horn fragment: a
//! universally quantified implication from a conjunction of atoms to a
//! conjunction of atoms, or a clause with exactly one positive literal.
//! Anything else is reported as `fol.non-horn`.
//!
//! Formulas may carry `# label(name)`; an unlabeled formula at position `k`
//! is named `rk`.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use super::lex::{check_balance, is_ident, tokenize, Cursor, LexOptions};
use crate::diagnostic::{codes, Diagnostic, Location};
use crate::element::{Atom, Element, ElementSet, Term};
use crate::formalism::{Codec, Formalism, FormalismId, Unrepresentable};

pub const ID: &str = "fol-p9";

const RESERVED: &[&str] = &["all", "exists"];

const GRAMMAR: &str = "formulas are terminated by a period: `all x (p(x) -> q(x)).`\n\
connectives: all, exists, ->, <->, &, |, - (negation); terms are identifiers\n\
quantified identifiers are variables, others are constants\n\
optional label: `all x (p(x) -> q(x)) # label(name).`; comments start with %\n\
only Horn rules (conjunction of atoms -> atom) carry over to other formalisms";

pub fn formalism() -> Formalism {
    Formalism {
        id: FormalismId::known(ID),
        display_name: "First-order logic (Prover9 syntax)".into(),
        description: "Period-terminated first-order formulas; Horn rules are canonical".into(),
        codec: Arc::new(P9Codec),
    }
}

#[derive(Debug, Clone)]
pub(crate) struct AtomAst {
    pub predicate: String,
    pub args: Vec<String>,
}

#[derive(Debug, Clone)]
pub(crate) enum Formula {
    Atom(AtomAst),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    All(String, Box<Formula>),
    Exists(String, Box<Formula>),
}

#[derive(Debug, Clone)]
pub(crate) struct Statement {
    pub formula: Formula,
    pub label: Option<String>,
    pub loc: Location,
}

pub(crate) fn parse_statements(content: &str) -> Result<Vec<Statement>, Diagnostic> {
    let tokens = tokenize(
        content,
        &LexOptions {
            comment: Some('%'),
            dollar_vars: false,
        },
    )?;
    check_balance(&tokens)?;
    let mut cur = Cursor::new(&tokens, content);
    let mut out = Vec::new();
    while !cur.at_end() {
        let loc = cur.loc();
        let formula = parse_formula(&mut cur)?;
        let mut label = None;
        if cur.eat_punct("#") {
            cur.expect_keyword("label")?;
            cur.expect_punct("(")?;
            label = Some(cur.expect_ident("a label name", RESERVED)?.0);
            cur.expect_punct(")")?;
        }
        cur.expect_punct(".")?;
        out.push(Statement {
            formula,
            label,
            loc,
        });
    }
    Ok(out)
}

fn parse_formula(cur: &mut Cursor<'_>) -> Result<Formula, Diagnostic> {
    let lhs = parse_or(cur)?;
    if cur.eat_punct("->") {
        let rhs = parse_formula(cur)?;
        return Ok(Formula::Implies(Box::new(lhs), Box::new(rhs)));
    }
    if cur.eat_punct("<->") {
        let rhs = parse_formula(cur)?;
        return Ok(Formula::Iff(Box::new(lhs), Box::new(rhs)));
    }
    Ok(lhs)
}

fn parse_or(cur: &mut Cursor<'_>) -> Result<Formula, Diagnostic> {
    let mut parts = vec![parse_and(cur)?];
    while cur.eat_punct("|") {
        parts.push(parse_and(cur)?);
    }
    Ok(if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        Formula::Or(parts)
    })
}

fn parse_and(cur: &mut Cursor<'_>) -> Result<Formula, Diagnostic> {
    let mut parts = vec![parse_unary(cur)?];
    while cur.eat_punct("&") {
        parts.push(parse_unary(cur)?);
    }
    Ok(if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        Formula::And(parts)
    })
}

fn parse_unary(cur: &mut Cursor<'_>) -> Result<Formula, Diagnostic> {
    if cur.eat_punct("-") {
        return Ok(Formula::Not(Box::new(parse_unary(cur)?)));
    }
    if cur.eat_punct("(") {
        let inner = parse_formula(cur)?;
        cur.expect_punct(")")?;
        return Ok(inner);
    }
    for (kw, universal) in [("all", true), ("exists", false)] {
        if cur.eat_keyword(kw) {
            let (var, _) = cur.expect_ident("a variable after the quantifier", RESERVED)?;
            let body = Box::new(parse_unary(cur)?);
            return Ok(if universal {
                Formula::All(var, body)
            } else {
                Formula::Exists(var, body)
            });
        }
    }
    parse_atom(cur).map(Formula::Atom)
}

fn parse_atom(cur: &mut Cursor<'_>) -> Result<AtomAst, Diagnostic> {
    let (predicate, _) = cur.expect_ident("a predicate", RESERVED)?;
    let mut args = Vec::new();
    if cur.eat_punct("(") {
        loop {
            args.push(cur.expect_ident("a term", RESERVED)?.0);
            if cur.eat_punct(")") {
                break;
            }
            cur.expect_punct(",")?;
        }
    }
    Ok(AtomAst { predicate, args })
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, parts: &[Formula], op: &str| {
            f.write_str("(")?;
            for (i, p) in parts.iter().enumerate() {
                if i > 0 {
                    write!(f, " {op} ")?;
                }
                write!(f, "{p}")?;
            }
            f.write_str(")")
        };
        match self {
            Formula::Atom(a) if a.args.is_empty() => f.write_str(&a.predicate),
            Formula::Atom(a) => write!(f, "{}({})", a.predicate, a.args.join(",")),
            Formula::Not(x) => write!(f, "-{x}"),
            Formula::And(xs) => join(f, xs, "&"),
            Formula::Or(xs) => join(f, xs, "|"),
            Formula::Implies(a, b) => write!(f, "({a} -> {b})"),
            Formula::Iff(a, b) => write!(f, "({a} <-> {b})"),
            Formula::All(v, x) => write!(f, "all {v} {x}"),
            Formula::Exists(v, x) => write!(f, "exists {v} {x}"),
        }
    }
}

fn conjunction_atoms(f: &Formula) -> Option<Vec<&AtomAst>> {
    match f {
        Formula::Atom(a) => Some(vec![a]),
        Formula::And(parts) => parts.iter().map(|p| match p {
            Formula::Atom(a) => Some(a),
            _ => None,
        }).collect(),
        _ => None,
    }
}

fn to_atom(a: &AtomAst, bound: &BTreeSet<String>) -> Atom {
    Atom::new(
        &a.predicate,
        a.args
            .iter()
            .map(|t| {
                if bound.contains(t) {
                    Term::var(t)
                } else {
                    Term::constant(t)
                }
            })
            .collect(),
    )
}

/// Lowers one statement to a rule; `index` is 1-based.
pub(crate) fn horn_rule(stmt: &Statement, index: usize) -> Result<Element, Diagnostic> {
    let mut bound = BTreeSet::new();
    let mut body = &stmt.formula;
    while let Formula::All(var, inner) = body {
        bound.insert(var.clone());
        body = inner;
    }
    let loc = stmt.loc;
    let non_horn = |why: &str| {
        Diagnostic::error(
            codes::FOL_NON_HORN,
            format!("formula {index} `{}` is not a Horn rule: {why}", stmt.formula),
        )
            .at(loc)
            .with_hint("use `all x (a(x) & b(x) -> c(x))`")
    };
    let (antecedents, consequents) = match body {
        Formula::Implies(lhs, rhs) => {
            let ante = conjunction_atoms(lhs)
                .ok_or_else(|| non_horn("the antecedent must be a conjunction of atoms"))?;
            let cons = conjunction_atoms(rhs)
                .ok_or_else(|| non_horn("the consequent must be a conjunction of atoms"))?;
            (ante, cons)
        }
        Formula::Or(lits) => {
            let mut neg = Vec::new();
            let mut pos = Vec::new();
            for lit in lits {
                match lit {
                    Formula::Atom(a) => pos.push(a),
                    Formula::Not(inner) => match inner.as_ref() {
                        Formula::Atom(a) => neg.push(a),
                        _ => return Err(non_horn("negation applies to a compound formula")),
                    },
                    _ => return Err(non_horn("clause literals must be atoms or negated atoms")),
                }
            }
            if pos.len() != 1 || neg.is_empty() {
                return Err(non_horn("a clause needs one positive and at least one negative literal"));
            }
            (neg, pos)
        }
        Formula::Atom(_) => {
            return Err(Diagnostic::error(
                codes::FOL_FACT_UNSUPPORTED,
                format!("formula {index} is a bare fact; only rules have a canonical form"),
            )
            .at(loc))
        }
        Formula::Exists(..) => return Err(non_horn("existential quantification")),
        Formula::Iff(..) => return Err(non_horn("bi-implication")),
        _ => return Err(non_horn("unsupported connective structure")),
    };
    let name = stmt.label.clone().unwrap_or_else(|| format!("r{index}"));
    Ok(Element::rule(
        name,
        antecedents.into_iter().map(|a| to_atom(a, &bound)).collect(),
        consequents.into_iter().map(|a| to_atom(a, &bound)).collect(),
    ))
}

fn lower(statements: &[Statement]) -> Result<ElementSet, Vec<Diagnostic>> {
    let mut set = ElementSet::new();
    let mut errors = Vec::new();
    for (i, stmt) in statements.iter().enumerate() {
        match horn_rule(stmt, i + 1) {
            Ok(rule) => {
                set.insert(rule);
            }
            Err(d) => errors.push(d),
        }
    }
    if errors.is_empty() {
        Ok(set)
    } else {
        Err(errors)
    }
}

/// Variables in order of first appearance.
pub(crate) fn rule_variables<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> Vec<String> {
    let mut seen = Vec::new();
    for atom in atoms {
        for t in &atom.args {
            if let Term::Var(v) = t {
                if !seen.contains(v) {
                    seen.push(v.clone());
                }
            }
        }
    }
    seen
}

fn render_atom(element: &Element, atom: &Atom) -> Result<String, Unrepresentable> {
    let check = |s: &str| {
        if is_ident(s) && !RESERVED.contains(&s) && s != "label" {
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
        let (Term::Var(s) | Term::Const(s)) = t;
        check(s)?;
        args.push(s.as_str());
    }
    Ok(format!("{}({})", atom.predicate, args.join(",")))
}

struct P9Codec;

impl Codec for P9Codec {
    fn parse(&self, content: &str) -> Result<ElementSet, Vec<Diagnostic>> {
        let statements = parse_statements(content).map_err(|d| vec![d])?;
        lower(&statements)
    }

    fn render(&self, set: &ElementSet) -> Result<String, Unrepresentable> {
        let mut out = String::new();
        for (i, element) in set.iter().enumerate() {
            let Element::RuleDef {
                name,
                antecedents,
                consequents,
            } = element
            else {
                return Err(Unrepresentable::new(element, "fol-p9 holds rules only"));
            };
            if antecedents.is_empty() || consequents.is_empty() {
                return Err(Unrepresentable::new(element, "rules need antecedent and consequent atoms"));
            }
            if !is_ident(name) {
                return Err(Unrepresentable::new(element, "rule name is not an identifier"));
            }
            let vars = rule_variables(antecedents.iter().chain(consequents));
            let clash = antecedents
                .iter()
                .chain(consequents)
                .flat_map(|a| &a.args)
                .any(|t| matches!(t, Term::Const(c) if vars.contains(c)));
            if clash {
                return Err(Unrepresentable::new(element, "a name is used both as variable and constant"));
            }
            let join = |atoms: &[Atom]| -> Result<String, Unrepresentable> {
                Ok(atoms
                    .iter()
                    .map(|a| render_atom(element, a))
                    .collect::<Result<Vec<_>, _>>()?
                    .join(" & "))
            };
            let body = format!("{} -> {}", join(antecedents)?, join(consequents)?);
            if vars.is_empty() {
                out.push_str(&body);
            } else {
                for v in &vars {
                    out.push_str(&format!("all {v} "));
                }
                out.push_str(&format!("({body})"));
            }
            if *name != format!("r{}", i + 1) {
                out.push_str(&format!(" # label({name})"));
            }
            out.push_str(".\n");
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

    fn rule(name: &str, ante: Vec<Atom>, cons: Vec<Atom>) -> ElementSet {
        [Element::rule(name, ante, cons)].into_iter().collect()
    }

    #[test]
    fn socrates_rule() {
        let set = codec().parse("all x (man(x) -> mortal(x)).").unwrap();
        assert_eq!(
            set,
            rule(
                "r1",
                vec![Atom::new("man", vec![Term::var("x")])],
                vec![Atom::new("mortal", vec![Term::var("x")])]
            )
        );
    }

    #[test]
    fn clause_form_normalizes_to_the_same_rule() {
        let a = codec().parse("all x (man(x) -> mortal(x)).").unwrap();
        let b = codec().parse("all x (-man(x) | mortal(x)).").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unbound_identifiers_are_constants() {
        let set = codec().parse("all x (parent(x, bob) -> knows(x, bob)) # label(k).").unwrap();
        let expected = rule(
            "k",
            vec![Atom::new("parent", vec![Term::var("x"), Term::constant("bob")])],
            vec![Atom::new("knows", vec![Term::var("x"), Term::constant("bob")])],
        );
        assert_eq!(set, expected);
    }

    #[test]
    fn unbalanced_paren() {
        let diags = codec().validate("all x (man(x) -> mortal(x).");
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, codes::SYNTAX_UNBALANCED_PAREN);
    }

    #[test]
    fn existential_is_non_horn() {
        let diags = codec().parse("exists x (p(x)).").unwrap_err();
        assert_eq!(diags[0].code, codes::FOL_NON_HORN);
        let diags = codec().parse("all x (p(x) -> q(x) | r(x)).").unwrap_err();
        assert_eq!(diags[0].code, codes::FOL_NON_HORN);
        let diags = codec().parse("p(a).").unwrap_err();
        assert_eq!(diags[0].code, codes::FOL_FACT_UNSUPPORTED);
    }

    #[test]
    fn comments_and_multiple_formulas() {
        let text = "% people\nall x (man(x) -> mortal(x)).\nall x all y (parent(x,y) & man(x) -> father(x,y)).\n";
        let set = codec().parse(text).unwrap();
        assert_eq!(set.len(), 2);
        let names: Vec<_> = set.iter().map(|e| e.name().to_string()).collect();
        assert_eq!(names, vec!["r1", "r2"]);
    }

    #[test]
    fn render_canonical() {
        let text = "all x all y (parent(x,y) & man(x) -> father(x,y)).\n";
        let set = codec().parse(text).unwrap();
        assert_eq!(codec().render(&set).unwrap(), text);
        let labelled = rule(
            "zeta",
            vec![Atom::new("p", vec![])],
            vec![Atom::new("q", vec![Term::constant("a")])],
        );
        let out = codec().render(&labelled).unwrap();
        assert_eq!(out, "p -> q(a) # label(zeta).\n");
        assert_eq!(codec().parse(&out).unwrap(), labelled);
    }

    #[test]
    fn missing_period_is_located() {
        let diags = codec().parse("all x (p(x) -> q(x))\n").unwrap_err();
        assert_eq!(diags[0].code, codes::SYNTAX_UNEXPECTED_TOKEN);
        assert_eq!(diags[0].location.unwrap().line, 1);
    }
}
