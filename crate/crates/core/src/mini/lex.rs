//! Tokenizer and cursor shared by the keyword-style mini grammars.

use crate::diagnostic::{codes, Diagnostic, Location};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    /// `$name`, only produced when variables are enabled.
    Var(String),
    Int(String),
    Punct(&'static str),
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Var(s) => format!("variable `${s}`"),
            Tok::Int(s) => format!("integer `{s}`"),
            Tok::Punct(p) => format!("`{p}`"),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub loc: Location,
}

pub(crate) struct LexOptions {
    pub comment: Option<char>,
    pub dollar_vars: bool,
}

// Longest first so `..` wins over `.` and `--`/`->` over `-`.
const PUNCTS: &[&str] = &[
    "..", "--", "->", "<->", "{", "}", "(", ")", "[", "]", ":", ";", ",", ".", "&", "|", "-", "*",
    "#",
];

pub(crate) fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

pub(crate) fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

pub(crate) fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(is_ident_start) && chars.all(is_ident_char)
}

/// Location one column past the last non-whitespace character.
pub(crate) fn end_location(content: &str) -> Location {
    let trimmed = content.trim_end();
    let line = trimmed.lines().count().max(1);
    let column = trimmed.lines().last().map_or(0, |l| l.chars().count()) + 1;
    Location::new(line, column)
}

pub(crate) fn tokenize(content: &str, opts: &LexOptions) -> Result<Vec<Token>, Diagnostic> {
    let mut tokens = Vec::new();
    for (line_idx, line) in content.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let loc = Location::new(line_idx + 1, i + 1);
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if Some(c) == opts.comment {
                break;
            }
            if is_ident_start(c) {
                let start = i;
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                tokens.push(Token {
                    tok: Tok::Ident(word),
                    loc,
                });
                continue;
            }
            if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                tokens.push(Token {
                    tok: Tok::Int(chars[start..i].iter().collect()),
                    loc,
                });
                continue;
            }
            if c == '$' && opts.dollar_vars {
                let start = i + 1;
                i += 1;
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                if start == i || !is_ident_start(chars[start]) {
                    return Err(Diagnostic::error(
                        codes::SYNTAX_MISSING_IDENT,
                        "expected a variable name after `$`",
                    )
                    .at(loc));
                }
                tokens.push(Token {
                    tok: Tok::Var(chars[start..i].iter().collect()),
                    loc,
                });
                continue;
            }
            let rest: String = chars[i..].iter().take(3).collect();
            match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
                Some(p) => {
                    tokens.push(Token {
                        tok: Tok::Punct(p),
                        loc,
                    });
                    i += p.chars().count();
                }
                None => {
                    return Err(Diagnostic::error(
                        codes::SYNTAX_UNEXPECTED_TOKEN,
                        format!("unexpected character `{c}`"),
                    )
                    .at(loc));
                }
            }
        }
    }
    Ok(tokens)
}

/// Reports the first unmatched bracket of any kind.
pub(crate) fn check_balance(tokens: &[Token]) -> Result<(), Diagnostic> {
    let mut stack: Vec<&Token> = Vec::new();
    for t in tokens {
        if let Tok::Punct(p) = t.tok {
            match p {
                "(" | "{" | "[" => stack.push(t),
                ")" | "}" | "]" => {
                    let open = match p {
                        ")" => "(",
                        "}" => "{",
                        _ => "[",
                    };
                    match stack.pop() {
                        Some(o) if o.tok == Tok::Punct(open) => {}
                        _ => {
                            return Err(Diagnostic::error(
                                codes::SYNTAX_UNBALANCED_PAREN,
                                format!("`{p}` has no matching `{open}`"),
                            )
                            .at(t.loc))
                        }
                    }
                }
                _ => {}
            }
        }
    }
    if let Some(open) = stack.first() {
        return Err(Diagnostic::error(
            codes::SYNTAX_UNBALANCED_PAREN,
            format!("{} is never closed", open.tok.describe()),
        )
        .at(open.loc));
    }
    Ok(())
}

/// Recursive-descent cursor over a token vector.
pub(crate) struct Cursor<'a> {
    tokens: &'a [Token],
    pos: usize,
    eof: Location,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(tokens: &'a [Token], content: &str) -> Self {
        Self {
            tokens,
            pos: 0,
            eof: end_location(content),
        }
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    pub(crate) fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    pub(crate) fn loc(&self) -> Location {
        self.peek().map_or(self.eof, |t| t.loc)
    }

    pub(crate) fn bump(&mut self) -> Option<&'a Token> {
        let t = self.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Punct(q), .. }) if *q == p)
    }

    pub(crate) fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Ident(w), .. }) if w == kw)
    }

    pub(crate) fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn found(&self) -> String {
        self.peek()
            .map_or_else(|| "end of input".to_string(), |t| t.tok.describe())
    }

    pub(crate) fn expect_punct(&mut self, p: &str) -> Result<Location, Diagnostic> {
        let loc = self.loc();
        if self.eat_punct(p) {
            Ok(loc)
        } else {
            Err(Diagnostic::error(
                codes::SYNTAX_UNEXPECTED_TOKEN,
                format!("expected `{p}`, found {}", self.found()),
            )
            .at(loc))
        }
    }

    pub(crate) fn expect_keyword(&mut self, kw: &str) -> Result<Location, Diagnostic> {
        let loc = self.loc();
        if self.eat_keyword(kw) {
            Ok(loc)
        } else {
            Err(Diagnostic::error(
                codes::SYNTAX_UNEXPECTED_TOKEN,
                format!("expected `{kw}`, found {}", self.found()),
            )
            .at(loc))
        }
    }

    /// An identifier that is not one of `reserved`.
    pub(crate) fn expect_ident(
        &mut self,
        what: &str,
        reserved: &[&str],
    ) -> Result<(String, Location), Diagnostic> {
        let loc = self.loc();
        match self.peek() {
            Some(Token {
                tok: Tok::Ident(w), ..
            }) if !reserved.contains(&w.as_str()) => {
                self.pos += 1;
                Ok((w.clone(), loc))
            }
            _ => Err(Diagnostic::error(
                codes::SYNTAX_MISSING_IDENT,
                format!("expected {what}, found {}", self.found()),
            )
            .at(loc)),
        }
    }

    pub(crate) fn expect_int(&mut self) -> Result<(u32, Location), Diagnostic> {
        let loc = self.loc();
        match self.peek() {
            Some(Token { tok: Tok::Int(s), .. }) => {
                self.pos += 1;
                s.parse::<u32>().map(|v| (v, loc)).map_err(|_| {
                    Diagnostic::error(codes::SYNTAX_UNEXPECTED_TOKEN, format!("integer `{s}` is too large"))
                        .at(loc)
                })
            }
            _ => Err(Diagnostic::error(
                codes::SYNTAX_UNEXPECTED_TOKEN,
                format!("expected an integer, found {}", self.found()),
            )
            .at(loc)),
        }
    }

    pub(crate) fn unexpected(&self, expected: &str) -> Diagnostic {
        Diagnostic::error(
            codes::SYNTAX_UNEXPECTED_TOKEN,
            format!("expected {expected}, found {}", self.found()),
        )
        .at(self.loc())
    }
}
