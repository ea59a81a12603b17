//! Lexer and term reader shared by the grammar and theory file formats.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::term::{parse_rational, Rational, Symbol, Term, Var};

/// 1-based source position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    /// Unquoted atom starting with a lowercase letter.
    Name(String),
    Quoted(String),
    Variable(String),
    Number(Rational),
    Punct(&'static str),
    /// Clause terminator `.`.
    End,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Name(s) => write!(f, "`{s}`"),
            Tok::Quoted(s) => write!(f, "'{s}'"),
            Tok::Variable(s) => write!(f, "variable `{s}`"),
            Tok::Number(n) => write!(f, "number {}", crate::term::format_rational(n)),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::End => f.write_str("`.`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spanned {
    pub tok: Tok,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntaxError {
    pub pos: Pos,
    pub message: String,
}

impl SyntaxError {
    pub fn new(pos: Pos, message: impl Into<String>) -> Self {
        SyntaxError {
            pos,
            message: message.into(),
        }
    }
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.pos, self.message)
    }
}

impl std::error::Error for SyntaxError {}

// Longest first so that `~~>` wins over `~`.
const PUNCTS: &[&str] = &[
    "~~>", "=:=", ":-", "(?", "?)", "=<", ">=", "\\+", "(", ")", "[", "]", "{", "}", ",", "|", ";",
    ":", "~", "*", "@", "#", "=", "<", ">", "/",
];

/// Splits source text into tokens. `%` starts a comment running to end of line.
pub fn tokenize(src: &str) -> Result<Vec<Spanned>, SyntaxError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;

    macro_rules! advance {
        ($n:expr) => {{
            for _ in 0..$n {
                if chars[i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column: col };
        if c.is_whitespace() {
            advance!(1);
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                advance!(1);
            }
            continue;
        }
        if c == '.' {
            let next = chars.get(i + 1).copied();
            if next.is_none_or(|n| n.is_whitespace() || n == '%') {
                out.push(Spanned { tok: Tok::End, pos });
                advance!(1);
                continue;
            }
            return Err(SyntaxError::new(pos, "unexpected `.`"));
        }
        if c.is_ascii_digit()
            || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            let start = i;
            let mut j = i + 1;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            // decimal `0.75` or ratio `3/4`
            if j + 1 < chars.len() && matches!(chars[j], '.' | '/') && chars[j + 1].is_ascii_digit() {
                j += 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
            }
            let text: String = chars[start..j].iter().collect();
            let value = parse_rational(&text)
                .ok_or_else(|| SyntaxError::new(pos, format!("malformed number `{text}`")))?;
            out.push(Spanned {
                tok: Tok::Number(value),
                pos,
            });
            advance!(j - start);
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            let mut j = i + 1;
            while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let text: String = chars[start..j].iter().collect();
            let tok = if c.is_uppercase() || c == '_' {
                Tok::Variable(text)
            } else {
                Tok::Name(text)
            };
            out.push(Spanned { tok, pos });
            advance!(j - start);
            continue;
        }
        if c == '\'' {
            let mut j = i + 1;
            let mut text = String::new();
            loop {
                match chars.get(j) {
                    None => return Err(SyntaxError::new(pos, "unterminated quoted atom")),
                    Some('\'') => {
                        if chars.get(j + 1) == Some(&'\'') {
                            text.push('\'');
                            j += 2;
                        } else {
                            j += 1;
                            break;
                        }
                    }
                    Some('\\') => {
                        match chars.get(j + 1) {
                            Some('n') => text.push('\n'),
                            Some(&e) => text.push(e),
                            None => {
                                return Err(SyntaxError::new(pos, "unterminated quoted atom"))
                            }
                        }
                        j += 2;
                    }
                    Some(&ch) => {
                        text.push(ch);
                        j += 1;
                    }
                }
            }
            out.push(Spanned {
                tok: Tok::Quoted(text),
                pos,
            });
            advance!(j - i);
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                out.push(Spanned {
                    tok: Tok::Punct(p),
                    pos,
                });
                advance!(p.chars().count());
            }
            None => return Err(SyntaxError::new(pos, format!("unexpected character `{c}`"))),
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        pos: Pos { line, column: col },
    });
    Ok(out)
}

/// Variable names of one clause, mapped to ids `0..n`.
#[derive(Clone, Debug, Default)]
pub struct VarScope {
    ids: HashMap<String, Var>,
    names: Vec<String>,
}

impl VarScope {
    pub fn new() -> Self {
        VarScope::default()
    }

    pub fn get(&mut self, name: &str) -> Var {
        if name == "_" {
            let v = Var(self.names.len() as u32);
            self.names.push("_".to_owned());
            return v;
        }
        if let Some(v) = self.ids.get(name) {
            return *v;
        }
        let v = Var(self.names.len() as u32);
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), v);
        v
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn into_names(self) -> Vec<String> {
        self.names
    }
}

/// Cursor over a token stream with a term reader.
pub struct Reader {
    toks: Vec<Spanned>,
    at: usize,
}

impl Reader {
    pub fn new(toks: Vec<Spanned>) -> Self {
        Reader { toks, at: 0 }
    }

    pub fn from_source(src: &str) -> Result<Self, SyntaxError> {
        Ok(Reader::new(tokenize(src)?))
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    pub fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.at + offset).min(self.toks.len() - 1);
        &self.toks[idx].tok
    }

    pub fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    pub fn next(&mut self) -> Spanned {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    pub fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.next();
            true
        } else {
            false
        }
    }

    pub fn expect_punct(&mut self, p: &str) -> Result<(), SyntaxError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{p}`")))
        }
    }

    pub fn expect_end(&mut self) -> Result<(), SyntaxError> {
        if matches!(self.peek(), Tok::End) {
            self.next();
            Ok(())
        } else {
            Err(self.unexpected("`.`"))
        }
    }

    pub fn unexpected(&self, wanted: &str) -> SyntaxError {
        SyntaxError::new(self.pos(), format!("expected {wanted}, found {}", self.peek()))
    }

    /// Skips past the next clause terminator, for error recovery.
    pub fn recover(&mut self) {
        while !self.at_eof() {
            if matches!(self.next().tok, Tok::End) {
                break;
            }
        }
    }

    pub fn term(&mut self, scope: &mut VarScope) -> Result<Term, SyntaxError> {
        let Spanned { tok, pos } = self.next();
        match tok {
            Tok::Variable(name) => Ok(Term::Var(scope.get(&name))),
            Tok::Number(n) => Ok(Term::Number(n)),
            Tok::Name(name) | Tok::Quoted(name) => {
                let functor = Symbol::intern(&name);
                if self.is_punct("(") {
                    self.next();
                    let args = self.term_list(scope, ")")?;
                    Ok(Term::make_compound(functor, args))
                } else {
                    Ok(Term::Atom(functor))
                }
            }
            Tok::Punct("[") => {
                if self.eat_punct("]") {
                    return Ok(Term::nil());
                }
                let mut items = vec![self.term(scope)?];
                while self.eat_punct(",") {
                    items.push(self.term(scope)?);
                }
                let tail = if self.eat_punct("|") {
                    Some(self.term(scope)?)
                } else {
                    None
                };
                self.expect_punct("]")?;
                Ok(match tail {
                    Some(t) => Term::list_with_tail(items, t),
                    None => Term::list(items),
                })
            }
            other => Err(SyntaxError::new(pos, format!("expected a term, found {other}"))),
        }
    }

    /// Comma separated terms up to the closing delimiter.
    fn term_list(&mut self, scope: &mut VarScope, close: &str) -> Result<Vec<Term>, SyntaxError> {
        let mut args = Vec::new();
        if self.eat_punct(close) {
            return Ok(args);
        }
        loop {
            args.push(self.term(scope)?);
            if self.eat_punct(close) {
                return Ok(args);
            }
            self.expect_punct(",")?;
        }
    }

    /// `name/arity`.
    pub fn predicate_indicator(&mut self) -> Result<(Symbol, usize), SyntaxError> {
        let name = match self.next().tok {
            Tok::Name(n) | Tok::Quoted(n) => Symbol::intern(&n),
            other => {
                return Err(SyntaxError::new(
                    self.pos(),
                    format!("expected predicate name, found {other}"),
                ))
            }
        };
        self.expect_punct("/")?;
        match self.next().tok {
            Tok::Number(n) if n.is_integer() && *n.numer() >= 0 => Ok((name, *n.numer() as usize)),
            other => Err(SyntaxError::new(
                self.pos(),
                format!("expected arity, found {other}"),
            )),
        }
    }
}

/// Parses a single term in canonical syntax; variables get ids `0..n` by first occurrence.
pub fn parse_term(src: &str) -> Result<Term, SyntaxError> {
    let mut reader = Reader::from_source(src)?;
    let mut scope = VarScope::new();
    let t = reader.term(&mut scope)?;
    if matches!(reader.peek(), Tok::End) {
        reader.next();
    }
    if !reader.at_eof() {
        return Err(reader.unexpected("end of input"));
    }
    Ok(t)
}
