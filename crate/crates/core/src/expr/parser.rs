//! Recursive-descent parser for the scalar expression language.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := atom ('^' atom)?
//! atom   := number | symbol | func '(' expr ')' | '(' expr ')' | '-' atom
//! ```
//!
//! Offsets in errors count characters from the start of the input.

use std::sync::Arc;

use super::ast::{Expr, Func};
use super::profile::Profile;
use crate::error::{Error, Result};

/// Symbols an expression may reference.
#[derive(Debug, Clone, Default)]
pub struct SymbolTable {
    pub coords: Vec<String>,
    pub params: Vec<String>,
    pub profiles: Vec<Arc<Profile>>,
}

impl SymbolTable {
    pub fn new<C, P>(coords: C, params: P) -> Self
    where
        C: IntoIterator,
        C::Item: Into<String>,
        P: IntoIterator,
        P::Item: Into<String>,
    {
        Self {
            coords: coords.into_iter().map(Into::into).collect(),
            params: params.into_iter().map(Into::into).collect(),
            profiles: Vec::new(),
        }
    }

    pub fn with_profile(mut self, profile: Arc<Profile>) -> Self {
        self.profiles.push(profile);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String, usize),
    Sym(char),
    End,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || ('\u{0300}'..='\u{036f}').contains(&c)
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v: f64 = s.parse().map_err(|_| Error::Syntax {
                offset: start,
                message: format!("malformed number `{s}`"),
            })?;
            out.push((Tok::Num(v), start));
        } else if is_ident_start(c) {
            let start = i;
            while i < chars.len() && is_ident_continue(chars[i]) {
                i += 1;
            }
            let mut primes = 0;
            while i < chars.len() && chars[i] == '\'' {
                primes += 1;
                i += 1;
            }
            let s: String = chars[start..i - primes].iter().collect();
            out.push((Tok::Ident(s, primes), start));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Sym(c), i));
            i += 1;
        } else {
            return Err(Error::Syntax {
                offset: i,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    out.push((Tok::End, chars.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    symbols: &'a SymbolTable,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s, _) => format!("`{s}`"),
            Tok::Sym(c) => format!("`{c}`"),
            Tok::End => "end of input".into(),
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek() == &Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            let found = Self::describe(self.peek());
            self.error(format!("expected `{c}`, found {found}"))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Sym('+') => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Sym('-') => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Tok::Sym('*') => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Tok::Sym('/') => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    /// Unary minus binds looser than `^`; `^` does not chain.
    fn factor(&mut self) -> Result<Expr> {
        if self.peek() == &Tok::Sym('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.atom()?;
        if self.peek() == &Tok::Sym('^') {
            self.bump();
            let exponent = if self.peek() == &Tok::Sym('-') {
                self.bump();
                Expr::Neg(Box::new(self.atom()?))
            } else {
                self.atom()?
            };
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::Sym('(') => {
                self.bump();
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Tok::Ident(name, primes) => {
                self.bump();
                if let Some(func) = Func::from_name(&name).filter(|_| primes == 0) {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                if let Some(profile) = self.symbols.profiles.iter().find(|p| p.name() == name) {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::Profile {
                        profile: profile.clone(),
                        shift: primes,
                        arg: Box::new(arg),
                    });
                }
                if primes > 0 {
                    return Err(Error::Syntax {
                        offset,
                        message: format!("`{name}` is not a profile and cannot carry primes"),
                    });
                }
                if let Some(index) = self.symbols.coords.iter().position(|c| *c == name) {
                    return Ok(Expr::Coord { index, name });
                }
                if self.symbols.params.iter().any(|p| *p == name) {
                    return Ok(Expr::Param(name));
                }
                Err(Error::UndeclaredSymbol { name, offset })
            }
            other => self.error(format!("expected a number, symbol or `(`, found {}", Self::describe(&other))),
        }
    }
}

/// Parse `text` against the declared coordinates, parameters and profiles.
pub fn parse_scalar_expr(text: &str, symbols: &SymbolTable) -> Result<Expr> {
    if text.trim().is_empty() {
        return Err(Error::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let toks = tokenize(text)?;
    let mut parser = Parser {
        toks,
        pos: 0,
        symbols,
    };
    let expr = parser.expr()?;
    if parser.peek() != &Tok::End {
        let found = Parser::describe(parser.peek());
        return parser.error(format!("unexpected {found}"));
    }
    Ok(expr)
}
