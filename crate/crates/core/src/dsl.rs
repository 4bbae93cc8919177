//! Parser for operation specifications and the ASCII expression syntax.
//!
//! ```text
//! op polyeval
//! var y : scalar, out
//! var a : vector(n), in
//! var x : scalar, in
//! var k : scalar, index
//! pre: 0 <= n
//! post: y = sum(i, 0, n-1, a[i] * x^i)
//! ```
//!
//! Upper bounds of `sum` are inclusive in text and exclusive once parsed.

use std::fmt;

use num::BigInt;
use thiserror::Error;

use crate::expr::{succ_bound, Expr, Part, VecRef};
use crate::predicate::{Atom, Predicate};
use crate::print::{Notation, Printer};
use crate::spec::{Kind, OperationSpec, Role, SpecError, VarDecl};
use crate::stmt::{Side, Stmt, COUNTER};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: expected {expected}, found {found}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DslError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("semantic error: {0}")]
    Semantic(#[from] SpecError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    Sym(&'static str),
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(v) => write!(f, "`{v}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::End => write!(f, "end of line"),
        }
    }
}

const SYMBOLS: [&str; 22] = [
    ":=", "+=", "<=", ">=", "!=", "&&", "(", ")", "[", "]", ",", ";", ":", ".", "+", "-", "*", "/", "^", "=",
    "<", ">",
];

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn lex(text: &str, line: usize) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[start..i].iter().collect();
            out.push((Tok::Int(digits.parse().expect("digits")), col));
        } else if is_ident_start(c) {
            let start = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else {
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                Some(s) => {
                    out.push((Tok::Sym(s), col));
                    i += s.len();
                }
                None => {
                    return Err(ParseError {
                        line,
                        column: col,
                        expected: "a token".into(),
                        found: format!("`{c}`"),
                    })
                }
            }
        }
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

/// Recursive-descent parser over the tokens of one line.
pub struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
}

impl Parser {
    pub fn new(text: &str, line: usize) -> Result<Parser, ParseError> {
        Ok(Parser { toks: lex(text, line)?, pos: 0, line })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ParseError {
        ParseError {
            line: self.line,
            column: self.toks[self.pos].1,
            expected: expected.to_string(),
            found: self.peek().to_string(),
        }
    }

    fn eat(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Tok::Sym(s) if *s == sym) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, sym: &str) -> Result<(), ParseError> {
        if self.eat(sym) {
            Ok(())
        } else {
            Err(self.error(&format!("`{sym}`")))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.is_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&format!("`{kw}`")))
        }
    }

    pub fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.error("a name")),
        }
    }

    pub fn finish(&self) -> Result<(), ParseError> {
        match self.peek() {
            Tok::End => Ok(()),
            _ => Err(self.error("end of line")),
        }
    }

    pub fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.term()?;
        loop {
            if self.eat("+") {
                e = e + self.term()?;
            } else if self.eat("-") {
                e = e - self.term()?;
            } else {
                return Ok(e);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.unary()?;
        loop {
            if self.eat("*") {
                e = e * self.unary()?;
            } else if self.eat("/") {
                e = e / self.unary()?;
            } else {
                return Ok(e);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat("-") {
            let literal = matches!(self.peek(), Tok::Int(_));
            return Ok(match self.unary()? {
                Expr::Int(v) if literal => Expr::Int(-v),
                e => -e,
            });
        }
        let base = self.atom()?;
        if self.eat("^") {
            Ok(base.pow(self.unary()?))
        } else {
            Ok(base)
        }
    }

    fn part(&mut self) -> Result<Part, ParseError> {
        let found = match self.peek() {
            Tok::Ident(s) => s.clone(),
            Tok::Int(v) => v.to_string(),
            _ => String::new(),
        };
        match Part::from_suffix(&found) {
            Some(p) => {
                self.bump();
                Ok(p)
            }
            None => Err(self.error("a region (T, B, 0, 1 or 2)")),
        }
    }

    fn vec_ref(&mut self) -> Result<VecRef, ParseError> {
        if self.is_keyword("empty") && self.peek_at(1) == &Tok::Sym("(") {
            self.bump();
            self.expect("(")?;
            let root = self.ident()?;
            self.expect(")")?;
            return Ok(VecRef::empty(&root));
        }
        if self.is_keyword("cat") && self.peek_at(1) == &Tok::Sym("(") {
            self.bump();
            self.expect("(")?;
            let first = self.vec_ref()?;
            let mut parts = first.parts.clone();
            while self.eat(",") {
                let next = self.vec_ref()?;
                if next.root != first.root {
                    return Err(self.error(&format!("a region of `{}`", first.root)));
                }
                parts.extend(next.parts);
            }
            self.expect(")")?;
            return Ok(VecRef { root: first.root, parts });
        }
        let root = self.ident()?;
        if self.eat(".") {
            Ok(VecRef::part(&root, self.part()?))
        } else {
            Ok(VecRef::whole(&root))
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let call = self.peek_at(1) == &Tok::Sym("(");
                match name.as_str() {
                    "sum" if call => {
                        self.bump();
                        self.expect("(")?;
                        let var = self.ident()?;
                        self.expect(",")?;
                        let lo = self.expr()?;
                        self.expect(",")?;
                        let hi = self.expr()?;
                        self.expect(",")?;
                        let body = self.expr()?;
                        self.expect(")")?;
                        Ok(Expr::sum(&var, lo, succ_bound(&hi), body))
                    }
                    "len" if call => {
                        self.bump();
                        self.expect("(")?;
                        let r = self.vec_ref()?;
                        self.expect(")")?;
                        Ok(Expr::Len(r))
                    }
                    "poly" if call => {
                        self.bump();
                        self.expect("(")?;
                        let r = self.vec_ref()?;
                        self.expect(",")?;
                        let p = self.expr()?;
                        self.expect(")")?;
                        Ok(Expr::poly(r, p))
                    }
                    "cat" | "empty" if call => Ok(Expr::Ref(self.vec_ref()?)),
                    _ => {
                        self.bump();
                        if self.eat("[") {
                            let idx = self.expr()?;
                            self.expect("]")?;
                            Ok(Expr::elem(&name, idx))
                        } else if self.peek() == &Tok::Sym(".") {
                            self.bump();
                            Ok(Expr::Ref(VecRef::part(&name, self.part()?)))
                        } else {
                            Ok(Expr::Var(name))
                        }
                    }
                }
            }
            _ => Err(self.error("an expression")),
        }
    }

    fn comparison(&mut self) -> Result<Atom, ParseError> {
        if self.is_keyword("true") && matches!(self.peek_at(1), Tok::End | Tok::Sym("&&")) {
            self.bump();
            return Ok(Atom::True);
        }
        let l = self.expr()?;
        let op = match self.peek() {
            Tok::Sym(s @ ("=" | "<=" | "<" | "!=" | ">=" | ">")) => *s,
            _ => return Err(self.error("a comparison (=, <=, <, !=, >=, >)")),
        };
        self.bump();
        let r = self.expr()?;
        Ok(match op {
            "=" => Atom::Eq(l, r),
            "<=" => Atom::Le(l, r),
            "<" => Atom::Lt(l, r),
            "!=" => Atom::Ne(l, r),
            ">=" => Atom::Le(r, l),
            _ => Atom::Lt(r, l),
        })
    }

    pub fn predicate(&mut self) -> Result<Predicate, ParseError> {
        let mut atoms = vec![self.comparison()?];
        while self.eat("&&") {
            atoms.push(self.comparison()?);
        }
        Ok(Predicate::all(atoms))
    }

    fn side(&mut self, prefix: &str) -> Result<Side, ParseError> {
        let expected = format!("`{prefix}-top` or `{prefix}-bottom`");
        if !self.is_keyword(prefix) {
            return Err(self.error(&expected));
        }
        self.bump();
        if !self.eat("-") {
            return Err(self.error(&expected));
        }
        if self.is_keyword("top") {
            self.bump();
            Ok(Side::Top)
        } else if self.is_keyword("bottom") {
            self.bump();
            Ok(Side::Bottom)
        } else {
            Err(self.error(&expected))
        }
    }

    fn simple_stmt(&mut self) -> Result<Stmt, ParseError> {
        let next_is = |p: &Parser, t: Tok| p.peek_at(1) == &t;
        if self.is_keyword("skip") {
            self.bump();
            return Ok(Stmt::Skip);
        }
        if self.is_keyword("partition") && matches!(self.peek_at(1), Tok::Ident(_)) {
            self.bump();
            let vector = self.ident()?;
            let empty = self.side("empty")?;
            return Ok(Stmt::PartitionInit { vector, empty });
        }
        if self.is_keyword("repartition") && matches!(self.peek_at(1), Tok::Ident(_)) {
            self.bump();
            let vector = self.ident()?;
            let from = self.side("from")?;
            return Ok(Stmt::Repartition { vector, from });
        }
        if self.is_keyword("merge") && matches!(self.peek_at(1), Tok::Ident(_)) {
            self.bump();
            let vector = self.ident()?;
            let from = self.side("from")?;
            return Ok(Stmt::MergeBack { vector, from });
        }
        if self.is_keyword(COUNTER) && next_is(self, Tok::Sym("+=")) {
            self.bump();
            self.bump();
            return Ok(Stmt::CounterIncr(self.expr()?));
        }
        let mut targets = vec![self.ident()?];
        while self.eat(",") {
            targets.push(self.ident()?);
        }
        self.expect(":=")?;
        let mut exprs = vec![self.expr()?];
        while self.eat(",") {
            exprs.push(self.expr()?);
        }
        if exprs.len() != targets.len() {
            return Err(self.error(&format!("{} expressions", targets.len())));
        }
        for (i, t) in targets.iter().enumerate() {
            if targets[..i].contains(t) {
                return Err(self.error(&format!("distinct targets (`{t}` repeats)")));
            }
        }
        Ok(Stmt::Assign { targets, exprs })
    }

    pub fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let mut parts = vec![self.simple_stmt()?];
        while self.eat(";") {
            parts.push(self.simple_stmt()?);
        }
        Ok(Stmt::seq(parts))
    }
}

pub(crate) fn whole<T>(text: &str, line: usize, f: impl FnOnce(&mut Parser) -> Result<T, ParseError>) -> Result<T, ParseError> {
    let mut p = Parser::new(text, line)?;
    let v = f(&mut p)?;
    p.finish()?;
    Ok(v)
}

pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    whole(text, 1, Parser::expr)
}

pub fn parse_predicate(text: &str) -> Result<Predicate, ParseError> {
    whole(text, 1, Parser::predicate)
}

pub fn parse_stmt(text: &str) -> Result<Stmt, ParseError> {
    whole(text, 1, Parser::stmt)
}

/// Strips a `#` comment and surrounding whitespace.
pub(crate) fn content(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

pub(crate) fn var_decl(p: &mut Parser) -> Result<VarDecl, ParseError> {
    p.keyword("var")?;
    let name = p.ident()?;
    p.expect(":")?;
    let kind = if p.is_keyword("scalar") {
        p.bump();
        Kind::Scalar
    } else if p.is_keyword("vector") {
        p.bump();
        p.expect("(")?;
        let size = p.ident()?;
        p.expect(")")?;
        Kind::Vector { size }
    } else {
        return Err(p.error("`scalar` or `vector(<size>)`"));
    };
    p.expect(",")?;
    let role = match p.peek().clone() {
        Tok::Ident(r) => match Role::from_keyword(&r) {
            Some(role @ (Role::In | Role::Out | Role::Index | Role::Aux)) => role,
            _ => return Err(p.error("`in`, `out`, `index` or `aux`")),
        },
        _ => return Err(p.error("`in`, `out`, `index` or `aux`")),
    };
    p.bump();
    Ok(VarDecl { name, kind, role })
}

fn labelled<T>(
    text: &str,
    line: usize,
    label: &str,
    f: impl FnOnce(&mut Parser) -> Result<T, ParseError>,
) -> Result<T, ParseError> {
    whole(text, line, |p| {
        p.keyword(label)?;
        p.expect(":")?;
        f(p)
    })
}

fn check_vectors(spec: &OperationSpec) -> Result<(), SpecError> {
    let vectors: Vec<&str> = spec
        .vars
        .iter()
        .filter(|v| matches!(v.kind, Kind::Vector { .. }))
        .map(|v| v.name.as_str())
        .collect();
    for e in spec.pre.exprs().chain(spec.post.exprs()) {
        let mut bad = None;
        e.walk(&mut |x| {
            let root = match x {
                Expr::Elem { array, .. } => Some(array.as_str()),
                Expr::Len(r) | Expr::Poly(r, _) | Expr::Ref(r) => Some(r.root.as_str()),
                _ => None,
            };
            if let Some(r) = root.filter(|r| !vectors.contains(r)) {
                bad.get_or_insert_with(|| r.to_string());
            }
        });
        if let Some(name) = bad {
            return Err(SpecError::Undeclared(name));
        }
    }
    Ok(())
}

pub fn parse_spec(text: &str) -> Result<OperationSpec, DslError> {
    let mut name = None;
    let mut vars = Vec::new();
    let mut pre = Predicate::truth();
    let mut post = Predicate::truth();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = content(raw);
        if body.is_empty() {
            continue;
        }
        let first = Parser::new(body, line)?.ident()?;
        match first.as_str() {
            "op" => name = Some(whole(body, line, |p| {
                p.keyword("op")?;
                p.ident()
            })?),
            "var" => vars.push(whole(body, line, var_decl)?),
            "pre" => pre = pre.and(&labelled(body, line, "pre", Parser::predicate)?),
            "post" => post = post.and(&labelled(body, line, "post", Parser::predicate)?),
            _ => {
                let p = Parser::new(body, line)?;
                return Err(p.error("`op`, `var`, `pre:` or `post:`").into());
            }
        }
    }
    let Some(name) = name else {
        return Err(ParseError { line: 1, column: 1, expected: "`op <name>`".into(), found: "none".into() }.into());
    };
    let spec = OperationSpec { name, vars, pre, post };
    spec.validate()?;
    check_vectors(&spec)?;
    Ok(spec)
}

/// Prints a spec in the syntax [`parse_spec`] reads.
pub fn render_spec(spec: &OperationSpec) -> String {
    let p = Printer::new(Notation::Ascii);
    let mut out = format!("op {}\n", spec.name);
    for v in &spec.vars {
        let kind = match &v.kind {
            Kind::Scalar => "scalar".to_string(),
            Kind::Vector { size } => format!("vector({size})"),
        };
        out.push_str(&format!("var {} : {kind}, {}\n", v.name, v.role.keyword()));
    }
    if !spec.pre.conjuncts.is_empty() {
        out.push_str(&format!("pre: {}\n", p.predicate(&spec.pre)));
    }
    out.push_str(&format!("post: {}\n", p.predicate(&spec.post)));
    out
}
