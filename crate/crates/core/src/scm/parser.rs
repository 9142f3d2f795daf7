//! Recursive-descent parser for the line-oriented model format.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::lexer::{lex_line, Tok, Token};
use super::{Diagnostic, Pos};
use crate::expr::Expr;

pub(crate) const FUNCTIONS: [&str; 2] = ["exp", "log"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Instrument,
    Exposure,
    Outcome,
}

impl Role {
    pub fn directive(self) -> &'static str {
        match self {
            Role::Instrument => "instrument",
            Role::Exposure => "exposure",
            Role::Outcome => "outcome",
        }
    }

    fn from_directive(name: &str) -> Option<Role> {
        match name {
            "instrument" => Some(Role::Instrument),
            "exposure" => Some(Role::Exposure),
            "outcome" => Some(Role::Outcome),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum RawBody {
    Exogenous { dist: String, args: Vec<f64>, pos: Pos },
    Endogenous { expr: Expr, refs: Vec<(String, Pos)> },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RawDefinition {
    pub name: String,
    pub pos: Pos,
    pub body: RawBody,
}

/// Syntactically valid model text that has not been validated yet.
#[derive(Debug, Clone, PartialEq)]
pub struct RawModel {
    pub(crate) definitions: Vec<RawDefinition>,
    pub(crate) roles: Vec<(Role, String, Pos)>,
    pub(crate) line_count: usize,
}

impl RawModel {
    /// Binds free parameters to constants in every structural equation.
    pub fn bind(&self, params: &[(String, f64)]) -> RawModel {
        let mut out = self.clone();
        for def in &mut out.definitions {
            if let RawBody::Endogenous { expr, refs } = &mut def.body {
                for (name, value) in params {
                    *expr = bind_var(expr, name, *value);
                }
                refs.retain(|(r, _)| !params.iter().any(|(p, _)| p == r));
            }
        }
        out
    }

    pub fn defines(&self, name: &str) -> bool {
        self.definitions.iter().any(|d| d.name == name)
    }

    /// Names referenced by equations but never defined.
    pub fn undefined_names(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for def in &self.definitions {
            if let RawBody::Endogenous { refs, .. } = &def.body {
                for (r, _) in refs {
                    if !self.definitions.iter().any(|d| &d.name == r) && !out.contains(r) {
                        out.push(r.clone());
                    }
                }
            }
        }
        out
    }
}

fn bind_var(e: &Expr, name: &str, value: f64) -> Expr {
    crate::symbolic::substitute_raw(e, name, &Expr::Const(value))
}

struct LineParser<'a> {
    tokens: &'a [Token],
    at: usize,
    line: usize,
    end_col: usize,
    refs: Vec<(String, Pos)>,
}

type PResult<T> = Result<T, Diagnostic>;

impl<'a> LineParser<'a> {
    fn peek(&self) -> Option<&'a Tok> {
        self.tokens.get(self.at).map(|t| &t.tok)
    }

    fn pos(&self) -> Pos {
        self.tokens.get(self.at).map(|t| t.pos).unwrap_or(Pos::new(self.line, self.end_col))
    }

    fn next(&mut self) -> Option<&'a Token> {
        let t = self.tokens.get(self.at);
        if t.is_some() {
            self.at += 1;
        }
        t
    }

    fn found(&self) -> String {
        match self.peek() {
            Some(t) => t.describe(),
            None => "end of line".to_string(),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> PResult<()> {
        if self.peek() == Some(&want) {
            self.at += 1;
            Ok(())
        } else {
            Err(Diagnostic::error(format!("expected {what}, found {}", self.found()), self.pos()))
        }
    }

    fn expect_end(&self) -> PResult<()> {
        match self.peek() {
            None => Ok(()),
            Some(_) => {
                Err(Diagnostic::error(format!("unexpected {} after end of statement", self.found()), self.pos()))
            }
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Pos)> {
        match self.tokens.get(self.at) {
            Some(Token { tok: Tok::Ident(name), pos }) => {
                self.at += 1;
                Ok((name.clone(), *pos))
            }
            _ => Err(Diagnostic::error(format!("expected {what}, found {}", self.found()), self.pos())),
        }
    }

    fn signed_number(&mut self) -> PResult<f64> {
        let negative = if self.peek() == Some(&Tok::Minus) {
            self.at += 1;
            true
        } else {
            false
        };
        match self.peek() {
            Some(Tok::Number(x)) => {
                self.at += 1;
                Ok(if negative { -*x } else { *x })
            }
            _ => Err(Diagnostic::error(format!("expected number, found {}", self.found()), self.pos())),
        }
    }

    // expr := term (('+' | '-') term)*
    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.at += 1;
                    lhs = Expr::add(lhs, self.term()?);
                }
                Some(Tok::Minus) => {
                    self.at += 1;
                    lhs = Expr::sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    // term := unary (('*' | '/') unary)*
    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.at += 1;
                    lhs = Expr::mul(lhs, self.unary()?);
                }
                Some(Tok::Slash) => {
                    self.at += 1;
                    lhs = Expr::div(lhs, self.unary()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    // unary := '-' unary | power
    // A minus directly in front of a bare literal folds into a negative constant.
    fn unary(&mut self) -> PResult<Expr> {
        if self.peek() != Some(&Tok::Minus) {
            return self.power();
        }
        self.at += 1;
        if let Some(Tok::Number(x)) = self.peek() {
            if self.tokens.get(self.at + 1).map(|t| &t.tok) != Some(&Tok::Caret) {
                self.at += 1;
                return Ok(Expr::Const(-*x));
            }
        }
        Ok(Expr::neg(self.unary()?))
    }

    // power := primary ('^' unary)?   (right-associative through `unary`)
    fn power(&mut self) -> PResult<Expr> {
        let base = self.primary()?;
        if self.peek() != Some(&Tok::Caret) {
            return Ok(base);
        }
        let caret = self.pos();
        self.at += 1;
        let refs_before = self.refs.len();
        let exponent = self.unary()?;
        if self.refs.len() != refs_before || !exponent.is_constant() {
            return Err(Diagnostic::error("exponent must be a constant; general `u^v` is not supported", caret));
        }
        let value = exponent
            .eval(&|_| None)
            .map_err(|e| Diagnostic::error(format!("invalid constant exponent: {e}"), caret))?;
        Ok(Expr::pow(base, value))
    }

    fn primary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        match self.next().map(|t| &t.tok) {
            Some(Tok::Number(x)) => Ok(Expr::Const(*x)),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                if self.peek() == Some(&Tok::LParen) {
                    self.at += 1;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    return match name.as_str() {
                        "exp" => Ok(Expr::exp(arg)),
                        "log" => Ok(Expr::log(arg)),
                        _ => Err(Diagnostic::error(format!("unknown function `{name}`"), pos)),
                    };
                }
                if FUNCTIONS.contains(&name.as_str()) {
                    return Err(Diagnostic::error(format!("`{name}` is a reserved function name"), pos));
                }
                self.refs.push((name.clone(), pos));
                Ok(Expr::Var(name.clone()))
            }
            Some(other) => Err(Diagnostic::error(format!("expected expression, found {}", other.describe()), pos)),
            None => Err(Diagnostic::error("expected expression, found end of line", pos)),
        }
    }
}

enum Statement {
    Definition(RawDefinition),
    Role(Role, String, Pos),
}

fn parse_statement(tokens: &[Token], line: usize, end_col: usize) -> PResult<Statement> {
    let mut p = LineParser { tokens, at: 0, line, end_col, refs: Vec::new() };
    if let Some(Token { tok: Tok::Directive(d), pos }) = tokens.first() {
        p.at = 1;
        let role =
            Role::from_directive(d).ok_or_else(|| Diagnostic::error(format!("unknown directive `@{d}`"), *pos))?;
        let (name, _) = p.ident("variable name")?;
        p.expect_end()?;
        return Ok(Statement::Role(role, name, *pos));
    }
    let (name, pos) = p.ident("a definition (`name ~ Dist(...)` or `name = expr`)")?;
    if FUNCTIONS.contains(&name.as_str()) {
        return Err(Diagnostic::error(format!("`{name}` is a reserved function name"), pos));
    }
    match p.peek() {
        Some(Tok::Tilde) => {
            p.at += 1;
            let (dist, dist_pos) = p.ident("distribution name")?;
            if !super::model::DISTRIBUTIONS.contains(&dist.as_str()) {
                return Err(Diagnostic::error(
                    format!("unknown distribution `{dist}` (expected Bernoulli, Normal, Uniform or PointMass)"),
                    dist_pos,
                ));
            }
            p.expect(Tok::LParen, "`(`")?;
            let mut args = alloc::vec![p.signed_number()?];
            while p.peek() == Some(&Tok::Comma) {
                p.at += 1;
                args.push(p.signed_number()?);
            }
            p.expect(Tok::RParen, "`)`")?;
            p.expect_end()?;
            Ok(Statement::Definition(RawDefinition {
                name,
                pos,
                body: RawBody::Exogenous { dist, args, pos: dist_pos },
            }))
        }
        Some(Tok::Equals) => {
            p.at += 1;
            let expr = p.expr()?;
            p.expect_end()?;
            Ok(Statement::Definition(RawDefinition { name, pos, body: RawBody::Endogenous { expr, refs: p.refs } }))
        }
        _ => Err(Diagnostic::error(format!("expected `~` or `=`, found {}", p.found()), p.pos())),
    }
}

/// Parses a single right-hand-side expression.
pub fn parse_expr(text: &str) -> Result<Expr, Diagnostic> {
    let tokens = lex_line(text, 1)?;
    let mut p = LineParser { tokens: &tokens, at: 0, line: 1, end_col: text.chars().count() + 1, refs: Vec::new() };
    let e = p.expr()?;
    p.expect_end()?;
    Ok(e)
}

/// Parses model text without semantic validation.
pub fn parse_raw(text: &str) -> Result<RawModel, Vec<Diagnostic>> {
    let mut diagnostics = Vec::new();
    let mut model = RawModel { definitions: Vec::new(), roles: Vec::new(), line_count: 0 };
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        model.line_count = line_no;
        let tokens = match lex_line(line, line_no) {
            Ok(t) => t,
            Err(d) => {
                diagnostics.push(d);
                continue;
            }
        };
        if tokens.is_empty() {
            continue;
        }
        let end_col = line.chars().count() + 1;
        match parse_statement(&tokens, line_no, end_col) {
            Ok(Statement::Definition(def)) => model.definitions.push(def),
            Ok(Statement::Role(role, name, pos)) => model.roles.push((role, name, pos)),
            Err(d) => diagnostics.push(d),
        }
    }
    if diagnostics.is_empty() {
        Ok(model)
    } else {
        Err(diagnostics)
    }
}
