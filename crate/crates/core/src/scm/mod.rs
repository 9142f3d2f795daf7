//! The structural-model text format: `name ~ Dist(args)` for exogenous
//! variables, `name = expr` for structural equations, and `@instrument`,
//! `@exposure`, `@outcome` role directives. `#` starts a comment.

mod lexer;
mod model;
mod parser;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write};

pub use model::{validate, Body, Definition, Distribution, Roles, StructuralModel};
pub use parser::{parse_expr, parse_raw, RawModel, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl Pos {
    pub fn new(line: usize, column: usize) -> Pos {
        Pos { line, column }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// A message tied to a 1-based line and column of the model source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub line: usize,
    pub column: usize,
}

impl Diagnostic {
    pub fn error(message: impl Into<String>, pos: Pos) -> Diagnostic {
        Diagnostic { severity: Severity::Error, message: message.into(), line: pos.line, column: pos.column }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{level}: {} at {}:{}", self.message, self.line, self.column)
    }
}

/// Parses and validates model source text.
pub fn parse_model(text: &str) -> Result<StructuralModel, Vec<Diagnostic>> {
    validate(&parse_raw(text)?)
}

/// Renders a model in canonical form; `parse_model` on the output yields an
/// equal model.
pub fn pretty_print(model: &StructuralModel) -> String {
    let mut out = String::new();
    for def in model.definitions() {
        // Writing into a String cannot fail.
        let _ = match &def.body {
            Body::Exogenous(d) => writeln!(out, "{} ~ {d}", def.name),
            Body::Endogenous(e) => writeln!(out, "{} = {e}", def.name),
        };
    }
    let roles = model.roles();
    let _ = writeln!(out, "@instrument {}", roles.instrument);
    let _ = writeln!(out, "@exposure {}", roles.exposure);
    let _ = writeln!(out, "@outcome {}", roles.outcome);
    out
}

/// The worked example with a binary instrument, homogeneous first stage and
/// quadratic outcome equation.
pub const PAPER_MODEL: &str = "\
# Binary instrument, homogeneous instrument-exposure effect, quadratic outcome.
Z ~ Bernoulli(0.3)
U ~ Bernoulli(0.5)
eX ~ Normal(0, 1)
eY ~ Normal(0, 1)
X = 2*Z + U + eX
Y = 2*X^2 + U + eY
@instrument Z
@exposure X
@outcome Y
";

/// The built-in example model.
pub fn paper_model() -> StructuralModel {
    parse_model(PAPER_MODEL).expect("built-in model is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use alloc::string::ToString;

    #[test]
    fn builtin_model_has_six_definitions() {
        let m = paper_model();
        assert_eq!(m.definitions().len(), 6);
        assert_eq!(m.roles().instrument, "Z");
        assert_eq!(
            m.equation("Y"),
            Some(&Expr::add(
                Expr::add(Expr::mul(Expr::Const(2.0), Expr::pow(Expr::var("X"), 2.0)), Expr::var("U")),
                Expr::var("eY")
            ))
        );
    }

    #[test]
    fn minimal_identity_model() {
        let m = parse_model("Z ~ Bernoulli(0.5)\nX = Z\nY = X\n@instrument Z\n@exposure X\n@outcome Y").unwrap();
        let text = pretty_print(&m);
        assert_eq!(text.lines().count(), 6);
        assert_eq!(parse_model(&text).unwrap(), m);
    }

    #[test]
    fn builtin_model_round_trips() {
        let m = paper_model();
        let text = pretty_print(&m);
        assert!(text.contains("Y = 2 * X^2 + U + eY"));
        assert_eq!(parse_model(&text).unwrap(), m);
    }

    #[test]
    fn grouping_parentheses_normalize_away() {
        let a = parse_model("Z ~ Bernoulli(0.5)\nX = ((Z))\nY = (X)\n@instrument Z\n@exposure X\n@outcome Y").unwrap();
        let b = parse_model("Z ~ Bernoulli(0.5)\nX = Z\nY = X\n@instrument Z\n@exposure X\n@outcome Y").unwrap();
        assert_eq!(a, b);
        assert_eq!(pretty_print(&a), pretty_print(&b));
    }

    #[test]
    fn diagnostics_render_with_position() {
        let err = parse_model("Z ~ Bernoulli(0.5)\nX = Z\nY = 2*X^2 + Z\n@instrument Z\n@exposure X\n@outcome Y")
            .unwrap_err();
        assert_eq!(err[0].to_string(), "error: instrument appears in outcome equation (`Y` references `Z`) at 3:1");
    }
}
