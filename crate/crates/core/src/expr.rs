//! Arithmetic expression trees used for structural equations.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::String;
use core::cmp::Ordering;
use core::fmt;

/// An arithmetic expression over named variables and real constants.
///
/// `Pow` carries a literal exponent; general `u^v` is not representable.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
    Exp(Box<Expr>),
    Log(Box<Expr>),
}

/// Failure while evaluating an expression at a point.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    UnknownVariable(String),
    DivisionByZero,
    LogOfNonPositive(f64),
    NonFinite,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::UnknownVariable(name) => write!(f, "unknown variable `{name}`"),
            EvalError::DivisionByZero => f.write_str("division by zero"),
            EvalError::LogOfNonPositive(x) => write!(f, "log of non-positive value {x}"),
            EvalError::NonFinite => f.write_str("non-finite intermediate value"),
        }
    }
}

impl core::error::Error for EvalError {}

// Constructors used heavily by the simplifier and differentiator.
#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn neg(e: Expr) -> Expr {
        Expr::Neg(Box::new(e))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Div(Box::new(a), Box::new(b))
    }

    pub fn pow(base: Expr, exponent: f64) -> Expr {
        Expr::Pow(Box::new(base), exponent)
    }

    pub fn exp(e: Expr) -> Expr {
        Expr::Exp(Box::new(e))
    }

    pub fn log(e: Expr) -> Expr {
        Expr::Log(Box::new(e))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    /// Visits every variable occurrence.
    pub fn for_each_var<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(name) => f(name),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Exp(a) | Expr::Log(a) => a.for_each_var(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.for_each_var(f);
                b.for_each_var(f);
            }
        }
    }

    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.for_each_var(&mut |v| {
            if !out.contains(v) {
                out.insert(String::from(v));
            }
        });
        out
    }

    pub fn references(&self, name: &str) -> bool {
        let mut found = false;
        self.for_each_var(&mut |v| found |= v == name);
        found
    }

    pub fn is_constant(&self) -> bool {
        let mut any = false;
        self.for_each_var(&mut |_| any = true);
        !any
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Exp(a) | Expr::Log(a) => 1 + a.size(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => 1 + a.size() + b.size(),
        }
    }

    /// Evaluates the expression, resolving variables through `lookup`.
    pub fn eval<F>(&self, lookup: &F) -> Result<f64, EvalError>
    where
        F: Fn(&str) -> Option<f64>,
    {
        let value = match self {
            Expr::Const(c) => *c,
            Expr::Var(name) => lookup(name).ok_or_else(|| EvalError::UnknownVariable(name.clone()))?,
            Expr::Neg(a) => -a.eval(lookup)?,
            Expr::Add(a, b) => a.eval(lookup)? + b.eval(lookup)?,
            Expr::Sub(a, b) => a.eval(lookup)? - b.eval(lookup)?,
            Expr::Mul(a, b) => a.eval(lookup)? * b.eval(lookup)?,
            Expr::Div(a, b) => apply_div(a.eval(lookup)?, b.eval(lookup)?)?,
            Expr::Pow(a, e) => apply_pow(a.eval(lookup)?, *e)?,
            Expr::Exp(a) => libm::exp(a.eval(lookup)?),
            Expr::Log(a) => apply_log(a.eval(lookup)?)?,
        };
        check_finite(value)
    }
}

pub(crate) fn check_finite(value: f64) -> Result<f64, EvalError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(EvalError::NonFinite)
    }
}

pub(crate) fn apply_div(num: f64, den: f64) -> Result<f64, EvalError> {
    if den == 0.0 {
        Err(EvalError::DivisionByZero)
    } else {
        Ok(num / den)
    }
}

pub(crate) fn apply_pow(base: f64, exponent: f64) -> Result<f64, EvalError> {
    if base == 0.0 && exponent < 0.0 {
        return Err(EvalError::DivisionByZero);
    }
    if exponent == 2.0 {
        Ok(base * base)
    } else if exponent == 1.0 {
        Ok(base)
    } else {
        Ok(libm::pow(base, exponent))
    }
}

pub(crate) fn apply_log(x: f64) -> Result<f64, EvalError> {
    if x <= 0.0 {
        Err(EvalError::LogOfNonPositive(x))
    } else {
        Ok(libm::log(x))
    }
}

/// Total order on expressions, used to canonicalize commutative chains.
pub(crate) fn canonical_cmp(a: &Expr, b: &Expr) -> Ordering {
    fn rank(e: &Expr) -> u8 {
        match e {
            Expr::Const(_) => 0,
            Expr::Var(_) => 1,
            Expr::Pow(..) => 2,
            Expr::Mul(..) => 3,
            Expr::Div(..) => 4,
            Expr::Add(..) => 5,
            Expr::Sub(..) => 6,
            Expr::Neg(_) => 7,
            Expr::Exp(_) => 8,
            Expr::Log(_) => 9,
        }
    }
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => x.total_cmp(y),
        (Expr::Var(x), Expr::Var(y)) => x.cmp(y),
        // Powers sort next to their base so X and X^2 are adjacent.
        (Expr::Pow(x, e), Expr::Pow(y, f)) => canonical_cmp(x, y).then(e.total_cmp(f)),
        (Expr::Neg(x), Expr::Neg(y)) | (Expr::Exp(x), Expr::Exp(y)) | (Expr::Log(x), Expr::Log(y)) => {
            canonical_cmp(x, y)
        }
        (Expr::Add(a1, a2), Expr::Add(b1, b2))
        | (Expr::Sub(a1, a2), Expr::Sub(b1, b2))
        | (Expr::Mul(a1, a2), Expr::Mul(b1, b2))
        | (Expr::Div(a1, a2), Expr::Div(b1, b2)) => canonical_cmp(a1, b1).then_with(|| canonical_cmp(a2, b2)),
        _ => rank(a).cmp(&rank(b)),
    }
}

// Printing: minimal parentheses such that the text reparses to the same tree.

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => PREC_ADD,
        Expr::Mul(..) | Expr::Div(..) => PREC_MUL,
        Expr::Neg(_) => PREC_NEG,
        Expr::Const(c) if c.is_sign_negative() => PREC_NEG,
        Expr::Pow(..) => PREC_POW,
        _ => PREC_ATOM,
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, wrap: bool) -> fmt::Result {
    if wrap {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(name) => f.write_str(name),
            Expr::Neg(a) => {
                f.write_str("-")?;
                // `-2` would reparse as a negative literal rather than a negation.
                let literal = matches!(**a, Expr::Const(c) if !c.is_sign_negative());
                write_wrapped(f, a, literal || precedence(a) < PREC_NEG)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                let (op, prec) = match self {
                    Expr::Add(..) => (" + ", PREC_ADD),
                    Expr::Sub(..) => (" - ", PREC_ADD),
                    Expr::Mul(..) => (" * ", PREC_MUL),
                    _ => (" / ", PREC_MUL),
                };
                write_wrapped(f, a, precedence(a) < prec)?;
                f.write_str(op)?;
                write_wrapped(f, b, precedence(b) <= prec)
            }
            Expr::Pow(a, e) => {
                write_wrapped(f, a, precedence(a) <= PREC_POW)?;
                write!(f, "^{e}")
            }
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Log(a) => write!(f, "log({a})"),
        }
    }
}
