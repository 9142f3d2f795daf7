//! Symbolic manipulation of structural equations and the identification
//! checks built on top of it.

mod assumptions;
mod decompose;
mod sampling;
mod simplify;

use alloc::boxed::Box;

use crate::expr::Expr;

pub use assumptions::{check_assumptions, AssumptionCheck, AssumptionReport, Verdict};
pub use decompose::{linear_decompose, Decomposition, LinearDecomposition};
pub use sampling::{equal_by_sampling, equal_by_sampling_default, SAMPLING_TOLERANCE, SAMPLING_TRIALS};
pub use simplify::simplify;

#[derive(Debug, Clone, PartialEq)]
pub enum SymbolicError {
    /// The sampling oracle could not find enough points where both sides evaluate.
    Undecidable { attempts: usize },
    /// A decomposition failed to reproduce the original expression.
    DecompositionMismatch,
}

impl core::fmt::Display for SymbolicError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SymbolicError::Undecidable { attempts } => {
                write!(f, "undecidable: no valid evaluation points found after {attempts} attempts")
            }
            SymbolicError::DecompositionMismatch => {
                f.write_str("undecidable: decomposition does not reproduce the expression")
            }
        }
    }
}

impl core::error::Error for SymbolicError {}

/// Structural partial derivative of `e` with respect to `v`; every other
/// variable is held fixed. The result is simplified.
pub fn differentiate(e: &Expr, v: &str) -> Expr {
    simplify(&derive(e, v))
}

fn derive(e: &Expr, v: &str) -> Expr {
    if !e.references(v) {
        return Expr::Const(0.0);
    }
    match e {
        Expr::Const(_) => Expr::Const(0.0),
        Expr::Var(name) => Expr::Const(if name == v { 1.0 } else { 0.0 }),
        Expr::Neg(a) => Expr::neg(derive(a, v)),
        Expr::Add(a, b) => Expr::add(derive(a, v), derive(b, v)),
        Expr::Sub(a, b) => Expr::sub(derive(a, v), derive(b, v)),
        Expr::Mul(a, b) => Expr::add(Expr::mul(derive(a, v), (**b).clone()), Expr::mul((**a).clone(), derive(b, v))),
        Expr::Div(a, b) => Expr::div(
            Expr::sub(Expr::mul(derive(a, v), (**b).clone()), Expr::mul((**a).clone(), derive(b, v))),
            Expr::pow((**b).clone(), 2.0),
        ),
        Expr::Pow(a, k) => Expr::mul(Expr::mul(Expr::Const(*k), Expr::pow((**a).clone(), k - 1.0)), derive(a, v)),
        Expr::Exp(a) => Expr::mul(e.clone(), derive(a, v)),
        Expr::Log(a) => Expr::div(derive(a, v), (**a).clone()),
    }
}

/// Replaces every occurrence of `v` with `replacement` and simplifies.
pub fn substitute(e: &Expr, v: &str, replacement: &Expr) -> Expr {
    simplify(&substitute_raw(e, v, replacement))
}

/// Replacement without simplification; keeps the tree shape of `e`.
pub(crate) fn substitute_raw(e: &Expr, v: &str, r: &Expr) -> Expr {
    let go = |x: &Expr| Box::new(substitute_raw(x, v, r));
    match e {
        Expr::Const(_) => e.clone(),
        Expr::Var(name) if name == v => r.clone(),
        Expr::Var(_) => e.clone(),
        Expr::Neg(a) => Expr::Neg(go(a)),
        Expr::Add(a, b) => Expr::Add(go(a), go(b)),
        Expr::Sub(a, b) => Expr::Sub(go(a), go(b)),
        Expr::Mul(a, b) => Expr::Mul(go(a), go(b)),
        Expr::Div(a, b) => Expr::Div(go(a), go(b)),
        Expr::Pow(a, k) => Expr::Pow(go(a), *k),
        Expr::Exp(a) => Expr::Exp(go(a)),
        Expr::Log(a) => Expr::Log(go(a)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::paper_model;
    use alloc::string::ToString;

    fn v(n: &str) -> Expr {
        Expr::var(n)
    }

    fn same(a: &Expr, b: &Expr) -> bool {
        equal_by_sampling_default(a, b).unwrap()
    }

    #[test]
    fn derivative_of_quadratic_outcome() {
        let m = paper_model();
        let d = differentiate(&m.outcome_equation(), "X");
        assert_eq!(d, Expr::mul(Expr::Const(4.0), v("X")));
        assert_eq!(d.to_string(), "4 * X");
    }

    #[test]
    fn derivative_of_term_free_of_variable_is_zero() {
        let e = Expr::add(v("U"), v("eY"));
        assert_eq!(differentiate(&e, "X"), Expr::Const(0.0));
    }

    #[test]
    fn reduced_form_derivative() {
        let m = paper_model();
        let reduced = substitute(&m.outcome_equation(), "X", &m.exposure_equation());
        let d = differentiate(&reduced, "Z");
        let expected =
            Expr::mul(Expr::Const(8.0), Expr::add(Expr::add(Expr::mul(Expr::Const(2.0), v("Z")), v("U")), v("eX")));
        assert!(same(&d, &expected));
        assert_eq!(d.to_string(), "8 * (U + 2 * Z + eX)");
    }

    #[test]
    fn substitution_examples() {
        let m = paper_model();
        let fy = m.outcome_equation();
        let fx = m.exposure_equation();
        let s = substitute(&fy, "X", &fx);
        let expected = Expr::add(Expr::add(Expr::mul(Expr::Const(2.0), Expr::pow(fx.clone(), 2.0)), v("U")), v("eY"));
        assert!(same(&s, &expected));
        assert_eq!(substitute(&v("X"), "X", &Expr::Const(0.0)), Expr::Const(0.0));
        assert_eq!(substitute(&v("U"), "X", &Expr::exp(v("Q"))), v("U"));
    }

    #[test]
    fn quotient_log_exp_rules() {
        let e = Expr::div(Expr::log(v("X")), Expr::exp(v("X")));
        let d = differentiate(&e, "X");
        let expected = Expr::div(Expr::sub(Expr::div(Expr::Const(1.0), v("X")), Expr::log(v("X"))), Expr::exp(v("X")));
        assert!(same(&d, &expected));
    }
}
