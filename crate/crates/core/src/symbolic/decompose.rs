use alloc::string::String;

use super::{differentiate, equal_by_sampling_default, simplify, substitute, SymbolicError};
use crate::expr::Expr;

/// `e = variable * slope + intercept`, with neither part mentioning `variable`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDecomposition {
    pub variable: String,
    pub slope: Expr,
    pub intercept: Expr,
}

impl LinearDecomposition {
    pub fn recompose(&self) -> Expr {
        simplify(&Expr::add(Expr::mul(Expr::Var(self.variable.clone()), self.slope.clone()), self.intercept.clone()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decomposition {
    Linear(LinearDecomposition),
    /// The second derivative is not identically zero; it is the witness.
    NotLinear {
        second_derivative: Expr,
    },
}

/// Splits `e` into slope and intercept in `v`, or reports that `e` is not
/// linear in `v`. Linearity is decided on the second derivative, so
/// algebraically disguised linear forms are recognized.
pub fn linear_decompose(e: &Expr, v: &str) -> Result<Decomposition, SymbolicError> {
    let first = differentiate(e, v);
    let mut slope = first.clone();
    if first.references(v) {
        let second = differentiate(&first, v);
        if !equal_by_sampling_default(&second, &Expr::Const(0.0))? {
            return Ok(Decomposition::NotLinear { second_derivative: second });
        }
        // Constant in v up to simplification; pin v anywhere.
        slope = substitute(&first, v, &Expr::Const(0.0));
    }
    let mut intercept = simplify(&Expr::sub(e.clone(), Expr::mul(Expr::var(v), first)));
    if intercept.references(v) {
        intercept = substitute(e, v, &Expr::Const(0.0));
    }
    let dec = LinearDecomposition { variable: String::from(v), slope, intercept };
    if !equal_by_sampling_default(&dec.recompose(), e)? {
        return Err(SymbolicError::DecompositionMismatch);
    }
    Ok(Decomposition::Linear(dec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::paper_model;

    fn v(n: &str) -> Expr {
        Expr::var(n)
    }

    fn linear(e: &Expr, var: &str) -> LinearDecomposition {
        match linear_decompose(e, var).unwrap() {
            Decomposition::Linear(d) => d,
            other => panic!("expected linear, got {other:?}"),
        }
    }

    #[test]
    fn exposure_equation_is_linear_in_instrument() {
        let d = linear(&paper_model().exposure_equation(), "Z");
        assert_eq!(d.slope, Expr::Const(2.0));
        assert_eq!(d.intercept, simplify(&Expr::add(v("U"), v("eX"))));
    }

    #[test]
    fn quadratic_outcome_is_not_linear() {
        match linear_decompose(&paper_model().outcome_equation(), "X").unwrap() {
            Decomposition::NotLinear { second_derivative } => {
                assert_eq!(second_derivative, Expr::Const(4.0))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn heterogeneous_slope() {
        let e = Expr::add(Expr::mul(Expr::add(Expr::Const(1.0), v("U")), v("X")), v("U"));
        let d = linear(&e, "X");
        assert_eq!(d.slope, simplify(&Expr::add(Expr::Const(1.0), v("U"))));
        assert_eq!(d.intercept, v("U"));
    }

    #[test]
    fn disguised_linear_form() {
        // X*(1+U) - X*U + X == 2X
        let e = Expr::add(
            Expr::sub(Expr::mul(v("X"), Expr::add(Expr::Const(1.0), v("U"))), Expr::mul(v("X"), v("U"))),
            v("X"),
        );
        let d = linear(&e, "X");
        assert_eq!(d.slope, Expr::Const(2.0));
        assert!(!d.intercept.references("X"));
        assert!(equal_by_sampling_default(&d.intercept, &Expr::Const(0.0)).unwrap());
    }

    #[test]
    fn slope_that_mentions_variable_but_is_constant() {
        // X^2/X is X wherever defined.
        let e = Expr::add(Expr::div(Expr::pow(v("X"), 3.0), Expr::pow(v("X"), 2.0)), v("U"));
        let d = linear(&e, "X");
        assert!(!d.slope.references("X") && !d.intercept.references("X"));
    }
}
