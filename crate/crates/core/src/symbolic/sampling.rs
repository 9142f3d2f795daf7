//! Probabilistic identity testing by evaluation at random points.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use super::SymbolicError;
use crate::expr::Expr;
use crate::rng;

pub const SAMPLING_TRIALS: usize = 64;
pub const SAMPLING_TOLERANCE: f64 = 1e-9;

const SAMPLING_SEED: u64 = 0x5eed_1de7_0001;
/// Attempts allowed per requested trial before giving up.
const RETRY_FACTOR: usize = 16;

/// Tests `a == b` at `trials` points with every variable drawn uniformly
/// from [-10, 10]. Points where either side fails to evaluate are re-drawn.
pub fn equal_by_sampling(a: &Expr, b: &Expr, trials: usize, tol: f64) -> Result<bool, SymbolicError> {
    let trials = trials.max(1);
    let mut names: BTreeSet<String> = a.variables();
    names.extend(b.variables());
    let names: Vec<String> = names.into_iter().collect();
    let mut point = alloc::vec![0.0; names.len()];

    let budget = trials * RETRY_FACTOR;
    let mut accepted = 0;
    for attempt in 0..budget {
        for (k, slot) in point.iter_mut().enumerate() {
            *slot = -10.0 + 20.0 * rng::uniform(SAMPLING_SEED, attempt as u64, k as u64);
        }
        let lookup = |name: &str| names.iter().position(|n| n == name).map(|i| point[i]);
        let (Ok(va), Ok(vb)) = (a.eval(&lookup), b.eval(&lookup)) else {
            continue;
        };
        if (va - vb).abs() > tol * (1.0 + va.abs().max(vb.abs())) {
            return Ok(false);
        }
        accepted += 1;
        if accepted == trials {
            return Ok(true);
        }
    }
    Err(SymbolicError::Undecidable { attempts: budget })
}

/// [`equal_by_sampling`] with 64 points and relative tolerance 1e-9.
pub fn equal_by_sampling_default(a: &Expr, b: &Expr) -> Result<bool, SymbolicError> {
    equal_by_sampling(a, b, SAMPLING_TRIALS, SAMPLING_TOLERANCE)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Expr {
        Expr::var("X")
    }

    #[test]
    fn detects_algebraic_identity() {
        let a = Expr::pow(Expr::add(x(), Expr::Const(1.0)), 2.0);
        let b = Expr::add(Expr::add(Expr::pow(x(), 2.0), Expr::mul(Expr::Const(2.0), x())), Expr::Const(1.0));
        assert_eq!(equal_by_sampling_default(&a, &b), Ok(true));
    }

    #[test]
    fn detects_difference() {
        assert_eq!(equal_by_sampling_default(&Expr::pow(x(), 2.0), &x()), Ok(false));
    }

    #[test]
    fn redraws_points_outside_the_domain() {
        let a = Expr::exp(Expr::log(x()));
        assert_eq!(equal_by_sampling_default(&a, &x()), Ok(true));
    }

    #[test]
    fn nowhere_defined_is_undecidable() {
        let a = Expr::log(Expr::neg(Expr::pow(x(), 2.0)));
        assert!(matches!(equal_by_sampling(&a, &x(), 4, 1e-9), Err(SymbolicError::Undecidable { attempts: 64 })));
    }

    #[test]
    fn deterministic() {
        let a = Expr::div(Expr::Const(1.0), Expr::sub(x(), Expr::Const(3.0)));
        let r1 = equal_by_sampling_default(&a, &a);
        let r2 = equal_by_sampling_default(&a, &a);
        assert_eq!(r1, r2);
        assert_eq!(r1, Ok(true));
    }
}
