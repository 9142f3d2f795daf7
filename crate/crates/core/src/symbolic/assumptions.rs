use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{
    differentiate, equal_by_sampling_default, linear_decompose, simplify, substitute, Decomposition, SymbolicError,
};
use crate::expr::Expr;
use crate::scm::StructuralModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Fails,
    Undecidable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::Undecidable => "undecidable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub verdict: Verdict,
    /// dX/dZ for homogeneity, d2Y/dX2 for linearity.
    pub witness: Expr,
    /// Slope of the linear decomposition, when one exists.
    pub slope: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// Additive homogeneity of the instrument effect on the exposure.
    pub homogeneity_zx: AssumptionCheck,
    /// Additive linearity of the outcome equation in the exposure.
    pub linearity_yx: AssumptionCheck,
    pub exclusion_structural: bool,
    pub notes: Vec<String>,
}

/// True when `e` does not vary with any variable it mentions.
fn is_constant_expr(e: &Expr) -> Result<bool, SymbolicError> {
    if e.is_constant() {
        return Ok(true);
    }
    for w in e.variables() {
        if !equal_by_sampling_default(&differentiate(e, &w), &Expr::Const(0.0))? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn homogeneity(model: &StructuralModel, notes: &mut Vec<String>) -> AssumptionCheck {
    let fx = model.exposure_equation();
    let z = model.instrument();
    let slope = match linear_decompose(&fx, z) {
        Ok(Decomposition::Linear(d)) => d.slope,
        Ok(Decomposition::NotLinear { .. }) => {
            notes.push(format!(
                "`{}` is not linear in `{z}` symbolically; with a binary instrument the per-unit effect is the chord {}(1) - {}(0)",
                model.exposure(),
                model.exposure(),
                model.exposure()
            ));
            simplify(&Expr::sub(substitute(&fx, z, &Expr::Const(1.0)), substitute(&fx, z, &Expr::Const(0.0))))
        }
        Err(e) => {
            notes.push(format!("homogeneity check: {e}"));
            return AssumptionCheck { verdict: Verdict::Undecidable, witness: differentiate(&fx, z), slope: None };
        }
    };
    let verdict = match is_constant_expr(&slope) {
        Ok(true) => Verdict::Holds,
        Ok(false) => Verdict::Fails,
        Err(e) => {
            notes.push(format!("homogeneity check: {e}"));
            Verdict::Undecidable
        }
    };
    AssumptionCheck { verdict, witness: slope.clone(), slope: Some(slope) }
}

fn linearity(model: &StructuralModel, notes: &mut Vec<String>) -> AssumptionCheck {
    let fy = model.outcome_equation();
    let x = model.exposure();
    let witness = differentiate(&differentiate(&fy, x), x);
    match linear_decompose(&fy, x) {
        Ok(Decomposition::Linear(d)) => AssumptionCheck { verdict: Verdict::Holds, witness, slope: Some(d.slope) },
        Ok(Decomposition::NotLinear { second_derivative }) => {
            AssumptionCheck { verdict: Verdict::Fails, witness: second_derivative, slope: None }
        }
        Err(e) => {
            notes.push(format!("linearity check: {e}"));
            AssumptionCheck { verdict: Verdict::Undecidable, witness, slope: None }
        }
    }
}

const MAX_SUPPORT_POINTS: usize = 4096;

/// Distinct values of the exposure when every exogenous input has finite
/// support and the product space is small; `None` otherwise.
pub(crate) fn exposure_support(model: &StructuralModel) -> Option<Vec<f64>> {
    let fx = model.exposure_equation();
    let mut inputs: Vec<(String, Vec<f64>)> = Vec::new();
    let mut size = 1usize;
    for name in fx.variables() {
        let (_, _, dist) = model.exogenous().find(|(_, n, _)| *n == name)?;
        let support = dist.finite_support()?;
        size = size.checked_mul(support.len()).filter(|s| *s <= MAX_SUPPORT_POINTS)?;
        inputs.push((name, support));
    }
    let mut values: Vec<f64> = Vec::new();
    for mut idx in 0..size {
        let mut point = Vec::with_capacity(inputs.len());
        for (_, support) in &inputs {
            point.push(support[idx % support.len()]);
            idx /= support.len();
        }
        let lookup = |n: &str| inputs.iter().position(|(m, _)| m == n).map(|i| point[i]);
        let v = fx.eval(&lookup).ok()?;
        if !values.contains(&v) {
            values.push(v);
        }
    }
    Some(values)
}

/// Symbolic identification checks on a validated model.
pub fn check_assumptions(model: &StructuralModel) -> AssumptionReport {
    let mut notes = Vec::new();
    let homogeneity_zx = homogeneity(model, &mut notes);
    let linearity_yx = linearity(model, &mut notes);
    let exclusion_structural = !model.outcome_equation().references(model.instrument());
    if let Some(support) = exposure_support(model) {
        if support.len() <= 2 && linearity_yx.verdict != Verdict::Holds {
            notes.push(format!(
                "exposure `{}` takes at most two values; any outcome equation is additive linear on that support, \
                 but the symbolic check ignores support",
                model.exposure()
            ));
        }
    }
    AssumptionReport { homogeneity_zx, linearity_yx, exclusion_structural, notes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::{paper_model, parse_model};

    fn model(body: &str) -> StructuralModel {
        parse_model(&format!(
            "Z ~ Bernoulli(0.5)\nU ~ Bernoulli(0.5)\neX ~ Normal(0,1)\neY ~ Normal(0,1)\n{body}\n@instrument Z\n@exposure X\n@outcome Y"
        ))
        .unwrap()
    }

    #[test]
    fn builtin_model_homogeneous_but_not_linear() {
        let r = check_assumptions(&paper_model());
        assert_eq!(r.homogeneity_zx.verdict, Verdict::Holds);
        assert_eq!(r.homogeneity_zx.witness, Expr::Const(2.0));
        assert_eq!(r.linearity_yx.verdict, Verdict::Fails);
        assert_eq!(r.linearity_yx.witness, Expr::Const(4.0));
        assert!(r.exclusion_structural);
    }

    #[test]
    fn heterogeneous_first_stage() {
        let r = check_assumptions(&model("X = 2*Z + Z*U + eX\nY = X + eY"));
        assert_eq!(r.homogeneity_zx.verdict, Verdict::Fails);
        let w = &r.homogeneity_zx.witness;
        assert!(!w.is_constant());
        assert!(equal_by_sampling_default(w, &Expr::add(Expr::Const(2.0), Expr::var("U"))).unwrap());
    }

    #[test]
    fn linear_outcome_both_hold() {
        let r = check_assumptions(&model("X = 2*Z + eX\nY = 3*X + eY"));
        assert_eq!(r.homogeneity_zx.verdict, Verdict::Holds);
        assert_eq!(r.linearity_yx.verdict, Verdict::Holds);
        assert_eq!(r.linearity_yx.slope, Some(Expr::Const(3.0)));
    }

    #[test]
    fn nonlinear_in_binary_instrument_uses_chord() {
        let r = check_assumptions(&model("X = 3*Z^2 + eX\nY = X"));
        assert_eq!(r.homogeneity_zx.verdict, Verdict::Holds);
        assert_eq!(r.homogeneity_zx.witness, Expr::Const(3.0));
        assert!(!r.notes.is_empty());
    }

    #[test]
    fn binary_exposure_gets_note() {
        let r = check_assumptions(&model("X = Z\nY = X^2 + eY"));
        assert_eq!(r.linearity_yx.verdict, Verdict::Fails);
        assert!(r.notes.iter().any(|n| n.contains("at most two values")));
    }
}
