//! Causal estimands computed by Monte Carlo over potential outcomes.
//!
//! Every estimand that needs instrument effects is read off a single coupled
//! run of [`EffectsConsumer`]: each unit is evaluated under do(Z=0),
//! do(Z=1) and without intervention using the same exogenous draw, so
//! differences between estimands share their noise. Ratio standard errors use
//! the first-order delta method with the run's sample covariances.

use core::fmt;

use crate::mc::{
    run_population, stat, Accumulator, AceConsumer, EffectsConsumer, Executor, McError, PopulationRun, RunSpec,
    Simulator,
};
use crate::scm::StructuralModel;
use crate::symbolic::{check_assumptions, AssumptionReport};

/// Denominators smaller than this make the instrument irrelevant.
pub const RELEVANCE_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateKind {
    Ade,
    WaldTrue,
    WaldObs,
    Ace,
    ReducedFormDydz,
    Diagnostic,
}

impl EstimateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimateKind::Ade => "ade",
            EstimateKind::WaldTrue => "wald_true",
            EstimateKind::WaldObs => "wald_obs",
            EstimateKind::Ace => "ace",
            EstimateKind::ReducedFormDydz => "reduced_form_dydz",
            EstimateKind::Diagnostic => "diagnostic",
        }
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub mc_se: f64,
    pub n: u64,
    pub seed: u64,
    pub kind: EstimateKind,
}

impl Estimate {
    /// sqrt(se_a^2 + se_b^2)
    pub fn combined_se(&self, other: &Estimate) -> f64 {
        libm::sqrt(self.mc_se * self.mc_se + other.mc_se * other.mc_se)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EstimandError {
    Mc(McError),
    /// The instrument does not move the exposure on average.
    NoRelevance {
        denominator: f64,
    },
    /// One instrument arm has no units.
    InsufficientData {
        empty_arm: u8,
    },
}

impl fmt::Display for EstimandError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimandError::Mc(e) => write!(f, "model-domain error: {e}"),
            EstimandError::NoRelevance { denominator } => write!(
                f,
                "no relevance: instrument effect on exposure is {denominator:e} (|.| < {RELEVANCE_EPSILON:e})"
            ),
            EstimandError::InsufficientData { empty_arm } => {
                write!(f, "insufficient data: no units with instrument = {empty_arm}")
            }
        }
    }
}

impl core::error::Error for EstimandError {}

impl From<McError> for EstimandError {
    fn from(e: McError) -> Self {
        EstimandError::Mc(e)
    }
}

/// All instrument-effect statistics from one coupled run.
#[derive(Debug, Clone)]
pub struct EffectsSummary {
    run: PopulationRun,
    total: Accumulator,
}

impl EffectsSummary {
    pub fn compute<E: Executor>(
        model: &StructuralModel,
        spec: RunSpec,
        exec: &E,
    ) -> Result<EffectsSummary, EstimandError> {
        let sim = Simulator::new(model);
        let run = run_population(&sim, &EffectsConsumer, spec, exec)?;
        let total = run.total();
        Ok(EffectsSummary { run, total })
    }

    pub fn run(&self) -> &PopulationRun {
        &self.run
    }

    pub fn invalid_units(&self) -> u64 {
        self.run.invalid
    }

    fn estimate(&self, value: f64, mc_se: f64, kind: EstimateKind) -> Estimate {
        Estimate { value, mc_se, n: self.run.n, seed: self.run.seed, kind }
    }

    /// Population mean of one [`stat`] column.
    pub fn mean(&self, column: usize, kind: EstimateKind) -> Estimate {
        self.estimate(self.total.mean(column), self.total.std_error(column), kind)
    }

    pub fn ade(&self) -> Estimate {
        self.mean(stat::DYDX, EstimateKind::Ade)
    }

    pub fn reduced_form_dydz(&self) -> Estimate {
        self.mean(stat::DYDZ, EstimateKind::ReducedFormDydz)
    }

    fn wald_parts(&self) -> Result<(f64, f64), EstimandError> {
        let den = self.total.mean(stat::BETA_ZX);
        if den.abs() < RELEVANCE_EPSILON {
            return Err(EstimandError::NoRelevance { denominator: den });
        }
        Ok((self.total.mean(stat::BETA_ZY) / den, den))
    }

    /// E[beta_zy] / E[beta_zx].
    pub fn wald_true(&self) -> Result<Estimate, EstimandError> {
        let (ratio, den) = self.wald_parts()?;
        let se = self.total.linear_std_error(&[(stat::BETA_ZY, 1.0 / den), (stat::BETA_ZX, -ratio / den)]);
        Ok(self.estimate(ratio, se, EstimateKind::WaldTrue))
    }

    /// Difference of arm means of Y over difference of arm means of X, from
    /// factual data only.
    pub fn wald_observational(&self) -> Result<Estimate, EstimandError> {
        let [arm0, arm1] = [&self.run.groups[0], &self.run.groups[1]];
        for (arm, acc) in [(0u8, arm0), (1u8, arm1)] {
            if acc.count() == 0 {
                return Err(EstimandError::InsufficientData { empty_arm: arm });
            }
        }
        let (n0, n1) = (arm0.count() as f64, arm1.count() as f64);
        let num = arm1.mean(stat::Y) - arm0.mean(stat::Y);
        let den = arm1.mean(stat::X) - arm0.mean(stat::X);
        if den.abs() < RELEVANCE_EPSILON {
            return Err(EstimandError::NoRelevance { denominator: den });
        }
        let ratio = num / den;
        let var_num = arm1.variance(stat::Y) / n1 + arm0.variance(stat::Y) / n0;
        let var_den = arm1.variance(stat::X) / n1 + arm0.variance(stat::X) / n0;
        let cov = arm1.covariance(stat::X, stat::Y) / n1 + arm0.covariance(stat::X, stat::Y) / n0;
        let var = (var_num - 2.0 * ratio * cov + ratio * ratio * var_den) / (den * den);
        Ok(self.estimate(ratio, libm::sqrt(var.max(0.0)), EstimateKind::WaldObs))
    }

    /// wald_true - ade and its coupled delta-method standard error.
    pub fn gap(&self) -> Result<(f64, f64), EstimandError> {
        let (ratio, den) = self.wald_parts()?;
        let gap = ratio - self.total.mean(stat::DYDX);
        let se = self.total.linear_std_error(&[
            (stat::BETA_ZY, 1.0 / den),
            (stat::BETA_ZX, -ratio / den),
            (stat::DYDX, -1.0),
        ]);
        Ok((gap, se))
    }

    /// Sample Cov(beta_zx, dydx).
    pub fn nosh_covariance(&self) -> Estimate {
        let t = &self.total;
        let se = t.linear_std_error(&[
            (stat::BETA_ZX_DYDX, 1.0),
            (stat::BETA_ZX, -t.mean(stat::DYDX)),
            (stat::DYDX, -t.mean(stat::BETA_ZX)),
        ]);
        self.estimate(t.covariance(stat::BETA_ZX, stat::DYDX), se, EstimateKind::Diagnostic)
    }

    /// Sample Var(beta_zx).
    pub fn var_beta_zx(&self) -> Estimate {
        let t = &self.total;
        let se = t.linear_std_error(&[(stat::BETA_ZX_SQ, 1.0), (stat::BETA_ZX, -2.0 * t.mean(stat::BETA_ZX))]);
        self.estimate(t.variance(stat::BETA_ZX), se, EstimateKind::Diagnostic)
    }
}

/// Average derivative effect E[dY/dX].
pub fn ade<E: Executor>(model: &StructuralModel, spec: RunSpec, exec: &E) -> Result<Estimate, EstimandError> {
    Ok(EffectsSummary::compute(model, spec, exec)?.ade())
}

/// Wald estimand from potential outcomes, E[beta_zy] / E[beta_zx].
pub fn wald_true<E: Executor>(model: &StructuralModel, spec: RunSpec, exec: &E) -> Result<Estimate, EstimandError> {
    EffectsSummary::compute(model, spec, exec)?.wald_true()
}

/// Wald ratio as an analyst would compute it from factual (Z, X, Y).
pub fn wald_observational<E: Executor>(
    model: &StructuralModel,
    spec: RunSpec,
    exec: &E,
) -> Result<Estimate, EstimandError> {
    EffectsSummary::compute(model, spec, exec)?.wald_observational()
}

/// Average reduced-form derivative E[dY/dZ].
pub fn reduced_form_dydz<E: Executor>(
    model: &StructuralModel,
    spec: RunSpec,
    exec: &E,
) -> Result<Estimate, EstimandError> {
    Ok(EffectsSummary::compute(model, spec, exec)?.reduced_form_dydz())
}

/// E[Y^(X=x_to) - Y^(X=x_from)].
pub fn ace<E: Executor>(
    model: &StructuralModel,
    x_from: f64,
    x_to: f64,
    spec: RunSpec,
    exec: &E,
) -> Result<Estimate, EstimandError> {
    let sim = Simulator::new(model);
    let run = run_population(&sim, &AceConsumer { from: x_from, to: x_to }, spec, exec)?;
    let total = run.total();
    Ok(Estimate {
        value: total.mean(0),
        mc_se: total.std_error(0),
        n: spec.n,
        seed: spec.seed,
        kind: EstimateKind::Ace,
    })
}

/// Estimands, identity diagnostics and symbolic verdicts for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub ade: Estimate,
    pub wald_true: Estimate,
    pub wald_obs: Estimate,
    /// wald_true - ade
    pub gap: f64,
    /// Delta-method standard error of `gap` from the coupled run.
    pub gap_mc_se: f64,
    /// E[beta_zy - dydx * beta_zx]
    pub identity_gap: Estimate,
    /// Cov(beta_zx, dydx)
    pub nosh_cov: Estimate,
    pub var_beta_zx: Estimate,
    pub mean_exposure: Estimate,
    pub mean_beta_zx: Estimate,
    pub mean_beta_zy: Estimate,
    pub reduced_form: Estimate,
    pub invalid_units: u64,
    pub assumptions: AssumptionReport,
}

impl GapReport {
    pub fn from_summary(summary: &EffectsSummary, assumptions: AssumptionReport) -> Result<GapReport, EstimandError> {
        let (gap, gap_mc_se) = summary.gap()?;
        Ok(GapReport {
            ade: summary.ade(),
            wald_true: summary.wald_true()?,
            wald_obs: summary.wald_observational()?,
            gap,
            gap_mc_se,
            identity_gap: summary.mean(stat::IDENTITY_RESIDUAL, EstimateKind::Diagnostic),
            nosh_cov: summary.nosh_covariance(),
            var_beta_zx: summary.var_beta_zx(),
            mean_exposure: summary.mean(stat::X, EstimateKind::Diagnostic),
            mean_beta_zx: summary.mean(stat::BETA_ZX, EstimateKind::Diagnostic),
            mean_beta_zy: summary.mean(stat::BETA_ZY, EstimateKind::Diagnostic),
            reduced_form: summary.reduced_form_dydz(),
            invalid_units: summary.invalid_units(),
            assumptions,
        })
    }
}

/// One coupled run plus the symbolic assumption report.
pub fn diagnostics<E: Executor>(model: &StructuralModel, spec: RunSpec, exec: &E) -> Result<GapReport, EstimandError> {
    let summary = EffectsSummary::compute(model, spec, exec)?;
    GapReport::from_summary(&summary, check_assumptions(model))
}
