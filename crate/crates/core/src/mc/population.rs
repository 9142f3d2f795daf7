use alloc::vec::Vec;

use super::accumulator::Accumulator;
use super::engine::{Simulator, UnitDraw, Workspace};
use crate::expr::EvalError;

pub const DEFAULT_CHUNK_SIZE: usize = 65_536;

/// Runs independent jobs, returning results in job order.
pub trait Executor {
    fn map<T, F>(&self, jobs: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync;
}

/// Runs jobs one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, jobs: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (0..jobs).map(f).collect()
    }
}

/// Turns one simulated unit into a row of statistics.
pub trait UnitConsumer: Sync {
    /// Number of statistics per unit.
    fn width(&self) -> usize;

    /// Number of disjoint groups units are split into.
    fn groups(&self) -> usize {
        1
    }

    /// Writes the unit's statistics into `out` and returns its group.
    fn observe(
        &self,
        sim: &Simulator,
        draw: &UnitDraw,
        ws: &mut Workspace,
        out: &mut [f64],
    ) -> Result<usize, EvalError>;
}

/// Size and seed of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSpec {
    pub n: u64,
    pub seed: u64,
    pub chunk_size: usize,
}

impl RunSpec {
    pub fn new(n: u64, seed: u64) -> RunSpec {
        RunSpec { n, seed, chunk_size: DEFAULT_CHUNK_SIZE }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationRun {
    pub groups: Vec<Accumulator>,
    pub n: u64,
    pub seed: u64,
    pub invalid: u64,
    pub first_error: Option<EvalError>,
}

impl PopulationRun {
    /// All groups merged in group order.
    pub fn total(&self) -> Accumulator {
        let mut acc = Accumulator::new(self.groups[0].dim());
        for g in &self.groups {
            acc.merge(g);
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum McError {
    EmptyRun,
    /// More than 1% of units failed to evaluate.
    TooManyInvalid {
        invalid: u64,
        n: u64,
        first_error: Option<EvalError>,
    },
}

impl core::fmt::Display for McError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            McError::EmptyRun => f.write_str("sample size must be at least 1"),
            McError::TooManyInvalid { invalid, n, first_error } => {
                write!(f, "{invalid} of {n} units failed to evaluate (limit 1%)")?;
                if let Some(e) = first_error {
                    write!(f, "; first failure: {e}")?;
                }
                Ok(())
            }
        }
    }
}

impl core::error::Error for McError {}

struct ChunkResult {
    groups: Vec<Accumulator>,
    invalid: u64,
    first_error: Option<EvalError>,
}

/// Streams units `0..n` through `consumer` in fixed-size chunks. Chunk
/// results are merged in ascending chunk order, so the outcome depends only
/// on `(model, consumer, n, seed, chunk_size)`.
pub fn run_population<C, E>(sim: &Simulator, consumer: &C, spec: RunSpec, exec: &E) -> Result<PopulationRun, McError>
where
    C: UnitConsumer,
    E: Executor,
{
    if spec.n == 0 {
        return Err(McError::EmptyRun);
    }
    let chunk = spec.chunk_size.max(1) as u64;
    let jobs = spec.n.div_ceil(chunk) as usize;
    let width = consumer.width();
    let groups = consumer.groups().max(1);

    let chunks = exec.map(jobs, |job| {
        let start = job as u64 * chunk;
        let end = (start + chunk).min(spec.n);
        let mut result = ChunkResult {
            groups: (0..groups).map(|_| Accumulator::new(width)).collect(),
            invalid: 0,
            first_error: None,
        };
        let mut draw = sim.new_draw();
        let mut ws = sim.workspace();
        let mut row = alloc::vec![0.0; width];
        for unit in start..end {
            sim.draw_into(unit, spec.seed, &mut draw);
            match consumer.observe(sim, &draw, &mut ws, &mut row) {
                Ok(g) => result.groups[g].push(&row),
                Err(e) => {
                    result.invalid += 1;
                    result.first_error.get_or_insert(e);
                }
            }
        }
        result
    });

    let mut run = PopulationRun {
        groups: (0..groups).map(|_| Accumulator::new(width)).collect(),
        n: spec.n,
        seed: spec.seed,
        invalid: 0,
        first_error: None,
    };
    for c in chunks {
        for (acc, part) in run.groups.iter_mut().zip(&c.groups) {
            acc.merge(part);
        }
        run.invalid += c.invalid;
        if run.first_error.is_none() {
            run.first_error = c.first_error;
        }
    }
    if run.invalid * 100 > spec.n {
        return Err(McError::TooManyInvalid { invalid: run.invalid, n: spec.n, first_error: run.first_error });
    }
    Ok(run)
}

/// Column layout of [`EffectsConsumer`] rows.
pub mod stat {
    pub const X: usize = 0;
    pub const Y: usize = 1;
    pub const BETA_ZX: usize = 2;
    pub const BETA_ZY: usize = 3;
    pub const DYDX: usize = 4;
    pub const DXDZ: usize = 5;
    pub const DYDZ: usize = 6;
    /// beta_zy - dydx * beta_zx
    pub const IDENTITY_RESIDUAL: usize = 7;
    pub const BETA_ZX_SQ: usize = 8;
    pub const BETA_ZX_DYDX: usize = 9;
    pub const WIDTH: usize = 10;
}

/// Unit effects, grouped by the drawn instrument value (0 or 1).
#[derive(Debug, Clone, Copy, Default)]
pub struct EffectsConsumer;

impl UnitConsumer for EffectsConsumer {
    fn width(&self) -> usize {
        stat::WIDTH
    }

    fn groups(&self) -> usize {
        2
    }

    fn observe(
        &self,
        sim: &Simulator,
        draw: &UnitDraw,
        ws: &mut Workspace,
        out: &mut [f64],
    ) -> Result<usize, EvalError> {
        let e = sim.unit_effects_with(draw, ws)?;
        out[stat::X] = e.x;
        out[stat::Y] = e.y;
        out[stat::BETA_ZX] = e.beta_zx;
        out[stat::BETA_ZY] = e.beta_zy;
        out[stat::DYDX] = e.dydx;
        out[stat::DXDZ] = e.dxdz;
        out[stat::DYDZ] = e.dydz;
        out[stat::IDENTITY_RESIDUAL] = e.beta_zy - e.dydx * e.beta_zx;
        out[stat::BETA_ZX_SQ] = e.beta_zx * e.beta_zx;
        out[stat::BETA_ZX_DYDX] = e.beta_zx * e.dydx;
        Ok(if e.z == 0.0 { 0 } else { 1 })
    }
}

/// Y under do(X = to) minus Y under do(X = from), shared noise.
#[derive(Debug, Clone, Copy)]
pub struct AceConsumer {
    pub from: f64,
    pub to: f64,
}

impl UnitConsumer for AceConsumer {
    fn width(&self) -> usize {
        1
    }

    fn observe(
        &self,
        sim: &Simulator,
        draw: &UnitDraw,
        ws: &mut Workspace,
        out: &mut [f64],
    ) -> Result<usize, EvalError> {
        let x = sim.exposure_slot();
        let y = sim.outcome_slot();
        sim.evaluate_slots(draw, &[(x, self.to)], &mut ws.under1)?;
        sim.evaluate_slots(draw, &[(x, self.from)], &mut ws.under0)?;
        out[0] = ws.under1[y] - ws.under0[y];
        Ok(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::paper_model;

    #[test]
    fn chunking_does_not_change_valid_counts() {
        let sim = Simulator::new(&paper_model());
        let a =
            run_population(&sim, &EffectsConsumer, RunSpec { n: 1000, seed: 3, chunk_size: 64 }, &Sequential).unwrap();
        let b = run_population(&sim, &EffectsConsumer, RunSpec { n: 1000, seed: 3, chunk_size: 1000 }, &Sequential)
            .unwrap();
        assert_eq!(a.total().count(), 1000);
        assert_eq!(a.groups[1].count(), b.groups[1].count());
        assert!((a.total().mean(stat::X) - b.total().mean(stat::X)).abs() < 1e-12);
    }

    #[test]
    fn empty_run_is_rejected() {
        let sim = Simulator::new(&paper_model());
        assert_eq!(run_population(&sim, &EffectsConsumer, RunSpec::new(0, 1), &Sequential), Err(McError::EmptyRun));
    }

    #[test]
    fn invalid_units_abort_above_one_percent() {
        let m = crate::scm::parse_model(
            "Z ~ Bernoulli(0.5)\nU ~ Uniform(-1, 1)\nX = Z + log(U)\nY = X\n@instrument Z\n@exposure X\n@outcome Y",
        )
        .unwrap();
        let sim = Simulator::new(&m);
        let err = run_population(&sim, &EffectsConsumer, RunSpec::new(1000, 1), &Sequential).unwrap_err();
        match err {
            McError::TooManyInvalid { invalid, n, first_error } => {
                assert!(invalid > 400 && invalid < 600);
                assert_eq!(n, 1000);
                assert!(first_error.is_some());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn few_invalid_units_are_skipped_and_counted() {
        // log(U) fails only for U <= 0.001 -> about 0.05% of units.
        let m = crate::scm::parse_model(
            "Z ~ Bernoulli(0.5)\nU ~ Uniform(-0.001, 1)\nX = Z + log(U)\nY = X\n@instrument Z\n@exposure X\n@outcome Y",
        )
        .unwrap();
        let sim = Simulator::new(&m);
        let run = run_population(&sim, &EffectsConsumer, RunSpec::new(20_000, 1), &Sequential).unwrap();
        assert!(run.invalid > 0 && run.invalid < 200);
        assert_eq!(run.total().count() + run.invalid, 20_000);
    }
}
