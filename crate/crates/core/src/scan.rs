//! Parameter sweeps over a model template with free parameters.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::estimands::{diagnostics, GapReport};
use crate::mc::{Executor, RunSpec};
use crate::rng::derive_seed;
use crate::scm::{validate, RawModel};

/// Largest grid a scan accepts.
pub const MAX_GRID_POINTS: usize = 1_000_000;

/// `lo, lo + step, ...` up to and including `hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamRange {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl ParamRange {
    pub fn len(&self) -> usize {
        // tolerate accumulated rounding in (hi - lo) / step
        let steps = libm::floor((self.hi - self.lo) / self.step + 1e-9);
        steps as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i)).collect()
    }

    fn check(&self) -> Result<(), ScanError> {
        let bad = |why: &str| Err(ScanError::BadRange { name: self.name.clone(), reason: why.to_string() });
        if !(self.lo.is_finite() && self.hi.is_finite() && self.step.is_finite()) {
            return bad("bounds and step must be finite");
        }
        if self.step <= 0.0 {
            return bad("step must be positive");
        }
        if self.hi < self.lo {
            return bad("hi must not be below lo");
        }
        if (self.hi - self.lo) / self.step >= MAX_GRID_POINTS as f64 {
            return Err(ScanError::TooManyPoints);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScanError {
    EmptyGrid,
    TooManyPoints,
    BadRange {
        name: String,
        reason: String,
    },
    DuplicateParam(String),
    /// The parameter name is already defined in the model.
    ParamCollides(String),
    /// The parameter does not appear in any equation.
    UnusedParam(String),
    /// The template references a name that is neither defined nor scanned.
    UnboundName(String),
}

impl fmt::Display for ScanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScanError::EmptyGrid => f.write_str("scan needs at least one parameter"),
            ScanError::TooManyPoints => write!(f, "scan grid exceeds {MAX_GRID_POINTS} points"),
            ScanError::BadRange { name, reason } => write!(f, "bad range for parameter {name}: {reason}"),
            ScanError::DuplicateParam(n) => write!(f, "parameter {n} given more than once"),
            ScanError::ParamCollides(n) => write!(f, "parameter {n} is already defined in the model"),
            ScanError::UnusedParam(n) => write!(f, "parameter {n} does not appear in the model"),
            ScanError::UnboundName(n) => write!(f, "undefined variable {n} is not a scan parameter"),
        }
    }
}

impl core::error::Error for ScanError {}

/// Cartesian product of parameter ranges in lexicographic order, first
/// parameter slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrid {
    ranges: Vec<ParamRange>,
    len: usize,
}

impl ParamGrid {
    pub fn new(ranges: Vec<ParamRange>) -> Result<ParamGrid, ScanError> {
        if ranges.is_empty() {
            return Err(ScanError::EmptyGrid);
        }
        let mut len = 1usize;
        for (i, r) in ranges.iter().enumerate() {
            r.check()?;
            if ranges[..i].iter().any(|p| p.name == r.name) {
                return Err(ScanError::DuplicateParam(r.name.clone()));
            }
            len = len.checked_mul(r.len()).filter(|&l| l <= MAX_GRID_POINTS).ok_or(ScanError::TooManyPoints)?;
        }
        Ok(ParamGrid { ranges, len })
    }

    pub fn ranges(&self) -> &[ParamRange] {
        &self.ranges
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn point(&self, mut index: usize) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self.ranges.iter().map(|r| (r.name.clone(), 0.0)).collect();
        for (slot, r) in out.iter_mut().zip(&self.ranges).rev() {
            let k = r.len();
            slot.1 = r.value(index % k);
            index /= k;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub index: usize,
    pub params: Vec<(String, f64)>,
    pub seed: u64,
    /// Failures at one grid point do not stop the scan.
    pub result: Result<GapReport, String>,
}

/// Checks that the grid binds exactly the template's free names.
pub fn check_template(template: &RawModel, grid: &ParamGrid) -> Result<(), ScanError> {
    let free = template.undefined_names();
    for r in grid.ranges() {
        if template.defines(&r.name) {
            return Err(ScanError::ParamCollides(r.name.clone()));
        }
        if !free.contains(&r.name) {
            return Err(ScanError::UnusedParam(r.name.clone()));
        }
    }
    for name in free {
        if !grid.ranges().iter().any(|r| r.name == name) {
            return Err(ScanError::UnboundName(name));
        }
    }
    Ok(())
}

/// Runs [`diagnostics`] at every grid point. Point `i` uses seed
/// `derive_seed(spec.seed, i)`, so each row is reproducible on its own.
pub fn scan_gap<E: Executor>(
    template: &RawModel,
    grid: &ParamGrid,
    spec: RunSpec,
    exec: &E,
) -> Result<Vec<ScanRow>, ScanError> {
    check_template(template, grid)?;
    let mut rows = Vec::with_capacity(grid.len());
    for index in 0..grid.len() {
        let params = grid.point(index);
        let seed = derive_seed(spec.seed, index as u64);
        let result = match validate(&template.bind(&params)) {
            Err(diags) => Err(diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")),
            Ok(model) => diagnostics(&model, RunSpec { seed, ..spec }, exec).map_err(|e| format!("{e}")),
        };
        rows.push(ScanRow { index, params, seed, result });
    }
    Ok(rows)
}
