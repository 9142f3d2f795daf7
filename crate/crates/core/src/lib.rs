//! Structural causal models with an instrument, symbolic checks of the
//! assumptions under which the Wald ratio recovers an average effect, and
//! reproducible Monte Carlo estimates of the causal quantities involved.
//!
//! The crate is `no_std` and only needs `alloc`.
//!
//! ```
//! use estimand_lab_core::{mc::{RunSpec, Sequential}, estimands, scm};
//!
//! let model = scm::paper_model();
//! let report = estimands::diagnostics(&model, RunSpec::new(20_000, 1), &Sequential).unwrap();
//! assert_eq!(report.mean_beta_zx.value, 2.0);
//! assert!(report.gap > 1.0);
//! ```

#![no_std]

extern crate alloc;

#[cfg(test)]
#[macro_use]
extern crate std;

pub mod estimands;
pub mod expr;
pub mod mc;
pub mod rng;
pub mod scan;
pub mod scm;
pub mod symbolic;

pub use estimands::{EstimandError, Estimate, EstimateKind, GapReport};
pub use expr::{EvalError, Expr};
pub use scm::{parse_model, pretty_print, Diagnostic, StructuralModel};
