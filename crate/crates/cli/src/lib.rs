//! Command-line front end for `estimand-lab-core`: argument parsing, a
//! threaded executor, and the JSON / CSV / text report formats.

pub mod args;
pub mod commands;
pub mod error;
pub mod exec;
pub mod report;

pub use commands::{run, Outcome};
pub use error::CliError;
pub use exec::{Threaded, THREADS_ENV};
pub use report::ReportDocument;
