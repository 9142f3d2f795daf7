use estimand_lab_core::estimands::EstimandError;
use estimand_lab_core::scan::ScanError;
use estimand_lab_core::scm::Diagnostic;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Config(String),
    #[error("{source_name} is not a valid model ({} error(s))", .diagnostics.len())]
    InvalidModel { source_name: String, diagnostics: Vec<Diagnostic> },
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Estimand(#[from] EstimandError),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    /// 1 for validation and configuration problems, 2 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Config(_) | CliError::InvalidModel { .. } | CliError::Scan(_) => 1,
            CliError::Estimand(_) | CliError::Numeric(_) => 2,
        }
    }
}
