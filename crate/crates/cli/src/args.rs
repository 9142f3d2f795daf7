use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "estimand-lab",
    version,
    about = "Structural causal models, instrument assumptions and Monte Carlo estimands"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a model file.
    Validate(Common),
    /// Check homogeneity, linearity and exclusion symbolically (no simulation).
    Check(Common),
    /// Compute estimands by Monte Carlo.
    Estimate(EstimateArgs),
    /// Run the built-in counterexample and compare against its closed-form values.
    ReproducePaper(Common),
    /// Sweep free parameters of a model template.
    Scan(ScanArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Builtin {
    /// The counterexample model with a quadratic outcome.
    Paper,
    /// Its template with Y = a*X^2 + b*X + U + eY (for `scan`).
    PaperFamily,
}

impl Builtin {
    pub fn tag(self) -> &'static str {
        match self {
            Builtin::Paper => "builtin:paper",
            Builtin::PaperFamily => "builtin:paper-family",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Model file.
    #[arg(long, value_name = "FILE", conflicts_with = "builtin")]
    pub model: Option<String>,

    /// Built-in model.
    #[arg(long, value_enum)]
    pub builtin: Option<Builtin>,

    /// Monte Carlo sample size (accepts 1e6-style integers).
    #[arg(long, default_value = "1000000", value_parser = parse_count)]
    pub n: u64,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum EstimandName {
    Ade,
    Wald,
    WaldObs,
    Ace,
    ReducedForm,
    /// identity gap, NOSH covariance and Var(beta_zx)
    Diagnostics,
}

impl EstimandName {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimandName::Ade => "ade",
            EstimandName::Wald => "wald",
            EstimandName::WaldObs => "wald-obs",
            EstimandName::Ace => "ace",
            EstimandName::ReducedForm => "reduced-form",
            EstimandName::Diagnostics => "diagnostics",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: Common,

    /// Comma-separated estimands.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ade,wald")]
    pub estimand: Vec<EstimandName>,

    #[arg(long, allow_hyphen_values = true)]
    pub ace_from: Option<f64>,

    #[arg(long, allow_hyphen_values = true)]
    pub ace_to: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: Common,

    /// Grid for one free parameter, `name=lo:hi:step`; repeatable.
    #[arg(long = "param", value_name = "NAME=LO:HI:STEP", allow_hyphen_values = true)]
    pub params: Vec<String>,
}

fn parse_count(s: &str) -> Result<u64, String> {
    let n = match s.parse::<u64>() {
        Ok(n) => n,
        Err(_) => {
            let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a count"))?;
            if !(x.is_finite() && x.fract() == 0.0 && (0.0..1.8e19).contains(&x)) {
                return Err(format!("`{s}` is not a count"));
            }
            x as u64
        }
    };
    if n == 0 {
        return Err("n must be at least 1".into());
    }
    Ok(n)
}
