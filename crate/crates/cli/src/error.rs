use std::path::PathBuf;

use thiserror::Error;

/// Exit code for usage and configuration errors.
pub const EXIT_USAGE: i32 = 1;
/// Exit code for failed checks and solver errors.
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("solver error at t = {t}: {source}{hint}")]
    Solver {
        t: f64,
        #[source]
        source: lagflow::Error,
        hint: String,
    },

    #[error("could not write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: lagflow::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Output { .. } => EXIT_USAGE,
            CliError::Solver { .. } => EXIT_FAILURE,
        }
    }

    /// Wraps a solver error, explaining which condition it reflects.
    pub fn solver(t: f64, source: lagflow::Error) -> Self {
        let hint = match &source {
            lagflow::Error::PicardNoConvergence { jump_ratio, jump_cap, .. } if jump_ratio > jump_cap => {
                format!("\njump_ratio {jump_ratio} exceeds jump_cap {jump_cap} — see smallness condition den-str")
            }
            lagflow::Error::PicardNoConvergence { .. } => {
                "\nthe density perturbation (m - ρ)v_t is not absorbed; lower the jump ratio or dt".into()
            }
            lagflow::Error::CflViolated { .. } => "\nreduce time.dt".into(),
            lagflow::Error::ContractionViolated { .. } => {
                "\n‖A - Id‖ is above the fixed-point threshold of the twisted divergence solver".into()
            }
            _ => String::new(),
        };
        CliError::Solver { t, source, hint }
    }

    pub fn output(path: impl Into<PathBuf>, source: impl Into<lagflow::Error>) -> Self {
        CliError::Output {
            path: path.into(),
            source: source.into(),
        }
    }
}
