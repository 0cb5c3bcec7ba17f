pub mod audit;
pub mod geometry;
pub mod singularity;

use crate::CliError;

fn run_err(e: impl std::fmt::Display) -> CliError {
    CliError::Run(e.to_string())
}

fn require_positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--{name} must be positive, got {v}")))
    }
}

fn require_samples(n: usize) -> Result<(), CliError> {
    if n == 0 {
        Err(CliError::Usage("--samples must be at least 1".into()))
    } else {
        Ok(())
    }
}
