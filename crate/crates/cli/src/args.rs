use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "norm-audit", version, about = "Audit counterfactuals for dependence on arbitrary normalizations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Invariance, normalization and WLOG audits for a catalog model or spec file.
    Audit(AuditArgs),
    /// Chart versus sphere geometry of normalized coefficient vectors.
    Geometry(GeometryArgs),
    /// Boundary singularity probes for equivariant transforms.
    Singularity(SingularityArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long, env = "NORM_AUDIT_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub common: Common,
    /// Catalog model id: binary, logit, network or temperature.
    #[arg(long, required_unless_present = "spec", conflicts_with = "spec")]
    pub model: Option<String>,
    /// Model-spec file.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Counterfactual name, or `all`.
    #[arg(long, default_value = "all")]
    pub counterfactual: String,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct GeometryArgs {
    #[command(flatten)]
    pub common: Common,
    /// cross_sign, within_sign or strong_equiv.
    #[arg(long)]
    pub scenario: String,
    #[arg(long = "M-grid", value_delimiter = ',', default_values_t = [1.0, 10.0, 1e3, 1e6])]
    pub m_grid: Vec<f64>,
    /// Ambient dimension for strong_equiv.
    #[arg(long, default_value_t = 5)]
    pub dim: usize,
    /// Random unit pairs for strong_equiv.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct SingularityArgs {
    #[command(flatten)]
    pub common: Common,
    /// fixed_point, ate_scale, limit_test or trilemma.
    #[arg(long)]
    pub demo: String,
    /// Unit change `a`; 2 for fixed_point, e² for ate_scale.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Mass of the atom at zero.
    #[arg(long = "p-zero", default_value_t = 0.5)]
    pub p_zero: f64,
    #[arg(long, default_value_t = 100_000)]
    pub draws: usize,
    /// Extension of log for the trilemma demo: log1p, arcsinh or log-with-patch.
    #[arg(long, default_value = "log1p")]
    pub candidate: String,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long = "tol-limit", default_value_t = normaudit::singularity::DEFAULT_TOL_LIMIT)]
    pub tol_limit: f64,
    #[arg(long, default_value_t = normaudit::singularity::DEFAULT_DIVERGENCE)]
    pub divergence: f64,
    #[arg(long, default_value_t = 50)]
    pub horizon: usize,
}

/// Everything that determines a run, echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct RunConfig {
    pub subcommand: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterfactual: Option<String>,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    pub format: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub demo: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_zero: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidate: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_limit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}

impl RunConfig {
    pub fn from_common(subcommand: &str, common: &Common, samples: usize) -> Self {
        RunConfig {
            subcommand: subcommand.to_string(),
            samples,
            seed: common.seed,
            out: common.out.as_ref().map(|p| p.display().to_string()),
            format: match common.format {
                Format::Json => "json",
                Format::Csv => "csv",
            }
            .to_string(),
            ..Default::default()
        }
    }
}
