//! Ready-made models: binary choice, logit demand, dyadic network formation,
//! and temperature units. Each comes with its transformation family, base
//! points, counterfactuals labeled with their expected classification, and
//! normalizations.

pub mod binary;
pub mod logit;
pub mod network;
pub mod temperature;

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::audit::{Context, Counterfactual, EvalError, Normalization, OrbitInvariant};
use crate::dist::DistError;
use crate::quotient::{ParamPoint, QuotientError, TransformFamily};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),
    #[error("covariate level {level} is not on the grid of {levels} levels")]
    OffGrid { level: f64, levels: usize },
    #[error("quantiles coincide ({lo} = {hi}); the interquantile range cannot be fixed")]
    DegenerateQuantiles { lo: f64, hi: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Quotient(#[from] QuotientError),
}

impl From<CatalogError> for EvalError {
    fn from(e: CatalogError) -> Self {
        match e {
            CatalogError::Quotient(q) => EvalError::Quotient(q),
            other => EvalError::Undefined(other.to_string()),
        }
    }
}

impl From<CatalogError> for QuotientError {
    fn from(e: CatalogError) -> Self {
        match e {
            CatalogError::Quotient(q) => q,
            CatalogError::Dist(d) => QuotientError::Dist(d),
            other => QuotientError::InvalidInput(other.to_string()),
        }
    }
}

/// The classification a counterfactual is expected to receive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    NormalizationFree,
    NormalizationDependent,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::NormalizationFree => "normalization_free",
            Classification::NormalizationDependent => "normalization_dependent",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CatalogCounterfactual {
    pub counterfactual: Counterfactual,
    pub expected: Classification,
}

#[derive(Clone)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub family: Arc<dyn TransformFamily>,
    pub base_points: Vec<ParamPoint>,
    pub context: Context,
    pub counterfactuals: Vec<CatalogCounterfactual>,
    pub normalizations: Vec<Normalization>,
    pub invariant: OrbitInvariant,
}

impl CatalogEntry {
    pub fn counterfactual(&self, name: &str) -> Option<&CatalogCounterfactual> {
        self.counterfactuals.iter().find(|c| c.counterfactual.name() == name)
    }
}

pub const MODEL_IDS: [&str; 4] = ["binary", "logit", "network", "temperature"];

pub fn lookup(id: &str) -> Result<CatalogEntry, CatalogError> {
    match id {
        "binary" => binary::entry(),
        "logit" => logit::entry(),
        "network" => network::entry(),
        "temperature" => temperature::entry(),
        other => Err(CatalogError::UnknownModel(other.to_string())),
    }
}

pub(crate) fn free(counterfactual: Counterfactual) -> CatalogCounterfactual {
    CatalogCounterfactual { counterfactual, expected: Classification::NormalizationFree }
}

pub(crate) fn dependent(counterfactual: Counterfactual) -> CatalogCounterfactual {
    CatalogCounterfactual { counterfactual, expected: Classification::NormalizationDependent }
}

/// `x / denom`, failing on an exactly zero denominator.
pub(crate) fn checked_div(x: f64, denom: f64, what: &'static str) -> Result<f64, CatalogError> {
    if denom == 0.0 {
        Err(CatalogError::ZeroDenominator(what))
    } else {
        Ok(x / denom)
    }
}

/// `log Σ exp(xᵢ)` with the maximum factored out.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Numeric code for a distribution family, so invariants can compare shapes.
pub(crate) fn shape_code(p: &ParamPoint, dist: &str) -> Result<Vec<f64>, QuotientError> {
    let d = p.require_dist(dist)?;
    let mut out = vec![d.family() as u8 as f64];
    if let Some(grid) = d.grid() {
        for g in grid {
            out.push(g.probability);
            out.push(g.value);
        }
    }
    Ok(out)
}
