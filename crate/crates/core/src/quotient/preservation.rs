use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{ParamPoint, QuotientError};
use crate::dist::DistHandle;

const UNITS: usize = 10;
const DYAD_UNITS: usize = 5;
const MIN_REPS: usize = 100;

/// Maintained assumptions the Monte Carlo checker knows how to probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AssumptionTag {
    /// Dyadic shocks `U_i_j` independent across pairs.
    #[serde(rename = "iid-errors")]
    IidErrors,
    /// Unit-level unknowns `A1..A10` independent across units.
    #[serde(rename = "cross-sectional-sampling")]
    CrossSectionalSampling,
}

impl FromStr for AssumptionTag {
    type Err = QuotientError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "iid-errors" => Ok(AssumptionTag::IidErrors),
            "cross-sectional-sampling" => Ok(AssumptionTag::CrossSectionalSampling),
            other => Err(QuotientError::UnsupportedTag(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairCorrelation {
    pub first: String,
    pub second: String,
    pub corr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreservationVerdict {
    pub tag: AssumptionTag,
    pub reps: usize,
    pub seed: u64,
    /// `4 / sqrt(reps)`.
    pub threshold: f64,
    pub violated: bool,
    pub max_abs_corr: f64,
    pub correlations: Vec<PairCorrelation>,
    /// Transformed units with zero sample variance; their correlations are undefined.
    pub degenerate: Vec<String>,
}

fn unit_names(tag: AssumptionTag) -> Vec<String> {
    match tag {
        AssumptionTag::CrossSectionalSampling => (1..=UNITS).map(|i| format!("A{i}")).collect(),
        AssumptionTag::IidErrors => {
            let mut names = Vec::new();
            for i in 1..=DYAD_UNITS {
                for j in (i + 1)..=DYAD_UNITS {
                    names.push(format!("U_{i}_{j}"));
                }
            }
            names
        }
    }
}

/// Simulates independent standard-normal unit draws, pushes them through
/// `transform`, and flags the transform when any pairwise sample correlation
/// of the transformed units exceeds `4/sqrt(reps)` in absolute value.
pub fn check_assumption_preservation<F>(
    transform: F,
    tag: &str,
    seed: u64,
    reps: usize,
) -> Result<PreservationVerdict, QuotientError>
where
    F: Fn(&ParamPoint) -> Result<ParamPoint, QuotientError>,
{
    let tag: AssumptionTag = tag.parse()?;
    if reps < MIN_REPS {
        return Err(QuotientError::InvalidInput(format!(
            "reps must be at least {MIN_REPS}, got {reps}"
        )));
    }
    let names = unit_names(tag);
    let k = names.len();
    let std_normal = DistHandle::normal(0.0, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut sum = vec![0.0; k];
    let mut cross = vec![0.0; k * k];
    let mut row = vec![0.0; k];
    for _ in 0..reps {
        let mut point = ParamPoint::new();
        for name in &names {
            point.insert_coord(name.clone(), std_normal.sample(&mut rng))?;
        }
        let out = transform(&point)?;
        for (slot, name) in row.iter_mut().zip(&names) {
            *slot = out.require_coord(name)?;
        }
        for i in 0..k {
            sum[i] += row[i];
            for j in i..k {
                cross[i * k + j] += row[i] * row[j];
            }
        }
    }

    let n = reps as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let cov = |i: usize, j: usize| cross[i * k + j] / n - mean[i] * mean[j];
    let var: Vec<f64> = (0..k).map(|i| cov(i, i)).collect();
    let degenerate_idx: Vec<bool> = var
        .iter()
        .zip(&mean)
        .map(|(v, m)| *v <= 1e-12 * (1.0 + m * m))
        .collect();

    let threshold = 4.0 / n.sqrt();
    let mut correlations = Vec::new();
    let mut max_abs_corr = 0.0_f64;
    for i in 0..k {
        for j in (i + 1)..k {
            if degenerate_idx[i] || degenerate_idx[j] {
                continue;
            }
            let corr = cov(i, j) / (var[i] * var[j]).sqrt();
            max_abs_corr = max_abs_corr.max(corr.abs());
            correlations.push(PairCorrelation {
                first: names[i].clone(),
                second: names[j].clone(),
                corr,
            });
        }
    }
    let degenerate = names
        .iter()
        .zip(&degenerate_idx)
        .filter(|(_, d)| **d)
        .map(|(n, _)| n.clone())
        .collect();

    Ok(PreservationVerdict {
        tag,
        reps,
        seed,
        threshold,
        violated: max_abs_corr > threshold,
        max_abs_corr,
        correlations,
        degenerate,
    })
}
