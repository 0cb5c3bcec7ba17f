//! Finite handles for the unobservable laws carried by a [`ParamPoint`].
//!
//! Every law is a member of a location-scale family: the standard member of
//! `family` is shifted by `location` and stretched by `scale`. A quantile grid
//! is treated the same way, with the grid describing the standardized shape.
//!
//! [`ParamPoint`]: crate::quotient::ParamPoint

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("scale must be finite and strictly positive, got {0}")]
    InvalidScale(f64),
    #[error("location must be finite, got {0}")]
    InvalidLocation(f64),
    #[error("invalid quantile grid: {0}")]
    InvalidGrid(String),
    #[error("probability {0} outside (0, 1)")]
    InvalidProbability(f64),
    #[error("{0} distribution has no density")]
    NoDensity(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistFamily {
    Normal,
    Logistic,
    Uniform,
    Cauchy,
    QuantileGrid,
}

impl DistFamily {
    pub fn name(self) -> &'static str {
        match self {
            DistFamily::Normal => "normal",
            DistFamily::Logistic => "logistic",
            DistFamily::Uniform => "uniform",
            DistFamily::Cauchy => "cauchy",
            DistFamily::QuantileGrid => "quantile_grid",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "normal" => DistFamily::Normal,
            "logistic" => DistFamily::Logistic,
            "uniform" => DistFamily::Uniform,
            "cauchy" => DistFamily::Cauchy,
            "quantile_grid" | "grid" => DistFamily::QuantileGrid,
            _ => return None,
        })
    }
}

/// One point of a standardized quantile grid: `Q(probability) = value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub probability: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistHandle {
    family: DistFamily,
    location: f64,
    scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<Vec<GridPoint>>,
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal parameters are valid")
}

fn check_location_scale(location: f64, scale: f64) -> Result<(), DistError> {
    if !location.is_finite() {
        return Err(DistError::InvalidLocation(location));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(DistError::InvalidScale(scale));
    }
    Ok(())
}

impl DistHandle {
    /// A parametric member. Use [`DistHandle::quantile_grid`] for grids.
    pub fn new(family: DistFamily, location: f64, scale: f64) -> Result<Self, DistError> {
        if family == DistFamily::QuantileGrid {
            return Err(DistError::InvalidGrid(
                "quantile_grid requires grid points".into(),
            ));
        }
        check_location_scale(location, scale)?;
        Ok(Self { family, location, scale, grid: None })
    }

    pub fn normal(location: f64, scale: f64) -> Result<Self, DistError> {
        Self::new(DistFamily::Normal, location, scale)
    }

    pub fn logistic(location: f64, scale: f64) -> Result<Self, DistError> {
        Self::new(DistFamily::Logistic, location, scale)
    }

    /// Uniform on `[location, location + scale]`.
    pub fn uniform(location: f64, scale: f64) -> Result<Self, DistError> {
        Self::new(DistFamily::Uniform, location, scale)
    }

    pub fn cauchy(location: f64, scale: f64) -> Result<Self, DistError> {
        Self::new(DistFamily::Cauchy, location, scale)
    }

    /// Grid probabilities must be strictly increasing inside (0, 1) and values
    /// nondecreasing. Between grid points the quantile function is linear;
    /// outside it is clamped, which puts atoms at the two end values.
    pub fn quantile_grid(
        location: f64,
        scale: f64,
        grid: Vec<GridPoint>,
    ) -> Result<Self, DistError> {
        check_location_scale(location, scale)?;
        if grid.is_empty() {
            return Err(DistError::InvalidGrid("grid is empty".into()));
        }
        for pt in &grid {
            if !(pt.probability > 0.0 && pt.probability < 1.0) {
                return Err(DistError::InvalidGrid(format!(
                    "probability {} outside (0, 1)",
                    pt.probability
                )));
            }
            if !pt.value.is_finite() {
                return Err(DistError::InvalidGrid("non-finite grid value".into()));
            }
        }
        for w in grid.windows(2) {
            if w[1].probability <= w[0].probability {
                return Err(DistError::InvalidGrid(
                    "probabilities must be strictly increasing".into(),
                ));
            }
            if w[1].value < w[0].value {
                return Err(DistError::InvalidGrid(
                    "values must be nondecreasing".into(),
                ));
            }
        }
        Ok(Self {
            family: DistFamily::QuantileGrid,
            location,
            scale,
            grid: Some(grid),
        })
    }

    /// Degenerate law at `value`, encoded as a flat quantile grid.
    pub fn point_mass(value: f64) -> Result<Self, DistError> {
        Self::quantile_grid(
            value,
            1.0,
            vec![
                GridPoint { probability: 0.25, value: 0.0 },
                GridPoint { probability: 0.75, value: 0.0 },
            ],
        )
    }

    pub fn family(&self) -> DistFamily {
        self.family
    }

    pub fn location(&self) -> f64 {
        self.location
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn grid(&self) -> Option<&[GridPoint]> {
        self.grid.as_deref()
    }

    /// The same shape with a new location and scale.
    pub fn with_location_scale(&self, location: f64, scale: f64) -> Result<Self, DistError> {
        check_location_scale(location, scale)?;
        Ok(Self { location, scale, ..self.clone() })
    }

    fn standardize(&self, x: f64) -> f64 {
        (x - self.location) / self.scale
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let z = self.standardize(x);
        match self.family {
            DistFamily::Normal => standard_normal().cdf(z),
            DistFamily::Logistic => logistic_cdf(z),
            DistFamily::Uniform => z.clamp(0.0, 1.0),
            DistFamily::Cauchy => 0.5 + z.atan() / PI,
            DistFamily::QuantileGrid => grid_cdf(self.grid_points(), z),
        }
    }

    pub fn pdf(&self, x: f64) -> Result<f64, DistError> {
        let z = self.standardize(x);
        let standard = match self.family {
            DistFamily::Normal => standard_normal().pdf(z),
            DistFamily::Logistic => logistic_pdf(z),
            DistFamily::Uniform => {
                if (0.0..=1.0).contains(&z) {
                    1.0
                } else {
                    0.0
                }
            }
            DistFamily::Cauchy => 1.0 / (PI * (1.0 + z * z)),
            DistFamily::QuantileGrid => return Err(DistError::NoDensity("quantile_grid")),
        };
        Ok(standard / self.scale)
    }

    pub fn quantile(&self, p: f64) -> Result<f64, DistError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(DistError::InvalidProbability(p));
        }
        let z = match self.family {
            DistFamily::Normal => normal_quantile(p),
            DistFamily::Logistic => logistic_quantile(p),
            DistFamily::Uniform => p,
            DistFamily::Cauchy => (PI * (p - 0.5)).tan(),
            DistFamily::QuantileGrid => grid_quantile(self.grid_points(), p),
        };
        Ok(self.location + self.scale * z)
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let u: f64 = rng.random();
            if u > 0.0 {
                return self.quantile(u).expect("u in (0, 1)");
            }
        }
    }

    /// Lower end of the support; `-inf` for unbounded families.
    pub fn support_lower(&self) -> f64 {
        match self.family {
            DistFamily::Normal | DistFamily::Logistic | DistFamily::Cauchy => f64::NEG_INFINITY,
            DistFamily::Uniform => self.location,
            DistFamily::QuantileGrid => {
                self.location + self.scale * self.grid_points()[0].value
            }
        }
    }

    fn grid_points(&self) -> &[GridPoint] {
        self.grid.as_deref().unwrap_or(&[])
    }
}

pub fn logistic_cdf(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logistic_pdf(z: f64) -> f64 {
    let e = (-z.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

pub fn logistic_quantile(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

pub fn normal_cdf(z: f64) -> f64 {
    standard_normal().cdf(z)
}

pub fn normal_pdf(z: f64) -> f64 {
    standard_normal().pdf(z)
}

// statrs' inverse is good to ~1e-11; one Newton step brings it to rounding level.
fn normal_quantile(p: f64) -> f64 {
    let n = standard_normal();
    let z = n.inverse_cdf(p);
    let d = n.pdf(z);
    if d > 0.0 {
        z - (n.cdf(z) - p) / d
    } else {
        z
    }
}

fn grid_quantile(grid: &[GridPoint], p: f64) -> f64 {
    let first = grid[0];
    let last = grid[grid.len() - 1];
    if p <= first.probability {
        return first.value;
    }
    if p >= last.probability {
        return last.value;
    }
    let k = grid.partition_point(|g| g.probability <= p);
    let (lo, hi) = (grid[k - 1], grid[k]);
    let t = (p - lo.probability) / (hi.probability - lo.probability);
    lo.value + t * (hi.value - lo.value)
}

// Right-continuous inverse of the clamped piecewise-linear quantile function.
fn grid_cdf(grid: &[GridPoint], z: f64) -> f64 {
    let first = grid[0];
    let last = grid[grid.len() - 1];
    if z < first.value {
        return 0.0;
    }
    if z >= last.value {
        return 1.0;
    }
    let k = grid.partition_point(|g| g.value <= z);
    let (lo, hi) = (grid[k - 1], grid[k]);
    let t = (z - lo.value) / (hi.value - lo.value);
    lo.probability + t * (hi.probability - lo.probability)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive_scale() {
        assert_eq!(DistHandle::normal(0.0, 0.0), Err(DistError::InvalidScale(0.0)));
        assert!(DistHandle::logistic(0.0, -1.0).is_err());
        assert!(DistHandle::cauchy(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn grid_validation() {
        let bad = vec![
            GridPoint { probability: 0.5, value: 0.0 },
            GridPoint { probability: 0.5, value: 1.0 },
        ];
        assert!(DistHandle::quantile_grid(0.0, 1.0, bad).is_err());
        let decreasing = vec![
            GridPoint { probability: 0.2, value: 1.0 },
            GridPoint { probability: 0.6, value: 0.0 },
        ];
        assert!(DistHandle::quantile_grid(0.0, 1.0, decreasing).is_err());
        let edge = vec![GridPoint { probability: 1.0, value: 0.0 }];
        assert!(DistHandle::quantile_grid(0.0, 1.0, edge).is_err());
    }

    #[test]
    fn logistic_values() {
        // sigma(0.5) from the closed form 1 / (1 + e^-0.5)
        let d = DistHandle::logistic(0.0, 1.0).unwrap();
        assert!((d.cdf(0.5) - 0.622_459_331_201_854_6).abs() < 1e-15);
        assert!((d.pdf(0.5).unwrap() - 0.235_003_712_201_594_5).abs() < 1e-15);
        assert!((d.quantile(0.75).unwrap() - 3f64.ln()).abs() < 1e-15);
        assert_eq!(d.cdf(0.0), 0.5);
    }

    #[test]
    fn location_scale_consistency() {
        for family in [DistFamily::Normal, DistFamily::Logistic, DistFamily::Cauchy, DistFamily::Uniform] {
            let d = DistHandle::new(family, 1.5, 2.5).unwrap();
            for p in [0.1, 0.25, 0.5, 0.8, 0.95] {
                let x = d.quantile(p).unwrap();
                assert!((d.cdf(x) - p).abs() < 1e-12, "{family:?} p={p} err={}", d.cdf(x) - p);
            }
        }
    }

    #[test]
    fn uniform_support() {
        let d = DistHandle::uniform(-0.5, 2.0).unwrap();
        assert_eq!(d.quantile(0.25).unwrap(), 0.0);
        assert_eq!(d.quantile(0.75).unwrap(), 1.0);
        assert_eq!(d.cdf(-1.0), 0.0);
        assert_eq!(d.cdf(2.0), 1.0);
        assert_eq!(d.support_lower(), -0.5);
    }

    #[test]
    fn grid_quantile_and_cdf() {
        let d = DistHandle::quantile_grid(
            1.0,
            2.0,
            vec![
                GridPoint { probability: 0.1, value: -1.0 },
                GridPoint { probability: 0.5, value: 0.0 },
                GridPoint { probability: 0.9, value: 2.0 },
            ],
        )
        .unwrap();
        assert_eq!(d.quantile(0.5).unwrap(), 1.0);
        assert!((d.quantile(0.7).unwrap() - 3.0).abs() < 1e-14);
        assert_eq!(d.quantile(0.01).unwrap(), -1.0);
        assert!((d.cdf(3.0) - 0.7).abs() < 1e-15);
        assert!(matches!(d.pdf(0.0), Err(DistError::NoDensity(_))));
    }

    #[test]
    fn point_mass_draws() {
        use rand::SeedableRng;
        let d = DistHandle::point_mass(2.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(d.sample(&mut rng), 2.0);
        }
        assert_eq!(d.support_lower(), 2.0);
    }

    #[test]
    fn normal_quantile_roundtrip() {
        let d = DistHandle::normal(0.0, 1.0).unwrap();
        assert!((d.quantile(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-9);
        assert!((d.cdf(0.0) - 0.5).abs() < 1e-15);
    }
}
