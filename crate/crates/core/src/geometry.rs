//! Two ways to pick a representative of a coefficient ray: divide by the
//! absolute first coefficient (a two-branch chart, singular on `β₁ = 0`) or
//! project onto the unit sphere. The sphere carries the great-circle metric;
//! the chart carries the Euclidean metric of its coordinates.

use std::f64::consts::FRAC_PI_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

/// Slack allowed on either side of the strong-equivalence sandwich.
pub const STRONG_EQUIV_SLACK: f64 = 1e-12;
const UNIT_TOL: f64 = 1e-12;
const SINGULAR_BOUND: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("first coefficient {0} is zero; the coordinate chart is singular there")]
    ChartSingular(f64),
    #[error("the zero vector has no direction")]
    ZeroVector,
    #[error("vector has a non-finite entry")]
    NonFinite,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("dimension must be at least 2, got {0}")]
    InvalidDimension(usize),
    #[error("vector norm {0} is not 1")]
    NotUnit(f64),
    #[error("grid must be positive and strictly increasing")]
    InvalidGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpherePoint {
    coords: Vec<f64>,
}

impl SpherePoint {
    /// Accepts a vector whose norm is within 1e-12 of one.
    pub fn new(coords: Vec<f64>) -> Result<Self, GeometryError> {
        let n = finite_norm(&coords)?;
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(GeometryError::NotUnit(n));
        }
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartPoint {
    pub sign: i8,
    pub rest: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartDistance {
    Finite(f64),
    /// The points sit on different branches; no path joins them in the chart.
    Disconnected,
}

impl ChartDistance {
    pub fn value(self) -> Option<f64> {
        match self {
            ChartDistance::Finite(d) => Some(d),
            ChartDistance::Disconnected => None,
        }
    }
}

fn finite_norm(v: &[f64]) -> Result<f64, GeometryError> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    // scaled to avoid overflow for huge entries
    let m = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if m == 0.0 {
        return Ok(0.0);
    }
    Ok(m * v.iter().map(|x| (x / m) * (x / m)).sum::<f64>().sqrt())
}

fn euclid(a: &[f64], b: &[f64], sign: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x + sign * y).powi(2)).sum::<f64>().sqrt()
}

/// `(sgn β₁, β₂/|β₁|, …, β_D/|β₁|)`.
pub fn coord_chart(beta: &[f64]) -> Result<ChartPoint, GeometryError> {
    if beta.len() < 2 {
        return Err(GeometryError::InvalidDimension(beta.len()));
    }
    if beta.iter().any(|x| !x.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    let b1 = beta[0];
    if b1.abs() < SINGULAR_BOUND {
        return Err(GeometryError::ChartSingular(b1));
    }
    let rest: Vec<f64> = beta[1..].iter().map(|b| b / b1.abs()).collect();
    if rest.iter().any(|x| !x.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    Ok(ChartPoint { sign: if b1 > 0.0 { 1 } else { -1 }, rest })
}

/// `β / ‖β‖`.
pub fn sphere_chart(beta: &[f64]) -> Result<SpherePoint, GeometryError> {
    let n = finite_norm(beta)?;
    if n == 0.0 {
        return Err(GeometryError::ZeroVector);
    }
    Ok(SpherePoint { coords: beta.iter().map(|b| b / n).collect() })
}

/// Angle between unit vectors, `2·atan2(‖p − q‖, ‖p + q‖)`. Equal to
/// `arccos(p·q)` but accurate for nearly equal and nearly antipodal pairs.
pub fn great_circle(p: &SpherePoint, q: &SpherePoint) -> Result<f64, GeometryError> {
    if p.dim() != q.dim() {
        return Err(GeometryError::DimMismatch(p.dim(), q.dim()));
    }
    let diff = euclid(&p.coords, &q.coords, -1.0);
    let sum = euclid(&p.coords, &q.coords, 1.0);
    Ok(2.0 * diff.atan2(sum))
}

pub fn chart_distance(p: &ChartPoint, q: &ChartPoint) -> Result<ChartDistance, GeometryError> {
    if p.rest.len() != q.rest.len() {
        return Err(GeometryError::DimMismatch(p.rest.len(), q.rest.len()));
    }
    if p.sign != q.sign {
        return Ok(ChartDistance::Disconnected);
    }
    Ok(ChartDistance::Finite(euclid(&p.rest, &q.rest, -1.0)))
}

/// Uniform direction in `ℝ^dim` from normalized standard normals.
pub fn random_unit<R: rand::Rng + ?Sized>(rng: &mut R, dim: usize) -> SpherePoint {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        if let Ok(p) = sphere_chart(&v) {
            return p;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrongEquivReport {
    pub n_pairs: usize,
    pub dim: usize,
    pub seed: u64,
    pub violations: usize,
    /// Worst `‖p − q‖ − ρ`; should stay below the slack.
    pub max_lower_excess: f64,
    /// Worst `ρ − (π/2)‖p − q‖`.
    pub max_upper_excess: f64,
    pub pass: bool,
}

/// Checks `‖p − q‖ ≤ ρ(p, q) ≤ (π/2)‖p − q‖` on random unit pairs.
pub fn strong_equivalence_check(n_pairs: usize, dim: usize, seed: u64) -> Result<StrongEquivReport, GeometryError> {
    if dim < 2 {
        return Err(GeometryError::InvalidDimension(dim));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut max_lower = f64::NEG_INFINITY;
    let mut max_upper = f64::NEG_INFINITY;
    for _ in 0..n_pairs {
        let p = random_unit(&mut rng, dim);
        let q = random_unit(&mut rng, dim);
        let (lower, upper) = sandwich_excess(&p, &q)?;
        max_lower = max_lower.max(lower);
        max_upper = max_upper.max(upper);
        if lower > STRONG_EQUIV_SLACK || upper > STRONG_EQUIV_SLACK {
            violations += 1;
        }
    }
    Ok(StrongEquivReport {
        n_pairs,
        dim,
        seed,
        violations,
        max_lower_excess: max_lower,
        max_upper_excess: max_upper,
        pass: violations == 0,
    })
}

/// `(‖p − q‖ − ρ, ρ − (π/2)‖p − q‖)`; both are `≤ 0` when the sandwich holds.
pub fn sandwich_excess(p: &SpherePoint, q: &SpherePoint) -> Result<(f64, f64), GeometryError> {
    let rho = great_circle(p, q)?;
    let chord = euclid(&p.coords, &q.coords, -1.0);
    Ok((chord - rho, rho - FRAC_PI_2 * chord))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// `(1, M)` against `(−1, M)`.
    CrossSign,
    /// `(1, M)` against `(1, 2M)`.
    WithinSign,
}

impl Scenario {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cross_sign" => Some(Scenario::CrossSign),
            "within_sign" => Some(Scenario::WithinSign),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::CrossSign => "cross_sign",
            Scenario::WithinSign => "within_sign",
        }
    }

    fn pair(self, m: f64) -> ([f64; 2], [f64; 2]) {
        match self {
            Scenario::CrossSign => ([1.0, m], [-1.0, m]),
            Scenario::WithinSign => ([1.0, m], [1.0, 2.0 * m]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub m: f64,
    pub chart: ChartDistance,
    pub great_circle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub scenario: Scenario,
    pub rows: Vec<ConvergenceRow>,
    pub great_circle_strictly_decreasing: bool,
    /// Strictly increasing finite chart distances, or disconnected on every row.
    pub chart_diverges_or_disconnected: bool,
}

pub fn convergence_experiment(scenario: Scenario, m_grid: &[f64]) -> Result<ConvergenceTable, GeometryError> {
    if m_grid.is_empty()
        || m_grid.iter().any(|m| !(m.is_finite() && *m > 0.0))
        || m_grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(GeometryError::InvalidGrid);
    }
    let rows = m_grid
        .iter()
        .map(|&m| {
            let (p, q) = scenario.pair(m);
            Ok(ConvergenceRow {
                m,
                chart: chart_distance(&coord_chart(&p)?, &coord_chart(&q)?)?,
                great_circle: great_circle(&sphere_chart(&p)?, &sphere_chart(&q)?)?,
            })
        })
        .collect::<Result<Vec<_>, GeometryError>>()?;
    let great_circle_strictly_decreasing = rows.windows(2).all(|w| w[1].great_circle < w[0].great_circle);
    let chart_diverges_or_disconnected = rows.iter().all(|r| r.chart == ChartDistance::Disconnected)
        || rows.windows(2).all(|w| match (w[0].chart.value(), w[1].chart.value()) {
            (Some(a), Some(b)) => b > a,
            _ => false,
        });
    Ok(ConvergenceTable { scenario, rows, great_circle_strictly_decreasing, chart_diverges_or_disconnected })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricDistortion {
    /// Chart length per unit arc moving toward or away from the `β₁` axis.
    pub radial: f64,
    /// Chart length per unit arc moving around the `β₁` axis.
    pub transverse: f64,
}

/// Local stretch of the coordinate chart relative to arc length at the
/// direction of `beta`: `1/cos²t` radially and `1/cos t` transversally,
/// where `cos t = |β₁|/‖β‖`. Both blow up as `β₁ → 0`.
pub fn metric_ratio(beta: &[f64]) -> Result<MetricDistortion, GeometryError> {
    coord_chart(beta)?;
    let u = sphere_chart(beta)?;
    let cos_t = u.coords[0].abs();
    Ok(MetricDistortion { radial: 1.0 / (cos_t * cos_t), transverse: 1.0 / cos_t })
}
