//! Logit demand with mean utilities `δ₀..δJ` (outside option included),
//! price coefficient `α`, taste-shock scale `μ`, and the surplus constant `C`.
//!
//! Point layout: coordinates `delta0..deltaJ`, `alpha`, `mu`, `C`.
//!
//! Under `(a, b)` the utilities move to `a + bδ`, and `α`, `μ` scale by `b`.
//! `C` is left alone: any law for `C` that depends on `α` fails to compose,
//! so the surplus level simply picks up `a / (bα)`.

use std::sync::Arc;

use super::{checked_div, dependent, free, logsumexp, CatalogCounterfactual, CatalogEntry, CatalogError};
use crate::audit::{Context, Counterfactual, EvalError, Normalization, OrbitInvariant};
use crate::quotient::{apply, element, AffineFamily, ParamPoint, QuotientError, Selector};

pub const FAMILY_ID: &str = "logit_affine";

#[derive(Debug, Clone, PartialEq)]
pub struct LogitDemandModel {
    pub delta: Vec<f64>,
    pub alpha: f64,
    pub mu: f64,
    pub cs_const: f64,
}

fn delta_name(j: usize) -> String {
    format!("delta{j}")
}

impl LogitDemandModel {
    pub fn new(delta: Vec<f64>, alpha: f64, mu: f64, cs_const: f64) -> Result<Self, CatalogError> {
        if delta.is_empty() {
            return Err(CatalogError::InvalidModel("need at least the outside option".into()));
        }
        if !(alpha > 0.0 && mu > 0.0) {
            return Err(CatalogError::InvalidModel(format!(
                "alpha and mu must be positive, got {alpha} and {mu}"
            )));
        }
        if delta.iter().chain([&alpha, &mu, &cs_const]).any(|v| !v.is_finite()) {
            return Err(CatalogError::InvalidModel("values must be finite".into()));
        }
        Ok(Self { delta, alpha, mu, cs_const })
    }

    pub fn to_point(&self) -> Result<ParamPoint, CatalogError> {
        let mut p = ParamPoint::new();
        for (j, d) in self.delta.iter().enumerate() {
            p.insert_coord(delta_name(j), *d)?;
        }
        p.insert_coord("alpha", self.alpha)?;
        p.insert_coord("mu", self.mu)?;
        p.insert_coord("C", self.cs_const)?;
        Ok(p)
    }

    pub fn from_point(p: &ParamPoint) -> Result<Self, CatalogError> {
        let delta: Vec<f64> = (0..).map_while(|j| p.coord(&delta_name(j))).collect();
        Self::new(delta, p.require_coord("alpha")?, p.require_coord("mu")?, p.require_coord("C")?)
    }

    fn inclusive_value(&self, delta: &[f64]) -> f64 {
        let scaled: Vec<f64> = delta.iter().map(|d| d / self.mu).collect();
        logsumexp(&scaled)
    }
}

/// `(a, b)`: `δⱼ ↦ a + bδⱼ`, `α ↦ bα`, `μ ↦ bμ`.
pub fn logit_affine_family() -> AffineFamily {
    AffineFamily::builder(FAMILY_ID, &["a", "b"], "b")
        .coord(Selector::indexed("delta"), &[("a", 1.0)])
        .coord(Selector::exact("alpha"), &[])
        .coord(Selector::exact("mu"), &[])
        .preserves(&["iid-errors", "cdf-monotone"])
        .build()
        .expect("logit family is well formed")
}

/// `(μ/α)·log Σ exp(δⱼ/μ) + C`.
pub fn logit_cs_level(m: &LogitDemandModel) -> f64 {
    m.mu / m.alpha * m.inclusive_value(&m.delta) + m.cs_const
}

/// `(μ/α)·[log Σ exp(δ′ⱼ/μ) − log Σ exp(δⱼ/μ)]`.
pub fn logit_delta_cs(m: &LogitDemandModel, delta_prime: &[f64]) -> Result<f64, CatalogError> {
    if delta_prime.len() != m.delta.len() {
        return Err(CatalogError::DimMismatch { expected: m.delta.len(), found: delta_prime.len() });
    }
    Ok(m.mu / m.alpha * (m.inclusive_value(delta_prime) - m.inclusive_value(&m.delta)))
}

pub fn logit_pct_cs(m: &LogitDemandModel, delta_prime: &[f64]) -> Result<f64, CatalogError> {
    checked_div(logit_delta_cs(m, delta_prime)?, logit_cs_level(m), "percentage surplus change")
}

/// Mean utilities after a price change `Δp`: `δ′ = δ − α·Δp`.
pub fn delta_after_price_change(m: &LogitDemandModel, price_change: &[f64]) -> Result<Vec<f64>, CatalogError> {
    if price_change.len() != m.delta.len() {
        return Err(CatalogError::DimMismatch { expected: m.delta.len(), found: price_change.len() });
    }
    Ok(m.delta.iter().zip(price_change).map(|(d, dp)| d - m.alpha * dp).collect())
}

/// Market share of alternative `j`.
pub fn logit_share(m: &LogitDemandModel, j: usize) -> Result<f64, CatalogError> {
    if j >= m.delta.len() {
        return Err(CatalogError::DimMismatch { expected: m.delta.len(), found: j });
    }
    Ok((m.delta[j] / m.mu - m.inclusive_value(&m.delta)).exp())
}

fn with_model<F>(f: F) -> impl Fn(&ParamPoint, &Context) -> Result<f64, EvalError> + Send + Sync
where
    F: Fn(&LogitDemandModel, &Context) -> Result<f64, EvalError> + Send + Sync,
{
    move |p, ctx| f(&LogitDemandModel::from_point(p)?, ctx)
}

fn policy(m: &LogitDemandModel, ctx: &Context) -> Result<Vec<f64>, EvalError> {
    Ok(delta_after_price_change(m, ctx.list("price_change")?)?)
}

pub fn counterfactuals() -> Vec<CatalogCounterfactual> {
    vec![
        free(Counterfactual::new(
            "delta_cs",
            &["price_change"],
            with_model(|m, ctx| Ok(logit_delta_cs(m, &policy(m, ctx)?)?)),
        )),
        free(Counterfactual::new("share", &[], with_model(|m, _| Ok(logit_share(m, 1)?)))),
        dependent(Counterfactual::new("cs_level", &[], with_model(|m, _| Ok(logit_cs_level(m))))),
        dependent(Counterfactual::new(
            "pct_cs",
            &["price_change"],
            with_model(|m, ctx| Ok(logit_pct_cs(m, &policy(m, ctx)?)?)),
        )),
    ]
}

fn section_with(family: &AffineFamily, theta: &ParamPoint, scale_of: &str) -> Result<ParamPoint, QuotientError> {
    let b = 1.0 / theta.require_coord(scale_of)?;
    let g = element(family, vec![-b * theta.require_coord("delta0")?, b])?;
    apply(family, &g, theta)
}

pub fn normalizations() -> Vec<Normalization> {
    let family = Arc::new(logit_affine_family());
    let f1 = Arc::clone(&family);
    vec![
        Normalization::new("outside_zero_unit_mu", FAMILY_ID, move |theta| section_with(&f1, theta, "mu")),
        Normalization::new("outside_zero_unit_alpha", FAMILY_ID, move |theta| {
            section_with(&family, theta, "alpha")
        }),
    ]
}

/// `((δⱼ − δ₀)/μ for j ≥ 1, α/μ, C)`.
pub fn orbit_invariant() -> OrbitInvariant {
    OrbitInvariant::new(|p| {
        let m = LogitDemandModel::from_point(p)?;
        let mut out: Vec<f64> = m.delta[1..].iter().map(|d| (d - m.delta[0]) / m.mu).collect();
        out.push(m.alpha / m.mu);
        out.push(m.cs_const);
        Ok(out)
    })
}

pub fn base_points() -> Result<Vec<ParamPoint>, CatalogError> {
    [
        (vec![0.0, 1.0, 2.0], 2.0, 1.0, 0.0),
        (vec![0.5, -1.0, 1.5], 1.0, 0.5, 0.3),
        (vec![0.0, 2.0, -1.0], 0.7, 2.0, -1.0),
        (vec![1.0, 1.0, 1.0], 3.0, 1.5, 2.0),
        (vec![-0.5, 0.3, 0.9], 1.2, 0.8, 0.0),
    ]
    .into_iter()
    .map(|(d, a, mu, c)| LogitDemandModel::new(d, a, mu, c)?.to_point())
    .collect()
}

pub fn context() -> Context {
    Context::new().with_list("price_change", vec![0.0, 0.0, -0.5])
}

pub fn entry() -> Result<CatalogEntry, CatalogError> {
    Ok(CatalogEntry {
        id: "logit",
        family: Arc::new(logit_affine_family()),
        base_points: base_points()?,
        context: context(),
        counterfactuals: counterfactuals(),
        normalizations: normalizations(),
        invariant: orbit_invariant(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // log(1 + e + e²) and log(1 + e + e³)
    const LSE_012: f64 = 2.407_605_964_444_380;
    const LSE_013: f64 = 3.169_846_019_556_286;

    fn fixture() -> LogitDemandModel {
        LogitDemandModel::new(vec![0.0, 1.0, 2.0], 2.0, 1.0, 0.0).unwrap()
    }

    fn moved(m: &LogitDemandModel, a: f64, b: f64) -> LogitDemandModel {
        let f = logit_affine_family();
        let g = element(&f, vec![a, b]).unwrap();
        LogitDemandModel::from_point(&apply(&f, &g, &m.to_point().unwrap()).unwrap()).unwrap()
    }

    #[test]
    fn family_example() {
        let m = moved(&fixture(), 5.0, 3.0);
        assert_eq!(m.delta, vec![5.0, 8.0, 11.0]);
        assert_eq!((m.alpha, m.mu, m.cs_const), (6.0, 3.0, 0.0));
    }

    #[test]
    fn cs_level_values() {
        assert!((logit_cs_level(&fixture()) - LSE_012 / 2.0).abs() < 1e-15);
        let single = LogitDemandModel::new(vec![0.0], 1.0, 1.0, 0.0).unwrap();
        assert_eq!(logit_cs_level(&single), 0.0);
        // the level picks up a/(bα) = 5/6
        let shifted = logit_cs_level(&moved(&fixture(), 5.0, 3.0));
        assert!((shifted - (LSE_012 / 2.0 + 5.0 / 6.0)).abs() < 1e-14);
    }

    #[test]
    fn delta_cs_values() {
        let expected = (LSE_013 - LSE_012) / 2.0;
        assert!((expected - 0.381_120_027_555_953).abs() < 1e-14);
        let m = fixture();
        assert!((logit_delta_cs(&m, &[0.0, 1.0, 3.0]).unwrap() - expected).abs() < 1e-15);
        let mm = moved(&m, 5.0, 3.0);
        assert!((logit_delta_cs(&mm, &[5.0, 8.0, 14.0]).unwrap() - expected).abs() < 1e-14);
        assert_eq!(logit_delta_cs(&m, &m.delta.clone()).unwrap(), 0.0);
        assert!(logit_delta_cs(&m, &[0.0]).is_err());
    }

    #[test]
    fn policy_from_price_change() {
        let m = fixture();
        assert_eq!(delta_after_price_change(&m, &[0.0, 0.0, -0.5]).unwrap(), vec![0.0, 1.0, 3.0]);
    }

    #[test]
    fn pct_cs_values() {
        let m = fixture();
        let v = logit_pct_cs(&m, &[0.0, 1.0, 3.0]).unwrap();
        assert!((v - 0.381_120_027_555_953 / (LSE_012 / 2.0)).abs() < 1e-14);
        assert!((v - 0.316_596).abs() < 1e-6);
        assert_eq!(logit_pct_cs(&m, &m.delta.clone()).unwrap(), 0.0);
    }

    #[test]
    fn shares_sum_to_one() {
        let m = fixture();
        let total: f64 = (0..3).map(|j| logit_share(&m, j).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }
}
