//! Binary response `Y = 1{x'β ≥ ε}`, `ε ~ F`, with `x₁ = 1`.
//!
//! Point layout: coordinates `b1..bd` (intercept first) and distribution `eps`.

use std::sync::Arc;

use super::{checked_div, dependent, free, shape_code, CatalogCounterfactual, CatalogEntry, CatalogError};
use crate::audit::{Context, Counterfactual, EvalError, Normalization, OrbitInvariant};
use crate::dist::{DistError, DistHandle};
use crate::quotient::{apply, element, AffineFamily, ParamPoint, QuotientError, Selector};

pub const FAMILY_ID: &str = "binary_affine";
pub const ERROR_NAME: &str = "eps";

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryChoiceModel {
    pub beta: Vec<f64>,
    pub errdist: DistHandle,
}

fn beta_name(k: usize) -> String {
    format!("b{}", k + 1)
}

impl BinaryChoiceModel {
    pub fn new(beta: Vec<f64>, errdist: DistHandle) -> Result<Self, CatalogError> {
        if beta.len() < 2 {
            return Err(CatalogError::InvalidModel(format!(
                "need at least 2 coefficients, got {}",
                beta.len()
            )));
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(CatalogError::InvalidModel("coefficients must be finite".into()));
        }
        Ok(Self { beta, errdist })
    }

    pub fn to_point(&self) -> Result<ParamPoint, CatalogError> {
        let mut p = ParamPoint::new();
        for (k, b) in self.beta.iter().enumerate() {
            p.insert_coord(beta_name(k), *b)?;
        }
        p.insert_dist(ERROR_NAME, self.errdist.clone())?;
        Ok(p)
    }

    pub fn from_point(p: &ParamPoint) -> Result<Self, CatalogError> {
        let beta: Vec<f64> = (0..).map_while(|k| p.coord(&beta_name(k))).collect();
        Self::new(beta, p.require_dist(ERROR_NAME)?.clone())
    }

    /// `x'β`, the latent index.
    pub fn index(&self, x: &[f64]) -> Result<f64, CatalogError> {
        if x.len() != self.beta.len() {
            return Err(CatalogError::DimMismatch { expected: self.beta.len(), found: x.len() });
        }
        Ok(x.iter().zip(&self.beta).map(|(a, b)| a * b).sum())
    }
}

/// `(a, b)`: `β₁ ↦ a + bβ₁`, `βⱼ ↦ bβⱼ`, `ε ↦ a + bε`.
pub fn binary_affine_family() -> AffineFamily {
    AffineFamily::builder(FAMILY_ID, &["a", "b"], "b")
        .coord(Selector::exact("b1"), &[("a", 1.0)])
        .coord(Selector::indexed("b"), &[])
        .dist(Selector::exact(ERROR_NAME), &[("a", 1.0)])
        .preserves(&["cdf-monotone"])
        .build()
        .expect("binary family is well formed")
}

pub fn binary_choice_prob(m: &BinaryChoiceModel, x: &[f64]) -> Result<f64, CatalogError> {
    Ok(m.errdist.cdf(m.index(x)?))
}

/// `f(x'β)·βⱼ` with `j` counted from 1 (the intercept); `j ≥ 2`.
pub fn binary_marginal_effect(m: &BinaryChoiceModel, x: &[f64], j: usize) -> Result<f64, CatalogError> {
    if j < 2 || j > m.beta.len() {
        return Err(CatalogError::DimMismatch { expected: m.beta.len(), found: j });
    }
    let density = m.errdist.pdf(m.index(x)?)?;
    Ok(density * m.beta[j - 1])
}

/// `(x''β − x'β) / x'β`.
pub fn binary_pct_welfare(m: &BinaryChoiceModel, x: &[f64], x_prime: &[f64]) -> Result<f64, CatalogError> {
    let w = m.index(x)?;
    let w_prime = m.index(x_prime)?;
    checked_div(w_prime - w, w, "percentage welfare change")
}

/// `βⱼ / βₖ`, 1-based.
pub fn binary_coef_ratio(m: &BinaryChoiceModel, j: usize, k: usize) -> Result<f64, CatalogError> {
    let d = m.beta.len();
    for idx in [j, k] {
        if idx == 0 || idx > d {
            return Err(CatalogError::DimMismatch { expected: d, found: idx });
        }
    }
    checked_div(m.beta[j - 1], m.beta[k - 1], "coefficient ratio")
}

fn with_model<F>(f: F) -> impl Fn(&ParamPoint, &Context) -> Result<f64, EvalError> + Send + Sync
where
    F: Fn(&BinaryChoiceModel, &Context) -> Result<f64, EvalError> + Send + Sync,
{
    move |p, ctx| f(&BinaryChoiceModel::from_point(p)?, ctx)
}

pub fn counterfactuals() -> Vec<CatalogCounterfactual> {
    vec![
        free(Counterfactual::new(
            "choice_prob",
            &["x"],
            with_model(|m, ctx| Ok(binary_choice_prob(m, ctx.list("x")?)?)),
        )),
        free(Counterfactual::new(
            "marginal_effect",
            &["x"],
            with_model(|m, ctx| Ok(binary_marginal_effect(m, ctx.list("x")?, 2)?)),
        )),
        free(Counterfactual::new(
            "coef_ratio",
            &[],
            with_model(|m, _| Ok(binary_coef_ratio(m, 2, 3)?)),
        )),
        dependent(Counterfactual::new(
            "latent_level",
            &["x"],
            with_model(|m, ctx| Ok(m.index(ctx.list("x")?)?)),
        )),
        dependent(Counterfactual::new(
            "intercept_ratio",
            &[],
            with_model(|m, _| Ok(binary_coef_ratio(m, 1, 2)?)),
        )),
        dependent(Counterfactual::new(
            "pct_welfare",
            &["x", "x_prime"],
            with_model(|m, ctx| Ok(binary_pct_welfare(m, ctx.list("x")?, ctx.list("x_prime")?)?)),
        )),
    ]
}

fn standardize_with(family: &Arc<AffineFamily>, theta: &ParamPoint, loc: f64, spread: f64) -> Result<ParamPoint, QuotientError> {
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(QuotientError::InvalidInput(format!("error spread {spread} is not positive")));
    }
    let b = 1.0 / spread;
    let g = element(family.as_ref(), vec![-loc * b, b])?;
    apply(family.as_ref(), &g, theta)
}

pub fn normalizations() -> Vec<Normalization> {
    let family = Arc::new(binary_affine_family());
    let f1 = Arc::clone(&family);
    let f2 = Arc::clone(&family);
    vec![
        // location 0, scale 1 for the error law
        Normalization::new("standard_error", FAMILY_ID, move |theta| {
            let eps = theta.require_dist(ERROR_NAME)?;
            standardize_with(&f1, theta, eps.location(), eps.scale())
        }),
        // median 0, interquartile range 1
        Normalization::new("median_iqr", FAMILY_ID, move |theta| {
            let eps = theta.require_dist(ERROR_NAME)?;
            let q = |p| eps.quantile(p).map_err(QuotientError::from);
            let (lo, mid, hi) = (q(0.25)?, q(0.5)?, q(0.75)?);
            standardize_with(&f2, theta, mid, hi - lo)
        }),
    ]
}

/// `((β₁ − loc)/s, β₂/s, …, βd/s)` plus the error shape.
pub fn orbit_invariant() -> OrbitInvariant {
    OrbitInvariant::new(|p| {
        let m = BinaryChoiceModel::from_point(p)?;
        let (loc, s) = (m.errdist.location(), m.errdist.scale());
        let mut out = vec![(m.beta[0] - loc) / s];
        out.extend(m.beta[1..].iter().map(|b| b / s));
        out.extend(shape_code(p, ERROR_NAME)?);
        Ok(out)
    })
}

pub fn base_points() -> Result<Vec<ParamPoint>, CatalogError> {
    let specs: [(&[f64], Result<DistHandle, DistError>); 5] = [
        (&[0.2, 0.3, -0.5], DistHandle::logistic(0.0, 1.0)),
        (&[-1.0, 0.8, 1.5], DistHandle::normal(0.0, 1.0)),
        (&[0.5, -2.0, 0.7], DistHandle::cauchy(0.0, 1.0)),
        (&[1.2, 0.4, 0.9], DistHandle::logistic(0.3, 2.0)),
        (&[-0.3, 1.1, -0.6], DistHandle::normal(-0.5, 0.7)),
    ];
    specs
        .into_iter()
        .map(|(beta, d)| BinaryChoiceModel::new(beta.to_vec(), d?)?.to_point())
        .collect()
}

pub fn context() -> Context {
    Context::new()
        .with_list("x", vec![1.0, 1.0, 0.5])
        .with_list("x_prime", vec![1.0, 2.0, 0.5])
}

pub fn entry() -> Result<CatalogEntry, CatalogError> {
    Ok(CatalogEntry {
        id: "binary",
        family: Arc::new(binary_affine_family()),
        base_points: base_points()?,
        context: context(),
        counterfactuals: counterfactuals(),
        normalizations: normalizations(),
        invariant: orbit_invariant(),
    })
}
