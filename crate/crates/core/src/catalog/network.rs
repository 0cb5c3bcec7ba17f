//! Dyadic link formation `D_ij = 1{w(x_i, x_j) + A_i + A_j ≥ U_ij}`, `U_ij ~ F`.
//!
//! Point layout: homophily values `w_k_l` for covariate levels `k ≤ l`
//! (0-based), fixed effects `A1..An`, and the shock law `U`. Individual
//! covariate levels are observables and live in the model (or in the
//! `x_level` context list for counterfactuals).

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{checked_div, dependent, free, shape_code, CatalogCounterfactual, CatalogEntry, CatalogError};
use crate::audit::{Context, Counterfactual, EvalError, Normalization, OrbitInvariant};
use crate::dist::{DistHandle, GridPoint};
use crate::quotient::{apply, element, AffineFamily, ParamPoint, Selector, TransformFamily};

pub const FAMILY_ID: &str = "network_affine";
pub const PARAMETRIC_FAMILY_ID: &str = "network_parametric";
pub const SHOCK_NAME: &str = "U";
pub const DEFAULT_ALPHA_Q: f64 = 0.25;
/// Covariate level whose own-pair homophily is pinned to zero.
pub const REFERENCE_LEVEL: usize = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub levels: usize,
    /// Keyed by `(k, l)` with `k ≤ l`.
    pub w: BTreeMap<(usize, usize), f64>,
    pub a: Vec<f64>,
    pub errdist: DistHandle,
    pub covariates: Vec<usize>,
    pub alpha_q: f64,
}

fn w_name(k: usize, l: usize) -> String {
    format!("w_{k}_{l}")
}

fn a_name(i: usize) -> String {
    format!("A{}", i + 1)
}

fn parse_w_name(name: &str) -> Option<(usize, usize)> {
    let rest = name.strip_prefix("w_")?;
    let (k, l) = rest.split_once('_')?;
    Some((k.parse().ok()?, l.parse().ok()?))
}

impl NetworkModel {
    pub fn new(
        levels: usize,
        w: BTreeMap<(usize, usize), f64>,
        a: Vec<f64>,
        errdist: DistHandle,
        covariates: Vec<usize>,
    ) -> Result<Self, CatalogError> {
        if levels == 0 || a.is_empty() {
            return Err(CatalogError::InvalidModel("need at least one level and one individual".into()));
        }
        for k in 0..levels {
            for l in k..levels {
                if !w.get(&(k, l)).is_some_and(|v| v.is_finite()) {
                    return Err(CatalogError::InvalidModel(format!("missing homophily value w({k},{l})")));
                }
            }
        }
        if w.keys().any(|&(k, l)| k > l || l >= levels) {
            return Err(CatalogError::InvalidModel("homophily keys must satisfy k <= l < levels".into()));
        }
        if let Some(&bad) = covariates.iter().find(|&&x| x >= levels) {
            return Err(CatalogError::OffGrid { level: bad as f64, levels });
        }
        Ok(Self { levels, w, a, errdist, covariates, alpha_q: DEFAULT_ALPHA_Q })
    }

    /// Symmetric lookup `w(k, l) = w(l, k)`.
    pub fn w_at(&self, k: usize, l: usize) -> Result<f64, CatalogError> {
        self.w
            .get(&(k.min(l), k.max(l)))
            .copied()
            .ok_or(CatalogError::OffGrid { level: k.max(l) as f64, levels: self.levels })
    }

    pub fn to_point(&self) -> Result<ParamPoint, CatalogError> {
        let mut p = ParamPoint::new();
        for (&(k, l), v) in &self.w {
            p.insert_coord(w_name(k, l), *v)?;
        }
        for (i, v) in self.a.iter().enumerate() {
            p.insert_coord(a_name(i), *v)?;
        }
        p.insert_dist(SHOCK_NAME, self.errdist.clone())?;
        Ok(p)
    }

    pub fn from_point(p: &ParamPoint, covariates: Vec<usize>) -> Result<Self, CatalogError> {
        let mut w = BTreeMap::new();
        let mut levels = 0;
        for (name, v) in p.coords() {
            if let Some((k, l)) = parse_w_name(name) {
                levels = levels.max(l + 1).max(k + 1);
                w.insert((k, l), *v);
            }
        }
        let a: Vec<f64> = (0..).map_while(|i| p.coord(&a_name(i))).collect();
        Self::new(levels, w, a, p.require_dist(SHOCK_NAME)?.clone(), covariates)
    }
}

/// `(a, b, c)`: `w ↦ cw + b`, `Aᵢ ↦ cAᵢ + a`, `U ↦ cU + 2a + b`.
pub fn network_affine_family() -> AffineFamily {
    AffineFamily::builder(FAMILY_ID, &["a", "b", "c"], "c")
        .coord(Selector::prefix("w_"), &[("b", 1.0)])
        .coord(Selector::indexed("A"), &[("a", 1.0)])
        .dist(Selector::exact(SHOCK_NAME), &[("a", 2.0), ("b", 1.0)])
        .preserves(&["iid-errors", "cross-sectional-sampling", "cdf-monotone", "w-symmetry"])
        .build()
        .expect("network family is well formed")
}

/// Parametric homophily `w = w̃'β` with `w̃(x, x) = 0`: the `b` freedom is
/// gone, leaving `(a, c)`: `β ↦ cβ`, `Aᵢ ↦ cAᵢ + a`, `U ↦ cU + 2a`.
pub fn network_parametric_family() -> AffineFamily {
    AffineFamily::builder(PARAMETRIC_FAMILY_ID, &["a", "c"], "c")
        .coord(Selector::indexed("beta"), &[])
        .coord(Selector::indexed("A"), &[("a", 1.0)])
        .dist(Selector::exact(SHOCK_NAME), &[("a", 2.0)])
        .preserves(&["iid-errors", "cross-sectional-sampling", "cdf-monotone", "w-symmetry"])
        .build()
        .expect("parametric network family is well formed")
}

fn individual(m: &NetworkModel, i: usize) -> Result<(usize, f64), CatalogError> {
    if i == 0 || i > m.a.len() || i > m.covariates.len() {
        return Err(CatalogError::DimMismatch { expected: m.a.len().min(m.covariates.len()), found: i });
    }
    Ok((m.covariates[i - 1], m.a[i - 1]))
}

/// `F(w(x_i, x_j) + A_i + A_j)` for 1-based individuals `i ≠ j`.
pub fn network_link_prob(m: &NetworkModel, i: usize, j: usize) -> Result<f64, CatalogError> {
    if i == j {
        return Err(CatalogError::InvalidModel("a link needs two distinct individuals".into()));
    }
    let (xi, ai) = individual(m, i)?;
    let (xj, aj) = individual(m, j)?;
    Ok(m.errdist.cdf(m.w_at(xi, xj)? + ai + aj))
}

/// 1-based individuals ordered by fixed effect, ties by index.
pub fn fixed_effect_ranking(m: &NetworkModel) -> Vec<usize> {
    let mut order: Vec<usize> = (1..=m.a.len()).collect();
    order.sort_by(|&i, &j| m.a[i - 1].total_cmp(&m.a[j - 1]));
    order
}

/// Lexicographic rank of a permutation of `1..=n`, so a ranking can be
/// audited as a real number.
pub fn permutation_rank(perm: &[usize]) -> u64 {
    let n = perm.len();
    let mut rank = 0u64;
    for i in 0..n {
        let smaller = perm[i + 1..].iter().filter(|&&v| v < perm[i]).count() as u64;
        rank = rank * (n - i) as u64 + smaller;
    }
    rank
}

/// Maps the model to the representative with `F⁻¹(α) = 0`,
/// `F⁻¹(1 − α) − F⁻¹(α) = 1`, and `w(x̄, x̄) = 0`.
pub fn two_quantile_normalize(m: &NetworkModel, alpha_q: f64) -> Result<NetworkModel, CatalogError> {
    let family = network_affine_family();
    let g = two_quantile_element(&family, &m.to_point()?, alpha_q)?;
    let out = apply(&family, &g, &m.to_point()?)?;
    let mut normalized = NetworkModel::from_point(&out, m.covariates.clone())?;
    normalized.alpha_q = alpha_q;
    Ok(normalized)
}

fn two_quantile_element(
    family: &dyn TransformFamily,
    theta: &ParamPoint,
    alpha_q: f64,
) -> Result<crate::quotient::GroupElement, CatalogError> {
    if !(alpha_q > 0.0 && alpha_q < 0.5) {
        return Err(CatalogError::InvalidModel(format!("quantile level {alpha_q} outside (0, 0.5)")));
    }
    let u = theta.require_dist(SHOCK_NAME)?;
    let lo = u.quantile(alpha_q)?;
    let hi = u.quantile(1.0 - alpha_q)?;
    if hi <= lo {
        return Err(CatalogError::DegenerateQuantiles { lo, hi });
    }
    let w_ref = theta.require_coord(&w_name(REFERENCE_LEVEL, REFERENCE_LEVEL))?;
    let c = 1.0 / (hi - lo);
    let b = -c * w_ref;
    let a = (c * w_ref - c * lo) / 2.0;
    Ok(element(family, vec![a, b, c])?)
}

fn covariates_from(ctx: &Context) -> Result<Vec<usize>, EvalError> {
    ctx.list("x_level")?
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(EvalError::ContextShape {
                    name: "x_level".into(),
                    detail: format!("{v} is not a level index"),
                })
            }
        })
        .collect()
}

fn with_model<F>(f: F) -> impl Fn(&ParamPoint, &Context) -> Result<f64, EvalError> + Send + Sync
where
    F: Fn(&NetworkModel) -> Result<f64, CatalogError> + Send + Sync,
{
    move |p, ctx| Ok(f(&NetworkModel::from_point(p, covariates_from(ctx)?)?)?)
}

pub fn counterfactuals() -> Vec<CatalogCounterfactual> {
    let schema = &["x_level"];
    vec![
        free(Counterfactual::new("link_prob", schema, with_model(|m| network_link_prob(m, 1, 2)))),
        free(Counterfactual::new(
            "fe_ranking",
            schema,
            with_model(|m| Ok(permutation_rank(&fixed_effect_ranking(m)) as f64)),
        )),
        free(Counterfactual::new(
            "w_shape",
            schema,
            with_model(|m| {
                let base = m.w_at(0, 0)?;
                checked_div(m.w_at(0, 1)? - base, m.w_at(1, 1)? - base, "homophily shape")
            }),
        )),
        dependent(Counterfactual::new("fe_level", schema, with_model(|m| Ok(m.a[0])))),
        dependent(Counterfactual::new("w_level", schema, with_model(|m| m.w_at(0, 1)))),
        dependent(Counterfactual::new(
            "w_pct",
            schema,
            with_model(|m| {
                let from = m.w_at(0, 1)?;
                checked_div(m.w_at(1, 1)? - from, from, "homophily percentage change")
            }),
        )),
    ]
}

pub fn normalizations() -> Vec<Normalization> {
    let family = Arc::new(network_affine_family());
    vec![Normalization::new("two_quantile", FAMILY_ID, move |theta| {
        let g = two_quantile_element(family.as_ref(), theta, DEFAULT_ALPHA_Q)?;
        apply(family.as_ref(), &g, theta)
    })]
}

/// Homophily and fixed-effect contrasts and the shock location offset, all
/// in units of the shock scale, plus the shock shape.
pub fn orbit_invariant() -> OrbitInvariant {
    OrbitInvariant::new(|p| {
        let m = NetworkModel::from_point(p, Vec::new())?;
        let s = m.errdist.scale();
        let w_ref = m.w_at(REFERENCE_LEVEL, REFERENCE_LEVEL)?;
        let mut out: Vec<f64> = m.w.values().map(|v| (v - w_ref) / s).collect();
        out.extend(m.a[1..].iter().map(|v| (v - m.a[0]) / s));
        out.push((m.errdist.location() - 2.0 * m.a[0] - w_ref) / s);
        out.extend(shape_code(p, SHOCK_NAME)?);
        Ok(out)
    })
}

fn two_level(w: [f64; 3], a: &[f64], u: DistHandle) -> Result<ParamPoint, CatalogError> {
    let w = BTreeMap::from([((0, 0), w[0]), ((0, 1), w[1]), ((1, 1), w[2])]);
    NetworkModel::new(2, w, a.to_vec(), u, vec![0, 1, 1, 0])?.to_point()
}

pub fn base_points() -> Result<Vec<ParamPoint>, CatalogError> {
    let grid = vec![
        GridPoint { probability: 0.1, value: -1.5 },
        GridPoint { probability: 0.25, value: -0.6 },
        GridPoint { probability: 0.5, value: 0.0 },
        GridPoint { probability: 0.75, value: 0.7 },
        GridPoint { probability: 0.9, value: 1.8 },
    ];
    Ok(vec![
        two_level([0.3, -0.2, 0.5], &[0.1, 0.2, -0.3, 0.6], DistHandle::logistic(0.0, 1.0)?)?,
        two_level([0.0, 0.4, -0.6], &[-0.5, 1.0, 0.25, -1.2], DistHandle::normal(0.0, 1.0)?)?,
        two_level([1.0, 0.2, 0.5], &[0.3, -0.1, 0.9, 0.0], DistHandle::cauchy(0.5, 2.0)?)?,
        two_level([-0.4, 0.7, 1.1], &[2.0, -1.0, 0.5, 1.5], DistHandle::uniform(-1.0, 4.0)?)?,
        two_level([0.2, -0.8, 0.6], &[0.0, 0.4, -0.7, 0.8], DistHandle::quantile_grid(0.0, 1.0, grid)?)?,
    ])
}

pub fn context() -> Context {
    Context::new().with_list("x_level", vec![0.0, 1.0, 1.0, 0.0])
}

pub fn entry() -> Result<CatalogEntry, CatalogError> {
    Ok(CatalogEntry {
        id: "network",
        family: Arc::new(network_affine_family()),
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
    use crate::quotient::{compose, identity};

    fn single_pair(w: f64, ai: f64, aj: f64, u: DistHandle) -> NetworkModel {
        NetworkModel::new(1, BTreeMap::from([((0, 0), w)]), vec![ai, aj], u, vec![0, 0]).unwrap()
    }

    #[test]
    fn family_examples() {
        let f = network_affine_family();
        let m = single_pair(0.3, 0.1, 0.2, DistHandle::logistic(0.0, 1.0).unwrap());
        let p = m.to_point().unwrap();
        assert_eq!(apply(&f, &identity(&f), &p).unwrap(), p);
        let g = element(&f, vec![1.0, 0.5, 2.0]).unwrap();
        let out = NetworkModel::from_point(&apply(&f, &g, &p).unwrap(), vec![0, 0]).unwrap();
        assert!((out.w_at(0, 0).unwrap() - 1.1).abs() < 1e-15);
        assert!((out.a[0] - 1.2).abs() < 1e-15 && (out.a[1] - 1.4).abs() < 1e-15);
        assert_eq!(out.errdist, DistHandle::logistic(2.5, 2.0).unwrap());
        let g1 = element(&f, vec![1.0, 0.0, 2.0]).unwrap();
        let g2 = element(&f, vec![1.0, 1.0, 3.0]).unwrap();
        assert_eq!(compose(&f, &g1, &g2).unwrap().params, vec![3.0, 2.0, 6.0]);
    }

    #[test]
    fn link_prob_values() {
        let m = single_pair(0.3, 0.1, 0.2, DistHandle::logistic(0.0, 1.0).unwrap());
        // 1 / (1 + e^-0.6)
        let expected = 0.645_656_306_225_795_4;
        assert!((network_link_prob(&m, 1, 2).unwrap() - expected).abs() < 1e-15);
        let f = network_affine_family();
        let g = element(&f, vec![1.0, 0.5, 2.0]).unwrap();
        let moved = NetworkModel::from_point(&apply(&f, &g, &m.to_point().unwrap()).unwrap(), vec![0, 0]).unwrap();
        assert!((network_link_prob(&moved, 1, 2).unwrap() - expected).abs() < 1e-15);
        let median = single_pair(0.0, 0.25, -0.25, DistHandle::normal(0.0, 3.0).unwrap());
        assert_eq!(network_link_prob(&median, 1, 2).unwrap(), 0.5);
        let off = NetworkModel { covariates: vec![0, 3], ..m.clone() };
        assert!(matches!(network_link_prob(&off, 1, 2), Err(CatalogError::OffGrid { .. })));
    }

    #[test]
    fn ranking() {
        let m = NetworkModel::new(
            1,
            BTreeMap::from([((0, 0), 0.0)]),
            vec![0.1, 0.2, -0.3],
            DistHandle::logistic(0.0, 1.0).unwrap(),
            vec![0, 0, 0],
        )
        .unwrap();
        assert_eq!(fixed_effect_ranking(&m), vec![3, 1, 2]);
        let flat = NetworkModel { a: vec![0.5; 4], ..m };
        assert_eq!(fixed_effect_ranking(&flat), vec![1, 2, 3, 4]);
        assert_eq!(permutation_rank(&[1, 2, 3]), 0);
        assert_eq!(permutation_rank(&[3, 2, 1]), 5);
        assert_eq!(permutation_rank(&[3, 1, 2]), 4);
    }

    #[test]
    fn two_quantile_uniform_example() {
        let m = single_pair(0.0, 0.0, 0.0, DistHandle::uniform(0.0, 1.0).unwrap());
        let n = two_quantile_normalize(&m, 0.25).unwrap();
        assert!((n.errdist.location() + 0.5).abs() < 1e-15);
        assert!((n.errdist.scale() - 2.0).abs() < 1e-15);
        assert!(n.errdist.quantile(0.25).unwrap().abs() < 1e-12);
        assert!((n.errdist.quantile(0.75).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_quantile_logistic_example() {
        let m = single_pair(0.4, 0.1, -0.2, DistHandle::logistic(0.0, 1.0).unwrap());
        let n = two_quantile_normalize(&m, 0.25).unwrap();
        // c = 1 / (2 log 3)
        assert!((n.errdist.scale() - 0.455_119_613_313_418_7).abs() < 1e-15);
        assert!(n.errdist.quantile(0.25).unwrap().abs() < 1e-10);
        assert!((n.errdist.quantile(0.75).unwrap() - 1.0).abs() < 1e-10);
        assert!(n.w_at(0, 0).unwrap().abs() < 1e-15);
        let again = two_quantile_normalize(&n, 0.25).unwrap();
        assert!(again.to_point().unwrap().relative_diff(&n.to_point().unwrap()) < 1e-12);
    }

    #[test]
    fn degenerate_quantiles() {
        let m = single_pair(0.0, 0.0, 0.0, DistHandle::point_mass(1.0).unwrap());
        assert!(matches!(two_quantile_normalize(&m, 0.25), Err(CatalogError::DegenerateQuantiles { .. })));
    }

    #[test]
    fn parametric_family_has_two_degrees_of_freedom() {
        let f = network_parametric_family();
        assert_eq!(f.param_dim(), 2);
        let p = ParamPoint::new()
            .with_coord("beta1", 0.5)
            .unwrap()
            .with_coord("A1", 0.1)
            .unwrap()
            .with_dist(SHOCK_NAME, DistHandle::logistic(0.0, 1.0).unwrap())
            .unwrap();
        let g = element(&f, vec![1.0, 2.0]).unwrap();
        let out = apply(&f, &g, &p).unwrap();
        assert_eq!(out.coord("beta1"), Some(1.0));
        assert!((out.coord("A1").unwrap() - 1.2).abs() < 1e-15);
        assert_eq!(out.dist(SHOCK_NAME).unwrap().location(), 2.0);
    }
}
