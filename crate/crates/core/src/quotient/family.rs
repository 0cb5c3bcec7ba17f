use std::collections::BTreeSet;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{ParamPoint, QuotientError};
use crate::dist::DistHandle;

/// Smallest admissible scale component. The open constraint `b > 0` has to be
/// bounded away from zero in floating point.
pub const MIN_SCALE: f64 = 1e-12;

const LOCATION_RANGE: f64 = 3.0;
const LOG_SCALE_RANGE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Location,
    Scale,
}

/// One transformation ψ inside a family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupElement {
    pub family_id: String,
    pub params: Vec<f64>,
}

/// A parameterized group of modeling-equivalent transformations.
///
/// `compose_params(outer, inner)` is the element that applies `inner` first
/// and then `outer`, matching ψ₁ ∘ ψ₂.
pub trait TransformFamily: Send + Sync {
    fn id(&self) -> &str;

    fn param_names(&self) -> &[String];

    fn param_kinds(&self) -> Vec<ParamKind>;

    fn act(&self, params: &[f64], theta: &ParamPoint) -> Result<ParamPoint, QuotientError>;

    fn compose_params(&self, outer: &[f64], inner: &[f64]) -> Vec<f64>;

    fn inverse_params(&self, params: &[f64]) -> Vec<f64>;

    fn identity_params(&self) -> Vec<f64>;

    /// Maintained-assumption tags this family is declared to preserve.
    fn preserves(&self) -> &BTreeSet<String>;

    /// A random point the action can be evaluated on; used by the axiom checks.
    fn sample_point(&self, rng: &mut dyn RngCore) -> ParamPoint;

    fn param_dim(&self) -> usize {
        self.param_names().len()
    }

    fn satisfies(&self, params: &[f64]) -> bool {
        params.len() == self.param_dim()
            && params.iter().zip(self.param_kinds()).all(|(&p, kind)| match kind {
                ParamKind::Location => p.is_finite(),
                ParamKind::Scale => p.is_finite() && p >= MIN_SCALE,
            })
    }
}

fn check_member(family: &dyn TransformFamily, g: &GroupElement) -> Result<(), QuotientError> {
    if g.family_id != family.id() {
        return Err(QuotientError::FamilyMismatch {
            expected: family.id().to_string(),
            found: g.family_id.clone(),
        });
    }
    if !family.satisfies(&g.params) {
        return Err(QuotientError::ConstraintViolated {
            family: family.id().to_string(),
            params: g.params.clone(),
        });
    }
    Ok(())
}

/// Builds a validated element of `family`.
pub fn element(family: &dyn TransformFamily, params: Vec<f64>) -> Result<GroupElement, QuotientError> {
    let g = GroupElement { family_id: family.id().to_string(), params };
    check_member(family, &g)?;
    Ok(g)
}

pub fn identity(family: &dyn TransformFamily) -> GroupElement {
    GroupElement { family_id: family.id().to_string(), params: family.identity_params() }
}

pub fn apply(
    family: &dyn TransformFamily,
    g: &GroupElement,
    theta: &ParamPoint,
) -> Result<ParamPoint, QuotientError> {
    check_member(family, g)?;
    family.act(&g.params, theta)
}

/// `compose(g1, g2)` applies `g2` first, then `g1`.
pub fn compose(
    family: &dyn TransformFamily,
    g1: &GroupElement,
    g2: &GroupElement,
) -> Result<GroupElement, QuotientError> {
    check_member(family, g1)?;
    check_member(family, g2)?;
    element(family, family.compose_params(&g1.params, &g2.params))
}

pub fn invert(family: &dyn TransformFamily, g: &GroupElement) -> Result<GroupElement, QuotientError> {
    check_member(family, g)?;
    element(family, family.inverse_params(&g.params))
}

/// Draws `n` elements: locations uniform on [-3, 3], log-scales uniform on [-2, 2].
pub fn sample_group(family: &dyn TransformFamily, seed: u64, n: usize) -> Vec<GroupElement> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_group_with(family, &mut rng, n)
}

pub fn sample_group_with(
    family: &dyn TransformFamily,
    rng: &mut dyn RngCore,
    n: usize,
) -> Vec<GroupElement> {
    let kinds = family.param_kinds();
    (0..n)
        .map(|_| GroupElement {
            family_id: family.id().to_string(),
            params: kinds
                .iter()
                .map(|kind| match kind {
                    ParamKind::Location => rng.random_range(-LOCATION_RANGE..=LOCATION_RANGE),
                    ParamKind::Scale => rng
                        .random_range(-LOG_SCALE_RANGE..=LOG_SCALE_RANGE)
                        .exp(),
                })
                .collect(),
        })
        .collect()
}

/// Which names a rule of an [`AffineFamily`] applies to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selector {
    /// Exactly this name; the name must be present when the action runs.
    Exact(String),
    /// `stem` followed by one or more ASCII digits, e.g. `b2`, `A10`.
    Indexed(String),
    /// Any name starting with the prefix.
    Prefix(String),
}

impl Selector {
    pub fn exact(name: &str) -> Self {
        Selector::Exact(name.to_string())
    }

    pub fn indexed(stem: &str) -> Self {
        Selector::Indexed(stem.to_string())
    }

    pub fn prefix(prefix: &str) -> Self {
        Selector::Prefix(prefix.to_string())
    }

    pub fn matches(&self, name: &str) -> bool {
        match self {
            Selector::Exact(n) => n == name,
            Selector::Indexed(stem) => name
                .strip_prefix(stem.as_str())
                .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit())),
            Selector::Prefix(p) => name.starts_with(p.as_str()),
        }
    }

    fn example_names(&self) -> Vec<String> {
        match self {
            Selector::Exact(n) => vec![n.clone()],
            Selector::Indexed(stem) => (1..=3).map(|i| format!("{stem}{i}")).collect(),
            Selector::Prefix(p) => vec![format!("{p}0_0"), format!("{p}0_1")],
        }
    }
}

#[derive(Debug, Clone)]
struct Rule {
    selector: Selector,
    // (parameter index, weight) pairs forming the additive shift
    shift: Vec<(usize, f64)>,
}

/// A coordinatewise positive-affine family: every matched coordinate (or
/// distribution location) maps to `Σ wₖ·locₖ + s·x`, every matched scale to
/// `s·scale`, where `s` is the single scale parameter. Unmatched names are
/// left unchanged. Rules are tried in declaration order; the first match wins.
#[derive(Debug, Clone)]
pub struct AffineFamily {
    id: String,
    param_names: Vec<String>,
    scale_index: usize,
    coord_rules: Vec<Rule>,
    dist_rules: Vec<Rule>,
    preserves: BTreeSet<String>,
}

pub struct AffineFamilyBuilder {
    family: AffineFamily,
    error: Option<QuotientError>,
}

impl AffineFamily {
    pub fn builder(id: &str, param_names: &[&str], scale_param: &str) -> AffineFamilyBuilder {
        let names: Vec<String> = param_names.iter().map(|s| s.to_string()).collect();
        let scale_index = names.iter().position(|n| n == scale_param);
        AffineFamilyBuilder {
            error: scale_index.is_none().then(|| {
                QuotientError::InvalidInput(format!("scale parameter `{scale_param}` not declared"))
            }),
            family: AffineFamily {
                id: id.to_string(),
                param_names: names,
                scale_index: scale_index.unwrap_or(0),
                coord_rules: Vec::new(),
                dist_rules: Vec::new(),
                preserves: BTreeSet::new(),
            },
        }
    }

    fn scale(&self, params: &[f64]) -> f64 {
        params[self.scale_index]
    }

    fn shift(rule: &Rule, params: &[f64]) -> f64 {
        rule.shift.iter().map(|&(k, w)| w * params[k]).sum()
    }

    fn find<'a>(rules: &'a [Rule], name: &str) -> Option<&'a Rule> {
        rules.iter().find(|r| r.selector.matches(name))
    }

    // Skips the addition when the shift is exactly zero so the identity
    // element reproduces every coordinate bitwise (including -0.0).
    fn affine(shift: f64, scale: f64, x: f64) -> f64 {
        let v = scale * x;
        if shift == 0.0 {
            v
        } else {
            v + shift
        }
    }

    pub fn scale_param(&self) -> &str {
        &self.param_names[self.scale_index]
    }
}

impl AffineFamilyBuilder {
    fn resolve(&mut self, shift: &[(&str, f64)]) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(shift.len());
        for &(name, w) in shift {
            match self.family.param_names.iter().position(|n| n == name) {
                Some(k) if k != self.family.scale_index => out.push((k, w)),
                _ => {
                    self.error.get_or_insert(QuotientError::InvalidInput(format!(
                        "`{name}` is not a location parameter of `{}`",
                        self.family.id
                    )));
                }
            }
        }
        out
    }

    /// Matched coordinates become `shift + s·x`.
    pub fn coord(mut self, selector: Selector, shift: &[(&str, f64)]) -> Self {
        let shift = self.resolve(shift);
        self.family.coord_rules.push(Rule { selector, shift });
        self
    }

    /// Matched distributions get location `shift + s·loc` and scale `s·scale`.
    pub fn dist(mut self, selector: Selector, shift: &[(&str, f64)]) -> Self {
        let shift = self.resolve(shift);
        self.family.dist_rules.push(Rule { selector, shift });
        self
    }

    pub fn preserves(mut self, tags: &[&str]) -> Self {
        self.family.preserves.extend(tags.iter().map(|t| t.to_string()));
        self
    }

    pub fn build(self) -> Result<AffineFamily, QuotientError> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.family),
        }
    }
}

impl TransformFamily for AffineFamily {
    fn id(&self) -> &str {
        &self.id
    }

    fn param_names(&self) -> &[String] {
        &self.param_names
    }

    fn param_kinds(&self) -> Vec<ParamKind> {
        (0..self.param_names.len())
            .map(|k| if k == self.scale_index { ParamKind::Scale } else { ParamKind::Location })
            .collect()
    }

    fn act(&self, params: &[f64], theta: &ParamPoint) -> Result<ParamPoint, QuotientError> {
        for rule in self.coord_rules.iter().chain(&self.dist_rules) {
            if let Selector::Exact(name) = &rule.selector {
                if theta.coord(name).is_none() && theta.dist(name).is_none() {
                    return Err(QuotientError::UnknownName(name.clone()));
                }
            }
        }
        let s = self.scale(params);
        let mut out = theta.clone();
        for (name, value) in out.coords_mut().iter_mut() {
            if let Some(rule) = Self::find(&self.coord_rules, name) {
                *value = Self::affine(Self::shift(rule, params), s, *value);
                if !value.is_finite() {
                    return Err(QuotientError::NonFinite(name.clone()));
                }
            }
        }
        for (name, dist) in out.dists_mut().iter_mut() {
            if let Some(rule) = Self::find(&self.dist_rules, name) {
                let loc = Self::affine(Self::shift(rule, params), s, dist.location());
                let scale = s * dist.scale();
                if !(loc.is_finite() && scale.is_finite() && scale > 0.0) {
                    return Err(QuotientError::NonFinite(name.clone()));
                }
                *dist = dist.with_location_scale(loc, scale)?;
            }
        }
        Ok(out)
    }

    fn compose_params(&self, outer: &[f64], inner: &[f64]) -> Vec<f64> {
        let s_outer = self.scale(outer);
        (0..self.param_names.len())
            .map(|k| {
                if k == self.scale_index {
                    s_outer * inner[k]
                } else {
                    outer[k] + s_outer * inner[k]
                }
            })
            .collect()
    }

    fn inverse_params(&self, params: &[f64]) -> Vec<f64> {
        let s = self.scale(params);
        (0..params.len())
            .map(|k| if k == self.scale_index { 1.0 / s } else { -params[k] / s })
            .collect()
    }

    fn identity_params(&self) -> Vec<f64> {
        (0..self.param_names.len())
            .map(|k| if k == self.scale_index { 1.0 } else { 0.0 })
            .collect()
    }

    fn preserves(&self) -> &BTreeSet<String> {
        &self.preserves
    }

    fn sample_point(&self, rng: &mut dyn RngCore) -> ParamPoint {
        let mut point = ParamPoint::new();
        for rule in &self.coord_rules {
            for name in rule.selector.example_names() {
                if point.coord(&name).is_none() {
                    let v = rng.random_range(-3.0..=3.0);
                    // names produced by distinct selectors never collide with dists
                    let _ = point.insert_coord(name, v);
                }
            }
        }
        for rule in &self.dist_rules {
            for name in rule.selector.example_names() {
                if point.dist(&name).is_none() && point.coord(&name).is_none() {
                    let loc = rng.random_range(-3.0..=3.0);
                    let scale = rng.random_range(-1.0_f64..=1.0).exp();
                    let d = DistHandle::logistic(loc, scale).expect("finite positive scale");
                    let _ = point.insert_dist(name, d);
                }
            }
        }
        point
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary() -> AffineFamily {
        AffineFamily::builder("affine2", &["a", "b"], "b")
            .coord(Selector::exact("b1"), &[("a", 1.0)])
            .coord(Selector::indexed("b"), &[])
            .dist(Selector::exact("eps"), &[("a", 1.0)])
            .build()
            .unwrap()
    }

    fn theta() -> ParamPoint {
        ParamPoint::new()
            .with_coord("b1", 0.2)
            .unwrap()
            .with_coord("b2", 0.3)
            .unwrap()
            .with_dist("eps", DistHandle::logistic(0.0, 1.0).unwrap())
            .unwrap()
    }

    #[test]
    fn selectors() {
        assert!(Selector::indexed("b").matches("b12"));
        assert!(!Selector::indexed("b").matches("b"));
        assert!(!Selector::indexed("b").matches("beta"));
        assert!(Selector::prefix("w_").matches("w_0_1"));
        assert!(Selector::exact("C").matches("C"));
    }

    #[test]
    fn builder_rejects_unknown_params() {
        assert!(AffineFamily::builder("x", &["a", "b"], "c").build().is_err());
        let r = AffineFamily::builder("x", &["a", "b"], "b")
            .coord(Selector::exact("y"), &[("b", 1.0)])
            .build();
        assert!(r.is_err());
    }

    #[test]
    fn apply_hand_computed() {
        let f = binary();
        let g = element(&f, vec![1.0, 2.0]).unwrap();
        let out = apply(&f, &g, &theta()).unwrap();
        assert!((out.coord("b1").unwrap() - 1.4).abs() < 1e-15);
        assert!((out.coord("b2").unwrap() - 0.6).abs() < 1e-15);
        let eps = out.dist("eps").unwrap();
        assert_eq!((eps.location(), eps.scale()), (1.0, 2.0));
    }

    #[test]
    fn identity_is_bitwise() {
        let f = binary();
        let t = theta().with_coord("b3", -0.0).unwrap();
        let out = apply(&f, &identity(&f), &t).unwrap();
        for (name, v) in t.coords() {
            assert_eq!(v.to_bits(), out.coord(name).unwrap().to_bits());
        }
        assert_eq!(out, t);
    }

    #[test]
    fn compose_and_invert_examples() {
        let f = binary();
        let g1 = element(&f, vec![1.0, 2.0]).unwrap();
        let g2 = element(&f, vec![3.0, 4.0]).unwrap();
        assert_eq!(compose(&f, &g1, &g2).unwrap().params, vec![7.0, 8.0]);
        let g = element(&f, vec![5.0, 0.5]).unwrap();
        assert_eq!(compose(&f, &g, &identity(&f)).unwrap(), g);
        assert_eq!(invert(&f, &g1).unwrap().params, vec![-0.5, 0.5]);
        assert_eq!(invert(&f, &identity(&f)).unwrap(), identity(&f));
        let pure = element(&f, vec![0.0, 4.0]).unwrap();
        assert_eq!(invert(&f, &pure).unwrap().params, vec![0.0, 0.25]);
    }

    #[test]
    fn errors() {
        let f = binary();
        assert!(matches!(element(&f, vec![0.0, 0.0]), Err(QuotientError::ConstraintViolated { .. })));
        assert!(matches!(element(&f, vec![0.0, 1e-13]), Err(QuotientError::ConstraintViolated { .. })));
        assert!(element(&f, vec![0.0]).is_err());
        let wrong = GroupElement { family_id: "other".into(), params: vec![0.0, 1.0] };
        assert!(matches!(apply(&f, &wrong, &theta()), Err(QuotientError::FamilyMismatch { .. })));
        let missing = ParamPoint::new().with_coord("b2", 1.0).unwrap();
        let g = element(&f, vec![1.0, 1.0]).unwrap();
        assert_eq!(apply(&f, &g, &missing), Err(QuotientError::UnknownName("b1".into())));
        let huge = ParamPoint::new()
            .with_coord("b1", 1e308)
            .unwrap()
            .with_dist("eps", DistHandle::logistic(0.0, 1.0).unwrap())
            .unwrap();
        let g = element(&f, vec![0.0, 7.0]).unwrap();
        assert_eq!(apply(&f, &g, &huge), Err(QuotientError::NonFinite("b1".into())));
    }

    #[test]
    fn sampling_is_deterministic_and_valid() {
        let f = binary();
        let a = sample_group(&f, 42, 3);
        let b = sample_group(&f, 42, 3);
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        let many = sample_group(&f, 7, 1000);
        assert!(many.iter().all(|g| f.satisfies(&g.params)));
        assert!(many.iter().all(|g| g.params[0].abs() <= 3.0));
        assert!(many.iter().all(|g| g.params[1].ln().abs() <= 2.0 + 1e-12));
        assert_ne!(sample_group(&f, 43, 3), a);
    }

    #[test]
    fn sampled_roundtrip() {
        let f = binary();
        let t = theta();
        for g in sample_group(&f, 11, 200) {
            let back = apply(&f, &invert(&f, &g).unwrap(), &apply(&f, &g, &t).unwrap()).unwrap();
            assert!(back.relative_diff(&t) <= 1e-10);
        }
    }
}
