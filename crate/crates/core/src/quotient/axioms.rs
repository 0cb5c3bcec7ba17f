use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::family::{apply, compose, identity, invert, sample_group_with, GroupElement, TransformFamily};
use super::{ParamPoint, QuotientError};

/// Worst residuals of the group laws over sampled triples, each scaled by
/// `1 + magnitude` of the compared values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub family_id: String,
    pub n: usize,
    pub seed: u64,
    pub tol: f64,
    pub identity_residual: f64,
    pub associativity_residual: f64,
    pub inverse_residual: f64,
    pub action_consistency_residual: f64,
    pub failures: Vec<String>,
    pub pass: bool,
}

fn param_residual(a: &GroupElement, b: &GroupElement) -> f64 {
    if a.params.len() != b.params.len() {
        return f64::INFINITY;
    }
    let mag = a
        .params
        .iter()
        .chain(&b.params)
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let diff = a
        .params
        .iter()
        .zip(&b.params)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    diff / (1.0 + mag)
}

struct Tracker {
    worst: f64,
    failures: Vec<String>,
    label: &'static str,
}

impl Tracker {
    fn new(label: &'static str) -> Self {
        Self { worst: 0.0, failures: Vec::new(), label }
    }

    fn record(&mut self, r: Result<f64, QuotientError>) {
        match r {
            Ok(v) if v.is_nan() => self.worst = f64::INFINITY,
            Ok(v) => self.worst = self.worst.max(v),
            Err(e) => {
                self.worst = f64::INFINITY;
                if self.failures.len() < 3 {
                    self.failures.push(format!("{}: {e}", self.label));
                }
            }
        }
    }
}

/// Checks identity, associativity, inverses and action/composition
/// consistency on `n` sampled triples. Failures are reported, not returned.
pub fn check_group_axioms(family: &dyn TransformFamily, seed: u64, n: usize, tol: f64) -> AxiomReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let elements = sample_group_with(family, &mut rng, 3 * n.max(1));
    let points: Vec<ParamPoint> = (0..n.max(1)).map(|_| family.sample_point(&mut rng)).collect();
    let e = identity(family);

    let mut ident = Tracker::new("identity");
    let mut assoc = Tracker::new("associativity");
    let mut inv = Tracker::new("inverse");
    let mut action = Tracker::new("action consistency");

    for (triple, theta) in elements.chunks(3).zip(&points) {
        let (g1, g2, g3) = (&triple[0], &triple[1], &triple[2]);

        ident.record(apply(family, &e, theta).map(|p| p.relative_diff(theta)));
        ident.record(compose(family, g1, &e).map(|g| param_residual(&g, g1)));
        ident.record(compose(family, &e, g1).map(|g| param_residual(&g, g1)));

        assoc.record((|| {
            let left = compose(family, &compose(family, g1, g2)?, g3)?;
            let right = compose(family, g1, &compose(family, g2, g3)?)?;
            Ok(param_residual(&left, &right))
        })());

        inv.record((|| {
            let gi = invert(family, g1)?;
            let r1 = param_residual(&compose(family, g1, &gi)?, &e);
            let r2 = param_residual(&compose(family, &gi, g1)?, &e);
            let back = apply(family, &gi, &apply(family, g1, theta)?)?;
            Ok(r1.max(r2).max(back.relative_diff(theta)))
        })());

        action.record((|| {
            let direct = apply(family, &compose(family, g1, g2)?, theta)?;
            let nested = apply(family, g1, &apply(family, g2, theta)?)?;
            Ok(direct.relative_diff(&nested))
        })());
    }

    let trackers = [&ident, &assoc, &inv, &action];
    let pass = trackers.iter().all(|t| t.worst <= tol);
    AxiomReport {
        family_id: family.id().to_string(),
        n,
        seed,
        tol,
        identity_residual: ident.worst,
        associativity_residual: assoc.worst,
        inverse_residual: inv.worst,
        action_consistency_residual: action.worst,
        failures: trackers.iter().flat_map(|t| t.failures.clone()).collect(),
        pass,
    }
}
