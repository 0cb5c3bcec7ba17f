//! Boundary singularities of equivariant functionals: the fixed-point
//! obstruction, unit sensitivity of patched log ATEs, the non-unique limit
//! test, and the fidelity/invariance/regularity checks on a candidate
//! extension.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::audit::{invariance_audit, AuditError, AuditStatus, Context, Counterfactual, EvalError};
use crate::dist::{DistError, DistHandle};
use crate::quotient::{
    apply, element, identity, sample_group_with, AffineFamily, GroupElement, ParamPoint, QuotientError, Selector,
    TransformFamily,
};

pub const OUTCOME: &str = "y";
pub const DEFAULT_TOL_LIMIT: f64 = 1e-3;
pub const DEFAULT_DIVERGENCE: f64 = 1e12;
const FIXED_TOL: f64 = 1e-12;
const FIDELITY_TOL: f64 = 1e-9;
const LOG_Y_RANGE: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SingularityError {
    #[error("sampled outcome {0} lies outside the domain of m")]
    DomainViolation(f64),
    #[error("rho(g) = 0 for {0:?}; the test is inconclusive")]
    TrivialCocycle(Vec<f64>),
    #[error("the group moves the point {point} to {moved}")]
    NotFixed { point: f64, moved: f64 },
    #[error("sequence {sequence} failed at index {index}: {message}")]
    EvalFailed { sequence: u8, index: usize, message: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Quotient(#[from] QuotientError),
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error(transparent)]
    Dist(#[from] DistError),
}

type PartialMap = dyn Fn(f64) -> Option<f64> + Send + Sync;
type Cocycle = dyn Fn(&GroupElement) -> f64 + Send + Sync;

/// A map `m` on `Y \ {p}` with `m(g·y) = ρ(g) + m(y)` claimed for a group
/// fixing `p`.
#[derive(Clone)]
pub struct EquivariantSystem {
    name: String,
    family: Arc<dyn TransformFamily>,
    m: Arc<PartialMap>,
    rho: Arc<Cocycle>,
    fixed_point: f64,
}

impl fmt::Debug for EquivariantSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EquivariantSystem")
            .field("name", &self.name)
            .field("family", &self.family.id())
            .field("fixed_point", &self.fixed_point)
            .finish_non_exhaustive()
    }
}

/// `y ↦ a·y` on the outcome coordinate.
pub fn scaling_family() -> AffineFamily {
    AffineFamily::builder("scaling", &["a"], "a")
        .coord(Selector::exact(OUTCOME), &[])
        .build()
        .expect("scaling family is well formed")
}

fn log_cocycle(g: &GroupElement) -> f64 {
    g.params[0].ln()
}

impl EquivariantSystem {
    /// Checks on 100 sampled elements that the group fixes `fixed_point`.
    pub fn new<M, R>(
        name: &str,
        family: Arc<dyn TransformFamily>,
        m: M,
        rho: R,
        fixed_point: f64,
    ) -> Result<Self, SingularityError>
    where
        M: Fn(f64) -> Option<f64> + Send + Sync + 'static,
        R: Fn(&GroupElement) -> f64 + Send + Sync + 'static,
    {
        let sys = Self { name: name.to_string(), family, m: Arc::new(m), rho: Arc::new(rho), fixed_point };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for g in sample_group_with(sys.family.as_ref(), &mut rng, 100) {
            let moved = sys.act(&g, fixed_point)?;
            if (moved - fixed_point).abs() > FIXED_TOL * (1.0 + fixed_point.abs()) {
                return Err(SingularityError::NotFixed { point: fixed_point, moved });
            }
        }
        Ok(sys)
    }

    /// `m = log`, `ρ(a) = log a`, `p = 0`.
    pub fn log_scaling() -> Self {
        Self::new("log", Arc::new(scaling_family()), |y| (y > 0.0).then(|| y.ln()), log_cocycle, 0.0)
            .expect("scaling fixes zero")
    }

    /// `log(1 + y)` paired with the cocycle of `log`.
    pub fn log1p_scaling() -> Self {
        Self::new("log1p", Arc::new(scaling_family()), |y| (y > 0.0).then(|| y.ln_1p()), log_cocycle, 0.0)
            .expect("scaling fixes zero")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn family(&self) -> &dyn TransformFamily {
        self.family.as_ref()
    }

    pub fn fixed_point(&self) -> f64 {
        self.fixed_point
    }

    pub fn rho(&self, g: &GroupElement) -> f64 {
        (self.rho)(g)
    }

    pub fn m(&self, y: f64) -> Option<f64> {
        (self.m)(y)
    }

    pub fn act(&self, g: &GroupElement, y: f64) -> Result<f64, QuotientError> {
        let p = ParamPoint::new().with_coord(OUTCOME, y)?;
        apply(self.family.as_ref(), g, &p)?.require_coord(OUTCOME)
    }

    /// `|m(g·y) − ρ(g) − m(y)|`.
    pub fn residual_at(&self, g: &GroupElement, y: f64) -> Result<f64, SingularityError> {
        if y == self.fixed_point {
            return Err(SingularityError::DomainViolation(y));
        }
        let gy = self.act(g, y)?;
        let my = self.m(y).ok_or(SingularityError::DomainViolation(y))?;
        let mgy = self.m(gy).ok_or(SingularityError::DomainViolation(gy))?;
        Ok((mgy - self.rho(g) - my).abs())
    }
}

/// Worst equivariance residual over `n` pairs with `y = exp(U[−5, 5])`.
pub fn equivariance_residual(sys: &EquivariantSystem, n: usize, seed: u64) -> Result<f64, SingularityError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let elements = sample_group_with(sys.family(), &mut rng, n);
    let mut worst = 0.0_f64;
    for g in &elements {
        let y = rng.random_range(-LOG_Y_RANGE..=LOG_Y_RANGE).exp();
        worst = worst.max(sys.residual_at(g, y)?);
    }
    Ok(worst)
}

/// Extending `m` to the fixed point with `candidate_value` forces
/// `m̃(g·p) − m̃(p) = ρ(g)`, but `g·p = p` makes the left side zero. Returns
/// the violation `|ρ(g)|`, whatever the candidate.
pub fn fixed_point_extension_test(
    sys: &EquivariantSystem,
    candidate_value: f64,
    g: &GroupElement,
) -> Result<f64, SingularityError> {
    let rho = sys.rho(g);
    if rho == 0.0 {
        return Err(SingularityError::TrivialCocycle(g.params.clone()));
    }
    let p = sys.fixed_point();
    let gp = sys.act(g, p)?;
    let extended = |y: f64| if y == p { Some(candidate_value) } else { sys.m(y) };
    let lhs = match (extended(gp), extended(p)) {
        (Some(a), Some(b)) => a - b,
        _ => return Err(SingularityError::DomainViolation(gp)),
    };
    Ok((lhs - rho).abs())
}

/// An outcome with an atom at zero and a law on `(0, ∞)` for the rest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeAtomDist {
    pub p_zero: f64,
    pub positive_part: DistHandle,
}

impl OutcomeAtomDist {
    pub fn new(p_zero: f64, positive_part: DistHandle) -> Result<Self, SingularityError> {
        if !(0.0..=1.0).contains(&p_zero) {
            return Err(SingularityError::InvalidInput(format!("atom mass {p_zero} outside [0, 1]")));
        }
        if positive_part.support_lower() < 0.0 {
            return Err(SingularityError::InvalidInput(
                "positive part must be supported on (0, inf)".into(),
            ));
        }
        Ok(Self { p_zero, positive_part })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let y = self.positive_part.sample(rng);
        if u < self.p_zero {
            0.0
        } else {
            y
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AteShift {
    pub ate_at_1: f64,
    pub ate_at_a: f64,
    pub shift: f64,
    pub shift_std_error: f64,
    /// `(P(Y₀ = 0) − P(Y₁ = 0))·log a`.
    pub expected_shift: f64,
    pub scale_a: f64,
    pub n_draws: usize,
    pub seed: u64,
}

impl AteShift {
    /// Distance of the estimate from the closed form, in standard errors.
    /// Zero when both agree exactly, infinite for an exact mismatch.
    pub fn z_score(&self) -> f64 {
        let gap = (self.shift - self.expected_shift).abs();
        if gap == 0.0 {
            0.0
        } else {
            gap / self.shift_std_error
        }
    }
}

/// Monte Carlo ATE of `m̃(Y)` with `m̃ = log` on `(0, ∞)` and
/// `m̃(0) = extension_value_at_zero`, at unit scale 1 and at scale `a`, on
/// common draws.
pub fn ate_scale_sensitivity(
    y0: &OutcomeAtomDist,
    y1: &OutcomeAtomDist,
    extension_value_at_zero: f64,
    scale_a: f64,
    n_draws: usize,
    seed: u64,
) -> Result<AteShift, SingularityError> {
    if n_draws < 10_000 {
        return Err(SingularityError::InvalidInput(format!("need at least 10000 draws, got {n_draws}")));
    }
    if !(scale_a > 0.0 && scale_a.is_finite()) {
        return Err(SingularityError::InvalidInput(format!("scale {scale_a} must be positive")));
    }
    let patched = |y: f64| if y > 0.0 { y.ln() } else { extension_value_at_zero };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum1, mut sum_a, mut sum_s, mut sum_s2) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..n_draws {
        let (v0, v1) = (y0.sample(&mut rng), y1.sample(&mut rng));
        let d1 = patched(v1) - patched(v0);
        let da = patched(scale_a * v1) - patched(scale_a * v0);
        let s = da - d1;
        sum1 += d1;
        sum_a += da;
        sum_s += s;
        sum_s2 += s * s;
    }
    let n = n_draws as f64;
    let shift = sum_s / n;
    let var = ((sum_s2 - n * shift * shift) / (n - 1.0)).max(0.0);
    Ok(AteShift {
        ate_at_1: sum1 / n,
        ate_at_a: sum_a / n,
        shift,
        shift_std_error: (var / n).sqrt(),
        expected_shift: (y0.p_zero - y1.p_zero) * scale_a.ln(),
        scale_a,
        n_draws,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitConfig {
    pub horizon: usize,
    pub tol_limit: f64,
    pub divergence: f64,
}

impl Default for LimitConfig {
    fn default() -> Self {
        Self { horizon: 50, tol_limit: DEFAULT_TOL_LIMIT, divergence: DEFAULT_DIVERGENCE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitVerdict {
    Singular,
    ExtendableCandidate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitReport {
    pub verdict: LimitVerdict,
    pub tail_first: f64,
    pub tail_second: f64,
    pub tail_gap: f64,
    pub diverged: bool,
    /// Mean of the two tails when the verdict is extendable.
    pub common_tail: Option<f64>,
    pub config: LimitConfig,
}

/// Evaluates `qbar` along two sequences aimed at the same boundary class.
/// Singular when the last values differ by more than `tol_limit` or either
/// sequence leaves `[-divergence, divergence]`.
pub fn non_unique_limit_test<P, Q, S1, S2>(
    qbar: Q,
    seq1: S1,
    seq2: S2,
    config: LimitConfig,
) -> Result<LimitReport, SingularityError>
where
    Q: Fn(&P) -> Result<f64, EvalError>,
    S1: Fn(usize) -> P,
    S2: Fn(usize) -> P,
{
    if config.horizon < 10 {
        return Err(SingularityError::InvalidInput(format!("horizon {} below 10", config.horizon)));
    }
    let run = |seq: &dyn Fn(usize) -> P, which: u8| -> Result<(f64, bool), SingularityError> {
        let mut last = 0.0;
        let mut diverged = false;
        for index in 0..config.horizon {
            let v = qbar(&seq(index)).map_err(|e| SingularityError::EvalFailed {
                sequence: which,
                index,
                message: e.to_string(),
            })?;
            if !v.is_finite() || v.abs() > config.divergence {
                diverged = true;
            }
            last = v;
        }
        Ok((last, diverged))
    };
    let (t1, d1) = run(&seq1, 1)?;
    let (t2, d2) = run(&seq2, 2)?;
    let gap = (t1 - t2).abs();
    let diverged = d1 || d2;
    let singular = diverged || !(gap <= config.tol_limit);
    Ok(LimitReport {
        verdict: if singular { LimitVerdict::Singular } else { LimitVerdict::ExtendableCandidate },
        tail_first: t1,
        tail_second: t2,
        tail_gap: gap,
        diverged,
        common_tail: (!singular).then(|| 0.5 * (t1 + t2)),
        config,
    })
}

/// ATE of `log Y` for `Y₁ = 2` against `Y₀` with mass `p_atom` at `delta`
/// and the rest at 1: `log 2 − p_atom·log δ`.
pub fn atom_approx_log_ate(p_atom: f64, delta: f64) -> Result<f64, EvalError> {
    if delta <= 0.0 {
        return Err(EvalError::Undefined(format!("log of {delta}")));
    }
    Ok(2f64.ln() - p_atom * delta.ln())
}

/// A candidate extension of `log` to `[0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Candidate {
    Log1p,
    Arcsinh,
    /// `log` on `(0, ∞)`, the given constant at 0.
    LogWithPatch(f64),
}

impl Candidate {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "log1p" => Some(Candidate::Log1p),
            "arcsinh" => Some(Candidate::Arcsinh),
            "log-with-patch" => Some(Candidate::LogWithPatch(0.0)),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Candidate::Log1p => "log1p",
            Candidate::Arcsinh => "arcsinh",
            Candidate::LogWithPatch(_) => "log-with-patch",
        }
    }

    pub fn eval(self, y: f64) -> f64 {
        match self {
            Candidate::Log1p => y.ln_1p(),
            Candidate::Arcsinh => y.asinh(),
            Candidate::LogWithPatch(c) => {
                if y > 0.0 {
                    y.ln()
                } else {
                    c
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrilemmaCheck {
    pub pass: bool,
    pub value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrilemmaReport {
    pub candidate: String,
    /// Worst `|m̃(y) − log y|` on the regular domain.
    pub fidelity: TrilemmaCheck,
    /// Audit of `m̃(y₁) − m̃(y₀)` at a boundary point with `y₀ = 0`.
    pub invariance: TrilemmaCheck,
    /// Limit test of `m̃(2) − m̃(y₀)` as `y₀ → 0` along two rates, plus
    /// agreement with the assigned boundary value.
    pub regularity: TrilemmaCheck,
    pub equivariance_residual: f64,
    pub failing: Vec<String>,
}

/// Runs the three trilemma checks on a candidate extension of `log`.
pub fn trilemma_checks(candidate: Candidate, n: usize, seed: u64) -> Result<TrilemmaReport, SingularityError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fidelity_gap = 0.0_f64;
    for _ in 0..n.max(1) {
        let y = rng.random_range(-LOG_Y_RANGE..=LOG_Y_RANGE).exp();
        fidelity_gap = fidelity_gap.max((candidate.eval(y) - y.ln()).abs());
    }
    let fidelity = TrilemmaCheck {
        pass: fidelity_gap <= FIDELITY_TOL,
        value: fidelity_gap,
        detail: format!("max |m(y) - log y| over {} draws", n.max(1)),
    };

    let family = AffineFamily::builder("scaling_pair", &["a"], "a")
        .coord(Selector::exact("y0"), &[])
        .coord(Selector::exact("y1"), &[])
        .build()?;
    let q = Counterfactual::new("patched_difference", &[], move |p: &ParamPoint, _: &Context| {
        Ok(candidate.eval(p.require_coord("y1")?) - candidate.eval(p.require_coord("y0")?))
    });
    let boundary = ParamPoint::new().with_coord("y1", 2.0)?.with_coord("y0", 0.0)?;
    let audit = invariance_audit(&q, &family, &boundary, &Context::new(), n.max(1), FIDELITY_TOL, seed)?;
    let invariance = TrilemmaCheck {
        pass: audit.status == AuditStatus::Invariant,
        value: audit.max_rel_deviation,
        detail: "scaling audit of m(y1) - m(y0) at y1 = 2, y0 = 0".into(),
    };

    let limit = non_unique_limit_test(
        |delta: &f64| Ok(candidate.eval(2.0) - candidate.eval(*delta)),
        |k| 2f64.powi(-(k as i32)),
        |k| std::f64::consts::E * 2f64.powi(-(k as i32)),
        LimitConfig::default(),
    )?;
    let at_boundary = candidate.eval(2.0) - candidate.eval(0.0);
    let (reg_pass, reg_value) = match limit.common_tail {
        Some(tail) => {
            let gap = (tail - at_boundary).abs();
            (gap <= DEFAULT_TOL_LIMIT, gap)
        }
        None => (false, limit.tail_gap),
    };
    let regularity = TrilemmaCheck {
        pass: reg_pass,
        value: reg_value,
        detail: format!("limit verdict {:?}; boundary value {at_boundary}", limit.verdict),
    };

    let sys = EquivariantSystem::new(
        candidate.name(),
        Arc::new(scaling_family()),
        move |y| (y > 0.0).then(|| candidate.eval(y)),
        log_cocycle,
        0.0,
    )?;
    let g = element(sys.family(), vec![2.0])?;
    let equivariance_residual = sys.residual_at(&g, 1.0)?;

    let failing = [("fidelity", &fidelity), ("invariance", &invariance), ("regularity", &regularity)]
        .iter()
        .filter(|(_, c)| !c.pass)
        .map(|(n, _)| n.to_string())
        .collect();
    Ok(TrilemmaReport {
        candidate: candidate.name().to_string(),
        fidelity,
        invariance,
        regularity,
        equivariance_residual,
        failing,
    })
}

/// The identity element contributes nothing to any residual.
pub fn identity_residual(sys: &EquivariantSystem, y: f64) -> Result<f64, SingularityError> {
    sys.residual_at(&identity(sys.family()), y)
}
