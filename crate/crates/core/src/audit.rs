//! Orbit-constancy audits for counterfactuals, normalization validation, and
//! identification-failure witnesses.
//!
//! A counterfactual is normalization-free exactly when it is constant on every
//! orbit of the transformation family. The audit samples group elements,
//! evaluates the counterfactual along the orbit of one base point, and reports
//! the worst relative deviation `|q(gθ) - q(θ)| / (1 + |q(θ)|)`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::quotient::{apply, sample_group, GroupElement, ParamPoint, QuotientError, TransformFamily};

/// Deviations in `(tol, GRAY_BAND * tol]` are reported as non-invariant with
/// a low-confidence flag.
pub const GRAY_BAND: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("missing context value `{0}`")]
    MissingContext(String),
    #[error("context value `{name}` has the wrong shape: {detail}")]
    ContextShape { name: String, detail: String },
    #[error("undefined at this point: {0}")]
    Undefined(String),
    #[error(transparent)]
    Quotient(#[from] QuotientError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ContextValue {
    Scalar(f64),
    List(Vec<f64>),
}

/// Evaluation inputs that are not unknowns: covariate values, policy changes.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Context {
    values: BTreeMap<String, ContextValue>,
}

impl Context {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_scalar(mut self, name: &str, value: f64) -> Self {
        self.values.insert(name.to_string(), ContextValue::Scalar(value));
        self
    }

    pub fn with_list(mut self, name: &str, values: Vec<f64>) -> Self {
        self.values.insert(name.to_string(), ContextValue::List(values));
        self
    }

    pub fn contains(&self, name: &str) -> bool {
        self.values.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Option<&ContextValue> {
        self.values.get(name)
    }

    pub fn scalar(&self, name: &str) -> Result<f64, EvalError> {
        match self.values.get(name) {
            Some(ContextValue::Scalar(v)) => Ok(*v),
            Some(ContextValue::List(_)) => Err(EvalError::ContextShape {
                name: name.to_string(),
                detail: "expected a scalar".into(),
            }),
            None => Err(EvalError::MissingContext(name.to_string())),
        }
    }

    pub fn list(&self, name: &str) -> Result<&[f64], EvalError> {
        match self.values.get(name) {
            Some(ContextValue::List(v)) => Ok(v),
            Some(ContextValue::Scalar(_)) => Err(EvalError::ContextShape {
                name: name.to_string(),
                detail: "expected a list".into(),
            }),
            None => Err(EvalError::MissingContext(name.to_string())),
        }
    }

    /// Scalars under their own name; list entries as `name1`, `name2`, ...
    pub fn flattened(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for (name, v) in &self.values {
            match v {
                ContextValue::Scalar(x) => {
                    out.insert(name.clone(), *x);
                }
                ContextValue::List(xs) => {
                    for (i, x) in xs.iter().enumerate() {
                        out.insert(format!("{name}{}", i + 1), *x);
                    }
                }
            }
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.values.values().all(|v| match v {
            ContextValue::Scalar(x) => x.is_finite(),
            ContextValue::List(xs) => xs.iter().all(|x| x.is_finite()),
        })
    }
}

type EvalFn = dyn Fn(&ParamPoint, &Context) -> Result<f64, EvalError> + Send + Sync;
type SectionFn = dyn Fn(&ParamPoint) -> Result<ParamPoint, QuotientError> + Send + Sync;
type InvariantFn = dyn Fn(&ParamPoint) -> Result<Vec<f64>, QuotientError> + Send + Sync;

/// A known real-valued functional of the unknowns.
#[derive(Clone)]
pub struct Counterfactual {
    name: String,
    context_schema: Vec<String>,
    eval: Arc<EvalFn>,
}

impl fmt::Debug for Counterfactual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Counterfactual")
            .field("name", &self.name)
            .field("context_schema", &self.context_schema)
            .finish_non_exhaustive()
    }
}

impl Counterfactual {
    pub fn new<F>(name: &str, context_schema: &[&str], eval: F) -> Self
    where
        F: Fn(&ParamPoint, &Context) -> Result<f64, EvalError> + Send + Sync + 'static,
    {
        Self {
            name: name.to_string(),
            context_schema: context_schema.iter().map(|s| s.to_string()).collect(),
            eval: Arc::new(eval),
        }
    }

    pub fn with_schema<F>(name: &str, context_schema: Vec<String>, eval: F) -> Self
    where
        F: Fn(&ParamPoint, &Context) -> Result<f64, EvalError> + Send + Sync + 'static,
    {
        Self { name: name.to_string(), context_schema, eval: Arc::new(eval) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn context_schema(&self) -> &[String] {
        &self.context_schema
    }

    pub fn check_context(&self, ctx: &Context) -> Result<(), EvalError> {
        match self.context_schema.iter().find(|n| !ctx.contains(n)) {
            Some(missing) => Err(EvalError::MissingContext(missing.clone())),
            None => Ok(()),
        }
    }

    pub fn evaluate(&self, theta: &ParamPoint, ctx: &Context) -> Result<f64, EvalError> {
        (self.eval)(theta, ctx)
    }
}

/// A section of the orbit projection: one representative per class.
#[derive(Clone)]
pub struct Normalization {
    name: String,
    family_id: String,
    section: Arc<SectionFn>,
}

impl fmt::Debug for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Normalization")
            .field("name", &self.name)
            .field("family_id", &self.family_id)
            .finish_non_exhaustive()
    }
}

impl Normalization {
    pub fn new<F>(name: &str, family_id: &str, section: F) -> Self
    where
        F: Fn(&ParamPoint) -> Result<ParamPoint, QuotientError> + Send + Sync + 'static,
    {
        Self { name: name.to_string(), family_id: family_id.to_string(), section: Arc::new(section) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn family_id(&self) -> &str {
        &self.family_id
    }

    pub fn section(&self, theta: &ParamPoint) -> Result<ParamPoint, QuotientError> {
        (self.section)(theta)
    }
}

/// A complete invariant of the orbits: equal exactly on equivalent points.
#[derive(Clone)]
pub struct OrbitInvariant(Arc<InvariantFn>);

impl OrbitInvariant {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&ParamPoint) -> Result<Vec<f64>, QuotientError> + Send + Sync + 'static,
    {
        Self(Arc::new(f))
    }

    pub fn eval(&self, theta: &ParamPoint) -> Result<Vec<f64>, QuotientError> {
        (self.0)(theta)
    }
}

impl fmt::Debug for OrbitInvariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("OrbitInvariant(..)")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AuditError {
    #[error("counterfactual `{counterfactual}` needs context value `{missing}`")]
    Schema { counterfactual: String, missing: String },
    #[error("counterfactual `{counterfactual}` failed at element {element:?}: {source}")]
    EvalFailed {
        counterfactual: String,
        element: Option<GroupElement>,
        source: EvalError,
    },
    #[error("invalid audit input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Quotient(#[from] QuotientError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditStatus {
    Invariant,
    NonInvariant,
}

impl AuditStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            AuditStatus::Invariant => "invariant",
            AuditStatus::NonInvariant => "non_invariant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub element: GroupElement,
    pub value_at_theta: f64,
    pub value_at_transformed: f64,
    pub rel_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditVerdict {
    pub counterfactual: String,
    pub family_id: String,
    pub status: AuditStatus,
    pub base_value: f64,
    pub max_rel_deviation: f64,
    /// Set when the worst deviation lies in `(tol, 100·tol]`.
    pub low_confidence: bool,
    pub witness: Option<Witness>,
    pub n_sampled: usize,
    pub tol: f64,
    pub seed: u64,
}

pub fn relative_deviation(base: f64, other: f64) -> f64 {
    (other - base).abs() / (1.0 + base.abs())
}

fn eval_checked(
    q: &Counterfactual,
    theta: &ParamPoint,
    ctx: &Context,
    element: Option<&GroupElement>,
) -> Result<f64, AuditError> {
    let fail = |source| AuditError::EvalFailed {
        counterfactual: q.name().to_string(),
        element: element.cloned(),
        source,
    };
    let v = q.evaluate(theta, ctx).map_err(fail)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(fail(EvalError::Undefined(format!("non-finite value {v}"))))
    }
}

/// Evaluates `q` at `theta` and at `g·theta` for `n` sampled `g`.
///
/// Evaluations run in parallel; the reduction walks results in sample order
/// and keeps the first maximal deviation, so the verdict depends only on
/// the inputs and the seed.
pub fn invariance_audit(
    q: &Counterfactual,
    family: &dyn TransformFamily,
    theta: &ParamPoint,
    ctx: &Context,
    n: usize,
    tol: f64,
    seed: u64,
) -> Result<AuditVerdict, AuditError> {
    if n == 0 {
        return Err(AuditError::InvalidInput("n must be at least 1".into()));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(AuditError::InvalidInput(format!("tol must be positive, got {tol}")));
    }
    if let Err(EvalError::MissingContext(missing)) = q.check_context(ctx) {
        return Err(AuditError::Schema { counterfactual: q.name().to_string(), missing });
    }

    let base = eval_checked(q, theta, ctx, None)?;
    let elements = sample_group(family, seed, n);
    let results: Vec<Result<f64, AuditError>> = elements
        .par_iter()
        .map(|g| {
            let moved = apply(family, g, theta)?;
            eval_checked(q, &moved, ctx, Some(g))
        })
        .collect();

    let mut worst: Option<(usize, f64, f64)> = None;
    for (i, r) in results.into_iter().enumerate() {
        let v = r?;
        let dev = relative_deviation(base, v);
        if worst.is_none_or(|(_, d, _)| dev > d) {
            worst = Some((i, dev, v));
        }
    }
    let (idx, max_dev, v_worst) = worst.expect("n >= 1");

    let status = if max_dev <= tol { AuditStatus::Invariant } else { AuditStatus::NonInvariant };
    let witness = (status == AuditStatus::NonInvariant).then(|| Witness {
        element: elements[idx].clone(),
        value_at_theta: base,
        value_at_transformed: v_worst,
        rel_deviation: max_dev,
    });
    Ok(AuditVerdict {
        counterfactual: q.name().to_string(),
        family_id: family.id().to_string(),
        status,
        base_value: base,
        max_rel_deviation: max_dev,
        low_confidence: status == AuditStatus::NonInvariant && max_dev <= GRAY_BAND * tol,
        witness,
        n_sampled: n,
        tol,
        seed,
    })
}

/// Two modeling-equivalent points on which `q` disagrees.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessPair {
    pub theta: ParamPoint,
    pub transformed: ParamPoint,
    pub element: GroupElement,
    pub value_at_theta: f64,
    pub value_at_transformed: f64,
    pub statement: String,
}

/// Returns the constructive pair behind a non-invariant verdict, or `None`
/// when the audit finds `q` invariant at `tol`.
pub fn identification_witness(
    q: &Counterfactual,
    family: &dyn TransformFamily,
    theta: &ParamPoint,
    ctx: &Context,
    n: usize,
    tol: f64,
    seed: u64,
) -> Result<Option<WitnessPair>, AuditError> {
    let verdict = invariance_audit(q, family, theta, ctx, n, tol, seed)?;
    let Some(w) = verdict.witness else {
        return Ok(None);
    };
    let transformed = apply(family, &w.element, theta)?;
    Ok(Some(WitnessPair {
        statement: format!(
            "`{}` takes {} and {} on two modeling-equivalent points; \
             any valid identified set must contain both",
            q.name(),
            w.value_at_theta,
            w.value_at_transformed
        ),
        theta: theta.clone(),
        transformed,
        element: w.element,
        value_at_theta: w.value_at_theta,
        value_at_transformed: w.value_at_transformed,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubCheck {
    pub pass: bool,
    /// Worst residual for collapse/idempotence; smallest section gap for separation.
    pub worst: f64,
    pub tested: usize,
    pub notes: Vec<String>,
}

impl SubCheck {
    fn new() -> Self {
        Self { pass: true, worst: 0.0, tested: 0, notes: Vec::new() }
    }

    fn fail(&mut self, note: String) {
        self.pass = false;
        if self.notes.len() < 5 {
            self.notes.push(note);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormCheckReport {
    pub normalization: String,
    pub family_id: String,
    pub collapse: SubCheck,
    pub idempotence: SubCheck,
    pub separation: SubCheck,
    pub n_sampled: usize,
    pub tol: f64,
    pub seed: u64,
    pub pass: bool,
}

fn invariant_gap(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / (1.0 + x.abs().max(y.abs())))
        .fold(0.0, f64::max)
}

/// Checks within-class collapse, idempotence, and across-class separation of
/// a normalization on caller-supplied points. Separation is only tested on
/// pairs whose orbit invariants differ by more than `tol`.
pub fn normalization_check(
    nm: &Normalization,
    family: &dyn TransformFamily,
    thetas: &[ParamPoint],
    invariant: &OrbitInvariant,
    n: usize,
    tol: f64,
    seed: u64,
) -> NormCheckReport {
    let elements = sample_group(family, seed, n);
    let mut collapse = SubCheck::new();
    let mut idempotence = SubCheck::new();
    let mut separation = SubCheck::new();
    separation.worst = f64::INFINITY;

    if thetas.is_empty() {
        collapse.fail("no points supplied".into());
    }
    if nm.family_id() != family.id() {
        collapse.fail(format!(
            "normalization targets family `{}`, audit family is `{}`",
            nm.family_id(),
            family.id()
        ));
    }

    let mut sections: Vec<Option<(ParamPoint, Vec<f64>)>> = Vec::with_capacity(thetas.len());
    for (t, theta) in thetas.iter().enumerate() {
        let (rep, inv) = match (nm.section(theta), invariant.eval(theta)) {
            (Ok(rep), Ok(inv)) => (rep, inv),
            (Err(e), _) | (_, Err(e)) => {
                collapse.fail(format!("point {t}: {e}"));
                sections.push(None);
                continue;
            }
        };
        // the representative must lie in the orbit of theta
        match invariant.eval(&rep) {
            Ok(rep_inv) => {
                let gap = invariant_gap(&inv, &rep_inv);
                collapse.worst = collapse.worst.max(gap);
                if gap > tol {
                    collapse.fail(format!("point {t}: representative leaves the orbit (gap {gap:e})"));
                }
            }
            Err(e) => collapse.fail(format!("point {t}: {e}")),
        }
        for g in &elements {
            collapse.tested += 1;
            let r = apply(family, g, theta).and_then(|moved| nm.section(&moved));
            match r {
                Ok(moved_rep) => {
                    let d = moved_rep.relative_diff(&rep);
                    collapse.worst = collapse.worst.max(d);
                    if d > tol {
                        collapse.fail(format!("point {t}: element {:?} gives residual {d:e}", g.params));
                    }
                }
                Err(e) => collapse.fail(format!("point {t}: {e}")),
            }
        }
        idempotence.tested += 1;
        match nm.section(&rep) {
            Ok(twice) => {
                let d = twice.relative_diff(&rep);
                idempotence.worst = idempotence.worst.max(d);
                if d > tol {
                    idempotence.fail(format!("point {t}: residual {d:e}"));
                }
            }
            Err(e) => idempotence.fail(format!("point {t}: {e}")),
        }
        sections.push(Some((rep, inv)));
    }

    for i in 0..sections.len() {
        for j in (i + 1)..sections.len() {
            let (Some((ri, ii)), Some((rj, ij))) = (&sections[i], &sections[j]) else {
                continue;
            };
            if invariant_gap(ii, ij) <= tol {
                continue;
            }
            separation.tested += 1;
            let d = ri.relative_diff(rj);
            separation.worst = separation.worst.min(d);
            if d <= tol {
                separation.fail(format!("points {i} and {j} lie in different orbits but share a representative"));
            }
        }
    }

    let pass = collapse.pass && idempotence.pass && separation.pass;
    NormCheckReport {
        normalization: nm.name().to_string(),
        family_id: family.id().to_string(),
        collapse,
        idempotence,
        separation,
        n_sampled: n,
        tol,
        seed,
        pass,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WlogReport {
    pub counterfactual: String,
    pub normalization: String,
    pub original: AuditVerdict,
    pub normalized: AuditVerdict,
    pub status_agree: bool,
    /// `None` unless both audits are invariant.
    pub value_gap: Option<f64>,
    pub pass: bool,
}

/// Audits `q` from `theta` and from its normalized representative with the
/// same seed; passes when the verdicts agree and, for invariant verdicts,
/// the two invariant values agree within `tol`.
#[allow(clippy::too_many_arguments)]
pub fn wlog_equivalence_audit(
    q: &Counterfactual,
    family: &dyn TransformFamily,
    nm: &Normalization,
    theta: &ParamPoint,
    ctx: &Context,
    n: usize,
    tol: f64,
    seed: u64,
) -> Result<WlogReport, AuditError> {
    let original = invariance_audit(q, family, theta, ctx, n, tol, seed)?;
    let rep = nm.section(theta)?;
    let normalized = invariance_audit(q, family, &rep, ctx, n, tol, seed)?;
    let status_agree = original.status == normalized.status;
    let value_gap = (original.status == AuditStatus::Invariant
        && normalized.status == AuditStatus::Invariant)
        .then(|| relative_deviation(original.base_value, normalized.base_value));
    let pass = status_agree && value_gap.is_none_or(|g| g <= tol);
    Ok(WlogReport {
        counterfactual: q.name().to_string(),
        normalization: nm.name().to_string(),
        original,
        normalized,
        status_agree,
        value_gap,
        pass,
    })
}
