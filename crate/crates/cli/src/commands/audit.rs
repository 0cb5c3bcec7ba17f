use normaudit::audit::{
    identification_witness, invariance_audit, normalization_check, wlog_equivalence_audit, AuditStatus, AuditVerdict,
    Context, Counterfactual, WitnessPair, WlogReport,
};
use normaudit::catalog::{self, CatalogEntry, Classification};
use normaudit::dsl::load_model_spec;
use normaudit::quotient::{ParamPoint, TransformFamily};
use serde::Serialize;

use super::{require_positive, require_samples, run_err};
use crate::args::{AuditArgs, RunConfig};
use crate::manifest;
use crate::report::{Check, ReportEnvelope};
use crate::CliError;

#[derive(Serialize)]
struct AuditDetails {
    verdicts: Vec<AuditVerdict>,
    witness: Option<WitnessPair>,
}

#[derive(Serialize)]
struct WlogDetails {
    reports: Vec<WlogReport>,
}

struct Settings {
    samples: usize,
    tol: f64,
    seed: u64,
}

/// Audits `q` at every point. Invariant everywhere reads as
/// normalization-free; the witness comes from the first non-invariant point.
fn classify_counterfactual(
    q: &Counterfactual,
    family: &dyn TransformFamily,
    points: &[ParamPoint],
    ctx: &Context,
    s: &Settings,
) -> Result<(Classification, AuditDetails), CliError> {
    let verdicts = points
        .iter()
        .map(|t| invariance_audit(q, family, t, ctx, s.samples, s.tol, s.seed))
        .collect::<Result<Vec<_>, _>>()
        .map_err(run_err)?;
    let first_bad = verdicts.iter().position(|v| v.status == AuditStatus::NonInvariant);
    let witness = match first_bad {
        Some(k) => identification_witness(q, family, &points[k], ctx, s.samples, s.tol, s.seed).map_err(run_err)?,
        None => None,
    };
    let class = if first_bad.is_some() {
        Classification::NormalizationDependent
    } else {
        Classification::NormalizationFree
    };
    Ok((class, AuditDetails { verdicts, witness }))
}

fn verdict_check(
    name: String,
    observed: Classification,
    expected: Option<Classification>,
    details: &AuditDetails,
) -> Result<Check, CliError> {
    let mut c = Check::new(name, expected.is_none_or(|e| e == observed), observed.as_str());
    if let Some(e) = expected {
        c = c.expected(e.as_str());
    }
    if let Some(v) = details.verdicts.first() {
        c = c.value(v.base_value);
    }
    c.details(details)
}

fn catalog_checks(entry: &CatalogEntry, selector: &str, s: &Settings) -> Result<Vec<Check>, CliError> {
    let selected: Vec<_> = if selector == "all" {
        entry.counterfactuals.iter().collect()
    } else {
        let c = entry.counterfactual(selector).ok_or_else(|| {
            let names: Vec<&str> = entry.counterfactuals.iter().map(|c| c.counterfactual.name()).collect();
            CliError::Usage(format!(
                "model `{}` has no counterfactual `{selector}`; available: {}",
                entry.id,
                names.join(", ")
            ))
        })?;
        vec![c]
    };
    let family = entry.family.as_ref();
    let mut checks = Vec::new();
    for c in &selected {
        let q = &c.counterfactual;
        let (observed, details) = classify_counterfactual(q, family, &entry.base_points, &entry.context, s)?;
        let expected = manifest::expected(entry.id, q.name());
        checks.push(verdict_check(format!("audit/{}/{}", entry.id, q.name()), observed, expected, &details)?);
    }
    for nm in &entry.normalizations {
        let r = normalization_check(nm, family, &entry.base_points, &entry.invariant, s.samples, s.tol, s.seed);
        checks.push(
            Check::new(format!("normalization/{}/{}", entry.id, nm.name()), r.pass, if r.pass { "pass" } else { "fail" })
                .expected("pass")
                .details(&r)?,
        );
        for c in &selected {
            let q = &c.counterfactual;
            let reports = entry
                .base_points
                .iter()
                .map(|t| wlog_equivalence_audit(q, family, nm, t, &entry.context, s.samples, s.tol, s.seed))
                .collect::<Result<Vec<_>, _>>()
                .map_err(run_err)?;
            let pass = reports.iter().all(|r| r.pass);
            let gap = reports.iter().filter_map(|r| r.value_gap).fold(0.0, f64::max);
            checks.push(
                Check::new(format!("wlog/{}/{}/{}", entry.id, q.name(), nm.name()), pass, if pass { "pass" } else { "fail" })
                    .expected("pass")
                    .value(gap)
                    .details(&WlogDetails { reports })?,
            );
        }
    }
    Ok(checks)
}

pub fn run(a: &AuditArgs) -> Result<ReportEnvelope, CliError> {
    require_samples(a.samples)?;
    require_positive("tol", a.tol)?;
    let s = Settings { samples: a.samples, tol: a.tol, seed: a.common.seed };
    let mut cfg = RunConfig::from_common("audit", &a.common, a.samples);
    cfg.tol = Some(a.tol);
    cfg.counterfactual = Some(a.counterfactual.clone());
    let checks = match (&a.model, &a.spec) {
        (Some(model), _) => {
            cfg.model = Some(model.clone());
            let entry = catalog::lookup(model).map_err(|e| CliError::Load(e.to_string()))?;
            catalog_checks(&entry, &a.counterfactual, &s)?
        }
        (None, Some(path)) => {
            cfg.spec = Some(path.display().to_string());
            let spec = load_model_spec(path).map_err(|e| CliError::Load(e.to_string()))?;
            let selected: Vec<_> = spec
                .counterfactuals
                .iter()
                .filter(|c| a.counterfactual == "all" || c.name == a.counterfactual)
                .collect();
            if selected.is_empty() && a.counterfactual != "all" {
                return Err(CliError::Usage(format!("spec `{}` has no counterfactual `{}`", spec.name, a.counterfactual)));
            }
            let mut checks = Vec::new();
            for c in selected {
                let q = spec.counterfactual(&c.name).expect("selected from the spec");
                let points = std::slice::from_ref(&spec.base);
                let (observed, details) = classify_counterfactual(&q, spec.family.as_ref(), points, &spec.context, &s)?;
                checks.push(verdict_check(format!("audit/{}/{}", spec.name, c.name), observed, c.expect, &details)?);
            }
            checks
        }
        (None, None) => return Err(CliError::Usage("one of --model or --spec is required".into())),
    };
    Ok(ReportEnvelope::new(cfg, checks, None))
}
