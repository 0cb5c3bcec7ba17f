use std::f64::consts::E;

use normaudit::dist::DistHandle;
use normaudit::quotient::element;
use normaudit::singularity::{
    ate_scale_sensitivity, atom_approx_log_ate, fixed_point_extension_test, non_unique_limit_test, trilemma_checks,
    Candidate, EquivariantSystem, LimitConfig, LimitVerdict, OutcomeAtomDist,
};
use serde::Serialize;

use super::{require_positive, require_samples, run_err};
use crate::args::{RunConfig, SingularityArgs};
use crate::report::{Check, ReportEnvelope};
use crate::CliError;

const CANDIDATE_GRID: [f64; 11] = [-5.0, -4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0];

#[derive(Serialize)]
struct FixedPointRow {
    candidate_value: f64,
    inconsistency: f64,
}

fn fixed_point(scale: f64) -> Result<Vec<Check>, CliError> {
    let sys = EquivariantSystem::log_scaling();
    let g = element(sys.family(), vec![scale]).map_err(run_err)?;
    let rows = CANDIDATE_GRID
        .iter()
        .map(|&c| {
            fixed_point_extension_test(&sys, c, &g).map(|inconsistency| FixedPointRow { candidate_value: c, inconsistency })
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(run_err)?;
    let first = rows[0].inconsistency;
    let constant = rows.iter().all(|r| r.inconsistency == first);
    let pass = constant && (first - scale.ln().abs()).abs() <= 1e-12;
    Ok(vec![Check::new("singularity/fixed_point/inconsistency", pass, format!("{first}"))
        .expected(format!("{} for every candidate", scale.ln().abs()))
        .value(first)
        .details(&rows)?])
}

fn ate_scale(p_zero: f64, scale: f64, draws: usize, seed: u64) -> Result<Vec<Check>, CliError> {
    let positive = DistHandle::uniform(1.0, 2.0).map_err(run_err)?;
    let y0 = OutcomeAtomDist::new(p_zero, positive.clone()).map_err(run_err)?;
    let y1 = OutcomeAtomDist::new(0.0, positive).map_err(run_err)?;
    let r = ate_scale_sensitivity(&y0, &y1, 0.0, scale, draws, seed).map_err(run_err)?;
    let z = r.z_score();
    Ok(vec![Check::new("singularity/ate_scale/shift", z <= 3.0, format!("{} (z = {z})", r.shift))
        .expected(format!("{} within 3 standard errors", r.expected_shift))
        .value(r.shift)
        .details(&r)?])
}

fn limit_test(p_zero: f64, config: LimitConfig) -> Result<Vec<Check>, CliError> {
    let r = non_unique_limit_test(
        |delta: &f64| atom_approx_log_ate(p_zero, *delta),
        |k| 2f64.powi(-(k as i32)),
        |k| E * 2f64.powi(-(k as i32)),
        config,
    )
    .map_err(run_err)?;
    let observed = match r.verdict {
        LimitVerdict::Singular => "singular",
        LimitVerdict::ExtendableCandidate => "extendable_candidate",
    };
    let expected = if p_zero > 0.0 { "singular" } else { "extendable_candidate" };
    Ok(vec![Check::new("singularity/limit_test/verdict", observed == expected, observed)
        .expected(expected)
        .value(r.tail_gap)
        .details(&r)?])
}

fn trilemma(candidate: &str, samples: usize, seed: u64) -> Result<Vec<Check>, CliError> {
    let cand = Candidate::parse(candidate).ok_or_else(|| {
        CliError::Usage(format!("unknown candidate `{candidate}`; expected log1p, arcsinh or log-with-patch"))
    })?;
    let r = trilemma_checks(cand, samples, seed).map_err(run_err)?;
    let mut checks = Vec::new();
    for (name, c) in [("fidelity", &r.fidelity), ("invariance", &r.invariance), ("regularity", &r.regularity)] {
        checks.push(
            Check::new(format!("singularity/trilemma/{}/{name}", r.candidate), true, if c.pass { "holds" } else { "fails" })
                .value(c.value)
                .details(c)?,
        );
    }
    let some_fail = !r.failing.is_empty();
    checks.push(
        Check::new(format!("singularity/trilemma/{}/at_least_one_fails", r.candidate), some_fail, r.failing.join(","))
            .expected("at least one of fidelity, invariance, regularity fails")
            .value(r.equivariance_residual)
            .details(&r)?,
    );
    Ok(checks)
}

pub fn run(s: &SingularityArgs) -> Result<ReportEnvelope, CliError> {
    require_samples(s.samples)?;
    let mut cfg = RunConfig::from_common("singularity", &s.common, s.samples);
    cfg.demo = Some(s.demo.clone());
    let seed = s.common.seed;
    let checks = match s.demo.as_str() {
        "fixed_point" => {
            let scale = s.scale.unwrap_or(2.0);
            require_positive("scale", scale)?;
            cfg.scale = Some(scale);
            fixed_point(scale)?
        }
        "ate_scale" => {
            let scale = s.scale.unwrap_or(E * E);
            require_positive("scale", scale)?;
            cfg.scale = Some(scale);
            cfg.p_zero = Some(s.p_zero);
            cfg.draws = Some(s.draws);
            ate_scale(s.p_zero, scale, s.draws, seed)?
        }
        "limit_test" => {
            require_positive("tol-limit", s.tol_limit)?;
            require_positive("divergence", s.divergence)?;
            cfg.p_zero = Some(s.p_zero);
            cfg.tol_limit = Some(s.tol_limit);
            cfg.divergence = Some(s.divergence);
            cfg.horizon = Some(s.horizon);
            if !(0.0..=1.0).contains(&s.p_zero) {
                return Err(CliError::Usage(format!("--p-zero must lie in [0, 1], got {}", s.p_zero)));
            }
            limit_test(s.p_zero, LimitConfig { horizon: s.horizon, tol_limit: s.tol_limit, divergence: s.divergence })?
        }
        "trilemma" => {
            cfg.candidate = Some(s.candidate.clone());
            trilemma(&s.candidate, s.samples, seed)?
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown demo `{other}`; expected fixed_point, ate_scale, limit_test or trilemma"
            )))
        }
    };
    Ok(ReportEnvelope::new(cfg, checks, None))
}
