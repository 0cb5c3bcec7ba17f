//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

use std::f64::consts::{E, LN_2};
use std::process::Command;
use std::time::Instant;

use normaudit::audit::{invariance_audit, normalization_check, wlog_equivalence_audit, AuditStatus};
use normaudit::catalog::{self, logsumexp, temperature, Classification, MODEL_IDS};
use normaudit::dist::DistHandle;
use normaudit::dsl::{catalog_expressions, expr_counterfactual, parse_expr, random_expr};
use normaudit::geometry::{convergence_experiment, strong_equivalence_check, ChartDistance, Scenario};
use normaudit::quotient::{apply, check_assumption_preservation, check_group_axioms, ParamPoint};
use normaudit::singularity::{
    ate_scale_sensitivity, equivariance_residual, fixed_point_extension_test, EquivariantSystem, OutcomeAtomDist,
};
use normaudit::quotient::element;
use normaudit_cli::manifest;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn temperature_golden() -> Outcome {
    use temperature::TemperatureUnit::*;
    let pct = |u| temperature::temperature_pct_change(1.0, 11.0, u).map_err(|e| e.to_string());
    let (c, f, k) = (pct(Celsius)?, pct(Fahrenheit)?, pct(Kelvin)?);
    ensure((c - 10.0).abs() <= 1e-12, || format!("C: {c}"))?;
    ensure((f - 18.0 / 33.8).abs() <= 1e-12, || format!("F: {f}"))?;
    ensure((k - 10.0 / 274.15).abs() <= 1e-12, || format!("K: {k}"))?;
    ensure((f * 100.0).round() == 53.0 && (k * 1000.0).round() / 10.0 == 3.6, || "rounding".into())?;
    Ok(format!("1000%, {:.2}%, {:.3}%", f * 100.0, k * 100.0))
}

fn binary_matrix() -> Outcome {
    let start = Instant::now();
    let entry = catalog::lookup("binary").map_err(|e| e.to_string())?;
    let mut witnesses = 0;
    for c in &entry.counterfactuals {
        let q = &c.counterfactual;
        let mut any_non = false;
        for theta in &entry.base_points {
            let v = invariance_audit(q, entry.family.as_ref(), theta, &entry.context, 1000, 1e-9, 42)
                .map_err(|e| e.to_string())?;
            if v.status == AuditStatus::NonInvariant {
                any_non = true;
                let w = v.witness.clone().ok_or("non-invariant verdict without witness")?;
                let moved = apply(entry.family.as_ref(), &w.element, theta).map_err(|e| e.to_string())?;
                let again = q.evaluate(&moved, &entry.context).map_err(|e| e.to_string())?;
                ensure(again == w.value_at_transformed, || format!("{} witness does not reproduce", q.name()))?;
                witnesses += 1;
            }
            if c.expected == Classification::NormalizationFree {
                ensure(v.status == AuditStatus::Invariant, || format!("{} non-invariant", q.name()))?;
            }
        }
        if c.expected == Classification::NormalizationDependent {
            ensure(any_non, || format!("{} never non-invariant", q.name()))?;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 2.0, || format!("took {secs:.2}s"))?;
    Ok(format!("{} counterfactuals x 5 points, {witnesses} witnesses, {secs:.2}s", entry.counterfactuals.len()))
}

fn logit_demand() -> Outcome {
    let entry = catalog::lookup("logit").map_err(|e| e.to_string())?;
    let fam = entry.family.as_ref();
    let mut delta_cs = f64::NAN;
    for c in &entry.counterfactuals {
        for (k, theta) in entry.base_points.iter().enumerate() {
            let v = invariance_audit(&c.counterfactual, fam, theta, &entry.context, 1000, 1e-9, 42)
                .map_err(|e| e.to_string())?;
            match c.expected {
                Classification::NormalizationFree => ensure(v.status == AuditStatus::Invariant, || {
                    format!("{} non-invariant at point {k}", c.counterfactual.name())
                })?,
                Classification::NormalizationDependent if k == 0 => {
                    ensure(v.status == AuditStatus::NonInvariant, || {
                        format!("{} invariant", c.counterfactual.name())
                    })?
                }
                Classification::NormalizationDependent => {}
            }
            if c.counterfactual.name() == "delta_cs" && k == 0 {
                delta_cs = v.base_value;
            }
        }
    }
    ensure((delta_cs - 0.381_120_027_555_953).abs() <= 1e-12, || format!("delta CS {delta_cs}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let xs: Vec<f64> = (0..rng.random_range(1..8)).map(|_| rng.random_range(-20.0..20.0)).collect();
        let naive = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        worst = worst.max((naive - logsumexp(&xs)).abs());
    }
    ensure(worst <= 1e-12, || format!("logsumexp gap {worst}"))?;
    Ok(format!("delta CS = {delta_cs:.6}, logsumexp gap {worst:.1e}"))
}

fn network() -> Outcome {
    let entry = catalog::lookup("network").map_err(|e| e.to_string())?;
    let fam = entry.family.as_ref();
    for (name, want) in [
        ("link_prob", AuditStatus::Invariant),
        ("fe_ranking", AuditStatus::Invariant),
        ("fe_level", AuditStatus::NonInvariant),
        ("w_level", AuditStatus::NonInvariant),
    ] {
        let q = &entry.counterfactual(name).ok_or(format!("no {name}"))?.counterfactual;
        let v = invariance_audit(q, fam, &entry.base_points[0], &entry.context, 1000, 1e-9, 42)
            .map_err(|e| e.to_string())?;
        ensure(v.status == want, || format!("{name}: {:?}", v.status))?;
    }
    let nm = &entry.normalizations[0];
    let mut worst = 0.0_f64;
    for theta in &entry.base_points {
        let rep = nm.section(theta).map_err(|e| e.to_string())?;
        let u = rep.require_dist("U").map_err(|e| e.to_string())?;
        let lo = u.quantile(0.25).map_err(|e| e.to_string())?;
        let hi = u.quantile(0.75).map_err(|e| e.to_string())?;
        let w00 = rep.require_coord("w_0_0").map_err(|e| e.to_string())?;
        worst = worst.max(lo.abs()).max((hi - lo - 1.0).abs()).max(w00.abs());
        let twice = nm.section(&rep).map_err(|e| e.to_string())?;
        ensure(twice.relative_diff(&rep) <= 1e-10, || "idempotence".into())?;
    }
    ensure(worst <= 1e-10, || format!("quantile conditions off by {worst}"))?;
    let r = normalization_check(nm, fam, &entry.base_points, &entry.invariant, 500, 1e-10, 42);
    ensure(r.pass, || format!("collapse {:?}", r.collapse))?;
    let shift_by_first = |p: &ParamPoint| {
        let a1 = p.require_coord("A1")?;
        let mut out = ParamPoint::new();
        for (name, v) in p.coords() {
            out.insert_coord(name.clone(), v - a1)?;
        }
        Ok(out)
    };
    let v = check_assumption_preservation(shift_by_first, "cross-sectional-sampling", 42, 10_000)
        .map_err(|e| e.to_string())?;
    let c23 = v.correlations.iter().find(|c| c.first == "A2" && c.second == "A3").ok_or("no A2/A3 pair")?.corr;
    ensure(v.violated && (0.45..=0.55).contains(&c23), || format!("corr {c23}"))?;
    Ok(format!("quantile residual {worst:.1e}, corr(A2, A3) = {c23:.3}"))
}

fn group_axioms() -> Outcome {
    let mut out = Vec::new();
    for id in ["binary", "network"] {
        let entry = catalog::lookup(id).map_err(|e| e.to_string())?;
        let r = check_group_axioms(entry.family.as_ref(), 42, 500, 1e-10);
        ensure(r.pass, || format!("{id}: {:?}", r.failures))?;
        out.push(format!("{id} ok"));
    }
    Ok(out.join(", "))
}

fn chart_geometry() -> Outcome {
    for dim in [2, 5, 10] {
        let r = strong_equivalence_check(100_000, dim, 42).map_err(|e| e.to_string())?;
        ensure(r.violations == 0, || format!("D={dim}: {} violations", r.violations))?;
    }
    let grid = [1.0, 10.0, 1e3, 1e6];
    let within = convergence_experiment(Scenario::WithinSign, &grid).map_err(|e| e.to_string())?;
    let last = within.rows.last().ok_or("empty table")?;
    ensure(last.chart == ChartDistance::Finite(1e6), || format!("chart {:?}", last.chart))?;
    ensure(last.great_circle <= 5e-7, || format!("rho {}", last.great_circle))?;
    ensure(within.great_circle_strictly_decreasing, || "within_sign not decreasing".into())?;
    let cross = convergence_experiment(Scenario::CrossSign, &grid).map_err(|e| e.to_string())?;
    let at_1e3 = &cross.rows[2];
    ensure(at_1e3.chart == ChartDistance::Disconnected && at_1e3.great_circle <= 2e-3, || {
        format!("cross_sign at 1e3: {:?}", at_1e3)
    })?;
    ensure(cross.great_circle_strictly_decreasing, || "cross_sign not decreasing".into())?;
    Ok(format!("rho(1e6) = {:.3e}, rho_cross(1e3) = {:.3e}", last.great_circle, at_1e3.great_circle))
}

fn singularity_probe() -> Outcome {
    let sys = EquivariantSystem::log_scaling();
    let g2 = element(sys.family(), vec![2.0]).map_err(|e| e.to_string())?;
    for k in 0..11 {
        let c = -5.0 + k as f64;
        let v = fixed_point_extension_test(&sys, c, &g2).map_err(|e| e.to_string())?;
        ensure((v - LN_2).abs() <= 1e-15, || format!("candidate {c}: {v}"))?;
    }
    let positive = DistHandle::uniform(1.0, 2.0).map_err(|e| e.to_string())?;
    let y0 = OutcomeAtomDist::new(0.5, positive.clone()).map_err(|e| e.to_string())?;
    let y1 = OutcomeAtomDist::new(0.0, positive).map_err(|e| e.to_string())?;
    let mut zs = Vec::new();
    for a in [E, E * E] {
        let r = ate_scale_sensitivity(&y0, &y1, 0.0, a, 100_000, 42).map_err(|e| e.to_string())?;
        ensure(r.z_score() <= 3.0, || format!("a = {a}: shift {} vs {}", r.shift, r.expected_shift))?;
        zs.push(r.z_score());
    }
    let log_res = equivariance_residual(&sys, 10_000, 42).map_err(|e| e.to_string())?;
    ensure(log_res <= 1e-12, || format!("log residual {log_res}"))?;
    let l1p = EquivariantSystem::log1p_scaling();
    let r = l1p.residual_at(&g2, 1.0).map_err(|e| e.to_string())?;
    ensure(r >= 0.2, || format!("log1p residual {r}"))?;
    Ok(format!("log 2 on 11 candidates, z = {:.2}/{:.2}, log1p residual {r:.3}", zs[0], zs[1]))
}

fn wlog_equivalence() -> Outcome {
    let mut pairs = 0;
    for id in MODEL_IDS {
        let entry = catalog::lookup(id).map_err(|e| e.to_string())?;
        for c in &entry.counterfactuals {
            for nm in &entry.normalizations {
                for theta in &entry.base_points {
                    let r = wlog_equivalence_audit(
                        &c.counterfactual,
                        entry.family.as_ref(),
                        nm,
                        theta,
                        &entry.context,
                        300,
                        1e-9,
                        42,
                    )
                    .map_err(|e| e.to_string())?;
                    ensure(r.pass, || format!("{id}/{}/{}", c.counterfactual.name(), nm.name()))?;
                }
                pairs += 1;
            }
        }
    }
    Ok(format!("{pairs} pairs"))
}

fn dsl() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..1000 {
        let e = random_expr(&mut rng, 6);
        let printed = e.to_string();
        let back = parse_expr(&printed).map_err(|err| format!("{printed}: {err}"))?;
        ensure(back == e, || format!("fixpoint broken for {printed}"))?;
    }
    let mut compared = 0;
    for id in MODEL_IDS {
        let entry = catalog::lookup(id).map_err(|e| e.to_string())?;
        for ce in catalog_expressions(id) {
            let builtin = &entry.counterfactual(ce.counterfactual).ok_or("unknown counterfactual")?.counterfactual;
            let q = expr_counterfactual(ce.counterfactual, ce.source).map_err(|e| e.to_string())?;
            for theta in entry.base_points.iter().filter(|t| ce.applies_to(t)) {
                let a = builtin.evaluate(theta, &entry.context).map_err(|e| e.to_string())?;
                let b = q.evaluate(theta, &entry.context).map_err(|e| e.to_string())?;
                ensure((a - b).abs() <= 1e-12, || format!("{id}/{}: {a} vs {b}", ce.counterfactual))?;
                compared += 1;
            }
        }
    }
    for src in ["1 +", "(a", "a $ b", "f(x)", "exp(1, 2)", "2 3", "1e"] {
        match parse_expr(src) {
            Err(e) => {
                let off = e.offset().ok_or(format!("{src}: no offset"))?;
                ensure(off < src.len(), || format!("{src}: offset {off}"))?;
            }
            Ok(_) if src == "1e" => {}
            Ok(_) => return Err(format!("`{src}` parsed")),
        }
    }
    Ok(format!("1000 round trips, {compared} builtin comparisons"))
}

fn cli_run(args: &[&str]) -> Result<(i32, String), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_norm-audit"))
        .args(args)
        .env_remove("NORM_AUDIT_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    Ok((out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned()))
}

fn without_timestamp(s: &str) -> String {
    s.lines().filter(|l| !l.contains("\"timestamp\"")).collect::<Vec<_>>().join("\n")
}

fn cli_determinism() -> Outcome {
    let mut pairs = 0;
    for id in MODEL_IDS {
        let args = ["audit", "--model", id, "--samples", "300", "--seed", "11"];
        let (c1, first) = cli_run(&args)?;
        let (c2, second) = cli_run(&args)?;
        ensure(c1 == 0 && c2 == 0, || format!("{id}: exit {c1}/{c2}"))?;
        ensure(without_timestamp(&first) == without_timestamp(&second), || format!("{id}: bodies differ"))?;
        let v: Value = serde_json::from_str(&first).map_err(|e| e.to_string())?;
        for (model, cf, expected) in manifest::EXPECTED.iter().filter(|(m, _, _)| *m == id) {
            let name = format!("audit/{model}/{cf}");
            let check = v["checks"].as_array().and_then(|cs| cs.iter().find(|c| c["name"] == name.as_str()));
            let observed = check.map(|c| c["observed"].clone()).unwrap_or(Value::Null);
            ensure(observed == expected.as_str(), || format!("{name}: {observed}"))?;
            pairs += 1;
        }
    }
    Ok(format!("{pairs} pinned pairs, identical bodies"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("temperature golden numbers", temperature_golden),
        ("binary choice audit matrix", binary_matrix),
        ("logit demand", logit_demand),
        ("network", network),
        ("group axioms", group_axioms),
        ("chart geometry", chart_geometry),
        ("singularity probe", singularity_probe),
        ("WLOG audit equivalence", wlog_equivalence),
        ("DSL", dsl),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(msg) => println!("PASS {:>2}. {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2}. {name}: {msg}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
