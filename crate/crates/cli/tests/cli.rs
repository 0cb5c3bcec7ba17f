use std::path::Path;
use std::process::{Command, Output};

use normaudit_cli::manifest::EXPECTED;
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_norm-audit"));
    c.env_remove("NORM_AUDIT_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json_report(args: &[&str]) -> (i32, Value) {
    let out = run(args);
    let code = out.status.code().unwrap();
    let v = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stderr));
    });
    (code, v)
}

fn check<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap_or_else(|| panic!("no check {name}"))
}

#[test]
fn every_catalog_pair_meets_its_expected_verdict() {
    for (model, cf, expected) in EXPECTED {
        let (code, r) = json_report(&["audit", "--model", model, "--counterfactual", cf, "--samples", "300"]);
        assert_eq!(code, 0, "{model}/{cf}");
        assert_eq!(check(&r, &format!("audit/{model}/{cf}"))["observed"], expected.as_str());
    }
}

#[test]
fn marginal_effect_and_pct_welfare_examples() {
    let (code, r) = json_report(&[
        "audit", "--model", "binary", "--counterfactual", "marginal_effect", "--samples", "1000", "--seed", "7", "--tol", "1e-9",
    ]);
    assert_eq!(code, 0);
    let c = check(&r, "audit/binary/marginal_effect");
    assert!(c["details"]["verdicts"].as_array().unwrap().iter().all(|v| v["status"] == "invariant"));
    assert_eq!(r["config"]["seed"], 7);

    let (code, r) = json_report(&["audit", "--model", "binary", "--counterfactual", "pct_welfare", "--seed", "7"]);
    assert_eq!(code, 0);
    let c = check(&r, "audit/binary/pct_welfare");
    assert_eq!(c["observed"], "normalization_dependent");
    let w = &c["details"]["witness"];
    assert!(w["statement"].as_str().unwrap().contains("identified set"));
    assert_ne!(w["value_at_theta"], w["value_at_transformed"]);
}

#[test]
fn reports_are_deterministic_apart_from_the_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let args = ["audit", "--model", "logit", "--samples", "200", "--seed", "3", "--out", out.to_str().unwrap()];
    let body = |p: &Path| -> String {
        std::fs::read_to_string(p).unwrap().lines().filter(|l| !l.contains("\"timestamp\"")).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(run(&args).status.code(), Some(0));
    let first = body(&out);
    assert_eq!(run(&args).status.code(), Some(0));
    assert_eq!(first, body(&out));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);
    let names: Vec<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
}

#[test]
fn seed_falls_back_to_the_environment() {
    let out = bin()
        .args(["singularity", "--demo", "fixed_point"])
        .env("NORM_AUDIT_SEED", "99")
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["seed"], 99);
    let (_, v) = json_report(&["singularity", "--demo", "fixed_point"]);
    assert_eq!(v["config"]["seed"], 42);
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["audit", "--model", "nosuch"][..],
        &["audit", "--model", "binary", "--counterfactual", "nosuch"],
        &["audit", "--model", "binary", "--tol", "0"],
        &["audit", "--model", "binary", "--samples", "0"],
        &["audit", "--spec", "/nonexistent/spec.txt"],
        &["geometry", "--scenario", "sideways"],
        &["geometry", "--scenario", "within_sign", "--M-grid", "10,1"],
        &["singularity", "--demo", "nope"],
        &["singularity", "--demo", "trilemma", "--candidate", "sqrt"],
        &["audit", "--format", "xml", "--model", "binary"],
        &["frobnicate"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn geometry_tables() {
    let out = run(&["geometry", "--scenario", "within_sign", "--M-grid", "1,10,1000,1000000", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "M,chart,great_circle");
    assert!(lines[4].starts_with("1000000,1000000,"));
    assert!(!text.contains('\r'));

    let out = run(&["geometry", "--scenario", "cross_sign", "--format", "csv"]);
    assert!(String::from_utf8(out.stdout).unwrap().lines().skip(1).all(|l| l.contains("disconnected")));

    let (code, r) = json_report(&["geometry", "--scenario", "strong_equiv", "--dim", "5", "--samples", "100000"]);
    assert_eq!(code, 0);
    assert_eq!(check(&r, "geometry/strong_equiv/d5")["value"], 0.0);
}

#[test]
fn singularity_demos() {
    let (code, r) = json_report(&["singularity", "--demo", "fixed_point", "--scale", "2"]);
    assert_eq!(code, 0);
    let v = check(&r, "singularity/fixed_point/inconsistency")["value"].as_f64().unwrap();
    assert!((v - 0.693147).abs() < 1e-6);

    let (code, r) =
        json_report(&["singularity", "--demo", "ate_scale", "--p-zero", "0.5", "--scale", "7.389", "--draws", "100000"]);
    assert_eq!(code, 0);
    let shift = check(&r, "singularity/ate_scale/shift")["value"].as_f64().unwrap();
    assert!((shift - 1.0).abs() < 0.02);

    let (code, r) = json_report(&["singularity", "--demo", "trilemma", "--candidate", "log1p"]);
    assert_eq!(code, 0);
    assert_eq!(check(&r, "singularity/trilemma/log1p/fidelity")["observed"], "fails");
    assert_eq!(check(&r, "singularity/trilemma/log1p/regularity")["observed"], "holds");
    let res = check(&r, "singularity/trilemma/log1p/at_least_one_fails")["value"].as_f64().unwrap();
    assert!((res - 0.288).abs() < 5e-4);

    let (code, r) = json_report(&["singularity", "--demo", "limit_test", "--tol-limit", "1e-3"]);
    assert_eq!(code, 0);
    assert_eq!(check(&r, "singularity/limit_test/verdict")["observed"], "singular");
}

const SPEC: &str = "\
[model]
name = custom_binary

[params]
b1 = 0.2
b2 = 0.3

[dists]
eps = logistic(0, 1)

[transform]
params = a, b
scale = b
b1 = a
b2 = 0
eps = a

[context]
x2 = 1.5

[counterfactuals]
me = \"logistic_pdf((b1 + b2*x2 - eps_loc) / eps_scale) / eps_scale * b2\" expect = free
ratio = \"b1 / b2\" expect = dependent
";

#[test]
fn spec_files_drive_audits_and_pinned_expectations() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.spec");
    std::fs::write(&good, SPEC).unwrap();
    let (code, r) = json_report(&["audit", "--spec", good.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(check(&r, "audit/custom_binary/me")["observed"], "normalization_free");

    let wrong = dir.path().join("wrong.spec");
    std::fs::write(&wrong, SPEC.replace("expect = dependent", "expect = free")).unwrap();
    let (code, r) = json_report(&["audit", "--spec", wrong.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(r["exit_status"], 1);

    let unresolved = dir.path().join("bad.spec");
    std::fs::write(&unresolved, SPEC.replace("b1 / b2", "b1 / gamma")).unwrap();
    let out = run(&["audit", "--spec", unresolved.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma"));

    let empty = dir.path().join("empty.spec");
    let text = SPEC.split("[counterfactuals]").next().unwrap().to_string() + "[counterfactuals]\n";
    std::fs::write(&empty, text).unwrap();
    let (code, r) = json_report(&["audit", "--spec", empty.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(r["checks"].as_array().unwrap().is_empty());
}
