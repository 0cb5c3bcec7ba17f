use normaudit::audit::{invariance_audit, AuditStatus, Context};
use normaudit::catalog::{self, binary, MODEL_IDS};
use normaudit::dsl::{catalog_expressions, expr_counterfactual, parse_model_spec, DslError, SpecError};

#[test]
fn reexpressions_match_the_catalog() {
    for id in MODEL_IDS {
        let entry = catalog::lookup(id).unwrap();
        for c in &entry.counterfactuals {
            let name = c.counterfactual.name();
            let mut checked = 0;
            for e in catalog_expressions(id).filter(|e| e.counterfactual == name) {
                let q = expr_counterfactual(name, e.source).unwrap();
                for theta in entry.base_points.iter().filter(|t| e.applies_to(t)) {
                    let builtin = c.counterfactual.evaluate(theta, &entry.context).unwrap();
                    let dsl = q.evaluate(theta, &entry.context).unwrap();
                    assert!((builtin - dsl).abs() <= 1e-12, "{id}/{name}: {builtin} vs {dsl}");
                    checked += 1;
                }
            }
            if name != "fe_ranking" {
                assert!(checked > 0, "{id}/{name} has no re-expression");
            }
        }
    }
}

#[test]
fn pct_welfare_components() {
    let entry = catalog::lookup("binary").unwrap();
    let ctx = Context::new().with_scalar("x2", 1.0).with_scalar("dx2", 1.0);
    let theta = &entry.base_points[0];
    let q = expr_counterfactual("pct", "(b2*dx2)/(b1 + b2*x2)").unwrap();
    let m = binary::BinaryChoiceModel::from_point(theta).unwrap();
    let x = [1.0, 1.0, 0.0];
    let x_prime = [1.0, 2.0, 0.0];
    let want = binary::binary_pct_welfare(&m, &x, &x_prime).unwrap();
    assert!((q.evaluate(theta, &ctx).unwrap() - want).abs() <= 1e-12);
}

const BINARY_SPEC: &str = "\
[model]
name = binary_dsl

[params]
b1 = 0.2
b2 = 0.3

[dists]
eps = logistic(0, 1)

[transform]
builtin = binary

[context]
x2 = 1.0

[counterfactuals]
me_fixed_law = \"logistic_pdf(b1 + b2*x2) * b2\" expect = dependent
me = \"logistic_pdf((b1 + b2*x2 - eps_loc) / eps_scale) / eps_scale * b2\" expect = free
";

#[test]
fn spec_file_audits() {
    let spec = parse_model_spec(BINARY_SPEC).unwrap();
    assert_eq!(spec.family.id(), binary::FAMILY_ID);
    let builtin = binary::BinaryChoiceModel::from_point(&spec.base).unwrap();
    let want = binary::binary_marginal_effect(&builtin, &[1.0, 1.0], 2).unwrap();
    for c in &spec.counterfactuals {
        let q = spec.counterfactual(&c.name).unwrap();
        let v = invariance_audit(&q, spec.family.as_ref(), &spec.base, &spec.context, 1000, 1e-9, 7).unwrap();
        assert!((v.base_value - want).abs() <= 1e-12);
        let expected = match c.expect.unwrap() {
            catalog::Classification::NormalizationFree => AuditStatus::Invariant,
            catalog::Classification::NormalizationDependent => AuditStatus::NonInvariant,
        };
        assert_eq!(v.status, expected, "{}", c.name);
    }
}

#[test]
fn errors_locate_the_problem() {
    let text = BINARY_SPEC.replace("b2*x2) * b2\"", "b2*gamma) * b2\"");
    let SpecError::Resolution { name, offset, .. } = parse_model_spec(&text).unwrap_err() else { panic!() };
    assert_eq!(name, "gamma");
    assert_eq!(&text[offset..offset + 5], "gamma");
    for src in ["1 +", "(", "exp(", "1 ? 2", "a b", "log()", "exp(1,2)", "nosuch(1)", "3..1"] {
        let e = expr_counterfactual("q", src).unwrap_err();
        let off = e.offset().unwrap_or_else(|| panic!("{src}: {e}"));
        assert!(off < src.len(), "{src}: {e:?}");
    }
    assert!(matches!(expr_counterfactual("q", "exp(1, 2)"), Err(DslError::Arity { .. })));
}
