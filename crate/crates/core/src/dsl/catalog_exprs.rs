//! Catalog counterfactuals written in the expression language, for
//! cross-checking the evaluator against the hand-written versions.

use super::eval::eval_with;
use super::parser::parse_expr;
use super::DslError;
use crate::audit::{Context, ContextValue, Counterfactual, EvalError};
use crate::dist::DistFamily;
use crate::quotient::ParamPoint;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatalogExpression {
    pub model: &'static str,
    pub counterfactual: &'static str,
    pub source: &'static str,
    /// The expression hard-codes a standardized law; it applies only where
    /// the named distribution has this family.
    pub requires: Option<(&'static str, DistFamily)>,
}

impl CatalogExpression {
    pub fn applies_to(&self, theta: &ParamPoint) -> bool {
        match self.requires {
            None => true,
            Some((dist, family)) => theta.dist(dist).is_some_and(|d| d.family() == family),
        }
    }
}

const fn ce(
    model: &'static str,
    counterfactual: &'static str,
    source: &'static str,
    requires: Option<(&'static str, DistFamily)>,
) -> CatalogExpression {
    CatalogExpression { model, counterfactual, source, requires }
}

const LOGISTIC_EPS: Option<(&str, DistFamily)> = Some(("eps", DistFamily::Logistic));
const NORMAL_EPS: Option<(&str, DistFamily)> = Some(("eps", DistFamily::Normal));
const LOGISTIC_U: Option<(&str, DistFamily)> = Some(("U", DistFamily::Logistic));
const NORMAL_U: Option<(&str, DistFamily)> = Some(("U", DistFamily::Normal));

pub const CATALOG_EXPRESSIONS: &[CatalogExpression] = &[
    ce("binary", "choice_prob", "logistic_cdf((b1*x1 + b2*x2 + b3*x3 - eps_loc) / eps_scale)", LOGISTIC_EPS),
    ce("binary", "choice_prob", "normal_cdf((b1*x1 + b2*x2 + b3*x3 - eps_loc) / eps_scale)", NORMAL_EPS),
    ce(
        "binary",
        "marginal_effect",
        "logistic_pdf((b1*x1 + b2*x2 + b3*x3 - eps_loc) / eps_scale) / eps_scale * b2",
        LOGISTIC_EPS,
    ),
    ce(
        "binary",
        "marginal_effect",
        "normal_pdf((b1*x1 + b2*x2 + b3*x3 - eps_loc) / eps_scale) / eps_scale * b2",
        NORMAL_EPS,
    ),
    ce("binary", "coef_ratio", "b2 / b3", None),
    ce("binary", "latent_level", "b1*x1 + b2*x2 + b3*x3", None),
    ce("binary", "intercept_ratio", "b1 / b2", None),
    ce(
        "binary",
        "pct_welfare",
        "(b1*x_prime1 + b2*x_prime2 + b3*x_prime3 - (b1*x1 + b2*x2 + b3*x3)) / (b1*x1 + b2*x2 + b3*x3)",
        None,
    ),
    ce(
        "logit",
        "delta_cs",
        "mu/alpha * (logsumexp((delta0 - alpha*price_change1)/mu, (delta1 - alpha*price_change2)/mu, \
         (delta2 - alpha*price_change3)/mu) - logsumexp(delta0/mu, delta1/mu, delta2/mu))",
        None,
    ),
    ce("logit", "share", "exp(delta1/mu - logsumexp(delta0/mu, delta1/mu, delta2/mu))", None),
    ce("logit", "cs_level", "mu/alpha * logsumexp(delta0/mu, delta1/mu, delta2/mu) + C", None),
    ce(
        "logit",
        "pct_cs",
        "mu/alpha * (logsumexp((delta0 - alpha*price_change1)/mu, (delta1 - alpha*price_change2)/mu, \
         (delta2 - alpha*price_change3)/mu) - logsumexp(delta0/mu, delta1/mu, delta2/mu)) \
         / (mu/alpha * logsumexp(delta0/mu, delta1/mu, delta2/mu) + C)",
        None,
    ),
    ce("network", "link_prob", "logistic_cdf((w_0_1 + A1 + A2 - U_loc) / U_scale)", LOGISTIC_U),
    ce("network", "link_prob", "normal_cdf((w_0_1 + A1 + A2 - U_loc) / U_scale)", NORMAL_U),
    ce("network", "w_shape", "(w_0_1 - w_0_0) / (w_1_1 - w_0_0)", None),
    ce("network", "fe_level", "A1", None),
    ce("network", "w_level", "w_0_1", None),
    ce("network", "w_pct", "(w_1_1 - w_0_1) / w_0_1", None),
    ce("temperature", "abs_change", "(t_to - t_from) / unit_scale", None),
    ce("temperature", "pct_change", "(t_to - t_from) / t_from", None),
];

pub fn catalog_expressions(model: &str) -> impl Iterator<Item = &'static CatalogExpression> + '_ {
    CATALOG_EXPRESSIONS.iter().filter(move |e| e.model == model)
}

/// Value of `name` at `theta`: a coordinate, `<dist>_loc` / `<dist>_scale`,
/// or a context scalar or list element.
pub(super) fn bind(theta: &ParamPoint, ctx: &Context, name: &str) -> Option<f64> {
    if let Some(v) = theta.coord(name) {
        return Some(v);
    }
    if let Some(d) = name.strip_suffix("_loc").and_then(|n| theta.dist(n)) {
        return Some(d.location());
    }
    if let Some(d) = name.strip_suffix("_scale").and_then(|n| theta.dist(n)) {
        return Some(d.scale());
    }
    context_entry(ctx, name).map(|(_, v)| v)
}

/// The context value bound to `name` and the top-level entry it comes from.
pub(super) fn context_entry<'a>(ctx: &Context, name: &'a str) -> Option<(&'a str, f64)> {
    if let Some(ContextValue::Scalar(v)) = ctx.get(name) {
        return Some((name, *v));
    }
    let stem = name.trim_end_matches(|c: char| c.is_ascii_digit());
    let index: usize = name[stem.len()..].parse().ok()?;
    match ctx.get(stem) {
        Some(ContextValue::List(xs)) if index >= 1 => xs.get(index - 1).map(|v| (stem, *v)),
        _ => None,
    }
}

/// A counterfactual from expression text, binding coordinates,
/// `<dist>_loc` / `<dist>_scale` and context values (list `x` as `x1`, ...).
pub fn expr_counterfactual(name: &str, source: &str) -> Result<Counterfactual, DslError> {
    let expr = parse_expr(source)?;
    Ok(Counterfactual::new(name, &[], move |theta: &ParamPoint, ctx: &Context| {
        eval_with(&expr, &|n: &str| bind(theta, ctx, n)).map_err(EvalError::from)
    }))
}
