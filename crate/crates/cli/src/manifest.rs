//! Expected classification of every catalog counterfactual. A run whose
//! observed verdict differs exits with status 1.

use normaudit::catalog::Classification;
use Classification::{NormalizationDependent as Dependent, NormalizationFree as Free};

pub const EXPECTED: &[(&str, &str, Classification)] = &[
    ("binary", "choice_prob", Free),
    ("binary", "coef_ratio", Free),
    ("binary", "intercept_ratio", Dependent),
    ("binary", "latent_level", Dependent),
    ("binary", "marginal_effect", Free),
    ("binary", "pct_welfare", Dependent),
    ("logit", "cs_level", Dependent),
    ("logit", "delta_cs", Free),
    ("logit", "pct_cs", Dependent),
    ("logit", "share", Free),
    ("network", "fe_level", Dependent),
    ("network", "fe_ranking", Free),
    ("network", "link_prob", Free),
    ("network", "w_level", Dependent),
    ("network", "w_pct", Dependent),
    ("network", "w_shape", Free),
    ("temperature", "abs_change", Free),
    ("temperature", "pct_change", Dependent),
];

pub fn expected(model: &str, counterfactual: &str) -> Option<Classification> {
    EXPECTED.iter().find(|(m, c, _)| *m == model && *c == counterfactual).map(|(_, _, e)| *e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use normaudit::catalog::{lookup, MODEL_IDS};

    #[test]
    fn manifest_covers_the_catalog() {
        let mut n = 0;
        for id in MODEL_IDS {
            for c in lookup(id).unwrap().counterfactuals {
                assert_eq!(expected(id, c.counterfactual.name()), Some(c.expected), "{id}/{}", c.counterfactual.name());
                n += 1;
            }
        }
        assert_eq!(n, EXPECTED.len());
    }
}
