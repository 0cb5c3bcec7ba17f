use normaudit::geometry::{convergence_experiment, strong_equivalence_check, ChartDistance, Scenario};

use super::{require_samples, run_err};
use crate::args::{GeometryArgs, RunConfig};
use crate::report::{format_number, Check, ReportEnvelope, Table};
use crate::CliError;

pub fn run(g: &GeometryArgs) -> Result<ReportEnvelope, CliError> {
    let mut cfg = RunConfig::from_common("geometry", &g.common, g.samples);
    cfg.scenario = Some(g.scenario.clone());
    if g.scenario == "strong_equiv" {
        require_samples(g.samples)?;
        cfg.dim = Some(g.dim);
        let r = strong_equivalence_check(g.samples, g.dim, g.common.seed).map_err(run_err)?;
        let check = Check::new(format!("geometry/strong_equiv/d{}", g.dim), r.pass, format!("{} violations", r.violations))
            .expected("0 violations")
            .value(r.violations as f64)
            .details(&r)?;
        return Ok(ReportEnvelope::new(cfg, vec![check], None));
    }
    let scenario = Scenario::parse(&g.scenario).ok_or_else(|| {
        CliError::Usage(format!("unknown scenario `{}`; expected cross_sign, within_sign or strong_equiv", g.scenario))
    })?;
    cfg.m_grid = Some(g.m_grid.clone());
    cfg.samples = g.m_grid.len();
    let t = convergence_experiment(scenario, &g.m_grid).map_err(run_err)?;
    let name = scenario.as_str();
    let last = t.rows.last().expect("grid is nonempty");
    let checks = vec![
        Check::new(
            format!("geometry/{name}/great_circle_decreasing"),
            t.great_circle_strictly_decreasing,
            t.great_circle_strictly_decreasing.to_string(),
        )
        .expected("true")
        .value(last.great_circle)
        .details(&t)?,
        Check::new(
            format!("geometry/{name}/chart_diverges_or_disconnected"),
            t.chart_diverges_or_disconnected,
            t.chart_diverges_or_disconnected.to_string(),
        )
        .expected("true"),
    ];
    let rows = t
        .rows
        .iter()
        .map(|r| {
            let chart = match r.chart {
                ChartDistance::Finite(d) => format_number(d),
                ChartDistance::Disconnected => "disconnected".to_string(),
            };
            vec![format_number(r.m), chart, format_number(r.great_circle)]
        })
        .collect();
    let table = Table { header: vec!["M".into(), "chart".into(), "great_circle".into()], rows };
    Ok(ReportEnvelope::new(cfg, checks, Some(table)))
}
