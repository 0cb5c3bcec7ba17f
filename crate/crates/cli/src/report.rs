use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::args::{Format, RunConfig};
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Shortest round-trip text, switching to exponent form outside `[1e-4, 1e15)`.
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<String>,
    pub observed: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    pub details: Value,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, observed: impl Into<String>) -> Self {
        Self { name: name.into(), passed, expected: None, observed: observed.into(), value: None, details: Value::Null }
    }

    pub fn expected(mut self, e: impl Into<String>) -> Self {
        self.expected = Some(e.into());
        self
    }

    pub fn value(mut self, v: f64) -> Self {
        self.value = Some(v);
        self
    }

    pub fn details<T: Serialize>(mut self, d: &T) -> Result<Self, CliError> {
        self.details = serde_json::to_value(d)?;
        Ok(self)
    }
}

/// A rendered experiment table, written as-is in CSV mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportEnvelope {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub timestamp: String,
    pub config: RunConfig,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<Table>,
    pub exit_status: i32,
}

impl ReportEnvelope {
    /// Sorts checks by name and derives the exit status from them.
    pub fn new(config: RunConfig, mut checks: Vec<Check>, table: Option<Table>) -> Self {
        checks.sort_by(|a, b| a.name.cmp(&b.name));
        let exit_status = if checks.iter().all(|c| c.passed) { 0 } else { 1 };
        Self {
            schema_version: SCHEMA_VERSION,
            tool: "norm-audit".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            config,
            checks,
            table,
            exit_status,
        }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// The experiment table if there is one, otherwise one row per check.
    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        match &self.table {
            Some(t) => {
                w.write_record(&t.header)?;
                for row in &t.rows {
                    w.write_record(row)?;
                }
            }
            None => {
                w.write_record(["name", "passed", "expected", "observed", "value"])?;
                for c in &self.checks {
                    w.write_record([
                        c.name.clone(),
                        c.passed.to_string(),
                        c.expected.clone().unwrap_or_default(),
                        c.observed.clone(),
                        c.value.map(format_number).unwrap_or_default(),
                    ])?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }

    pub fn write(&self, format: Format, out: Option<&Path>) -> Result<(), CliError> {
        let text = self.render(format)?;
        match out {
            Some(path) => fs::write(path, text)
                .map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display()))),
            None => io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Output(e.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_are_sorted_and_status_follows() {
        let cfg = RunConfig::default();
        let r = ReportEnvelope::new(cfg.clone(), vec![Check::new("b", true, "x"), Check::new("a", true, "y")], None);
        assert_eq!(r.checks[0].name, "a");
        assert_eq!(r.exit_status, 0);
        let r = ReportEnvelope::new(cfg, vec![Check::new("b", false, "x")], None);
        assert_eq!(r.exit_status, 1);
        assert_eq!(r.schema_version, 1);
    }

    #[test]
    fn csv_has_header_and_lf() {
        let r = ReportEnvelope::new(RunConfig::default(), vec![Check::new("a,b", true, "ok").value(0.5)], None);
        let csv = r.to_csv().unwrap();
        assert_eq!(csv, "name,passed,expected,observed,value\n\"a,b\",true,,ok,0.5\n");
    }

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(0.5), "0.5");
        assert_eq!(format_number(1e6), "1000000");
        assert_eq!(format_number(4.5e-17), "4.5e-17");
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(-2e-5), "-2e-5");
    }
}
