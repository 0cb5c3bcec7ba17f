//! Two temperature readings in an arbitrary affine unit.
//!
//! Point layout: readings `t_from`, `t_to` and the unit itself, described by
//! `unit_offset` and `unit_scale` so that `reading = offset + scale·celsius`.
//! Changing units is the `(a, b)` action on all three location-like values.

use std::sync::Arc;

use super::{checked_div, dependent, free, CatalogCounterfactual, CatalogEntry, CatalogError};
use crate::audit::{Context, Counterfactual, EvalError, Normalization, OrbitInvariant};
use crate::quotient::{apply, element, AffineFamily, ParamPoint, QuotientError, Selector};

pub const FAMILY_ID: &str = "temperature_affine";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemperatureUnit {
    Celsius,
    Fahrenheit,
    Kelvin,
}

impl TemperatureUnit {
    /// `(offset, scale)` with `reading = offset + scale·celsius`.
    pub fn affine(self) -> (f64, f64) {
        match self {
            TemperatureUnit::Celsius => (0.0, 1.0),
            TemperatureUnit::Fahrenheit => (32.0, 1.8),
            TemperatureUnit::Kelvin => (273.15, 1.0),
        }
    }

    pub fn from_celsius(self, c: f64) -> f64 {
        let (offset, scale) = self.affine();
        offset + scale * c
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "C" | "c" | "celsius" => Some(TemperatureUnit::Celsius),
            "F" | "f" | "fahrenheit" => Some(TemperatureUnit::Fahrenheit),
            "K" | "k" | "kelvin" => Some(TemperatureUnit::Kelvin),
            _ => None,
        }
    }
}

/// `(to − from) / from` after converting both Celsius readings to `unit`.
pub fn temperature_pct_change(from_celsius: f64, to_celsius: f64, unit: TemperatureUnit) -> Result<f64, CatalogError> {
    let from = unit.from_celsius(from_celsius);
    let to = unit.from_celsius(to_celsius);
    checked_div(to - from, from, "temperature percentage change")
}

pub fn reading_point(from_celsius: f64, to_celsius: f64, unit: TemperatureUnit) -> Result<ParamPoint, CatalogError> {
    let (offset, scale) = unit.affine();
    Ok(ParamPoint::new()
        .with_coord("t_from", unit.from_celsius(from_celsius))?
        .with_coord("t_to", unit.from_celsius(to_celsius))?
        .with_coord("unit_offset", offset)?
        .with_coord("unit_scale", scale)?)
}

/// `(a, b)`: readings and offset map to `a + bx`, the unit scale to `bx`.
pub fn temperature_affine_family() -> AffineFamily {
    AffineFamily::builder(FAMILY_ID, &["a", "b"], "b")
        .coord(Selector::exact("t_from"), &[("a", 1.0)])
        .coord(Selector::exact("t_to"), &[("a", 1.0)])
        .coord(Selector::exact("unit_offset"), &[("a", 1.0)])
        .coord(Selector::exact("unit_scale"), &[])
        .build()
        .expect("temperature family is well formed")
}

fn readings(p: &ParamPoint) -> Result<(f64, f64, f64), QuotientError> {
    Ok((p.require_coord("t_from")?, p.require_coord("t_to")?, p.require_coord("unit_scale")?))
}

pub fn counterfactuals() -> Vec<CatalogCounterfactual> {
    vec![
        // the warming in degrees Celsius, whatever unit the readings use
        free(Counterfactual::new("abs_change", &[], |p: &ParamPoint, _: &Context| {
            let (from, to, scale) = readings(p)?;
            Ok(checked_div(to - from, scale, "unit scale")?)
        })),
        dependent(Counterfactual::new("pct_change", &[], |p: &ParamPoint, _: &Context| {
            let (from, to, _) = readings(p)?;
            checked_div(to - from, from, "temperature percentage change").map_err(EvalError::from)
        })),
    ]
}

fn to_unit(family: &AffineFamily, theta: &ParamPoint, unit: TemperatureUnit) -> Result<ParamPoint, QuotientError> {
    let (offset, scale) = unit.affine();
    let b = scale / theta.require_coord("unit_scale")?;
    let a = offset - b * theta.require_coord("unit_offset")?;
    apply(family, &element(family, vec![a, b])?, theta)
}

pub fn normalizations() -> Vec<Normalization> {
    let family = Arc::new(temperature_affine_family());
    let f1 = Arc::clone(&family);
    vec![
        Normalization::new("celsius", FAMILY_ID, move |theta| to_unit(&f1, theta, TemperatureUnit::Celsius)),
        Normalization::new("kelvin", FAMILY_ID, move |theta| to_unit(&family, theta, TemperatureUnit::Kelvin)),
    ]
}

/// The two readings in Celsius.
pub fn orbit_invariant() -> OrbitInvariant {
    OrbitInvariant::new(|p| {
        let (from, to, scale) = readings(p)?;
        let offset = p.require_coord("unit_offset")?;
        Ok(vec![(from - offset) / scale, (to - offset) / scale])
    })
}

pub fn base_points() -> Result<Vec<ParamPoint>, CatalogError> {
    use TemperatureUnit::*;
    [(1.0, 11.0, Celsius), (1.0, 11.0, Fahrenheit), (1.0, 11.0, Kelvin), (20.0, 25.0, Celsius), (-5.0, 15.0, Fahrenheit)]
        .into_iter()
        .map(|(from, to, unit)| reading_point(from, to, unit))
        .collect()
}

pub fn entry() -> Result<CatalogEntry, CatalogError> {
    Ok(CatalogEntry {
        id: "temperature",
        family: Arc::new(temperature_affine_family()),
        base_points: base_points()?,
        context: Context::new(),
        counterfactuals: counterfactuals(),
        normalizations: normalizations(),
        invariant: orbit_invariant(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentage_changes_by_unit() {
        use TemperatureUnit::*;
        assert!((temperature_pct_change(1.0, 11.0, Celsius).unwrap() - 10.0).abs() < 1e-12);
        assert!((temperature_pct_change(1.0, 11.0, Fahrenheit).unwrap() - 18.0 / 33.8).abs() < 1e-12);
        assert!((temperature_pct_change(1.0, 11.0, Kelvin).unwrap() - 10.0 / 274.15).abs() < 1e-12);
        assert!(matches!(
            temperature_pct_change(0.0, 11.0, Celsius),
            Err(CatalogError::ZeroDenominator(_))
        ));
    }

    #[test]
    fn unit_change_is_the_group_action() {
        let f = temperature_affine_family();
        let c = reading_point(1.0, 11.0, TemperatureUnit::Celsius).unwrap();
        let g = element(&f, vec![32.0, 1.8]).unwrap();
        let fahrenheit = apply(&f, &g, &c).unwrap();
        let expected = reading_point(1.0, 11.0, TemperatureUnit::Fahrenheit).unwrap();
        assert!(fahrenheit.relative_diff(&expected) < 1e-15);
    }

    #[test]
    fn sections_land_on_the_named_unit() {
        let nms = normalizations();
        let f = reading_point(1.0, 11.0, TemperatureUnit::Fahrenheit).unwrap();
        let c = nms[0].section(&f).unwrap();
        assert!((c.coord("t_from").unwrap() - 1.0).abs() < 1e-12);
        assert!((c.coord("t_to").unwrap() - 11.0).abs() < 1e-12);
        let k = nms[1].section(&f).unwrap();
        assert!((k.coord("t_to").unwrap() - 284.15).abs() < 1e-12);
    }
}
