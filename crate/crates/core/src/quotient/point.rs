use std::collections::BTreeMap;

use serde::Serialize;

use super::QuotientError;
use crate::dist::DistHandle;

/// One configuration of the unknowns: finite-dimensional coordinates plus
/// handles for the unobservable laws.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ParamPoint {
    coords: BTreeMap<String, f64>,
    dists: BTreeMap<String, DistHandle>,
}

impl ParamPoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_coord(mut self, name: impl Into<String>, value: f64) -> Result<Self, QuotientError> {
        self.insert_coord(name, value)?;
        Ok(self)
    }

    pub fn with_dist(mut self, name: impl Into<String>, dist: DistHandle) -> Result<Self, QuotientError> {
        self.insert_dist(name, dist)?;
        Ok(self)
    }

    pub fn insert_coord(&mut self, name: impl Into<String>, value: f64) -> Result<(), QuotientError> {
        let name = name.into();
        if !value.is_finite() {
            return Err(QuotientError::NonFinite(name));
        }
        if self.dists.contains_key(&name) {
            return Err(QuotientError::DuplicateName(name));
        }
        self.coords.insert(name, value);
        Ok(())
    }

    pub fn insert_dist(&mut self, name: impl Into<String>, dist: DistHandle) -> Result<(), QuotientError> {
        let name = name.into();
        if self.coords.contains_key(&name) {
            return Err(QuotientError::DuplicateName(name));
        }
        self.dists.insert(name, dist);
        Ok(())
    }

    pub fn coord(&self, name: &str) -> Option<f64> {
        self.coords.get(name).copied()
    }

    pub fn require_coord(&self, name: &str) -> Result<f64, QuotientError> {
        self.coord(name)
            .ok_or_else(|| QuotientError::UnknownName(name.to_string()))
    }

    pub fn dist(&self, name: &str) -> Option<&DistHandle> {
        self.dists.get(name)
    }

    pub fn require_dist(&self, name: &str) -> Result<&DistHandle, QuotientError> {
        self.dist(name)
            .ok_or_else(|| QuotientError::UnknownName(name.to_string()))
    }

    pub fn coords(&self) -> &BTreeMap<String, f64> {
        &self.coords
    }

    pub fn dists(&self) -> &BTreeMap<String, DistHandle> {
        &self.dists
    }

    /// Largest absolute number stored in the point (coordinates, locations, scales).
    pub fn magnitude(&self) -> f64 {
        let c = self.coords.values().fold(0.0_f64, |m, v| m.max(v.abs()));
        self.dists
            .values()
            .fold(c, |m, d| m.max(d.location().abs()).max(d.scale().abs()))
    }

    /// Maximum absolute difference over every stored number, or `None` when
    /// the two points do not share names and distribution shapes.
    pub fn max_abs_diff(&self, other: &ParamPoint) -> Option<f64> {
        if self.coords.len() != other.coords.len() || self.dists.len() != other.dists.len() {
            return None;
        }
        let mut worst = 0.0_f64;
        for ((na, va), (nb, vb)) in self.coords.iter().zip(&other.coords) {
            if na != nb {
                return None;
            }
            worst = worst.max((va - vb).abs());
        }
        for ((na, da), (nb, db)) in self.dists.iter().zip(&other.dists) {
            if na != nb || da.family() != db.family() || da.grid() != db.grid() {
                return None;
            }
            worst = worst
                .max((da.location() - db.location()).abs())
                .max((da.scale() - db.scale()).abs());
        }
        Some(worst)
    }

    /// `max_abs_diff` divided by `1 + max magnitude`; `+inf` on shape mismatch.
    pub fn relative_diff(&self, other: &ParamPoint) -> f64 {
        match self.max_abs_diff(other) {
            Some(d) => d / (1.0 + self.magnitude().max(other.magnitude())),
            None => f64::INFINITY,
        }
    }

    pub(crate) fn coords_mut(&mut self) -> &mut BTreeMap<String, f64> {
        &mut self.coords
    }

    pub(crate) fn dists_mut(&mut self) -> &mut BTreeMap<String, DistHandle> {
        &mut self.dists
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_unique_across_coords_and_dists() {
        let p = ParamPoint::new()
            .with_dist("eps", DistHandle::logistic(0.0, 1.0).unwrap())
            .unwrap();
        assert_eq!(
            p.with_coord("eps", 1.0),
            Err(QuotientError::DuplicateName("eps".into()))
        );
    }

    #[test]
    fn rejects_non_finite() {
        assert!(ParamPoint::new().with_coord("x", f64::NAN).is_err());
        assert!(ParamPoint::new().with_coord("x", f64::INFINITY).is_err());
    }

    #[test]
    fn diff_detects_shape_mismatch() {
        let a = ParamPoint::new().with_coord("x", 1.0).unwrap();
        let b = ParamPoint::new().with_coord("y", 1.0).unwrap();
        assert_eq!(a.max_abs_diff(&b), None);
        assert_eq!(a.relative_diff(&b), f64::INFINITY);
        let c = ParamPoint::new().with_coord("x", 1.5).unwrap();
        assert_eq!(a.max_abs_diff(&c), Some(0.5));
    }
}
