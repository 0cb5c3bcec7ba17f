//! The space of unknowns, modeling-equivalent transformation families acting
//! on it, and the orbit structure those actions induce.

mod axioms;
mod family;
mod point;
mod preservation;

pub use axioms::{check_group_axioms, AxiomReport};
pub use family::{
    apply, compose, element, identity, invert, sample_group, sample_group_with, AffineFamily,
    AffineFamilyBuilder, GroupElement, ParamKind, Selector, TransformFamily, MIN_SCALE,
};
pub use point::ParamPoint;
pub use preservation::{
    check_assumption_preservation, AssumptionTag, PairCorrelation, PreservationVerdict,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuotientError {
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("name `{0}` is already used")]
    DuplicateName(String),
    #[error("group element {params:?} violates the constraints of family `{family}`")]
    ConstraintViolated { family: String, params: Vec<f64> },
    #[error("group element belongs to family `{found}`, expected `{expected}`")]
    FamilyMismatch { expected: String, found: String },
    #[error("non-finite value produced for `{0}`")]
    NonFinite(String),
    #[error("unsupported assumption tag `{0}`")]
    UnsupportedTag(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Dist(#[from] crate::dist::DistError),
}
