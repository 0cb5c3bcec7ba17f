//! Auditing structural-model counterfactuals for dependence on arbitrary
//! normalizations.

pub mod audit;
pub mod catalog;
pub mod dist;
pub mod dsl;
pub mod geometry;
pub mod quotient;
pub mod singularity;
