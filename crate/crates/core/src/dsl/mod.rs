//! A small expression language for counterfactuals and a sectioned
//! plain-text model-spec format, so audits can run on models that are not in
//! the catalog.

mod ast;
mod catalog_exprs;
mod eval;
mod parser;
mod spec_file;

use thiserror::Error;

use crate::audit::EvalError;

pub use ast::{random_expr, Arity, BinOp, Builtin, Expr};
pub use catalog_exprs::{catalog_expressions, expr_counterfactual, CatalogExpression, CATALOG_EXPRESSIONS};
pub use eval::{eval_expr, eval_with};
pub use parser::{parse_expr, parse_expr_spanned, IdentSpan};
pub use spec_file::{load_model_spec, parse_model_spec, ModelSpec, SpecCounterfactual, SpecError, TransformSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("`{name}` at byte {offset} takes {expected} argument(s), got {found}")]
    Arity { name: String, offset: usize, expected: String, found: usize },
    #[error("unbound identifier `{0}`")]
    UnboundIdentifier(String),
    #[error("domain error: {0}")]
    Domain(String),
}

impl DslError {
    /// Byte offset into the source, for errors raised while parsing.
    pub fn offset(&self) -> Option<usize> {
        match self {
            DslError::Syntax { offset, .. }
            | DslError::UnknownFunction { offset, .. }
            | DslError::Arity { offset, .. } => Some(*offset),
            _ => None,
        }
    }
}

impl From<DslError> for EvalError {
    fn from(e: DslError) -> Self {
        match e {
            DslError::UnboundIdentifier(name) => EvalError::MissingContext(name),
            other => EvalError::Undefined(other.to_string()),
        }
    }
}
