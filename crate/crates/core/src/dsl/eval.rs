use std::collections::BTreeMap;

use super::ast::{BinOp, Builtin, Expr};
use super::DslError;
use crate::catalog::logsumexp;
use crate::dist::{logistic_cdf, logistic_pdf, normal_cdf, normal_pdf};

fn finite(v: f64, what: impl FnOnce() -> String) -> Result<f64, DslError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(DslError::Domain(what()))
    }
}

fn call(func: Builtin, args: &[f64]) -> Result<f64, DslError> {
    let x = args[0];
    let v = match func {
        Builtin::Exp => x.exp(),
        Builtin::Log if x <= 0.0 => return Err(DslError::Domain(format!("log of {x}"))),
        Builtin::Log => x.ln(),
        Builtin::Sqrt if x < 0.0 => return Err(DslError::Domain(format!("sqrt of {x}"))),
        Builtin::Sqrt => x.sqrt(),
        Builtin::Abs => x.abs(),
        Builtin::Arccos if !(-1.0..=1.0).contains(&x) => return Err(DslError::Domain(format!("arccos of {x}"))),
        Builtin::Arccos => x.acos(),
        Builtin::LogSumExp => logsumexp(args),
        Builtin::NormalPdf => normal_pdf(x),
        Builtin::NormalCdf => normal_cdf(x),
        Builtin::LogisticPdf => logistic_pdf(x),
        Builtin::LogisticCdf => logistic_cdf(x),
    };
    finite(v, || format!("{}({x}) is not finite", func.name()))
}

/// Evaluates with names resolved by `lookup`. Every intermediate value must
/// be finite.
pub fn eval_with<F>(ast: &Expr, lookup: &F) -> Result<f64, DslError>
where
    F: Fn(&str) -> Option<f64> + ?Sized,
{
    match ast {
        Expr::Num(v) => Ok(*v),
        Expr::Ident(name) => lookup(name).ok_or_else(|| DslError::UnboundIdentifier(name.clone())),
        Expr::Neg(e) => Ok(-eval_with(e, lookup)?),
        Expr::Binary { op, lhs, rhs } => {
            let (a, b) = (eval_with(lhs, lookup)?, eval_with(rhs, lookup)?);
            let v = match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div if b == 0.0 => return Err(DslError::Domain(format!("division of {a} by zero"))),
                BinOp::Div => a / b,
                BinOp::Pow => a.powf(b),
            };
            finite(v, || format!("{a} {} {b} is not finite", op.symbol()))
        }
        Expr::Call { func, args } => {
            let vals = args.iter().map(|a| eval_with(a, lookup)).collect::<Result<Vec<_>, _>>()?;
            call(*func, &vals)
        }
    }
}

pub fn eval_expr(ast: &Expr, bindings: &BTreeMap<String, f64>) -> Result<f64, DslError> {
    eval_with(ast, &|name: &str| bindings.get(name).copied())
}
