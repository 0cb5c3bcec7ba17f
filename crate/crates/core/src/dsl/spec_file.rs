//! Sectioned model-spec files.
//!
//! ```text
//! [model]
//! name = binary_dsl
//!
//! [params]
//! b1 = 0.5
//! b2 = 1.2
//!
//! [dists]
//! eps = logistic(0, 1)
//!
//! [transform]
//! params = a, b        # or: builtin = binary
//! scale = b
//! b1 = a
//! b2 = 0
//! eps = a
//!
//! [context]
//! x = [1, 2, 0.5]
//!
//! [counterfactuals]
//! me = "logistic_pdf(b1 + b2*x2) * b2" expect = free
//! ```
//!
//! A `[transform]` key is a coordinate or distribution name, or a prefix
//! ending in `*`; its value is the additive shift, a linear form in the
//! location parameters. Everything matched is also multiplied by the scale
//! parameter. Distributions bind as `<name>_loc` and `<name>_scale`; context
//! lists bind element-wise as `x1`, `x2`, ...

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use super::ast::{BinOp, Expr};
use super::catalog_exprs::{bind, context_entry};
use super::eval::eval_with;
use super::parser::parse_expr_spanned;
use super::DslError;
use crate::audit::{Context, Counterfactual, EvalError};
use crate::catalog::{self, Classification, MODEL_IDS};
use crate::dist::{DistFamily, DistHandle};
use crate::quotient::{apply, identity, AffineFamily, ParamPoint, QuotientError, Selector, TransformFamily};

const SECTIONS: [&str; 6] = ["model", "params", "dists", "transform", "context", "counterfactuals"];
const REQUIRED: [&str; 4] = ["model", "params", "transform", "counterfactuals"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("line {line}, byte {offset}: `{name}` in counterfactual `{counterfactual}` is not a parameter, distribution or context name")]
    Resolution { name: String, counterfactual: String, line: usize, offset: usize },
    #[error("line {line}: {source}")]
    Expr { line: usize, source: DslError },
}

impl SpecError {
    fn schema(line: usize, message: impl Into<String>) -> Self {
        SpecError::Schema { line, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransformSpec {
    /// The family of a catalog model, by model id or family id.
    Builtin(String),
    Custom { params: Vec<String>, scale: String, rules: Vec<(String, Vec<(String, f64)>)> },
}

#[derive(Debug, Clone)]
pub struct SpecCounterfactual {
    pub name: String,
    pub source: String,
    pub expr: Expr,
    pub expect: Option<Classification>,
    pub context_schema: Vec<String>,
    pub line: usize,
}

#[derive(Clone)]
pub struct ModelSpec {
    pub name: String,
    pub base: ParamPoint,
    pub family: Arc<dyn TransformFamily>,
    pub transform: TransformSpec,
    pub context: Context,
    pub counterfactuals: Vec<SpecCounterfactual>,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("base", &self.base)
            .field("family", &self.family.id())
            .field("transform", &self.transform)
            .field("context", &self.context)
            .field("counterfactuals", &self.counterfactuals)
            .finish()
    }
}

impl ModelSpec {
    pub fn counterfactual(&self, name: &str) -> Option<Counterfactual> {
        self.counterfactuals.iter().find(|c| c.name == name).map(Self::compile)
    }

    pub fn compiled_counterfactuals(&self) -> Vec<Counterfactual> {
        self.counterfactuals.iter().map(Self::compile).collect()
    }

    fn compile(c: &SpecCounterfactual) -> Counterfactual {
        let expr = c.expr.clone();
        Counterfactual::with_schema(&c.name, c.context_schema.clone(), move |theta: &ParamPoint, ctx: &Context| {
            eval_with(&expr, &|name: &str| bind(theta, ctx, name)).map_err(EvalError::from)
        })
    }
}

struct Line<'a> {
    number: usize,
    key: &'a str,
    value: &'a str,
    value_offset: usize,
}

// Cuts a `#` comment that is not inside double quotes.
fn strip_comment(s: &str) -> &str {
    let mut quoted = false;
    for (i, c) in s.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &s[..i],
            _ => {}
        }
    }
    s
}

fn split_sections(text: &str) -> Result<BTreeMap<&'static str, (usize, Vec<Line<'_>>)>, SpecError> {
    let mut sections: BTreeMap<&'static str, (usize, Vec<Line<'_>>)> = BTreeMap::new();
    let mut current: Option<&'static str> = None;
    let mut start = 0;
    for (idx, raw) in text.split('\n').enumerate() {
        let number = idx + 1;
        let line_start = start;
        start += raw.len() + 1;
        let body = strip_comment(raw.strip_suffix('\r').unwrap_or(raw));
        let trimmed = body.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim();
            let known = SECTIONS
                .iter()
                .find(|s| **s == name)
                .ok_or_else(|| SpecError::schema(number, format!("unknown section [{name}]")))?;
            if sections.insert(known, (number, Vec::new())).is_some() {
                return Err(SpecError::schema(number, format!("section [{name}] appears twice")));
            }
            current = Some(known);
            continue;
        }
        let section = current.ok_or_else(|| SpecError::schema(number, "entry before any section header"))?;
        let eq = body.find('=').ok_or_else(|| SpecError::schema(number, "expected `name = value`"))?;
        let key = body[..eq].trim();
        let after = &body[eq + 1..];
        let lead = after.len() - after.trim_start().len();
        let line = Line { number, key, value: after.trim(), value_offset: line_start + eq + 1 + lead };
        let entries = &mut sections.get_mut(section).expect("current section exists").1;
        if entries.iter().any(|l| l.key == key) {
            return Err(SpecError::schema(number, format!("`{key}` is defined twice")));
        }
        entries.push(line);
    }
    for req in REQUIRED {
        if !sections.contains_key(req) {
            return Err(SpecError::schema(0, format!("missing section [{req}]")));
        }
    }
    Ok(sections)
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn check_ident(line: &Line<'_>) -> Result<(), SpecError> {
    if is_ident(line.key) {
        Ok(())
    } else {
        Err(SpecError::schema(line.number, format!("`{}` is not a valid name", line.key)))
    }
}

fn number(line: &Line<'_>, text: &str) -> Result<f64, SpecError> {
    let t = text.trim();
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(SpecError::schema(line.number, format!("`{t}` is not a finite number"))),
    }
}

fn unquote(s: &str) -> &str {
    s.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(s)
}

fn parse_dist(line: &Line<'_>) -> Result<DistHandle, SpecError> {
    let bad = || SpecError::schema(line.number, format!("expected `family(location, scale)`, got `{}`", line.value));
    let open = line.value.find('(').ok_or_else(bad)?;
    let inner = line.value[open + 1..].strip_suffix(')').ok_or_else(bad)?;
    let fam_name = line.value[..open].trim();
    let family = DistFamily::from_name(fam_name)
        .filter(|f| *f != DistFamily::QuantileGrid)
        .ok_or_else(|| SpecError::schema(line.number, format!("unknown distribution family `{fam_name}`")))?;
    let args: Vec<&str> = inner.split(',').collect();
    if args.len() != 2 {
        return Err(bad());
    }
    DistHandle::new(family, number(line, args[0])?, number(line, args[1])?)
        .map_err(|e| SpecError::schema(line.number, e.to_string()))
}

// Collects `Σ wₖ·pₖ + c` from a tree of sums, negations and constant multiples.
fn linear_form(e: &Expr) -> Result<(BTreeMap<String, f64>, f64), String> {
    fn scale(form: (BTreeMap<String, f64>, f64), k: f64) -> (BTreeMap<String, f64>, f64) {
        (form.0.into_iter().map(|(n, w)| (n, w * k)).collect(), form.1 * k)
    }
    match e {
        Expr::Num(v) => Ok((BTreeMap::new(), *v)),
        Expr::Ident(n) => Ok((BTreeMap::from([(n.clone(), 1.0)]), 0.0)),
        Expr::Neg(inner) => Ok(scale(linear_form(inner)?, -1.0)),
        Expr::Binary { op: op @ (BinOp::Add | BinOp::Sub), lhs, rhs } => {
            let (mut l, lc) = linear_form(lhs)?;
            let sign = if *op == BinOp::Add { 1.0 } else { -1.0 };
            let (r, rc) = linear_form(rhs)?;
            for (n, w) in r {
                *l.entry(n).or_insert(0.0) += sign * w;
            }
            Ok((l, lc + sign * rc))
        }
        Expr::Binary { op: BinOp::Mul, lhs, rhs } => {
            let (l, r) = (linear_form(lhs)?, linear_form(rhs)?);
            match (l.0.is_empty(), r.0.is_empty()) {
                (true, _) => Ok(scale(r, l.1)),
                (_, true) => Ok(scale(l, r.1)),
                _ => Err("product of two parameters is not affine".into()),
            }
        }
        Expr::Binary { op: BinOp::Div, lhs, rhs } => {
            let r = linear_form(rhs)?;
            if !r.0.is_empty() || r.1 == 0.0 {
                return Err("division must be by a nonzero constant".into());
            }
            Ok(scale(linear_form(lhs)?, 1.0 / r.1))
        }
        _ => Err(format!("`{e}` is not a linear form")),
    }
}

fn builtin_family(id: &str) -> Option<Arc<dyn TransformFamily>> {
    MODEL_IDS
        .iter()
        .filter_map(|m| catalog::lookup(m).ok())
        .find(|entry| entry.id == id || entry.family.id() == id)
        .map(|entry| entry.family)
}

fn parse_transform(
    model_name: &str,
    header: usize,
    lines: &[Line<'_>],
    base: &ParamPoint,
) -> Result<(TransformSpec, Arc<dyn TransformFamily>), SpecError> {
    let get = |k: &str| lines.iter().find(|l| l.key == k);
    if let Some(b) = get("builtin") {
        if lines.len() > 1 {
            return Err(SpecError::schema(b.number, "`builtin` cannot be combined with other transform entries"));
        }
        let id = unquote(b.value);
        let family = builtin_family(id)
            .ok_or_else(|| SpecError::schema(b.number, format!("unknown builtin transform family `{id}`")))?;
        return Ok((TransformSpec::Builtin(id.to_string()), family));
    }
    let params_line = get("params").ok_or_else(|| SpecError::schema(header, "[transform] needs `params` or `builtin`"))?;
    let scale_line = get("scale").ok_or_else(|| SpecError::schema(header, "[transform] needs `scale`"))?;
    let params: Vec<String> = params_line.value.split(',').map(|s| s.trim().to_string()).collect();
    if params.iter().any(|p| !is_ident(p)) {
        return Err(SpecError::schema(params_line.number, "group parameters must be names"));
    }
    let scale = scale_line.value.to_string();
    if !params.contains(&scale) {
        return Err(SpecError::schema(scale_line.number, format!("scale parameter `{scale}` is not in `params`")));
    }
    let names: Vec<&str> = params.iter().map(String::as_str).collect();
    let mut builder = AffineFamily::builder(&format!("{model_name}_affine"), &names, &scale);
    let mut rules = Vec::new();
    for l in lines.iter().filter(|l| l.key != "params" && l.key != "scale") {
        let (e, _) = parse_expr_spanned(l.value).map_err(|source| SpecError::Expr {
            line: l.number,
            source: shift_offsets(source, l.value_offset),
        })?;
        let (form, constant) = linear_form(&e).map_err(|m| SpecError::schema(l.number, m))?;
        if constant != 0.0 {
            return Err(SpecError::schema(l.number, "a constant shift does not form a group"));
        }
        let shift: Vec<(String, f64)> = form.into_iter().filter(|(_, w)| *w != 0.0).collect();
        if let Some((bad, _)) = shift.iter().find(|(n, _)| *n == scale || !params.contains(n)) {
            return Err(SpecError::schema(l.number, format!("`{bad}` is not a location parameter")));
        }
        let weights: Vec<(&str, f64)> = shift.iter().map(|(n, w)| (n.as_str(), *w)).collect();
        if let Some(prefix) = l.key.strip_suffix('*') {
            builder = builder.coord(Selector::prefix(prefix), &weights).dist(Selector::prefix(prefix), &weights);
        } else if base.coord(l.key).is_some() {
            builder = builder.coord(Selector::exact(l.key), &weights);
        } else if base.dist(l.key).is_some() {
            builder = builder.dist(Selector::exact(l.key), &weights);
        } else {
            return Err(SpecError::schema(l.number, format!("`{}` is not a declared parameter or distribution", l.key)));
        }
        rules.push((l.key.to_string(), shift));
    }
    let family = builder.build().map_err(|e| SpecError::schema(header, e.to_string()))?;
    Ok((TransformSpec::Custom { params, scale, rules }, Arc::new(family)))
}

fn shift_offsets(e: DslError, by: usize) -> DslError {
    match e {
        DslError::Syntax { offset, message } => DslError::Syntax { offset: offset + by, message },
        DslError::UnknownFunction { name, offset } => DslError::UnknownFunction { name, offset: offset + by },
        DslError::Arity { name, offset, expected, found } => {
            DslError::Arity { name, offset: offset + by, expected, found }
        }
        other => other,
    }
}

fn parse_context(lines: &[Line<'_>]) -> Result<Context, SpecError> {
    let mut ctx = Context::new();
    for l in lines {
        check_ident(l)?;
        ctx = match l.value.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            Some(inner) if inner.trim().is_empty() => ctx.with_list(l.key, Vec::new()),
            Some(inner) => {
                let xs = inner.split(',').map(|t| number(l, t)).collect::<Result<Vec<_>, _>>()?;
                ctx.with_list(l.key, xs)
            }
            None => ctx.with_scalar(l.key, number(l, l.value)?),
        };
    }
    Ok(ctx)
}

fn parse_counterfactual(
    l: &Line<'_>,
    base: &ParamPoint,
    ctx: &Context,
) -> Result<SpecCounterfactual, SpecError> {
    check_ident(l)?;
    let bad_quote = || SpecError::schema(l.number, "expression must be in double quotes");
    let body = l.value.strip_prefix('"').ok_or_else(bad_quote)?;
    let close = body.find('"').ok_or_else(bad_quote)?;
    let source = &body[..close];
    let src_offset = l.value_offset + 1;
    let rest = body[close + 1..].trim();
    let expect = if rest.is_empty() {
        None
    } else {
        let value = rest
            .strip_prefix("expect")
            .map(str::trim_start)
            .and_then(|r| r.strip_prefix('='))
            .map(str::trim)
            .ok_or_else(|| SpecError::schema(l.number, format!("unexpected `{rest}` after the expression")))?;
        Some(match value {
            "free" | "normalization_free" => Classification::NormalizationFree,
            "dependent" | "normalization_dependent" => Classification::NormalizationDependent,
            other => return Err(SpecError::schema(l.number, format!("unknown expectation `{other}`"))),
        })
    };
    let (expr, spans) = parse_expr_spanned(source)
        .map_err(|e| SpecError::Expr { line: l.number, source: shift_offsets(e, src_offset) })?;
    let mut schema = BTreeSet::new();
    for span in &spans {
        if bind(base, &Context::new(), &span.name).is_some() {
            continue;
        }
        match context_entry(ctx, &span.name) {
            Some((entry, _)) => {
                schema.insert(entry.to_string());
            }
            None => {
                return Err(SpecError::Resolution {
                    name: span.name.clone(),
                    counterfactual: l.key.to_string(),
                    line: l.number,
                    offset: src_offset + span.offset,
                })
            }
        }
    }
    Ok(SpecCounterfactual {
        name: l.key.to_string(),
        source: source.to_string(),
        expr,
        expect,
        context_schema: schema.into_iter().collect(),
        line: l.number,
    })
}

/// Parses spec text; every expression is parsed and resolved here.
pub fn parse_model_spec(text: &str) -> Result<ModelSpec, SpecError> {
    let sections = split_sections(text)?;
    let empty = (0, Vec::new());
    let section = |name: &str| sections.get(name).unwrap_or(&empty);

    let (model_line, model) = section("model");
    let name_line = model
        .iter()
        .find(|l| l.key == "name")
        .ok_or_else(|| SpecError::schema(*model_line, "[model] needs a `name`"))?;
    let name = unquote(name_line.value).to_string();

    let mut base = ParamPoint::new();
    for l in &section("params").1 {
        check_ident(l)?;
        base.insert_coord(l.key, number(l, l.value)?).map_err(|e| SpecError::schema(l.number, e.to_string()))?;
    }
    for l in &section("dists").1 {
        check_ident(l)?;
        base.insert_dist(l.key, parse_dist(l)?).map_err(|e| SpecError::schema(l.number, e.to_string()))?;
    }

    let context = parse_context(&section("context").1)?;
    for l in &section("context").1 {
        if bind(&base, &Context::new(), l.key).is_some() {
            return Err(SpecError::schema(l.number, format!("context name `{}` shadows a parameter", l.key)));
        }
    }

    let (t_line, t_lines) = section("transform");
    let (transform, family) = parse_transform(&name, *t_line, t_lines, &base)?;
    apply(family.as_ref(), &identity(family.as_ref()), &base).map_err(|e: QuotientError| {
        SpecError::schema(*t_line, format!("transform does not fit the parameters: {e}"))
    })?;

    let counterfactuals = section("counterfactuals")
        .1
        .iter()
        .map(|l| parse_counterfactual(l, &base, &context))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(ModelSpec { name, base, family, transform, context, counterfactuals })
}

pub fn load_model_spec(path: impl AsRef<Path>) -> Result<ModelSpec, SpecError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| SpecError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_model_spec(&text)
}
