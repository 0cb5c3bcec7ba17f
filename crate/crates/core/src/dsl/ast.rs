use std::fmt;

use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Exactly(usize),
    AtLeast(usize),
}

impl Arity {
    pub fn accepts(self, n: usize) -> bool {
        match self {
            Arity::Exactly(k) => n == k,
            Arity::AtLeast(k) => n >= k,
        }
    }
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arity::Exactly(k) => write!(f, "{k}"),
            Arity::AtLeast(k) => write!(f, "at least {k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Exp,
    Log,
    Sqrt,
    Abs,
    Arccos,
    LogSumExp,
    NormalPdf,
    NormalCdf,
    LogisticPdf,
    LogisticCdf,
}

impl Builtin {
    pub const ALL: [Builtin; 10] = [
        Builtin::Exp,
        Builtin::Log,
        Builtin::Sqrt,
        Builtin::Abs,
        Builtin::Arccos,
        Builtin::LogSumExp,
        Builtin::NormalPdf,
        Builtin::NormalCdf,
        Builtin::LogisticPdf,
        Builtin::LogisticCdf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Exp => "exp",
            Builtin::Log => "log",
            Builtin::Sqrt => "sqrt",
            Builtin::Abs => "abs",
            Builtin::Arccos => "arccos",
            Builtin::LogSumExp => "logsumexp",
            Builtin::NormalPdf => "normal_pdf",
            Builtin::NormalCdf => "normal_cdf",
            Builtin::LogisticPdf => "logistic_pdf",
            Builtin::LogisticCdf => "logistic_cdf",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.name() == name)
    }

    pub fn arity(self) -> Arity {
        match self {
            Builtin::LogSumExp => Arity::AtLeast(1),
            _ => Arity::Exactly(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// Nonnegative and finite; a leading minus is a [`Expr::Neg`].
    Num(f64),
    Ident(String),
    Neg(Box<Expr>),
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Call { func: Builtin, args: Vec<Expr> },
}

impl Expr {
    pub fn num(v: f64) -> Self {
        Expr::Num(v)
    }

    pub fn ident(name: &str) -> Self {
        Expr::Ident(name.to_string())
    }

    pub fn neg(e: Expr) -> Self {
        Expr::Neg(Box::new(e))
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    pub fn call(func: Builtin, args: Vec<Expr>) -> Self {
        Expr::Call { func, args }
    }

    /// Identifiers in first-occurrence order, without repeats.
    pub fn identifiers(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        self.visit_idents(&mut |name| {
            if !out.contains(&name) {
                out.push(name);
            }
        });
        out
    }

    fn visit_idents<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match self {
            Expr::Num(_) => {}
            Expr::Ident(n) => f(n),
            Expr::Neg(e) => e.visit_idents(f),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.visit_idents(f);
                rhs.visit_idents(f);
            }
            Expr::Call { args, .. } => args.iter().for_each(|a| a.visit_idents(f)),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Ident(_) => 1,
            Expr::Neg(e) => 1 + e.depth(),
            Expr::Binary { lhs, rhs, .. } => 1 + lhs.depth().max(rhs.depth()),
            Expr::Call { args, .. } => 1 + args.iter().map(Expr::depth).max().unwrap_or(0),
        }
    }

    // atoms 5, power 4, negation 3, term 2, sum 1
    fn precedence(&self) -> u8 {
        match self {
            Expr::Num(_) | Expr::Ident(_) | Expr::Call { .. } => 5,
            Expr::Neg(_) => 3,
            Expr::Binary { op, .. } => op.precedence(),
        }
    }

    fn write_min(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "(")?;
            fmt::Display::fmt(self, f)?;
            write!(f, ")")
        } else {
            fmt::Display::fmt(self, f)
        }
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    if v == v.trunc() && v.abs() < 1e15 {
        write!(f, "{v}")
    } else {
        write!(f, "{v:?}")
    }
}

/// Prints with the fewest parentheses that reparse to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write_number(f, *v),
            Expr::Ident(n) => write!(f, "{n}"),
            Expr::Neg(e) => {
                write!(f, "-")?;
                e.write_min(f, 4)
            }
            Expr::Binary { op: BinOp::Pow, lhs, rhs } => {
                lhs.write_min(f, 5)?;
                write!(f, "^")?;
                rhs.write_min(f, 3)
            }
            Expr::Binary { op, lhs, rhs } => {
                let p = op.precedence();
                lhs.write_min(f, p)?;
                write!(f, " {} ", op.symbol())?;
                rhs.write_min(f, p + 1)
            }
            Expr::Call { func, args } => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

const IDENT_POOL: [&str; 8] = ["x", "y", "b1", "b2", "alpha", "eps_loc", "_t", "delta0"];

/// A random well-formed tree of depth at most `max_depth`.
pub fn random_expr<R: Rng + ?Sized>(rng: &mut R, max_depth: usize) -> Expr {
    if max_depth <= 1 || rng.random_bool(0.25) {
        return if rng.random_bool(0.5) {
            let v = match rng.random_range(0..3) {
                0 => rng.random_range(0..100) as f64,
                1 => rng.random_range(0.0..10.0),
                _ => rng.random_range(-12.0_f64..12.0).exp(),
            };
            Expr::Num(v)
        } else {
            Expr::ident(IDENT_POOL[rng.random_range(0..IDENT_POOL.len())])
        };
    }
    let d = max_depth - 1;
    match rng.random_range(0..8) {
        0 => Expr::neg(random_expr(rng, d)),
        1 => {
            let func = Builtin::ALL[rng.random_range(0..Builtin::ALL.len())];
            let n = match func.arity() {
                Arity::Exactly(k) => k,
                Arity::AtLeast(k) => rng.random_range(k..k + 3),
            };
            Expr::call(func, (0..n).map(|_| random_expr(rng, d)).collect())
        }
        k => {
            let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow, BinOp::Pow][k - 2];
            Expr::binary(op, random_expr(rng, d), random_expr(rng, d))
        }
    }
}
