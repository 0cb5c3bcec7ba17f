//! Recursive descent over
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-'? power
//! power  := atom ('^' factor)?
//! atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```

use super::ast::{BinOp, Builtin, Expr};
use super::DslError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(BinOp),
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentSpan {
    pub name: String,
    pub offset: usize,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, DslError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'+' => Tok::Op(BinOp::Add),
            b'-' => Tok::Op(BinOp::Sub),
            b'*' => Tok::Op(BinOp::Mul),
            b'/' => Tok::Op(BinOp::Div),
            b'^' => Tok::Op(BinOp::Pow),
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| DslError::Syntax {
                    offset: start,
                    message: format!("malformed number `{text}`"),
                })?;
                if !v.is_finite() {
                    return Err(DslError::Syntax { offset: start, message: format!("number `{text}` overflows") });
                }
                out.push((Tok::Num(v), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(DslError::Syntax { offset: start, message: format!("unexpected character `{ch}`") });
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    src_len: usize,
    idents: &'a mut Vec<IdentSpan>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    // end-of-input errors point at the last byte so the offset stays inside the text
    fn offset(&self) -> usize {
        self.toks[self.pos].1.min(self.src_len.saturating_sub(1))
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if t.0 != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, DslError> {
        Err(DslError::Syntax { offset: self.offset(), message: message.into() })
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.term()?;
        while let Tok::Op(op @ (BinOp::Add | BinOp::Sub)) = *self.peek() {
            self.bump();
            lhs = Expr::binary(op, lhs, self.term()?);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.factor()?;
        while let Tok::Op(op @ (BinOp::Mul | BinOp::Div)) = *self.peek() {
            self.bump();
            lhs = Expr::binary(op, lhs, self.factor()?);
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, DslError> {
        if *self.peek() == Tok::Op(BinOp::Sub) {
            self.bump();
            return Ok(Expr::neg(self.power()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, DslError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Op(BinOp::Pow) {
            self.bump();
            return Ok(Expr::binary(BinOp::Pow, base, self.factor()?));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, DslError> {
        match self.bump() {
            (Tok::Num(v), _) => Ok(Expr::Num(v)),
            (Tok::Ident(name), offset) => {
                if *self.peek() != Tok::LParen {
                    self.idents.push(IdentSpan { name: name.clone(), offset });
                    return Ok(Expr::Ident(name));
                }
                let func = Builtin::from_name(&name).ok_or(DslError::UnknownFunction { name: name.clone(), offset })?;
                self.bump();
                let mut args = vec![self.expr()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    args.push(self.expr()?);
                }
                self.expect_rparen()?;
                if !func.arity().accepts(args.len()) {
                    return Err(DslError::Arity {
                        name,
                        offset,
                        expected: func.arity().to_string(),
                        found: args.len(),
                    });
                }
                Ok(Expr::call(func, args))
            }
            (Tok::LParen, _) => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            (Tok::End, _) => self.error("unexpected end of input"),
            (t, offset) => {
                Err(DslError::Syntax { offset, message: format!("expected a number, name or `(`, found {}", describe(&t)) })
            }
        }
    }

    fn expect_rparen(&mut self) -> Result<(), DslError> {
        if *self.peek() == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `)`, found {}", describe(self.peek())))
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(n) => format!("`{n}`"),
        Tok::Op(op) => format!("`{}`", op.symbol()),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::End => "end of input".into(),
    }
}

/// Parses and also returns every bare identifier with its byte offset.
pub fn parse_expr_spanned(text: &str) -> Result<(Expr, Vec<IdentSpan>), DslError> {
    if text.trim().is_empty() {
        return Err(DslError::Syntax { offset: 0, message: "empty expression".into() });
    }
    let mut idents = Vec::new();
    let mut p = Parser { toks: lex(text)?, pos: 0, src_len: text.len(), idents: &mut idents };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.error(format!("unexpected {}", describe(p.peek())));
    }
    Ok((e, idents))
}

pub fn parse_expr(text: &str) -> Result<Expr, DslError> {
    parse_expr_spanned(text).map(|(e, _)| e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::random_expr;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn x() -> Expr {
        Expr::ident("x")
    }

    #[test]
    fn associativity_and_precedence() {
        let e = parse_expr("a - b - c").unwrap();
        assert_eq!(e, Expr::binary(BinOp::Sub, parse_expr("a - b").unwrap(), Expr::ident("c")));
        let p = parse_expr("2^3^2").unwrap();
        assert_eq!(p, Expr::binary(BinOp::Pow, Expr::num(2.0), parse_expr("3^2").unwrap()));
        assert_eq!(parse_expr("-x^2").unwrap(), Expr::neg(Expr::binary(BinOp::Pow, x(), Expr::num(2.0))));
        assert_eq!(parse_expr("2^-x").unwrap(), Expr::binary(BinOp::Pow, Expr::num(2.0), Expr::neg(x())));
        assert_eq!(parse_expr("1.5e-3").unwrap(), Expr::num(1.5e-3));
        assert_eq!(parse_expr(".5").unwrap(), Expr::num(0.5));
    }

    #[test]
    fn errors_carry_offsets() {
        let cases: [(&str, usize); 7] =
            [("1 + ", 3), ("(1 + 2", 5), ("1 $ 2", 2), ("1 2", 2), ("--x", 1), ("f(x)", 0), ("1..2", 0)];
        for (src, at) in cases {
            let e = parse_expr(src).unwrap_err();
            assert_eq!(e.offset(), Some(at), "{src}: {e}");
            assert!(at < src.len());
        }
        assert!(matches!(parse_expr("f(x)"), Err(DslError::UnknownFunction { .. })));
        assert!(matches!(parse_expr("exp(1, 2)"), Err(DslError::Arity { found: 2, .. })));
        assert!(parse_expr("logsumexp(1, 2, 3, 4)").is_ok());
        assert!(parse_expr("   ").is_err());
    }

    #[test]
    fn printing_uses_minimal_parentheses() {
        for (src, printed) in [
            ("(a + b) * c", "(a + b) * c"),
            ("a + (b * c)", "a + b * c"),
            ("a - (b - c)", "a - (b - c)"),
            ("(a^b)^c", "(a^b)^c"),
            ("a^(b^c)", "a^b^c"),
            ("(-a)^2", "(-a)^2"),
            ("-(-a)", "-(-a)"),
            ("-(a * b)", "-(a * b)"),
            ("a * -b", "a * -b"),
            ("logsumexp(0, 1, 2)", "logsumexp(0, 1, 2)"),
        ] {
            assert_eq!(parse_expr(src).unwrap().to_string(), printed);
        }
    }

    #[test]
    fn identifier_spans() {
        let (_, ids) = parse_expr_spanned("b1 + exp(gamma)").unwrap();
        assert_eq!(ids, vec![
            IdentSpan { name: "b1".into(), offset: 0 },
            IdentSpan { name: "gamma".into(), offset: 9 },
        ]);
    }

    #[test]
    fn random_trees_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let e = random_expr(&mut rng, 6);
            let printed = e.to_string();
            assert_eq!(parse_expr(&printed).unwrap(), e, "{printed}");
        }
    }
}
