//! Recursive-descent parser for the coefficient expression language.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := signed (('*' | '/') signed)*
//! signed := '-' signed | factor
//! factor := base ('^' exponent)?
//! base   := 'x' | 'y' | number | '(' expr ')'
//! number := integer | integer '/' positive-integer | decimal
//! exponent := signed-rational | '(' expr ')'      -- must fold to a rational
//! ```
//!
//! A literal `p/q` binds as one number unless it is immediately followed by
//! `^`, in which case `^` takes precedence as usual. Decimals become exact
//! rationals. The parser returns a raw tree; see [`super::simplify`].

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use super::{normal, Exponent, Expr, ExprKind, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at position {pos} (only x and y are allowed)")]
    UnknownIdentifier { pos: usize, name: String },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::Syntax { pos, .. } | ParseError::UnknownIdentifier { pos, .. } => *pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(BigInt),
    Decimal(BigRational),
    Var(Var),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'+' => out.push((Tok::Plus, start)),
            b'-' => out.push((Tok::Minus, start)),
            b'*' => out.push((Tok::Star, start)),
            b'/' => out.push((Tok::Slash, start)),
            b'^' => out.push((Tok::Caret, start)),
            b'(' => out.push((Tok::LParen, start)),
            b')' => out.push((Tok::RParen, start)),
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let int_part = &text[start..i];
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    let frac_start = i;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    let frac = &text[frac_start..i];
                    if int_part.is_empty() && frac.is_empty() {
                        return Err(ParseError::Syntax { pos: start, msg: "lone '.'".into() });
                    }
                    let digits = format!("{int_part}{frac}");
                    let numer: BigInt = digits.parse().expect("ascii digits");
                    let denom = num_traits::pow(BigInt::from(10), frac.len());
                    out.push((Tok::Decimal(BigRational::new(numer, denom)), start));
                } else {
                    out.push((Tok::Int(int_part.parse().expect("ascii digits")), start));
                }
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                match &text[start..i] {
                    "x" => out.push((Tok::Var(Var::X), start)),
                    "y" => out.push((Tok::Var(Var::Y), start)),
                    name => {
                        return Err(ParseError::UnknownIdentifier { pos: start, name: name.to_string() })
                    }
                }
                continue;
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax { pos: start, msg: format!("unexpected character '{ch}'") });
            }
        }
        i += 1;
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.at + k).min(self.toks.len() - 1)].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax { pos: self.pos(), msg: msg.into() })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    terms.push(self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    let t = self.term()?;
                    terms.push(negate(t));
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::raw(ExprKind::Sum(terms)) })
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut factors = vec![self.signed()?];
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    factors.push(self.signed()?);
                }
                Tok::Slash => {
                    self.bump();
                    let d = self.signed()?;
                    factors.push(reciprocal(d));
                }
                _ => break,
            }
        }
        Ok(if factors.len() == 1 { factors.pop().unwrap() } else { Expr::raw(ExprKind::Product(factors)) })
    }

    fn signed(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(negate(self.signed()?));
        }
        self.factor()
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.base()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let r = self.exponent()?;
            return Ok(Expr::raw(ExprKind::Power(base, r)));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Var(v) => {
                self.bump();
                Ok(Expr::var(v))
            }
            Tok::Int(n) => {
                self.bump();
                // `p/q` literal, unless the denominator is raised to a power.
                if *self.peek() == Tok::Slash && *self.peek_at(2) != Tok::Caret {
                    if let Tok::Int(d) = self.peek_at(1).clone() {
                        if d.is_zero() {
                            self.bump();
                            return self.err("zero denominator in rational literal");
                        }
                        self.bump();
                        self.bump();
                        return Ok(Expr::constant(BigRational::new(n, d)));
                    }
                }
                Ok(Expr::constant(BigRational::from_integer(n)))
            }
            Tok::Decimal(r) => {
                self.bump();
                Ok(Expr::constant(r))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return self.err("expected ')'");
                }
                self.bump();
                Ok(e)
            }
            Tok::End => self.err("unexpected end of input"),
            t => self.err(format!("unexpected token {t:?}")),
        }
    }

    fn exponent(&mut self) -> Result<Exponent, ParseError> {
        let pos = self.pos();
        let value = if *self.peek() == Tok::LParen {
            let e = self.base()?;
            match normal::simplify(&e).as_const() {
                Some(c) => c.clone(),
                None => return Err(ParseError::Syntax { pos, msg: "exponent must be a rational constant".into() }),
            }
        } else {
            let mut neg = false;
            if *self.peek() == Tok::Minus {
                self.bump();
                neg = true;
            }
            let v = match self.bump() {
                Tok::Int(n) => {
                    if *self.peek() == Tok::Slash {
                        if let Tok::Int(d) = self.peek_at(1).clone() {
                            if d.is_zero() {
                                return Err(ParseError::Syntax { pos, msg: "zero denominator in exponent".into() });
                            }
                            self.bump();
                            self.bump();
                            BigRational::new(n, d)
                        } else {
                            BigRational::from_integer(n)
                        }
                    } else {
                        BigRational::from_integer(n)
                    }
                }
                Tok::Decimal(r) => r,
                _ => return Err(ParseError::Syntax { pos, msg: "expected a rational exponent".into() }),
            };
            if neg {
                -v
            } else {
                v
            }
        };
        match (value.numer().to_i64(), value.denom().to_i64()) {
            (Some(n), Some(d)) => Ok(Exponent::new(n, d)),
            _ => Err(ParseError::Syntax { pos, msg: "exponent too large".into() }),
        }
    }
}

fn negate(e: Expr) -> Expr {
    match e.kind() {
        ExprKind::Const(c) => Expr::constant(-c),
        _ => Expr::raw(ExprKind::Product(vec![Expr::int(-1), e])),
    }
}

fn reciprocal(e: Expr) -> Expr {
    match e.kind() {
        ExprKind::Const(c) if !c.is_zero() => Expr::constant(c.recip()),
        _ => Expr::raw(ExprKind::Power(e, Exponent::from_integer(-1))),
    }
}

/// Parses `text` into a raw expression tree.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, at: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.err("unexpected trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_literal() {
        assert_eq!(parse("0").unwrap(), Expr::zero());
    }

    #[test]
    fn power_node() {
        let e = parse("y^2").unwrap();
        match e.kind() {
            ExprKind::Power(b, r) => {
                assert_eq!(*b, Expr::y());
                assert_eq!(*r, Exponent::from_integer(2));
            }
            other => panic!("expected power, got {other:?}"),
        }
    }

    #[test]
    fn sum_with_exact_rational() {
        let e = parse("3*x*y^2 - 1/2").unwrap();
        let ExprKind::Sum(ts) = e.kind() else { panic!("expected sum") };
        assert_eq!(ts.len(), 2);
        let ExprKind::Product(fs) = ts[0].kind() else { panic!("expected product") };
        assert_eq!(fs[0], Expr::int(3));
        assert_eq!(fs[1], Expr::x());
        assert_eq!(fs[2], Expr::raw(ExprKind::Power(Expr::y(), Exponent::from_integer(2))));
        assert_eq!(ts[1], Expr::ratio(-1, 2));
    }

    #[test]
    fn decimals_are_exact() {
        assert_eq!(parse("0.25").unwrap(), Expr::ratio(1, 4));
        assert_eq!(parse("1.5").unwrap(), Expr::ratio(3, 2));
    }

    #[test]
    fn exponent_forms() {
        for text in ["x^(1/5)", "x^1/5", "x^0.2"] {
            match parse(text).unwrap().kind() {
                ExprKind::Power(_, r) => assert_eq!(*r, Exponent::new(1, 5), "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        match parse("x^-2").unwrap().kind() {
            ExprKind::Power(_, r) => assert_eq!(*r, Exponent::from_integer(-2)),
            other => panic!("{other:?}"),
        }
        assert!(parse("x^(y)").is_err());
    }

    #[test]
    fn literal_yields_to_power() {
        let e = normal::simplify(&parse("2/3^2").unwrap());
        assert_eq!(e, Expr::ratio(2, 9));
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(
            parse("x + sin(y)").unwrap_err(),
            ParseError::UnknownIdentifier { pos: 4, name: "sin".into() }
        );
        assert_eq!(parse("x + * y").unwrap_err().position(), 4);
        assert_eq!(parse("(x + y").unwrap_err().position(), 6);
        assert!(matches!(parse("x $ y"), Err(ParseError::Syntax { pos: 2, .. })));
        assert!(parse("").is_err());
    }
}
