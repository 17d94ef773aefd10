use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use super::{normal, Exponent, Expr, ExprKind, Point2, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero (negative power of a vanishing base)")]
    DivisionByZero,
    #[error("even root of a negative number")]
    EvenRootOfNegative,
    #[error("non-finite intermediate value")]
    Overflow,
    #[error("value is not rational")]
    Irrational,
}

/// `b^r` under real-root semantics. Bases with `|b| <= min_base` raised to a
/// negative power count as a division by zero.
pub(crate) fn real_pow(b: f64, r: Exponent, min_base: f64) -> Result<f64, EvalError> {
    let (p, q) = (*r.numer(), *r.denom());
    if p < 0 && b.abs() <= min_base {
        return Err(EvalError::DivisionByZero);
    }
    let v = if q == 1 {
        match i32::try_from(p) {
            Ok(n) => b.powi(n),
            Err(_) => b.powf(p as f64),
        }
    } else if b < 0.0 {
        if q % 2 == 0 {
            return Err(EvalError::EvenRootOfNegative);
        }
        let mag = odd_root(-b, q).powf(p as f64);
        if p % 2 == 0 {
            mag
        } else {
            -mag
        }
    } else {
        odd_root(b, q).powf(p as f64)
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::Overflow)
    }
}

fn odd_root(b: f64, q: i64) -> f64 {
    match q {
        2 => b.sqrt(),
        3 => b.cbrt(),
        _ => b.powf(1.0 / q as f64),
    }
}

fn finite(v: f64) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::Overflow)
    }
}

/// Floating-point value of `e` at `p`.
pub fn eval(e: &Expr, p: Point2) -> Result<f64, EvalError> {
    eval_guarded(e, p, 0.0)
}

pub(crate) fn eval_guarded(e: &Expr, p: Point2, min_base: f64) -> Result<f64, EvalError> {
    let mut memo = HashMap::new();
    eval_memo(e, p, min_base, &mut memo)
}

fn eval_memo(
    e: &Expr,
    p: Point2,
    min_base: f64,
    memo: &mut HashMap<usize, f64>,
) -> Result<f64, EvalError> {
    if let Some(v) = memo.get(&e.ptr()) {
        return Ok(*v);
    }
    let v = match e.kind() {
        ExprKind::Const(c) => c.to_f64().ok_or(EvalError::Overflow)?,
        ExprKind::Var(Var::X) => p.x,
        ExprKind::Var(Var::Y) => p.y,
        ExprKind::Sum(ts) => {
            let mut acc = 0.0;
            for t in ts {
                acc += eval_memo(t, p, min_base, memo)?;
            }
            finite(acc)?
        }
        ExprKind::Product(fs) => {
            let mut acc = 1.0;
            for f in fs {
                acc *= eval_memo(f, p, min_base, memo)?;
            }
            finite(acc)?
        }
        ExprKind::Power(b, r) => real_pow(eval_memo(b, p, min_base, memo)?, *r, min_base)?,
    };
    memo.insert(e.ptr(), v);
    Ok(v)
}

/// Exact rational value of `e` at a rational point. Fractional powers succeed
/// only when the root is itself rational.
pub fn eval_exact(e: &Expr, x: &BigRational, y: &BigRational) -> Result<BigRational, EvalError> {
    let mut memo = HashMap::new();
    exact_memo(e, x, y, &mut memo)
}

fn exact_memo(
    e: &Expr,
    x: &BigRational,
    y: &BigRational,
    memo: &mut HashMap<usize, BigRational>,
) -> Result<BigRational, EvalError> {
    if let Some(v) = memo.get(&e.ptr()) {
        return Ok(v.clone());
    }
    let v = match e.kind() {
        ExprKind::Const(c) => c.clone(),
        ExprKind::Var(Var::X) => x.clone(),
        ExprKind::Var(Var::Y) => y.clone(),
        ExprKind::Sum(ts) => {
            let mut acc = BigRational::zero();
            for t in ts {
                acc += exact_memo(t, x, y, memo)?;
            }
            acc
        }
        ExprKind::Product(fs) => {
            let mut acc = BigRational::from_integer(BigInt::from(1));
            for f in fs {
                acc *= exact_memo(f, x, y, memo)?;
            }
            acc
        }
        ExprKind::Power(b, r) => {
            let bv = exact_memo(b, x, y, memo)?;
            if bv.is_zero() && *r.numer() < 0 {
                return Err(EvalError::DivisionByZero);
            }
            if bv < BigRational::zero() && r.denom() % 2 == 0 {
                return Err(EvalError::EvenRootOfNegative);
            }
            match normal::mk_pow(Expr::constant(bv), *r).as_const() {
                Some(c) => c.clone(),
                None => return Err(EvalError::Irrational),
            }
        }
    };
    memo.insert(e.ptr(), v.clone());
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn ev(text: &str, x: f64, y: f64) -> Result<f64, EvalError> {
        eval(&parse(text).unwrap(), Point2::new(x, y))
    }

    #[test]
    fn basic_values() {
        assert_eq!(ev("x*y", 2.0, 3.0).unwrap(), 6.0);
        assert!((ev("x^(1/5)", -32.0, 0.0).unwrap() + 2.0).abs() < 1e-14);
        assert_eq!(ev("x^(1/2)", -1.0, 0.0), Err(EvalError::EvenRootOfNegative));
        assert_eq!(ev("x^(-1)", 0.0, 1.0), Err(EvalError::DivisionByZero));
        assert_eq!(ev("x^400", 1e3, 0.0), Err(EvalError::Overflow));
    }

    #[test]
    fn real_root_sign_rule() {
        for k in 1..=4 {
            let v = ev(&format!("x^({k}/5)"), -3.0, 0.0).unwrap();
            let want = (-1f64).powi(k) * 3f64.powf(k as f64 / 5.0);
            assert!((v - want).abs() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn exact_rational_evaluation() {
        let e = parse("3*x*y^2 - 1/2 + (x/4)^(1/2)").unwrap();
        let one = BigRational::from_integer(1.into());
        let v = eval_exact(&e, &one, &one).unwrap();
        assert_eq!(v, BigRational::new(3.into(), 1.into()));
        let two = BigRational::from_integer(2.into());
        assert_eq!(eval_exact(&e, &two, &one), Err(EvalError::Irrational));
    }
}
