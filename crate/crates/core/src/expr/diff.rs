use std::collections::HashMap;

use num_traits::{One, Zero};

use super::{Expr, ExprKind, Var};

/// Partial derivative `∂e/∂v`.
///
/// Powers use `d(b^r) = r b^(r-1) db` with `r` kept exact. Shared subtrees are
/// differentiated once.
pub fn diff(e: &Expr, v: Var) -> Expr {
    let mut memo = HashMap::new();
    diff_memo(&super::share(e), v, &mut memo)
}

fn diff_memo(e: &Expr, v: Var, memo: &mut HashMap<usize, Expr>) -> Expr {
    if let Some(d) = memo.get(&e.ptr()) {
        return d.clone();
    }
    let d = match e.kind() {
        ExprKind::Const(_) => Expr::zero(),
        ExprKind::Var(w) => {
            if *w == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        ExprKind::Sum(ts) => Expr::sum(ts.iter().map(|t| diff_memo(t, v, memo)).collect::<Vec<_>>()),
        ExprKind::Product(fs) => {
            let mut terms = Vec::with_capacity(fs.len());
            for (i, f) in fs.iter().enumerate() {
                let df = diff_memo(f, v, memo);
                if df.is_zero() {
                    continue;
                }
                let mut factors = fs.clone();
                factors[i] = df;
                terms.push(Expr::product(factors));
            }
            Expr::sum(terms)
        }
        ExprKind::Power(b, r) => {
            let db = diff_memo(b, v, memo);
            if db.is_zero() {
                Expr::zero()
            } else {
                let lowered = r - super::Exponent::one();
                let mut factors = vec![Expr::ratio(*r.numer(), *r.denom()), db];
                if !lowered.is_zero() {
                    factors.push(b.pow(lowered));
                }
                Expr::product(factors)
            }
        }
    };
    memo.insert(e.ptr(), d.clone());
    d
}

/// Replaces `x` by `sx` and `y` by `sy` everywhere in `e`.
pub fn substitute(e: &Expr, sx: &Expr, sy: &Expr) -> Expr {
    let mut memo = HashMap::new();
    subst_memo(&super::share(e), sx, sy, &mut memo)
}

fn subst_memo(e: &Expr, sx: &Expr, sy: &Expr, memo: &mut HashMap<usize, Expr>) -> Expr {
    if let Some(d) = memo.get(&e.ptr()) {
        return d.clone();
    }
    let out = match e.kind() {
        ExprKind::Const(_) => e.clone(),
        ExprKind::Var(Var::X) => sx.clone(),
        ExprKind::Var(Var::Y) => sy.clone(),
        ExprKind::Sum(ts) => Expr::sum(ts.iter().map(|t| subst_memo(t, sx, sy, memo)).collect::<Vec<_>>()),
        ExprKind::Product(fs) => {
            Expr::product(fs.iter().map(|f| subst_memo(f, sx, sy, memo)).collect::<Vec<_>>())
        }
        ExprKind::Power(b, r) => subst_memo(b, sx, sy, memo).pow(*r),
    };
    memo.insert(e.ptr(), out.clone());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{eval, parse, simplify, Point2};

    fn p(text: &str) -> Expr {
        simplify(&parse(text).unwrap())
    }

    #[test]
    fn constants_have_zero_derivative() {
        for c in ["0", "7", "-3/4", "2^(1/2)"] {
            assert!(diff(&p(c), Var::X).is_zero(), "{c}");
        }
    }

    #[test]
    fn power_rule() {
        assert_eq!(diff(&p("x^2*y"), Var::X), p("2*x*y"));
        assert_eq!(diff(&p("x^2*y"), Var::Y), p("x^2"));
    }

    #[test]
    fn fractional_power_chain_rule() {
        let l = p("1 + x^2");
        let d = diff(&l.pow(super::super::Exponent::new(1, 5)), Var::X);
        let expected = p("(1/5)*(1+x^2)^(-4/5)*2*x");
        assert_eq!(d, expected);
        let v = eval(&d, Point2::new(0.7, 0.0)).unwrap();
        let want = 0.2 * (1.49f64).powf(-0.8) * 1.4;
        assert!((v - want).abs() < 1e-14);
    }

    #[test]
    fn substitution_composes() {
        let e = p("x*y + y^3");
        let s = substitute(&e, &p("y"), &p("x"));
        assert_eq!(s, p("x*y + x^3"));
    }
}
