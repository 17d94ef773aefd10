//! Light normal form: flattening, constant folding, like-term collection and
//! merging of equal bases. Sums of several terms are never expanded against
//! each other; exact polynomial expansion lives in [`super::Poly`].

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, Zero};

use super::{Exponent, Expr, ExprKind};

pub(crate) fn mk_sum(terms: Vec<Expr>) -> Expr {
    let mut flat = Vec::with_capacity(terms.len());
    for t in terms {
        match t.kind() {
            ExprKind::Sum(cs) => flat.extend(cs.iter().cloned()),
            _ => flat.push(t),
        }
    }

    let mut constant = BigRational::zero();
    let mut collected: BTreeMap<Expr, BigRational> = BTreeMap::new();
    for t in flat {
        let (c, rest) = t.split_coeff();
        match rest {
            None => constant += c,
            Some(r) => {
                let slot = collected.entry(r).or_insert_with(BigRational::zero);
                *slot += c;
            }
        }
    }

    let mut out = Vec::with_capacity(collected.len() + 1);
    if !constant.is_zero() {
        out.push(Expr::constant(constant));
    }
    for (rest, c) in collected {
        if c.is_zero() {
            continue;
        }
        out.push(attach_coeff(c, rest));
    }
    match out.len() {
        0 => Expr::zero(),
        1 => out.pop().unwrap(),
        _ => Expr::raw(ExprKind::Sum(out)),
    }
}

fn attach_coeff(c: BigRational, rest: Expr) -> Expr {
    if c.is_one() {
        return rest;
    }
    let mut fs = vec![Expr::constant(c)];
    match rest.kind() {
        ExprKind::Product(inner) => fs.extend(inner.iter().cloned()),
        _ => fs.push(rest),
    }
    Expr::raw(ExprKind::Product(fs))
}

pub(crate) fn mk_product(factors: Vec<Expr>) -> Expr {
    let mut constant = BigRational::one();
    let mut bases: BTreeMap<Expr, Exponent> = BTreeMap::new();
    let mut stack = factors;
    while let Some(f) = stack.pop() {
        match f.kind() {
            ExprKind::Const(c) => {
                if c.is_zero() {
                    return Expr::zero();
                }
                constant *= c;
            }
            ExprKind::Product(fs) => stack.extend(fs.iter().cloned()),
            ExprKind::Power(b, r) => {
                *bases.entry(b.clone()).or_insert_with(Exponent::zero) += *r;
            }
            _ => {
                *bases.entry(f).or_insert_with(Exponent::zero) += Exponent::one();
            }
        }
    }

    let mut out: Vec<Expr> = Vec::with_capacity(bases.len() + 1);
    let mut refold = Vec::new();
    for (b, r) in bases {
        if r.is_zero() {
            continue;
        }
        let p = mk_pow(b.clone(), r);
        let stays = match p.kind() {
            ExprKind::Const(_) | ExprKind::Product(_) => false,
            ExprKind::Power(pb, _) => pb == &b,
            _ => true,
        };
        if stays {
            out.push(p);
        } else {
            refold.push(p);
        }
    }
    if !refold.is_empty() {
        refold.extend(out);
        refold.push(Expr::constant(constant));
        return mk_product(refold);
    }

    out.sort();
    if out.is_empty() {
        return Expr::constant(constant);
    }
    if constant.is_one() {
        if out.len() == 1 {
            return out.pop().unwrap();
        }
        return Expr::raw(ExprKind::Product(out));
    }
    if out.len() == 1 {
        if let ExprKind::Sum(ts) = out[0].kind() {
            let scaled = ts
                .iter()
                .map(|t| {
                    let (c, rest) = t.split_coeff();
                    let c = c * &constant;
                    match rest {
                        None => Expr::constant(c),
                        Some(r) => attach_coeff(c, r),
                    }
                })
                .collect();
            return mk_sum(scaled);
        }
    }
    let mut fs = Vec::with_capacity(out.len() + 1);
    fs.push(Expr::constant(constant));
    fs.extend(out);
    Expr::raw(ExprKind::Product(fs))
}

pub(crate) fn mk_pow(base: Expr, r: Exponent) -> Expr {
    if r.is_zero() {
        return Expr::one();
    }
    if r.is_one() {
        return base;
    }
    match base.kind() {
        ExprKind::Const(c) => match const_pow(c, r) {
            Some(v) => Expr::constant(v),
            None => Expr::raw(ExprKind::Power(base.clone(), r)),
        },
        // Real-root semantics make (b^s)^r = b^(s r) and (f g)^r = f^r g^r
        // exact whenever the outer denominator is odd.
        ExprKind::Power(b, s) if r.denom().is_odd() => mk_pow(b.clone(), s * r),
        ExprKind::Product(fs) if r.denom().is_odd() => {
            mk_product(fs.iter().map(|f| mk_pow(f.clone(), r)).collect())
        }
        _ => Expr::raw(ExprKind::Power(base, r)),
    }
}

/// Exact `c^r`, or `None` when the result is not rational or not defined.
fn const_pow(c: &BigRational, r: Exponent) -> Option<BigRational> {
    let (p, q) = (*r.numer(), *r.denom());
    if c.is_zero() {
        return if p > 0 { Some(BigRational::zero()) } else { None };
    }
    if c.is_one() {
        return Some(BigRational::one());
    }
    let root = if q == 1 {
        c.clone()
    } else {
        if c.is_negative() && q % 2 == 0 {
            return None;
        }
        let q32 = u32::try_from(q).ok()?;
        let n = exact_root(c.numer(), q32)?;
        let d = exact_root(c.denom(), q32)?;
        BigRational::new(n, d)
    };
    let e = u32::try_from(p.unsigned_abs()).ok()?;
    if e > 4096 {
        return None;
    }
    let v: BigRational = Pow::pow(&root, e);
    if p < 0 {
        Some(v.recip())
    } else {
        Some(v)
    }
}

fn exact_root(n: &BigInt, q: u32) -> Option<BigInt> {
    let r = n.nth_root(q);
    if Pow::pow(&r, q) == *n {
        Some(r)
    } else {
        None
    }
}

/// Rebuilds `e` bottom-up through the normalizing constructors.
///
/// The result evaluates to the same value wherever `e` is defined, and
/// `simplify(simplify(e)) == simplify(e)` structurally.
pub fn simplify(e: &Expr) -> Expr {
    let mut memo = HashMap::new();
    simplify_memo(&super::share(e), &mut memo)
}

fn simplify_memo(e: &Expr, memo: &mut HashMap<usize, Expr>) -> Expr {
    if let Some(done) = memo.get(&e.ptr()) {
        return done.clone();
    }
    let out = match e.kind() {
        ExprKind::Const(_) | ExprKind::Var(_) => e.clone(),
        ExprKind::Sum(ts) => mk_sum(ts.iter().map(|t| simplify_memo(t, memo)).collect()),
        ExprKind::Product(fs) => mk_product(fs.iter().map(|f| simplify_memo(f, memo)).collect()),
        ExprKind::Power(b, r) => mk_pow(simplify_memo(b, memo), *r),
    };
    memo.insert(e.ptr(), out.clone());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Var};

    fn s(text: &str) -> Expr {
        simplify(&parse(text).unwrap())
    }

    #[test]
    fn zero_times_anything_is_zero() {
        assert!(s("0*(x+y^(1/5))").is_zero());
    }

    #[test]
    fn collects_like_terms() {
        let e = s("x + x");
        assert_eq!(e, Expr::product([Expr::int(2), Expr::var(Var::X)]));
        assert!(s("x*y - y*x").is_zero());
        assert!(s("(x+y) - (y+x)").is_zero());
    }

    #[test]
    fn merges_powers() {
        assert_eq!(s("x^2*x^(-2)"), Expr::one());
        assert_eq!(s("x*x*x"), Expr::x().powi(3));
        assert_eq!(s("(x^2)^(1/3)"), Expr::x().pow(Exponent::new(2, 3)));
        // even denominators are not pushed through
        assert_eq!(
            s("(x^2)^(1/2)"),
            Expr::raw(ExprKind::Power(Expr::x().powi(2), Exponent::new(1, 2)))
        );
    }

    #[test]
    fn exact_constant_roots() {
        assert_eq!(s("(-32)^(1/5)"), Expr::int(-2));
        assert_eq!(s("(4/9)^(1/2)"), Expr::ratio(2, 3));
        assert!(matches!(s("2^(1/2)").kind(), ExprKind::Power(..)));
        assert!(matches!(s("(-4)^(1/2)").kind(), ExprKind::Power(..)));
    }

    #[test]
    fn constant_distributes_over_single_sum() {
        assert_eq!(s("2*(x+1)"), s("2*x + 2"));
    }

    #[test]
    fn idempotent_on_samples() {
        for text in ["x*y + 3*x*y^2 - 1/2", "(x+y)^3*(x-y)^(-1)", "(1+x^2)^(1/5)*x - x*(x^2+1)^(1/5)"] {
            let once = s(text);
            assert_eq!(simplify(&once), once);
        }
    }
}
