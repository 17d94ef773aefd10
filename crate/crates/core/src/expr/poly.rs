use std::collections::{BTreeMap, HashMap};

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{Expr, ExprKind, Var};

/// Fully expanded polynomial in `x`, `y` with exact rational coefficients.
/// Keys are `(deg_x, deg_y)`; zero coefficients are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Poly {
    terms: BTreeMap<(u32, u32), BigRational>,
}

impl Poly {
    pub fn zero() -> Poly {
        Poly::default()
    }

    pub fn constant(c: BigRational) -> Poly {
        let mut p = Poly::zero();
        p.add_term((0, 0), c);
        p
    }

    pub fn monomial(c: BigRational, dx: u32, dy: u32) -> Poly {
        let mut p = Poly::zero();
        p.add_term((dx, dy), c);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|(a, b)| a + b).max()
    }

    pub fn coeff(&self, dx: u32, dy: u32) -> BigRational {
        self.terms.get(&(dx, dy)).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(u32, u32), &BigRational)> {
        self.terms.iter()
    }

    fn add_term(&mut self, k: (u32, u32), c: BigRational) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(k).or_insert_with(BigRational::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&k);
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(*k, c.clone());
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for ((a, b), c) in &self.terms {
            for ((d, e), f) in &other.terms {
                out.add_term((a + d, b + e), c * f);
            }
        }
        out
    }

    /// Expands `e` if it is a polynomial (only nonnegative integer powers).
    pub fn from_expr(e: &Expr) -> Option<Poly> {
        let mut memo = HashMap::new();
        from_memo(e, &mut memo)
    }

    pub fn to_expr(&self) -> Expr {
        Expr::sum(self.terms.iter().map(|((dx, dy), c)| {
            Expr::product([
                Expr::constant(c.clone()),
                Expr::x().powi(i64::from(*dx)),
                Expr::y().powi(i64::from(*dy)),
            ])
        }))
    }
}

fn from_memo(e: &Expr, memo: &mut HashMap<usize, Option<Poly>>) -> Option<Poly> {
    if let Some(p) = memo.get(&e.ptr()) {
        return p.clone();
    }
    let p = match e.kind() {
        ExprKind::Const(c) => Some(Poly::constant(c.clone())),
        ExprKind::Var(Var::X) => Some(Poly::monomial(BigRational::one(), 1, 0)),
        ExprKind::Var(Var::Y) => Some(Poly::monomial(BigRational::one(), 0, 1)),
        ExprKind::Sum(ts) => {
            let mut acc = Poly::zero();
            let mut ok = true;
            for t in ts {
                match from_memo(t, memo) {
                    Some(p) => acc = acc.add(&p),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            ok.then_some(acc)
        }
        ExprKind::Product(fs) => {
            let mut acc = Poly::constant(BigRational::one());
            let mut ok = true;
            for f in fs {
                match from_memo(f, memo) {
                    Some(p) => acc = acc.mul(&p),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            ok.then_some(acc)
        }
        ExprKind::Power(b, r) if r.is_integer() && b.as_const().is_some() => {
            super::normal::mk_pow(b.clone(), *r).as_const().map(|c| Poly::constant(c.clone()))
        }
        ExprKind::Power(b, r) if r.is_integer() && *r.numer() >= 0 => {
            from_memo(b, memo).map(|base| {
                let mut acc = Poly::constant(BigRational::one());
                for _ in 0..*r.numer() {
                    acc = acc.mul(&base);
                }
                acc
            })
        }
        ExprKind::Power(..) => None,
    };
    memo.insert(e.ptr(), p.clone());
    p
}
