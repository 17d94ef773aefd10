//! Truncated bivariate Taylor series in `(u, v)` with double-double
//! coefficients.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};

use num_rational::{BigRational, Ratio};
use num_traits::ToPrimitive;
use odeinv::expr::ExprKind;
use odeinv::ode::Scalar;
use odeinv::{Expr, Point2, Var};
use twofloat::TwoFloat;

pub const MAX: usize = 10;

fn idx(i: usize, j: usize) -> usize {
    (i + j) * (i + j + 1) / 2 + j
}

pub fn dd(v: f64) -> TwoFloat {
    TwoFloat::from(v)
}

/// Nearest double-double to a rational.
pub fn from_rational(c: &BigRational) -> TwoFloat {
    let hi = c.to_f64().unwrap();
    match BigRational::from_float(hi) {
        Some(h) => dd(hi) + (c - h).to_f64().unwrap(),
        None => dd(hi),
    }
}

/// Exact rational value of a double-double.
pub fn to_rational(v: TwoFloat) -> BigRational {
    BigRational::from_float(v.hi()).unwrap() + BigRational::from_float(v.lo()).unwrap()
}

/// `|a|^(1/q)` by Newton refinement of the `f64` root.
fn root(a: TwoFloat, q: i32) -> TwoFloat {
    let a = if a < dd(0.0) { -a } else { a };
    let mut y = dd(a.hi().powf(1.0 / f64::from(q)));
    for _ in 0..3 {
        y -= (y.powi(q) - a) / (dd(f64::from(q)) * y.powi(q - 1));
    }
    y
}

/// Coefficients of `u^i v^j` for `i + j <= deg`.
#[derive(Clone, Debug)]
pub struct Taylor {
    pub deg: usize,
    c: Vec<TwoFloat>,
}

impl Taylor {
    pub fn constant(v: TwoFloat, deg: usize) -> Taylor {
        let mut t = Taylor::zero(deg);
        t.c[0] = v;
        t
    }

    fn zero(deg: usize) -> Taylor {
        Taylor { deg, c: vec![dd(0.0); idx(0, deg) + 1] }
    }

    /// `value + u` or `value + v`.
    pub fn var(value: f64, second: bool, deg: usize) -> Taylor {
        let mut t = Taylor::constant(dd(value), deg);
        if deg > 0 {
            t.c[if second { idx(0, 1) } else { idx(1, 0) }] = dd(1.0);
        }
        t
    }

    pub fn get(&self, i: usize, j: usize) -> TwoFloat {
        if i + j <= self.deg { self.c[idx(i, j)] } else { dd(0.0) }
    }

    pub fn value(&self) -> TwoFloat {
        self.c[0]
    }

    pub fn truncate(&self, deg: usize) -> Taylor {
        let deg = deg.min(self.deg);
        Taylor { deg, c: self.c[..idx(0, deg) + 1].to_vec() }
    }

    fn terms(&self) -> impl Iterator<Item = (usize, usize, TwoFloat)> + '_ {
        (0..=self.deg).flat_map(move |k| (0..=k).map(move |j| (k - j, j, self.c[idx(k - j, j)])))
    }

    /// Partial derivative; one order of accuracy is lost.
    pub fn d(&self, second: bool) -> Taylor {
        let deg = self.deg.saturating_sub(1);
        let mut t = Taylor::zero(deg);
        for (i, j, c) in self.terms().filter(|&(i, j, _)| i + j >= 1 && i + j - 1 <= deg) {
            if second && j > 0 {
                t.c[idx(i, j - 1)] = c * j as f64;
            } else if !second && i > 0 {
                t.c[idx(i - 1, j)] = c * i as f64;
            }
        }
        t
    }

    pub fn scale(&self, s: TwoFloat) -> Taylor {
        Taylor { deg: self.deg, c: self.c.iter().map(|&v| v * s).collect() }
    }

    /// `self^r` with real odd roots of negative values.
    pub fn powr(&self, r: Ratio<i64>) -> Taylor {
        if r.is_integer() && *r.numer() >= 0 {
            return (0..*r.numer()).fold(Taylor::constant(dd(1.0), self.deg), |acc, _| acc * self.clone());
        }
        let b0 = self.value();
        let (p, q) = (*r.numer() as i32, *r.denom() as i32);
        assert!(b0 > dd(0.0) || q % 2 == 1, "even root of a negative value");
        let mut lead = root(b0, q).powi(p);
        if b0 < dd(0.0) && p % 2 != 0 {
            lead = -lead;
        }
        let mut h = self.scale(b0.recip());
        h.c[0] = dd(0.0);
        let rf = dd(f64::from(p)) / f64::from(q);
        let mut out = Taylor::constant(dd(1.0), self.deg);
        let mut term = Taylor::constant(dd(1.0), self.deg);
        let mut binom = dd(1.0);
        for k in 1..=self.deg {
            binom = binom * (rf - (k - 1) as f64) / k as f64;
            term = term * h.clone();
            out = out + term.scale(binom);
        }
        out.scale(lead)
    }

    /// `self(d[0], d[1])` for series `d` without constant terms.
    pub fn compose(&self, d: &[Taylor; 2]) -> Taylor {
        let deg = self.deg.min(d[0].deg).min(d[1].deg);
        let powers = |s: &Taylor| {
            let mut p = vec![Taylor::constant(dd(1.0), deg)];
            for _ in 0..deg {
                p.push(p.last().unwrap().clone() * s.truncate(deg));
            }
            p
        };
        let (pu, pv) = (powers(&d[0]), powers(&d[1]));
        let mut out = Taylor::zero(deg);
        for (i, j, c) in self.terms().filter(|&(i, j, _)| i + j <= deg) {
            out = out + (pu[i].clone() * pv[j].clone()).scale(c);
        }
        out
    }

    /// The polynomial `sum c_ij x^i y^j` with exact coefficients.
    pub fn to_expr(&self) -> Expr {
        self.terms()
            .map(|(i, j, c)| Expr::constant(to_rational(c)) * Expr::x().powi(i as i64) * Expr::y().powi(j as i64))
            .sum()
    }
}

impl Add for Taylor {
    type Output = Taylor;
    fn add(self, o: Taylor) -> Taylor {
        let deg = self.deg.min(o.deg);
        let mut t = self.truncate(deg);
        for (k, v) in t.c.iter_mut().enumerate() {
            *v += o.c[k];
        }
        t
    }
}

impl Sub for Taylor {
    type Output = Taylor;
    fn sub(self, o: Taylor) -> Taylor {
        self + -o
    }
}

impl Neg for Taylor {
    type Output = Taylor;
    fn neg(self) -> Taylor {
        self.scale(dd(-1.0))
    }
}

impl Mul for Taylor {
    type Output = Taylor;
    fn mul(self, o: Taylor) -> Taylor {
        let deg = self.deg.min(o.deg);
        let mut t = Taylor::zero(deg);
        for (i, j, a) in self.terms().filter(|&(i, j, a)| i + j <= deg && a != dd(0.0)) {
            for (k, l, b) in o.terms().filter(|&(k, l, _)| i + j + k + l <= deg) {
                t.c[idx(i + k, j + l)] += a * b;
            }
        }
        t
    }
}

impl Scalar for Taylor {
    fn from_int(n: i64) -> Taylor {
        Taylor::constant(dd(n as f64), MAX)
    }
}

/// Series of `e` around `p` to order `deg`; order 0 is plain evaluation.
pub fn expand(e: &Expr, p: Point2, deg: usize, memo: &mut HashMap<Expr, Taylor>) -> Taylor {
    if let Some(t) = memo.get(e) {
        return t.clone();
    }
    let t = match e.kind() {
        ExprKind::Const(c) => Taylor::constant(from_rational(c), deg),
        ExprKind::Var(Var::X) => Taylor::var(p.x, false, deg),
        ExprKind::Var(Var::Y) => Taylor::var(p.y, true, deg),
        ExprKind::Sum(ts) => ts.iter().fold(Taylor::constant(dd(0.0), deg), |acc, t| acc + expand(t, p, deg, memo)),
        ExprKind::Product(fs) => {
            fs.iter().fold(Taylor::constant(dd(1.0), deg), |acc, f| acc * expand(f, p, deg, memo))
        }
        ExprKind::Power(b, r) => expand(b, p, deg, memo).powr(*r),
    };
    memo.insert(e.clone(), t.clone());
    t
}

/// Inverse series of `g - g(0)`, whose linear part must be invertible.
pub fn revert(g: &[Taylor; 2]) -> [Taylor; 2] {
    let deg = g[0].deg.min(g[1].deg);
    let a = [[g[0].get(1, 0), g[0].get(0, 1)], [g[1].get(1, 0), g[1].get(0, 1)]];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let inv = [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]];
    let nonlinear = |s: &Taylor| {
        let mut t = s.truncate(deg);
        for k in 0..3.min(t.c.len()) {
            t.c[k] = dd(0.0);
        }
        t
    };
    let n = [nonlinear(&g[0]), nonlinear(&g[1])];
    let tau = [Taylor::var(0.0, false, deg), Taylor::var(0.0, true, deg)];
    let mut d = tau.clone();
    for _ in 0..=deg {
        let r = [tau[0].clone() - n[0].compose(&d), tau[1].clone() - n[1].compose(&d)];
        d = [
            r[0].scale(inv[0][0]) + r[1].scale(inv[0][1]),
            r[0].scale(inv[1][0]) + r[1].scale(inv[1][1]),
        ];
    }
    d
}
