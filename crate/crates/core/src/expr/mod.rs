//! Symbolic expressions in the two plane coordinates `x` and `y`.
//!
//! An [`Expr`] is an immutable, reference-counted tree whose leaves are exact
//! rational constants and the variables `x`, `y`. Interior nodes are n-ary sums,
//! n-ary products and powers with an exact rational exponent. Division is a
//! power with exponent `-1`; there is no separate quotient node.
//!
//! Expressions built through the arithmetic operators, [`Expr::sum`],
//! [`Expr::product`] and [`Expr::pow`] are kept in a light normal form (flattened,
//! constants folded, like terms collected, equal bases merged). Raw trees, such
//! as those produced by the parser, can be brought into that form with
//! [`simplify`].
//!
//! Powers with an odd exponent denominator use real-root semantics:
//! `b^(p/q) = sign(b)^p * |b|^(p/q)`.

mod diff;
mod display;
mod equiv;
mod eval;
mod normal;
mod parse;
mod share;
mod poly;
mod tape;

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, Zero};

pub use diff::{diff, substitute};
pub use equiv::{equivalent_expr, EquivalenceOptions, SAMPLE_BOX};
pub use eval::{eval, eval_exact, EvalError};
pub use normal::simplify;
pub use parse::{parse, ParseError};
pub use poly::Poly;
pub use tape::Tape;
pub(crate) use share::share;

/// Exponent of a power node.
pub type Exponent = Ratio<i64>;

/// One of the two plane coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    X,
    Y,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
        }
    }
}

/// A base point of the plane.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Debug)]
pub enum ExprKind {
    Const(BigRational),
    Var(Var),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Power(Expr, Exponent),
}

struct Node {
    kind: ExprKind,
    hash: u64,
}

#[derive(Clone)]
pub struct Expr(Arc<Node>);

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn mix(h: u64, v: u64) -> u64 {
    let mut h = h;
    for b in v.to_le_bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn hash_bigint(h: u64, v: &BigInt) -> u64 {
    v.to_signed_bytes_le()
        .iter()
        .fold(mix(h, 0x5a), |acc, b| mix(acc, u64::from(*b)))
}

fn structural_hash(kind: &ExprKind) -> u64 {
    match kind {
        ExprKind::Const(c) => hash_bigint(hash_bigint(mix(FNV_OFFSET, 1), c.numer()), c.denom()),
        ExprKind::Var(v) => mix(FNV_OFFSET, 2 + *v as u64),
        ExprKind::Sum(ts) => ts.iter().fold(mix(FNV_OFFSET, 4), |h, t| mix(h, t.0.hash)),
        ExprKind::Product(fs) => fs.iter().fold(mix(FNV_OFFSET, 5), |h, f| mix(h, f.0.hash)),
        ExprKind::Power(b, r) => mix(
            mix(mix(mix(FNV_OFFSET, 6), b.0.hash), *r.numer() as u64),
            *r.denom() as u64,
        ),
    }
}

impl Expr {
    /// Wraps a node without any normalization.
    pub fn raw(kind: ExprKind) -> Expr {
        let hash = structural_hash(&kind);
        Expr(Arc::new(Node { kind, hash }))
    }

    pub fn kind(&self) -> &ExprKind {
        &self.0.kind
    }

    pub fn constant(c: BigRational) -> Expr {
        Expr::raw(ExprKind::Const(c))
    }

    pub fn int(n: i64) -> Expr {
        Expr::constant(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(n: i64, d: i64) -> Expr {
        Expr::constant(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn var(v: Var) -> Expr {
        Expr::raw(ExprKind::Var(v))
    }

    pub fn x() -> Expr {
        Expr::var(Var::X)
    }

    pub fn y() -> Expr {
        Expr::var(Var::Y)
    }

    /// Normalized sum of `terms`.
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        normal::mk_sum(terms.into_iter().collect())
    }

    /// Normalized product of `factors`.
    pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        normal::mk_product(factors.into_iter().collect())
    }

    /// Normalized power `self^r`.
    pub fn pow(&self, r: Exponent) -> Expr {
        normal::mk_pow(self.clone(), r)
    }

    pub fn powi(&self, n: i64) -> Expr {
        self.pow(Exponent::from_integer(n))
    }

    pub fn recip(&self) -> Expr {
        self.powi(-1)
    }

    pub fn scale(&self, c: i64) -> Expr {
        Expr::product([Expr::int(c), self.clone()])
    }

    pub fn as_const(&self) -> Option<&BigRational> {
        match self.kind() {
            ExprKind::Const(c) => Some(c),
            _ => None,
        }
    }

    /// True when the expression is the literal constant zero.
    pub fn is_zero(&self) -> bool {
        self.as_const().is_some_and(Zero::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.as_const().is_some_and(One::is_one)
    }

    /// Exact zero test: the normal form is the constant zero, or the expression
    /// is a polynomial whose full expansion vanishes. A nonzero exact value at
    /// a rational probe point short-circuits the expansion.
    pub fn is_identically_zero(&self) -> bool {
        if simplify(self).is_zero() {
            return true;
        }
        if !self.is_polynomial() {
            return false;
        }
        let probes = [(3, 7, -5, 11), (-2, 13, 9, 17)];
        for (a, b, c, d) in probes {
            let x = BigRational::new(a.into(), b.into());
            let y = BigRational::new(c.into(), d.into());
            if eval_exact(self, &x, &y).is_ok_and(|v| !v.is_zero()) {
                return false;
            }
        }
        Poly::from_expr(self).is_some_and(|p| p.is_zero())
    }

    /// True when only nonnegative integer powers of non-constant bases occur.
    pub fn is_polynomial(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.ptr()) {
                continue;
            }
            match e.kind() {
                ExprKind::Const(_) | ExprKind::Var(_) => {}
                ExprKind::Sum(ts) | ExprKind::Product(ts) => stack.extend(ts.iter().cloned()),
                ExprKind::Power(b, r) => {
                    if !r.is_integer() {
                        return false;
                    }
                    if b.as_const().is_none() {
                        if *r.numer() < 0 {
                            return false;
                        }
                        stack.push(b.clone());
                    }
                }
            }
        }
        true
    }

    /// Number of distinct nodes reachable from this expression.
    pub fn dag_size(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.ptr()) {
                continue;
            }
            match e.kind() {
                ExprKind::Sum(cs) | ExprKind::Product(cs) => stack.extend(cs.iter().cloned()),
                ExprKind::Power(b, _) => stack.push(b.clone()),
                _ => {}
            }
        }
        seen.len()
    }

    pub(crate) fn ptr(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    fn rank(&self) -> u8 {
        match self.kind() {
            ExprKind::Const(_) => 0,
            ExprKind::Var(_) => 1,
            ExprKind::Power(..) => 2,
            ExprKind::Product(_) => 3,
            ExprKind::Sum(_) => 4,
        }
    }

    /// Leading rational coefficient and the remaining factor, if any.
    pub(crate) fn split_coeff(&self) -> (BigRational, Option<Expr>) {
        match self.kind() {
            ExprKind::Const(c) => (c.clone(), None),
            ExprKind::Product(fs) => match fs.first().and_then(Expr::as_const) {
                Some(c) => {
                    let rest = match fs.len() {
                        1 => None,
                        2 => Some(fs[1].clone()),
                        _ => Some(Expr::raw(ExprKind::Product(fs[1..].to_vec()))),
                    };
                    (c.clone(), rest)
                }
                None => (BigRational::one(), Some(self.clone())),
            },
            _ => (BigRational::one(), Some(self.clone())),
        }
    }

    pub(crate) fn has_negative_coeff(&self) -> bool {
        self.split_coeff().0.is_negative()
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Expr {}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Total structural order. Constants sort first, then variables; composite
/// nodes compare by structural hash before falling back to their children.
impl Ord for Expr {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        let by_rank = self.rank().cmp(&other.rank());
        if by_rank != Ordering::Equal {
            return by_rank;
        }
        match (self.kind(), other.kind()) {
            (ExprKind::Const(a), ExprKind::Const(b)) => a.cmp(b),
            (ExprKind::Var(a), ExprKind::Var(b)) => a.cmp(b),
            _ => self.0.hash.cmp(&other.0.hash).then_with(|| match (self.kind(), other.kind()) {
                (ExprKind::Power(b1, r1), ExprKind::Power(b2, r2)) => {
                    b1.cmp(b2).then_with(|| r1.cmp(r2))
                }
                (ExprKind::Sum(a), ExprKind::Sum(b)) | (ExprKind::Product(a), ExprKind::Product(b)) => {
                    a.cmp(b)
                }
                _ => Ordering::Equal,
            }),
        }
    }
}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            ExprKind::Const(c) => write!(f, "Const({c})"),
            ExprKind::Var(v) => write!(f, "Var({})", v.name()),
            ExprKind::Sum(ts) => f.debug_tuple("Sum").field(ts).finish(),
            ExprKind::Product(fs) => f.debug_tuple("Product").field(fs).finish(),
            ExprKind::Power(b, r) => write!(f, "Power({b:?}, {r})"),
        }
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::int(n)
    }
}

impl From<Var> for Expr {
    fn from(v: Var) -> Self {
        Expr::var(v)
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl std::ops::$tr<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl std::ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self.clone(), rhs.clone())
            }
        }
        impl std::ops::$tr<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, rhs.clone())
            }
        }
        impl std::ops::$tr<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self.clone(), rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| Expr::sum([a, b]));
binop!(Sub, sub, |a, b| Expr::sum([a, b.scale(-1)]));
binop!(Mul, mul, |a, b| Expr::product([a, b]));
binop!(Div, div, |a, b| Expr::product([a, b.recip()]));

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.scale(-1)
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.scale(-1)
    }
}

impl std::iter::Sum for Expr {
    fn sum<I: Iterator<Item = Expr>>(iter: I) -> Expr {
        Expr::sum(iter)
    }
}

impl std::iter::Product for Expr {
    fn product<I: Iterator<Item = Expr>>(iter: I) -> Expr {
        Expr::product(iter)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        display::write_expr(f, self)
    }
}
