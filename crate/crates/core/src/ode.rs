//! Cubic second-order ODEs, planar point maps and the action of point maps on
//! equations.
//!
//! Under `(X, Y) = (φ(x, y), ψ(x, y))` a solution with slope `p` acquires the
//! slope `P = (ψx + ψy p) / (φx + φy p)`, and
//!
//! ```text
//! Y'' = N(p) / (φx + φy p)^3
//! N(p) = (ψxx + 2ψxy p + ψyy p²)(φx + φy p) − (ψx + ψy p)(φxx + 2φxy p + φyy p²) + Δ·F(p)
//! ```
//!
//! with `Δ = φx ψy − φy ψx` and `F(p) = a0 + a1 p + a2 p² + a3 p³`. Inverting the
//! Möbius relation `p = (ψx − φx P) / (φy P − ψy)` and clearing denominators
//! gives `Y'' = −Σ n_k (ψx − φx P)^k (φy P − ψy)^(3−k) / Δ³`, which is again cubic
//! in `P`. The coefficients are finally composed with the inverse map.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::expr::{diff, eval, parse, simplify, substitute, EvalError, Expr, Point2, Tape, Var};
use crate::{Error, Result};

/// Coordinate rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Domain {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Domain> {
        let d = Domain { x0, x1, y0, y1 };
        if !(x0.is_finite() && x1.is_finite() && y0.is_finite() && y1.is_finite()) || x0 >= x1 || y0 >= y1 {
            return Err(Error::DomainMismatch(format!("degenerate rectangle {d}")));
        }
        Ok(d)
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    /// Node `(i, j)` of an `n × n` lattice; `i` runs along `x`.
    pub fn node(&self, n: usize, i: usize, j: usize) -> Point2 {
        let t = |k: usize| if n <= 1 { 0.5 } else { k as f64 / (n - 1) as f64 };
        Point2::new(self.x0 + (self.x1 - self.x0) * t(i), self.y0 + (self.y1 - self.y0) * t(j))
    }

    /// Row-major lattice points, `x` varying fastest.
    pub fn grid(&self, n: usize) -> Vec<Point2> {
        (0..n).flat_map(|j| (0..n).map(move |i| (i, j))).map(|(i, j)| self.node(n, i, j)).collect()
    }

    /// Smallest rectangle containing all `points`, widened by `margin` on each side.
    pub fn bounding(points: &[Point2], margin: f64) -> Result<Domain> {
        let mut d = Domain { x0: f64::INFINITY, x1: f64::NEG_INFINITY, y0: f64::INFINITY, y1: f64::NEG_INFINITY };
        for p in points {
            d.x0 = d.x0.min(p.x);
            d.x1 = d.x1.max(p.x);
            d.y0 = d.y0.min(p.y);
            d.y1 = d.y1.max(p.y);
        }
        Domain::new(d.x0 - margin, d.x1 + margin, d.y0 - margin, d.y1 + margin)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}] x [{}, {}]", self.x0, self.x1, self.y0, self.y1)
    }
}

/// `y'' = a3 y'^3 + a2 y'^2 + a1 y' + a0`; `coeffs[k]` multiplies `y'^k`.
///
/// The section of the equation is `p ↦ (p, a0, a1, a2, a3)`, so the fiber
/// coordinates `u1..u4` correspond to `a0..a3`.
#[derive(Clone, Debug, PartialEq)]
pub struct CubicOde {
    coeffs: [Expr; 4],
}

impl CubicOde {
    pub fn new(a0: Expr, a1: Expr, a2: Expr, a3: Expr) -> CubicOde {
        CubicOde { coeffs: [a0, a1, a2, a3].map(|e| simplify(&e)) }
    }

    pub fn from_array(coeffs: [Expr; 4]) -> CubicOde {
        let [a0, a1, a2, a3] = coeffs;
        CubicOde::new(a0, a1, a2, a3)
    }

    /// Parses the four coefficients `a0..a3`.
    pub fn from_strs(texts: [&str; 4]) -> Result<CubicOde> {
        let [a0, a1, a2, a3] = texts;
        Ok(CubicOde::new(parse(a0)?, parse(a1)?, parse(a2)?, parse(a3)?))
    }

    pub fn zero() -> CubicOde {
        CubicOde::from_array([Expr::zero(), Expr::zero(), Expr::zero(), Expr::zero()])
    }

    pub fn coeff(&self, k: usize) -> &Expr {
        &self.coeffs[k]
    }

    pub fn coeffs(&self) -> &[Expr; 4] {
        &self.coeffs
    }

    /// Right-hand side `Σ a_k(x, y) p^k`.
    pub fn rhs(&self, at: Point2, slope: f64) -> std::result::Result<f64, EvalError> {
        let mut acc = 0.0;
        for k in (0..4).rev() {
            acc = acc * slope + eval(&self.coeffs[k], at)?;
        }
        Ok(acc)
    }

    /// Reads the text format: `a0 = <expr>` through `a3 = <expr>`, one per line.
    /// Blank lines and `#` comments are ignored.
    pub fn parse_file(text: &str, path: &str) -> Result<CubicOde> {
        let entries = parse_assignments(text, path, &["a0", "a1", "a2", "a3"])?;
        let mut out: [Option<Expr>; 4] = Default::default();
        for (key, value, line) in entries {
            let k = key[1..].parse::<usize>().expect("validated key");
            out[k] = Some(parse(&value).map_err(|e| format_error(path, line, e.to_string()))?);
        }
        let [a0, a1, a2, a3] = out;
        match (a0, a1, a2, a3) {
            (Some(a0), Some(a1), Some(a2), Some(a3)) => Ok(CubicOde::new(a0, a1, a2, a3)),
            _ => Err(format_error(path, 0, "all of a0, a1, a2, a3 must be given".into())),
        }
    }

    pub fn to_file_string(&self) -> String {
        (0..4).map(|k| format!("a{k} = {}\n", self.coeffs[k])).collect()
    }
}

fn format_error(path: &str, line: usize, msg: String) -> Error {
    Error::Format { path: path.to_string(), line, msg }
}

/// `key = value` lines restricted to `keys`, each at most once.
fn parse_assignments(text: &str, path: &str, keys: &[&str]) -> Result<Vec<(String, String, usize)>> {
    let mut out: Vec<(String, String, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(format_error(path, line, format!("expected `key = value`, got `{content}`")));
        };
        let k = k.trim();
        if !keys.contains(&k) {
            return Err(format_error(path, line, format!("unknown key `{k}` (expected one of {})", keys.join(", "))));
        }
        if out.iter().any(|(seen, _, _)| seen == k) {
            return Err(format_error(path, line, format!("duplicate key `{k}`")));
        }
        out.push((k.to_string(), v.trim().to_string(), line));
    }
    Ok(out)
}

/// A planar diffeomorphism with user-supplied inverse, validated on its domain.
#[derive(Clone, Debug)]
pub struct PointMap {
    fwd: [Expr; 2],
    inv: [Expr; 2],
    domain: Domain,
}

/// Size of the validation lattice.
const CHECK_GRID: usize = 5;
const ROUND_TRIP_TOL: f64 = 1e-9;

impl PointMap {
    /// Builds and validates `(x, y) ↦ (fx, fy)` with inverse `(invx, invy)`.
    ///
    /// The round trip `inv ∘ fwd` must be the identity within 1e-9 and the
    /// Jacobian determinant nonzero on a 5 × 5 lattice of `domain`.
    pub fn new(fwd: [Expr; 2], inv: [Expr; 2], domain: Domain) -> Result<PointMap> {
        let map = PointMap { fwd: fwd.map(|e| simplify(&e)), inv: inv.map(|e| simplify(&e)), domain };
        map.validate()?;
        Ok(map)
    }

    pub fn from_strs(fwd: [&str; 2], inv: [&str; 2], domain: Domain) -> Result<PointMap> {
        PointMap::new([parse(fwd[0])?, parse(fwd[1])?], [parse(inv[0])?, parse(inv[1])?], domain)
    }

    pub fn identity(domain: Domain) -> PointMap {
        PointMap { fwd: [Expr::x(), Expr::y()], inv: [Expr::x(), Expr::y()], domain }
    }

    /// `(x, y) ↦ (y, x)`.
    pub fn swap(domain: Domain) -> PointMap {
        PointMap { fwd: [Expr::y(), Expr::x()], inv: [Expr::y(), Expr::x()], domain }
    }

    fn validate(&self) -> Result<()> {
        let tape = Tape::new(&[
            self.fwd[0].clone(),
            self.fwd[1].clone(),
            diff(&self.fwd[0], Var::X),
            diff(&self.fwd[0], Var::Y),
            diff(&self.fwd[1], Var::X),
            diff(&self.fwd[1], Var::Y),
        ]);
        let inv = Tape::new(&self.inv);
        for p in self.domain.grid(CHECK_GRID) {
            let v = tape
                .eval(p)
                .map_err(|e| Error::MapInvalid(format!("forward map undefined at ({}, {}): {e}", p.x, p.y)))?;
            let det = v[2] * v[5] - v[3] * v[4];
            let scale = v[2].abs().max(v[3].abs()).max(v[4].abs()).max(v[5].abs());
            if det.abs() <= 1e-12 * scale * scale || scale == 0.0 {
                return Err(Error::MapInvalid(format!("Jacobian vanishes at ({}, {})", p.x, p.y)));
            }
            let back = inv
                .eval(Point2::new(v[0], v[1]))
                .map_err(|e| Error::MapInvalid(format!("inverse undefined at image of ({}, {}): {e}", p.x, p.y)))?;
            let err = (back[0] - p.x).abs().max((back[1] - p.y).abs());
            if err > ROUND_TRIP_TOL * (1.0 + p.x.abs().max(p.y.abs())) {
                return Err(Error::MapInvalid(format!(
                    "inverse does not undo the map at ({}, {}): error {err:.3e}",
                    p.x, p.y
                )));
            }
        }
        Ok(())
    }

    pub fn fwd(&self) -> &[Expr; 2] {
        &self.fwd
    }

    pub fn inv(&self) -> &[Expr; 2] {
        &self.inv
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn apply(&self, p: Point2) -> std::result::Result<Point2, EvalError> {
        Ok(Point2::new(eval(&self.fwd[0], p)?, eval(&self.fwd[1], p)?))
    }

    pub fn apply_inverse(&self, q: Point2) -> std::result::Result<Point2, EvalError> {
        Ok(Point2::new(eval(&self.inv[0], q)?, eval(&self.inv[1], q)?))
    }

    /// `[[φx, φy], [ψx, ψy]]` at `p`.
    pub fn jacobian(&self, p: Point2) -> std::result::Result<[[f64; 2]; 2], EvalError> {
        let d = |e: &Expr, v| eval(&diff(e, v), p);
        Ok([
            [d(&self.fwd[0], Var::X)?, d(&self.fwd[0], Var::Y)?],
            [d(&self.fwd[1], Var::X)?, d(&self.fwd[1], Var::Y)?],
        ])
    }

    /// Image of the domain's validation lattice.
    pub fn image_samples(&self, n: usize) -> std::result::Result<Vec<Point2>, EvalError> {
        self.domain.grid(n).into_iter().map(|p| self.apply(p)).collect()
    }

    /// Reads `fx = `, `fy = `, `invx = `, `invy = ` and `domain = x0 x1 y0 y1`.
    pub fn parse_file(text: &str, path: &str) -> Result<PointMap> {
        let entries = parse_assignments(text, path, &["fx", "fy", "invx", "invy", "domain"])?;
        let mut exprs: [Option<Expr>; 4] = Default::default();
        let mut domain = None;
        for (key, value, line) in entries {
            let slot = match key.as_str() {
                "fx" => 0,
                "fy" => 1,
                "invx" => 2,
                "invy" => 3,
                _ => {
                    let nums: Vec<f64> = value
                        .split_whitespace()
                        .map(str::parse)
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| format_error(path, line, format!("bad domain: {e}")))?;
                    let [x0, x1, y0, y1] = nums[..] else {
                        return Err(format_error(path, line, "domain needs four numbers".into()));
                    };
                    domain = Some(Domain::new(x0, x1, y0, y1).map_err(|e| format_error(path, line, e.to_string()))?);
                    continue;
                }
            };
            exprs[slot] = Some(parse(&value).map_err(|e| format_error(path, line, e.to_string()))?);
        }
        let [Some(fx), Some(fy), Some(ix), Some(iy)] = exprs else {
            return Err(format_error(path, 0, "fx, fy, invx and invy must all be given".into()));
        };
        let domain = domain.ok_or_else(|| format_error(path, 0, "missing `domain = x0 x1 y0 y1`".into()))?;
        PointMap::new([fx, fy], [ix, iy], domain)
    }

    pub fn to_file_string(&self) -> String {
        let d = self.domain;
        format!(
            "fx = {}\nfy = {}\ninvx = {}\ninvy = {}\ndomain = {} {} {} {}\n",
            self.fwd[0], self.fwd[1], self.inv[0], self.inv[1], d.x0, d.x1, d.y0, d.y1
        )
    }
}

/// Minimal ring interface shared by the symbolic and the sampled transformation
/// formulas.
pub trait Scalar:
    Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn from_int(n: i64) -> Self;
}

impl Scalar for f64 {
    fn from_int(n: i64) -> Self {
        n as f64
    }
}

impl Scalar for Expr {
    fn from_int(n: i64) -> Self {
        Expr::int(n)
    }
}

/// Value and partial derivatives up to order two of one map component.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2<T> {
    pub dx: T,
    pub dy: T,
    pub dxx: T,
    pub dxy: T,
    pub dyy: T,
}

impl Jet2<Expr> {
    pub fn of(e: &Expr) -> Jet2<Expr> {
        let dx = diff(e, Var::X);
        let dy = diff(e, Var::Y);
        Jet2 { dxx: diff(&dx, Var::X), dxy: diff(&dx, Var::Y), dyy: diff(&dy, Var::Y), dx, dy }
    }
}

/// Result of transforming the cubic right-hand side by a 2-jet of a map.
#[derive(Clone, Debug)]
pub struct TransformedCubic<T> {
    /// `n_k` with `ã_k = n_k / det³`, in source coordinates.
    pub numerators: [T; 4],
    /// Jacobian determinant `φx ψy − φy ψx`.
    pub det: T,
    /// Coefficient of `p⁴` before truncation; identically zero for a correct
    /// transformation.
    pub remainder: T,
}

fn poly_mul<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out = vec![T::from_int(0); a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i + j] = out[i + j].clone() + ai.clone() * bj.clone();
        }
    }
    out
}

fn poly_add<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| match (a.get(i), b.get(i)) {
            (Some(x), Some(y)) => x.clone() + y.clone(),
            (Some(x), None) | (None, Some(x)) => x.clone(),
            (None, None) => unreachable!(),
        })
        .collect()
}

fn poly_neg<T: Scalar>(a: &[T]) -> Vec<T> {
    a.iter().cloned().map(Neg::neg).collect()
}

/// Transformed cubic coefficients for `(X, Y) = (φ, ψ)` given the equation's
/// coefficients and the 2-jets of `φ`, `ψ` at the same point.
pub fn transform_cubic<T: Scalar>(a: &[T; 4], phi: &Jet2<T>, psi: &Jet2<T>) -> TransformedCubic<T> {
    let two = || T::from_int(2);
    let dphi = [phi.dx.clone(), phi.dy.clone()];
    let dpsi = [psi.dx.clone(), psi.dy.clone()];
    let hphi = [phi.dxx.clone(), two() * phi.dxy.clone(), phi.dyy.clone()];
    let hpsi = [psi.dxx.clone(), two() * psi.dxy.clone(), psi.dyy.clone()];

    // Coefficient of y'' in the numerator: ψy (φx + φy p) − φy (ψx + ψy p).
    let ypp = poly_add(&poly_mul(std::slice::from_ref(&psi.dy), &dphi), &poly_neg(&poly_mul(std::slice::from_ref(&phi.dy), &dpsi)));
    let numer = poly_add(
        &poly_add(&poly_mul(&hpsi, &dphi), &poly_neg(&poly_mul(&dpsi, &hphi))),
        &poly_mul(&ypp, a),
    );
    debug_assert_eq!(numer.len(), 5);

    let mobius_num = [psi.dx.clone(), -phi.dx.clone()];
    let mobius_den = [-psi.dy.clone(), phi.dy.clone()];
    let mut acc: Vec<T> = vec![T::from_int(0); 4];
    for (k, nk) in numer.iter().take(4).enumerate() {
        let mut term = vec![nk.clone()];
        for _ in 0..k {
            term = poly_mul(&term, &mobius_num);
        }
        for _ in k..3 {
            term = poly_mul(&term, &mobius_den);
        }
        acc = poly_add(&acc, &term);
    }
    let det = phi.dx.clone() * psi.dy.clone() - phi.dy.clone() * psi.dx.clone();
    let [c0, c1, c2, c3]: [T; 4] = acc.try_into().ok().expect("cubic");
    TransformedCubic { numerators: [-c0, -c1, -c2, -c3], det, remainder: numer[4].clone() }
}

/// The transformed equation together with the closure remainder that was
/// checked on the way.
#[derive(Clone, Debug)]
pub struct Pushforward {
    pub ode: CubicOde,
    pub remainder: Expr,
}

/// Pushes `e` forward along `f`: solution curves of `e` map to solution curves
/// of the result, whose coefficients are expressed in the target coordinates.
pub fn pushforward_ode(e: &CubicOde, f: &PointMap) -> Result<CubicOde> {
    pushforward_detailed(e, f).map(|p| p.ode)
}

pub fn pushforward_detailed(e: &CubicOde, f: &PointMap) -> Result<Pushforward> {
    let phi = Jet2::of(&f.fwd[0]);
    let psi = Jet2::of(&f.fwd[1]);
    let t = transform_cubic(&e.coeffs, &phi, &psi);
    let remainder = simplify(&t.remainder);
    if !remainder.is_identically_zero() {
        return Err(Error::ClosureViolation(format!("non-cubic remainder {remainder}")));
    }
    let det3 = t.det.powi(-3);
    let [ix, iy] = &f.inv;
    let coeffs = t.numerators.map(|n| substitute(&(n * &det3), ix, iy));
    Ok(Pushforward { ode: CubicOde::from_array(coeffs), remainder })
}

/// `f ∘ g`, defined on `g`'s domain.
pub fn compose_point_maps(f: &PointMap, g: &PointMap) -> Result<PointMap> {
    for p in g.domain.grid(CHECK_GRID) {
        let q = g.apply(p).map_err(|e| Error::DomainMismatch(format!("inner map undefined at ({}, {}): {e}", p.x, p.y)))?;
        if !f.domain.contains(q) {
            return Err(Error::DomainMismatch(format!(
                "image ({}, {}) of ({}, {}) lies outside the outer domain {}",
                q.x, q.y, p.x, p.y, f.domain
            )));
        }
    }
    let fwd = [substitute(&f.fwd[0], &g.fwd[0], &g.fwd[1]), substitute(&f.fwd[1], &g.fwd[0], &g.fwd[1])];
    let inv = [substitute(&g.inv[0], &f.inv[0], &f.inv[1]), substitute(&g.inv[1], &f.inv[0], &f.inv[1])];
    PointMap::new(fwd, inv, g.domain)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArcSample {
    pub x: f64,
    pub y: f64,
    pub slope: f64,
}

/// Numerically integrated solution curve; `x` is strictly monotone.
#[derive(Clone, Debug, Default)]
pub struct SolutionArc {
    pub samples: Vec<ArcSample>,
}

/// Classical fourth-order Runge–Kutta integration of `y'' = Σ a_k y'^k`,
/// `steps` steps of size `h` starting at `start` with initial slope `slope`.
pub fn integrate_arc(e: &CubicOde, start: Point2, slope: f64, steps: usize, h: f64) -> Result<SolutionArc> {
    if h == 0.0 || !h.is_finite() {
        return Err(Error::DomainMismatch("step size must be finite and nonzero".into()));
    }
    let tape = Tape::new(e.coeffs());
    let accel = |x: f64, y: f64, p: f64| -> Result<f64> {
        let a = tape.eval(Point2::new(x, y)).map_err(|source| Error::SingularEvaluation { x, source })?;
        Ok(((a[3] * p + a[2]) * p + a[1]) * p + a[0])
    };
    let mut s = ArcSample { x: start.x, y: start.y, slope };
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(s);
    for _ in 0..steps {
        let (x, y, p) = (s.x, s.y, s.slope);
        let k1y = p;
        let k1p = accel(x, y, p)?;
        let k2y = p + 0.5 * h * k1p;
        let k2p = accel(x + 0.5 * h, y + 0.5 * h * k1y, k2y)?;
        let k3y = p + 0.5 * h * k2p;
        let k3p = accel(x + 0.5 * h, y + 0.5 * h * k2y, k3y)?;
        let k4y = p + h * k3p;
        let k4p = accel(x + h, y + h * k3y, k4y)?;
        s = ArcSample {
            x: x + h,
            y: y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
            slope: p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
        };
        if !(s.y.is_finite() && s.slope.is_finite()) {
            return Err(Error::SingularEvaluation { x: s.x, source: EvalError::Overflow });
        }
        samples.push(s);
    }
    Ok(SolutionArc { samples })
}

/// Largest relative residual of `target` along the image of `arc` under `f`.
///
/// Slopes and second derivatives of the image curve are estimated purely from
/// the mapped positions with five-point finite differences on the
/// nonuniform image spacing.
pub fn mapped_arc_residual(arc: &SolutionArc, f: &PointMap, target: &CubicOde) -> Result<f64> {
    let pts: Vec<Point2> = arc
        .samples
        .iter()
        .map(|s| f.apply(Point2::new(s.x, s.y)).map_err(|source| Error::SingularEvaluation { x: s.x, source }))
        .collect::<Result<_>>()?;
    if pts.windows(2).any(|w| (w[1].x - w[0].x) * (pts[1].x - pts[0].x) <= 0.0) {
        return Err(Error::DomainMismatch("mapped arc is not monotone in x".into()));
    }
    let mut worst: f64 = 0.0;
    for w in pts.windows(5) {
        let b = w[2];
        let xs: Vec<f64> = w.iter().map(|q| q.x - b.x).collect();
        let c = fd_weights(&xs, 2);
        let slope: f64 = (0..5).map(|i| c[1][i] * w[i].y).sum();
        let second: f64 = (0..5).map(|i| c[2][i] * w[i].y).sum();
        let rhs = target.rhs(b, slope).map_err(|source| Error::SingularEvaluation { x: b.x, source })?;
        worst = worst.max((second - rhs).abs() / (1.0 + rhs.abs()));
    }
    Ok(worst)
}

/// Finite-difference weights at 0 for derivatives up to order `m` on nodes `xs` (Fornberg).
fn fd_weights(xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    for i in 1..n {
        let mut c2 = 1.0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            for k in (0..=m.min(i)).rev() {
                let prev = if k > 0 { c[k - 1][i - 1] } else { 0.0 };
                c[k][i] = c1 * (k as f64 * prev - xs[i - 1] * c[k][i - 1]) / c2;
            }
            for k in (0..=m.min(i)).rev() {
                let prev = if k > 0 { c[k - 1][j] } else { 0.0 };
                c[k][j] = (xs[i] * c[k][j] - k as f64 * prev) / c3;
            }
        }
        c1 = c2;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{equivalent_expr, EquivalenceOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit() -> Domain {
        Domain::new(-1.0, 1.0, -1.0, 1.0).unwrap()
    }

    fn same(a: &CubicOde, b: &CubicOde) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let opts = EquivalenceOptions::new(30, 1e-8);
        (0..4).all(|k| equivalent_expr(a.coeff(k), b.coeff(k), &opts, &mut rng).unwrap())
    }

    #[test]
    fn five_point_weights() {
        let c = fd_weights(&[-2.0, -1.0, 0.0, 1.0, 2.0], 2);
        let want = [-1.0, 16.0, -30.0, 16.0, -1.0].map(|w| w / 12.0);
        for i in 0..5 {
            assert!((c[2][i] - want[i]).abs() < 1e-14);
        }
        let xs = [-0.3, -0.1, 0.0, 0.15, 0.4];
        let c = fd_weights(&xs, 2);
        let d2: f64 = xs.iter().zip(&c[2]).map(|(x, w)| w * x.powi(4)).sum();
        assert!(d2.abs() < 1e-12);
        let d1: f64 = xs.iter().zip(&c[1]).map(|(x, w)| w * (x * x * x + 2.0 * x)).sum();
        assert!((d1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn identity_pushforward() {
        let e = CubicOde::from_strs(["x*y", "y^2 - 1", "x", "3"]).unwrap();
        let out = pushforward_ode(&e, &PointMap::identity(unit())).unwrap();
        assert!(same(&e, &out));
    }

    #[test]
    fn swap_of_free_particle_stays_zero() {
        let out = pushforward_ode(&CubicOde::zero(), &PointMap::swap(unit())).unwrap();
        assert!(out.coeffs().iter().all(Expr::is_zero));
    }

    #[test]
    fn swap_reverses_and_negates_coefficients() {
        let e = CubicOde::from_strs(["x", "y", "x*y", "x+1"]).unwrap();
        let out = pushforward_ode(&e, &PointMap::swap(unit())).unwrap();
        let swapped = |k: usize| simplify(&-substitute(e.coeff(3 - k), &Expr::y(), &Expr::x()));
        for k in 0..4 {
            assert_eq!(out.coeff(k), &swapped(k), "a{k}");
        }
    }

    #[test]
    fn map_validation() {
        let bad_inverse = PointMap::from_strs(["x + y", "y"], ["x", "y"], unit());
        assert!(matches!(bad_inverse, Err(Error::MapInvalid(_))));
        let singular = PointMap::from_strs(["x^3", "y"], ["x^(1/3)", "y"], unit());
        assert!(matches!(singular, Err(Error::MapInvalid(_))));
        let ok = PointMap::from_strs(["x + y^3", "y"], ["x - y^3", "y"], unit());
        assert!(ok.is_ok());
    }

    #[test]
    fn composition_with_identity_and_inverse() {
        let f = PointMap::from_strs(["2*x + y", "x - y"], ["(x + y)/3", "(x - 2*y)/3"], unit()).unwrap();
        let big = Domain::new(-5.0, 5.0, -5.0, 5.0).unwrap();
        let id = PointMap::identity(unit());
        let fi = compose_point_maps(&f, &id).unwrap();
        assert_eq!(fi.fwd(), f.fwd());
        let finv = PointMap::new(f.inv().clone(), f.fwd().clone(), big).unwrap();
        let round = compose_point_maps(&finv, &f).unwrap();
        for p in unit().grid(5) {
            let q = round.apply(p).unwrap();
            assert!(q.dist(&p) < 1e-9);
        }
        assert!(matches!(compose_point_maps(&id, &finv), Err(Error::DomainMismatch(_))));
    }

    #[test]
    fn straight_lines_are_exact() {
        let arc = integrate_arc(&CubicOde::zero(), Point2::new(0.0, 0.0), 1.0, 200, 0.01).unwrap();
        for s in &arc.samples {
            assert!((s.y - s.x).abs() < 1e-12);
        }
    }

    #[test]
    fn exponential_solution() {
        let e = CubicOde::from_strs(["y", "0", "0", "0"]).unwrap();
        let arc = integrate_arc(&e, Point2::new(0.0, 1.0), 1.0, 1000, 1e-3).unwrap();
        let last = arc.samples.last().unwrap();
        assert!((last.x - 1.0).abs() < 1e-12);
        assert!((last.y - 1f64.exp()).abs() < 1e-6);
    }

    #[test]
    fn singular_coefficient_is_reported() {
        let e = CubicOde::from_strs(["1/(x - 1/2)", "0", "0", "0"]).unwrap();
        let r = integrate_arc(&e, Point2::new(0.0, 0.0), 0.0, 4, 0.25);
        assert!(matches!(r, Err(Error::SingularEvaluation { .. })));
    }

    #[test]
    fn file_formats() {
        let e = CubicOde::parse_file("# test\na0 = y^2\na1 = 0\na2 = 0\na3 = x^2\n", "t.ode").unwrap();
        assert_eq!(CubicOde::parse_file(&e.to_file_string(), "t").unwrap(), e);
        let err = CubicOde::parse_file("a0 = y^2\na1 = 0\na2 = 0\n", "t.ode").unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
        let err = CubicOde::parse_file("a0 = y^2\na1 = 0\na2 = z\na3 = 0", "t.ode").unwrap_err();
        assert!(matches!(err, Error::Format { line: 3, .. }), "{err:?}");

        let text = "fx = x + y^3\nfy = y\ninvx = x - y^3\ninvy = y\ndomain = -1 1 -1 1\n";
        let m = PointMap::parse_file(text, "m.map").unwrap();
        assert_eq!(m.domain(), unit());
        let again = PointMap::parse_file(&m.to_file_string(), "m.map").unwrap();
        assert_eq!(again.fwd(), m.fwd());
    }
}
