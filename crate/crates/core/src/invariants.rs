//! Relative and absolute differential invariants of a cubic ODE, orbit
//! classification and Tresse derivatives.
//!
//! With `u1..u4 = a0..a3` and subscripts read as partial derivatives:
//!
//! ```text
//! L1 = 3u1_yy − 2u2_xy + u3_xx + 3u4 u1_x − 3u3 u1_y + 2u2 u2_y − u2 u3_x − 3u1 u3_y + 6u1 u4_x
//! L2 = 3u4_xx − 2u3_xy + u2_yy − 3u1 u4_y + 3u2 u4_x − 2u3 u3_x + u3 u2_y + 3u4 u2_x − 6u4 u1_y
//! L3 = L2(L1 L2_x − L2 L1_x) − L1(L1 L2_y − L2 L1_y) + L1³u4 − L1²L2 u3 + L1 L2² u2 − L2³ u1
//! Ψ1 = −L1²u3 + 2L1L2u2 − 3L2²u1 − L1 L1_y + 4L1 L2_x − 3L2 L1_x
//! Ψ2 = −L2²u2 + 2L1L2u3 − 3L1²u4 + L2 L2_x − 4L2 L1_y + 3L1 L2_y
//! ξ1 = L3^(−2/5) (L2 ∂x − L1 ∂y),  ξ2 = L3^(−4/5) (Ψ2 ∂x − Ψ1 ∂y),  ν = L3^(1/5) dx∧dy
//! Iᵢ = ξᵢ(ν)/ν = div ξᵢ + ξᵢ(L3) / (5 L3)
//! ```

use std::fmt;
use std::sync::OnceLock;

use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::expr::{diff, simplify, Expr, Point2, Tape, Var};
use crate::ode::CubicOde;
use crate::{Error, Result};

/// Threshold below which a sampled quantity counts as zero.
pub const POINTWISE_ZERO: f64 = 1e-10;
/// Threshold on the Tresse Jacobian.
pub const TRESSE_SINGULAR: f64 = 1e-10;

fn dx(e: &Expr) -> Expr {
    diff(e, Var::X)
}

fn dy(e: &Expr) -> Expr {
    diff(e, Var::Y)
}

fn c(n: i64) -> Expr {
    Expr::int(n)
}

/// `(L1, L2)`.
pub fn relative_invariants_l(e: &CubicOde) -> (Expr, Expr) {
    let [u1, u2, u3, u4] = e.coeffs();
    let l1 = Expr::sum([
        c(3) * dy(&dy(u1)),
        c(-2) * dy(&dx(u2)),
        dx(&dx(u3)),
        c(3) * u4 * dx(u1),
        c(-3) * u3 * dy(u1),
        c(2) * u2 * dy(u2),
        -(u2 * dx(u3)),
        c(-3) * u1 * dy(u3),
        c(6) * u1 * dx(u4),
    ]);
    let l2 = Expr::sum([
        c(3) * dx(&dx(u4)),
        c(-2) * dy(&dx(u3)),
        dy(&dy(u2)),
        c(-3) * u1 * dy(u4),
        c(3) * u2 * dx(u4),
        c(-2) * u3 * dx(u3),
        u3 * dy(u2),
        c(3) * u4 * dx(u2),
        c(-6) * u4 * dy(u1),
    ]);
    (simplify(&l1), simplify(&l2))
}

pub fn relative_invariant_l3(e: &CubicOde, l1: &Expr, l2: &Expr) -> Expr {
    let [u1, u2, u3, u4] = e.coeffs();
    let l3 = Expr::sum([
        l2 * (l1 * dx(l2) - l2 * dx(l1)),
        -(l1 * (l1 * dy(l2) - l2 * dy(l1))),
        l1.powi(3) * u4,
        -(l1.powi(2) * l2 * u3),
        l1 * l2.powi(2) * u2,
        -(l2.powi(3) * u1),
    ]);
    simplify(&l3)
}

/// `(Ψ1, Ψ2)`.
pub fn psi_invariants(e: &CubicOde, l1: &Expr, l2: &Expr) -> (Expr, Expr) {
    let [u1, u2, u3, u4] = e.coeffs();
    let psi1 = Expr::sum([
        -(l1.powi(2) * u3),
        c(2) * l1 * l2 * u2,
        c(-3) * l2.powi(2) * u1,
        -(l1 * dy(l1)),
        c(4) * l1 * dx(l2),
        c(-3) * l2 * dx(l1),
    ]);
    let psi2 = Expr::sum([
        -(l2.powi(2) * u2),
        c(2) * l1 * l2 * u3,
        c(-3) * l1.powi(2) * u4,
        l2 * dx(l2),
        c(-4) * l2 * dy(l1),
        c(3) * l1 * dy(l2),
    ]);
    (simplify(&psi1), simplify(&psi2))
}

/// Polynomial invariants that exist on every orbit.
#[derive(Clone, Debug)]
pub struct RelativeInvariants {
    pub l1: Expr,
    pub l2: Expr,
    pub l3: Expr,
    pub psi1: Expr,
    pub psi2: Expr,
}

impl RelativeInvariants {
    pub fn of(e: &CubicOde) -> RelativeInvariants {
        let (l1, l2) = relative_invariants_l(e);
        let l3 = relative_invariant_l3(e, &l1, &l2);
        let (psi1, psi2) = psi_invariants(e, &l1, &l2);
        RelativeInvariants { l1, l2, l3, psi1, psi2 }
    }
}

/// A vector field `v[0] ∂x + v[1] ∂y`.
pub type VectorField = [Expr; 2];

fn l3_power(l3: &Expr, n: i64) -> Expr {
    l3.pow(Ratio::new(n, 5))
}

fn frame_from(rel: &RelativeInvariants) -> (VectorField, VectorField) {
    let w1 = l3_power(&rel.l3, -2);
    let w2 = l3_power(&rel.l3, -4);
    let xi1 = [simplify(&(&w1 * &rel.l2)), simplify(&(-(&w1 * &rel.l1)))];
    let xi2 = [simplify(&(&w2 * &rel.psi2)), simplify(&(-(&w2 * &rel.psi1)))];
    (xi1, xi2)
}

/// `div ξ + ξ(L3) / (5 L3)`.
fn log_derivative_of_density(xi: &VectorField, l3: &Expr) -> Expr {
    let div = dx(&xi[0]) + dy(&xi[1]);
    let along = &xi[0] * dx(l3) + &xi[1] * dy(l3);
    simplify(&(div + Expr::ratio(1, 5) * along * l3.recip()))
}

fn require_nondegenerate(rel: &RelativeInvariants) -> Result<()> {
    if rel.l3.is_identically_zero() {
        let what = if rel.l1.is_identically_zero() && rel.l2.is_identically_zero() {
            "L1 = L2 = 0"
        } else {
            "L3 = 0"
        };
        return Err(Error::DegenerateOrbit(what.into()));
    }
    Ok(())
}

/// `(ξ1, ξ2)` in the coordinate frame.
pub fn invariant_frame(e: &CubicOde) -> Result<(VectorField, VectorField)> {
    let rel = RelativeInvariants::of(e);
    require_nondegenerate(&rel)?;
    Ok(frame_from(&rel))
}

/// Density `L3^(1/5)` of the invariant 2-form.
pub fn liouville_form(e: &CubicOde) -> Result<Expr> {
    let rel = RelativeInvariants::of(e);
    require_nondegenerate(&rel)?;
    Ok(l3_power(&rel.l3, 1))
}

/// `(I1, I2)`.
pub fn scalar_invariants(e: &CubicOde) -> Result<(Expr, Expr)> {
    let b = InvariantBundle::new(e)?;
    Ok((b.i1, b.i2))
}

/// All invariants of one equation, built symbolically.
#[derive(Clone, Debug)]
pub struct InvariantBundle {
    pub l1: Expr,
    pub l2: Expr,
    pub l3: Expr,
    pub psi1: Expr,
    pub psi2: Expr,
    pub xi1: VectorField,
    pub xi2: VectorField,
    pub nu_density: Expr,
    pub i1: Expr,
    pub i2: Expr,
    tape: OnceLock<Tape>,
}

/// Numeric values of an [`InvariantBundle`] at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvariantValues {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub psi1: f64,
    pub psi2: f64,
    pub xi1: [f64; 2],
    pub xi2: [f64; 2],
    pub nu_density: f64,
    pub i1: f64,
    pub i2: f64,
}

impl InvariantBundle {
    /// Fails with [`Error::DegenerateOrbit`] if `L3` is structurally zero.
    pub fn new(e: &CubicOde) -> Result<InvariantBundle> {
        let rel = RelativeInvariants::of(e);
        require_nondegenerate(&rel)?;
        let (xi1, xi2) = frame_from(&rel);
        let i1 = log_derivative_of_density(&xi1, &rel.l3);
        let i2 = log_derivative_of_density(&xi2, &rel.l3);
        Ok(InvariantBundle {
            nu_density: l3_power(&rel.l3, 1),
            l1: rel.l1,
            l2: rel.l2,
            l3: rel.l3,
            psi1: rel.psi1,
            psi2: rel.psi2,
            xi1,
            xi2,
            i1,
            i2,
            tape: OnceLock::new(),
        })
    }

    fn tape(&self) -> &Tape {
        self.tape.get_or_init(|| {
            Tape::new(&[
                self.l1.clone(),
                self.l2.clone(),
                self.l3.clone(),
                self.psi1.clone(),
                self.psi2.clone(),
                self.xi1[0].clone(),
                self.xi1[1].clone(),
                self.xi2[0].clone(),
                self.xi2[1].clone(),
                self.nu_density.clone(),
                self.i1.clone(),
                self.i2.clone(),
            ])
        })
    }

    pub fn eval(&self, p: Point2) -> Result<InvariantValues> {
        let v = self.tape().eval(p)?;
        Ok(InvariantValues {
            l1: v[0],
            l2: v[1],
            l3: v[2],
            psi1: v[3],
            psi2: v[4],
            xi1: [v[5], v[6]],
            xi2: [v[7], v[8]],
            nu_density: v[9],
            i1: v[10],
            i2: v[11],
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OrbitLevel {
    /// `(L1, L2) ≠ 0` and `L3 ≠ 0`.
    GeneralPosition3,
    /// `L1 = L2 = 0`.
    Degenerate2,
    /// `(L1, L2) ≠ 0` but `L3 = 0`.
    Degenerate3,
    Undetermined,
}

impl OrbitLevel {
    pub fn name(self) -> &'static str {
        match self {
            OrbitLevel::GeneralPosition3 => "GeneralPosition3",
            OrbitLevel::Degenerate2 => "Degenerate2",
            OrbitLevel::Degenerate3 => "Degenerate3",
            OrbitLevel::Undetermined => "Undetermined",
        }
    }
}

impl fmt::Display for OrbitLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OrbitClass {
    pub level: OrbitLevel,
    /// Classified at a single point rather than identically on the domain.
    pub pointwise: bool,
}

/// Where a classification is made.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Locus {
    Identically,
    At(Point2),
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ZeroTest {
    Zero,
    NonZero,
    Unknown,
}

/// Exact for polynomials; otherwise a sampled test that can only certify
/// nonvanishing.
fn identically_zero(e: &Expr) -> ZeroTest {
    if e.is_identically_zero() {
        return ZeroTest::Zero;
    }
    if e.is_polynomial() {
        return ZeroTest::NonZero;
    }
    let tape = Tape::new(std::slice::from_ref(e));
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..200 {
        use rand::Rng;
        let p = Point2::new(rng.gen_range(-2.0..=2.0), rng.gen_range(-2.0..=2.0));
        if let Ok(v) = tape.eval(p) {
            if v[0].abs() > POINTWISE_ZERO {
                return ZeroTest::NonZero;
            }
        }
    }
    ZeroTest::Unknown
}

pub fn classify_orbit(e: &CubicOde, locus: Locus) -> OrbitClass {
    let rel = RelativeInvariants::of(e);
    match locus {
        Locus::Identically => {
            let level = match (identically_zero(&rel.l1), identically_zero(&rel.l2)) {
                (ZeroTest::Zero, ZeroTest::Zero) => OrbitLevel::Degenerate2,
                (ZeroTest::NonZero, _) | (_, ZeroTest::NonZero) => match identically_zero(&rel.l3) {
                    ZeroTest::Zero => OrbitLevel::Degenerate3,
                    ZeroTest::NonZero => OrbitLevel::GeneralPosition3,
                    ZeroTest::Unknown => OrbitLevel::Undetermined,
                },
                _ => OrbitLevel::Undetermined,
            };
            OrbitClass { level, pointwise: false }
        }
        Locus::At(p) => {
            let tape = Tape::new(&[rel.l1, rel.l2, rel.l3]);
            let level = match tape.eval(p) {
                Err(_) => OrbitLevel::Undetermined,
                Ok(v) if v[0].abs() <= POINTWISE_ZERO && v[1].abs() <= POINTWISE_ZERO => OrbitLevel::Degenerate2,
                Ok(v) if v[2].abs() <= POINTWISE_ZERO => OrbitLevel::Degenerate3,
                Ok(_) => OrbitLevel::GeneralPosition3,
            };
            OrbitClass { level, pointwise: true }
        }
    }
}

/// Symbolic Tresse derivatives `(dh/dI1, dh/dI2)` by Cramer's rule.
pub fn tresse_derivative(h: &Expr, bundle: &InvariantBundle) -> (Expr, Expr) {
    let [i1x, i1y, i2x, i2y] = invariant_gradients(bundle);
    let (hx, hy) = (dx(h), dy(h));
    let det = simplify(&(&i1x * &i2y - &i1y * &i2x));
    let inv = det.recip();
    let d1 = simplify(&((&hx * &i2y - &hy * &i2x) * &inv));
    let d2 = simplify(&((&i1x * &hy - &i1y * &hx) * &inv));
    (d1, d2)
}

/// `[∂x I1, ∂y I1, ∂x I2, ∂y I2]`.
pub fn invariant_gradients(bundle: &InvariantBundle) -> [Expr; 4] {
    [dx(&bundle.i1), dy(&bundle.i1), dx(&bundle.i2), dy(&bundle.i2)]
}

/// Pointwise Tresse derivatives by a 2 × 2 solve.
pub fn tresse_derivative_at(h: &Expr, bundle: &InvariantBundle, p: Point2) -> Result<(f64, f64)> {
    let [i1x, i1y, i2x, i2y] = invariant_gradients(bundle);
    let v = Tape::new(&[i1x, i1y, i2x, i2y, dx(h), dy(h)]).eval(p)?;
    solve_tresse([v[0], v[1], v[2], v[3]], [v[4], v[5]], p)
}

/// Solves `[I1x I2x; I1y I2y] (d1, d2)ᵀ = (hx, hy)ᵀ`; `grad` is `[I1x, I1y, I2x, I2y]`.
pub fn solve_tresse(grad: [f64; 4], dh: [f64; 2], p: Point2) -> Result<(f64, f64)> {
    let [i1x, i1y, i2x, i2y] = grad;
    let det = i1x * i2y - i1y * i2x;
    if det.abs() < TRESSE_SINGULAR || !det.is_finite() {
        return Err(Error::NotInGeneralPosition { x: p.x, y: p.y });
    }
    let [hx, hy] = dh;
    Ok(((hx * i2y - hy * i2x) / det, (i1x * hy - i1y * hx) / det))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn ode(a: [&str; 4]) -> CubicOde {
        CubicOde::from_strs(a).unwrap()
    }

    #[test]
    fn fixture_relative_invariants() {
        let e = ode(["y^2", "0", "0", "x^2"]);
        let (l1, l2) = relative_invariants_l(&e);
        assert!((l1 - parse("6 + 12*x*y^2").unwrap()).is_identically_zero());
        assert!((l2 - parse("6 - 12*x^2*y").unwrap()).is_identically_zero());
    }

    #[test]
    fn zero_equation_is_degenerate2() {
        let c = classify_orbit(&CubicOde::zero(), Locus::Identically);
        assert_eq!(c.level, OrbitLevel::Degenerate2);
        assert!(matches!(InvariantBundle::new(&CubicOde::zero()), Err(Error::DegenerateOrbit(_))));
    }

    #[test]
    fn fixture_pointwise_classification() {
        let e = ode(["y^2", "0", "0", "x^2"]);
        let c = classify_orbit(&e, Locus::At(Point2::new(1.0, 1.0)));
        assert_eq!(c, OrbitClass { level: OrbitLevel::GeneralPosition3, pointwise: true });
        let d3 = ode(["y^2", "0", "0", "0"]);
        assert_eq!(classify_orbit(&d3, Locus::Identically).level, OrbitLevel::Degenerate3);
    }

    #[test]
    fn tresse_of_invariants_is_exact() {
        let e = ode(["y^2", "0", "0", "x^2"]);
        let b = InvariantBundle::new(&e).unwrap();
        let (d1, d2) = tresse_derivative(&b.i1, &b);
        assert!(d1.is_one(), "{d1}");
        assert!(d2.is_zero());
        let (d1, d2) = tresse_derivative(&b.i2, &b);
        assert!(d1.is_zero());
        assert!(d2.is_one());
    }

    #[test]
    fn singular_tresse_system() {
        let p = Point2::new(0.0, 0.0);
        assert!(matches!(solve_tresse([1.0, 2.0, 2.0, 4.0], [1.0, 1.0], p), Err(Error::NotInGeneralPosition { .. })));
        assert_eq!(solve_tresse([2.0, 0.0, 0.0, 4.0], [1.0, 1.0], p).unwrap(), (0.5, 0.25));
    }
}
