use odeinv::expr::{eval, Expr, Tape};
use odeinv::invariants::{
    classify_orbit, tresse_derivative, tresse_derivative_at, InvariantBundle, InvariantValues, Locus, OrbitLevel,
    RelativeInvariants,
};
use odeinv::ode::{pushforward_ode, CubicOde, Domain, PointMap};
use odeinv::Point2;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

fn unit() -> Domain {
    Domain::new(-1.0, 1.0, -1.0, 1.0).unwrap()
}

fn fixture() -> (CubicOde, PointMap) {
    let e = CubicOde::from_strs(["y^2 + x", "x*y", "1 - x^2", "x^2 + y"]).unwrap();
    let f = PointMap::from_strs(
        ["2*(x + 0.1*y^3) + y + 1", "x + 0.1*y^3 - y"],
        ["(x + y - 1)/3 - 0.1*((x - 2*y - 1)/3)^3", "(x - 2*y - 1)/3"],
        unit(),
    )
    .unwrap();
    (e, f)
}

fn general() -> CubicOde {
    CubicOde::from_strs(["x*y + 1", "y^2", "x", "1/2*x*y - y"]).unwrap()
}

const SAMPLES: [(f64, f64); 5] = [(0.3, -0.7), (-0.45, 0.2), (0.1, 0.6), (0.8, 0.35), (-0.6, -0.5)];

#[test]
fn fixture_values_at_one_one() {
    let e = CubicOde::from_strs(["y^2", "0", "0", "x^2"]).unwrap();
    let b = InvariantBundle::new(&e).unwrap();
    let v = b.eval(Point2::new(1.0, 1.0)).unwrap();
    assert_eq!((v.l1, v.l2), (18.0, -6.0));
    assert_eq!(v.l3, 9504.0);
    assert_eq!((v.psi1, v.psi2), (-2052.0, -900.0));
    assert!(close(v.nu_density, 6.245702381815542, 1e-13), "{}", v.nu_density);
}

#[test]
fn constant_coefficients_are_degenerate2() {
    for coeffs in [["0", "0", "0", "0"], ["1", "-2", "1/3", "5"]] {
        let e = CubicOde::from_strs(coeffs).unwrap();
        let rel = RelativeInvariants::of(&e);
        assert!(rel.l1.is_zero() && rel.l2.is_zero());
        assert!(rel.psi1.is_identically_zero() && rel.psi2.is_identically_zero());
        assert_eq!(classify_orbit(&e, Locus::Identically).level, OrbitLevel::Degenerate2);
    }
}

#[test]
fn quadratic_forcing_is_degenerate3() {
    let e = CubicOde::from_strs(["y^2", "0", "0", "0"]).unwrap();
    let rel = RelativeInvariants::of(&e);
    assert_eq!(rel.l1, Expr::int(6));
    assert!(rel.l2.is_zero());
    assert!(rel.l3.is_identically_zero());
    assert!(rel.psi1.is_identically_zero() && rel.psi2.is_identically_zero());
    assert_eq!(classify_orbit(&e, Locus::Identically).level, OrbitLevel::Degenerate3);
    assert!(InvariantBundle::new(&e).is_err());
}

#[test]
fn invariants_survive_a_nonlinear_orientation_reversing_map() {
    let (e, f) = fixture();
    let et = pushforward_ode(&e, &f).unwrap();
    let b = InvariantBundle::new(&e).unwrap();
    let bt = InvariantBundle::new(&et).unwrap();
    let p = Point2::new(0.3, -0.7);
    let q = f.apply(p).unwrap();
    let v = b.eval(p).unwrap();
    let w = bt.eval(q).unwrap();
    assert!(close(v.l3, -955.43749526408, 1e-12), "{}", v.l3);
    assert!(close(w.l3 * (-3.0f64).powi(5), v.l3, 1e-10));
    assert!(close(v.i1, 0.367667309921532, 1e-12), "{}", v.i1);
    assert!(close(v.i2, 2.31272392001294, 1e-12), "{}", v.i2);
    assert!(close(w.i1, v.i1, 1e-9));
    assert!(close(w.i2, v.i2, 1e-9));
    assert!(v.nu_density < 0.0);
    assert!(close(w.nu_density * -3.0, v.nu_density, 1e-10));
}

#[test]
fn frame_is_independent_where_l3_is_nonzero() {
    let b = InvariantBundle::new(&general()).unwrap();
    for (x, y) in SAMPLES {
        let v = b.eval(Point2::new(x, y)).unwrap();
        let det = v.xi1[0] * v.xi2[1] - v.xi1[1] * v.xi2[0];
        let scale = v.xi1[0].hypot(v.xi1[1]) * v.xi2[0].hypot(v.xi2[1]);
        assert!(det.abs() > 1e-6 * scale, "({x}, {y}): det {det}");
    }
}

#[test]
fn constant_l3_with_constant_frame_has_zero_invariants() {
    let e = CubicOde::from_strs(["x", "0", "0", "1"]).unwrap();
    let b = InvariantBundle::new(&e).unwrap();
    assert_eq!(b.l3, Expr::int(27));
    for (x, y) in SAMPLES {
        let v = b.eval(Point2::new(x, y)).unwrap();
        assert!(v.i1.abs() < 1e-12 && v.i2.abs() < 1e-12);
    }
}

fn flow(b: &InvariantBundle, field: fn(&InvariantValues) -> [f64; 2], p: Point2, t: f64) -> Point2 {
    let steps = 20;
    let h = t / steps as f64;
    let f = |q: Point2| field(&b.eval(q).unwrap());
    let mut q = p;
    for _ in 0..steps {
        let k1 = f(q);
        let k2 = f(Point2::new(q.x + 0.5 * h * k1[0], q.y + 0.5 * h * k1[1]));
        let k3 = f(Point2::new(q.x + 0.5 * h * k2[0], q.y + 0.5 * h * k2[1]));
        let k4 = f(Point2::new(q.x + h * k3[0], q.y + h * k3[1]));
        q = Point2::new(
            q.x + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            q.y + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        );
    }
    q
}

/// Density of the pulled-back form `φ_t^* ν` at `p`.
fn pulled_back_density(b: &InvariantBundle, field: fn(&InvariantValues) -> [f64; 2], p: Point2, t: f64) -> f64 {
    let d = 1e-5;
    let px = [flow(b, field, Point2::new(p.x + d, p.y), t), flow(b, field, Point2::new(p.x - d, p.y), t)];
    let py = [flow(b, field, Point2::new(p.x, p.y + d), t), flow(b, field, Point2::new(p.x, p.y - d), t)];
    let jac = ((px[0].x - px[1].x) * (py[0].y - py[1].y) - (px[0].y - px[1].y) * (py[0].x - py[1].x)) / (4.0 * d * d);
    b.eval(flow(b, field, p, t)).unwrap().nu_density * jac
}

#[test]
fn scalar_invariants_are_lie_derivatives_of_the_density() {
    let b = InvariantBundle::new(&general()).unwrap();
    for k in 0..2 {
        let field = [|v: &InvariantValues| v.xi1, |v: &InvariantValues| v.xi2][k];
        let inv = [|v: &InvariantValues| v.i1, |v: &InvariantValues| v.i2][k];
        for (x, y) in SAMPLES {
            let p = Point2::new(x, y);
            let v = b.eval(p).unwrap();
            let t = 1e-5;
            let fd = (pulled_back_density(&b, field, p, t) - pulled_back_density(&b, field, p, -t)) / (2.0 * t);
            let want = inv(&v) * v.nu_density;
            assert!((fd - want).abs() <= 1e-4 * (1.0 + want.abs()), "({x}, {y}): {fd} vs {want}");
        }
    }
}

#[test]
fn degenerate2_is_preserved_by_point_maps() {
    let shear = PointMap::from_strs(
        ["x + 0.2*y^3", "y + 0.1*(x + 0.2*y^3)"],
        ["x - 0.2*(y - 0.1*x)^3", "y - 0.1*x"],
        unit(),
    )
    .unwrap();
    let skew = PointMap::from_strs(["x + y", "y"], ["x - y", "y"], unit()).unwrap();
    for f in [shear, skew, PointMap::swap(unit())] {
        for coeffs in [["0", "0", "0", "0"], ["1", "-2", "1/3", "5"], ["x*y + 1", "y^2", "x", "1/2*x*y - y"]] {
            let e = CubicOde::from_strs(coeffs).unwrap();
            let before = classify_orbit(&e, Locus::Identically).level == OrbitLevel::Degenerate2;
            let pushed = pushforward_ode(&e, &f).unwrap();
            let after = classify_orbit(&pushed, Locus::Identically).level;
            assert_ne!(after, OrbitLevel::Undetermined);
            assert_eq!(before, after == OrbitLevel::Degenerate2, "{coeffs:?}");
        }
    }
}

#[test]
fn tresse_derivatives_of_invariant_products() {
    let b = InvariantBundle::new(&general()).unwrap();
    assert_eq!(tresse_derivative(&b.i1, &b), (Expr::one(), Expr::zero()));
    let h = b.i1.clone() * b.i2.clone();
    for (x, y) in SAMPLES {
        let p = Point2::new(x, y);
        let v = b.eval(p).unwrap();
        let (d1, d2) = tresse_derivative_at(&b.i2, &b, p).unwrap();
        assert!(d1.abs() < 1e-9 && close(d2, 1.0, 1e-9));
        let (d1, d2) = tresse_derivative_at(&h, &b, p).unwrap();
        assert!(close(d1, v.i2, 1e-9) && close(d2, v.i1, 1e-9), "{d1} {d2}");
    }
}

/// Point near `p` with chart values `target`, by Newton with difference Jacobians.
fn chart_preimage(b: &InvariantBundle, p: Point2, target: [f64; 2]) -> Point2 {
    let g = |q: Point2| {
        let v = b.eval(q).unwrap();
        [v.i1, v.i2]
    };
    let d = 1e-7;
    let mut q = p;
    for _ in 0..30 {
        let r = g(q);
        let (gx, gy) = (g(Point2::new(q.x + d, q.y)), g(Point2::new(q.x, q.y + d)));
        let (gxm, gym) = (g(Point2::new(q.x - d, q.y)), g(Point2::new(q.x, q.y - d)));
        let j = [[(gx[0] - gxm[0]) / (2.0 * d), (gy[0] - gym[0]) / (2.0 * d)], [(gx[1] - gxm[1]) / (2.0 * d), (gy[1] - gym[1]) / (2.0 * d)]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let (e0, e1) = (r[0] - target[0], r[1] - target[1]);
        q = Point2::new(q.x - (j[1][1] * e0 - j[0][1] * e1) / det, q.y - (j[0][0] * e1 - j[1][0] * e0) / det);
    }
    q
}

#[test]
fn tresse_derivative_of_a0_matches_level_set_differences() {
    let e = general();
    let b = InvariantBundle::new(&e).unwrap();
    let tape = Tape::new(std::slice::from_ref(e.coeff(0)));
    let h = |q: Point2| tape.eval(q).unwrap()[0];
    for (x, y) in SAMPLES {
        let p = Point2::new(x, y);
        let v = b.eval(p).unwrap();
        let (d1, d2) = tresse_derivative_at(e.coeff(0), &b, p).unwrap();
        let s = 1e-5;
        let along = |k: usize| {
            let mut plus = [v.i1, v.i2];
            let mut minus = plus;
            plus[k] += s;
            minus[k] -= s;
            (h(chart_preimage(&b, p, plus)) - h(chart_preimage(&b, p, minus))) / (2.0 * s)
        };
        let (f1, f2) = (along(0), along(1));
        assert!((d1 - f1).abs() <= 1e-6 * (1.0 + d1.abs()), "({x}, {y}): {d1} vs {f1}");
        assert!((d2 - f2).abs() <= 1e-6 * (1.0 + d2.abs()), "({x}, {y}): {d2} vs {f2}");
        assert_eq!(eval(e.coeff(0), p).unwrap(), h(p));
    }
}
