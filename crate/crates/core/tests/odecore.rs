use odeinv::expr::{equivalent_expr, EquivalenceOptions};
use odeinv::ode::{
    compose_point_maps, integrate_arc, mapped_arc_residual, pushforward_detailed, pushforward_ode, CubicOde, Domain,
    PointMap,
};
use odeinv::Point2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn unit() -> Domain {
    Domain::new(-1.0, 1.0, -1.0, 1.0).unwrap()
}

fn same_equation(a: &CubicOde, b: &CubicOde) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let opts = EquivalenceOptions { domain: [-0.4, 0.4, -0.4, 0.4], ..EquivalenceOptions::new(30, 1e-8) };
    (0..4).all(|k| equivalent_expr(a.coeff(k), b.coeff(k), &opts, &mut rng).unwrap())
}

fn cubic_shear() -> PointMap {
    PointMap::from_strs(
        ["x + 0.2*y^3", "y + 0.1*(x + 0.2*y^3)"],
        ["x - 0.2*(y - 0.1*x)^3", "y - 0.1*x"],
        unit(),
    )
    .unwrap()
}

#[test]
fn composition_law() {
    let e = CubicOde::from_strs(["x*y + 1", "y^2", "x", "1/2*x*y - y"]).unwrap();
    let f = cubic_shear();
    let g = PointMap::from_strs(["0.3*x + 0.1*y", "0.2*y - 0.1*x + 0.05"], ["(2*x - y + 0.05)*10/7", "(x + 3*y - 0.15)*10/7"], unit())
        .unwrap();
    let fg = compose_point_maps(&f, &g).unwrap();
    let direct = pushforward_ode(&e, &fg).unwrap();
    let staged = pushforward_ode(&pushforward_ode(&e, &g).unwrap(), &f).unwrap();
    assert!(same_equation(&direct, &staged));
}

#[test]
fn nonlinear_pushforward_stays_cubic() {
    let e = CubicOde::from_strs(["y^2 - x", "x*y", "3", "x^2"]).unwrap();
    let out = pushforward_detailed(&e, &cubic_shear()).unwrap();
    assert!(out.remainder.is_identically_zero());
}

#[test]
fn lines_stay_lines_under_affine_maps() {
    let f = PointMap::from_strs(["2*x + y", "y - x"], ["(x - y)/3", "(x + 2*y)/3"], unit()).unwrap();
    let out = pushforward_ode(&CubicOde::zero(), &f).unwrap();
    assert!(out.coeffs().iter().all(|c| c.is_identically_zero()));
}

#[test]
fn swapped_arcs_solve_the_swapped_equation() {
    let e = CubicOde::from_strs(["x", "y", "0", "1/2"]).unwrap();
    let swap = PointMap::swap(unit());
    let pushed = pushforward_ode(&e, &swap).unwrap();
    let arc = integrate_arc(&e, Point2::new(-0.2, 0.1), 0.8, 300, 1e-3).unwrap();
    assert!(mapped_arc_residual(&arc, &swap, &pushed).unwrap() <= 1e-4);
    let wrong = pushforward_ode(&CubicOde::from_strs(["x", "y", "0", "1"]).unwrap(), &swap).unwrap();
    assert!(mapped_arc_residual(&arc, &swap, &wrong).unwrap() > 1e-2);
}

#[test]
fn nonlinear_arcs_solve_the_pushed_equation() {
    let e = CubicOde::from_strs(["x*y + 1", "y^2", "x", "1/2*x*y - y"]).unwrap();
    let f = cubic_shear();
    let pushed = pushforward_ode(&e, &f).unwrap();
    let arc = integrate_arc(&e, Point2::new(-0.3, 0.2), 0.4, 300, 1e-3).unwrap();
    assert!(arc.samples.windows(2).all(|w| w[1].x > w[0].x));
    assert!(mapped_arc_residual(&arc, &f, &pushed).unwrap() <= 1e-4);
}

#[test]
fn file_round_trips() {
    let e = CubicOde::from_strs(["x*y + 1/3", "y^2", "0", "x^(1/5)"]).unwrap();
    let back = CubicOde::parse_file(&e.to_file_string(), "e.ode").unwrap();
    assert_eq!(back, e);
    let f = cubic_shear();
    let g = PointMap::parse_file(&f.to_file_string(), "f.map").unwrap();
    assert_eq!(g.fwd(), f.fwd());
    assert_eq!(g.inv(), f.inv());
    assert_eq!(g.domain(), f.domain());
}

#[test]
fn malformed_files_report_lines() {
    let err = CubicOde::parse_file("a0 = 1\na1 = 2*\na2 = 0\na3 = 0\n", "bad.ode").unwrap_err();
    assert!(err.to_string().starts_with("bad.ode:2:"), "{err}");
    let err = CubicOde::parse_file("a0 = 1\na1 = 0\na2 = 0\n", "short.ode").unwrap_err();
    assert!(err.to_string().contains("a3"), "{err}");
    let err = PointMap::parse_file("fx = x\nfy = y\ninvx = x\ninvy = y\ndomain = 1 0 0 1\n", "f.map").unwrap_err();
    assert!(err.to_string().starts_with("f.map:5:"), "{err}");
    assert!(PointMap::from_strs(["x + y", "y"], ["x", "y"], unit()).is_err());
}
