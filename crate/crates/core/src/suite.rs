//! Seeded random equations and point maps, and the property suites run by
//! `odeinv selftest`.

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::canonical::{decide_equivalence, EquivalenceStatus, DEFAULT_TOL};
use crate::expr::{equivalent_expr, eval_exact, simplify, substitute, EquivalenceOptions, Expr, Point2};
use crate::invariants::{
    classify_orbit, relative_invariant_l3, relative_invariants_l, solve_tresse, tresse_derivative,
    InvariantBundle, InvariantValues, Locus, OrbitLevel,
};
use crate::ode::{
    compose_point_maps, integrate_arc, mapped_arc_residual, pushforward_detailed, pushforward_ode, CubicOde,
    Domain, PointMap,
};
use crate::Result;

/// Source rectangle used by every generated case.
pub fn unit_domain() -> Domain {
    Domain { x0: -1.0, x1: 1.0, y0: -1.0, y1: 1.0 }
}

/// Independent generator for case `index` of stream `stream`.
pub fn case_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(index) << 20);
    rng
}

fn small_rational<R: Rng>(rng: &mut R) -> Expr {
    let n = rng.gen_range(-3..=3);
    let d = *[1, 1, 2, 3].choose(rng).expect("nonempty");
    Expr::ratio(n, d)
}

/// Polynomial in `x, y` of total degree ≤ `degree` with small rational
/// coefficients; each monomial is present with probability 0.6.
pub fn random_polynomial<R: Rng>(rng: &mut R, degree: u32) -> Expr {
    let mut terms = Vec::new();
    for d in 0..=degree {
        for i in 0..=d {
            if rng.gen_bool(0.6) {
                terms.push(small_rational(rng) * Expr::x().powi(i64::from(i)) * Expr::y().powi(i64::from(d - i)));
            }
        }
    }
    simplify(&Expr::sum(terms))
}

/// Random equation with coefficients of degree ≤ 2 that is in general
/// position identically; also returns how many draws were rejected.
pub fn random_general_ode<R: Rng>(rng: &mut R) -> (CubicOde, usize) {
    let mut rejected = 0;
    loop {
        let e = CubicOde::from_array([(); 4].map(|_| random_polynomial(rng, 2)));
        if classify_orbit(&e, Locus::Identically).level == OrbitLevel::GeneralPosition3 {
            return (e, rejected);
        }
        rejected += 1;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapKind {
    Affine,
    /// A cubic shear `x + s y³` or `y + s x³` followed by an affine map.
    ShearedAffine,
}

fn affine_parts<R: Rng>(rng: &mut R) -> ([i64; 4], [Expr; 2]) {
    let entries = [-2, -1, 0, 1, 2];
    loop {
        let m = [(); 4].map(|_| *entries.choose(rng).expect("nonempty"));
        let det = m[0] * m[3] - m[1] * m[2];
        if det != 0 {
            let t = [(); 2].map(|_| Expr::ratio(rng.gen_range(-2..=2), 2));
            return (m, t);
        }
    }
}

/// Random invertible map with an exact inverse, validated on `domain`.
pub fn random_map<R: Rng>(rng: &mut R, kind: MapKind, domain: Domain) -> PointMap {
    let (x, y) = (Expr::x(), Expr::y());
    let (m, t) = affine_parts(rng);
    let det = m[0] * m[3] - m[1] * m[2];
    let c = Expr::int;
    let afwd = [
        c(m[0]) * &x + c(m[1]) * &y + &t[0],
        c(m[2]) * &x + c(m[3]) * &y + &t[1],
    ];
    let (u, v) = (&x - &t[0], &y - &t[1]);
    let ainv = [
        (c(m[3]) * &u - c(m[1]) * &v) * Expr::ratio(1, det),
        (c(m[0]) * &v - c(m[2]) * &u) * Expr::ratio(1, det),
    ];
    let (fwd, inv) = match kind {
        MapKind::Affine => (afwd, ainv),
        MapKind::ShearedAffine => {
            let s = Expr::ratio(*[-1, 1].choose(rng).expect("nonempty"), *[5, 10].choose(rng).expect("nonempty"));
            let (sfwd, sinv) = if rng.gen_bool(0.5) {
                ([&x + &s * y.powi(3), y.clone()], [&x - &s * y.powi(3), y.clone()])
            } else {
                ([x.clone(), &y + &s * x.powi(3)], [x.clone(), &y - &s * x.powi(3)])
            };
            let fwd = afwd.map(|a| substitute(&a, &sfwd[0], &sfwd[1]));
            let inv = sinv.map(|a| substitute(&a, &ainv[0], &ainv[1]));
            (fwd, inv)
        }
    };
    PointMap::new(fwd, inv, domain).expect("generated maps are valid diffeomorphisms")
}

/// Alternates affine and sheared maps across case indices.
pub fn kind_for(index: usize) -> MapKind {
    if index.is_multiple_of(2) {
        MapKind::ShearedAffine
    } else {
        MapKind::Affine
    }
}

/// Bounding rectangle of the image of `f`'s domain.
pub fn image_domain(f: &PointMap, n: usize) -> Domain {
    let pts = f.image_samples(n).expect("validated map is defined on its domain");
    Domain::bounding(&pts, 0.0).expect("image of a diffeomorphism has interior")
}

/// One generated pair together with the pushed-forward equation.
pub struct PipelineCase {
    pub ode: CubicOde,
    pub map: PointMap,
    pub pushed: CubicOde,
    pub rejected: usize,
}

pub fn pipeline_case(seed: u64, stream: u64, index: usize) -> Result<PipelineCase> {
    let mut rng = case_rng(seed, stream, index as u64);
    let (ode, rejected) = random_general_ode(&mut rng);
    let map = random_map(&mut rng, kind_for(index), unit_domain());
    let pushed = pushforward_ode(&ode, &map)?;
    Ok(PipelineCase { ode, map, pushed, rejected })
}

/// Up to `count` random points of `domain` where `bundle` is in general
/// position and evaluable, with values.
pub fn general_points<R: Rng>(
    rng: &mut R,
    bundle: &InvariantBundle,
    domain: Domain,
    count: usize,
) -> Vec<(Point2, InvariantValues)> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..200 * count {
        if out.len() == count {
            break;
        }
        let p = Point2::new(rng.gen_range(domain.x0..=domain.x1), rng.gen_range(domain.y0..=domain.y1));
        if let Ok(v) = bundle.eval(p) {
            let gp = (v.l1.abs() > 1e-10 || v.l2.abs() > 1e-10) && v.l3.abs() > 1e-10;
            let finite = [v.i1, v.i2, v.xi1[0], v.xi1[1], v.xi2[0], v.xi2[1]].iter().all(|t| t.is_finite());
            if gp && finite {
                out.push((p, v));
            }
        }
    }
    out
}

/// Outcome of one property suite.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub cases: usize,
    /// Worst observed value of the suite's metric.
    pub worst: f64,
    pub threshold: f64,
    pub notes: Vec<String>,
}

impl SuiteResult {
    fn new(name: &'static str, cases: usize, worst: f64, threshold: f64, ok: bool, notes: Vec<String>) -> Self {
        SuiteResult { name, passed: ok && worst <= threshold, cases, worst, threshold, notes }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

/// Exact invariant fixtures.
pub fn transcription_suite() -> SuiteResult {
    let mut notes = Vec::new();
    let mut ok = true;
    let mut check = |label: &str, cond: bool| {
        if !cond {
            ok = false;
            notes.push(format!("failed: {label}"));
        }
    };
    let e = CubicOde::from_strs(["y^2", "0", "0", "x^2"]).expect("fixture parses");
    let (l1, l2) = relative_invariants_l(&e);
    let expect1 = crate::expr::parse("6 + 12*x*y^2").expect("fixture parses");
    let expect2 = crate::expr::parse("6 - 12*x^2*y").expect("fixture parses");
    check("L1 = 6 + 12xy^2", (&l1 - expect1).is_identically_zero());
    check("L2 = 6 - 12x^2y", (&l2 - expect2).is_identically_zero());
    let l3 = relative_invariant_l3(&e, &l1, &l2);
    let one = num_rational::BigRational::from_integer(1.into());
    check("L3(1,1) = 9504", eval_exact(&l3, &one, &one).is_ok_and(|v| v == num_rational::BigRational::from_integer(9504.into())));
    check(
        "GeneralPosition3 at (1,1)",
        classify_orbit(&e, Locus::At(Point2::new(1.0, 1.0))).level == OrbitLevel::GeneralPosition3,
    );
    let d3 = CubicOde::from_strs(["y^2", "0", "0", "0"]).expect("fixture parses");
    check("a0 = y^2 is Degenerate3", classify_orbit(&d3, Locus::Identically).level == OrbitLevel::Degenerate3);
    for consts in [["0", "0", "0", "0"], ["1", "-2", "1/3", "5"]] {
        let c = CubicOde::from_strs(consts).expect("fixture parses");
        check("constant coefficients are Degenerate2", classify_orbit(&c, Locus::Identically).level == OrbitLevel::Degenerate2);
    }
    SuiteResult::new("transcription", 4, 0.0, 0.0, ok, notes)
}

/// Scalar invariance of `I1, I2`, covariance of the frame and the `det⁵` law
/// for `L3`.
pub fn invariance_suite(seed: u64, cases: usize, points: usize) -> SuiteResult {
    let results: Vec<(f64, Vec<String>)> = (0..cases)
        .into_par_iter()
        .map(|k| {
            let mut notes = Vec::new();
            let case = match pipeline_case(seed, 1, k) {
                Ok(c) => c,
                Err(e) => return (f64::INFINITY, vec![format!("case {k}: {e}")]),
            };
            if case.rejected > 0 {
                notes.push(format!("case {k}: redrew {} degenerate equations", case.rejected));
            }
            let (b, bt) = match (InvariantBundle::new(&case.ode), InvariantBundle::new(&case.pushed)) {
                (Ok(b), Ok(bt)) => (b, bt),
                (Err(e), _) | (_, Err(e)) => return (f64::INFINITY, vec![format!("case {k}: {e}")]),
            };
            let mut rng = case_rng(seed, 2, k as u64);
            let pts = general_points(&mut rng, &b, unit_domain(), points);
            if pts.len() < points {
                notes.push(format!("case {k}: only {} general-position points", pts.len()));
            }
            let mut worst: f64 = 0.0;
            for (p, v) in pts {
                let (Ok(q), Ok(jac)) = (case.map.apply(p), case.map.jacobian(p)) else {
                    return (f64::INFINITY, vec![format!("case {k}: map undefined at ({}, {})", p.x, p.y)]);
                };
                let Ok(w) = bt.eval(q) else {
                    return (f64::INFINITY, vec![format!("case {k}: pushed invariants undefined at ({}, {})", q.x, q.y)]);
                };
                let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
                let push = |xi: [f64; 2]| {
                    [jac[0][0] * xi[0] + jac[0][1] * xi[1], jac[1][0] * xi[0] + jac[1][1] * xi[1]]
                };
                let (f1, f2) = (push(v.xi1), push(v.xi2));
                let errs = [
                    rel(w.i1, v.i1),
                    rel(w.i2, v.i2),
                    rel(f1[0], w.xi1[0]),
                    rel(f1[1], w.xi1[1]),
                    rel(f2[0], w.xi2[0]),
                    rel(f2[1], w.xi2[1]),
                    (w.l3 * det.powi(5) - v.l3).abs() / v.l3.abs(),
                ];
                worst = errs.iter().copied().fold(worst, f64::max);
            }
            (worst, notes)
        })
        .collect();
    collect_suite("invariance", results, 1e-6)
}

fn collect_suite(name: &'static str, results: Vec<(f64, Vec<String>)>, threshold: f64) -> SuiteResult {
    let cases = results.len();
    let worst = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let notes = results.into_iter().flat_map(|r| r.1).collect();
    SuiteResult::new(name, cases, worst, threshold, true, notes)
}

/// Identity and composition laws, and the closed form under the swap map.
pub fn pushforward_suite(seed: u64, cases: usize) -> SuiteResult {
    let results: Vec<(f64, Vec<String>)> = (0..cases)
        .into_par_iter()
        .map(|k| {
            let mut rng = case_rng(seed, 3, k as u64);
            let ode = CubicOde::from_array([(); 4].map(|_| random_polynomial(&mut rng, 2)));
            let g = random_map(&mut rng, kind_for(k), unit_domain());
            let f = random_map(&mut rng, kind_for(k + 1), image_domain(&g, 9));
            let mut failures = Vec::new();
            let opts = EquivalenceOptions { trials: 30, tol: 1e-8, ..Default::default() };
            let same = |a: &CubicOde, b: &CubicOde, rng: &mut ChaCha8Rng| {
                (0..4).all(|i| equivalent_expr(a.coeff(i), b.coeff(i), &opts, rng).unwrap_or(false))
            };
            match pushforward_ode(&ode, &PointMap::identity(unit_domain())) {
                Ok(id) if same(&ode, &id, &mut rng) => {}
                _ => failures.push(format!("case {k}: identity law")),
            }
            let composed = compose_point_maps(&f, &g).and_then(|fg| pushforward_ode(&ode, &fg));
            let stepwise = pushforward_ode(&ode, &g).and_then(|eg| pushforward_ode(&eg, &f));
            match (composed, stepwise) {
                (Ok(a), Ok(b)) if same(&a, &b, &mut rng) => {}
                _ => failures.push(format!("case {k}: composition law")),
            }
            match pushforward_detailed(&ode, &g) {
                Ok(p) if p.remainder.is_zero() => {}
                _ => failures.push(format!("case {k}: non-cubic remainder")),
            }
            let swapped = pushforward_ode(&ode, &PointMap::swap(unit_domain()));
            let swap_ok = swapped.is_ok_and(|s| {
                (0..4).all(|i| {
                    let expect = -substitute(ode.coeff(3 - i), &Expr::y(), &Expr::x());
                    (s.coeff(i) - expect).is_identically_zero()
                })
            });
            if !swap_ok {
                failures.push(format!("case {k}: swap closed form"));
            }
            (if failures.is_empty() { 0.0 } else { 1.0 }, failures)
        })
        .collect();
    collect_suite("pushforward", results, 0.0)
}

/// Images of integrated solution arcs satisfy the pushed-forward equation.
pub fn solution_suite(seed: u64, cases: usize) -> SuiteResult {
    const STEPS: usize = 300;
    const H: f64 = 1e-3;
    let results: Vec<(f64, Vec<String>)> = (0..cases)
        .into_par_iter()
        .map(|k| {
            let mut rng = case_rng(seed, 4, k as u64);
            let ode = CubicOde::from_array([(); 4].map(|_| random_polynomial(&mut rng, 2)));
            let f = random_map(&mut rng, kind_for(k), unit_domain());
            let pushed = match pushforward_ode(&ode, &f) {
                Ok(p) => p,
                Err(e) => return (f64::INFINITY, vec![format!("case {k}: {e}")]),
            };
            let mut notes = Vec::new();
            for attempt in 0..50 {
                let start = Point2::new(rng.gen_range(-0.5..=0.2), rng.gen_range(-0.5..=0.5));
                let slope = rng.gen_range(-1.0..=1.0);
                let residual = integrate_arc(&ode, start, slope, STEPS, H)
                    .and_then(|arc| mapped_arc_residual(&arc, &f, &pushed));
                match residual {
                    Ok(r) => {
                        if attempt > 0 {
                            notes.push(format!("case {k}: {attempt} starts redrawn"));
                        }
                        return (r, notes);
                    }
                    Err(_) => continue,
                }
            }
            (f64::INFINITY, vec![format!("case {k}: no usable arc")])
        })
        .collect();
    collect_suite("solution-preservation", results, 1e-4)
}

/// Equivalence of each equation with its pushforward, and non-equivalence
/// after scaling `a0`.
pub fn canonical_suite(seed: u64, cases: usize, n: usize) -> SuiteResult {
    let results: Vec<(f64, Vec<String>)> = (0..cases)
        .into_par_iter()
        .map(|k| {
            let case = match pipeline_case(seed, 5, k) {
                Ok(c) => c,
                Err(e) => return (f64::INFINITY, vec![format!("case {k}: {e}")]),
            };
            let mut notes = Vec::new();
            let dom2 = image_domain(&case.map, n);
            let v = decide_equivalence(&case.ode, &case.pushed, unit_domain(), dom2, n, DEFAULT_TOL);
            let mut worst = v.max_deviation;
            if v.status != EquivalenceStatus::Equivalent {
                notes.push(format!(
                    "case {k}: pushforward judged {} (deviation {:.3e}, coverage {:.3})",
                    v.status, v.max_deviation, v.coverage
                ));
                worst = f64::INFINITY;
            }
            let good = v
                .map_samples
                .iter()
                .filter(|m| case.map.apply(m.source).is_ok_and(|fp| {
                    (fp.x - m.target.x).abs().max((fp.y - m.target.y).abs()) <= 1e-5 * (1.0 + fp.x.abs().max(fp.y.abs()))
                }))
                .count();
            if (good as f64) < 0.9 * v.map_samples.len() as f64 {
                notes.push(format!("case {k}: recovered map matches at {good} of {} nodes", v.map_samples.len()));
                worst = f64::INFINITY;
            }
            let [a0, a1, a2, a3] = case.ode.coeffs().clone();
            let scaled = CubicOde::new(Expr::ratio(11, 10) * a0, a1, a2, a3);
            let w = decide_equivalence(&case.ode, &scaled, unit_domain(), unit_domain(), n, DEFAULT_TOL);
            if w.status != EquivalenceStatus::NotEquivalent {
                notes.push(format!("case {k}: scaled a0 judged {} (coverage {:.3})", w.status, w.coverage));
                worst = f64::INFINITY;
            }
            (worst, notes)
        })
        .collect();
    collect_suite("canonical", results, DEFAULT_TOL)
}

/// Defining relation of Tresse derivatives and the exact derivative of `I1`.
pub fn tresse_suite(seed: u64, cases: usize, points: usize) -> SuiteResult {
    let results: Vec<(f64, Vec<String>)> = (0..cases)
        .into_par_iter()
        .map(|k| {
            let mut rng = case_rng(seed, 6, k as u64);
            let (ode, _) = random_general_ode(&mut rng);
            let b = match InvariantBundle::new(&ode) {
                Ok(b) => b,
                Err(e) => return (f64::INFINITY, vec![format!("case {k}: {e}")]),
            };
            let mut notes = Vec::new();
            if k == 0 {
                let (d1, d2) = tresse_derivative(&b.i1, &b);
                if !(d1.is_one() && d2.is_zero()) {
                    return (f64::INFINITY, vec![format!("case {k}: dI1/dI is not exactly (1, 0)")]);
                }
            }
            let h = ode.coeff(0).clone();
            let grads = crate::invariants::invariant_gradients(&b);
            let tape = crate::expr::Tape::new(&[
                grads[0].clone(),
                grads[1].clone(),
                grads[2].clone(),
                grads[3].clone(),
                crate::expr::diff(&h, crate::Var::X),
                crate::expr::diff(&h, crate::Var::Y),
            ]);
            let mut worst: f64 = 0.0;
            let mut used = 0;
            for (p, _) in general_points(&mut rng, &b, unit_domain(), 4 * points) {
                if used == points {
                    break;
                }
                let Ok(v) = tape.eval(p) else { continue };
                let grad = [v[0], v[1], v[2], v[3]];
                let Ok((d1, d2)) = solve_tresse(grad, [v[4], v[5]], p) else { continue };
                used += 1;
                let rx = d1 * grad[0] + d2 * grad[2];
                let ry = d1 * grad[1] + d2 * grad[3];
                worst = worst.max(rel(rx, v[4])).max(rel(ry, v[5]));
            }
            if used < points {
                notes.push(format!("case {k}: only {used} usable points"));
            }
            (worst, notes)
        })
        .collect();
    collect_suite("tresse", results, 1e-9)
}

/// Sizes of a selftest run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SuiteSizes {
    pub invariance: usize,
    pub pushforward: usize,
    pub solution: usize,
    pub canonical: usize,
    pub tresse: usize,
    pub points: usize,
    pub grid: usize,
}

impl SuiteSizes {
    pub const FULL: SuiteSizes =
        SuiteSizes { invariance: 20, pushforward: 20, solution: 10, canonical: 10, tresse: 10, points: 10, grid: 41 };

    /// Every suite with `trials` cases.
    pub fn uniform(trials: usize, grid: usize) -> SuiteSizes {
        let t = trials.max(1);
        SuiteSizes { invariance: t, pushforward: t, solution: t, canonical: t, tresse: t, points: 10, grid }
    }
}

pub fn run_all(seed: u64, sizes: SuiteSizes) -> Vec<SuiteResult> {
    vec![
        transcription_suite(),
        invariance_suite(seed, sizes.invariance, sizes.points),
        pushforward_suite(seed, sizes.pushforward),
        solution_suite(seed, sizes.solution),
        canonical_suite(seed, sizes.canonical, sizes.grid),
        tresse_suite(seed, sizes.tresse, sizes.points),
    ]
}

/// True when the suite metric is a count of failures rather than a numeric error.
pub fn is_exact(r: &SuiteResult) -> bool {
    r.threshold.is_zero()
}
