//! Canonical chart `g = (I1, I2)`, the canonical form of an equation in that
//! chart, and the sampled equivalence decision.
//!
//! Two equations in general position are point-equivalent exactly when their
//! canonical forms coincide; the equivalence is then `g2⁻¹ ∘ g1`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::expr::{diff, Expr, Point2, Tape, Var};
use crate::invariants::{InvariantBundle, POINTWISE_ZERO};
use crate::ode::{transform_cubic, CubicOde, Domain, Jet2};
use crate::{Error, Result};

/// Nodes with `|det Dg|` at or below this are excluded from the mask.
pub const JAC_TOL: f64 = 1e-8;
/// Default relative tolerance for comparing canonical coefficients.
pub const DEFAULT_TOL: f64 = 1e-5;
/// Minimum fraction of grid nodes that must be matched to claim equivalence.
pub const COVERAGE_THRESHOLD: f64 = 0.25;
pub const NEWTON_MAX_ITER: usize = 50;
/// Newton stops once `|g(p) − target|∞ ≤ NEWTON_RESIDUAL · (1 + |target|∞)`.
pub const NEWTON_RESIDUAL: f64 = 1e-10;
/// Degree of the least-squares polynomial reported for a recovered map.
pub const FIT_DEGREE: u32 = 3;

/// Seeds tried per target when matching two charts.
const MATCH_SEEDS: usize = 12;
/// Distinct converged preimages examined per node.
const MAX_CANDIDATES: usize = 3;
/// Extra sweeps that retry poorly matched nodes from their neighbours.
const REPAIR_PASSES: usize = 3;
/// Step halvings allowed per Newton iteration.
const MAX_HALVINGS: usize = 8;

const L1: usize = 0;
const L2: usize = 1;
const L3: usize = 2;
const G: usize = 3;
const GRAD: usize = 5;

/// Compiled chart data of one equation. The first tape yields `L1, L2, L3,
/// I1, I2` and the gradients of `I1, I2`; the optional second tape yields the
/// Hessians of `I1, I2` followed by the ODE coefficients.
struct ChartEngine {
    first: Tape,
    second: Option<Tape>,
}

/// Chart data at a single point.
#[derive(Clone, Copy, Debug)]
struct ChartPoint {
    g: [f64; 2],
    /// `[∂x I1, ∂y I1, ∂x I2, ∂y I2]`.
    grad: [f64; 4],
    general_position: bool,
}

impl ChartPoint {
    fn jacobian(&self) -> f64 {
        self.grad[0] * self.grad[3] - self.grad[1] * self.grad[2]
    }

    fn usable(&self) -> bool {
        self.general_position && self.jacobian().abs() > JAC_TOL
    }
}

impl ChartEngine {
    fn new(e: &CubicOde, second_order: bool) -> Result<ChartEngine> {
        let b = match InvariantBundle::new(e) {
            Ok(b) => b,
            Err(Error::DegenerateOrbit(_)) => return Err(Error::NowhereGeneralPosition),
            Err(other) => return Err(other),
        };
        let d = |e: &Expr, v| diff(e, v);
        let (i1x, i1y, i2x, i2y) = (d(&b.i1, Var::X), d(&b.i1, Var::Y), d(&b.i2, Var::X), d(&b.i2, Var::Y));
        let second = second_order.then(|| {
            let mut outs = vec![
                d(&i1x, Var::X),
                d(&i1x, Var::Y),
                d(&i1y, Var::Y),
                d(&i2x, Var::X),
                d(&i2x, Var::Y),
                d(&i2y, Var::Y),
            ];
            outs.extend(e.coeffs().iter().cloned());
            Tape::new(&outs)
        });
        let first = Tape::new(&[b.l1, b.l2, b.l3, b.i1, b.i2, i1x, i1y, i2x, i2y]);
        Ok(ChartEngine { first, second })
    }

    fn eval(&self, p: Point2) -> Option<ChartPoint> {
        let v = self.first.eval(p).ok()?;
        if v.iter().any(|x| !x.is_finite()) {
            return None;
        }
        let general_position =
            (v[L1].abs() > POINTWISE_ZERO || v[L2].abs() > POINTWISE_ZERO) && v[L3].abs() > POINTWISE_ZERO;
        let grad = [v[GRAD], v[GRAD + 1], v[GRAD + 2], v[GRAD + 3]];
        Some(ChartPoint { g: [v[G], v[G + 1]], grad, general_position })
    }

    fn sample(&self, p: Point2) -> NodeSample {
        match self.eval(p) {
            Some(c) => {
                let coeffs = if c.usable() { self.coeffs(p, &c) } else { None };
                let mask = c.usable() && (self.second.is_none() || coeffs.is_some());
                NodeSample { point: p, g: c.g, jacobian: c.jacobian(), mask, coeffs }
            }
            None => NodeSample { point: p, g: [f64::NAN; 2], jacobian: f64::NAN, mask: false, coeffs: None },
        }
    }

    /// Canonical coefficients at `p` given the chart data there.
    fn coeffs(&self, p: Point2, c: &ChartPoint) -> Option<[f64; 4]> {
        let v = self.second.as_ref()?.eval(p).ok()?;
        let jet = |g: usize, h: usize| Jet2 { dx: c.grad[g], dy: c.grad[g + 1], dxx: v[h], dxy: v[h + 1], dyy: v[h + 2] };
        let a = [v[6], v[7], v[8], v[9]];
        let t = transform_cubic(&a, &jet(0, 0), &jet(2, 3));
        let det3 = t.det.powi(3);
        let out = t.numerators.map(|n| n / det3);
        out.iter().all(|x| x.is_finite()).then_some(out)
    }
}

/// One lattice node of a sampled canonical chart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeSample {
    pub point: Point2,
    /// `(x̃, ỹ) = (I1, I2)`; NaN where the invariants are undefined.
    pub g: [f64; 2],
    /// `det D(g)`; NaN where undefined.
    pub jacobian: f64,
    /// General position and `|jacobian| > JAC_TOL`.
    pub mask: bool,
    /// Canonical coefficients `J̃0..J̃3` at `g`; present on masked nodes of a
    /// complete canonical form.
    pub coeffs: Option<[f64; 4]>,
}

/// Canonical chart of an equation sampled on an `n × n` lattice, row-major
/// with `x` varying fastest.
#[derive(Clone)]
pub struct CanonicalForm {
    pub domain: Domain,
    pub n: usize,
    pub nodes: Vec<NodeSample>,
    engine: Arc<ChartEngine>,
}

impl fmt::Debug for CanonicalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CanonicalForm")
            .field("domain", &self.domain)
            .field("n", &self.n)
            .field("masked", &self.masked_count())
            .finish()
    }
}

impl CanonicalForm {
    fn build(e: &CubicOde, domain: Domain, n: usize, second_order: bool) -> Result<CanonicalForm> {
        let engine = Arc::new(ChartEngine::new(e, second_order)?);
        let nodes: Vec<NodeSample> = domain.grid(n).into_par_iter().map(|p| engine.sample(p)).collect();
        if !nodes.iter().any(|s| s.mask) {
            return Err(Error::NowhereGeneralPosition);
        }
        Ok(CanonicalForm { domain, n, nodes, engine })
    }

    pub fn masked_count(&self) -> usize {
        self.nodes.iter().filter(|s| s.mask).count()
    }

    pub fn has_coefficients(&self) -> bool {
        self.engine.second.is_some()
    }

    /// Chart data at an arbitrary point, as if it were a lattice node.
    pub fn sample_at(&self, p: Point2) -> NodeSample {
        self.engine.sample(p)
    }

    /// `g` at an arbitrary point of the plane.
    pub fn chart_at(&self, p: Point2) -> Option<[f64; 2]> {
        self.engine.eval(p).map(|c| c.g)
    }

    /// Canonical coefficients at an arbitrary point where the chart is usable.
    pub fn coefficients_at(&self, p: Point2) -> Option<[f64; 4]> {
        let c = self.engine.eval(p).filter(ChartPoint::usable)?;
        self.engine.coeffs(p, &c)
    }
}

/// Samples `g = (I1, I2)`, its Jacobian and the general-position mask.
pub fn canonical_chart(e: &CubicOde, domain: Domain, n: usize) -> Result<CanonicalForm> {
    CanonicalForm::build(e, domain, n, false)
}

/// [`canonical_chart`] plus the canonical coefficients at every masked node.
pub fn canonical_form(e: &CubicOde, domain: Domain, n: usize) -> Result<CanonicalForm> {
    CanonicalForm::build(e, domain, n, true)
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise convex hull (monotone chain).
fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn in_hull(hull: &[[f64; 2]], t: [f64; 2]) -> bool {
    let scale = hull.iter().fold(1.0f64, |m, p| m.max(p[0].abs()).max(p[1].abs()));
    let slack = 1e-12 * scale * scale;
    match hull.len() {
        0 => false,
        1 => (hull[0][0] - t[0]).abs() <= 1e-12 * scale && (hull[0][1] - t[1]).abs() <= 1e-12 * scale,
        2 => cross(hull[0], hull[1], t).abs() <= slack
            && (t[0] - hull[0][0]) * (t[0] - hull[1][0]) <= slack
            && (t[1] - hull[0][1]) * (t[1] - hull[1][1]) <= slack,
        k => (0..k).all(|i| cross(hull[i], hull[(i + 1) % k], t) >= -slack),
    }
}

/// Precomputed data for repeated chart inversion.
pub struct ChartInverter<'a> {
    form: &'a CanonicalForm,
    hull: Vec<[f64; 2]>,
    masked: Vec<usize>,
}

impl<'a> ChartInverter<'a> {
    pub fn new(form: &'a CanonicalForm) -> ChartInverter<'a> {
        let masked: Vec<usize> = (0..form.nodes.len()).filter(|&k| form.nodes[k].mask).collect();
        let hull = convex_hull(masked.iter().map(|&k| form.nodes[k].g).collect());
        ChartInverter { form, hull, masked }
    }

    fn check_target(&self, target: [f64; 2]) -> Result<()> {
        if !(target[0].is_finite() && target[1].is_finite()) || !in_hull(&self.hull, target) {
            return Err(Error::OutOfRange(format!("({}, {}) is outside the chart image", target[0], target[1])));
        }
        Ok(())
    }

    /// Masked nodes ordered by distance of their chart value to `target`.
    fn nearest(&self, target: [f64; 2], k: usize) -> Vec<Point2> {
        let mut order: Vec<(f64, usize)> =
            self.masked.iter().map(|&i| (dist2(self.form.nodes[i].g, target), i)).collect();
        let k = k.min(order.len());
        if k == 0 {
            return Vec::new();
        }
        order.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        order.truncate(k);
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        order.into_iter().map(|(_, i)| self.form.nodes[i].point).collect()
    }

    /// Newton from `seed`, accepting only solutions inside the domain.
    pub fn invert_from(&self, seed: Point2, target: [f64; 2]) -> Result<Point2> {
        let p = newton(&self.form.engine, seed, target)?;
        let d = self.form.domain;
        let slack = 1e-12 * (1.0 + d.x1.abs().max(d.x0.abs()).max(d.y0.abs()).max(d.y1.abs()));
        let inside = Domain { x0: d.x0 - slack, x1: d.x1 + slack, y0: d.y0 - slack, y1: d.y1 + slack };
        if !inside.contains(p) {
            return Err(Error::OutOfRange(format!(
                "preimage ({}, {}) of ({}, {}) lies outside {}",
                p.x, p.y, target[0], target[1], d
            )));
        }
        Ok(p)
    }

    /// Point `p` of the domain with `g(p) = target`, seeded from the nearest
    /// masked node and then from the next nearest ones until Newton converges.
    pub fn invert(&self, target: [f64; 2]) -> Result<Point2> {
        self.check_target(target)?;
        let mut first_error = None;
        for seed in self.nearest(target, MATCH_SEEDS) {
            match self.invert_from(seed, target) {
                Ok(p) => return Ok(p),
                Err(e) => {
                    first_error.get_or_insert(e);
                }
            }
        }
        Err(first_error.unwrap_or(Error::NowhereGeneralPosition))
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn residual(g: [f64; 2], t: [f64; 2]) -> f64 {
    (g[0] - t[0]).abs().max((g[1] - t[1]).abs())
}

/// Damped Newton iteration for `g(p) = target`.
fn newton(engine: &ChartEngine, seed: Point2, target: [f64; 2]) -> Result<Point2> {
    let goal = NEWTON_RESIDUAL * (1.0 + target[0].abs().max(target[1].abs()));
    let mut p = seed;
    let mut here = engine.eval(p).ok_or(Error::NoConvergence { iterations: 0 })?;
    let mut res = residual(here.g, target);
    let mut history = Vec::with_capacity(NEWTON_MAX_ITER);
    for it in 0..NEWTON_MAX_ITER {
        if res <= goal {
            return Ok(polish(engine, p, here, target));
        }
        // Give up once five iterations fail to halve the residual.
        if it >= 10 && res > 0.5 * history[it - 5] {
            return Err(Error::NoConvergence { iterations: it });
        }
        history.push(res);
        let Some(step) = newton_step(&here, target) else {
            return Err(Error::NoConvergence { iterations: it });
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial = Point2::new(p.x - lambda * step[0], p.y - lambda * step[1]);
            if let Some(next) = engine.eval(trial) {
                let r = residual(next.g, target);
                if r < res || r <= goal {
                    p = trial;
                    here = next;
                    res = r;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence { iterations: it + 1 });
        }
    }
    if res <= goal {
        Ok(polish(engine, p, here, target))
    } else {
        Err(Error::NoConvergence { iterations: NEWTON_MAX_ITER })
    }
}

fn newton_step(c: &ChartPoint, target: [f64; 2]) -> Option<[f64; 2]> {
    let det = c.jacobian();
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let [a, b, cc, d] = c.grad;
    let (r1, r2) = (c.g[0] - target[0], c.g[1] - target[1]);
    Some([(d * r1 - b * r2) / det, (a * r2 - cc * r1) / det])
}

/// Up to two undamped steps past the stopping criterion, kept while they
/// reduce the residual.
fn polish(engine: &ChartEngine, mut p: Point2, mut here: ChartPoint, target: [f64; 2]) -> Point2 {
    for _ in 0..2 {
        let Some(step) = newton_step(&here, target) else { break };
        let trial = Point2::new(p.x - step[0], p.y - step[1]);
        match engine.eval(trial) {
            Some(next) if residual(next.g, target) < residual(here.g, target) => {
                p = trial;
                here = next;
            }
            _ => break,
        }
    }
    p
}

/// Newton inversion of the chart, seeded from the nearest masked node.
pub fn invert_chart_at(form: &CanonicalForm, target: [f64; 2]) -> Result<Point2> {
    ChartInverter::new(form).invert(target)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EquivalenceStatus {
    Equivalent,
    NotEquivalent,
    Inconclusive,
}

impl EquivalenceStatus {
    pub fn name(self) -> &'static str {
        match self {
            EquivalenceStatus::Equivalent => "Equivalent",
            EquivalenceStatus::NotEquivalent => "NotEquivalent",
            EquivalenceStatus::Inconclusive => "Inconclusive",
        }
    }
}

impl fmt::Display for EquivalenceStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A matched pair `f(source) = target` of the recovered map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapSample {
    pub source: Point2,
    pub target: Point2,
    /// Canonical-coefficient mismatch at this pair.
    pub deviation: f64,
}

/// Least-squares polynomial approximation of a sampled planar map.
#[derive(Clone, Debug, PartialEq)]
pub struct FittedMap {
    /// Exponent pairs `(i, j)` of the monomials `x^i y^j`.
    pub monomials: Vec<(u32, u32)>,
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
    /// Root-mean-square residual over the fitted samples.
    pub rms: f64,
}

fn monomials(degree: u32) -> Vec<(u32, u32)> {
    (0..=degree).flat_map(|d| (0..=d).rev().map(move |i| (i, d - i))).collect()
}

fn monomial_row(p: Point2, mons: &[(u32, u32)]) -> Vec<f64> {
    mons.iter().map(|&(i, j)| p.x.powi(i as i32) * p.y.powi(j as i32)).collect()
}

impl FittedMap {
    pub fn fit(samples: &[MapSample], degree: u32) -> Option<FittedMap> {
        let mons = monomials(degree);
        if samples.len() < 2 * mons.len() {
            return None;
        }
        let rows: Vec<f64> = samples.iter().flat_map(|s| monomial_row(s.source, &mons)).collect();
        let a = DMatrix::from_row_slice(samples.len(), mons.len(), &rows);
        let svd = a.clone().svd(true, true);
        let solve = |rhs: DVector<f64>| svd.solve(&rhs, 1e-12).ok();
        let fx = solve(DVector::from_iterator(samples.len(), samples.iter().map(|s| s.target.x)))?;
        let fy = solve(DVector::from_iterator(samples.len(), samples.iter().map(|s| s.target.y)))?;
        let rx = &a * &fx;
        let ry = &a * &fy;
        let sq: f64 = samples
            .iter()
            .enumerate()
            .map(|(k, s)| (rx[k] - s.target.x).powi(2) + (ry[k] - s.target.y).powi(2))
            .sum();
        Some(FittedMap {
            monomials: mons,
            fx: fx.iter().copied().collect(),
            fy: fy.iter().copied().collect(),
            rms: (sq / samples.len() as f64).sqrt(),
        })
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        let row = monomial_row(p, &self.monomials);
        let dot = |c: &[f64]| row.iter().zip(c).map(|(a, b)| a * b).sum();
        Point2::new(dot(&self.fx), dot(&self.fy))
    }
}

#[derive(Clone, Debug)]
pub struct EquivalenceVerdict {
    pub status: EquivalenceStatus,
    /// Largest canonical-coefficient mismatch over matched nodes (0 if none).
    pub max_deviation: f64,
    /// Matched nodes as a fraction of all grid nodes of the first equation.
    pub coverage: f64,
    pub map_samples: Vec<MapSample>,
    pub fitted_map: Option<FittedMap>,
    /// Notes explaining an inconclusive or low-coverage outcome.
    pub reasons: Vec<String>,
}

impl EquivalenceVerdict {
    fn inconclusive(reason: String) -> EquivalenceVerdict {
        EquivalenceVerdict {
            status: EquivalenceStatus::Inconclusive,
            max_deviation: 0.0,
            coverage: 0.0,
            map_samples: Vec::new(),
            fitted_map: None,
            reasons: vec![reason],
        }
    }
}

/// Largest relative difference between two coefficient quadruples.
pub fn coefficient_deviation(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / (1.0 + x.abs().max(y.abs()))).fold(0.0, f64::max)
}

/// Compares the canonical forms of `e1` on `dom1` and `e2` on `dom2`.
///
/// Each masked node `p` of the first chart is carried to `q = g2⁻¹(g1(p))` and
/// the canonical coefficients at `p` and `q` are compared. Failures to build
/// either chart produce an inconclusive verdict with the reason attached.
pub fn decide_equivalence(
    e1: &CubicOde,
    e2: &CubicOde,
    dom1: Domain,
    dom2: Domain,
    n: usize,
    tol: f64,
) -> EquivalenceVerdict {
    let (c1, c2) = rayon::join(|| canonical_form(e1, dom1, n), || canonical_form(e2, dom2, n));
    let c1 = match c1 {
        Ok(c) => c,
        Err(e) => return EquivalenceVerdict::inconclusive(format!("first equation: {e}")),
    };
    let c2 = match c2 {
        Ok(c) => c,
        Err(e) => return EquivalenceVerdict::inconclusive(format!("second equation: {e}")),
    };
    compare_forms(&c1, &c2, tol)
}

/// First-order guess for `f(p)` from a matched neighbour, using
/// `Df = Dg2⁻¹ Dg1`.
fn predicted_seed(c1: &CanonicalForm, c2: &CanonicalForm, nb: &MapSample, p: Point2) -> Option<Point2> {
    let a = c1.engine.eval(nb.source)?;
    let b = c2.engine.eval(nb.target)?;
    let (dx, dy) = (p.x - nb.source.x, p.y - nb.source.y);
    let dg = [a.grad[0] * dx + a.grad[1] * dy, a.grad[2] * dx + a.grad[3] * dy];
    let det = b.jacobian();
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let [g1x, g1y, g2x, g2y] = b.grad;
    let step = [(g2y * dg[0] - g1y * dg[1]) / det, (g1x * dg[1] - g2x * dg[0]) / det];
    Some(Point2::new(nb.target.x + step[0], nb.target.y + step[1]))
}

/// Matches one masked node of the first chart. Candidate preimages come from
/// the neighbouring matches and from the nearest nodes of the second chart; the
/// first candidate within `tol`, or else the best one, is kept.
fn match_node(
    s: &NodeSample,
    hints: impl Iterator<Item = Point2>,
    inverter: &ChartInverter<'_>,
    c2: &CanonicalForm,
    tol: f64,
    search_nearest: bool,
) -> std::result::Result<MapSample, &'static str> {
    let j1 = s.coeffs.ok_or("missing coefficients")?;
    inverter.check_target(s.g).map_err(|_| "target outside the chart image")?;
    let nearest = if search_nearest { inverter.nearest(s.g, MATCH_SEEDS) } else { Vec::new() };
    let seeds = hints.chain(nearest);
    let mut best: Option<MapSample> = None;
    let mut last_err = "no candidate preimage";
    let mut found: Vec<Point2> = Vec::new();
    for seed in seeds {
        let q = match inverter.invert_from(seed, s.g) {
            Ok(q) => q,
            Err(e) => {
                last_err = match e {
                    Error::OutOfRange(_) => "preimage outside the domain",
                    _ => "Newton iteration did not converge",
                };
                continue;
            }
        };
        if found.iter().any(|f| f.dist(&q) < 1e-9) {
            continue;
        }
        found.push(q);
        if found.len() > MAX_CANDIDATES {
            break;
        }
        let Some(j2) = c2.coefficients_at(q) else {
            last_err = "second chart not usable at the preimage";
            continue;
        };
        let m = MapSample { source: s.point, target: q, deviation: coefficient_deviation(&j1, &j2) };
        if best.is_none_or(|b| m.deviation < b.deviation) {
            best = Some(m);
        }
        if m.deviation <= tol {
            break;
        }
    }
    best.ok_or(last_err)
}

/// Matching and verdict for two complete canonical forms.
pub fn compare_forms(c1: &CanonicalForm, c2: &CanonicalForm, tol: f64) -> EquivalenceVerdict {
    let inverter = ChartInverter::new(c2);
    let n = c1.n;
    let neighbours = |k: usize, all: bool| {
        let (i, j) = ((k % n) as isize, (k / n) as isize);
        let offsets: &[(isize, isize)] = if all {
            &[(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (1, -1), (-1, 1), (1, 1)]
        } else {
            &[(-1, 0), (0, -1), (-1, -1), (1, -1)]
        };
        offsets
            .iter()
            .map(move |(di, dj)| (i + di, j + dj))
            .filter(|&(a, b)| a >= 0 && b >= 0 && (a as usize) < n && (b as usize) < n)
            .map(|(a, b)| b as usize * n + a as usize)
            .collect::<Vec<_>>()
    };
    let mut outcomes: Vec<Option<std::result::Result<MapSample, &'static str>>> = vec![None; c1.nodes.len()];
    let is_good = |o: &Option<std::result::Result<MapSample, &'static str>>| {
        matches!(o, Some(Ok(m)) if m.deviation <= tol)
    };
    // Row-major sweep seeded by earlier neighbours, then repair passes seeded
    // by every well-matched neighbour.
    for pass in 0..=REPAIR_PASSES {
        let mut changed = false;
        for k in 0..c1.nodes.len() {
            let s = &c1.nodes[k];
            if !s.mask || (pass > 0 && is_good(&outcomes[k])) {
                continue;
            }
            let hints: Vec<Point2> = neighbours(k, pass > 0)
                .into_iter()
                .filter_map(|nb| match &outcomes[nb] {
                    Some(Ok(m)) if m.deviation <= tol => Some(*m),
                    _ => None,
                })
                .flat_map(|m| predicted_seed(c1, c2, &m, s.point).into_iter().chain([m.target]))
                .collect();
            if pass > 0 && hints.is_empty() {
                continue;
            }
            let out = if pass == 0 {
                match_node(s, hints.into_iter(), &inverter, c2, tol, true)
            } else {
                match_node(s, hints.into_iter(), &inverter, c2, tol, false)
            };
            let better = match (&outcomes[k], &out) {
                (None, _) => true,
                (Some(Err(_)), Ok(_)) => true,
                (Some(Ok(old)), Ok(new)) => new.deviation < old.deviation,
                _ => false,
            };
            if better {
                changed |= pass > 0;
                outcomes[k] = Some(out);
            }
        }
        if pass > 0 && !changed {
            break;
        }
    }
    let outcomes: Vec<std::result::Result<MapSample, &'static str>> = outcomes.into_iter().flatten().collect();
    let map_samples: Vec<MapSample> = outcomes.iter().filter_map(|o| o.as_ref().ok().copied()).collect();
    let mut reasons = Vec::new();
    let unmatched = outcomes.len() - map_samples.len();
    if unmatched > 0 {
        let mut kinds: Vec<&str> = outcomes.iter().filter_map(|o| o.as_ref().err().copied()).collect();
        kinds.sort_unstable();
        kinds.dedup();
        reasons.push(format!("{unmatched} masked nodes unmatched ({})", kinds.join("; ")));
    }
    let total = c1.nodes.len();
    let coverage = map_samples.len() as f64 / total as f64;
    let max_deviation = map_samples.iter().map(|m| m.deviation).fold(0.0, f64::max);
    let mismatched = map_samples.iter().filter(|m| m.deviation > tol).count();
    let status = if map_samples.is_empty() {
        reasons.push("no node of the first chart matched the second chart".into());
        EquivalenceStatus::Inconclusive
    } else if coverage >= COVERAGE_THRESHOLD {
        if max_deviation <= tol {
            EquivalenceStatus::Equivalent
        } else {
            EquivalenceStatus::NotEquivalent
        }
    } else if mismatched >= 5 && 2 * mismatched >= map_samples.len() {
        reasons.push(format!(
            "coverage {coverage:.3} below {COVERAGE_THRESHOLD}; {mismatched} of {} matched nodes disagree",
            map_samples.len()
        ));
        EquivalenceStatus::NotEquivalent
    } else {
        reasons.push(format!("coverage {coverage:.3} below {COVERAGE_THRESHOLD}"));
        EquivalenceStatus::Inconclusive
    };
    let fitted_map = FittedMap::fit(&map_samples, FIT_DEGREE);
    EquivalenceVerdict { status, max_deviation, coverage, map_samples, fitted_map, reasons }
}
