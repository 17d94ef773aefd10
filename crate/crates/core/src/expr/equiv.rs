use rand::Rng;

use super::{Expr, Point2, Tape};
use crate::Error;

/// Default sampling box `[x0, x1, y0, y1]`.
pub const SAMPLE_BOX: [f64; 4] = [-2.0, 2.0, -2.0, 2.0];

#[derive(Clone, Copy, Debug)]
pub struct EquivalenceOptions {
    pub trials: usize,
    pub tol: f64,
    pub domain: [f64; 4],
    /// Points where a negative power has a base this small are skipped.
    pub min_denominator: f64,
}

impl Default for EquivalenceOptions {
    fn default() -> Self {
        Self { trials: 30, tol: 1e-8, domain: SAMPLE_BOX, min_denominator: 1e-8 }
    }
}

impl EquivalenceOptions {
    pub fn new(trials: usize, tol: f64) -> Self {
        Self { trials, tol, ..Self::default() }
    }
}

/// Probabilistic identity test: `e1` and `e2` agree to
/// `tol * (1 + max(|e1|, |e2|))` at `trials` random points where both are
/// defined.
pub fn equivalent_expr<R: Rng + ?Sized>(
    e1: &Expr,
    e2: &Expr,
    opts: &EquivalenceOptions,
    rng: &mut R,
) -> Result<bool, Error> {
    let trials = opts.trials.max(1);
    let tape = Tape::new(&[e1.clone(), e2.clone()]);
    let [x0, x1, y0, y1] = opts.domain;
    let max_draws = 100 * trials;
    let mut valid = 0;
    for _ in 0..max_draws {
        if valid == trials {
            break;
        }
        let p = Point2::new(rng.gen_range(x0..=x1), rng.gen_range(y0..=y1));
        let Ok(v) = tape.eval_guarded(p, opts.min_denominator) else {
            continue;
        };
        valid += 1;
        if (v[0] - v[1]).abs() > opts.tol * (1.0 + v[0].abs().max(v[1].abs())) {
            return Ok(false);
        }
    }
    if valid == 0 {
        return Err(Error::AllPointsSingular { draws: max_draws });
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn eq(a: &str, b: &str, tol: f64) -> Result<bool, Error> {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let opts = EquivalenceOptions { tol, ..Default::default() };
        equivalent_expr(&parse(a).unwrap(), &parse(b).unwrap(), &opts, &mut rng)
    }

    #[test]
    fn binomial_identity() {
        assert!(eq("(x+y)^2", "x^2 + 2*x*y + y^2", 1e-12).unwrap());
    }

    #[test]
    fn small_perturbation_detected() {
        assert!(!eq("x", "x + 0.001*y", 1e-9).unwrap());
    }

    #[test]
    fn nowhere_defined_is_an_error() {
        assert!(matches!(
            eq("(-1-x^2)^(1/2)", "0", 1e-9),
            Err(Error::AllPointsSingular { .. })
        ));
    }
}
