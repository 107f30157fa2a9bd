//! Sampling checks of the convergence hypotheses.
//!
//! Samplers can only falsify: a passing report means no violation was
//! found among the drawn points.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::singular_range;
use crate::problem::{Problem, SpdMatrix};

pub const ASSUMPTION1_TOL: f64 = 1e-10;
pub const MONOTONE_TOL: f64 = -1e-12;
pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_HALF_WIDTH: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub name: String,
    pub passed: bool,
    /// Smallest margin seen; the check passes when it clears the threshold.
    pub worst_value: f64,
    /// Point(s) attaining `worst_value`.
    pub witness: Vec<Vec<f64>>,
    pub samples: usize,
    /// Samples dropped because an evaluation failed.
    pub skipped: usize,
    pub seed: Option<u64>,
}

impl HypothesisReport {
    fn empty(name: &str, seed: Option<u64>) -> Self {
        Self {
            name: name.into(),
            passed: false,
            worst_value: f64::INFINITY,
            witness: Vec::new(),
            samples: 0,
            skipped: 0,
            seed,
        }
    }

    fn record(&mut self, value: f64, witness: &[&DVector<f64>]) {
        self.samples += 1;
        if value < self.worst_value || self.witness.is_empty() {
            self.worst_value = value;
            self.witness = witness.iter().map(|w| w.iter().copied().collect()).collect();
        }
    }

    fn finish(mut self, threshold: f64, strict: bool) -> Self {
        self.passed = self.samples > 0
            && if strict {
                self.worst_value > threshold
            } else {
                self.worst_value >= threshold
            };
        self
    }
}

/// `[-10, 10]^n`.
pub fn default_box(n: usize) -> Vec<(f64, f64)> {
    vec![(-DEFAULT_HALF_WIDTH, DEFAULT_HALF_WIDTH); n]
}

fn check_box(bounds: &[(f64, f64)], n: usize, samples: usize) -> Result<()> {
    if bounds.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bounds.len(),
        });
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("at least one sample is required".into()));
    }
    if bounds.iter().any(|&(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
        return Err(Error::InvalidParameter("sampling box must be finite with lo <= hi".into()));
    }
    Ok(())
}

fn sample(rng: &mut ChaCha8Rng, bounds: &[(f64, f64)]) -> DVector<f64> {
    DVector::from_iterator(
        bounds.len(),
        bounds
            .iter()
            .map(|&(lo, hi)| if lo == hi { lo } else { rng.gen_range(lo..=hi) }),
    )
}

/// Smallest singular value of `F'(x) + A` over uniform box samples; passes
/// when it stays above 1e-10.
pub fn check_assumption1(
    problem: &Problem,
    a: &SpdMatrix,
    bounds: &[(f64, f64)],
    samples: usize,
    seed: u64,
) -> Result<HypothesisReport> {
    let n = problem.dim();
    check_box(bounds, n, samples)?;
    if a.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = HypothesisReport::empty("assumption1", Some(seed));
    for _ in 0..samples {
        let x = sample(&mut rng, bounds);
        match problem.jacobian(&x) {
            Ok(j) => report.record(singular_range(&(j + a.matrix())).0, &[&x]),
            Err(_) => report.skipped += 1,
        }
    }
    Ok(report.finish(ASSUMPTION1_TOL, true))
}

/// `|a + A^{-1} F(a)|_{A^{1/2}} < M`.
pub fn check_start_ball(problem: &Problem, a: &SpdMatrix, anchor: &DVector<f64>, m: f64) -> Result<HypothesisReport> {
    if !(m > 0.0) {
        return Err(Error::InvalidParameter(format!("ball radius must be > 0, got {m}")));
    }
    let center = anchor + a.solve(&problem.eval(anchor)?);
    let norm = a.a_norm(&center)?;
    let mut report = HypothesisReport::empty("start_ball", None);
    // Margin is M - norm so that, as elsewhere, larger is better.
    report.record(m - norm, &[anchor]);
    Ok(report.finish(0.0, true))
}

/// `(x - y)^T (f(x) - f(y)) >= -1e-12` over sampled pairs at distance at least `delta`.
pub fn check_gen_monotone(
    f: &Problem,
    delta: f64,
    bounds: &[(f64, f64)],
    samples: usize,
    seed: u64,
) -> Result<HypothesisReport> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be > 0, got {delta}")));
    }
    check_box(bounds, f.dim(), samples)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = HypothesisReport::empty("gen_monotone", Some(seed));
    // Rejection sampling; a box too small for delta yields no samples and fails.
    let mut draws = 0;
    while report.samples + report.skipped < samples && draws < 100 * samples {
        draws += 1;
        let x = sample(&mut rng, bounds);
        let y = sample(&mut rng, bounds);
        if (&x - &y).norm() < delta {
            continue;
        }
        match (f.eval(&x), f.eval(&y)) {
            (Ok(fx), Ok(fy)) => report.record((&x - &y).dot(&(fx - fy)), &[&x, &y]),
            _ => report.skipped += 1,
        }
    }
    Ok(report.finish(MONOTONE_TOL, false))
}

/// Pseudo-monotonicity at a known root `r`: since `F(r) = 0` the premise
/// always holds, leaving `(x - r)^T F(x) >= 0` to sample.
pub fn check_pseudo_monotone_at(
    f: &Problem,
    root: &DVector<f64>,
    bounds: &[(f64, f64)],
    samples: usize,
    seed: u64,
) -> Result<HypothesisReport> {
    check_box(bounds, f.dim(), samples)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = HypothesisReport::empty("pseudo_monotone_at_root", Some(seed));
    for _ in 0..samples {
        let x = sample(&mut rng, bounds);
        match f.eval(&x) {
            Ok(fx) => report.record((&x - root).dot(&fx), &[&x, root]),
            Err(_) => report.skipped += 1,
        }
    }
    Ok(report.finish(MONOTONE_TOL, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn linear(c: f64) -> Problem {
        Problem::new("cx", 1, move |x| x * c)
            .unwrap()
            .with_jacobian(move |_| DMatrix::from_element(1, 1, c))
    }

    fn ex1() -> Problem {
        use std::f64::consts::PI;
        Problem::new("ex1", 1, |x| DVector::from_element(1, 2.0 * x[0] - 4.0 + (2.0 * PI * x[0]).sin()))
            .unwrap()
            .with_jacobian(|x| DMatrix::from_element(1, 1, 2.0 + 2.0 * PI * (2.0 * PI * x[0]).cos()))
    }

    #[test]
    fn assumption1_identity() {
        let a = SpdMatrix::scaled_identity(1, 1.0).unwrap();
        let r = check_assumption1(&linear(1.0), &a, &default_box(1), 50, 1).unwrap();
        assert!(r.passed);
        assert!((r.worst_value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn assumption1_exact_cancellation() {
        let a = SpdMatrix::scaled_identity(1, 1.0).unwrap();
        let r = check_assumption1(&linear(-1.0), &a, &default_box(1), 50, 1).unwrap();
        assert!(!r.passed);
        assert_eq!(r.worst_value, 0.0);
        let x = DVector::from_vec(r.witness[0].clone());
        let j = linear(-1.0).jacobian(&x).unwrap() + a.matrix();
        assert_eq!(singular_range(&j).0, r.worst_value);
    }

    #[test]
    fn assumption1_example1_large_weight() {
        let a = SpdMatrix::scaled_identity(1, 50.0).unwrap();
        let r = check_assumption1(&ex1(), &a, &default_box(1), 2000, 3).unwrap();
        assert!(r.passed);
        assert!(r.worst_value >= 52.0 - 2.0 * std::f64::consts::PI - 1e-9);
    }

    #[test]
    fn start_ball_example1() {
        let a = SpdMatrix::scaled_identity(1, 50.0).unwrap();
        let zero = DVector::zeros(1);
        let r = check_start_ball(&ex1(), &a, &zero, 1.0).unwrap();
        assert!(r.passed);
        assert!((1.0 - r.worst_value - 50f64.sqrt() * 0.08).abs() < 1e-12);
        assert!(!check_start_ball(&ex1(), &a, &zero, 0.1).unwrap().passed);
    }

    #[test]
    fn start_ball_at_root_is_anchor_norm() {
        let a = SpdMatrix::scaled_identity(1, 4.0).unwrap();
        let anchor = DVector::from_element(1, 0.0);
        let r = check_start_ball(&linear(1.0), &a, &anchor, 0.5).unwrap();
        assert_eq!(r.worst_value, 0.5);
    }

    #[test]
    fn monotone_examples() {
        let b = default_box(1);
        assert!(check_gen_monotone(&linear(1.0), 0.1, &b, 200, 2).unwrap().passed);
        let neg = check_gen_monotone(&linear(-1.0), 0.1, &b, 200, 2).unwrap();
        assert!(!neg.passed);
        let (x, y) = (neg.witness[0][0], neg.witness[1][0]);
        assert_eq!((x - y) * (-x + y), neg.worst_value);

        let xsin = Problem::new("x+sin x", 1, |x| x.map(|v| v + v.sin())).unwrap();
        assert!(check_gen_monotone(&xsin, 3.0, &b, 2000, 5).unwrap().passed);
    }

    #[test]
    fn reports_are_deterministic() {
        let xsin = Problem::new("x+sin x", 1, |x| x.map(|v| v + v.sin())).unwrap();
        let b = default_box(1);
        assert_eq!(
            check_gen_monotone(&xsin, 3.0, &b, 100, 9).unwrap(),
            check_gen_monotone(&xsin, 3.0, &b, 100, 9).unwrap()
        );
    }

    #[test]
    fn pseudo_monotone_at_root() {
        let root = DVector::from_element(1, 2.0);
        assert!(check_pseudo_monotone_at(&ex1(), &root, &default_box(1), 500, 4).unwrap().passed);
        let shifted = Problem::new("2-x", 1, |x| x.map(|v| 2.0 - v)).unwrap();
        assert!(!check_pseudo_monotone_at(&shifted, &root, &default_box(1), 500, 4).unwrap().passed);
    }

    #[test]
    fn failed_evaluations_are_skipped() {
        let p = Problem::new("sqrt", 1, |x| x.map(f64::sqrt))
            .unwrap()
            .with_jacobian(|x| DMatrix::from_element(1, 1, 0.5 / x[0].sqrt()));
        let a = SpdMatrix::scaled_identity(1, 1.0).unwrap();
        let r = check_assumption1(&p, &a, &[(-1.0, 1.0)], 200, 7).unwrap();
        assert!(r.skipped > 0);
        assert_eq!(r.samples + r.skipped, 200);
    }
}
