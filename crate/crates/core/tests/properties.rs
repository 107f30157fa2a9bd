mod common;

use nalgebra::DVector;
use nfph_core::ncp::{min_ncp, phi_mu};
use nfph_core::SpdMatrix;
use proptest::prelude::*;

fn phi_vec(x: &[f64], y: &[f64], mu: f64) -> DVector<f64> {
    DVector::from_iterator(x.len(), x.iter().zip(y).map(|(&a, &b)| phi_mu(a, b, mu)))
}

fn min_vec(x: &[f64], y: &[f64]) -> DVector<f64> {
    DVector::from_iterator(x.len(), x.iter().zip(y).map(|(&a, &b)| min_ncp(a, b)))
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..=8).prop_flat_map(|n| {
        (
            prop::collection::vec(-100.0..100.0f64, n),
            prop::collection::vec(-100.0..100.0f64, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn smoothing_error_bounded((x, y) in pair(), mu in 0.0..10.0f64) {
        let n = x.len() as f64;
        let gap = (phi_vec(&x, &y, mu) - min_vec(&x, &y)).norm();
        prop_assert!(gap <= 2.0 * mu * n.sqrt() * (1.0 + 1e-12));
    }

    #[test]
    fn product_identity(a in -100.0..100.0f64, b in -100.0..100.0f64, mu in 0.0..10.0f64) {
        let d = phi_mu(a, b, mu);
        let (u, v) = (a - d / 2.0, b - d / 2.0);
        prop_assert!((u * v - mu * mu).abs() <= 1e-10 * (1.0 + a * a + b * b));
        prop_assert!(u >= -1e-12 && v >= -1e-12);
    }

    #[test]
    fn symmetric_exactly(a in -1e3..1e3f64, b in -1e3..1e3f64, mu in 0.0..10.0f64) {
        prop_assert_eq!(phi_mu(a, b, mu).to_bits(), phi_mu(b, a, mu).to_bits());
    }

    #[test]
    fn zero_smoothing_is_min(a in -1e3..1e3f64, b in -1e3..1e3f64) {
        prop_assert_eq!(phi_mu(a, b, 0.0), min_ncp(a, b));
    }

    #[test]
    fn smoothing_decreases_in_mu(a in -10.0..10.0f64, b in -10.0..10.0f64, mu in 0.01..5.0f64) {
        prop_assert!(phi_mu(a, b, mu + 0.01) < phi_mu(a, b, mu));
    }

    #[test]
    fn a_norm_is_a_norm(
        x in prop::collection::vec(-10.0..10.0f64, 3),
        y in prop::collection::vec(-10.0..10.0f64, 3),
        alpha in 0.01..100.0f64,
        c in -5.0..5.0f64,
    ) {
        let a = SpdMatrix::scaled_identity(3, alpha).unwrap();
        let (x, y) = (DVector::from_vec(x), DVector::from_vec(y));
        let nx = a.a_norm(&x).unwrap();
        prop_assert!((nx - alpha.sqrt() * x.norm()).abs() <= 1e-12 * (1.0 + nx));
        prop_assert!(a.a_norm(&(&x + &y)).unwrap() <= nx + a.a_norm(&y).unwrap() + 1e-12);
        prop_assert!((a.a_norm(&(&x * c)).unwrap() - c.abs() * nx).abs() <= 1e-10 * (1.0 + nx));
    }
}

#[test]
fn smoothing_approaches_min_on_grid() {
    for &(a, b) in &[(1.0, 2.0), (-3.0, 0.5), (0.0, 0.0), (4.0, 4.0)] {
        let gaps: Vec<f64> = [1.0, 1e-2, 1e-4, 1e-6]
            .iter()
            .map(|&mu| (phi_mu(a, b, mu) - 2.0 * f64::min(a, b)).abs())
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] <= w[0]));
        assert!(gaps[3] <= 2e-6 * (1.0 + 1e-9) + 1e-14 * (a.abs() + b.abs()), "{gaps:?}");
    }
}

#[test]
fn problem_jacobians_match_differences() {
    assert!(common::worst_problem_gap(100, 11) <= common::JAC_REL_TOL);
}

#[test]
fn homotopy_jacobians_match_differences() {
    assert!(common::worst_homotopy_gap(100, 12) <= common::JAC_REL_TOL);
}

#[test]
fn smoothed_jacobians_match_differences() {
    assert!(common::worst_smoothed_gap(100, 13) <= common::JAC_REL_TOL);
}
