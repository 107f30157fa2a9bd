#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use nfph_core::bench::registry::{self, Instance};
use nfph_core::problem::fd_homotopy_jacobian;
use nfph_core::{Homotopy, HomotopyMap, NcpHomotopy, Problem, SmoothingParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const JAC_REL_TOL: f64 = 1e-5;

/// Entrywise gap scaled by the analytic Jacobian's magnitude.
pub fn jac_gap(analytic: &DMatrix<f64>, fd: &DMatrix<f64>) -> f64 {
    (analytic - fd).amax() / (1.0 + analytic.amax())
}

pub fn random_point(rng: &mut ChaCha8Rng, n: usize, half: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-half..=half))
}

pub fn fixed_problems() -> Vec<Problem> {
    vec![registry::example1(), registry::example2(), registry::example3(), registry::example4()]
}

/// Worst gap over `count` random points for each fixed problem.
pub fn worst_problem_gap(count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for p in fixed_problems() {
        for _ in 0..count {
            let x = random_point(&mut rng, p.dim(), 2.0);
            worst = worst.max(jac_gap(&p.jacobian(&x).unwrap(), &p.fd_jacobian(&x, None).unwrap()));
        }
    }
    worst
}

/// Worst gap of the three homotopy maps over random `(lambda, x)`.
pub fn worst_homotopy_gap(count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for p in fixed_problems() {
        let n = p.dim();
        let a = random_point(&mut rng, n, 1.0);
        let maps = [
            HomotopyMap::nfph(p.clone(), a.clone(), 50.0).unwrap(),
            HomotopyMap::fph(p.clone(), a.clone()).unwrap(),
            HomotopyMap::nh(p.clone(), a).unwrap(),
        ];
        for map in &maps {
            for _ in 0..count {
                let x = random_point(&mut rng, n, 2.0);
                let l = rng.gen_range(0.0..=1.0);
                let ja = map.jacobian(l, &x).unwrap();
                worst = worst.max(jac_gap(&ja, &fd_homotopy_jacobian(map, l, &x).unwrap()));
            }
        }
    }
    worst
}

/// Worst gap of `F^mu` and of the NCP homotopy on random LCPs.
pub fn worst_smoothed_gap(count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for n in [2, 4] {
        let ncp = registry::lcp_rand(n, seed).unwrap();
        let params = SmoothingParams::new(&ncp, 1.0, 1.0, None).unwrap();
        let map = NcpHomotopy::new(ncp.clone(), params).unwrap();
        for _ in 0..count {
            let z = random_point(&mut rng, 2 * n, 2.0);
            let mu = rng.gen_range(0.01..=1.0);
            let p = ncp.smoothed_problem(mu).unwrap();
            worst = worst.max(jac_gap(&p.jacobian(&z).unwrap(), &p.fd_jacobian(&z, None).unwrap()));
            let l = rng.gen_range(0.0..0.99);
            let ja = map.jacobian(l, &z).unwrap();
            worst = worst.max(jac_gap(&ja, &fd_homotopy_jacobian(&map, l, &z).unwrap()));
        }
    }
    worst
}

/// The registered NCP behind `id`.
pub fn ncp_instance(id: &str) -> nfph_core::NcpInstance {
    match registry::registry_get(id).unwrap().instance {
        Instance::Ncp(n) => n,
        Instance::Equation(_) => panic!("{id} is not an NCP"),
    }
}
