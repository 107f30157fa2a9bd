//! Named problem instances.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ncp::NcpInstance;
use crate::problem::Problem;

/// Either a square system or a complementarity problem.
#[derive(Clone, Debug)]
pub enum Instance {
    Equation(Problem),
    Ncp(NcpInstance),
}

#[derive(Clone, Debug)]
pub struct RegistryEntry {
    pub id: String,
    pub instance: Instance,
    /// Default anchor for equations; NCP runs derive theirs from beta.
    pub anchor: Option<DVector<f64>>,
    /// Known solution, when there is a closed form.
    pub solution: Option<DVector<f64>>,
}

impl RegistryEntry {
    pub fn dim(&self) -> usize {
        match &self.instance {
            Instance::Equation(p) => p.dim(),
            Instance::Ncp(n) => n.dim(),
        }
    }
}

/// Fixed ids; `lcp-rand-<n>-<seed>` and `ncp-lin-<n>` are accepted for any `n >= 1`.
pub const FIXED_IDS: [&str; 4] = ["ex1", "ex2", "ex3", "ex4"];

fn bounds(n: usize, half: f64) -> Vec<(f64, f64)> {
    vec![(-half, half); n]
}

/// `2x - 4 + sin(2 pi x)`.
pub fn example1() -> Problem {
    Problem::new("ex1", 1, |x| DVector::from_element(1, 2.0 * x[0] - 4.0 + (2.0 * PI * x[0]).sin()))
        .expect("dim 1")
        .with_jacobian(|x| DMatrix::from_element(1, 1, 2.0 + 2.0 * PI * (2.0 * PI * x[0]).cos()))
        .with_bounds(bounds(1, 100.0))
}

/// `(x^2 + q^2 - 1, sin x - q)`.
pub fn example2() -> Problem {
    Problem::new("ex2", 2, |v| {
        DVector::from_vec(vec![v[0] * v[0] + v[1] * v[1] - 1.0, v[0].sin() - v[1]])
    })
    .expect("dim 2")
    .with_jacobian(|v| DMatrix::from_row_slice(2, 2, &[2.0 * v[0], 2.0 * v[1], v[0].cos(), -1.0]))
    .with_bounds(bounds(2, 100.0))
}

/// Coefficients `(B, c)` of the linear system `B x = c`.
pub fn example3_system() -> (DMatrix<f64>, DVector<f64>) {
    (
        DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.3, 0.6, 1.0, 0.1, 0.2, 0.4, 1.0]),
        DVector::from_vec(vec![5.0, 7.0, 4.0]),
    )
}

pub fn example3() -> Problem {
    let (b, c) = example3_system();
    let jb = b.clone();
    Problem::new("ex3", 3, move |x| &b * x - &c)
        .expect("dim 3")
        .with_jacobian(move |_| jb.clone())
        .with_bounds(bounds(3, 100.0))
}

/// `arctan(100x)/pi + sin(5x/(x^2 + 0.2))/2 + 0.1x`.
pub fn example4() -> Problem {
    Problem::new("ex4", 1, |x| {
        let t = x[0];
        let u = 5.0 * t / (t * t + 0.2);
        DVector::from_element(1, (100.0 * t).atan() / PI + 0.5 * u.sin() + 0.1 * t)
    })
    .expect("dim 1")
    .with_jacobian(|x| {
        let t = x[0];
        let d = t * t + 0.2;
        let u = 5.0 * t / d;
        let du = 5.0 * (0.2 - t * t) / (d * d);
        DMatrix::from_element(1, 1, 100.0 / (PI * (1.0 + 1e4 * t * t)) + 0.5 * u.cos() * du + 0.1)
    })
    .with_bounds(bounds(1, 2.0))
}

/// Monotone LCP with `M = B^T B + I`; entries of `B` and `q` are `U[-1, 1]`
/// drawn from ChaCha8 seeded with `seed`, `B` row-major first.
pub fn lcp_rand(n: usize, seed: u64) -> Result<NcpInstance> {
    if n == 0 {
        return Err(Error::InvalidParameter("LCP dimension must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = DMatrix::from_row_iterator(n, n, (0..n * n).map(|_| rng.gen_range(-1.0..=1.0)));
    let q = DVector::from_iterator(n, (0..n).map(|_| rng.gen_range(-1.0..=1.0)));
    let m = b.transpose() * &b + DMatrix::identity(n, n);
    NcpInstance::lcp(format!("lcp-rand-{n}-{seed}"), m, q)
}

/// Deterministic LCP with `M = tridiag(-1, 4, -1)` and `q_i = (-1)^(i+1)`,
/// so roughly half the components end up active.
pub fn ncp_lin(n: usize) -> Result<NcpInstance> {
    if n == 0 {
        return Err(Error::InvalidParameter("NCP dimension must be >= 1".into()));
    }
    let m = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => 4.0,
        1 => -1.0,
        _ => 0.0,
    });
    let q = DVector::from_fn(n, |i, _| if i % 2 == 0 { -1.0 } else { 1.0 });
    NcpInstance::lcp(format!("ncp-lin-{n}"), m, q)
}

fn parse_num<T: std::str::FromStr>(part: Option<&str>, id: &str) -> Result<T> {
    part.and_then(|p| p.parse().ok())
        .ok_or_else(|| Error::UnknownProblem(id.to_string()))
}

pub fn registry_get(id: &str) -> Result<RegistryEntry> {
    let entry = |instance, anchor: &[f64], solution: Option<DVector<f64>>| RegistryEntry {
        id: id.to_string(),
        instance,
        anchor: Some(DVector::from_column_slice(anchor)),
        solution,
    };
    match id {
        "ex1" => Ok(entry(Instance::Equation(example1()), &[0.0], Some(DVector::from_element(1, 2.0)))),
        "ex2" => Ok(entry(Instance::Equation(example2()), &[0.0, 0.0], None)),
        "ex3" => {
            let (b, c) = example3_system();
            let sol = b.lu().solve(&c);
            Ok(entry(Instance::Equation(example3()), &[0.0, 0.0, 0.0], sol))
        }
        "ex4" => Ok(entry(Instance::Equation(example4()), &[0.2], Some(DVector::zeros(1)))),
        _ => {
            let ncp = if let Some(rest) = id.strip_prefix("lcp-rand-") {
                let mut parts = rest.splitn(2, '-');
                let n = parse_num(parts.next(), id)?;
                let seed = parse_num(parts.next(), id)?;
                lcp_rand(n, seed)?
            } else if let Some(rest) = id.strip_prefix("ncp-lin-") {
                ncp_lin(parse_num(Some(rest), id)?)?
            } else {
                return Err(Error::UnknownProblem(id.to_string()));
            };
            Ok(RegistryEntry {
                id: id.to_string(),
                instance: Instance::Ncp(ncp),
                anchor: None,
                solution: None,
            })
        }
    }
}
