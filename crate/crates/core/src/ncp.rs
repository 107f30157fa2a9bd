//! Nonlinear complementarity problems and their CHKS-smoothed reduction.
//!
//! An NCP asks for `x >= 0, f(x) >= 0, x_i f_i(x) = 0`. With a slack
//! `y` tied to `f(x)` the problem becomes the 2n-dimensional system
//!
//! ```text
//! F^mu(x, y) = ( f(x) - y + mu x ,  Phi_mu(x, y) + mu y )
//! ```
//!
//! where `Phi_mu` applies [`phi_mu`] componentwise to `(x_i, y_i)`. At
//! `mu = 0` this is the nonsmooth min-function system.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Homotopy, Problem, SpdMatrix};

/// Largest dimension accepted by [`lcp_enumerate`].
pub const MAX_ENUMERATION_DIM: usize = 12;

/// Feasibility tolerance of the enumeration oracle.
pub const LCP_TOL: f64 = 1e-10;

/// `a + b - |a - b|`, i.e. `2 min(a, b)`.
pub fn min_ncp(a: f64, b: f64) -> f64 {
    a + b - (a - b).abs()
}

/// CHKS smoothing `a + b - sqrt((a-b)^2 + 4 mu^2)`.
pub fn phi_mu(a: f64, b: f64, mu: f64) -> f64 {
    a + b - (a - b).hypot(2.0 * mu)
}

/// `beta (1 - lambda)` on `[0, 1]`.
pub fn mu_schedule(lambda: f64, beta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!("lambda {lambda} outside [0, 1]")));
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be > 0, got {beta}")));
    }
    Ok(beta * (1.0 - lambda))
}

/// A point `z = (x, y)` of the smoothed system.
#[derive(Clone, Debug, PartialEq)]
pub struct NcpPoint {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
}

impl NcpPoint {
    pub fn from_stacked(z: &DVector<f64>) -> Result<Self> {
        if !z.len().is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("stacked point has odd length {}", z.len())));
        }
        let n = z.len() / 2;
        Ok(Self {
            x: z.rows(0, n).into_owned(),
            y: z.rows(n, n).into_owned(),
        })
    }

    pub fn stacked(&self) -> DVector<f64> {
        let n = self.x.len();
        let mut z = DVector::zeros(2 * n);
        z.rows_mut(0, n).copy_from(&self.x);
        z.rows_mut(n, n).copy_from(&self.y);
        z
    }
}

/// Row-major LCP data `f(x) = M x + q`, the JSON form of an instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LcpData {
    pub n: usize,
    pub kind: String,
    #[serde(rename = "M")]
    pub m: Vec<f64>,
    pub q: Vec<f64>,
}

impl LcpData {
    pub fn new(m: &DMatrix<f64>, q: &DVector<f64>) -> Self {
        let n = q.len();
        let mut rows = Vec::with_capacity(n * n);
        for i in 0..n {
            rows.extend(m.row(i).iter());
        }
        Self {
            n,
            kind: "lcp".into(),
            m: rows,
            q: q.iter().cloned().collect(),
        }
    }

    pub fn matrix(&self) -> Result<(DMatrix<f64>, DVector<f64>)> {
        if self.kind != "lcp" {
            return Err(Error::InvalidParameter(format!("unsupported NCP kind `{}`", self.kind)));
        }
        if self.m.len() != self.n * self.n || self.q.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: self.q.len(),
            });
        }
        Ok((
            DMatrix::from_row_slice(self.n, self.n, &self.m),
            DVector::from_column_slice(&self.q),
        ))
    }
}

/// An NCP over `f: R^n -> R^n`.
#[derive(Clone, Debug)]
pub struct NcpInstance {
    f: Problem,
    lcp: Option<LcpData>,
}

impl NcpInstance {
    pub fn new(f: Problem) -> Self {
        Self { f, lcp: None }
    }

    /// `f(x) = M x + q` with analytic Jacobian `M`.
    pub fn lcp(name: impl Into<String>, m: DMatrix<f64>, q: DVector<f64>) -> Result<Self> {
        let n = q.len();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m.nrows(),
            });
        }
        let data = LcpData::new(&m, &q);
        let mj = m.clone();
        let f = Problem::new(name, n, move |x| &m * x + &q)?.with_jacobian(move |_| mj.clone());
        Ok(Self { f, lcp: Some(data) })
    }

    pub fn from_lcp_data(name: impl Into<String>, data: &LcpData) -> Result<Self> {
        let (m, q) = data.matrix()?;
        Self::lcp(name, m, q)
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    pub fn name(&self) -> &str {
        self.f.name()
    }

    pub fn map(&self) -> &Problem {
        &self.f
    }

    pub fn lcp_data(&self) -> Option<&LcpData> {
        self.lcp.as_ref()
    }

    fn split(&self, z: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let n = self.dim();
        if z.len() != 2 * n {
            return Err(Error::DimensionMismatch {
                expected: 2 * n,
                found: z.len(),
            });
        }
        Ok((z.rows(0, n).into_owned(), z.rows(n, n).into_owned()))
    }

    /// Evaluates `F^mu(z)`.
    pub fn eval_fmu(&self, z: &DVector<f64>, mu: f64) -> Result<DVector<f64>> {
        let n = self.dim();
        let (x, y) = self.split(z)?;
        let fx = self.f.eval(&x)?;
        let mut out = DVector::zeros(2 * n);
        for i in 0..n {
            out[i] = fx[i] - y[i] + mu * x[i];
            out[n + i] = phi_mu(x[i], y[i], mu) + mu * y[i];
        }
        Ok(out)
    }

    /// Analytic Jacobian of `F^mu` in `z`.
    ///
    /// At `mu = 0` the min-function has a kink wherever `x_i = y_i`; those
    /// points are refused with [`Error::Nonsmooth`].
    pub fn eval_fmu_jacobian(&self, z: &DVector<f64>, mu: f64) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let (x, y) = self.split(z)?;
        let jf = self.f.jacobian(&x)?;
        let mut j = DMatrix::zeros(2 * n, 2 * n);
        j.view_mut((0, 0), (n, n)).copy_from(&jf);
        for i in 0..n {
            j[(i, i)] += mu;
            j[(i, n + i)] = -1.0;
            let d = x[i] - y[i];
            let s = d.hypot(2.0 * mu);
            if s == 0.0 {
                return Err(Error::Nonsmooth { index: i });
            }
            j[(n + i, i)] = 1.0 - d / s;
            j[(n + i, n + i)] = 1.0 + d / s + mu;
        }
        Ok(j)
    }

    /// `d F^mu / d mu` at fixed `z`.
    pub fn eval_fmu_dmu(&self, z: &DVector<f64>, mu: f64) -> Result<DVector<f64>> {
        let n = self.dim();
        let (x, y) = self.split(z)?;
        let mut out = DVector::zeros(2 * n);
        for i in 0..n {
            out[i] = x[i];
            let s = (x[i] - y[i]).hypot(2.0 * mu);
            let dphi = if mu == 0.0 { 0.0 } else { -4.0 * mu / s };
            out[n + i] = dphi + y[i];
        }
        Ok(out)
    }

    /// `F^mu` as a [`Problem`] on R^2n.
    pub fn smoothed_problem(&self, mu: f64) -> Result<Problem> {
        let me = self.clone();
        let mj = self.clone();
        let name = format!("{}-smooth", self.name());
        let p = Problem::new(name, 2 * self.dim(), move |z| {
            me.eval_fmu(z, mu)
                .unwrap_or_else(|_| DVector::from_element(z.len(), f64::NAN))
        })?
        .with_jacobian(move |z| {
            // NaN entries surface as a domain error from Problem::jacobian.
            mj.eval_fmu_jacobian(z, mu)
                .unwrap_or_else(|_| DMatrix::from_element(z.len(), z.len(), f64::NAN))
        });
        Ok(p)
    }

    /// `max_i max(-x_i, -f_i(x), |x_i f_i(x)|)`, clamped at zero.
    pub fn comp_residual(&self, x: &DVector<f64>) -> Result<f64> {
        let fx = self.f.eval(x)?;
        Ok(x.iter()
            .zip(fx.iter())
            .map(|(&xi, &fi)| (-xi).max(-fi).max((xi * fi).abs()))
            .fold(0.0, f64::max))
    }
}

/// Parameters of an NCP homotopy run.
#[derive(Clone, Debug)]
pub struct SmoothingParams {
    beta: f64,
    weight: SpdMatrix,
    anchor: DVector<f64>,
    anchor_f_positive: bool,
}

impl SmoothingParams {
    /// Builds parameters with `A = c I` on R^2n.
    ///
    /// The anchor defaults to `(beta + 1) * 1` and must be `>= beta`
    /// componentwise; that bound is what keeps `y > 0` along the curve.
    pub fn new(ncp: &NcpInstance, beta: f64, c: f64, anchor: Option<DVector<f64>>) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be > 0, got {beta}")));
        }
        let n2 = 2 * ncp.dim();
        let anchor = anchor.unwrap_or_else(|| DVector::from_element(n2, beta + 1.0));
        if anchor.len() != n2 {
            return Err(Error::DimensionMismatch {
                expected: n2,
                found: anchor.len(),
            });
        }
        if let Some(i) = anchor.iter().position(|&v| v < beta) {
            return Err(Error::InvalidParameter(format!(
                "anchor component {i} = {} is below beta = {beta}",
                anchor[i]
            )));
        }
        let weight = SpdMatrix::scaled_identity(n2, c)?;
        let x_anchor = anchor.rows(0, ncp.dim()).into_owned();
        let anchor_f_positive = ncp.map().eval(&x_anchor)?.iter().all(|&v| v > 0.0);
        Ok(Self {
            beta,
            weight,
            anchor,
            anchor_f_positive,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn weight(&self) -> &SpdMatrix {
        &self.weight
    }

    pub fn anchor(&self) -> &DVector<f64> {
        &self.anchor
    }

    /// Whether `f(a') > 0` holds; runs proceed either way but report it.
    pub fn anchor_f_positive(&self) -> bool {
        self.anchor_f_positive
    }
}

/// `rho(lambda, z) = lambda F^mu(z) + (1 - lambda)(F^mu(z) - F^mu(a) + A(z - a))`
/// with `mu = beta (1 - lambda)`.
#[derive(Clone, Debug)]
pub struct NcpHomotopy {
    ncp: NcpInstance,
    params: SmoothingParams,
    target: Problem,
}

impl NcpHomotopy {
    pub fn new(ncp: NcpInstance, params: SmoothingParams) -> Result<Self> {
        if params.anchor().len() != 2 * ncp.dim() {
            return Err(Error::DimensionMismatch {
                expected: 2 * ncp.dim(),
                found: params.anchor().len(),
            });
        }
        let target = ncp.smoothed_problem(0.0)?;
        Ok(Self { ncp, params, target })
    }

    pub fn ncp(&self) -> &NcpInstance {
        &self.ncp
    }

    pub fn params(&self) -> &SmoothingParams {
        &self.params
    }

    // The schedule is extended linearly past lambda = 1 so trackers can
    // overshoot and interpolate back.
    fn mu(&self, lambda: f64) -> f64 {
        self.params.beta * (1.0 - lambda)
    }
}

impl Homotopy for NcpHomotopy {
    fn dim(&self) -> usize {
        2 * self.ncp.dim()
    }

    fn anchor(&self) -> &DVector<f64> {
        &self.params.anchor
    }

    fn eval(&self, lambda: f64, z: &DVector<f64>) -> Result<DVector<f64>> {
        let mu = self.mu(lambda);
        let a = &self.params.anchor;
        let fz = self.ncp.eval_fmu(z, mu)?;
        let fa = self.ncp.eval_fmu(a, mu)?;
        let g = &fz - fa + self.params.weight.matrix() * (z - a);
        Ok(fz * lambda + g * (1.0 - lambda))
    }

    fn jacobian(&self, lambda: f64, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n2 = self.dim();
        let mu = self.mu(lambda);
        let beta = self.params.beta;
        let a = &self.params.anchor;
        let w = self.params.weight.matrix();
        let block = self.ncp.eval_fmu_jacobian(z, mu)? + w * (1.0 - lambda);
        // d/dlambda of F^mu(z) - (1-lambda) F^mu(a) + (1-lambda) A (z-a), with dmu/dlambda = -beta.
        let dlambda = self.ncp.eval_fmu_dmu(z, mu)? * (-beta)
            + self.ncp.eval_fmu(a, mu)?
            + self.ncp.eval_fmu_dmu(a, mu)? * (beta * (1.0 - lambda))
            - w * (z - a);
        let mut j = block.insert_column(n2, 0.0);
        j.set_column(n2, &dlambda);
        Ok(j)
    }

    fn target(&self) -> &Problem {
        &self.target
    }
}

/// All solutions of the LCP `x >= 0, Mx + q >= 0, x^T (Mx + q) = 0`, found
/// by enumerating the 2^n active sets.
pub fn lcp_enumerate(m: &DMatrix<f64>, q: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
    let n = q.len();
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.nrows(),
        });
    }
    if n > MAX_ENUMERATION_DIM {
        return Err(Error::InvalidParameter(format!(
            "enumeration limited to n <= {MAX_ENUMERATION_DIM}, got {n}"
        )));
    }
    let mut out: Vec<DVector<f64>> = Vec::new();
    for mask in 0u32..(1u32 << n) {
        let active: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let mut x = DVector::zeros(n);
        if !active.is_empty() {
            let k = active.len();
            let sub = DMatrix::from_fn(k, k, |r, c| m[(active[r], active[c])]);
            let rhs = DVector::from_fn(k, |r, _| -q[active[r]]);
            let lu = sub.lu();
            if !lu.is_invertible() || lu.determinant().abs() < f64::EPSILON {
                continue;
            }
            let Some(xs) = lu.solve(&rhs) else { continue };
            for (r, &i) in active.iter().enumerate() {
                x[i] = xs[r];
            }
        }
        let w = m * &x + q;
        let feasible = x.iter().all(|&v| v >= -LCP_TOL) && w.iter().all(|&v| v >= -LCP_TOL);
        if feasible && !out.iter().any(|s| (s - &x).amax() <= 1e-9) {
            out.push(x);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::problem::fd_homotopy_jacobian;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn identity_ncp(shift: f64) -> NcpInstance {
        NcpInstance::lcp("id", DMatrix::identity(1, 1), v(&[shift])).unwrap()
    }

    #[test]
    fn min_function_values() {
        assert_eq!(min_ncp(2.0, 0.0), 0.0);
        assert_eq!(min_ncp(3.0, 1.0), 2.0);
        assert_eq!(min_ncp(-1.0, 4.0), -2.0);
    }

    #[test]
    fn chks_values() {
        assert_eq!(phi_mu(2.0, 0.0, 0.0), 0.0);
        assert_eq!(phi_mu(0.0, 0.0, 1.0), -2.0);
        assert_relative_eq!(phi_mu(3.0, 1.0, 0.5), 4.0 - 5f64.sqrt(), epsilon = 1e-15);
        let d = phi_mu(3.0, 1.0, 0.5);
        assert_relative_eq!((3.0 - d / 2.0) * (1.0 - d / 2.0), 0.25, epsilon = 1e-14);
    }

    #[test]
    fn schedule() {
        assert_eq!(mu_schedule(0.0, 1.7).unwrap(), 1.7);
        assert_eq!(mu_schedule(1.0, 1.7).unwrap(), 0.0);
        assert_eq!(mu_schedule(0.5, 2.0).unwrap(), 1.0);
        assert!(mu_schedule(1.5, 1.0).is_err());
        assert!(mu_schedule(0.5, 0.0).is_err());
    }

    #[test]
    fn fmu_scalar_example() {
        let ncp = identity_ncp(0.0);
        let r = ncp.eval_fmu(&v(&[1.0, 1.0]), 0.5).unwrap();
        assert_relative_eq!(r[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(r[1], 1.5, epsilon = 1e-15);
        let j = ncp.eval_fmu_jacobian(&v(&[1.0, 1.0]), 0.5).unwrap();
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[1.5, -1.0, 1.0, 1.5]));
    }

    #[test]
    fn fmu_vanishes_at_ncp_solution() {
        // f(x) = x - 1, solution x = 1, y = f(x) = 0
        let ncp = identity_ncp(-1.0);
        assert_eq!(ncp.eval_fmu(&v(&[1.0, 0.0]), 0.0).unwrap().amax(), 0.0);
    }

    #[test]
    fn kink_refused_at_zero_mu() {
        let ncp = identity_ncp(0.0);
        assert_eq!(
            ncp.eval_fmu_jacobian(&v(&[1.0, 1.0]), 0.0).unwrap_err(),
            Error::Nonsmooth { index: 0 }
        );
        assert!(ncp.eval_fmu_jacobian(&v(&[1.0, 0.0]), 0.0).is_ok());
    }

    #[test]
    fn large_mu_on_diagonal() {
        let ncp = identity_ncp(0.0);
        let j = ncp.eval_fmu_jacobian(&v(&[0.3, 0.3]), 1e6).unwrap();
        assert_eq!(j[(1, 0)], 1.0);
        assert_eq!(j[(1, 1)] - 1e6, 1.0);
    }

    fn scalar_homotopy() -> NcpHomotopy {
        let ncp = identity_ncp(0.0);
        let params = SmoothingParams::new(&ncp, 1.0, 1.0, Some(v(&[1.0, 1.0]))).unwrap();
        NcpHomotopy::new(ncp, params).unwrap()
    }

    #[test]
    fn ncp_homotopy_identities() {
        let h = scalar_homotopy();
        assert_eq!(h.eval(0.0, h.anchor()).unwrap().amax(), 0.0);
        let z = v(&[0.4, 2.5]);
        assert_eq!(h.eval(1.0, &z).unwrap(), h.ncp().eval_fmu(&z, 0.0).unwrap());
    }

    #[test]
    fn ncp_homotopy_midpoint_value() {
        // Scalar oracle: mu = 0.5, F^mu(z) = (2, phi(2,1,.5) + .5), F^mu(a) = (.5, 1.5).
        let h = scalar_homotopy();
        let r = h.eval(0.5, &v(&[2.0, 1.0])).unwrap();
        let phi = 3.0 - 2f64.sqrt();
        let fz = [2.0, phi + 0.5];
        let fa = [0.5, 1.5];
        let g = [fz[0] - fa[0] + 1.0, fz[1] - fa[1] + 0.0];
        assert_relative_eq!(r[0], 2.25, epsilon = 1e-14);
        assert_relative_eq!(r[1], 0.5 * fz[1] + 0.5 * g[1], epsilon = 1e-14);
    }

    #[test]
    fn ncp_homotopy_jacobian_matches_fd() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.5, 3.0]);
        let ncp = NcpInstance::lcp("t", m, v(&[-1.0, 0.5])).unwrap();
        let params = SmoothingParams::new(&ncp, 0.7, 1.3, None).unwrap();
        let h = NcpHomotopy::new(ncp, params).unwrap();
        let z = v(&[0.3, 1.2, -0.4, 2.0]);
        for lambda in [0.0, 0.3, 0.9] {
            let ja = h.jacobian(lambda, &z).unwrap();
            let jf = fd_homotopy_jacobian(&h, lambda, &z).unwrap();
            assert!((&ja - &jf).amax() <= 1e-5 * (1.0 + ja.amax()));
        }
    }

    #[test]
    fn anchor_below_beta_rejected() {
        let ncp = identity_ncp(0.0);
        assert!(SmoothingParams::new(&ncp, 1.0, 1.0, Some(v(&[0.5, 2.0]))).is_err());
        let p = SmoothingParams::new(&ncp, 1.0, 1.0, None).unwrap();
        assert_eq!(p.anchor().as_slice(), &[2.0, 2.0]);
        assert!(p.anchor_f_positive());
    }

    #[test]
    fn complementarity_residual() {
        let ncp = identity_ncp(-1.0);
        assert_eq!(ncp.comp_residual(&v(&[1.0])).unwrap(), 0.0);
        assert_eq!(ncp.comp_residual(&v(&[2.0])).unwrap(), 2.0);
    }

    #[test]
    fn enumeration_examples() {
        let one = DMatrix::identity(1, 1);
        assert_eq!(lcp_enumerate(&one, &v(&[-1.0])).unwrap(), vec![v(&[1.0])]);
        assert_eq!(lcp_enumerate(&one, &v(&[1.0])).unwrap(), vec![v(&[0.0])]);
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let sols = lcp_enumerate(&m, &v(&[-3.0, -3.0])).unwrap();
        assert_eq!(sols.len(), 1);
        assert!((&sols[0] - v(&[1.0, 1.0])).amax() < 1e-14);
        assert!(lcp_enumerate(&DMatrix::identity(13, 13), &DVector::zeros(13)).is_err());
    }

    #[test]
    fn lcp_json_round_trip() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        let data = LcpData::new(&m, &v(&[-1.0, 1.0]));
        let text = serde_json::to_string(&data).unwrap();
        assert!(text.contains("\"M\":[2.0,1.0,0.0,2.0]"));
        let back: LcpData = serde_json::from_str(&text).unwrap();
        assert_eq!(back.matrix().unwrap().0, m);
    }
}
