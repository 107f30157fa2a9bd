//! Square nonlinear systems and the homotopy maps built over them.
//!
//! All homotopy Jacobians use the column layout `[d/dx | d/dlambda]`:
//! an n x (n+1) matrix whose last column is the lambda derivative. The
//! trackers reorder to `(lambda, x)` locally.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type VectorFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

fn first_non_finite<'a>(values: impl IntoIterator<Item = &'a f64>) -> Option<usize> {
    values.into_iter().position(|v| !v.is_finite())
}

/// A square C^2 map F: R^n -> R^n with optional analytic Jacobian.
#[derive(Clone)]
pub struct Problem {
    name: String,
    dim: usize,
    f: VectorFn,
    jac: Option<MatrixFn>,
    bounds: Option<Vec<(f64, f64)>>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("analytic_jacobian", &self.jac.is_some())
            .field("bounds", &self.bounds)
            .finish()
    }
}

impl Problem {
    pub fn new<F>(name: impl Into<String>, dim: usize, f: F) -> Result<Self>
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(Error::InvalidParameter("problem dimension must be >= 1".into()));
        }
        Ok(Self {
            name: name.into(),
            dim,
            f: Arc::new(f),
            jac: None,
            bounds: None,
        })
    }

    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jac = Some(Arc::new(jac));
        self
    }

    /// Per-coordinate box, carried as benchmark metadata only.
    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.bounds = Some(bounds);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounds(&self) -> Option<&[(f64, f64)]> {
        self.bounds.as_deref()
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jac.is_some()
    }

    fn check_len(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Evaluates F(x).
    pub fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(x)?;
        let fx = (self.f)(x);
        if fx.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: fx.len(),
            });
        }
        match first_non_finite(fx.iter()) {
            Some(index) => Err(Error::Domain { index }),
            None => Ok(fx),
        }
    }

    /// Analytic Jacobian when available, central differences otherwise.
    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        match &self.jac {
            Some(jac) => {
                self.check_len(x)?;
                let j = jac(x);
                if j.nrows() != self.dim || j.ncols() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        found: j.nrows().max(j.ncols()),
                    });
                }
                match first_non_finite(j.iter()) {
                    Some(index) => Err(Error::Domain { index }),
                    None => Ok(j),
                }
            }
            None => self.fd_jacobian(x, None),
        }
    }

    /// Central-difference Jacobian. The default step is
    /// `sqrt(eps) * (1 + |x|_inf)`.
    pub fn fd_jacobian(&self, x: &DVector<f64>, h: Option<f64>) -> Result<DMatrix<f64>> {
        self.check_len(x)?;
        let h = h.unwrap_or_else(|| default_fd_step(x));
        if !(h > 0.0) {
            return Err(Error::InvalidParameter(format!("finite-difference step {h} must be > 0")));
        }
        central_difference(self.dim, self.dim, x, h, |xp| self.eval(xp))
    }
}

pub(crate) fn default_fd_step(x: &DVector<f64>) -> f64 {
    f64::EPSILON.sqrt() * (1.0 + x.amax())
}

/// Central differences of `f: R^cols -> R^rows` at `x`.
pub(crate) fn central_difference<F>(
    rows: usize,
    cols: usize,
    x: &DVector<f64>,
    h: f64,
    mut f: F,
) -> Result<DMatrix<f64>>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut j = DMatrix::zeros(rows, cols);
    let mut xp = x.clone();
    for k in 0..cols {
        xp[k] = x[k] + h;
        let fp = f(&xp)?;
        xp[k] = x[k] - h;
        let fm = f(&xp)?;
        xp[k] = x[k];
        j.set_column(k, &((fp - fm) / (2.0 * h)));
    }
    match first_non_finite(j.iter()) {
        Some(index) => Err(Error::Domain { index }),
        None => Ok(j),
    }
}

/// `F(x) / (1 + |x|_2)`, the fhom/fnew residual.
pub fn scaled_residual(problem: &Problem, x: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(problem.eval(x)? / (1.0 + x.norm()))
}

/// A symmetric positive-definite matrix stored with its Cholesky factor.
#[derive(Clone, Debug)]
pub struct SpdMatrix {
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl SpdMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        let asym = (&matrix - matrix.transpose()).amax();
        let scale = matrix.amax().max(1.0);
        if asym > 1e-12 * scale {
            return Err(Error::NotSymmetric(asym));
        }
        let chol = Cholesky::new(matrix.clone()).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self { matrix, chol })
    }

    /// `alpha * I`.
    pub fn scaled_identity(n: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be > 0, got {alpha}")));
        }
        Self::new(DMatrix::identity(n, n) * alpha)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// `sqrt(x^T A x)`.
    pub fn a_norm(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        // |L^T x|_2 avoids cancellation in the quadratic form.
        Ok((self.chol.l().transpose() * x).norm())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HomotopyKind {
    /// Newton fixed-point: `lambda F(x) + (1-lambda)(F(x) - F(a) + A(x-a))`.
    Nfph,
    /// Fixed-point: `lambda F(x) + (1-lambda)(x-a)`.
    Fph,
    /// Newton: `F(x) - (1-lambda) F(a)`.
    Nh,
}

impl HomotopyKind {
    pub fn label(self) -> &'static str {
        match self {
            HomotopyKind::Nfph => "NFPH",
            HomotopyKind::Fph => "FPH",
            HomotopyKind::Nh => "NH",
        }
    }
}

impl std::str::FromStr for HomotopyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nfph" => Ok(HomotopyKind::Nfph),
            "fph" => Ok(HomotopyKind::Fph),
            "nh" => Ok(HomotopyKind::Nh),
            other => Err(Error::InvalidParameter(format!("unknown homotopy `{other}`"))),
        }
    }
}

/// A map `rho(lambda, x)` whose zero set is followed by the trackers.
pub trait Homotopy {
    /// Dimension n of the state x.
    fn dim(&self) -> usize;

    /// Start point: the unique zero at lambda = 0.
    fn anchor(&self) -> &DVector<f64>;

    fn eval(&self, lambda: f64, x: &DVector<f64>) -> Result<DVector<f64>>;

    /// n x (n+1) Jacobian, columns `[d/dx | d/dlambda]`.
    fn jacobian(&self, lambda: f64, x: &DVector<f64>) -> Result<DMatrix<f64>>;

    /// The system solved at lambda = 1.
    fn target(&self) -> &Problem;
}

/// One of the NFPH, FPH or NH maps built over a [`Problem`].
#[derive(Clone, Debug)]
pub struct HomotopyMap {
    kind: HomotopyKind,
    problem: Problem,
    anchor: DVector<f64>,
    weight: Option<SpdMatrix>,
    f_anchor: DVector<f64>,
}

impl HomotopyMap {
    pub fn new(
        kind: HomotopyKind,
        problem: Problem,
        anchor: DVector<f64>,
        weight: Option<SpdMatrix>,
    ) -> Result<Self> {
        if anchor.len() != problem.dim() {
            return Err(Error::DimensionMismatch {
                expected: problem.dim(),
                found: anchor.len(),
            });
        }
        let weight = match (kind, weight) {
            (HomotopyKind::Nfph, None) => {
                return Err(Error::InvalidParameter("NFPH requires an SPD matrix A".into()))
            }
            (HomotopyKind::Nfph, Some(w)) => {
                if w.dim() != problem.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: problem.dim(),
                        found: w.dim(),
                    });
                }
                Some(w)
            }
            (_, _) => None,
        };
        let f_anchor = problem.eval(&anchor)?;
        Ok(Self {
            kind,
            problem,
            anchor,
            weight,
            f_anchor,
        })
    }

    pub fn nfph(problem: Problem, anchor: DVector<f64>, alpha: f64) -> Result<Self> {
        let w = SpdMatrix::scaled_identity(problem.dim(), alpha)?;
        Self::new(HomotopyKind::Nfph, problem, anchor, Some(w))
    }

    pub fn fph(problem: Problem, anchor: DVector<f64>) -> Result<Self> {
        Self::new(HomotopyKind::Fph, problem, anchor, None)
    }

    pub fn nh(problem: Problem, anchor: DVector<f64>) -> Result<Self> {
        Self::new(HomotopyKind::Nh, problem, anchor, None)
    }

    pub fn kind(&self) -> HomotopyKind {
        self.kind
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn weight(&self) -> Option<&SpdMatrix> {
        self.weight.as_ref()
    }

    pub fn f_anchor(&self) -> &DVector<f64> {
        &self.f_anchor
    }

    fn weight_matrix(&self) -> &DMatrix<f64> {
        self.weight
            .as_ref()
            .map(SpdMatrix::matrix)
            .expect("NFPH map always carries A")
    }
}

impl Homotopy for HomotopyMap {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn anchor(&self) -> &DVector<f64> {
        &self.anchor
    }

    fn eval(&self, lambda: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
        let fx = self.problem.eval(x)?;
        let dx = x - &self.anchor;
        Ok(match self.kind {
            HomotopyKind::Nfph => {
                let g = &fx - &self.f_anchor + self.weight_matrix() * dx;
                &fx * lambda + g * (1.0 - lambda)
            }
            HomotopyKind::Fph => &fx * lambda + dx * (1.0 - lambda),
            HomotopyKind::Nh => &fx - &self.f_anchor * (1.0 - lambda),
        })
    }

    fn jacobian(&self, lambda: f64, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let jf = self.problem.jacobian(x)?;
        let (block, dlambda) = match self.kind {
            HomotopyKind::Nfph => {
                let a = self.weight_matrix();
                (jf + a * (1.0 - lambda), &self.f_anchor - a * (x - &self.anchor))
            }
            HomotopyKind::Fph => {
                let fx = self.problem.eval(x)?;
                (
                    jf * lambda + DMatrix::identity(n, n) * (1.0 - lambda),
                    fx - (x - &self.anchor),
                )
            }
            HomotopyKind::Nh => (jf, self.f_anchor.clone()),
        };
        let mut j = block.insert_column(n, 0.0);
        j.set_column(n, &dlambda);
        Ok(j)
    }

    fn target(&self) -> &Problem {
        &self.problem
    }
}

/// Central differences of a homotopy in all n+1 columns, same layout as
/// [`Homotopy::jacobian`].
pub fn fd_homotopy_jacobian<H: Homotopy + ?Sized>(
    map: &H,
    lambda: f64,
    x: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let n = map.dim();
    let w = x.clone().insert_row(n, lambda);
    let h = default_fd_step(&w);
    central_difference(n, n + 1, &w, h, |wp| {
        map.eval(wp[n], &wp.rows(0, n).into_owned())
    })
}
