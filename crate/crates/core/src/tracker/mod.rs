//! Zero-curve tracking from `(0, a)` to `lambda = 1`.
//!
//! Points on the curve are stored in the layout `y = (lambda, x)`; the
//! homotopy Jacobians (`[d/dx | d/dlambda]`) are reordered by
//! [`layout_jacobian`] before any null-space computation.

mod ode;
mod pc;
pub mod rk;

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_full_row_rank, cofactor_vector, min_norm_solve};
use crate::problem::Homotopy;

pub use ode::{checkpoint_scan, integrate_segment, ode_track, Candidate, CandidateKind, Segment};
pub use pc::pc_track;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Arclength ODE integration with checkpointed candidate detection.
    Ode,
    /// Hermite predictor with normal-flow corrector.
    Pc,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ode" => Ok(Strategy::Ode),
            "pc" => Ok(Strategy::Pc),
            other => Err(Error::InvalidParameter(format!("unknown strategy `{other}`"))),
        }
    }
}

/// Speed of the curve parameter used by the ODE strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parametrization {
    /// Unit-speed tangent: `s` is true arclength.
    Arclength,
    /// Cofactor (adjugate) tangent `(det d_x rho, -adj(d_x rho) d_lambda rho)`:
    /// same curve, speed equal to the product of the Jacobian's singular values.
    Cofactor,
}

impl std::str::FromStr for Parametrization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "arclength" | "unit" => Ok(Parametrization::Arclength),
            "cofactor" => Ok(Parametrization::Cofactor),
            other => Err(Error::InvalidParameter(format!("unknown parametrization `{other}`"))),
        }
    }
}

/// Which of the two directions leaving the anchor is followed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// lambda increases at the start.
    Lambda,
    /// The start tangent agrees with the cofactor vector, i.e. lambda
    /// initially moves with the sign of `det d_x rho`. Differs from
    /// `Lambda` only when that determinant is negative at the anchor.
    Determinant,
}

impl std::str::FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lambda" => Ok(Orientation::Lambda),
            "determinant" | "det" => Ok(Orientation::Determinant),
            other => Err(Error::InvalidParameter(format!("unknown orientation `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub strategy: Strategy,
    pub parametrization: Parametrization,
    pub orientation: Orientation,
    /// Upper bound `S_f` on the curve parameter.
    pub s_final: f64,
    /// Number of intermediate checkpoints `C_n`.
    pub checkpoints: usize,
    pub h0: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub corrector_tol: f64,
    pub corrector_maxit: usize,
    /// Scaled-residual threshold for accepting a checkpoint as a candidate.
    pub candidate_tol: f64,
    pub ode_rel_tol: f64,
    pub ode_abs_tol: f64,
    /// Hard cap on accepted predictor-corrector steps.
    pub max_steps: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Ode,
            parametrization: Parametrization::Cofactor,
            orientation: Orientation::Lambda,
            s_final: 5.0,
            checkpoints: 70,
            h0: 0.1,
            h_min: 1e-12,
            h_max: 1.0,
            corrector_tol: 1e-10,
            corrector_maxit: 6,
            candidate_tol: 1e-3,
            ode_rel_tol: 1e-8,
            ode_abs_tol: 1e-10,
            max_steps: 100_000,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.s_final > 0.0) {
            return bad("S_f must be > 0");
        }
        if !(self.h_min > 0.0 && self.h_min <= self.h0 && self.h0 <= self.h_max) {
            return bad("step sizes must satisfy 0 < h_min <= h0 <= h_max");
        }
        if self.corrector_maxit == 0 {
            return bad("corrector_maxit must be >= 1");
        }
        if !(self.corrector_tol > 0.0 && self.ode_rel_tol > 0.0 && self.ode_abs_tol > 0.0) {
            return bad("tolerances must be > 0");
        }
        Ok(())
    }

    /// Path-fidelity bound checked at accepted points.
    pub fn path_tolerance(&self) -> f64 {
        match self.strategy {
            Strategy::Pc => 1e-6,
            Strategy::Ode => 10.0 * self.ode_rel_tol,
        }
    }
}

/// A point `(s, lambda, x)` with its unit tangent in `(lambda, x)` layout.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackPoint {
    pub s: f64,
    pub lambda: f64,
    pub x: DVector<f64>,
    pub tangent: DVector<f64>,
}

impl TrackPoint {
    pub fn from_layout(s: f64, y: &DVector<f64>, tangent: DVector<f64>) -> Self {
        let (lambda, x) = split_layout(y);
        Self {
            s,
            lambda,
            x,
            tangent,
        }
    }

    /// `(lambda, x)` as one vector.
    pub fn layout(&self) -> DVector<f64> {
        join_layout(self.lambda, &self.x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    ReachedLambda1,
    /// A checkpoint with `lambda < 1` passed the scaled-residual test.
    ResidualCandidate,
    ExhaustedArclength,
    RankDeficient,
    StepUnderflow,
}

impl TraceStatus {
    pub fn is_success(self) -> bool {
        matches!(self, TraceStatus::ReachedLambda1 | TraceStatus::ResidualCandidate)
    }
}

#[derive(Clone, Debug)]
pub struct CurveTrace {
    pub points: Vec<TrackPoint>,
    pub status: TraceStatus,
    /// 1-based checkpoint interval holding the candidate (ODE strategy only).
    pub checkpoint: Option<usize>,
    /// Homotopy estimate of the root, present on success.
    pub hsol: Option<DVector<f64>>,
    /// False when `hsol` was not pulled back onto the curve: always for the
    /// ode strategy, and for pc when the final corrector failed.
    pub hsol_corrected: bool,
    /// Accepted integration or predictor-corrector steps.
    pub steps: usize,
}

pub(crate) fn split_layout(y: &DVector<f64>) -> (f64, DVector<f64>) {
    (y[0], y.rows(1, y.len() - 1).into_owned())
}

pub(crate) fn join_layout(lambda: f64, x: &DVector<f64>) -> DVector<f64> {
    x.clone().insert_row(0, lambda)
}

/// Homotopy Jacobian at `y = (lambda, x)` with the lambda column moved first.
pub fn layout_jacobian<H: Homotopy + ?Sized>(map: &H, y: &DVector<f64>) -> Result<DMatrix<f64>> {
    let (lambda, x) = split_layout(y);
    let j = map.jacobian(lambda, &x)?;
    if let Some(index) = j.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain { index });
    }
    let n = map.dim();
    Ok(DMatrix::from_fn(n, n + 1, |r, c| if c == 0 { j[(r, n)] } else { j[(r, c - 1)] }))
}

pub(crate) fn layout_residual<H: Homotopy + ?Sized>(map: &H, y: &DVector<f64>) -> Result<DVector<f64>> {
    let (lambda, x) = split_layout(y);
    map.eval(lambda, &x)
}

/// Unit null vector of an n x (n+1) Jacobian in `(lambda, x)` layout.
///
/// With `prev` the sign makes an acute angle with it; without, the lambda
/// component is made positive (falling back to the cofactor orientation
/// when that component vanishes).
pub fn tangent(j: &DMatrix<f64>, prev: Option<&DVector<f64>>) -> Result<DVector<f64>> {
    if j.ncols() != j.nrows() + 1 {
        return Err(Error::DimensionMismatch {
            expected: j.nrows() + 1,
            found: j.ncols(),
        });
    }
    check_full_row_rank(j)?;
    let c = cofactor_vector(j);
    let norm = c.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::RankDeficient);
    }
    let t = c / norm;
    let flip = match prev {
        Some(p) => t.dot(p) < 0.0,
        None => t[0] < -1e-12,
    };
    Ok(if flip { -t } else { t })
}

/// Unit tangent at the anchor under `orientation`.
pub fn start_tangent(j: &DMatrix<f64>, orientation: Orientation) -> Result<DVector<f64>> {
    let t = tangent(j, None)?;
    let flip = orientation == Orientation::Determinant && cofactor_vector(j).dot(&t) < 0.0;
    Ok(if flip { -t } else { t })
}

/// Cubic Hermite interpolant through `p0`, `p1` (and their tangents),
/// evaluated at `s = p1.s + h`.
pub fn hermite_predict(p0: &TrackPoint, p1: &TrackPoint, h: f64) -> DVector<f64> {
    let y0 = p0.layout();
    let y1 = p1.layout();
    let ds = p1.s - p0.s;
    let t = (p1.s + h - p0.s) / ds;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    y0 * h00 + &p0.tangent * (h10 * ds) + y1 * h01 + &p1.tangent * (h11 * ds)
}

/// Normal-flow (minimum-norm Newton) correction of `w0 = (lambda, x)` back
/// onto the zero curve. Returns the corrected point and iterations used.
pub fn normal_flow_correct<H: Homotopy + ?Sized>(
    map: &H,
    w0: &DVector<f64>,
    cfg: &TrackerConfig,
) -> Result<(DVector<f64>, usize)> {
    let mut w = w0.clone();
    for it in 1..=cfg.corrector_maxit {
        let r = layout_residual(map, &w)?;
        let j = layout_jacobian(map, &w)?;
        let z = min_norm_solve(&j, &(-r))?;
        w += &z;
        if z.norm() / (1.0 + w.norm()) <= cfg.corrector_tol {
            return Ok((w, it));
        }
    }
    Err(Error::CorrectorFailed {
        iterations: cfg.corrector_maxit,
    })
}

/// Root estimate where the curve crosses `lambda = 1` between two accepted
/// points: linear interpolation followed by Newton on `rho(1, .) = F`.
///
/// The flag is false when the correction failed and the interpolant is
/// returned unchanged.
pub fn cross_lambda1<H: Homotopy + ?Sized>(
    before: &TrackPoint,
    after: &TrackPoint,
    map: &H,
    cfg: &TrackerConfig,
) -> (DVector<f64>, bool) {
    let span = after.lambda - before.lambda;
    let theta = if span > 0.0 {
        ((1.0 - before.lambda) / span).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let guess = &before.x + (&after.x - &before.x) * theta;
    let target = map.target();
    let mut x = guess.clone();
    for _ in 0..cfg.corrector_maxit {
        let Ok(fx) = target.eval(&x) else { break };
        if fx.amax() == 0.0 {
            return (x, true);
        }
        let Ok(j) = target.jacobian(&x) else { break };
        let Some(dx) = j.lu().solve(&(-fx)) else { break };
        x += &dx;
        if dx.norm() / (1.0 + x.norm()) <= cfg.corrector_tol {
            return (x, true);
        }
    }
    (guess, false)
}

#[derive(Serialize)]
struct TraceLine<'a> {
    s: f64,
    lambda: f64,
    x: &'a [f64],
    residual: f64,
}

/// Writes one JSON object per point: `{s, lambda, x, residual}` where
/// `residual` is `|rho(lambda, x)|_inf`.
pub fn write_trace_jsonl<H: Homotopy + ?Sized, W: Write>(
    trace: &CurveTrace,
    map: &H,
    mut out: W,
) -> std::io::Result<()> {
    for p in &trace.points {
        let residual = map
            .eval(p.lambda, &p.x)
            .map(|r| r.amax())
            .unwrap_or(f64::NAN);
        let line = TraceLine {
            s: p.s,
            lambda: p.lambda,
            x: p.x.as_slice(),
            residual,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Audits a finished trace and returns one message per violated invariant.
/// Path fidelity is checked at every pc point but only at corrected
/// checkpoints of an ode trace.
pub fn check_trace<H: Homotopy + ?Sized>(map: &H, trace: &CurveTrace, cfg: &TrackerConfig) -> Vec<String> {
    let mut bad = Vec::new();
    let pts = &trace.points;
    let Some(first) = pts.first() else {
        if trace.status != TraceStatus::RankDeficient {
            bad.push("empty trace".into());
        }
        return bad;
    };
    if first.lambda != 0.0 || first.x != *map.anchor() {
        bad.push("trace does not start at (0, a)".into());
    }
    let tol = cfg.path_tolerance();
    // Integrator points are only corrected back onto the curve at checkpoints.
    let width = cfg.s_final / (cfg.checkpoints + 1) as f64;
    let corrected = |s: f64| {
        cfg.strategy == Strategy::Pc || s == 0.0 || ((s / width).round() * width - s).abs() <= 1e-12 * cfg.s_final
    };
    for (k, p) in pts.iter().enumerate() {
        if (p.tangent.norm() - 1.0).abs() > 1e-12 {
            bad.push(format!("point {k}: tangent norm {}", p.tangent.norm()));
        }
        if !corrected(p.s) {
            continue;
        }
        match map.eval(p.lambda, &p.x) {
            Ok(r) => {
                let res = r.amax() / (1.0 + p.x.norm());
                if res > tol {
                    bad.push(format!("point {k}: path residual {res:e} > {tol:e}"));
                }
            }
            Err(e) => bad.push(format!("point {k}: {e}")),
        }
    }
    for (k, w) in pts.windows(2).enumerate() {
        if w[1].s <= w[0].s {
            bad.push(format!("point {}: s not increasing", k + 1));
        }
        if w[0].tangent.dot(&w[1].tangent) <= 0.0 {
            bad.push(format!("point {}: tangent reversed", k + 1));
        }
    }
    if cfg.orientation == Orientation::Lambda
        && pts.len() >= 3
        && !(pts[0].lambda < pts[1].lambda && pts[1].lambda < pts[2].lambda)
    {
        bad.push("lambda not increasing over the first three points".into());
    }
    let layouts: Vec<_> = pts.iter().map(TrackPoint::layout).collect();
    for i in 0..layouts.len() {
        for j in i + 1..layouts.len() {
            if (&layouts[i] - &layouts[j]).amax() <= 1e-12 {
                bad.push(format!("points {i} and {j} coincide"));
            }
        }
    }
    if trace.status == TraceStatus::ReachedLambda1 {
        let last = pts.last().expect("nonempty");
        if (last.lambda - 1.0).abs() > 1e-9 {
            bad.push(format!("final lambda {} is not 1", last.lambda));
        }
    }
    bad
}

/// Runs the tracker selected by `cfg.strategy`.
pub fn track<H: Homotopy + ?Sized>(map: &H, cfg: &TrackerConfig) -> Result<CurveTrace> {
    match cfg.strategy {
        Strategy::Ode => ode_track(map, cfg),
        Strategy::Pc => pc_track(map, cfg),
    }
}
