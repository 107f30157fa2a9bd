//! Newton polishing of homotopy endpoints and a merit-function descent
//! baseline on `theta(x) = |F(x)|^2 / 2`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::Problem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolishConfig {
    /// Target `|F|_inf`.
    pub tol: f64,
    pub maxit: usize,
    pub backtrack_factor: f64,
    pub max_halvings: usize,
    pub armijo: f64,
}

impl Default for PolishConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            maxit: 50,
            backtrack_factor: 0.5,
            max_halvings: 30,
            armijo: 1e-4,
        }
    }
}

impl PolishConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.maxit == 0 {
            return Err(Error::InvalidParameter("polish needs tol > 0 and maxit >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolishStatus {
    Converged,
    MaxIterations,
    SingularJacobian,
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct PolishResult {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub status: PolishStatus,
}

impl PolishResult {
    pub fn converged(&self) -> bool {
        self.status == PolishStatus::Converged
    }
}

fn theta(f: &DVector<f64>) -> f64 {
    0.5 * f.norm_squared()
}

/// Armijo backtracking along `d` from `x`; returns the accepted point,
/// its residual and step length.
fn backtrack(
    problem: &Problem,
    x: &DVector<f64>,
    theta0: f64,
    slope: f64,
    d: &DVector<f64>,
    cfg: &PolishConfig,
) -> Option<(DVector<f64>, DVector<f64>, f64)> {
    let mut t = 1.0;
    for _ in 0..=cfg.max_halvings {
        let xt = x + d * t;
        if let Ok(ft) = problem.eval(&xt) {
            if theta(&ft) <= theta0 + cfg.armijo * t * slope {
                return Some((xt, ft, t));
            }
        }
        t *= cfg.backtrack_factor;
    }
    None
}

/// Damped Newton with Armijo backtracking on `theta`.
pub fn newton_polish(problem: &Problem, x0: &DVector<f64>, cfg: &PolishConfig) -> Result<PolishResult> {
    cfg.validate()?;
    let mut x = x0.clone();
    let mut fx = problem.eval(&x)?;
    for it in 0..cfg.maxit {
        if fx.amax() <= cfg.tol {
            return Ok(PolishResult {
                x,
                iterations: it,
                status: PolishStatus::Converged,
            });
        }
        let step = problem
            .jacobian(&x)
            .ok()
            .and_then(|j| j.lu().solve(&(-&fx)))
            .filter(|d| d.iter().all(|v| v.is_finite()));
        let Some(d) = step else {
            return Ok(PolishResult {
                x,
                iterations: it,
                status: PolishStatus::SingularJacobian,
            });
        };
        // Along the Newton direction, d theta = -|F|^2.
        let theta0 = theta(&fx);
        match backtrack(problem, &x, theta0, -2.0 * theta0, &d, cfg) {
            Some((xn, fn_, _)) => {
                x = xn;
                fx = fn_;
            }
            None => {
                return Ok(PolishResult {
                    x,
                    iterations: it,
                    status: PolishStatus::LineSearchFailed,
                })
            }
        }
    }
    let status = if fx.amax() <= cfg.tol {
        PolishStatus::Converged
    } else {
        PolishStatus::MaxIterations
    };
    Ok(PolishResult {
        x,
        iterations: cfg.maxit,
        status,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeritStatus {
    Root,
    LocalMin,
    MaxIt,
}

#[derive(Clone, Debug)]
pub struct MeritResult {
    pub x: DVector<f64>,
    pub status: MeritStatus,
    pub iterations: usize,
    /// `theta` after every accepted iterate, starting with `theta(x0)`.
    pub history: Vec<f64>,
}

/// Gradient threshold below which a stalled descent is a local minimum.
pub const MERIT_GRAD_TOL: f64 = 1e-8;

/// Gauss–Newton descent on `theta` with backtracking, falling back to
/// steepest descent when the Gauss–Newton step is unusable.
///
/// `LocalMin` is reported when `|grad theta|_inf <= 1e-8` while
/// `|F|_inf > tol` and the full Gauss–Newton step is not acceptable, or
/// when neither direction yields Armijo decrease.
pub fn merit_descent(problem: &Problem, x0: &DVector<f64>, cfg: &PolishConfig) -> Result<MeritResult> {
    cfg.validate()?;
    let mut x = x0.clone();
    let mut fx = problem.eval(&x)?;
    let mut history = vec![theta(&fx)];
    for it in 0..cfg.maxit {
        if fx.amax() <= cfg.tol {
            return Ok(MeritResult {
                x,
                status: MeritStatus::Root,
                iterations: it,
                history,
            });
        }
        let j = problem.jacobian(&x)?;
        let grad = j.transpose() * &fx;
        let theta0 = theta(&fx);
        let gn = j.lu().solve(&(-&fx)).filter(|d| d.iter().all(|v| v.is_finite()));

        let mut accepted = None;
        let mut gn_full_step = false;
        for (k, d) in gn.into_iter().chain(std::iter::once(-&grad)).enumerate() {
            let slope = grad.dot(&d);
            if !(slope < 0.0) {
                continue;
            }
            let found = backtrack(problem, &x, theta0, slope, &d, cfg);
            if k == 0 {
                gn_full_step = found.as_ref().is_some_and(|(_, _, t)| *t == 1.0);
            }
            if found.is_some() {
                accepted = found;
                break;
            }
        }
        let stalled = grad.amax() <= MERIT_GRAD_TOL && !gn_full_step;
        match accepted {
            Some((xn, fn_, _)) if !stalled => {
                x = xn;
                fx = fn_;
                history.push(theta(&fx));
            }
            _ => {
                return Ok(MeritResult {
                    x,
                    status: MeritStatus::LocalMin,
                    iterations: it,
                    history,
                })
            }
        }
    }
    let status = if fx.amax() <= cfg.tol {
        MeritStatus::Root
    } else {
        MeritStatus::MaxIt
    };
    Ok(MeritResult {
        x,
        status,
        iterations: cfg.maxit,
        history,
    })
}
