//! Dormand–Prince 5(4) with the standard fourth-order continuous extension.

use nalgebra::DVector;

use crate::error::{Error, Result};

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the fifth- and fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Right-hand side of an autonomous system `y' = f(y)`; errors abort the integration.
pub trait Field {
    fn eval(&mut self, y: &DVector<f64>) -> Result<DVector<f64>>;
}

impl<F> Field for F
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    fn eval(&mut self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self(y)
    }
}

/// One accepted step with its interpolant.
#[derive(Clone, Debug)]
pub struct DenseStep {
    pub s0: f64,
    pub h: f64,
    pub y0: DVector<f64>,
    pub y1: DVector<f64>,
    /// `f(y1)`, reused as the first stage of the next step.
    pub f1: DVector<f64>,
    r2: DVector<f64>,
    r3: DVector<f64>,
    r4: DVector<f64>,
    r5: DVector<f64>,
}

impl DenseStep {
    pub fn s1(&self) -> f64 {
        self.s0 + self.h
    }

    /// Interpolated state at `s` in `[s0, s0 + h]`.
    pub fn eval(&self, s: f64) -> DVector<f64> {
        let t = (s - self.s0) / self.h;
        let u = 1.0 - t;
        &self.y0 + (&self.r2 + (&self.r3 + (&self.r4 + &self.r5 * u) * t) * u) * t
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

/// Adaptive integrator state carried across calls.
pub struct Integrator {
    tol: Tolerances,
    h: f64,
    f0: Option<DVector<f64>>,
    /// Steps whose end slopes have cosine at or below this are rejected.
    min_turn_cos: Option<f64>,
    pub evaluations: usize,
    pub rejected: usize,
}

impl Integrator {
    pub fn new(tol: Tolerances, h0: f64) -> Self {
        Self {
            tol,
            h: h0,
            f0: None,
            min_turn_cos: None,
            evaluations: 0,
            rejected: 0,
        }
    }

    /// Also rejects steps over which the slope direction turns too far,
    /// which the error estimate alone does not see on sharp bends.
    pub fn with_turn_guard(mut self, min_cos: f64) -> Self {
        self.min_turn_cos = Some(min_cos);
        self
    }

    fn turned(&self, k1: &DVector<f64>, k7: &DVector<f64>) -> bool {
        self.min_turn_cos
            .is_some_and(|c| !(k1.dot(k7) > c * k1.norm() * k7.norm()))
    }

    fn rhs<F: Field>(&mut self, f: &mut F, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.evaluations += 1;
        f.eval(y)
    }

    /// Stages two to seven of a trial step, followed by the new state.
    fn stages<F: Field>(
        &mut self,
        f: &mut F,
        y: &DVector<f64>,
        k1: &DVector<f64>,
        h: f64,
    ) -> Result<[DVector<f64>; 7]> {
        let k2 = self.rhs(f, &(y + k1 * (h * A21)))?;
        let k3 = self.rhs(f, &(y + (k1 * A31 + &k2 * A32) * h))?;
        let k4 = self.rhs(f, &(y + (k1 * A41 + &k2 * A42 + &k3 * A43) * h))?;
        let k5 = self.rhs(f, &(y + (k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * h))?;
        let k6 = self.rhs(
            f,
            &(y + (k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * h),
        )?;
        let y1 = y + (k1 * A71 + &k3 * A73 + &k4 * A74 + &k5 * A75 + &k6 * A76) * h;
        let k7 = self.rhs(f, &y1)?;
        Ok([k2, k3, k4, k5, k6, k7, y1])
    }

    /// Attempts one step from `(s, y)` not exceeding `s_end`, retrying with
    /// smaller `h` until the error test passes.
    pub fn step<F: Field>(
        &mut self,
        f: &mut F,
        s: f64,
        y: &DVector<f64>,
        s_end: f64,
    ) -> Result<DenseStep> {
        let k1 = match self.f0.take() {
            Some(k) => k,
            None => self.rhs(f, y)?,
        };
        loop {
            let remaining = s_end - s;
            let h = self.h.min(remaining);
            if h <= 1e-14 * (1.0 + s.abs()) {
                return Err(Error::StepUnderflow(s));
            }
            let stages = match self.stages(f, y, &k1, h) {
                Ok(st) => st,
                // A trial stage left the domain: shrink as for a failed error test.
                Err(Error::Domain { .. }) => {
                    self.rejected += 1;
                    self.h = h * 0.2;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let [_, k3, k4, k5, k6, k7, y1] = stages;

            let err_vec = (&k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * h;
            let n = y.len() as f64;
            let err = (err_vec
                .iter()
                .zip(y.iter().zip(y1.iter()))
                .map(|(e, (a, b))| {
                    let sc = self.tol.abs + self.tol.rel * a.abs().max(b.abs());
                    (e / sc).powi(2)
                })
                .sum::<f64>()
                / n)
                .sqrt();

            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if self.turned(&k1, &k7) {
                self.rejected += 1;
                self.h = h * 0.5;
                continue;
            }
            if err.is_finite() && err <= 1.0 {
                let ydiff = &y1 - y;
                let bspl = &k1 * h - &ydiff;
                let r4 = &ydiff - &k7 * h - &bspl;
                let r5 = (&k1 * D1 + &k3 * D3 + &k4 * D4 + &k5 * D5 + &k6 * D6 + &k7 * D7) * h;
                // A step clipped to s_end says nothing about the natural step size.
                let next = h * factor;
                self.h = if h < self.h { self.h.max(next) } else { next };
                self.f0 = Some(k7.clone());
                return Ok(DenseStep {
                    s0: s,
                    h,
                    y0: y.clone(),
                    y1,
                    f1: k7,
                    r2: ydiff,
                    r3: bspl,
                    r4,
                    r5,
                });
            }
            self.rejected += 1;
            self.h = h * if err.is_finite() { factor.min(1.0) } else { 0.2 };
        }
    }

    /// Forgets the cached first stage, e.g. after the state was corrected.
    pub fn reset_state(&mut self) {
        self.f0 = None;
    }
}
