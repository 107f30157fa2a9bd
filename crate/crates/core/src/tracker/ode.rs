//! Curve tracking by integrating the tangent field over checkpointed intervals.
//!
//! `[0, S_f]` is split into `C_n + 1` equal intervals. After each interval
//! the integrated piece is scanned for a candidate root; the first hit ends
//! the run and its 1-based interval index is reported as `N_c`. Without a
//! hit, one normal-flow correction pulls the endpoint back onto the curve.

use nalgebra::DVector;

use super::rk::{DenseStep, Field, Integrator, Tolerances};
use super::{
    layout_jacobian, normal_flow_correct, split_layout, start_tangent, tangent, CurveTrace,
    Parametrization, TraceStatus, TrackPoint, TrackerConfig,
};
use crate::error::{Error, Result};
use crate::linalg::{check_full_row_rank, cofactor_vector};
use crate::problem::{scaled_residual, Homotopy};

/// Tangent field of the zero curve. Orientation state is owned by the run.
struct TangentField<'a, H: ?Sized> {
    map: &'a H,
    mode: Parametrization,
    prev: Option<DVector<f64>>,
    /// Cofactor orientation fixed at the start so that lambda increases.
    sign: f64,
}

impl<H: Homotopy + ?Sized> Field for TangentField<'_, H> {
    fn eval(&mut self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let j = layout_jacobian(self.map, y)?;
        match self.mode {
            Parametrization::Cofactor => {
                check_full_row_rank(&j)?;
                Ok(cofactor_vector(&j) * self.sign)
            }
            Parametrization::Arclength => {
                let t = tangent(&j, self.prev.as_ref())?;
                self.prev = Some(t.clone());
                Ok(t)
            }
        }
    }
}

/// Integrated piece of the curve between two checkpoints.
#[derive(Clone, Debug)]
pub struct Segment {
    /// 1-based interval index.
    pub index: usize,
    pub s_start: f64,
    pub s_end: f64,
    pub y_start: DVector<f64>,
    pub steps: Vec<DenseStep>,
}

impl Segment {
    pub fn end_state(&self) -> &DVector<f64> {
        self.steps.last().map(|st| &st.y1).unwrap_or(&self.y_start)
    }

    pub fn end_s(&self) -> f64 {
        self.steps.last().map(DenseStep::s1).unwrap_or(self.s_start)
    }

    /// True when the last step ends at or beyond `lambda = 1` from below.
    fn crossed(&self) -> bool {
        self.steps
            .last()
            .is_some_and(|st| st.y0[0] < 1.0 && st.y1[0] >= 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CandidateKind {
    /// The interpolant crosses `lambda = 1`.
    Crossing,
    /// The endpoint's scaled residual is below `candidate_tol`.
    Residual,
}

#[derive(Clone, Debug)]
pub struct Candidate {
    pub s: f64,
    /// `(lambda, x)` at the candidate.
    pub y: DVector<f64>,
    pub kind: CandidateKind,
}

impl Candidate {
    pub fn x(&self) -> DVector<f64> {
        split_layout(&self.y).1
    }
}

/// Integrates from `s_start` to `s_end`, stopping early after the first
/// step whose lambda crosses 1 from below.
pub fn integrate_segment<F: Field>(
    field: &mut F,
    integ: &mut Integrator,
    index: usize,
    s_start: f64,
    y_start: &DVector<f64>,
    s_end: f64,
    max_steps: usize,
) -> Result<Segment> {
    let mut seg = Segment {
        index,
        s_start,
        s_end,
        y_start: y_start.clone(),
        steps: Vec::new(),
    };
    let mut s = s_start;
    let mut y = y_start.clone();
    while s < s_end && !seg.crossed() {
        if seg.steps.len() >= max_steps {
            return Err(Error::StepUnderflow(s));
        }
        let st = integ.step(field, s, &y, s_end)?;
        s = st.s1();
        y = st.y1.clone();
        seg.steps.push(st);
    }
    Ok(seg)
}

/// Locates `lambda(s) = 1` on one dense step by Illinois regula falsi.
fn locate_crossing(step: &DenseStep) -> (f64, DVector<f64>) {
    let (mut a, mut b) = (step.s0, step.s1());
    let (mut fa, mut fb) = (step.y0[0] - 1.0, step.y1[0] - 1.0);
    if fb == 0.0 {
        return (b, step.y1.clone());
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c > a && c < b { c } else { 0.5 * (a + b) };
        let fc = step.eval(c)[0] - 1.0;
        if fc.abs() <= 1e-13 || (b - a) <= 1e-15 * (1.0 + b.abs()) {
            return (c, step.eval(c));
        }
        if (fc < 0.0) == (fa < 0.0) {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    let c = 0.5 * (a + b);
    (c, step.eval(c))
}

/// Tests an integrated segment for a candidate root: a lambda crossing on
/// the interpolant, else a small scaled residual `|F(x)|/(1+|x|)` at the
/// segment endpoint.
pub fn checkpoint_scan<H: Homotopy + ?Sized>(
    segment: &Segment,
    map: &H,
    cfg: &TrackerConfig,
) -> Option<Candidate> {
    if segment.crossed() {
        let step = segment.steps.last()?;
        let (s, y) = locate_crossing(step);
        return Some(Candidate {
            s,
            y,
            kind: CandidateKind::Crossing,
        });
    }
    let y = segment.end_state();
    let (_, x) = split_layout(y);
    let res = scaled_residual(map.target(), &x).ok()?.amax();
    (res <= cfg.candidate_tol).then(|| Candidate {
        s: segment.end_s(),
        y: y.clone(),
        kind: CandidateKind::Residual,
    })
}

fn unit_tangent<H: Homotopy + ?Sized>(field: &TangentField<'_, H>, f: &DVector<f64>) -> DVector<f64> {
    match field.mode {
        Parametrization::Cofactor => f / f.norm(),
        Parametrization::Arclength => f.clone(),
    }
}

/// Tracks the zero curve by integrating its tangent field.
pub fn ode_track<H: Homotopy + ?Sized>(map: &H, cfg: &TrackerConfig) -> Result<CurveTrace> {
    cfg.validate()?;
    let mut field = TangentField {
        map,
        mode: cfg.parametrization,
        prev: None,
        sign: 1.0,
    };
    let y0 = map.anchor().clone().insert_row(0, 0.0);
    let mut trace = CurveTrace {
        points: Vec::new(),
        status: TraceStatus::ExhaustedArclength,
        checkpoint: None,
        hsol: None,
        hsol_corrected: true,
        steps: 0,
    };

    let start = layout_jacobian(map, &y0).and_then(|j| {
        let t = start_tangent(&j, cfg.orientation)?;
        Ok((cofactor_vector(&j).dot(&t), t))
    });
    let t0 = match start {
        Ok((along, t)) => {
            if along < 0.0 {
                field.sign = -1.0;
            }
            field.prev = Some(t.clone());
            t
        }
        Err(Error::RankDeficient) => {
            trace.status = TraceStatus::RankDeficient;
            return Ok(trace);
        }
        Err(e) => return Err(e),
    };
    trace.points.push(TrackPoint::from_layout(0.0, &y0, t0));

    let intervals = cfg.checkpoints + 1;
    let width = cfg.s_final / intervals as f64;
    let tol = Tolerances {
        rel: cfg.ode_rel_tol,
        abs: cfg.ode_abs_tol,
    };
    let mut integ = Integrator::new(tol, cfg.h0.min(width)).with_turn_guard(0.0);
    let mut y = y0;
    let mut s = 0.0;

    for k in 1..=intervals {
        let s_end = if k == intervals { cfg.s_final } else { k as f64 * width };
        let seg = match integrate_segment(&mut field, &mut integ, k, s, &y, s_end, cfg.max_steps) {
            Ok(seg) => seg,
            Err(Error::RankDeficient) => {
                trace.status = TraceStatus::RankDeficient;
                return Ok(trace);
            }
            Err(Error::StepUnderflow(_)) => {
                trace.status = TraceStatus::StepUnderflow;
                return Ok(trace);
            }
            Err(e) => return Err(e),
        };
        trace.steps += seg.steps.len();
        let candidate = checkpoint_scan(&seg, map, cfg);

        let stored = match &candidate {
            Some(c) if c.kind == CandidateKind::Crossing => &seg.steps[..seg.steps.len() - 1],
            _ => &seg.steps[..],
        };
        for st in stored {
            let t = unit_tangent(&field, &st.f1);
            trace.points.push(TrackPoint::from_layout(st.s1(), &st.y1, t));
        }

        if let Some(c) = candidate {
            if c.kind == CandidateKind::Crossing {
                let f = field.eval(&c.y)?;
                let t = unit_tangent(&field, &f);
                trace.points.push(TrackPoint::from_layout(c.s, &c.y, t));
                trace.status = TraceStatus::ReachedLambda1;
            } else {
                trace.status = TraceStatus::ResidualCandidate;
            }
            trace.checkpoint = Some(k);
            // Interpolant or integrator point; polishing happens downstream.
            trace.hsol_corrected = false;
            trace.hsol = Some(c.x());
            return Ok(trace);
        }

        s = seg.end_s();
        y = seg.end_state().clone();
        if let Ok((w, _)) = normal_flow_correct(map, &y, cfg) {
            if let Ok(f) = field.eval(&w) {
                y = w;
                integ.reset_state();
                let t = unit_tangent(&field, &f);
                if let Some(last) = trace.points.last_mut() {
                    if last.s == s {
                        *last = TrackPoint::from_layout(s, &y, t);
                    }
                }
            }
        }
    }
    Ok(trace)
}
