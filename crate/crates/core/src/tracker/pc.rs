//! Predictor–corrector stepping: linear then Hermite cubic prediction,
//! normal-flow correction, step doubling after fast corrections and
//! halving after failures.

use super::{
    cross_lambda1, hermite_predict, layout_jacobian, normal_flow_correct, start_tangent, tangent,
    CurveTrace, TraceStatus, TrackPoint, TrackerConfig,
};
use crate::error::{Error, Result};
use crate::problem::Homotopy;

const MIN_TANGENT_COS: f64 = 0.9;
const MAX_CORRECTION: f64 = 0.5;
const CROSSING_RETRY_H: f64 = 1e-6;

/// Tracks the zero curve with the predictor–corrector strategy.
///
/// `s` is accumulated chord length. Tracking stops when lambda reaches 1,
/// when `s` passes `S_f` or the step budget runs out, when the step size
/// falls below `h_min`, or at a rank-deficient Jacobian.
pub fn pc_track<H: Homotopy + ?Sized>(map: &H, cfg: &TrackerConfig) -> Result<CurveTrace> {
    cfg.validate()?;
    let y0 = map.anchor().clone().insert_row(0, 0.0);
    let mut trace = CurveTrace {
        points: Vec::new(),
        status: TraceStatus::ExhaustedArclength,
        checkpoint: None,
        hsol: None,
        hsol_corrected: true,
        steps: 0,
    };
    let t0 = match layout_jacobian(map, &y0).and_then(|j| start_tangent(&j, cfg.orientation)) {
        Ok(t) => t,
        Err(Error::RankDeficient) => {
            trace.status = TraceStatus::RankDeficient;
            return Ok(trace);
        }
        Err(e) => return Err(e),
    };
    trace.points.push(TrackPoint::from_layout(0.0, &y0, t0));

    let mut h = cfg.h0;
    loop {
        let last = trace.points.last().expect("trace starts with the anchor");
        if last.s >= cfg.s_final || trace.steps >= cfg.max_steps {
            trace.status = TraceStatus::ExhaustedArclength;
            return Ok(trace);
        }
        let y_last = last.layout();
        let predicted = match trace.points.len() {
            1 => &y_last + &last.tangent * h,
            k => hermite_predict(&trace.points[k - 2], last, h),
        };

        let corrected = normal_flow_correct(map, &predicted, cfg).and_then(|(w, its)| {
            let t = tangent(&layout_jacobian(map, &w)?, Some(&last.tangent))?;
            Ok((w, its, t))
        });
        let (w, iterations, t) = match corrected {
            // Any failed geometric test suggests the corrector landed on
            // another part of the zero set.
            Ok((w, its, t))
                if (&w - &y_last).dot(&last.tangent) > 0.0
                    && t.dot(&last.tangent) >= MIN_TANGENT_COS
                    && (&w - &predicted).norm() <= MAX_CORRECTION * h =>
            {
                (w, its, t)
            }
            Ok(_) | Err(Error::CorrectorFailed { .. }) | Err(Error::RankDeficient) => {
                h *= 0.5;
                if h < cfg.h_min {
                    trace.status = TraceStatus::StepUnderflow;
                    return Ok(trace);
                }
                continue;
            }
            Err(e) => return Err(e),
        };

        let s = last.s + (&w - &y_last).norm();
        let point = TrackPoint::from_layout(s, &w, t);

        if point.lambda >= 1.0 {
            let (x, ok) = cross_lambda1(last, &point, map, cfg);
            // A genuine crossing corrects onto F = 0 once the bracket is short.
            if !ok && h > CROSSING_RETRY_H {
                h *= 0.5;
                continue;
            }
            trace.steps += 1;
            let before = last.clone();
            let frac = ((1.0 - before.lambda) / (point.lambda - before.lambda)).clamp(0.0, 1.0);
            let s_hit = before.s + frac * (point.s - before.s);
            let y_hit = x.clone().insert_row(0, 1.0);
            let t_hit = layout_jacobian(map, &y_hit)
                .and_then(|j| tangent(&j, Some(&before.tangent)))
                .unwrap_or_else(|_| point.tangent.clone());
            trace.points.push(TrackPoint {
                s: if s_hit > before.s { s_hit } else { point.s },
                lambda: 1.0,
                x: x.clone(),
                tangent: t_hit,
            });
            trace.hsol = Some(x);
            trace.hsol_corrected = ok;
            trace.status = TraceStatus::ReachedLambda1;
            return Ok(trace);
        }

        trace.steps += 1;
        trace.points.push(point);
        if iterations <= 2 {
            h = (2.0 * h).min(cfg.h_max);
        }
    }
}
