//! Benchmark runner: registry lookup, homotopy solve, polish, report.

pub mod registry;
pub mod report;

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, HypothesisReport};
use crate::error::{Error, Result};
use crate::ncp::{NcpHomotopy, NcpPoint, SmoothingParams};
use crate::problem::{scaled_residual, Homotopy, HomotopyKind, HomotopyMap, Problem};
use crate::refine::{newton_polish, PolishConfig, PolishStatus};
use crate::tracker::{track, CurveTrace, Orientation, Parametrization, Strategy, TraceStatus, TrackerConfig};

pub use registry::{registry_get, Instance, RegistryEntry};
pub use report::{emit_table, parse_json, JsonReport, OutputFormat, ReportRow};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub problem: String,
    pub method: HomotopyKind,
    /// `A = alpha I` for NFPH; for NCP runs the `c` of `A = c I`.
    pub alpha: f64,
    pub strategy: Strategy,
    pub parametrization: Parametrization,
    pub orientation: Orientation,
    pub s_final: f64,
    pub checkpoints: usize,
    /// `None` selects the registry default.
    pub anchor: Option<Vec<f64>>,
    pub beta: f64,
    pub format: OutputFormat,
    pub seed: u64,
    /// Sample count for hypothesis checks; 0 disables them.
    pub diagnostic_samples: usize,
}

impl BenchmarkSpec {
    /// NFPH with the parameters of the experiment each problem is tabulated under.
    pub fn new(problem: &str) -> Self {
        let (s_final, checkpoints, alpha) = match problem {
            "ex1" => (2.5, 70, 50.0),
            "ex2" => (20.0, 70, 50.0),
            "ex3" => (30.0, 50, 50.0),
            "ex4" => (5.0, 70, 75.0),
            _ => (50.0, 100, 1.0),
        };
        Self {
            problem: problem.to_string(),
            method: HomotopyKind::Nfph,
            alpha,
            strategy: Strategy::Ode,
            parametrization: Parametrization::Cofactor,
            // The tabulated runs follow the determinant's sign off the anchor.
            orientation: Orientation::Determinant,
            s_final,
            checkpoints,
            anchor: None,
            beta: 1.0,
            format: OutputFormat::Table,
            seed: 0,
            diagnostic_samples: 0,
        }
    }

    pub fn with_method(mut self, method: HomotopyKind, alpha: f64) -> Self {
        self.method = method;
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.method == HomotopyKind::Nfph && !(self.alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be > 0, got {}", self.beta)));
        }
        self.tracker_config().validate()
    }

    pub fn tracker_config(&self) -> TrackerConfig {
        TrackerConfig {
            strategy: self.strategy,
            parametrization: self.parametrization,
            orientation: self.orientation,
            s_final: self.s_final,
            checkpoints: self.checkpoints,
            ..TrackerConfig::default()
        }
    }

    pub fn method_label(&self) -> String {
        match self.method {
            HomotopyKind::Nfph => format!("NFPH(alpha={})", self.alpha),
            other => other.label().to_string(),
        }
    }
}

/// Specs of the seven benchmark tables.
pub fn table_specs(table: u8) -> Result<Vec<BenchmarkSpec>> {
    let (problem, s_final, checkpoints, alphas): (&str, f64, usize, &[f64]) = match table {
        1 => ("ex1", 2.5, 70, &[0.001, 50.0]),
        2 => ("ex1", 5.0, 70, &[0.001, 50.0]),
        3 => ("ex2", 20.0, 70, &[0.001, 50.0]),
        4 => ("ex2", 5.0, 70, &[0.001, 50.0]),
        5 => ("ex3", 30.0, 50, &[0.001, 50.0]),
        6 => ("ex3", 2.0, 50, &[0.001, 50.0]),
        7 => ("ex4", 5.0, 70, &[0.001, 1.0, 75.0]),
        _ => return Err(Error::InvalidParameter(format!("no table {table}; expected 1 to 7"))),
    };
    let base = BenchmarkSpec {
        s_final,
        checkpoints,
        ..BenchmarkSpec::new(problem)
    };
    let mut specs: Vec<_> = alphas
        .iter()
        .map(|&a| base.clone().with_method(HomotopyKind::Nfph, a))
        .collect();
    specs.push(base.clone().with_method(HomotopyKind::Fph, 0.0));
    specs.push(base.with_method(HomotopyKind::Nh, 0.0));
    Ok(specs)
}

/// One row of a results table plus everything needed to audit it.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub method: String,
    /// Number of checked intervals (ODE strategy only).
    pub nc: Option<usize>,
    pub hsol: Option<DVector<f64>>,
    pub nsol: Option<DVector<f64>>,
    pub fhom: Option<DVector<f64>>,
    pub fnew: Option<DVector<f64>>,
    pub time_s: f64,
    pub status: TraceStatus,
    pub polish: Option<PolishStatus>,
    /// NCP runs: complementarity residual of the x block of `nsol`.
    pub comp_residual: Option<f64>,
    pub diagnostics: Vec<HypothesisReport>,
    pub trace: CurveTrace,
    /// System that `hsol` and `nsol` are measured against.
    pub target: Problem,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status.is_success() && self.polish == Some(PolishStatus::Converged)
    }

    /// x block of `nsol` for NCP runs, `nsol` itself otherwise.
    pub fn solution_x(&self) -> Option<DVector<f64>> {
        let nsol = self.nsol.as_ref()?;
        match self.comp_residual {
            Some(_) => NcpPoint::from_stacked(nsol).ok().map(|p| p.x),
            None => Some(nsol.clone()),
        }
    }
}

fn resolve_anchor(spec: &BenchmarkSpec, default: Option<&DVector<f64>>, n: usize) -> Result<Option<DVector<f64>>> {
    let anchor = match &spec.anchor {
        Some(a) => Some(DVector::from_column_slice(a)),
        None => default.cloned(),
    };
    if let Some(a) = &anchor {
        if a.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: a.len(),
            });
        }
    }
    Ok(anchor)
}

/// The homotopy a benchmark spec resolves to.
pub enum BuiltHomotopy {
    Equation(HomotopyMap),
    Ncp(NcpHomotopy),
}

impl BuiltHomotopy {
    pub fn as_dyn(&self) -> &dyn Homotopy {
        match self {
            BuiltHomotopy::Equation(m) => m,
            BuiltHomotopy::Ncp(m) => m,
        }
    }
}

/// Looks up the problem and builds the homotopy `spec` describes.
pub fn build_homotopy(spec: &BenchmarkSpec) -> Result<BuiltHomotopy> {
    spec.validate()?;
    let entry = registry_get(&spec.problem)?;
    match entry.instance {
        Instance::Equation(problem) => {
            let n = problem.dim();
            let anchor = resolve_anchor(spec, entry.anchor.as_ref(), n)?.unwrap_or_else(|| DVector::zeros(n));
            let map = match spec.method {
                HomotopyKind::Nfph => HomotopyMap::nfph(problem, anchor, spec.alpha)?,
                HomotopyKind::Fph => HomotopyMap::fph(problem, anchor)?,
                HomotopyKind::Nh => HomotopyMap::nh(problem, anchor)?,
            };
            Ok(BuiltHomotopy::Equation(map))
        }
        Instance::Ncp(ncp) => {
            if spec.method != HomotopyKind::Nfph {
                return Err(Error::InvalidParameter(
                    "complementarity problems only support the nfph method".into(),
                ));
            }
            let anchor = resolve_anchor(spec, None, 2 * ncp.dim())?;
            let params = SmoothingParams::new(&ncp, spec.beta, spec.alpha, anchor)?;
            Ok(BuiltHomotopy::Ncp(NcpHomotopy::new(ncp, params)?))
        }
    }
}

/// Tracks and polishes one benchmark. Tracker failures are
/// reported through `status`; only invalid specs are errors.
pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<SolveReport> {
    let cfg = spec.tracker_config();
    match build_homotopy(spec)? {
        BuiltHomotopy::Equation(map) => {
            let mut report = solve(spec, &map, &cfg)?;
            if spec.diagnostic_samples > 0 {
                let problem = map.problem();
                let bounds = diagnostics::default_box(problem.dim());
                if let Some(weight) = map.weight() {
                    report.diagnostics.push(diagnostics::check_assumption1(
                        problem,
                        weight,
                        &bounds,
                        spec.diagnostic_samples,
                        spec.seed,
                    )?);
                }
                if let (true, Some(root)) = (report.converged(), &report.nsol) {
                    report.diagnostics.push(diagnostics::check_pseudo_monotone_at(
                        problem,
                        root,
                        &bounds,
                        spec.diagnostic_samples,
                        spec.seed,
                    )?);
                }
            }
            Ok(report)
        }
        BuiltHomotopy::Ncp(map) => {
            let ncp = map.ncp();
            let mut report = solve(spec, &map, &cfg)?;
            report.comp_residual = match &report.nsol {
                Some(z) => Some(ncp.comp_residual(&NcpPoint::from_stacked(z)?.x)?),
                None => None,
            };
            if spec.diagnostic_samples > 0 {
                report.diagnostics.push(diagnostics::check_gen_monotone(
                    ncp.map(),
                    1e-3,
                    &diagnostics::default_box(ncp.dim()),
                    spec.diagnostic_samples,
                    spec.seed,
                )?);
            }
            Ok(report)
        }
    }
}

fn solve<H: Homotopy + ?Sized>(spec: &BenchmarkSpec, map: &H, cfg: &TrackerConfig) -> Result<SolveReport> {
    let target = map.target();
    let start = Instant::now();
    let trace = track(map, cfg)?;
    let polished = match &trace.hsol {
        Some(h) => Some(newton_polish(target, h, &PolishConfig::default())?),
        None => None,
    };
    let time_s = start.elapsed().as_secs_f64();

    let residual = |x: &Option<DVector<f64>>| x.as_ref().and_then(|x| scaled_residual(target, x).ok());
    let hsol = trace.hsol.clone();
    let nsol = polished.as_ref().map(|p| p.x.clone());
    Ok(SolveReport {
        method: spec.method_label(),
        nc: trace.checkpoint,
        fhom: residual(&hsol),
        fnew: residual(&nsol),
        hsol,
        nsol,
        time_s,
        status: trace.status,
        polish: polished.map(|p| p.status),
        comp_residual: None,
        diagnostics: Vec::new(),
        trace,
        target: target.clone(),
    })
}

/// `theta(x) = f(x)^2 / 2`.
pub fn merit(problem: &Problem, x: f64) -> Result<f64> {
    if problem.dim() != 1 {
        return Err(Error::NotScalar(problem.dim()));
    }
    Ok(0.5 * problem.eval(&DVector::from_element(1, x))?[0].powi(2))
}

/// `count` uniform samples `(x, theta(x))` over `[lo, hi]`, endpoints included.
pub fn emit_merit_samples(id: &str, lo: f64, hi: f64, count: usize) -> Result<Vec<(f64, f64)>> {
    let problem = match registry_get(id)?.instance {
        Instance::Equation(p) => p,
        Instance::Ncp(n) => return Err(Error::NotScalar(n.dim())),
    };
    merit_samples(&problem, lo, hi, count)
}

pub fn merit_samples(problem: &Problem, lo: f64, hi: f64, count: usize) -> Result<Vec<(f64, f64)>> {
    if count < 2 || !(lo < hi) {
        return Err(Error::InvalidParameter("need lo < hi and at least 2 samples".into()));
    }
    let step = (hi - lo) / (count - 1) as f64;
    (0..count)
        .map(|i| {
            let x = if i == count - 1 { hi } else { lo + step * i as f64 };
            Ok((x, merit(problem, x)?))
        })
        .collect()
}

/// Local minimiser of `theta` on `[lo, hi]`: sampled argmin refined by
/// golden-section search on the neighbouring sample bracket.
pub fn merit_local_min(problem: &Problem, lo: f64, hi: f64, count: usize) -> Result<(f64, f64)> {
    let samples = merit_samples(problem, lo, hi, count)?;
    let k = samples
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(k, _)| k)
        .expect("at least two samples");
    let (mut a, mut b) = (samples[k.saturating_sub(1)].0, samples[(k + 1).min(count - 1)].0);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (merit(problem, c)?, merit(problem, d)?);
    while b - a > 1e-12 * (1.0 + a.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = merit(problem, c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = merit(problem, d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, merit(problem, x)?))
}
