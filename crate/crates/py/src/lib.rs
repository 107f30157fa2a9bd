//! Python bindings: benchmark specs and reports, table reproduction, the
//! merit-function tools and a few numerical kernels.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use nfph_core::bench::{self, BenchmarkSpec, Instance, OutputFormat, SolveReport};
use nfph_core::{diagnostics, ncp, Error, PolishConfig, SpdMatrix};

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

fn equation(id: &str) -> PyResult<nfph_core::Problem> {
    match bench::registry_get(id).map_err(py_err)?.instance {
        Instance::Equation(p) => Ok(p),
        Instance::Ncp(n) => Err(py_err(Error::NotScalar(n.dim()))),
    }
}

#[pyclass(name = "BenchmarkSpec", from_py_object)]
#[derive(Clone)]
pub struct PySpec {
    inner: BenchmarkSpec,
}

#[pymethods]
impl PySpec {
    /// Defaults follow the tabulated experiment for `problem`.
    #[new]
    #[pyo3(signature = (problem, method=None, alpha=None, strategy=None, sf=None, cn=None,
                        anchor=None, beta=None, parametrization=None, orientation=None, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        problem: &str,
        method: Option<&str>,
        alpha: Option<f64>,
        strategy: Option<&str>,
        sf: Option<f64>,
        cn: Option<usize>,
        anchor: Option<Vec<f64>>,
        beta: Option<f64>,
        parametrization: Option<&str>,
        orientation: Option<&str>,
        seed: u64,
    ) -> PyResult<Self> {
        let mut s = BenchmarkSpec::new(problem);
        if let Some(m) = method {
            s.method = parse(m)?;
        }
        if let Some(a) = alpha {
            s.alpha = a;
        }
        if let Some(v) = strategy {
            s.strategy = parse(v)?;
        }
        if let Some(v) = sf {
            s.s_final = v;
        }
        if let Some(v) = cn {
            s.checkpoints = v;
        }
        if let Some(v) = beta {
            s.beta = v;
        }
        if let Some(v) = parametrization {
            s.parametrization = parse(v)?;
        }
        if let Some(v) = orientation {
            s.orientation = parse(v)?;
        }
        s.anchor = anchor;
        s.seed = seed;
        s.validate().map_err(py_err)?;
        Ok(Self { inner: s })
    }

    #[getter]
    fn problem(&self) -> String {
        self.inner.problem.clone()
    }

    #[getter]
    fn method(&self) -> String {
        self.inner.method_label()
    }

    #[getter]
    fn s_final(&self) -> f64 {
        self.inner.s_final
    }

    #[getter]
    fn checkpoints(&self) -> usize {
        self.inner.checkpoints
    }

    fn run(&self) -> PyResult<PyReport> {
        bench::run_benchmark(&self.inner).map(PyReport::from).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "BenchmarkSpec(problem={:?}, method={:?}, s_final={}, checkpoints={})",
            self.inner.problem,
            self.inner.method_label(),
            self.inner.s_final,
            self.inner.checkpoints
        )
    }
}

fn to_vec(v: &Option<DVector<f64>>) -> Option<Vec<f64>> {
    v.as_ref().map(|v| v.as_slice().to_vec())
}

#[pyclass(name = "SolveReport", get_all, skip_from_py_object)]
#[derive(Clone)]
pub struct PyReport {
    method: String,
    nc: Option<usize>,
    hsol: Option<Vec<f64>>,
    nsol: Option<Vec<f64>>,
    fhom: Option<Vec<f64>>,
    fnew: Option<Vec<f64>>,
    time_s: f64,
    status: String,
    comp_residual: Option<f64>,
    /// `(s, lambda, x)` for every stored point of the tracked curve.
    points: Vec<(f64, f64, Vec<f64>)>,
}

impl From<SolveReport> for PyReport {
    fn from(r: SolveReport) -> Self {
        Self {
            method: r.method.clone(),
            nc: r.nc,
            hsol: to_vec(&r.hsol),
            nsol: to_vec(&r.nsol),
            fhom: to_vec(&r.fhom),
            fnew: to_vec(&r.fnew),
            time_s: r.time_s,
            status: status_name(&r),
            comp_residual: r.comp_residual,
            points: r
                .trace
                .points
                .iter()
                .map(|p| (p.s, p.lambda, p.x.as_slice().to_vec()))
                .collect(),
        }
    }
}

/// The serde name, matching the JSON output.
fn status_name(r: &SolveReport) -> String {
    match serde_json::to_value(r.status) {
        Ok(serde_json::Value::String(s)) => s,
        _ => format!("{:?}", r.status),
    }
}

#[pymethods]
impl PyReport {
    fn converged(&self) -> bool {
        self.status == "reached_lambda1" || self.status == "residual_candidate"
    }

    fn __repr__(&self) -> String {
        format!("SolveReport(method={:?}, nc={:?}, status={:?})", self.method, self.nc, self.status)
    }
}

/// Runs one benchmark; keyword arguments as for `BenchmarkSpec`.
#[pyfunction]
#[pyo3(signature = (problem, method=None, alpha=None, strategy=None, sf=None, cn=None, anchor=None))]
fn solve(
    problem: &str,
    method: Option<&str>,
    alpha: Option<f64>,
    strategy: Option<&str>,
    sf: Option<f64>,
    cn: Option<usize>,
    anchor: Option<Vec<f64>>,
) -> PyResult<PyReport> {
    PySpec::new(problem, method, alpha, strategy, sf, cn, anchor, None, None, None, 0)?.run()
}

/// Specs of benchmark table `k`.
#[pyfunction]
fn table_specs(k: u8) -> PyResult<Vec<PySpec>> {
    Ok(bench::table_specs(k)
        .map_err(py_err)?
        .into_iter()
        .map(|inner| PySpec { inner })
        .collect())
}

/// Table `k` rendered as `table`, `csv` or `json`.
#[pyfunction]
#[pyo3(signature = (k, out="table"))]
fn format_table(k: u8, out: &str) -> PyResult<String> {
    let format: OutputFormat = parse(out)?;
    let specs = bench::table_specs(k).map_err(py_err)?;
    let reports = specs
        .iter()
        .map(bench::run_benchmark)
        .collect::<Result<Vec<_>, _>>()
        .map_err(py_err)?;
    bench::emit_table(&specs, &reports, format).map_err(py_err)
}

#[pyfunction]
fn merit_samples(problem: &str, lo: f64, hi: f64, count: usize) -> PyResult<Vec<(f64, f64)>> {
    bench::emit_merit_samples(problem, lo, hi, count).map_err(py_err)
}

/// Returns `(status, x, iterations)`.
#[pyfunction]
#[pyo3(signature = (problem, x0, maxit=500))]
fn merit_descent(problem: &str, x0: Vec<f64>, maxit: usize) -> PyResult<(String, Vec<f64>, usize)> {
    let p = equation(problem)?;
    let cfg = PolishConfig {
        maxit,
        ..PolishConfig::default()
    };
    let r = nfph_core::merit_descent(&p, &DVector::from_vec(x0), &cfg).map_err(py_err)?;
    let status = match r.status {
        nfph_core::MeritStatus::Root => "root",
        nfph_core::MeritStatus::LocalMin => "local_min",
        nfph_core::MeritStatus::MaxIt => "max_it",
    };
    Ok((status.into(), r.x.as_slice().to_vec(), r.iterations))
}

/// Samples `sigma_min(F' + alpha I)` over `[-10, 10]^n`; returns `(passed, worst_value)`.
#[pyfunction]
#[pyo3(signature = (problem, alpha, samples=10_000, seed=0))]
fn check_assumption1(problem: &str, alpha: f64, samples: usize, seed: u64) -> PyResult<(bool, f64)> {
    let p = equation(problem)?;
    let a = SpdMatrix::scaled_identity(p.dim(), alpha).map_err(py_err)?;
    let r = diagnostics::check_assumption1(&p, &a, &diagnostics::default_box(p.dim()), samples, seed)
        .map_err(py_err)?;
    Ok((r.passed, r.worst_value))
}

#[pyfunction]
fn phi_mu(a: f64, b: f64, mu: f64) -> f64 {
    ncp::phi_mu(a, b, mu)
}

/// All solutions of the LCP `(M, q)` by active-set enumeration.
#[pyfunction]
fn lcp_enumerate(m: Vec<Vec<f64>>, q: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let n = q.len();
    if m.len() != n || m.iter().any(|row| row.len() != n) {
        return Err(PyValueError::new_err("M must be square with as many rows as q"));
    }
    let mat = DMatrix::from_fn(n, n, |i, j| m[i][j]);
    let sols = ncp::lcp_enumerate(&mat, &DVector::from_vec(q)).map_err(py_err)?;
    Ok(sols.into_iter().map(|s| s.as_slice().to_vec()).collect())
}

#[pymodule]
fn nfph(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpec>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(table_specs, m)?)?;
    m.add_function(wrap_pyfunction!(format_table, m)?)?;
    m.add_function(wrap_pyfunction!(merit_samples, m)?)?;
    m.add_function(wrap_pyfunction!(merit_descent, m)?)?;
    m.add_function(wrap_pyfunction!(check_assumption1, m)?)?;
    m.add_function(wrap_pyfunction!(phi_mu, m)?)?;
    m.add_function(wrap_pyfunction!(lcp_enumerate, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_conversion_keeps_rows() {
        let r = bench::run_benchmark(&BenchmarkSpec::new("ex1")).unwrap();
        let p = PyReport::from(r);
        assert_eq!(p.status, "reached_lambda1");
        assert!(p.converged());
        assert!((p.nsol.unwrap()[0] - 2.0).abs() < 1e-9);
        assert_eq!(p.points[0].1, 0.0);
    }

    #[test]
    fn spec_rejects_bad_method() {
        assert!(PySpec::new("ex1", Some("newton"), None, None, None, None, None, None, None, None, 0).is_err());
    }
}
