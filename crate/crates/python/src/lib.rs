//! Python bindings. Closed forms, oracles, samplers and the simulator are
//! exposed as plain functions taking a `ModelParams` object; reports come
//! back as dictionaries.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;

use stable_branching::analytic::{self, RegimeLimit};
use stable_branching::distributions;
use stable_branching::simulator::{self, Process, SimConfig};
use stable_branching::verify::{self, LaplaceEngine};
use stable_branching::{Error, RngStream};

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn process(name: &str) -> PyResult<Process> {
    match name {
        "X" | "x" => Ok(Process::X),
        "Y" | "y" => Ok(Process::Y),
        other => Err(PyValueError::new_err(format!(
            "process must be 'X' or 'Y', got {other:?}"
        ))),
    }
}

fn to_py<'py>(py: Python<'py>, value: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    use serde_json::Value;
    Ok(match value {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_u64() {
            Some(u) => u.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, to_py(py, v)?)?;
            }
            dict.into_any()
        }
    })
}

/// Serializes through JSON, keeping non-finite floats that JSON drops.
fn record<'py, T: Serialize>(py: Python<'py>, value: &T, floats: &[(&str, f64)]) -> PyResult<Bound<'py, PyAny>> {
    let json = serde_json::to_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let obj = to_py(py, &json)?;
    if let Ok(dict) = obj.cast::<PyDict>() {
        for (k, v) in floats {
            dict.set_item(*k, *v)?;
        }
    }
    Ok(obj)
}

fn estimate_record<'py>(py: Python<'py>, r: &verify::EstimateReport) -> PyResult<Bound<'py, PyAny>> {
    record(
        py,
        r,
        &[
            ("mc_estimate", r.mc_estimate),
            ("std_error", r.std_error),
            ("z_score", r.z_score),
        ],
    )
}

/// Model parameters `(K, beta, gamma, theta)`.
#[pyclass(name = "ModelParams", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyModelParams {
    inner: analytic::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (k=1.0, beta=0.5, gamma=0.5, theta=1.0))]
    fn new(k: f64, beta: f64, gamma: f64, theta: f64) -> PyResult<Self> {
        Ok(Self {
            inner: analytic::ModelParams::new(k, beta, gamma, theta).map_err(err)?,
        })
    }

    #[getter]
    fn k(&self) -> f64 {
        self.inner.k()
    }
    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }
    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }
    #[getter]
    fn theta(&self) -> f64 {
        self.inner.theta()
    }
    /// `(1 + beta) / (K beta)`.
    #[getter]
    fn a(&self) -> f64 {
        self.inner.a()
    }
    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta()
    }
    #[getter]
    fn ordering(&self) -> String {
        self.inner.ordering().to_string()
    }

    /// Limit cases compatible with these parameters.
    fn applicable_cases(&self) -> Vec<u32> {
        RegimeLimit::applicable(&self.inner)
            .iter()
            .map(|c| u32::from(c.case_id))
            .collect()
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ModelParams(k={}, beta={}, gamma={}, theta={})",
            p.k(),
            p.beta(),
            p.gamma(),
            p.theta()
        )
    }
}

fn case(case_id: u8, p: &PyModelParams) -> PyResult<RegimeLimit> {
    RegimeLimit::new(case_id, &p.inner).map_err(err)
}

#[pyfunction]
fn pgf_f(t: f64, s: f64, params: PyModelParams) -> PyResult<f64> {
    analytic::pgf_f(t, s, &params.inner).map_err(err)
}

#[pyfunction]
fn pgf_phi(t: f64, s: f64, params: PyModelParams) -> PyResult<f64> {
    analytic::pgf_phi(t, s, &params.inner).map_err(err)
}

#[pyfunction]
fn b_function(t: f64, s: f64, params: PyModelParams) -> PyResult<f64> {
    analytic::b_function(t, s, &params.inner).map_err(err)
}

/// Series form of `Phi`. Returns `(value, order)`; without `order` the sum
/// stops once terms become negligible.
#[pyfunction]
#[pyo3(signature = (t, s, params, order=None))]
fn pgf_phi_series(t: f64, s: f64, params: PyModelParams, order: Option<usize>) -> PyResult<(f64, usize)> {
    let v = match order {
        Some(n) => analytic::pgf_phi_series(t, s, &params.inner, n),
        None => analytic::pgf_phi_series_auto(t, s, &params.inner),
    }
    .map_err(err)?;
    Ok((v.value, v.order))
}

#[pyfunction]
fn extinction_prob_x(t: f64, params: PyModelParams) -> PyResult<f64> {
    analytic::extinction_prob_x(t, &params.inner).map_err(err)
}

#[pyfunction]
fn extinction_prob_y(t: f64, params: PyModelParams) -> PyResult<f64> {
    analytic::extinction_prob_y(t, &params.inner).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (t, s, params, step=1e-4))]
fn pde_residual(t: f64, s: f64, params: PyModelParams, step: f64) -> PyResult<f64> {
    analytic::pde_residual(t, s, &params.inner, step).map_err(err)
}

#[pyfunction]
fn finite_laplace(t: f64, lam: f64, case_id: u8, params: PyModelParams) -> PyResult<f64> {
    analytic::finite_laplace(t, lam, &case(case_id, &params)?, &params.inner).map_err(err)
}

/// `None` where the limit is undefined (case 3 at `lam = 0`).
#[pyfunction]
fn limit_laplace(lam: f64, case_id: u8, params: PyModelParams) -> PyResult<Option<f64>> {
    match analytic::limit_laplace(lam, &case(case_id, &params)?, &params.inner) {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedLimit) => Ok(None),
        Err(e) => Err(err(e)),
    }
}

#[pyfunction]
fn pgf_phi_coefficients_linear(t: f64, params: PyModelParams, n: usize) -> PyResult<Vec<f64>> {
    analytic::pgf_phi_coefficients_linear(t, &params.inner, n).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (t, s, params, tol=1e-12))]
fn ode_oracle_f(t: f64, s: f64, params: PyModelParams, tol: f64) -> PyResult<f64> {
    verify::ode_oracle_f(t, s, &params.inner, tol).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (t, s, params, tol=1e-12))]
fn quad_oracle_phi(t: f64, s: f64, params: PyModelParams, tol: f64) -> PyResult<f64> {
    verify::quad_oracle_phi(t, s, &params.inner, tol).map_err(err)
}

#[pyfunction]
fn sibuya_pmf(k: u64, gamma: f64) -> PyResult<f64> {
    distributions::sibuya_pmf(k, gamma).map_err(err)
}

#[pyfunction]
fn offspring_pmf(k: u64, beta: f64) -> PyResult<f64> {
    distributions::offspring_pmf(k, beta).map_err(err)
}

/// `n` Sibuya draws from stream `stream_id` of `seed`, each capped at `cap`.
#[pyfunction]
#[pyo3(signature = (gamma, n, seed=42, stream_id=0, cap=u64::MAX))]
fn sample_sibuya(gamma: f64, n: usize, seed: u64, stream_id: u64, cap: u64) -> PyResult<Vec<u64>> {
    let law = distributions::SibuyaLaw::new(gamma).map_err(err)?;
    let mut rng = RngStream::new(seed, stream_id);
    Ok((0..n).map(|_| law.sample(&mut rng, cap).value).collect())
}

#[pyfunction]
#[pyo3(signature = (beta, n, seed=42, stream_id=0, cap=u64::MAX))]
fn sample_offspring(beta: f64, n: usize, seed: u64, stream_id: u64, cap: u64) -> PyResult<Vec<u64>> {
    let law = distributions::OffspringLaw::new(beta).map_err(err)?;
    let mut rng = RngStream::new(seed, stream_id);
    Ok((0..n).map(|_| law.sample(&mut rng, cap).value).collect())
}

/// One replicate of `X` or `Y` up to `horizon`; returns the final state.
#[pyfunction]
#[pyo3(signature = (params, horizon, process="Y", seed=42, stream_id=0))]
fn simulate<'py>(
    py: Python<'py>,
    params: PyModelParams,
    horizon: f64,
    process: &str,
    seed: u64,
    stream_id: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = SimConfig::new(params.inner, horizon, seed).map_err(err)?;
    let state = simulator::simulate(&cfg, self::process(process)?, stream_id).map_err(err)?;
    record(py, &state, &[("clock", state.clock)])
}

/// Monte Carlo estimate of `E[s^X(t)]` or `E[s^Y(t)]` with its comparison
/// against the closed form.
#[pyfunction]
#[pyo3(signature = (params, t, s, n, process="Y", seed=42, workers=1))]
#[allow(clippy::too_many_arguments)]
fn estimate_pgf<'py>(
    py: Python<'py>,
    params: PyModelParams,
    t: f64,
    s: f64,
    n: u64,
    process: &str,
    seed: u64,
    workers: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let proc_ = self::process(process)?;
    let cfg = SimConfig::new(params.inner, t, seed).map_err(err)?;
    let r = py
        .detach(|| verify::estimate_pgf(proc_, t, s, n, &cfg, workers))
        .map_err(err)?;
    estimate_record(py, &r)
}

/// Monte Carlo estimate of `Psi(t, lam)` for limit case `case_id`.
#[pyfunction]
#[pyo3(signature = (params, case_id, t, lam, n, seed=42, workers=1))]
#[allow(clippy::too_many_arguments)]
fn estimate_laplace<'py>(
    py: Python<'py>,
    params: PyModelParams,
    case_id: u8,
    t: f64,
    lam: f64,
    n: u64,
    seed: u64,
    workers: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let c = case(case_id, &params)?;
    let cfg = SimConfig::new(params.inner, 0.0, seed).map_err(err)?;
    let r = py
        .detach(|| verify::estimate_laplace(&c, t, lam, n, &cfg, LaplaceEngine::cohort(), workers))
        .map_err(err)?;
    estimate_record(py, &r)
}

/// Runs the verification suite on the default parameter sets and returns
/// `(passed, rows)` with one dictionary per row.
#[pyfunction]
#[pyo3(signature = (seed=42, replicates=None, workers=1))]
fn run_verification<'py>(
    py: Python<'py>,
    seed: u64,
    replicates: Option<u64>,
    workers: usize,
) -> PyResult<(bool, Bound<'py, PyList>)> {
    let mut spec = verify::SuiteSpec::default_suite(seed);
    spec.workers = workers;
    if let Some(n) = replicates {
        spec.pgf_replicates = n;
        spec.laplace_replicates = n;
        spec.degenerate_replicates = (n / 10).max(1);
    }
    let report = py.detach(|| verify::run_verification_suite(&spec)).map_err(err)?;
    let rows = PyList::empty(py);
    for r in &report.records {
        let row = match r {
            verify::Record::Estimate(e) => estimate_record(py, e)?,
            verify::Record::Oracle(_) => record(py, r, &[])?,
        };
        if let verify::Record::Estimate(_) = r {
            row.set_item("kind", "estimate")?;
        }
        rows.append(row)?;
    }
    Ok((report.passed(), rows))
}

#[pymodule]
#[pyo3(name = "stable_branching")]
fn py_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_function(wrap_pyfunction!(pgf_f, m)?)?;
    m.add_function(wrap_pyfunction!(pgf_phi, m)?)?;
    m.add_function(wrap_pyfunction!(b_function, m)?)?;
    m.add_function(wrap_pyfunction!(pgf_phi_series, m)?)?;
    m.add_function(wrap_pyfunction!(extinction_prob_x, m)?)?;
    m.add_function(wrap_pyfunction!(extinction_prob_y, m)?)?;
    m.add_function(wrap_pyfunction!(pde_residual, m)?)?;
    m.add_function(wrap_pyfunction!(finite_laplace, m)?)?;
    m.add_function(wrap_pyfunction!(limit_laplace, m)?)?;
    m.add_function(wrap_pyfunction!(pgf_phi_coefficients_linear, m)?)?;
    m.add_function(wrap_pyfunction!(ode_oracle_f, m)?)?;
    m.add_function(wrap_pyfunction!(quad_oracle_phi, m)?)?;
    m.add_function(wrap_pyfunction!(sibuya_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(offspring_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(sample_sibuya, m)?)?;
    m.add_function(wrap_pyfunction!(sample_offspring, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_pgf, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_laplace, m)?)?;
    m.add_function(wrap_pyfunction!(run_verification, m)?)?;
    Ok(())
}
