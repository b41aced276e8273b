//! Python module `volgrow`: torus maps, the volume-growth and spanning-set
//! entropy estimators, and the CLI commands as a function.

use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use volgrow_core::bowen::{self, BundleChoice};
use volgrow_core::cli::{self, Command, RunError};
use volgrow_core::splitting::SplittingOptions;
use volgrow_core::volume::{self, SamplerSpec};
use volgrow_core::{cocycle, Error, SystemSpec, TorusPoint};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Argument { .. } => PyValueError::new_err(e.to_string()),
        Error::Numerical { .. } => PyArithmeticError::new_err(e.to_string()),
        Error::Convergence { .. } => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(a) => {
            let items = a
                .iter()
                .map(|x| to_py(py, x))
                .collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        Value::Object(m) => {
            let d = PyDict::new(py);
            for (k, x) in m {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn serialize<'py, T: serde::Serialize>(py: Python<'py>, x: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(x).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &v)
}

fn point(coords: Vec<f64>) -> PyResult<TorusPoint> {
    TorusPoint::new(&coords).map_err(py_err)
}

/// A smooth map of the torus.
#[pyclass(name = "System", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySystem {
    inner: SystemSpec,
}

#[pymethods]
impl PySystem {
    #[staticmethod]
    fn cat_map() -> Self {
        PySystem {
            inner: SystemSpec::cat_map(),
        }
    }

    #[staticmethod]
    fn identity(dimension: usize) -> PyResult<Self> {
        Ok(PySystem {
            inner: SystemSpec::identity(dimension).map_err(py_err)?,
        })
    }

    /// Integer matrix with determinant ±1.
    #[staticmethod]
    fn linear(rows: Vec<Vec<i64>>) -> PyResult<Self> {
        Ok(PySystem {
            inner: SystemSpec::linear(rows).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn skew_product(epsilon: f64) -> PyResult<Self> {
        Ok(PySystem {
            inner: SystemSpec::skew_product(epsilon).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn perturbed_cat(epsilon: f64) -> PyResult<Self> {
        Ok(PySystem {
            inner: SystemSpec::perturbed_cat(epsilon).map_err(py_err)?,
        })
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().as_str()
    }

    #[getter]
    fn exact_entropy(&self) -> Option<f64> {
        self.inner.exact_entropy().map(|e| e.value)
    }

    fn evaluate(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self
            .inner
            .evaluate(&point(x)?)
            .map_err(py_err)?
            .coords()
            .to_vec())
    }

    fn evaluate_inverse(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self
            .inner
            .evaluate_inverse(&point(x)?)
            .map_err(py_err)?
            .coords()
            .to_vec())
    }

    fn jacobian(&self, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        Ok(self
            .inner
            .jacobian(&point(x)?)
            .map_err(py_err)?
            .entries
            .to_rows())
    }

    fn __repr__(&self) -> String {
        format!(
            "System(kind={}, dimension={})",
            self.inner.kind().as_str(),
            self.inner.dimension()
        )
    }
}

/// Log singular values of `Df^n(x)`, descending.
#[pyfunction]
fn log_singular_values(system: &PySystem, x: Vec<f64>, n: usize) -> PyResult<Vec<f64>> {
    Ok(cocycle::accumulate(&system.inner, &point(x)?, n)
        .map_err(py_err)?
        .log_singular)
}

#[pyfunction]
fn lyapunov_spectrum(system: &PySystem, x: Vec<f64>, n: usize) -> PyResult<Vec<f64>> {
    Ok(cocycle::lyapunov_spectrum(&system.inner, &point(x)?, n)
        .map_err(py_err)?
        .exponents)
}

#[pyfunction]
fn max_subspace_log_det(log_sigma: Vec<f64>) -> PyResult<f64> {
    volume::max_subspace_log_det(&log_sigma).map_err(py_err)
}

/// `log ∫ max_V |det Df^n|_V| dx` by Monte-Carlo.
#[pyfunction]
#[pyo3(signature = (system, n, samples=10_000, seed=0))]
fn integrate_growth(system: &PySystem, n: usize, samples: usize, seed: u64) -> PyResult<f64> {
    volume::integrate_growth(&system.inner, n, &SamplerSpec::monte_carlo(samples, seed))
        .map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (system, n_list, samples=10_000, seed=0))]
fn growth_rate<'py>(
    py: Python<'py>,
    system: &PySystem,
    n_list: Vec<usize>,
    samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let c = volume::growth_rate(
        &system.inner,
        &n_list,
        &SamplerSpec::monte_carlo(samples, seed),
    )
    .map_err(py_err)?;
    serialize(py, &c)
}

#[pyfunction]
#[pyo3(signature = (system, n, delta, resolution, separated=false))]
fn bowen_entropy<'py>(
    py: Python<'py>,
    system: &PySystem,
    n: usize,
    delta: f64,
    resolution: usize,
    separated: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let e = if separated {
        bowen::separated_entropy(&system.inner, n, delta, resolution)
    } else {
        bowen::spanning_entropy(&system.inner, n, delta, resolution)
    }
    .map_err(py_err)?;
    serialize(py, &e)
}

/// Normalized log-integrals over Bowen balls around `center`. `bundle` is
/// `max_over_v`, `max_over_f` or `fixed_f:<i>`.
#[allow(clippy::too_many_arguments)]
#[pyfunction]
#[pyo3(signature = (system, center, n_values, delta=0.05, bundle="max_over_v", mc_count=100_000, seed=0))]
fn ball_volume_growth<'py>(
    py: Python<'py>,
    system: &PySystem,
    center: Vec<f64>,
    n_values: Vec<usize>,
    delta: f64,
    bundle: &str,
    mc_count: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let choice = BundleChoice::parse(bundle)
        .ok_or_else(|| PyValueError::new_err(format!("unknown bundle {bundle:?}")))?;
    let opts = SplittingOptions::for_system(&system.inner);
    let r = bowen::ball_volume_growth(
        &system.inner,
        &point(center)?,
        &n_values,
        delta,
        choice,
        opts.as_ref(),
        mc_count,
        seed,
    )
    .map_err(py_err)?;
    serialize(py, &r)
}

/// Runs a CLI command on config text and returns the JSON report as a dict.
#[pyfunction]
#[pyo3(signature = (command, config, seed=None))]
fn run<'py>(
    py: Python<'py>,
    command: &str,
    config: &str,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let c = Command::parse(command)
        .ok_or_else(|| PyValueError::new_err(format!("unknown command {command:?}")))?;
    let mut cfg = cli::parse_config(config).map_err(|e| PyValueError::new_err(e.to_string()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let report = cli::run(&cfg, c).map_err(|e| match e {
        RunError::Module(e) => py_err(e),
        e => PyValueError::new_err(e.to_json()),
    })?;
    to_py(py, &report.json)
}

#[pymodule]
pub fn volgrow(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystem>()?;
    m.add_function(wrap_pyfunction!(log_singular_values, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(max_subspace_log_det, m)?)?;
    m.add_function(wrap_pyfunction!(integrate_growth, m)?)?;
    m.add_function(wrap_pyfunction!(growth_rate, m)?)?;
    m.add_function(wrap_pyfunction!(bowen_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(ball_volume_growth, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add("GRAMMAR", cli::GRAMMAR)?;
    Ok(())
}
