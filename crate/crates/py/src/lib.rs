//! Python module `binsense`: matrices, girth and RIC analysis, solvers and
//! the benchmark harness. Structured results come back as plain dicts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use serde_json::Value;

use binsense::bench::{self, Algorithm, ExperimentConfig, Plan, Report};
use binsense::construction::{self, PegConfig, TieBreak};
use binsense::recovery::{Operator, SensingOperator};
use binsense::{spectral, theory};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_py_any(py)?,
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.into_py_any(py)?,
            (None, Some(u)) => u.into_py_any(py)?,
            _ => n.as_f64().unwrap_or(f64::NAN).into_py_any(py)?,
        },
        Value::String(s) => s.into_py_any(py)?,
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_py_any(py)?
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, to_py(py, item)?)?;
            }
            dict.into_py_any(py)?
        }
    })
}

fn ser_to_py<T: serde::Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    to_py(py, &serde_json::to_value(v).map_err(value_err)?)
}

fn peg_config(seed: Option<u64>, retries: usize) -> PegConfig {
    PegConfig {
        tie_break: seed.map_or(TieBreak::LowestIndex, TieBreak::Random),
        max_retries: retries,
        ..PegConfig::default()
    }
}

/// Column-regular binary sensing matrix with entries `1/sqrt(d)`.
#[pyclass(name = "SensingMatrix", module = "binsense", frozen)]
struct PySensingMatrix {
    inner: binsense::SensingMatrix,
}

#[pymethods]
impl PySensingMatrix {
    #[new]
    fn new(m: usize, n: usize, d: usize, supports: Vec<Vec<usize>>) -> PyResult<Self> {
        binsense::SensingMatrix::from_supports(m, n, d, supports)
            .map(|inner| PySensingMatrix { inner })
            .map_err(value_err)
    }

    /// PEG construction. With `min_girth` set, randomized restarts run until
    /// the girth target is met.
    #[staticmethod]
    #[pyo3(signature = (m, n, d, seed=None, min_girth=None, retries=20))]
    fn peg(m: usize, n: usize, d: usize, seed: Option<u64>, min_girth: Option<usize>, retries: usize) -> PyResult<Self> {
        let cfg = peg_config(seed, retries);
        let inner = match min_girth {
            Some(g) => construction::peg_with_girth(m, n, d, g, &cfg).map(|(a, _)| a),
            None => construction::peg_construct(m, n, d, &cfg),
        }
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(PySensingMatrix { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (m, n, d, seed=0))]
    fn random(m: usize, n: usize, d: usize, seed: u64) -> PyResult<Self> {
        construction::random_regular(m, n, d, seed)
            .map(|inner| PySensingMatrix { inner })
            .map_err(value_err)
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        binsense::SensingMatrix::from_text(text)
            .map(|inner| PySensingMatrix { inner })
            .map_err(value_err)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.nrows()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.ncols()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.degree()
    }

    fn supports(&self) -> Vec<Vec<usize>> {
        self.inner.supports().to_vec()
    }

    fn row_degrees(&self) -> Vec<usize> {
        self.inner.row_degrees()
    }

    /// Global girth, or None for an acyclic graph.
    fn girth(&self) -> Option<usize> {
        self.inner.girth().global_girth.finite()
    }

    fn local_girth(&self) -> Vec<Option<usize>> {
        self.inner.girth().local_girth.iter().map(|g| g.finite()).collect()
    }

    fn correlation_spectrum(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        ser_to_py(py, &self.inner.correlation_spectrum())
    }

    fn coherence(&self) -> f64 {
        self.inner.correlation_spectrum().coherence_f64()
    }

    fn correlated_fraction(&self) -> f64 {
        theory::ratio_to_f64(self.inner.correlation_spectrum().correlated_fraction())
    }

    /// Normalized Gram block over `columns` as a list of rows.
    fn gram(&self, columns: Vec<usize>) -> PyResult<Vec<Vec<f64>>> {
        let g = self.inner.gram_submatrix(&columns).map_err(value_err)?;
        let k = g.size();
        let flat = g.to_f64();
        Ok((0..k).map(|i| flat[i * k..(i + 1) * k].to_vec()).collect())
    }

    fn apply(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        if x.len() != self.inner.ncols() {
            return Err(value_err(format!("expected length {}", self.inner.ncols())));
        }
        Ok(SensingOperator::apply(&self.inner, &x))
    }

    /// Dense matrix as a list of rows.
    fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut rows = vec![vec![0.0; self.inner.ncols()]; self.inner.nrows()];
        let amp = self.inner.amplitude();
        for (j, s) in self.inner.supports().iter().enumerate() {
            for &i in s {
                rows[i][j] = amp;
            }
        }
        rows
    }

    #[pyo3(signature = (k, samples=1000, seed=0))]
    fn empirical_ric(&self, py: Python<'_>, k: usize, samples: usize, seed: u64) -> PyResult<Py<PyAny>> {
        let r = py
            .detach(|| spectral::empirical_ric(&self.inner, k, samples, seed))
            .map_err(value_err)?;
        ser_to_py(py, &r)
    }

    #[pyo3(signature = (k, samples=1000, seed=0))]
    fn offdiag_stats(&self, py: Python<'_>, k: usize, samples: usize, seed: u64) -> PyResult<Py<PyAny>> {
        let r = py
            .detach(|| spectral::offdiag_proportion_stats(&self.inner, k, samples, seed))
            .map_err(value_err)?;
        ser_to_py(py, &r)
    }

    /// Recovers `x` from `y = A x` with `omp`, `iht`, `sp` or `bp`.
    #[pyo3(signature = (y, k, algorithm="omp"))]
    fn recover(&self, py: Python<'_>, y: Vec<f64>, k: usize, algorithm: &str) -> PyResult<Py<PyAny>> {
        let alg = Algorithm::from_name(algorithm).ok_or_else(|| value_err(format!("unknown algorithm {algorithm}")))?;
        if y.len() != self.inner.nrows() {
            return Err(value_err(format!("expected length {}", self.inner.nrows())));
        }
        let out = py
            .detach(|| bench::solve(&alg, &self.inner, &y, k, false))
            .map_err(value_err)?;
        ser_to_py(py, &out)
    }

    fn __repr__(&self) -> String {
        format!(
            "SensingMatrix(m={}, n={}, d={})",
            self.inner.nrows(),
            self.inner.ncols(),
            self.inner.degree()
        )
    }
}

/// Row-major Gaussian matrix with `N(0, 1/M)` entries.
#[pyfunction]
#[pyo3(signature = (m, n, seed=0))]
fn gaussian(m: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let g = construction::gaussian_matrix(m, n, seed);
    (0..m).map(|i| (0..n).map(|j| g[(i, j)]).collect()).collect()
}

/// `(practical, theoretical)` largest degree with girth >= 6.
#[pyfunction]
#[pyo3(signature = (m, n, retries=20))]
fn dmax(py: Python<'_>, m: usize, n: usize, retries: usize) -> PyResult<(usize, usize)> {
    let r = py
        .detach(|| construction::find_dmax(m, n, &peg_config(None, retries)))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((r.d_max, r.theoretical_bound))
}

/// Expected correlated fraction `(numerator, denominator)` for girth > 4.
#[pyfunction]
fn lemma1_rho(m: i64, n: i64, d: i64) -> PyResult<(i64, i64)> {
    let r = theory::lemma1_rho(m, n, d).map_err(value_err)?;
    Ok((*r.numer(), *r.denom()))
}

#[pyfunction]
fn ric_rip1(py: Python<'_>, k: i64, d: i64) -> PyResult<Py<PyAny>> {
    ser_to_py(py, &theory::ric_rip1(k, d).map_err(value_err)?)
}

#[pyfunction]
fn ric_rip2(py: Python<'_>, k: i64, d: i64, rho: f64) -> PyResult<Py<PyAny>> {
    ser_to_py(py, &theory::ric_rip2(k, d, rho).map_err(value_err)?)
}

#[pyfunction]
fn ric_rip3(py: Python<'_>, k: i64, d: i64, s: i64, m: i64) -> PyResult<Py<PyAny>> {
    ser_to_py(py, &theory::ric_rip3(k, d, s, m).map_err(value_err)?)
}

/// Runs an experiment given as JSON. `plan` defaults to a single trials run.
#[pyfunction]
#[pyo3(signature = (config, plan=None))]
fn run_bench(py: Python<'_>, config: &str, plan: Option<&str>) -> PyResult<Py<PyAny>> {
    let config: ExperimentConfig = serde_json::from_str(config).map_err(value_err)?;
    let plan: Plan = match plan {
        Some(p) => serde_json::from_str(p).map_err(value_err)?,
        None => Plan::Trials,
    };
    let report = py.detach(|| bench::run_plan(&config, &plan)).map_err(value_err)?;
    ser_to_py(py, &report)
}

/// Re-runs a report produced by `run_bench` or the CLI (given as JSON).
#[pyfunction]
fn replay(py: Python<'_>, report: &str) -> PyResult<Py<PyAny>> {
    let report = Report::from_json(report).map_err(value_err)?;
    let again = py.detach(|| report.replay()).map_err(value_err)?;
    ser_to_py(py, &again)
}

/// Reads a matrix file in either text format and returns its dimensions.
#[pyfunction]
fn read_shape(path: &str) -> PyResult<(usize, usize)> {
    let a = Operator::read(path).map_err(value_err)?;
    Ok((a.nrows(), a.ncols()))
}

#[pymodule(name = "binsense")]
fn binsense_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySensingMatrix>()?;
    m.add_function(wrap_pyfunction!(gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(dmax, m)?)?;
    m.add_function(wrap_pyfunction!(lemma1_rho, m)?)?;
    m.add_function(wrap_pyfunction!(ric_rip1, m)?)?;
    m.add_function(wrap_pyfunction!(ric_rip2, m)?)?;
    m.add_function(wrap_pyfunction!(ric_rip3, m)?)?;
    m.add_function(wrap_pyfunction!(run_bench, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(read_shape, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
