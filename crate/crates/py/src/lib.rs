//! Python bindings. Matrices cross the boundary as lists of rows.

use std::path::PathBuf;

use maml_lqr::bounds::{BoundsReport, StepCondition};
use maml_lqr::engine::{run_maml, StepSizeConfig};
use maml_lqr::lqr::riccati_optimal;
use maml_lqr::maml::{is_maml_stabilizing, maml_point};
use maml_lqr::oracle::{grid_search, GridSpec};
use maml_lqr::tasks::{self, from_rows, to_rows, FamilySpec};
use maml_lqr::{Error, InitStateModel, Mat};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(maml_lqr_py, UnstableError, PyValueError);

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Unstable { .. } | Error::EmptyRegion { .. } => UnstableError::new_err(err.to_string()),
        Error::InvalidInput(_) | Error::Dimension(_) | Error::Parse { .. } => {
            PyValueError::new_err(err.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Mat> {
    from_rows(&rows).map_err(PyValueError::new_err)
}

/// A family of LQR tasks sharing `(A, B)`, with `Σ₀ = I`.
#[pyclass(name = "TaskSet", module = "maml_lqr_py")]
struct PyTaskSet {
    inner: maml_lqr::TaskSet,
    init: InitStateModel,
}

impl PyTaskSet {
    fn wrap(inner: maml_lqr::TaskSet) -> Self {
        let init = InitStateModel::identity(inner.state_dim());
        PyTaskSet { inner, init }
    }
}

#[pymethods]
impl PyTaskSet {
    /// The built-in two-state family with ten tasks.
    #[staticmethod]
    #[pyo3(signature = (seed = 7))]
    fn paper_family(seed: u64) -> PyResult<Self> {
        let fam = tasks::generate(&FamilySpec::paper(seed)).map_err(to_py)?;
        Ok(Self::wrap(fam.tasks))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self::wrap(tasks::load(&path).map_err(to_py)?))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn ids(&self) -> Vec<String> {
        self.inner.tasks().iter().map(|t| t.id.clone()).collect()
    }

    fn is_maml_stabilizing(&self, w: Vec<Vec<f64>>, eta: f64) -> PyResult<bool> {
        is_maml_stabilizing(&self.inner, &matrix(w)?, eta, &self.init).map_err(to_py)
    }

    /// `F(W)` at inner step size `eta`.
    fn objective(&self, w: Vec<Vec<f64>>, eta: f64) -> PyResult<f64> {
        Ok(maml_point(&self.inner, &matrix(w)?, eta, &self.init).map_err(to_py)?.value)
    }

    fn gradient(&self, w: Vec<Vec<f64>>, eta: f64) -> PyResult<Vec<Vec<f64>>> {
        let p = maml_point(&self.inner, &matrix(w)?, eta, &self.init).map_err(to_py)?;
        Ok(to_rows(&p.grad))
    }

    /// Per-task optimal gains.
    fn riccati(&self) -> PyResult<Vec<Vec<Vec<f64>>>> {
        self.inner
            .tasks()
            .iter()
            .map(|t| riccati_optimal(t).map(|w| to_rows(&w)).map_err(to_py))
            .collect()
    }

    /// Every bound at `(W, eta)` as a flat dict; non-finite entries are `None`.
    fn bounds<'py>(&self, py: Python<'py>, w: Vec<Vec<f64>>, eta: f64) -> PyResult<Bound<'py, PyDict>> {
        let report = BoundsReport::compute(&self.inner, &matrix(w)?, eta, &StepCondition::default(), &self.init)
            .map_err(to_py)?;
        let out = PyDict::new(py);
        for (k, v) in report.to_flat() {
            out.set_item(k, v)?;
        }
        Ok(out)
    }

    /// Constant step sizes; pass `None` for either to use the certified rule.
    #[pyo3(signature = (w0, eta = None, beta = None, epsilon = 1e-3, max_iters = 50))]
    fn run_maml<'py>(
        &self,
        py: Python<'py>,
        w0: Vec<Vec<f64>>,
        eta: Option<f64>,
        beta: Option<f64>,
        epsilon: f64,
        max_iters: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let mut cfg = StepSizeConfig::auto();
        if let Some(eta) = eta {
            cfg.eta = maml_lqr::engine::EtaSchedule::Constant { eta };
        }
        if let Some(beta) = beta {
            cfg.beta = maml_lqr::engine::BetaRule::Constant { beta };
        }
        let res = run_maml(&self.inner, &matrix(w0)?, &cfg, epsilon, max_iters, &self.init)
            .map_err(to_py)?;
        let out = PyDict::new(py);
        out.set_item("w_final", to_rows(&res.w_final))?;
        out.set_item("iterations_used", res.iterations_used)?;
        out.set_item("reached_epsilon", res.reached_epsilon)?;
        out.set_item("final_grad_norm", res.final_grad_norm)?;
        out.set_item("F", res.trace.iter().map(|r| r.f).collect::<Vec<_>>())?;
        out.set_item("grad_F_fro", res.trace.iter().map(|r| r.grad_f_fro).collect::<Vec<_>>())?;
        Ok(out)
    }

    /// Grid oracle over the default box (two-entry policies) or `bounds`.
    #[pyo3(signature = (eta, resolution = 0.05, bounds = None))]
    fn grid_search<'py>(
        &self,
        py: Python<'py>,
        eta: f64,
        resolution: f64,
        bounds: Option<Vec<(f64, f64)>>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let bounds = bounds.unwrap_or_else(|| GridSpec::paper_default().bounds);
        let spec = GridSpec::new(bounds, resolution).map_err(to_py)?;
        let r = grid_search(&self.inner, &spec, eta, &self.init).map_err(to_py)?;
        let out = PyDict::new(py);
        out.set_item("w_star", to_rows(&r.w_star))?;
        out.set_item("f_star", r.f_star)?;
        out.set_item("evaluated_points", r.evaluated_points)?;
        out.set_item("skipped_unstable", r.skipped_unstable)?;
        Ok(out)
    }
}

#[pymodule]
fn maml_lqr_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTaskSet>()?;
    m.add("UnstableError", m.py().get_type::<UnstableError>())?;
    Ok(())
}
