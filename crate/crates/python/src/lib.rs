//! Python bindings for `ddimpl`.
//!
//! Matrices cross the boundary as lists of rows (numpy arrays are accepted on
//! input). Channel indices are 0-based here, unlike the command line.

// pyo3 0.22 macro expansion trips this lint on every `PyResult` method.
#![allow(clippy::useless_conversion)]

use ddimpl::canonical::{synthesize as synthesize_core, verify_closed_loop};
use ddimpl::implementability::{self, DataBundle, GpeBounds, Tolerances};
use ddimpl::lti::invariants_of;
use ddimpl::subspace::{self as sub, projector_onto};
use ddimpl::{Error, RankTolerance};
use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

const DEFAULT_TOL: f64 = 1e-10;

fn err(e: Error) -> PyErr {
    match e {
        Error::NumericalDegeneracy(_) | Error::Generation(_) | Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("ragged matrix"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn json_to_py(py: Python<'_>, text: &str) -> PyResult<PyObject> {
    Ok(py.import_bound("json")?.call_method1("loads", (text,))?.unbind())
}

fn tolerances(tol: f64) -> Tolerances {
    Tolerances {
        rank: RankTolerance::new(tol),
        ..Tolerances::default()
    }
}

/// A sampled vector signal: `samples[t][j]` is channel `j` at time `t`.
#[pyclass(frozen)]
#[derive(Clone)]
pub struct Trajectory {
    inner: ddimpl::Trajectory,
}

#[pymethods]
impl Trajectory {
    #[new]
    fn new(samples: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self {
            inner: ddimpl::Trajectory::from_samples(&samples).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ddimpl::Trajectory::read_csv(text.as_bytes()).map_err(err)?,
        })
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv_string()
    }

    #[getter]
    fn channels(&self) -> usize {
        self.inner.channels()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        self.inner.samples().map(<[f64]>::to_vec).collect()
    }

    /// Depth-`depth` Hankel matrix in interleaved time-major layout.
    fn hankel(&self, depth: usize) -> PyResult<Vec<Vec<f64>>> {
        Ok(to_rows(&ddimpl::signal::hankel(&self.inner, depth).map_err(err)?))
    }

    /// `(gpe, rank, expected)` for the bounds `m`, `n`.
    #[pyo3(signature = (depth, m, n, tol = DEFAULT_TOL))]
    fn is_gpe(&self, depth: usize, m: usize, n: usize, tol: f64) -> PyResult<(bool, usize, usize)> {
        let r = ddimpl::signal::is_gpe(&self.inner, depth, m, n, RankTolerance::new(tol)).map_err(err)?;
        Ok((r.gpe, r.rank, r.expected))
    }

    fn __repr__(&self) -> String {
        format!("Trajectory(channels={}, len={})", self.inner.channels(), self.inner.len())
    }
}

/// Split of the plant variables into `w` (to be controlled) and `c` (control) channels.
#[pyclass(frozen)]
#[derive(Clone)]
pub struct Partition {
    inner: ddimpl::Partition,
}

#[pymethods]
impl Partition {
    #[new]
    fn new(total: usize, picks_w: Vec<usize>, picks_c: Vec<usize>) -> PyResult<Self> {
        Ok(Self {
            inner: ddimpl::Partition::new(total, picks_w, picks_c).map_err(err)?,
        })
    }

    #[getter]
    fn picks_w(&self) -> Vec<usize> {
        self.inner.picks_w().to_vec()
    }

    #[getter]
    fn picks_c(&self) -> Vec<usize> {
        self.inner.picks_c().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("Partition(w={:?}, c={:?})", self.inner.picks_w(), self.inner.picks_c())
    }
}

/// Input/state/output model; variables are ordered `(u, y)`.
#[pyclass(frozen)]
#[derive(Clone)]
pub struct StateSpaceModel {
    inner: ddimpl::StateSpaceModel,
}

#[pymethods]
impl StateSpaceModel {
    #[new]
    #[pyo3(signature = (a, b, c, d, partition = None))]
    fn new(
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
        d: Vec<Vec<f64>>,
        partition: Option<Partition>,
    ) -> PyResult<Self> {
        let n = a.len();
        let (p, m) = (d.len(), d.first().map_or(0, Vec::len));
        let shaped = |rows: &[Vec<f64>], r: usize, cols: usize| -> PyResult<DMatrix<f64>> {
            if r == 0 || cols == 0 {
                return Ok(DMatrix::zeros(r, cols));
            }
            to_matrix(rows)
        };
        let inner = ddimpl::StateSpaceModel::new(
            shaped(&a, n, n)?,
            shaped(&b, n, m)?,
            shaped(&c, p, n)?,
            shaped(&d, p, m)?,
            partition.map(|p| p.inner),
        )
        .map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ddimpl::StateSpaceModel::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn is_minimal(&self) -> bool {
        self.inner.is_minimal()
    }

    /// `(m, p, n, lag)`.
    fn invariants(&self) -> PyResult<(usize, usize, usize, usize)> {
        let i = invariants_of(&self.inner).map_err(err)?;
        Ok((i.m_inputs, i.p_outputs, i.n_order, i.lag))
    }

    /// Full trajectory `(u, y)` for inputs `u[t]` and initial state `x0`.
    #[pyo3(signature = (u, x0 = None))]
    fn simulate(&self, u: Vec<Vec<f64>>, x0: Option<Vec<f64>>) -> PyResult<Trajectory> {
        let m = self.inner.m();
        if u.iter().any(|s| s.len() != m) {
            return Err(PyValueError::new_err(format!("each input sample needs {m} entries")));
        }
        let flat: Vec<f64> = u.iter().flatten().copied().collect();
        let x0 = x0.unwrap_or_else(|| vec![0.0; self.inner.n()]);
        let inner = self.inner.to_latent().simulate(&flat, u.len(), &x0).map_err(err)?;
        Ok(Trajectory { inner })
    }

    /// Orthonormal basis of the restricted behavior on `[1, horizon]`.
    #[pyo3(signature = (horizon, tol = DEFAULT_TOL))]
    fn restricted_basis(&self, horizon: usize, tol: f64) -> PyResult<Vec<Vec<f64>>> {
        let b = ddimpl::lti::restricted_behavior_basis(&self.inner, horizon, RankTolerance::new(tol)).map_err(err)?;
        Ok(to_rows(b.matrix()))
    }

    fn __repr__(&self) -> String {
        format!("StateSpaceModel(m={}, p={}, n={})", self.inner.m(), self.inner.p(), self.inner.n())
    }
}

/// Data-driven implementability verdict as a dict.
#[pyfunction]
#[pyo3(signature = (plant, reference, partition, horizon, lag_bound, m_bounds, n_bounds, tol = DEFAULT_TOL))]
#[allow(clippy::too_many_arguments)]
fn check_data(
    py: Python<'_>,
    plant: &Trajectory,
    reference: &Trajectory,
    partition: &Partition,
    horizon: usize,
    lag_bound: usize,
    m_bounds: (usize, usize),
    n_bounds: (usize, usize),
    tol: f64,
) -> PyResult<PyObject> {
    let bundle = DataBundle::new(
        plant.inner.clone(),
        reference.inner.clone(),
        horizon,
        partition.inner.clone(),
        lag_bound,
    )
    .map_err(err)?
    .with_bounds(
        GpeBounds { m: m_bounds.0, n: n_bounds.0 },
        GpeBounds { m: m_bounds.1, n: n_bounds.1 },
    );
    let verdict = implementability::check_data(&bundle, tolerances(tol)).map_err(err)?;
    json_to_py(py, &verdict.to_json())
}

/// Model-based verdict; `reference` is a model whose variables are the `w` channels.
#[pyfunction]
#[pyo3(signature = (plant, reference, horizon, tol = DEFAULT_TOL))]
fn check_model(
    py: Python<'_>,
    plant: &StateSpaceModel,
    reference: &StateSpaceModel,
    horizon: usize,
    tol: f64,
) -> PyResult<PyObject> {
    let verdict =
        implementability::check_model(&plant.inner, &reference.inner.to_latent(), horizon, tolerances(tol)).map_err(err)?;
    json_to_py(py, &verdict.to_json())
}

/// Canonical controller basis (interleaved, `k*L` rows) plus the closed-loop report.
#[pyfunction]
#[pyo3(signature = (plant, reference, partition, horizon, tol = DEFAULT_TOL))]
fn synthesize<'py>(
    py: Python<'py>,
    plant: &Trajectory,
    reference: &Trajectory,
    partition: &Partition,
    horizon: usize,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let rank = RankTolerance::new(tol);
    let syn = synthesize_core(&plant.inner, &reference.inner, &partition.inner, horizon, rank).map_err(err)?;
    let report = verify_closed_loop(&syn.plant, &syn.controller, &syn.reference, &syn.plan, rank).map_err(err)?;
    let out = PyDict::new_bound(py);
    out.set_item("basis", to_rows(syn.controller.basis().matrix()))?;
    out.set_item("k", syn.controller.k())?;
    out.set_item("L", syn.controller.horizon())?;
    out.set_item("matches", report.matches)?;
    out.set_item("angles", report.angles)?;
    out.set_item("max_angle", report.max_angle)?;
    Ok(out)
}

/// Orthonormal basis of `span(a) ∩ span(b)` through the projector formula.
#[pyfunction]
#[pyo3(signature = (a, b, tol = DEFAULT_TOL))]
fn intersect(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, tol: f64) -> PyResult<Vec<Vec<f64>>> {
    let rank = RankTolerance::new(tol);
    let (a, b) = (to_matrix(&a)?, to_matrix(&b)?);
    let pa = projector_onto(&sub::orthonormal_basis(&a, rank));
    let pb = projector_onto(&sub::orthonormal_basis(&b, rank));
    let p = sub::intersect_with(&pa, &pb, rank).map_err(err)?;
    Ok(to_rows(p.image().matrix()))
}

/// Principal angles between `span(a)` and `span(b)`, largest first.
#[pyfunction]
#[pyo3(signature = (a, b, tol = DEFAULT_TOL))]
fn principal_angles(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, tol: f64) -> PyResult<Vec<f64>> {
    let rank = RankTolerance::new(tol);
    let a = sub::orthonormal_basis(&to_matrix(&a)?, rank);
    let b = sub::orthonormal_basis(&to_matrix(&b)?, rank);
    sub::principal_angles(&a, &b).map_err(err)
}

#[pymodule]
fn ddimpl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Trajectory>()?;
    m.add_class::<Partition>()?;
    m.add_class::<StateSpaceModel>()?;
    m.add_function(wrap_pyfunction!(check_data, m)?)?;
    m.add_function(wrap_pyfunction!(check_model, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(intersect, m)?)?;
    m.add_function(wrap_pyfunction!(principal_angles, m)?)?;
    Ok(())
}
