//! Python bindings for the broadcast Bell toolkit.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use broadcast_core::bowles;
use broadcast_core::cli::{self, Grid, Options, SourceSpec};
use broadcast_core::kit;
use broadcast_core::network;
use broadcast_core::selftest::{self, BranchDecomposition, FlagString};
use broadcast_core::tensor::{self, CMatrix, SubsystemMask, C64};
use broadcast_core::witness;
use broadcast_core::{Error, LabeledOperator};

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_flags(s: &str) -> PyResult<FlagString> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(PyValueError::new_err(format!(
                "flag string '{s}' must contain only 0 and 1"
            ))),
        })
        .collect::<PyResult<Vec<u8>>>()
        .map(FlagString)
}

/// Dense complex operator with subsystem dimensions.
#[pyclass(name = "Operator", module = "broadcast_bell", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyOperator {
    inner: LabeledOperator,
}

impl From<LabeledOperator> for PyOperator {
    fn from(inner: LabeledOperator) -> Self {
        Self { inner }
    }
}

#[pymethods]
impl PyOperator {
    /// Square operator from row-major complex entries.
    #[new]
    fn new(rows: Vec<Vec<C64>>, dims: Vec<usize>) -> PyResult<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(PyValueError::new_err("rows must form a square matrix"));
        }
        let data = CMatrix::from_fn(n, n, |i, j| rows[i][j]);
        LabeledOperator::square(data, dims)
            .map(Self::from)
            .map_err(py_err)
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.dims_out().to_vec()
    }

    /// Row-major nested list of complex entries.
    fn to_list(&self) -> Vec<Vec<C64>> {
        let d = &self.inner;
        (0..d.dim_out())
            .map(|i| (0..d.dim_in()).map(|j| d.get(i, j)).collect())
            .collect()
    }

    fn trace(&self) -> C64 {
        self.inner.trace()
    }

    fn adjoint(&self) -> Self {
        self.inner.adjoint().into()
    }

    fn transpose(&self) -> Self {
        self.inner.transpose().into()
    }

    fn partial_transpose(&self, mask: Vec<usize>) -> PyResult<Self> {
        tensor::partial_transpose(&self.inner, &SubsystemMask::new(mask))
            .map(Self::from)
            .map_err(py_err)
    }

    fn partial_trace(&self, discard: Vec<usize>) -> PyResult<Self> {
        tensor::partial_trace(&self.inner, &SubsystemMask::new(discard))
            .map(Self::from)
            .map_err(py_err)
    }

    /// Eigenvalues of a hermitian operator, descending.
    fn eigenvalues(&self) -> PyResult<Vec<f64>> {
        tensor::hermitian_eigs(&self.inner)
            .map(|s| s.values)
            .map_err(py_err)
    }

    fn expectation(&self, observable: &PyOperator) -> PyResult<C64> {
        self.inner.expectation(&observable.inner).map_err(py_err)
    }

    fn max_abs_diff(&self, other: &PyOperator) -> f64 {
        self.inner.max_abs_diff(&other.inner)
    }

    fn __repr__(&self) -> String {
        format!("Operator(dims={:?})", self.inner.dims_out())
    }
}

/// Outcome probabilities of a broadcast experiment.
#[pyclass(name = "Behavior", module = "broadcast_bell", frozen)]
pub struct PyBehavior {
    inner: network::Behavior,
}

#[pymethods]
impl PyBehavior {
    #[getter]
    fn device_count(&self) -> usize {
        self.inner.device_count()
    }

    fn prob(&self, settings: Vec<usize>, outcomes: Vec<usize>) -> PyResult<f64> {
        self.inner.prob(&settings, &outcomes).map_err(py_err)
    }

    fn normalization_error(&self) -> f64 {
        self.inner.normalization_error()
    }

    fn no_signaling_error(&self) -> f64 {
        self.inner.no_signaling_error()
    }

    fn max_abs_diff(&self, other: &PyBehavior) -> PyResult<f64> {
        self.inner.max_abs_diff(&other.inner).map_err(py_err)
    }

    /// Bowles score of each inner link.
    fn bowles_scores(&self) -> PyResult<Vec<f64>> {
        bowles::link_scores(&self.inner).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Source plus per-party broadcast devices.
#[pyclass(name = "BroadcastModel", module = "broadcast_bell", frozen)]
pub struct PyBroadcastModel {
    inner: network::BroadcastModel,
}

#[pymethods]
impl PyBroadcastModel {
    #[staticmethod]
    fn honest(source: &PyOperator, parties: usize) -> PyResult<Self> {
        network::BroadcastModel::honest(&source.inner, parties)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    /// Transposed devices on the flagged parties, fed the matching partial transpose.
    #[staticmethod]
    fn with_flags(source: &PyOperator, flags: Vec<bool>) -> PyResult<Self> {
        network::BroadcastModel::with_flags(&source.inner, &flags)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    fn transpose(&self) -> Self {
        Self {
            inner: self.inner.transpose(),
        }
    }

    #[getter]
    fn flags(&self) -> Vec<bool> {
        self.inner.flags()
    }

    #[getter]
    fn source(&self) -> PyOperator {
        self.inner.source().clone().into()
    }

    fn behavior(&self) -> PyResult<PyBehavior> {
        self.inner
            .behavior()
            .map(|inner| PyBehavior { inner })
            .map_err(py_err)
    }
}

/// Witness operator with its Pauli and lower-projector coefficients.
#[pyclass(name = "Witness", module = "broadcast_bell", frozen)]
pub struct PyWitness {
    inner: witness::WitnessExpansion,
}

#[pymethods]
impl PyWitness {
    #[new]
    fn new(operator: &PyOperator) -> PyResult<Self> {
        witness::pauli_expansion(&operator.inner)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    #[getter]
    fn operator(&self) -> PyOperator {
        self.inner.witness().clone().into()
    }

    /// `{"XY": c_XY, ...}`.
    fn pauli_coefficients(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for mu in kit::Pauli::ALL {
            for nu in kit::Pauli::ALL {
                out.insert(format!("{mu}{nu}"), self.inner.pauli_coefficient(mu, nu));
            }
        }
        out
    }

    /// `w_{a,b,x,y}` with settings 1..=3.
    fn projector_coefficient(&self, a: usize, b: usize, x: usize, y: usize) -> PyResult<f64> {
        if a > 1 || b > 1 || !(1..=3).contains(&x) || !(1..=3).contains(&y) {
            return Err(PyValueError::new_err(
                "outcomes must be 0 or 1 and settings 1..=3",
            ));
        }
        Ok(self.inner.projector_coefficient(a, b, x, y))
    }

    /// Broadcast functional on a bipartite behavior.
    #[pyo3(signature = (behavior, conditioning = witness::DEFAULT_CONDITIONING))]
    fn functional(&self, behavior: &PyBehavior, conditioning: (usize, usize)) -> PyResult<f64> {
        witness::broadcast_functional(&behavior.inner, &self.inner, conditioning).map_err(py_err)
    }
}

#[pyfunction]
fn source(spec: &str) -> PyResult<PyOperator> {
    spec.parse::<SourceSpec>()
        .and_then(|s| s.load())
        .map(PyOperator::from)
        .map_err(py_err)
}

#[pyfunction]
fn werner_state(visibility: f64) -> PyResult<PyOperator> {
    kit::werner_state(visibility)
        .map(PyOperator::from)
        .map_err(py_err)
}

#[pyfunction]
fn random_density(dims: Vec<usize>, rank: usize, seed: u64) -> PyResult<PyOperator> {
    kit::random_density(&dims, rank, seed)
        .map(PyOperator::from)
        .map_err(py_err)
}

#[pyfunction]
fn random_pure(dims: Vec<usize>, seed: u64) -> PyResult<PyOperator> {
    kit::random_pure(&dims, seed)
        .and_then(|k| k.projector())
        .map(PyOperator::from)
        .map_err(py_err)
}

#[pyfunction]
fn npt_witness(rho: &PyOperator) -> PyResult<PyWitness> {
    witness::npt_witness(&rho.inner)
        .map(|inner| PyWitness { inner })
        .map_err(py_err)
}

/// `{"functional", "trace", "quarter_trace", "predicted"}` for the honest model.
#[pyfunction]
fn honest_witness_value(rho: &PyOperator, witness: &PyWitness) -> PyResult<BTreeMap<String, f64>> {
    let v = witness::honest_witness_value(&rho.inner, &witness.inner).map_err(py_err)?;
    Ok(BTreeMap::from([
        ("functional".to_string(), v.functional),
        ("trace".to_string(), v.trace),
        ("quarter_trace".to_string(), v.quarter_trace()),
        ("predicted".to_string(), v.predicted()),
    ]))
}

#[pyfunction]
fn classical_bound() -> f64 {
    bowles::classical_bound_bruteforce().value
}

/// Branch states keyed by flag string for a mixture of `(weight, flags)` models.
#[pyfunction]
fn extract_branches(
    rho: &PyOperator,
    mix: Vec<(f64, Vec<bool>)>,
) -> PyResult<BTreeMap<String, PyOperator>> {
    let d = selftest::extract_branches(&rho.inner, &mix).map_err(py_err)?;
    Ok(d.branches()
        .iter()
        .map(|(k, b)| (k.to_string(), b.clone().into()))
        .collect())
}

/// `sum_k (rho^(k))^{T_k}`.
#[pyfunction]
fn reconstruct(branches: BTreeMap<String, PyOperator>) -> PyResult<PyOperator> {
    let parties = branches.keys().next().map_or(0, String::len);
    let map = branches
        .into_iter()
        .map(|(k, b)| parse_flags(&k).map(|f| (f, b.inner)))
        .collect::<PyResult<BTreeMap<_, _>>>()?;
    let d = BranchDecomposition::new(parties, map).map_err(py_err)?;
    selftest::reconstruct(&d)
        .map(PyOperator::from)
        .map_err(py_err)
}

/// Extreme eigenvalues of the partial transpose and the top-vector Schmidt test.
#[pyfunction]
fn pt_spectrum(rho: &PyOperator, mask: Vec<usize>) -> PyResult<BTreeMap<String, Option<f64>>> {
    let r = selftest::pt_spectrum_report(&rho.inner, &SubsystemMask::new(mask)).map_err(py_err)?;
    Ok(BTreeMap::from([
        ("min".to_string(), Some(r.min)),
        ("max".to_string(), Some(r.max)),
        ("top_schmidt_second".to_string(), r.top_schmidt_second),
    ]))
}

fn options(seed: u64, tol: Option<f64>) -> Options {
    Options { seed, tol }
}

fn parse_source(spec: &str) -> PyResult<SourceSpec> {
    spec.parse().map_err(py_err)
}

fn json(report: broadcast_core::Result<cli::Report>) -> PyResult<String> {
    report.and_then(|r| r.to_json()).map_err(py_err)
}

/// JSON report of the `bowles` command.
#[pyfunction]
#[pyo3(signature = (source = "singlet", transposed = false, seed = 0, tol = None))]
fn report_bowles(source: &str, transposed: bool, seed: u64, tol: Option<f64>) -> PyResult<String> {
    json(cli::cmd_bowles(
        &options(seed, tol),
        &parse_source(source)?,
        transposed,
    ))
}

/// JSON report of the `witness` command.
#[pyfunction]
#[pyo3(signature = (source = "singlet", seed = 0, tol = None))]
fn report_witness(source: &str, seed: u64, tol: Option<f64>) -> PyResult<String> {
    json(cli::cmd_witness(
        &options(seed, tol),
        &parse_source(source)?,
    ))
}

/// JSON report of the `werner-sweep` command.
#[pyfunction]
#[pyo3(signature = (grid = "0:1:0.01", seed = 0, tol = None))]
fn report_werner_sweep(grid: &str, seed: u64, tol: Option<f64>) -> PyResult<String> {
    let grid: Grid = grid.parse().map_err(py_err)?;
    json(cli::cmd_werner_sweep(&options(seed, tol), &grid))
}

/// JSON report of the `selftest` command.
#[pyfunction]
#[pyo3(signature = (source = "ghz:3", parties = None, mix = 1.0, seed = 0, tol = None))]
fn report_selftest(
    source: &str,
    parties: Option<usize>,
    mix: f64,
    seed: u64,
    tol: Option<f64>,
) -> PyResult<String> {
    json(cli::cmd_selftest(
        &options(seed, tol),
        &parse_source(source)?,
        parties,
        mix,
    ))
}

/// JSON report of the `pt-spectrum` command.
#[pyfunction]
#[pyo3(signature = (source = "phi+", mask = vec![1], batch = 0, seed = 0, tol = None))]
fn report_pt_spectrum(
    source: &str,
    mask: Vec<usize>,
    batch: usize,
    seed: u64,
    tol: Option<f64>,
) -> PyResult<String> {
    json(cli::cmd_pt_spectrum(
        &options(seed, tol),
        &parse_source(source)?,
        &mask,
        batch,
    ))
}

#[pymodule]
fn broadcast_bell(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyOperator>()?;
    m.add_class::<PyBehavior>()?;
    m.add_class::<PyBroadcastModel>()?;
    m.add_class::<PyWitness>()?;
    m.add_function(wrap_pyfunction!(source, m)?)?;
    m.add_function(wrap_pyfunction!(werner_state, m)?)?;
    m.add_function(wrap_pyfunction!(random_density, m)?)?;
    m.add_function(wrap_pyfunction!(random_pure, m)?)?;
    m.add_function(wrap_pyfunction!(npt_witness, m)?)?;
    m.add_function(wrap_pyfunction!(honest_witness_value, m)?)?;
    m.add_function(wrap_pyfunction!(classical_bound, m)?)?;
    m.add_function(wrap_pyfunction!(extract_branches, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(pt_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(report_bowles, m)?)?;
    m.add_function(wrap_pyfunction!(report_witness, m)?)?;
    m.add_function(wrap_pyfunction!(report_werner_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(report_selftest, m)?)?;
    m.add_function(wrap_pyfunction!(report_pt_spectrum, m)?)?;
    m.add("QUANTUM_MAXIMUM", bowles::QUANTUM_MAXIMUM)?;
    m.add("LOCAL_BOUND", bowles::LOCAL_BOUND)?;
    Ok(())
}
