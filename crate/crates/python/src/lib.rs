//! Python bindings: states, row pairs, the post-selected reduction, the
//! Horodecki bound, the optimizer and the verification suites.
//!
//! Matrices cross the boundary as nested lists (complex entries for density
//! matrices, floats for correlation matrices). Long computations release the
//! GIL.

use collective_chsh as core;
use collective_chsh::oracle::run_invariance_suite;
use collective_chsh::protocol::werner_pairs;
use collective_chsh::{Error, SingletFraction};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::SingletFractionDomain(_)
        | Error::InvalidDensity(_)
        | Error::InvalidRows(_)
        | Error::Dimension(_)
        | Error::PairCount { .. }
        | Error::PairIndex { .. }
        | Error::NonUnitDirection(_)
        | Error::Precondition(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn fraction(x: f64) -> PyResult<SingletFraction> {
    SingletFraction::new(x).map_err(to_py_err)
}

/// A validated two-qubit density matrix (Alice's qubit is the high bit).
#[pyclass(
    name = "TwoQubitState",
    module = "collective_chsh_py",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
pub struct PyState {
    inner: core::TwoQubitDensity,
}

#[pymethods]
impl PyState {
    /// Builds a state from a 4x4 nested list of complex numbers.
    #[new]
    fn new(matrix: Vec<Vec<Complex64>>) -> PyResult<Self> {
        if matrix.len() != 4 || matrix.iter().any(|r| r.len() != 4) {
            return Err(PyValueError::new_err("expected a 4x4 matrix"));
        }
        let entries: [[Complex64; 4]; 4] =
            std::array::from_fn(|i| std::array::from_fn(|j| matrix[i][j]));
        core::TwoQubitDensity::new(entries)
            .map(|inner| PyState { inner })
            .map_err(to_py_err)
    }

    #[staticmethod]
    fn werner(x: f64) -> PyResult<Self> {
        Ok(PyState {
            inner: core::make_werner(fraction(x)?),
        })
    }

    #[staticmethod]
    fn singlet() -> Self {
        PyState {
            inner: core::make_singlet(),
        }
    }

    fn matrix(&self) -> Vec<Vec<Complex64>> {
        self.inner.entries().iter().map(|r| r.to_vec()).collect()
    }

    fn trace(&self) -> f64 {
        self.inner.trace().re
    }

    fn purity(&self) -> f64 {
        self.inner.purity()
    }

    /// `T[p][q] = Tr[(σp ⊗ σq) ρ]`.
    fn correlation_matrix(&self) -> PyResult<Vec<Vec<f64>>> {
        let t = core::correlation_matrix(&self.inner).map_err(to_py_err)?;
        Ok(t.t().iter().map(|r| r.to_vec()).collect())
    }

    /// Maximal CHSH value `2√M` of this state.
    fn bell_bound(&self) -> PyResult<f64> {
        Ok(bound_of(&self.inner)?.bound)
    }

    /// `M`, the sum of the two largest eigenvalues of `TᵀT`.
    fn m_value(&self) -> PyResult<f64> {
        Ok(bound_of(&self.inner)?.m_value)
    }

    fn __repr__(&self) -> String {
        format!(
            "TwoQubitState(trace={:.6}, purity={:.6})",
            self.inner.trace().re,
            self.inner.purity()
        )
    }
}

fn bound_of(rho: &core::TwoQubitDensity) -> PyResult<core::BellBound> {
    let t = core::correlation_matrix(rho).map_err(to_py_err)?;
    Ok(core::horodecki_bound(&t))
}

/// The two retained rows of one party's local transformation.
#[pyclass(
    name = "RowPair",
    module = "collective_chsh_py",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
pub struct PyRowPair {
    inner: core::RowPair,
}

#[pymethods]
impl PyRowPair {
    /// Real orthonormal rows of length `2**n`.
    #[new]
    fn new(u0: Vec<f64>, u1: Vec<f64>) -> PyResult<Self> {
        core::RowPair::new(u0, u1)
            .map(|inner| PyRowPair { inner })
            .map_err(to_py_err)
    }

    /// Rows of the XOR transformation on `n` pairs.
    #[staticmethod]
    fn xor(n: usize) -> PyResult<Self> {
        core::xor_rows(n)
            .map(|inner| PyRowPair { inner })
            .map_err(to_py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn u0(&self) -> Vec<f64> {
        self.inner.u0().to_vec()
    }

    #[getter]
    fn u1(&self) -> Vec<f64> {
        self.inner.u1().to_vec()
    }

    /// Bob's rows tied to these: `V[ν][b] = (−1)^(ν + popcount(b)) U[ν][b]`.
    fn partner(&self) -> Self {
        PyRowPair {
            inner: core::tie_partner_rows(&self.inner),
        }
    }

    /// Rotates the two rows into each other by `alpha`.
    fn gauge_rotate(&self, alpha: f64) -> Self {
        PyRowPair {
            inner: core::gauge_rotate(&self.inner, alpha),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "RowPair(n={}, u0={:?}, u1={:?})",
            self.inner.n(),
            self.inner.u0(),
            self.inner.u1()
        )
    }
}

/// Post-selected state of the first pair and the success probability.
#[pyfunction]
fn reduce(
    pairs: Vec<PyRef<'_, PyState>>,
    alice: PyRef<'_, PyRowPair>,
    bob: PyRef<'_, PyRowPair>,
) -> PyResult<(PyState, f64)> {
    let densities: Vec<core::TwoQubitDensity> = pairs.iter().map(|p| p.inner.clone()).collect();
    let r = core::reduce_pairs(&densities, &alice.inner, &bob.inner).map_err(to_py_err)?;
    Ok((PyState { inner: r.rho_new }, r.success_probability))
}

/// Bound reached by the XOR rows on `n` Werner pairs of singlet fraction `x`.
#[pyfunction]
fn xor_bound(n: usize, x: f64) -> PyResult<f64> {
    core::xor_bound_closed_form(n, fraction(x)?).map_err(to_py_err)
}

/// Bound, `M` and success probability of the XOR rows through the reduction.
#[pyfunction]
fn xor_pipeline(n: usize, x: f64) -> PyResult<(f64, f64, f64)> {
    let u = core::xor_rows(n).map_err(to_py_err)?;
    let r = core::reduce_pairs(
        &werner_pairs(n, fraction(x)?),
        &u,
        &core::tie_partner_rows(&u),
    )
    .map_err(to_py_err)?;
    let b = bound_of(&r.rho_new)?;
    Ok((b.bound, b.m_value, r.success_probability))
}

#[pyclass(
    name = "OptimizationResult",
    module = "collective_chsh_py",
    frozen,
    get_all
)]
pub struct PyOptimizationResult {
    n: usize,
    x: f64,
    bound: f64,
    m_value: f64,
    success_probability: f64,
    strategy_label: String,
    xor_bound: f64,
    restart_values: Vec<f64>,
    best_restart: usize,
    best_rows: PyRowPair,
    best_partner: PyRowPair,
    evaluations: usize,
    unconverged_restarts: usize,
}

#[pymethods]
impl PyOptimizationResult {
    fn __repr__(&self) -> String {
        format!(
            "OptimizationResult(n={}, x={}, bound={:.9}, strategy_label='{}')",
            self.n, self.x, self.bound, self.strategy_label
        )
    }
}

fn config(restarts: usize, seed: u64, tie_bob: bool) -> core::OptimizationConfig {
    core::OptimizationConfig {
        restarts,
        seed,
        tie_bob,
        ..core::OptimizationConfig::default()
    }
}

/// Maximizes the bound over real row pairs with Powell multistart.
#[pyfunction]
#[pyo3(signature = (n, x, restarts = 64, seed = 0, tie_bob = true))]
fn maximize_bound(
    py: Python<'_>,
    n: usize,
    x: f64,
    restarts: usize,
    seed: u64,
    tie_bob: bool,
) -> PyResult<PyOptimizationResult> {
    let x = fraction(x)?;
    let cfg = config(restarts, seed, tie_bob);
    let r = py
        .detach(|| core::maximize_bound(n, x, &cfg))
        .map_err(to_py_err)?;
    Ok(PyOptimizationResult {
        n: r.n,
        x: r.x,
        bound: r.bell.bound,
        m_value: r.bell.m_value,
        success_probability: r.success_probability,
        strategy_label: r.strategy_label.as_str().to_string(),
        xor_bound: r.xor_bound,
        restart_values: r.restart_values,
        best_restart: r.best_restart,
        best_rows: PyRowPair { inner: r.best_rows },
        best_partner: PyRowPair {
            inner: r.best_partner,
        },
        evaluations: r.evaluations,
        unconverged_restarts: r.unconverged_restarts,
    })
}

/// One dict per `(n, x)` with keys `n, x, strategy, bound,
/// success_prob, violation`; failed cells have `bound = None`.
#[pyfunction]
#[pyo3(signature = (ns, xs, strategy = "xor", restarts = 64, seed = 0))]
fn sweep<'py>(
    py: Python<'py>,
    ns: Vec<usize>,
    xs: Vec<f64>,
    strategy: &str,
    restarts: usize,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let strategy = match strategy {
        "xor" => core::SweepStrategy::Xor,
        "optimize" => core::SweepStrategy::Optimize,
        other => return Err(PyValueError::new_err(format!("unknown strategy '{other}'"))),
    };
    let cfg = config(restarts, seed, true);
    let rows = py
        .detach(|| core::sweep(&ns, &xs, &cfg, strategy))
        .map_err(to_py_err)?;
    rows.into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("n", r.n)?;
            d.set_item("x", r.x)?;
            let (label, bound, prob) = match r.optimized {
                None => ("xor", Some(r.xor_bound), Some(r.xor_success_probability)),
                Some(Ok(p)) => (
                    p.strategy_label.as_str(),
                    Some(p.bound),
                    Some(p.success_probability),
                ),
                Some(Err(_)) => ("optimize", None, None),
            };
            d.set_item("strategy", label)?;
            d.set_item("bound", bound)?;
            d.set_item("success_prob", prob)?;
            d.set_item("violation", bound.map(|b| b > 2.0))?;
            Ok(d)
        })
        .collect()
}

/// Smallest `x` where optimized rows beat XOR; `x_star` is `None` when
/// no probe did.
#[pyfunction]
#[pyo3(signature = (n, tol = 1e-4, restarts = 128, seed = 0))]
fn crossover<'py>(
    py: Python<'py>,
    n: usize,
    tol: f64,
    restarts: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config(restarts, seed, true);
    let c = py
        .detach(|| core::crossover(n, &cfg, tol))
        .map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("n", c.n)?;
    d.set_item("x_star", c.x_star)?;
    d.set_item("lower", c.lower)?;
    d.set_item("resolution", c.resolution)?;
    d.set_item("probes", c.probes)?;
    Ok(d)
}

/// Runs the equivalence and invariance suites; returns `passed` and the
/// worst deviation per category.
#[pyfunction]
#[pyo3(signature = (seed = 0, cases = 50))]
fn verify<'py>(py: Python<'py>, seed: u64, cases: usize) -> PyResult<Bound<'py, PyDict>> {
    let (eq, inv) = py
        .detach(|| -> core::Result<_> {
            Ok((
                core::run_equivalence_suite(seed, cases)?,
                run_invariance_suite(seed, cases)?,
            ))
        })
        .map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("passed", eq.passed() && inv.passed())?;
    for (name, report) in [
        ("reduction", &eq.reduction),
        ("symmetric_path", &eq.symmetric_path),
        ("direct_settings", &eq.direct_settings),
        ("closed_forms", &eq.closed_forms),
        ("row_gauge", &inv.row_gauge),
        ("pair_gauge", &inv.pair_gauge),
        ("validity", &inv.validity),
        ("ceiling", &inv.ceiling),
    ] {
        d.set_item(name, report.max_abs_deviation)?;
    }
    Ok(d)
}

#[pymodule]
pub fn collective_chsh_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("TSIRELSON", core::chsh::TSIRELSON)?;
    m.add_class::<PyState>()?;
    m.add_class::<PyRowPair>()?;
    m.add_class::<PyOptimizationResult>()?;
    m.add_function(wrap_pyfunction!(reduce, m)?)?;
    m.add_function(wrap_pyfunction!(xor_bound, m)?)?;
    m.add_function(wrap_pyfunction!(xor_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(maximize_bound, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(crossover, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
