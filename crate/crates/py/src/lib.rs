//! Python bindings: tables and bundles, LHV and quantum generators,
//! behaviors with feasibility checks, violation studies and pointer B-values.

use bellcontext_core::cbd::{self, Behavior};
use bellcontext_core::feasibility::{self, ReshuffleProblem};
use bellcontext_core::lhv::{self, BuiltinModelSpec, LhvModel};
use bellcontext_core::linalg::{Mat4, C64, ZERO4};
use bellcontext_core::model::{self, Context, CounterfactualRow, CounterfactualTable, ExperimentBundle};
use bellcontext_core::quantum::{self, AngleQuadruple, DensityMatrix};
use bellcontext_core::stats::{self, Generator, Orientation, StudySpec};
use bellcontext_core::weak::{self, PerPairRecord, PointerConfig};
use bellcontext_core::Error;
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Numeric(_) | Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Serializes through JSON into plain Python dicts and lists.
fn to_object<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn angles(a: [f64; 4]) -> PyResult<AngleQuadruple> {
    AngleQuadruple::new(a[0], a[1], a[2], a[3]).map_err(to_py)
}

fn orientation(name: &str) -> PyResult<Orientation> {
    match name {
        "auto" => Ok(Orientation::Auto),
        "signed" => Ok(Orientation::Signed),
        "absolute" => Ok(Orientation::Absolute),
        _ => Err(PyValueError::new_err(format!("unknown orientation `{name}`"))),
    }
}

/// N rows of four coexisting ±1 outcomes `(a1, a2, b1, b2)`.
#[pyclass(name = "CounterfactualTable", module = "bellcontext", skip_from_py_object)]
#[derive(Clone)]
struct PyTable {
    inner: CounterfactualTable,
}

#[pymethods]
impl PyTable {
    #[new]
    fn new(rows: Vec<[i64; 4]>) -> PyResult<Self> {
        let rows = rows.into_iter().map(CounterfactualRow::from_values).collect::<Result<_, _>>().map_err(to_py)?;
        Ok(PyTable { inner: CounterfactualTable::new(rows) })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn rows(&self) -> Vec<[i8; 4]> {
        self.inner.rows.iter().map(|r| r.values()).collect()
    }

    /// Per-row `a1·b1 + a1·b2 + a2·b1 − a2·b2`.
    fn c_values(&self) -> Vec<i32> {
        self.inner.rows.iter().map(|r| r.c_value()).collect()
    }

    fn b_statistic(&self) -> PyResult<f64> {
        model::b_statistic(&self.inner).map_err(to_py)
    }

    /// Splits the table into four context datasets sharing its rows.
    fn project(&self) -> PyBundle {
        PyBundle { inner: ExperimentBundle::from_table(&self.inner) }
    }

    fn __repr__(&self) -> String {
        format!("CounterfactualTable(rows={})", self.inner.len())
    }
}

/// Four independent `(a, b)` datasets in canonical context order (1,1), (1,2), (2,1), (2,2).
#[pyclass(name = "ExperimentBundle", module = "bellcontext", skip_from_py_object)]
#[derive(Clone)]
struct PyBundle {
    inner: ExperimentBundle,
}

#[pymethods]
impl PyBundle {
    /// `pairs[k]` holds the `(a, b)` outcomes of the k-th canonical context.
    #[new]
    fn new(pairs: [Vec<(i64, i64)>; 4]) -> PyResult<Self> {
        let mut datasets = Vec::with_capacity(4);
        for (ctx, ps) in Context::ALL.iter().zip(pairs) {
            let ps = ps
                .into_iter()
                .map(|(a, b)| Ok((model::Outcome::new(a)?, model::Outcome::new(b)?)))
                .collect::<Result<_, Error>>()
                .map_err(to_py)?;
            datasets.push(model::ContextDataset::new(*ctx, ps));
        }
        Ok(PyBundle { inner: ExperimentBundle::new(datasets).map_err(to_py)? })
    }

    fn s_statistic(&self) -> PyResult<f64> {
        model::s_statistic(&self.inner).map_err(to_py)
    }

    fn correlations(&self) -> PyResult<Vec<f64>> {
        self.inner.datasets().iter().map(|d| model::correlation(d).map_err(to_py)).collect()
    }

    fn standard_error(&self) -> PyResult<f64> {
        stats::standard_error_s(&self.inner).map_err(to_py)
    }

    /// Outcome counts `(+,+), (+,−), (−,+), (−,−)` per context.
    fn counts(&self) -> Vec<[u64; 4]> {
        self.inner.datasets().iter().map(|d| d.outcome_counts()).collect()
    }

    fn behavior(&self) -> PyResult<PyBehavior> {
        Ok(PyBehavior { inner: Behavior::from_bundle(&self.inner).map_err(to_py)? })
    }

    fn __repr__(&self) -> String {
        let n: Vec<usize> = self.inner.datasets().iter().map(|d| d.len()).collect();
        format!("ExperimentBundle(sizes={n:?})")
    }
}

/// Hidden-variable model built from a TOML description or a preset.
#[pyclass(name = "LhvModel", module = "bellcontext", skip_from_py_object)]
#[derive(Clone)]
struct PyLhvModel {
    inner: LhvModel,
    spec: BuiltinModelSpec,
}

impl PyLhvModel {
    fn from_spec(spec: BuiltinModelSpec) -> PyResult<Self> {
        Ok(PyLhvModel { inner: spec.build().map_err(to_py)?, spec })
    }
}

#[pymethods]
impl PyLhvModel {
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Self::from_spec(BuiltinModelSpec::from_toml(text).map_err(to_py)?)
    }

    /// Mixture with exact `S = 2`.
    #[staticmethod]
    fn boundary() -> PyResult<Self> {
        Self::from_spec(BuiltinModelSpec::boundary())
    }

    /// Sign-cosine model with exact `S = target_s`, `|target_s| ≤ 2`.
    #[staticmethod]
    fn sign_cosine_with_s(target_s: f64) -> PyResult<Self> {
        Self::from_spec(BuiltinModelSpec::sign_cosine_with_s(target_s).map_err(to_py)?)
    }

    fn to_toml(&self) -> String {
        self.spec.to_toml()
    }

    fn exact_s(&self) -> PyResult<f64> {
        lhv::exact_lhv_s(&self.inner).map_err(to_py)
    }

    fn exact_correlations(&self) -> PyResult<Vec<f64>> {
        Context::ALL.iter().map(|&c| lhv::exact_lhv_correlation(&self.inner, c).map_err(to_py)).collect()
    }

    fn sample_table(&self, n: usize, seed: u64) -> PyResult<PyTable> {
        Ok(PyTable { inner: lhv::sample_counterfactual_table(&self.inner, n, seed).map_err(to_py)? })
    }

    fn sample_bundle(&self, n: usize, seed: u64) -> PyResult<PyBundle> {
        Ok(PyBundle { inner: lhv::sample_bundle(&self.inner, n, seed).map_err(to_py)? })
    }

    fn __repr__(&self) -> String {
        format!("LhvModel({})", self.inner.name())
    }
}

/// Two-qubit density matrix.
#[pyclass(name = "DensityMatrix", module = "bellcontext", skip_from_py_object)]
#[derive(Clone)]
struct PyDensityMatrix {
    inner: DensityMatrix,
}

#[pymethods]
impl PyDensityMatrix {
    /// 4×4 nested list of complex numbers, basis `|00⟩, |01⟩, |10⟩, |11⟩`.
    #[new]
    fn new(entries: Vec<Vec<Complex64>>) -> PyResult<Self> {
        if entries.len() != 4 || entries.iter().any(|r| r.len() != 4) {
            return Err(PyValueError::new_err("density matrix must be 4×4"));
        }
        let mut m: Mat4 = ZERO4;
        for (i, row) in entries.iter().enumerate() {
            for (j, z) in row.iter().enumerate() {
                m[i][j] = C64::new(z.re, z.im);
            }
        }
        Ok(PyDensityMatrix { inner: DensityMatrix::new(m).map_err(to_py)? })
    }

    #[staticmethod]
    fn singlet() -> Self {
        PyDensityMatrix { inner: DensityMatrix::singlet() }
    }

    #[staticmethod]
    fn maximally_mixed() -> Self {
        PyDensityMatrix { inner: DensityMatrix::maximally_mixed() }
    }

    fn entries(&self) -> Vec<Vec<Complex64>> {
        self.inner.entries().iter().map(|r| r.to_vec()).collect()
    }

    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues().to_vec()
    }

    fn purity(&self) -> f64 {
        self.inner.purity()
    }

    fn expectation(&self, alice_angle: f64, bob_angle: f64) -> PyResult<f64> {
        quantum::expectation(&self.inner, alice_angle, bob_angle).map_err(to_py)
    }

    fn born_probabilities(&self, alice_angle: f64, bob_angle: f64) -> PyResult<Vec<f64>> {
        Ok(quantum::born_probabilities(&self.inner, alice_angle, bob_angle).map_err(to_py)?.to_vec())
    }

    /// Exact `S` at angles `[a1, a2, b1, b2]`.
    fn s_value(&self, angles_: [f64; 4]) -> PyResult<f64> {
        quantum::s_quantum(&self.inner, &angles(angles_)?).map_err(to_py)
    }

    /// `(angles, |S|)` maximizing `|S|`.
    #[pyo3(signature = (grid_points = 24, refine_iters = 200))]
    fn optimize_angles(&self, grid_points: usize, refine_iters: usize) -> PyResult<([f64; 4], f64)> {
        let (a, s) = quantum::optimize_angles(&self.inner, grid_points, refine_iters).map_err(to_py)?;
        Ok(([a.a1, a.a2, a.b1, a.b2], s))
    }

    fn sample_bundle(&self, angles_: [f64; 4], n: usize, seed: u64) -> PyResult<PyBundle> {
        let bundle = quantum::sample_bundle_quantum(&self.inner, &angles(angles_)?, n, seed).map_err(to_py)?;
        Ok(PyBundle { inner: bundle })
    }

    fn behavior(&self, angles_: [f64; 4]) -> PyResult<PyBehavior> {
        Ok(PyBehavior { inner: Behavior::from_quantum(&self.inner, &angles(angles_)?).map_err(to_py)? })
    }
}

/// Per-context outcome distributions, optionally with integer counts.
#[pyclass(name = "Behavior", module = "bellcontext", skip_from_py_object)]
#[derive(Clone)]
struct PyBehavior {
    inner: Behavior,
}

#[pymethods]
impl PyBehavior {
    #[new]
    fn new(probabilities: [[f64; 4]; 4]) -> PyResult<Self> {
        Ok(PyBehavior { inner: Behavior::new(probabilities).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_counts(counts: [[u64; 4]; 4]) -> PyResult<Self> {
        Ok(PyBehavior { inner: Behavior::from_counts(counts).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PyBehavior { inner: Behavior::from_toml(text).map_err(to_py)? })
    }

    #[staticmethod]
    fn pr_box() -> Self {
        PyBehavior { inner: cbd::pr_box() }
    }

    fn probabilities(&self) -> [[f64; 4]; 4] {
        *self.inner.probabilities()
    }

    fn s_value(&self) -> f64 {
        cbd::behavior_s(&self.inner)
    }

    fn correlations(&self) -> Vec<f64> {
        Context::ALL.iter().map(|&c| cbd::behavior_correlation(&self.inner, c)).collect()
    }

    fn no_signaling<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_object(py, &cbd::no_signaling(&self.inner))
    }

    /// Largest of the eight CHSH forms.
    fn chsh_max(&self) -> f64 {
        feasibility::chsh_certificate(&self.inner)
    }

    /// Joint-distribution test; returns the result record as a dict.
    fn fine_feasible<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_object(py, &feasibility::fine_feasible_lp(&self.inner).map_err(to_py)?)
    }

    /// Reshuffling test on the behavior's counts with per-context L1 slack.
    #[pyo3(signature = (slack = 0.0))]
    fn reshuffle_feasible<'py>(&self, py: Python<'py>, slack: f64) -> PyResult<Bound<'py, PyAny>> {
        let problem = ReshuffleProblem::from_behavior(&self.inner, slack).map_err(to_py)?;
        to_object(py, &feasibility::reshuffle_feasible(&problem).map_err(to_py)?)
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }
}

fn generator_of(source: &Bound<'_, PyAny>, angles_: Option<[f64; 4]>) -> PyResult<Generator> {
    if let Ok(m) = source.extract::<PyRef<PyLhvModel>>() {
        return Ok(Generator::Lhv(m.inner.clone()));
    }
    if let Ok(rho) = source.extract::<PyRef<PyDensityMatrix>>() {
        let a = angles_.map(angles).transpose()?.unwrap_or_else(AngleQuadruple::tsirelson);
        return Generator::quantum(rho.inner.clone(), a).map_err(to_py);
    }
    if let Ok(b) = source.extract::<PyRef<PyBehavior>>() {
        return Ok(Generator::Behavior(b.inner.clone()));
    }
    Err(PyValueError::new_err("generator must be an LhvModel, DensityMatrix or Behavior"))
}

/// Frequency of oriented `Ŝ > threshold` per sample size; returns the study record as a dict.
#[pyfunction]
#[pyo3(signature = (generator, n_values, trials, seed, threshold = 2.0, orientation = "auto", angles = None))]
fn significance_curve<'py>(
    py: Python<'py>,
    generator: &Bound<'py, PyAny>,
    n_values: Vec<usize>,
    trials: usize,
    seed: u64,
    threshold: f64,
    orientation: &str,
    angles: Option<[f64; 4]>,
) -> PyResult<Bound<'py, PyAny>> {
    let g = generator_of(generator, angles)?;
    let o = self::orientation(orientation)?;
    let result = py
        .detach(|| stats::significance_curve(&g, &n_values, trials, threshold, o, seed))
        .map_err(to_py)?;
    to_object(py, &result)
}

/// Runs a TOML study file's contents with the given seed.
#[pyfunction]
fn run_study<'py>(py: Python<'py>, text: &str, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let spec = StudySpec::from_toml(text).map_err(to_py)?;
    let result = py.detach(|| stats::run_study(&spec, seed)).map_err(to_py)?;
    to_object(py, &result)
}

#[pyfunction]
#[pyo3(signature = (successes, trials, z = stats::Z95))]
fn wilson_interval(successes: usize, trials: usize, z: f64) -> PyResult<(f64, f64)> {
    stats::wilson_interval(successes, trials, z).map_err(to_py)
}

fn records_out(records: Vec<PerPairRecord>) -> Vec<([f64; 4], f64)> {
    records.into_iter().map(|r| (r.readings, r.b_value)).collect()
}

/// `[(readings, b_value)]` from noisy readouts of each table row.
#[pyfunction]
fn lhv_b_values(table: &PyTable, coupling: f64, noise_sd: f64, seed: u64) -> PyResult<Vec<([f64; 4], f64)>> {
    let cfg = PointerConfig::new(coupling, noise_sd).map_err(to_py)?;
    Ok(records_out(weak::per_pair_b_values_lhv(&table.inner, &cfg, seed).map_err(to_py)?))
}

/// `[(readings, b_value)]` with B-values symmetric about `target`.
#[pyfunction]
fn calibrated_b_values(target: f64, coupling: f64, noise_sd: f64, n: usize, seed: u64) -> PyResult<Vec<([f64; 4], f64)>> {
    let cfg = PointerConfig::new(coupling, noise_sd).map_err(to_py)?;
    Ok(records_out(weak::per_pair_b_values_calibrated(target, &cfg, n, seed).map_err(to_py)?))
}

#[pyfunction]
fn exceedance_fraction(values: Vec<f64>, threshold: f64) -> PyResult<f64> {
    weak::exceedance_fraction(&values, threshold).map_err(to_py)
}

#[pymodule]
fn bellcontext(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTable>()?;
    m.add_class::<PyBundle>()?;
    m.add_class::<PyLhvModel>()?;
    m.add_class::<PyDensityMatrix>()?;
    m.add_class::<PyBehavior>()?;
    m.add_function(wrap_pyfunction!(significance_curve, m)?)?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    m.add_function(wrap_pyfunction!(wilson_interval, m)?)?;
    m.add_function(wrap_pyfunction!(lhv_b_values, m)?)?;
    m.add_function(wrap_pyfunction!(calibrated_b_values, m)?)?;
    m.add_function(wrap_pyfunction!(exceedance_fraction, m)?)?;
    m.add("TSIRELSON_BOUND", quantum::TSIRELSON_BOUND)?;
    Ok(())
}
