//! Python bindings for the `apbf` crate.
//!
//! Exposes the two filter types as classes and the analysis layer as plain
//! functions. Build with `cargo build --release -p apbf-python` and rename
//! `libapbf_py.so` to `apbf_py.so` somewhere on `sys.path`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use apbf::analysis::{self, AccessScenario};
use apbf::blocked::ApbbfFilter;
use apbf::bloom;
use apbf::filter::ApbfFilter;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn scenario_from_str(name: &str) -> PyResult<AccessScenario> {
    match name {
        "negative" => Ok(AccessScenario::Negative),
        "false_positive" => Ok(AccessScenario::FalsePositive),
        "window_member" => Ok(AccessScenario::WindowMember),
        other => Err(PyValueError::new_err(format!(
            "unknown scenario {other:?}; use \"negative\", \"false_positive\", \
             or \"window_member\""
        ))),
    }
}

/// Age-partitioned Bloom filter over a sliding window of a stream.
#[pyclass(name = "Apbf")]
struct PyApbf {
    inner: ApbfFilter,
}

#[pymethods]
impl PyApbf {
    /// Builds a filter from `k` (consecutive slices a query must match) and
    /// `l` (extra aged slices), sized either directly by `bits` per slice or
    /// for a guaranteed `window` of elements.
    #[new]
    #[pyo3(signature = (k, l, *, bits=None, window=None, seed=0))]
    fn new(k: u32, l: u32, bits: Option<u64>, window: Option<u64>, seed: u64) -> PyResult<Self> {
        let inner = match (bits, window) {
            (Some(m), None) => ApbfFilter::new(k, l, m, seed),
            (None, Some(w)) => ApbfFilter::with_window(k, l, w, seed),
            _ => Err(apbf::FilterError::InvalidParameter(
                "exactly one of bits or window is required".into(),
            )),
        }
        .map_err(value_err)?;
        Ok(PyApbf { inner })
    }

    /// Picks the smallest configuration meeting `target_fp` (and `max_npws`
    /// when given) and sizes it for `window` elements.
    #[staticmethod]
    #[pyo3(signature = (window, target_fp, max_npws=None))]
    fn for_spec(window: u64, target_fp: f64, max_npws: Option<f64>) -> PyResult<Self> {
        Ok(PyApbf {
            inner: ApbfFilter::for_spec(window, target_fp, max_npws).map_err(value_err)?,
        })
    }

    /// Rebuilds a filter from `snapshot` bytes.
    #[staticmethod]
    fn restore(data: &[u8]) -> PyResult<Self> {
        Ok(PyApbf {
            inner: ApbfFilter::restore(data).map_err(value_err)?,
        })
    }

    fn add(&mut self, element: &[u8]) {
        self.inner.add(element);
    }

    fn query(&self, element: &[u8]) -> bool {
        self.inner.query(element)
    }

    /// Returns `(present, slice_probes)`.
    fn query_with_probes(&self, element: &[u8]) -> (bool, u32) {
        self.inner.query_with_probes(element)
    }

    fn __contains__(&self, element: &[u8]) -> bool {
        self.inner.query(element)
    }

    /// Per-slice fill ratios, youngest slice first.
    fn fill_ratios(&self) -> Vec<f64> {
        self.inner.fill_ratios()
    }

    /// Serialized filter state.
    fn snapshot<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.snapshot())
    }

    #[getter]
    fn k(&self) -> u32 {
        self.inner.k()
    }

    #[getter]
    fn l(&self) -> u32 {
        self.inner.l()
    }

    /// Bits per slice.
    #[getter]
    fn m(&self) -> u64 {
        self.inner.m()
    }

    /// Generation size: insertions between shifts.
    #[getter]
    fn g(&self) -> u64 {
        self.inner.g()
    }

    /// Elements inserted so far.
    #[getter]
    fn n(&self) -> u64 {
        self.inner.n()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    /// Guaranteed sliding window, `l * g`.
    #[getter]
    fn window(&self) -> u64 {
        self.inner.window()
    }

    /// Number of slices, `k + l`.
    #[getter]
    fn slices(&self) -> u32 {
        self.inner.slices()
    }

    fn __repr__(&self) -> String {
        format!(
            "Apbf(k={}, l={}, bits={}, g={}, n={}, window={}, seed={})",
            self.inner.k(),
            self.inner.l(),
            self.inner.m(),
            self.inner.g(),
            self.inner.n(),
            self.inner.window(),
            self.inner.seed()
        )
    }
}

/// Age-partitioned blocked Bloom filter: each slice is an array of small
/// blocks and every insertion touches one block per slice.
#[pyclass(name = "Apbbf")]
struct PyApbbf {
    inner: ApbbfFilter,
}

#[pymethods]
impl PyApbbf {
    /// Builds a blocked filter; size it either directly by `num_blocks` per
    /// slice or for a guaranteed `window` of elements.
    #[new]
    #[pyo3(signature = (k, l, block_bits, set_bits, *, num_blocks=None, window=None, seed=0))]
    fn new(
        k: u32,
        l: u32,
        block_bits: u16,
        set_bits: u16,
        num_blocks: Option<u64>,
        window: Option<u64>,
        seed: u64,
    ) -> PyResult<Self> {
        let inner = match (num_blocks, window) {
            (Some(nb), None) => ApbbfFilter::new(k, l, nb, block_bits, set_bits, seed),
            (None, Some(w)) => ApbbfFilter::for_window(k, l, w, block_bits, set_bits, seed),
            _ => Err(apbf::FilterError::InvalidParameter(
                "exactly one of num_blocks or window is required".into(),
            )),
        }
        .map_err(value_err)?;
        Ok(PyApbbf { inner })
    }

    /// Rebuilds a filter from `snapshot` bytes.
    #[staticmethod]
    fn restore(data: &[u8]) -> PyResult<Self> {
        Ok(PyApbbf {
            inner: ApbbfFilter::restore(data).map_err(value_err)?,
        })
    }

    fn add(&mut self, element: &[u8]) {
        self.inner.add(element);
    }

    fn query(&self, element: &[u8]) -> bool {
        self.inner.query(element)
    }

    /// Returns `(present, slice_probes)`.
    fn query_with_probes(&self, element: &[u8]) -> (bool, u32) {
        self.inner.query_with_probes(element)
    }

    fn __contains__(&self, element: &[u8]) -> bool {
        self.inner.query(element)
    }

    /// Per-slice fill ratios, youngest slice first.
    fn fill_ratios(&self) -> Vec<f64> {
        self.inner.fill_ratios()
    }

    /// Serialized filter state.
    fn snapshot<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.snapshot())
    }

    #[getter]
    fn k(&self) -> u32 {
        self.inner.k()
    }

    #[getter]
    fn l(&self) -> u32 {
        self.inner.l()
    }

    #[getter]
    fn num_blocks(&self) -> u64 {
        self.inner.num_blocks()
    }

    #[getter]
    fn block_bits(&self) -> u16 {
        self.inner.block_bits()
    }

    #[getter]
    fn set_bits(&self) -> u16 {
        self.inner.set_bits()
    }

    #[getter]
    fn g(&self) -> u64 {
        self.inner.g()
    }

    #[getter]
    fn n(&self) -> u64 {
        self.inner.n()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    #[getter]
    fn window(&self) -> u64 {
        self.inner.window()
    }

    #[getter]
    fn slices(&self) -> u32 {
        self.inner.slices()
    }

    fn __repr__(&self) -> String {
        format!(
            "Apbbf(k={}, l={}, num_blocks={}, block_bits={}, set_bits={}, g={}, n={}, \
             window={}, seed={})",
            self.inner.k(),
            self.inner.l(),
            self.inner.num_blocks(),
            self.inner.block_bits(),
            self.inner.set_bits(),
            self.inner.g(),
            self.inner.n(),
            self.inner.window(),
            self.inner.seed()
        )
    }
}

/// One candidate configuration from `find_params`.
#[pyclass(name = "MetricsRow", frozen)]
struct PyMetricsRow {
    #[pyo3(get)]
    k: u32,
    #[pyo3(get)]
    l: u32,
    #[pyo3(get)]
    fp: f64,
    #[pyo3(get)]
    eff: f64,
    #[pyo3(get)]
    acc_window: f64,
    #[pyo3(get)]
    acc_fp: f64,
    #[pyo3(get)]
    acc_false: f64,
    #[pyo3(get)]
    npws: f64,
}

impl From<analysis::MetricsRow> for PyMetricsRow {
    fn from(r: analysis::MetricsRow) -> Self {
        PyMetricsRow {
            k: r.k,
            l: r.l,
            fp: r.fp,
            eff: r.eff,
            acc_window: r.acc_window,
            acc_fp: r.acc_fp,
            acc_false: r.acc_false,
            npws: r.npws,
        }
    }
}

#[pymethods]
impl PyMetricsRow {
    fn __repr__(&self) -> String {
        format!(
            "MetricsRow(k={}, l={}, fp={:.6}, eff={:.2}, npws={:.4})",
            self.k, self.l, self.fp, self.eff, self.npws
        )
    }
}

/// Baseline partitioned-Bloom metrics for one `k`.
#[pyclass(name = "BfMetricsRow", frozen)]
struct PyBfMetricsRow {
    #[pyo3(get)]
    k: u32,
    #[pyo3(get)]
    bits_per_item: f64,
    #[pyo3(get)]
    fp: f64,
    #[pyo3(get)]
    acc_true: f64,
    #[pyo3(get)]
    acc_false: f64,
}

#[pymethods]
impl PyBfMetricsRow {
    fn __repr__(&self) -> String {
        format!(
            "BfMetricsRow(k={}, bits_per_item={:.2}, fp={:.10})",
            self.k, self.bits_per_item, self.fp
        )
    }
}

/// Worst-case (pre-shift) fill gradient `min(i+1, k) / (2k)`.
#[pyfunction]
fn steady_fill(k: u32, l: u32) -> Vec<f64> {
    analysis::steady_fill(k, l)
}

/// Exact pre-shift fill gradient for a concrete `(m, g)` geometry.
#[pyfunction]
fn exact_peak_fill(k: u32, l: u32, m: u64, g: u64) -> Vec<f64> {
    analysis::exact_peak_fill(k, l, m, g)
}

/// False-positive probability under the worst-case gradient.
#[pyfunction]
fn fp_rate(k: u32, l: u32) -> f64 {
    analysis::fp_rate(k, l)
}

/// False-positive probability for an arbitrary per-slice match gradient.
#[pyfunction]
fn fp_rate_with_ratios(k: u32, l: u32, ratios: Vec<f64>) -> PyResult<f64> {
    if ratios.len() != (k + l) as usize {
        return Err(PyValueError::new_err(format!(
            "gradient length {} must equal k + l = {}",
            ratios.len(),
            k + l
        )));
    }
    Ok(analysis::fp_rate_with_ratios(k, l, &ratios))
}

/// Expected slice probes under the worst-case gradient; `scenario` is
/// "negative", "false_positive", or "window_member".
#[pyfunction]
fn expected_accesses(k: u32, l: u32, scenario: &str) -> PyResult<f64> {
    Ok(analysis::expected_accesses(k, l, scenario_from_str(scenario)?))
}

/// Expected slice probes for an arbitrary gradient.
#[pyfunction]
fn expected_accesses_with_ratios(k: u32, l: u32, scenario: &str, ratios: Vec<f64>) -> PyResult<f64> {
    if ratios.len() != (k + l) as usize {
        return Err(PyValueError::new_err(format!(
            "gradient length {} must equal k + l = {}",
            ratios.len(),
            k + l
        )));
    }
    Ok(analysis::expected_accesses_with_ratios(
        k,
        l,
        scenario_from_str(scenario)?,
        &ratios,
    ))
}

/// Peak normalized slack: extra retained elements beyond the guaranteed
/// window, as a fraction of the window.
#[pyfunction]
fn peak_npws(k: u32, l: u32) -> PyResult<f64> {
    analysis::peak_npws(k, l).map_err(value_err)
}

/// Space efficiency relative to an ideal static filter at rate `fp`.
#[pyfunction]
fn efficiency(k: u32, l: u32, fp: f64) -> f64 {
    analysis::efficiency(k, l, fp)
}

/// Full metric row for one `(k, l)` configuration.
#[pyfunction]
fn metrics_row(k: u32, l: u32) -> PyMetricsRow {
    analysis::metrics_row(k, l).into()
}

/// Candidate configurations for a target false-positive rate.
#[pyfunction]
#[pyo3(signature = (target_fp, max_slices=64, max_npws=None))]
fn find_params(target_fp: f64, max_slices: u32, max_npws: Option<f64>) -> PyResult<Vec<PyMetricsRow>> {
    Ok(analysis::find_params(target_fp, max_slices, max_npws)
        .map_err(value_err)?
        .into_iter()
        .map(Into::into)
        .collect())
}

/// Blocked-filter capacity discount `x / -ln(1 - x)` with `x = set_bits /
/// block_bits`.
#[pyfunction]
fn capacity_factor(block_bits: u16, set_bits: u16) -> PyResult<f64> {
    apbf::blocked::capacity_factor(block_bits, set_bits).map_err(value_err)
}

/// Model false-positive rate of a blocked filter with a concrete geometry.
#[pyfunction]
fn apbbf_fp_model(k: u32, l: u32, num_blocks: u64, block_bits: u16, set_bits: u16) -> f64 {
    analysis::apbbf_fp_model(k, l, num_blocks, block_bits, set_bits)
}

/// Model false-positive rate of a blocked filter in the large-filter limit.
#[pyfunction]
fn apbbf_fp_model_steady(k: u32, l: u32, block_bits: u16, set_bits: u16) -> f64 {
    analysis::apbbf_fp_model_steady(k, l, block_bits, set_bits)
}

/// Smallest plain-Bloom geometry for a target rate: `(k, bits_per_slice,
/// actual_fp)`.
#[pyfunction]
fn bf_dimension(target_fp: f64, capacity: u64) -> PyResult<(u32, u64, f64)> {
    bloom::bf_dimension(target_fp, capacity).map_err(value_err)
}

/// Baseline partitioned-Bloom metrics for `k` slices.
#[pyfunction]
fn bf_metrics(k: u32) -> PyResult<PyBfMetricsRow> {
    let r = bloom::bf_metrics(k).map_err(value_err)?;
    Ok(PyBfMetricsRow {
        k: r.k,
        bits_per_item: r.bits_per_item,
        fp: r.fp,
        acc_true: r.acc_true,
        acc_false: r.acc_false,
    })
}

/// Age-partitioned Bloom filters: sliding-window membership with no false
/// negatives inside the window, plus the exact analytic model layer.
#[pymodule]
fn apbf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyApbf>()?;
    m.add_class::<PyApbbf>()?;
    m.add_class::<PyMetricsRow>()?;
    m.add_class::<PyBfMetricsRow>()?;
    m.add_function(wrap_pyfunction!(steady_fill, m)?)?;
    m.add_function(wrap_pyfunction!(exact_peak_fill, m)?)?;
    m.add_function(wrap_pyfunction!(fp_rate, m)?)?;
    m.add_function(wrap_pyfunction!(fp_rate_with_ratios, m)?)?;
    m.add_function(wrap_pyfunction!(expected_accesses, m)?)?;
    m.add_function(wrap_pyfunction!(expected_accesses_with_ratios, m)?)?;
    m.add_function(wrap_pyfunction!(peak_npws, m)?)?;
    m.add_function(wrap_pyfunction!(efficiency, m)?)?;
    m.add_function(wrap_pyfunction!(metrics_row, m)?)?;
    m.add_function(wrap_pyfunction!(find_params, m)?)?;
    m.add_function(wrap_pyfunction!(capacity_factor, m)?)?;
    m.add_function(wrap_pyfunction!(apbbf_fp_model, m)?)?;
    m.add_function(wrap_pyfunction!(apbbf_fp_model_steady, m)?)?;
    m.add_function(wrap_pyfunction!(bf_dimension, m)?)?;
    m.add_function(wrap_pyfunction!(bf_metrics, m)?)?;
    Ok(())
}
