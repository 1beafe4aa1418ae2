//! Python bindings: thin wrappers over the `cftrace` network builders,
//! probe metrics, adversary statistics, and key-round sampler.
//!
//! The module is a plain cdylib; copy `libcftrace_py.so` next to your
//! script as `cftrace_py.so` (see `python/smoke_test.py`).

use std::collections::BTreeMap;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use cftrace::{
    EveLocation, EveMode, EveProbe, KeydistEve, NetworkSpec, PathId, ProbeModel, Verdict,
};

fn pyerr(e: cftrace::Error) -> PyErr {
    match e {
        cftrace::Error::ImpossiblePostSelection { .. } | cftrace::Error::Io(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Gaussian pointer model; couplings are per channel crossing.
#[pyclass(name = "Probe", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyProbe {
    inner: ProbeModel,
}

#[pymethods]
impl PyProbe {
    /// Probe with a given orthogonal branching amplitude in [0, 1).
    #[staticmethod]
    fn from_epsilon(epsilon: f64) -> PyResult<Self> {
        Ok(PyProbe {
            inner: ProbeModel::from_epsilon(epsilon).map_err(pyerr)?,
        })
    }

    /// Probe with a pointer shift `delta` and wavepacket width `width`.
    #[staticmethod]
    fn from_shift_width(delta: f64, width: f64) -> PyResult<Self> {
        Ok(PyProbe {
            inner: ProbeModel::from_shift_width(delta, width).map_err(pyerr)?,
        })
    }

    /// No coupling at all: plain single-photon propagation.
    #[staticmethod]
    fn off() -> Self {
        PyProbe {
            inner: ProbeModel::off(),
        }
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    #[getter]
    fn width(&self) -> f64 {
        self.inner.width
    }

    fn __repr__(&self) -> String {
        format!(
            "Probe(epsilon={}, delta={}, width={})",
            self.inner.epsilon, self.inner.delta, self.inner.width
        )
    }
}

/// Declarative network description; build with the static constructors.
#[pyclass(name = "NetworkSpec", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySpec {
    inner: NetworkSpec,
}

impl PySpec {
    fn validated(inner: NetworkSpec) -> PyResult<Self> {
        inner.validate().map_err(pyerr)?;
        Ok(PySpec { inner })
    }
}

#[pymethods]
impl PySpec {
    /// Single splitter fanning out over `n` parallel channel arms.
    #[staticmethod]
    fn simple(n: u32) -> PyResult<Self> {
        Self::validated(NetworkSpec::simple(n))
    }

    /// Balanced two-splitter interferometer, channel on the right arm.
    #[staticmethod]
    fn ifm(bit: u8) -> PyResult<Self> {
        Self::validated(NetworkSpec::ifm_mzi(bit))
    }

    /// Two-splitter interferometer with a phase plate encoding the bit.
    #[staticmethod]
    fn hwp(bit: u8) -> PyResult<Self> {
        Self::validated(NetworkSpec::hwp_mzi(bit))
    }

    /// Splitter chain of `n` steps; bit 1 blocks every channel path.
    #[staticmethod]
    fn zeno(n: u32, bit: u8) -> PyResult<Self> {
        Self::validated(NetworkSpec::zeno(n, bit))
    }

    /// Three-arm single-stage network with one channel path.
    /// `element` is one of "free" | "shutter" | "hwp".
    #[staticmethod]
    fn nested3(element: &str) -> PyResult<Self> {
        Self::validated(NetworkSpec::nested3(element.parse().map_err(pyerr)?))
    }

    /// Outer chain of `m` steps with an `n`-step blocking inner chain and
    /// lossy side mirrors in each gap.
    #[staticmethod]
    fn salih(m: u32, n: u32, bit: u8) -> PyResult<Self> {
        Self::validated(NetworkSpec::salih(m, n, bit))
    }

    /// Lossless nested variant with full-rotation inner chains; `m`, `n`
    /// must be even.
    #[staticmethod]
    fn li(m: u32, n: u32, bit: u8) -> PyResult<Self> {
        Self::validated(NetworkSpec::li(m, n, bit))
    }

    /// Copy with one channel path's element overridden.
    fn with_element(&self, m: u16, n: u16, element: &str) -> PyResult<Self> {
        let spec = self
            .inner
            .clone()
            .with_element(PathId::new(m, n), element.parse().map_err(pyerr)?);
        Self::validated(spec)
    }

    /// Copy with the side-mirror power loss overridden (salih only).
    fn with_side_mirror_t3(&self, t3: f64) -> PyResult<Self> {
        Self::validated(self.inner.clone().with_side_mirror_t3(t3))
    }

    #[getter]
    fn kind(&self) -> String {
        self.inner.kind.to_string()
    }

    #[getter]
    fn m(&self) -> u32 {
        self.inner.m
    }

    #[getter]
    fn n(&self) -> u32 {
        self.inner.n
    }

    #[getter]
    fn bit(&self) -> u8 {
        self.inner.bit
    }

    #[getter]
    fn n_paths(&self) -> usize {
        self.inner.n_paths()
    }

    /// Channel crossings as `(m, n)` pairs.
    #[getter]
    fn channel_paths(&self) -> Vec<(u16, u16)> {
        self.inner
            .channel_paths()
            .into_iter()
            .map(|p| (p.m, p.n))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "NetworkSpec(kind='{}', m={}, n={}, bit={})",
            self.inner.kind, self.inner.m, self.inner.n, self.inner.bit
        )
    }
}

/// Post-selected probe record of one network.
#[pyclass(frozen, get_all)]
struct TraceSummary {
    detector: String,
    n_paths: u32,
    postselect_prob: f64,
    trace_detect_prob: f64,
    shift_sum: f64,
    /// Weak value of each channel-path projector, keyed by `(m, n)`.
    weak_values: BTreeMap<(u16, u16), Complex64>,
}

#[pymethods]
impl TraceSummary {
    fn __repr__(&self) -> String {
        format!(
            "TraceSummary(detector='{}', postselect_prob={}, trace_detect_prob={}, shift_sum={})",
            self.detector, self.postselect_prob, self.trace_detect_prob, self.shift_sum
        )
    }
}

/// Probe record next to the single-particle reference, with the verdict.
#[pyclass(frozen, get_all)]
struct TraceReport {
    detector: String,
    n_paths: u32,
    postselect_prob: f64,
    trace_detect_prob: f64,
    shift_sum: f64,
    standard_detect: f64,
    standard_shift: f64,
    verdict: String,
}

#[pymethods]
impl TraceReport {
    fn __repr__(&self) -> String {
        format!(
            "TraceReport(trace_detect_prob={}, standard_detect={}, shift_sum={}, \
             standard_shift={}, verdict='{}')",
            self.trace_detect_prob,
            self.standard_detect,
            self.shift_sum,
            self.standard_shift,
            self.verdict
        )
    }
}

/// Single-particle reference-channel metrics.
#[pyclass(frozen, get_all)]
struct Standard {
    n_paths: u32,
    postselect_prob: f64,
    detect_prob: f64,
    shift_sum: f64,
}

#[pymethods]
impl Standard {
    fn __repr__(&self) -> String {
        format!(
            "Standard(n_paths={}, detect_prob={}, shift_sum={})",
            self.n_paths, self.detect_prob, self.shift_sum
        )
    }
}

/// Tally of one key-distribution Monte Carlo run.
#[pyclass(frozen, get_all)]
struct KeyReport {
    chain_n: u32,
    rounds: u64,
    seed: u64,
    eve: bool,
    announced: u64,
    announced_rate: f64,
    errors: u64,
    error_rate: f64,
    eve_clicks: u64,
    clicked_announced: u64,
    clicked_announced_errors: u64,
    mi_click_error_bits: f64,
}

#[pymethods]
impl KeyReport {
    fn __repr__(&self) -> String {
        format!(
            "KeyReport(rounds={}, announced={}, errors={}, eve_clicks={})",
            self.rounds, self.announced, self.errors, self.eve_clicks
        )
    }
}

/// Trajectory-weight (channel crossing) summary.
#[pyclass(frozen, get_all)]
struct BohmReport {
    kind: String,
    m: u32,
    n: u32,
    bit: u8,
    max_path_prob: f64,
    counterfactual_prob: f64,
    cross_expectation: f64,
    approximate: bool,
}

#[pymethods]
impl BohmReport {
    fn __repr__(&self) -> String {
        format!(
            "BohmReport(max_path_prob={}, cross_expectation={}, approximate={})",
            self.max_path_prob, self.cross_expectation, self.approximate
        )
    }
}

/// Outcome probability of every port after first-order propagation.
#[pyfunction]
fn simulate(spec: &PySpec, probe: &PyProbe) -> PyResult<BTreeMap<String, f64>> {
    let sim = cftrace::simulate(&spec.inner, &probe.inner).map_err(pyerr)?;
    Ok(sim
        .probs
        .iter()
        .map(|(port, p)| (port.to_string(), *p))
        .collect())
}

/// Post-selected probe record at the network's heralding detector.
#[pyfunction]
fn trace(spec: &PySpec, probe: &PyProbe) -> PyResult<TraceSummary> {
    let s = cftrace::probe_trace(&spec.inner, &probe.inner).map_err(pyerr)?;
    Ok(TraceSummary {
        detector: s.detector.to_string(),
        n_paths: s.n_paths,
        postselect_prob: s.postselect_prob,
        trace_detect_prob: s.trace_detect_prob,
        shift_sum: s.shift_sum,
        weak_values: s
            .weak_values
            .iter()
            .map(|(path, w)| ((path.m, path.n), *w))
            .collect(),
    })
}

/// Single-particle reference over `n` parallel channel arms.
#[pyfunction]
fn standard(n: u32, probe: &PyProbe) -> PyResult<Standard> {
    let s = cftrace::single_particle_standard(n, &probe.inner).map_err(pyerr)?;
    Ok(Standard {
        n_paths: s.n_paths,
        postselect_prob: s.postselect_prob,
        detect_prob: s.detect_prob,
        shift_sum: s.shift_sum,
    })
}

/// Probe record vs the single-particle reference, plus the verdict
/// ("counterfactual" | "not_counterfactual" | "mixed").
#[pyfunction]
fn compare(spec: &PySpec, probe: &PyProbe) -> PyResult<TraceReport> {
    let r = cftrace::compare(&spec.inner, &probe.inner).map_err(pyerr)?;
    Ok(TraceReport {
        detector: r.detector.to_string(),
        n_paths: r.n_paths,
        postselect_prob: r.postselect_prob,
        trace_detect_prob: r.trace_detect_prob,
        shift_sum: r.shift_sum,
        standard_detect: r.standard_detect,
        standard_shift: r.standard_shift,
        verdict: match r.verdict {
            Verdict::Counterfactual => "counterfactual".to_string(),
            Verdict::NotCounterfactual => "not_counterfactual".to_string(),
            Verdict::Mixed => "mixed".to_string(),
        },
    })
}

/// Joint distribution over (adversary clicked, outcome) as a dict keyed by
/// `(bool, str)`; outcomes are "D1" | "D2" | "D3" | "absorbed".
///
/// Give exactly one of `gap` (a whole inner chain) and `path` (one `(m, n)`
/// crossing). `epsilon=None` means a projective (always-resolving) probe.
#[pyfunction]
#[pyo3(signature = (spec, gap=None, path=None, epsilon=None))]
fn eve_joint(
    spec: &PySpec,
    gap: Option<u16>,
    path: Option<(u16, u16)>,
    epsilon: Option<f64>,
) -> PyResult<BTreeMap<(bool, String), f64>> {
    let location = match (gap, path) {
        (Some(m), None) => EveLocation::Gap(m),
        (None, Some((m, n))) => EveLocation::Path(PathId::new(m, n)),
        _ => return Err(PyValueError::new_err("give exactly one of gap= and path=")),
    };
    let probe = match epsilon {
        Some(eps) => EveProbe::weak(location, eps).map_err(pyerr)?,
        None => EveProbe::projective(location),
    };
    let dist = cftrace::eve_joint_distribution(&spec.inner, &probe).map_err(pyerr)?;
    Ok(dist
        .probs
        .iter()
        .map(|((clicked, outcome), p)| ((*clicked, outcome.to_string()), *p))
        .collect())
}

/// Monte Carlo of the chained-interferometer key rounds. `eve=True` places
/// a projective intercept on every channel path; `eve_epsilon` makes it a
/// weak probe instead (implies `eve=True`).
#[pyfunction]
#[pyo3(signature = (chain_n=10, rounds=10_000, seed=0, eve=false, eve_epsilon=None))]
fn keydist(
    chain_n: u32,
    rounds: u64,
    seed: u64,
    eve: bool,
    eve_epsilon: Option<f64>,
) -> PyResult<KeyReport> {
    let adversary = match (eve, eve_epsilon) {
        (_, Some(eps)) => Some(KeydistEve {
            mode: EveMode::Weak,
            epsilon: eps,
        }),
        (true, None) => Some(KeydistEve {
            mode: EveMode::Projective,
            epsilon: 1.0,
        }),
        (false, None) => None,
    };
    let r = cftrace::keydist_simulate(chain_n, rounds, seed, adversary.as_ref()).map_err(pyerr)?;
    Ok(KeyReport {
        chain_n: r.chain_n,
        rounds: r.rounds,
        seed: r.seed,
        eve: r.eve,
        announced: r.announced,
        announced_rate: r.announced_rate,
        errors: r.errors,
        error_rate: r.error_rate,
        eve_clicks: r.eve_clicks,
        clicked_announced: r.clicked_announced,
        clicked_announced_errors: r.clicked_announced_errors,
        mi_click_error_bits: r.mi_click_error_bits,
    })
}

/// Trajectory-weight estimate for a protocol network.
#[pyfunction]
fn bohm(spec: &PySpec) -> PyResult<BohmReport> {
    let r = cftrace::bohm_estimate(&spec.inner).map_err(pyerr)?;
    Ok(BohmReport {
        kind: r.kind.to_string(),
        m: r.m,
        n: r.n,
        bit: r.bit,
        max_path_prob: r.max_path_prob,
        counterfactual_prob: r.counterfactual_prob,
        cross_expectation: r.cross_expectation,
        approximate: r.approximate,
    })
}

/// Closed-form large-size estimate; `formula` is one of `formula_ids()`.
#[pyfunction]
fn eval_asymptotic(formula: &str, m: u32, n: u32, epsilon: f64, delta: f64) -> PyResult<f64> {
    let id: cftrace::FormulaId = formula.parse().map_err(pyerr)?;
    Ok(cftrace::eval_asymptotic(id, m, n, epsilon, delta))
}

/// Human-readable warning when `(m, n)` is outside a formula's regime.
#[pyfunction]
fn regime_warning(formula: &str, m: u32, n: u32) -> PyResult<Option<String>> {
    let id: cftrace::FormulaId = formula.parse().map_err(pyerr)?;
    Ok(cftrace::regime_warning(id, m, n))
}

/// `(trace_formula, shift_formula)` names tracking a kind/bit, if any.
#[pyfunction]
fn formulas_for(kind: &str, bit: u8) -> PyResult<(Option<String>, Option<String>)> {
    let kind: cftrace::NetworkKind = kind.parse().map_err(pyerr)?;
    let (t, s) = cftrace::formulas_for(kind, bit);
    Ok((t.map(|id| id.to_string()), s.map(|id| id.to_string())))
}

/// All known closed-form identifiers.
#[pyfunction]
fn formula_ids() -> Vec<String> {
    cftrace::FormulaId::ALL
        .iter()
        .map(|id| id.to_string())
        .collect()
}

#[pymodule]
fn cftrace_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProbe>()?;
    m.add_class::<PySpec>()?;
    m.add_class::<TraceSummary>()?;
    m.add_class::<TraceReport>()?;
    m.add_class::<Standard>()?;
    m.add_class::<KeyReport>()?;
    m.add_class::<BohmReport>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(trace, m)?)?;
    m.add_function(wrap_pyfunction!(standard, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(eve_joint, m)?)?;
    m.add_function(wrap_pyfunction!(keydist, m)?)?;
    m.add_function(wrap_pyfunction!(bohm, m)?)?;
    m.add_function(wrap_pyfunction!(eval_asymptotic, m)?)?;
    m.add_function(wrap_pyfunction!(regime_warning, m)?)?;
    m.add_function(wrap_pyfunction!(formulas_for, m)?)?;
    m.add_function(wrap_pyfunction!(formula_ids, m)?)?;
    Ok(())
}
