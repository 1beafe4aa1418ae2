//! Protocol-level analysis: the single-pass reference channel, asymptotic
//! closed forms with their validity regimes, and the side-by-side
//! counterfactuality comparison.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mode::{PathId, PortId};
use crate::networks::{build, NetworkKind, NetworkSpec};
use crate::trace::{shift_sum, weak_value_projection, ProbeModel};

/// Reference: one probe-monitored crossing spread over `n_paths` parallel
/// arms, post-selected on perfect recombination.
#[derive(Clone, Copy, Debug)]
pub struct Standard {
    pub n_paths: u32,
    /// Click probability on the recombined output.
    pub postselect_prob: f64,
    /// Probe detection probability given the click.
    pub detect_prob: f64,
    /// First-order pointer displacement sum (equals `delta` exactly: the
    /// weak values are `1/n` on each of the `n` arms).
    pub shift_sum: f64,
}

/// Simulates the parallel reference channel. First order is exact here: a
/// single crossing can never be tagged twice.
pub fn single_particle_standard(n_paths: u32, probe: &ProbeModel) -> Result<Standard> {
    if n_paths == 0 {
        return Err(Error::Config(
            "standard channel needs at least one arm".into(),
        ));
    }
    let spec = NetworkSpec::simple(n_paths);
    let net = build(&spec)?;
    let m = net.first_order_metrics(probe.epsilon, PortId::D1);
    let table = net.clean_table(PortId::D1);
    let mut weak = BTreeMap::new();
    for (path, f) in &table.fwd {
        let b = table.bwd.get(path).copied().unwrap_or(0.0);
        let w = weak_value_projection(
            Complex64::new(*f, 0.0),
            Complex64::new(b, 0.0),
            Complex64::new(table.overlap, 0.0),
        )?;
        weak.insert(*path, w);
    }
    Ok(Standard {
        n_paths,
        postselect_prob: m.postselect_prob,
        detect_prob: m.trace_detect_prob,
        shift_sum: shift_sum(&weak, probe.delta),
    })
}

/// Identifiers of the closed-form large-size approximations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormulaId {
    ZenoBit0Trace,
    SalihBit0Trace,
    SalihBit0Shift,
    LiBit0Trace,
    LiBit0Shift,
    LiBit1Trace,
    LiBit1Shift,
    SalihFailBit1,
    SalihFailBit0,
    SalihError,
    BohmCrossExpect,
}

impl FormulaId {
    pub const ALL: [FormulaId; 11] = [
        FormulaId::ZenoBit0Trace,
        FormulaId::SalihBit0Trace,
        FormulaId::SalihBit0Shift,
        FormulaId::LiBit0Trace,
        FormulaId::LiBit0Shift,
        FormulaId::LiBit1Trace,
        FormulaId::LiBit1Shift,
        FormulaId::SalihFailBit1,
        FormulaId::SalihFailBit0,
        FormulaId::SalihError,
        FormulaId::BohmCrossExpect,
    ];
}

impl fmt::Display for FormulaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FormulaId::ZenoBit0Trace => "zeno_bit0_trace",
            FormulaId::SalihBit0Trace => "salih_bit0_trace",
            FormulaId::SalihBit0Shift => "salih_bit0_shift",
            FormulaId::LiBit0Trace => "li_bit0_trace",
            FormulaId::LiBit0Shift => "li_bit0_shift",
            FormulaId::LiBit1Trace => "li_bit1_trace",
            FormulaId::LiBit1Shift => "li_bit1_shift",
            FormulaId::SalihFailBit1 => "salih_fail_bit1",
            FormulaId::SalihFailBit0 => "salih_fail_bit0",
            FormulaId::SalihError => "salih_error",
            FormulaId::BohmCrossExpect => "bohm_cross_expect",
        })
    }
}

impl FromStr for FormulaId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        for id in FormulaId::ALL {
            if id.to_string() == s {
                return Ok(id);
            }
        }
        Err(Error::Usage(format!("unknown formula id `{s}`")))
    }
}

/// Evaluates a closed-form approximation at chain sizes `(m, n)`, probe
/// strength `eps`, and pointer shift `delta`.
pub fn eval_asymptotic(id: FormulaId, m: u32, n: u32, eps: f64, delta: f64) -> f64 {
    let (mf, nf) = (m as f64, n as f64);
    let p2 = PI * PI;
    let p4 = p2 * p2;
    match id {
        FormulaId::ZenoBit0Trace => 3.0 * eps * eps * nf / 8.0,
        FormulaId::SalihBit0Trace => eps * eps * p4 * nf / (128.0 * mf.powi(3)),
        FormulaId::SalihBit0Shift => delta * p2 * nf / (16.0 * mf),
        FormulaId::LiBit0Trace => eps * eps * p4 * nf / (256.0 * mf.powi(3)),
        FormulaId::LiBit0Shift => delta * p2 * nf / (16.0 * mf),
        FormulaId::LiBit1Trace => 3.0 * eps * eps * p4 * mf / (64.0 * nf.powi(3)),
        FormulaId::LiBit1Shift => delta * p2 * mf / (4.0 * nf),
        FormulaId::SalihFailBit1 => p2 * mf / (4.0 * nf),
        FormulaId::SalihFailBit0 => p2 / 4.0 * (mf / nf + 1.0 / mf),
        FormulaId::SalihError => p2 / (4.0 * mf * mf),
        FormulaId::BohmCrossExpect => p2 / 4.0 * (mf / nf + nf / (4.0 * mf)),
    }
}

/// Checks whether `(m, n)` lies in the regime where a formula is meant to
/// approximate the simulation; returns a warning to surface otherwise.
pub fn regime_warning(id: FormulaId, m: u32, n: u32) -> Option<String> {
    let need = |ok: bool, what: &str| -> Option<String> {
        if ok {
            None
        } else {
            Some(format!(
                "formula {id} evaluated outside its regime (m={m}, n={n}; needs {what})"
            ))
        }
    };
    match id {
        FormulaId::ZenoBit0Trace => need(n >= 100, "n >= 100"),
        FormulaId::SalihBit0Trace | FormulaId::SalihBit0Shift => {
            need(m >= 8 && n >= 10 * m, "m >= 8 and n >= 10m")
        }
        FormulaId::LiBit0Trace
        | FormulaId::LiBit0Shift
        | FormulaId::LiBit1Trace
        | FormulaId::LiBit1Shift
        | FormulaId::BohmCrossExpect => need(m >= 8 && n >= 8, "m >= 8 and n >= 8"),
        FormulaId::SalihFailBit1 | FormulaId::SalihError | FormulaId::SalihFailBit0 => {
            need(m >= 8 && n >= 100 * m, "m >= 8 and n >= 100m")
        }
    }
}

/// Asymptotic formula ids attached to a protocol configuration, if any.
pub fn formulas_for(kind: NetworkKind, bit: u8) -> (Option<FormulaId>, Option<FormulaId>) {
    match (kind, bit) {
        (NetworkKind::ZenoChain, 0) => (Some(FormulaId::ZenoBit0Trace), None),
        (NetworkKind::Salih, 0) => (
            Some(FormulaId::SalihBit0Trace),
            Some(FormulaId::SalihBit0Shift),
        ),
        (NetworkKind::Li, 0) => (Some(FormulaId::LiBit0Trace), Some(FormulaId::LiBit0Shift)),
        (NetworkKind::Li, 1) => (Some(FormulaId::LiBit1Trace), Some(FormulaId::LiBit1Shift)),
        _ => (None, None),
    }
}

/// Outcome of the side-by-side comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Counterfactual,
    NotCounterfactual,
    Mixed,
}

impl Verdict {
    /// Strict dominance on both probe metrics; anything else is mixed.
    pub fn judge(trace: f64, shift: f64, std_detect: f64, std_shift: f64) -> Verdict {
        if trace < std_detect && shift < std_shift {
            Verdict::Counterfactual
        } else if trace > std_detect && shift > std_shift {
            Verdict::NotCounterfactual
        } else {
            Verdict::Mixed
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Counterfactual => "counterfactual",
            Verdict::NotCounterfactual => "not_counterfactual",
            Verdict::Mixed => "mixed",
        })
    }
}

/// Post-selected probe record of a protocol network.
#[derive(Clone, Debug)]
pub struct TraceSummary {
    pub detector: PortId,
    pub n_paths: u32,
    pub postselect_prob: f64,
    pub trace_detect_prob: f64,
    /// Clean forward/backward amplitude tables behind the weak values.
    pub table: crate::networks::PathAmplitudeTable,
    pub weak_values: BTreeMap<PathId, Complex64>,
    pub shift_sum: f64,
}

/// First-order probe analysis of `spec` at its heralding detector.
pub fn probe_trace(spec: &NetworkSpec, probe: &ProbeModel) -> Result<TraceSummary> {
    match spec.kind {
        NetworkKind::ZenoChain | NetworkKind::NestedMzi3 | NetworkKind::Salih | NetworkKind::Li => {
        }
        other => return Err(Error::UnsupportedKind(other.to_string())),
    }
    let net = build(spec)?;
    let detector = spec.default_detector();
    let metrics = net.first_order_metrics(probe.epsilon, detector);
    if metrics.postselect_prob < crate::trace::POST_SELECT_FLOOR {
        return Err(Error::ImpossiblePostSelection {
            prob: metrics.postselect_prob,
            floor: crate::trace::POST_SELECT_FLOOR,
        });
    }
    let table = net.clean_table(detector);
    let mut weak_values = BTreeMap::new();
    for (path, f) in &table.fwd {
        let b = table.bwd.get(path).copied().unwrap_or(0.0);
        let w = weak_value_projection(
            Complex64::new(*f, 0.0),
            Complex64::new(b, 0.0),
            Complex64::new(table.overlap, 0.0),
        )?;
        weak_values.insert(*path, w);
    }
    let shift = shift_sum(&weak_values, probe.delta);
    Ok(TraceSummary {
        detector,
        n_paths: spec.n_paths() as u32,
        postselect_prob: metrics.postselect_prob,
        trace_detect_prob: metrics.trace_detect_prob,
        table,
        weak_values,
        shift_sum: shift,
    })
}

/// Probe metrics of a protocol network next to the parallel reference with
/// the same number of channel crossings.
#[derive(Clone, Debug)]
pub struct TraceReport {
    pub detector: PortId,
    pub n_paths: u32,
    pub postselect_prob: f64,
    pub trace_detect_prob: f64,
    pub weak_values: BTreeMap<PathId, Complex64>,
    pub shift_sum: f64,
    pub standard_detect: f64,
    pub standard_shift: f64,
    pub verdict: Verdict,
}

/// Runs the first-order probe analysis of `spec` and judges it against the
/// single-pass reference.
pub fn compare(spec: &NetworkSpec, probe: &ProbeModel) -> Result<TraceReport> {
    let summary = probe_trace(spec, probe)?;
    let standard = single_particle_standard(summary.n_paths, probe)?;
    let verdict = Verdict::judge(
        summary.trace_detect_prob,
        summary.shift_sum,
        standard.detect_prob,
        standard.shift_sum,
    );
    Ok(TraceReport {
        detector: summary.detector,
        n_paths: summary.n_paths,
        postselect_prob: summary.postselect_prob,
        trace_detect_prob: summary.trace_detect_prob,
        weak_values: summary.weak_values,
        shift_sum: summary.shift_sum,
        standard_detect: standard.detect_prob,
        standard_shift: standard.shift_sum,
        verdict,
    })
}
