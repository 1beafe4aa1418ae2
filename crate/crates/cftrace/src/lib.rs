//! Simulator and analysis toolkit for interferometric counterfactual
//! communication protocols: chained/nested beam-splitter networks with
//! shutter- or phase-controlled channel paths, weak probe couplings on every
//! channel crossing, and post-selected trace / pointer-shift metrics that
//! quantify how much channel presence a detected photon actually had.

pub mod adversary;
pub mod bohm;
pub mod cli;
pub mod error;
pub mod metrics;
pub mod mode;
pub mod networks;
pub mod trace;

pub use adversary::{
    eve_joint_distribution, keydist_simulate, EveLocation, EveMode, EveProbe, JointDistribution,
    KeyReport, KeydistEve, Outcome,
};
pub use bohm::{bohm_estimate, BohmReport};
pub use error::{Error, Result};
pub use metrics::{
    compare, eval_asymptotic, formulas_for, probe_trace, regime_warning, single_particle_standard,
    FormulaId, Standard, TraceReport, TraceSummary, Verdict,
};
pub use mode::{Amplitude, BeamSplitter, ModeState, PathId, PortId};
pub use networks::{
    build, exact_oracle_simulate, nested_mzi3_channel_state, path_amplitudes, simulate, Element,
    Network, NetworkKind, NetworkSpec, PathAmplitudeTable, Simulation,
};
pub use trace::{
    epsilon_from_probe, post_select, shift_sum, tag_interaction, trace_detect_prob,
    weak_value_projection, BranchedState, ProbeModel, TagSet, Truncation,
};
