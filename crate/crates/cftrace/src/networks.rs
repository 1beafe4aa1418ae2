//! Interferometer network families, their compiler to op sequences, and the
//! propagators that run them.
//!
//! Conventions shared by all builders:
//! - propagation starts from unit amplitude on `PortId::Source`;
//! - every crossing of the transmission channel carries a `Tag` op *before*
//!   whatever element (shutter, half-wave plate) sits on that path, so a
//!   probe sees the particle even when the path is then blocked;
//! - terminal arms are renamed to detector ports at the end, absorbed
//!   weight stays in labeled sink ports.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mode::{apply_op, Amplitude, Direction, ModeState, NetOp, PathId, PortId};
use crate::trace::{post_select, ProbeModel};
use crate::trace::{BranchedState, Truncation, EXACT_ORACLE_MAX_PATHS};

/// Supported interferometer families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetworkKind {
    /// One splitter fanning out over `n` parallel channel arms and
    /// recombining: the non-interferometric reference.
    SimpleChannel,
    /// Balanced two-splitter interferometer with one channel path.
    IfmMzi,
    /// Same geometry, bit encoded by a half-wave plate instead of a shutter.
    HwpMzi,
    /// Chain of `n` identical splitters at `pi/2n` with `n-1` channel paths.
    ZenoChain,
    /// Three-arm single-pass interferometer whose bright output port is
    /// insensitive to one arm.
    NestedMzi3,
    /// Outer chain of `m` splitters, each gap holding an inner chain of `n`
    /// splitters on the channel side, shutter-encoded, with lossy side
    /// mirrors completing the outer arm.
    Salih,
    /// Lossless nested-chain variant: inner chains rotate by a full `pi`,
    /// the bit is encoded by half-wave plates on the channel paths.
    Li,
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NetworkKind::SimpleChannel => "simple",
            NetworkKind::IfmMzi => "ifm",
            NetworkKind::HwpMzi => "hwp",
            NetworkKind::ZenoChain => "zeno",
            NetworkKind::NestedMzi3 => "nested3",
            NetworkKind::Salih => "salih",
            NetworkKind::Li => "li",
        };
        f.write_str(s)
    }
}

impl FromStr for NetworkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "simple" | "simple-channel" => NetworkKind::SimpleChannel,
            "ifm" | "ifm-mzi" => NetworkKind::IfmMzi,
            "hwp" | "hwp-mzi" => NetworkKind::HwpMzi,
            "zeno" | "zeno-chain" => NetworkKind::ZenoChain,
            "nested3" | "nested-mzi3" => NetworkKind::NestedMzi3,
            "salih" => NetworkKind::Salih,
            "li" => NetworkKind::Li,
            other => {
                return Err(Error::Usage(format!(
                    "unknown network kind `{other}` (expected simple|ifm|hwp|zeno|nested3|salih|li)"
                )))
            }
        })
    }
}

/// What sits on a channel path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Element {
    Free,
    Shutter,
    Hwp,
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Element::Free => "free",
            Element::Shutter => "shutter",
            Element::Hwp => "hwp",
        })
    }
}

impl FromStr for Element {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "free" => Element::Free,
            "shutter" => Element::Shutter,
            "hwp" => Element::Hwp,
            other => {
                return Err(Error::Usage(format!(
                    "unknown element `{other}` (expected free|shutter|hwp)"
                )))
            }
        })
    }
}

/// Declarative description of a network instance.
#[derive(Clone, Debug)]
pub struct NetworkSpec {
    pub kind: NetworkKind,
    /// Outer chain length (1 for single-layer kinds; arm count for
    /// `SimpleChannel` lives in `n`).
    pub m: u32,
    /// Inner chain length / splitter count / arm count, by kind.
    pub n: u32,
    /// Logical bit the channel side encodes. Selects the default element on
    /// every channel path: 0 leaves paths free, 1 installs the kind's
    /// blocking element. Ignored by `SimpleChannel` and `NestedMzi3`.
    pub bit: u8,
    /// Per-path overrides on top of the bit defaults.
    pub elements: BTreeMap<PathId, Element>,
    /// Power loss of each outer-gap side mirror (`Salih` only). Defaults to
    /// the channel-blocked inner-chain survival deficit `1 - cos^2n(a)`.
    pub side_mirror_t3: Option<f64>,
}

impl NetworkSpec {
    fn new(kind: NetworkKind, m: u32, n: u32, bit: u8) -> Self {
        NetworkSpec {
            kind,
            m,
            n,
            bit,
            elements: BTreeMap::new(),
            side_mirror_t3: None,
        }
    }

    pub fn simple(n_arms: u32) -> Self {
        Self::new(NetworkKind::SimpleChannel, 1, n_arms, 0)
    }

    pub fn ifm_mzi(bit: u8) -> Self {
        Self::new(NetworkKind::IfmMzi, 1, 2, bit)
    }

    pub fn hwp_mzi(bit: u8) -> Self {
        Self::new(NetworkKind::HwpMzi, 1, 2, bit)
    }

    pub fn zeno(n: u32, bit: u8) -> Self {
        Self::new(NetworkKind::ZenoChain, 1, n, bit)
    }

    pub fn nested3(element: Element) -> Self {
        let mut s = Self::new(NetworkKind::NestedMzi3, 1, 3, 0);
        s.elements.insert(PathId::new(1, 1), element);
        s
    }

    pub fn salih(m: u32, n: u32, bit: u8) -> Self {
        Self::new(NetworkKind::Salih, m, n, bit)
    }

    pub fn li(m: u32, n: u32, bit: u8) -> Self {
        Self::new(NetworkKind::Li, m, n, bit)
    }

    pub fn with_element(mut self, path: PathId, element: Element) -> Self {
        self.elements.insert(path, element);
        self
    }

    pub fn with_side_mirror_t3(mut self, t3: f64) -> Self {
        self.side_mirror_t3 = Some(t3);
        self
    }

    /// Monitored channel paths, in tag order.
    pub fn channel_paths(&self) -> Vec<PathId> {
        match self.kind {
            NetworkKind::SimpleChannel => (1..=self.n as u16).map(|i| PathId::new(1, i)).collect(),
            NetworkKind::IfmMzi | NetworkKind::HwpMzi | NetworkKind::NestedMzi3 => {
                vec![PathId::new(1, 1)]
            }
            NetworkKind::ZenoChain => (1..self.n as u16).map(|n| PathId::new(1, n)).collect(),
            NetworkKind::Salih | NetworkKind::Li => {
                let mut v = Vec::new();
                for m in 1..self.m as u16 {
                    for n in 1..self.n as u16 {
                        v.push(PathId::new(m, n));
                    }
                }
                v
            }
        }
    }

    pub fn n_paths(&self) -> usize {
        self.channel_paths().len()
    }

    /// Detector that heralds successful protocol operation for this spec.
    pub fn default_detector(&self) -> PortId {
        match self.kind {
            NetworkKind::SimpleChannel | NetworkKind::NestedMzi3 => PortId::D1,
            NetworkKind::IfmMzi | NetworkKind::HwpMzi | NetworkKind::ZenoChain => {
                if self.bit == 0 {
                    PortId::D2
                } else {
                    PortId::D1
                }
            }
            NetworkKind::Salih | NetworkKind::Li => {
                if self.bit == 0 {
                    PortId::D1
                } else {
                    PortId::D2
                }
            }
        }
    }

    /// Element actually installed on `path` (override or bit default).
    pub fn element_at(&self, path: PathId) -> Element {
        if let Some(e) = self.elements.get(&path) {
            return *e;
        }
        if self.bit == 1 {
            match self.kind {
                NetworkKind::IfmMzi | NetworkKind::ZenoChain | NetworkKind::Salih => {
                    Element::Shutter
                }
                NetworkKind::HwpMzi | NetworkKind::Li => Element::Hwp,
                _ => Element::Free,
            }
        } else {
            Element::Free
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bit > 1 {
            return Err(Error::Config(format!(
                "bit must be 0 or 1, got {}",
                self.bit
            )));
        }
        if self.m > 60_000 || self.n > 60_000 {
            return Err(Error::Config("network dimension exceeds 60000".into()));
        }
        match self.kind {
            NetworkKind::SimpleChannel => {
                if self.n < 1 {
                    return Err(Error::Config(
                        "simple channel needs at least one arm".into(),
                    ));
                }
            }
            NetworkKind::IfmMzi | NetworkKind::HwpMzi => {
                if self.m != 1 || self.n != 2 {
                    return Err(Error::Config("mzi kinds are fixed at m=1, n=2".into()));
                }
            }
            NetworkKind::ZenoChain => {
                if self.m != 1 {
                    return Err(Error::Config("zeno chain has a single layer (m=1)".into()));
                }
                if self.n < 2 {
                    return Err(Error::Config("zeno chain needs n >= 2 splitters".into()));
                }
            }
            NetworkKind::NestedMzi3 => {
                if self.m != 1 || self.n != 3 {
                    return Err(Error::Config("nested3 is fixed at m=1, n=3".into()));
                }
            }
            NetworkKind::Salih => {
                if self.m < 2 || self.n < 2 {
                    return Err(Error::Config("salih needs m >= 2 and n >= 2".into()));
                }
            }
            NetworkKind::Li => {
                if self.m < 2 || self.n < 2 {
                    return Err(Error::Config("li needs m >= 2 and n >= 2".into()));
                }
                if !self.m.is_multiple_of(2) || !self.n.is_multiple_of(2) {
                    return Err(Error::Config("li needs even m and n".into()));
                }
            }
        }
        if let Some(t3) = self.side_mirror_t3 {
            if self.kind != NetworkKind::Salih {
                return Err(Error::Config(
                    "side_mirror_t3 applies to the salih kind only".into(),
                ));
            }
            if !(0.0..=1.0).contains(&t3) {
                return Err(Error::Config(format!(
                    "side_mirror_t3 must lie in [0, 1], got {t3}"
                )));
            }
        }
        let paths = self.channel_paths();
        for p in self.elements.keys() {
            if !paths.contains(p) {
                return Err(Error::Config(format!(
                    "element override on {p} which is not a channel path of this network"
                )));
            }
        }
        Ok(())
    }
}

/// A compiled network: op sequence plus metadata.
#[derive(Clone, Debug)]
pub struct Network {
    pub spec: NetworkSpec,
    pub ops: Vec<NetOp>,
    pub paths: Vec<PathId>,
    pub detectors: Vec<PortId>,
}

/// Compiles a spec into its op sequence.
pub fn build(spec: &NetworkSpec) -> Result<Network> {
    spec.validate()?;
    let mut ops = Vec::new();
    let detectors = match spec.kind {
        NetworkKind::SimpleChannel => build_simple(spec, &mut ops),
        NetworkKind::NestedMzi3 => build_nested3(spec, &mut ops),
        NetworkKind::IfmMzi | NetworkKind::HwpMzi | NetworkKind::ZenoChain => {
            build_chain(spec, &mut ops)
        }
        NetworkKind::Salih => build_salih(spec, &mut ops),
        NetworkKind::Li => build_li(spec, &mut ops),
    };
    Ok(Network {
        spec: spec.clone(),
        ops,
        paths: spec.channel_paths(),
        detectors,
    })
}

fn emit_element(spec: &NetworkSpec, ops: &mut Vec<NetOp>, port: PortId, path: PathId) {
    ops.push(NetOp::Tag { port, path });
    match spec.element_at(path) {
        Element::Free => {}
        Element::Shutter => ops.push(NetOp::Absorb {
            port,
            sink: PortId::Shutter {
                m: path.m,
                n: path.n,
            },
        }),
        Element::Hwp => ops.push(NetOp::Hwp { port }),
    }
}

/// Splitter chain on (Left, Right): covers `ZenoChain` and both MZI kinds.
fn build_chain(spec: &NetworkSpec, ops: &mut Vec<NetOp>) -> Vec<PortId> {
    let n = spec.n as u16;
    let alpha = std::f64::consts::FRAC_PI_2 / n as f64;
    // In the long chain a transmitted bit 1 means the sender blocks every
    // channel segment, the final lead to D2 included, so D2 stays exactly
    // dark. The two-splitter interferometers leave both detectors live.
    let block_lead = spec.bit == 1 && spec.kind == NetworkKind::ZenoChain;
    ops.push(NetOp::Rename {
        from: PortId::Source,
        to: PortId::Left,
    });
    for step in 1..=n {
        ops.push(NetOp::bs(PortId::Left, PortId::Right, alpha));
        if step < n {
            emit_element(spec, ops, PortId::Right, PathId::new(1, step));
        } else if block_lead {
            ops.push(NetOp::Absorb {
                port: PortId::Right,
                sink: PortId::FinalShutter,
            });
        }
    }
    ops.push(NetOp::Rename {
        from: PortId::Left,
        to: PortId::D1,
    });
    ops.push(NetOp::Rename {
        from: PortId::Right,
        to: PortId::D2,
    });
    vec![PortId::D1, PortId::D2]
}

fn build_salih(spec: &NetworkSpec, ops: &mut Vec<NetOp>) -> Vec<PortId> {
    let (m_total, n_inner) = (spec.m as u16, spec.n as u16);
    let b = std::f64::consts::FRAC_PI_2 / m_total as f64;
    let a = std::f64::consts::FRAC_PI_2 / n_inner as f64;
    let t3 = spec
        .side_mirror_t3
        .unwrap_or_else(|| 1.0 - a.cos().powi(2 * n_inner as i32));
    ops.push(NetOp::Rename {
        from: PortId::Source,
        to: PortId::Left,
    });
    for m in 1..=m_total {
        ops.push(NetOp::bs(PortId::Left, PortId::Right, b));
        if m < m_total {
            // The outer retained arm reflects off an imperfect mirror while
            // the channel side runs its inner chain.
            ops.push(NetOp::LossyMirror {
                port: PortId::Left,
                keep: (1.0 - t3).sqrt(),
                lose: t3.sqrt(),
                sink: PortId::MirrorLoss(m),
            });
            for n in 1..=n_inner {
                ops.push(NetOp::bs(PortId::Right, PortId::InnerRight, a));
                if n < n_inner {
                    emit_element(spec, ops, PortId::InnerRight, PathId::new(m, n));
                }
            }
            ops.push(NetOp::Absorb {
                port: PortId::InnerRight,
                sink: PortId::InnerOut(m),
            });
        }
    }
    ops.push(NetOp::Rename {
        from: PortId::Left,
        to: PortId::D1,
    });
    ops.push(NetOp::Rename {
        from: PortId::Right,
        to: PortId::D2,
    });
    vec![PortId::D1, PortId::D2]
}

fn build_li(spec: &NetworkSpec, ops: &mut Vec<NetOp>) -> Vec<PortId> {
    let (m_total, n_inner) = (spec.m as u16, spec.n as u16);
    let b = std::f64::consts::FRAC_PI_2 / m_total as f64;
    let a = std::f64::consts::PI / n_inner as f64;
    ops.push(NetOp::Rename {
        from: PortId::Source,
        to: PortId::Left,
    });
    for m in 1..=m_total {
        ops.push(NetOp::bs(PortId::Left, PortId::Right, b));
        if m < m_total {
            // The inner chain rotates by a full pi, returning the clean
            // channel amplitude to the outer arm (with a sign) instead of
            // dumping it; only probe-flagged residue reaches the gap sink.
            for n in 1..=n_inner {
                ops.push(NetOp::bs(PortId::Right, PortId::InnerRight, a));
                if n < n_inner {
                    emit_element(spec, ops, PortId::InnerRight, PathId::new(m, n));
                }
            }
            ops.push(NetOp::Absorb {
                port: PortId::InnerRight,
                sink: PortId::InnerOut(m),
            });
        }
    }
    ops.push(NetOp::Rename {
        from: PortId::Left,
        to: PortId::D1,
    });
    ops.push(NetOp::Rename {
        from: PortId::Right,
        to: PortId::D2,
    });
    vec![PortId::D1, PortId::D2]
}

/// Householder reflection sending arm 0 to the uniform superposition over
/// `k` arms (symmetric, orthogonal, and an involution).
fn householder_to_uniform(k: usize) -> Vec<f64> {
    let mut h = vec![0.0; k * k];
    let v = householder_axis(k);
    for i in 0..k {
        for j in 0..k {
            let id = if i == j { 1.0 } else { 0.0 };
            h[i * k + j] = id - 2.0 * v[i] * v[j];
        }
    }
    h
}

/// Unit axis of that reflection: `e_0 - uniform`, normalized. All zeros for
/// `k = 1`, where the reflection degenerates to the identity.
fn householder_axis(k: usize) -> Vec<f64> {
    let u = 1.0 / (k as f64).sqrt();
    let mut v: Vec<f64> = vec![-u; k];
    v[0] = 1.0 - u;
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-15 {
        return vec![0.0; k];
    }
    for x in v.iter_mut() {
        *x /= norm;
    }
    v
}

fn build_simple(spec: &NetworkSpec, ops: &mut Vec<NetOp>) -> Vec<PortId> {
    let k = spec.n as usize;
    let arms: Vec<PortId> = (0..k as u16).map(PortId::Channel).collect();
    // Rank-1 form: the reference channel is compared against networks with
    // thousands of crossings, so the fan-out must not cost a dense matrix.
    let axis = householder_axis(k);
    ops.push(NetOp::Rename {
        from: PortId::Source,
        to: PortId::Channel(0),
    });
    ops.push(NetOp::Reflect {
        ports: arms.clone(),
        axis: axis.clone(),
    });
    for i in 0..k as u16 {
        emit_element(spec, ops, PortId::Channel(i), PathId::new(1, i + 1));
    }
    // The same reflection folds the uniform state back onto arm 0.
    ops.push(NetOp::Reflect { ports: arms, axis });
    ops.push(NetOp::Rename {
        from: PortId::Channel(0),
        to: PortId::D1,
    });
    for i in 1..k as u16 {
        ops.push(NetOp::Rename {
            from: PortId::Channel(i),
            to: PortId::Reject(i - 1),
        });
    }
    vec![PortId::D1]
}

fn build_nested3(spec: &NetworkSpec, ops: &mut Vec<NetOp>) -> Vec<PortId> {
    let arms: Vec<PortId> = (0..3).map(PortId::Channel).collect();
    let s3 = 3.0f64.sqrt();
    let s6 = 6.0f64.sqrt();
    let s2 = 2.0f64.sqrt();
    // Output recombiner rows, orthonormal by construction: the first row is
    // blind to equal-weight sign flips on arms 1 and 2 but sees arm 0.
    let out = vec![
        1.0 / s3,
        -1.0 / s3,
        1.0 / s3,
        -1.0 / s6,
        1.0 / s6,
        s2 / s3,
        1.0 / s2,
        1.0 / s2,
        0.0,
    ];
    ops.push(NetOp::Rename {
        from: PortId::Source,
        to: PortId::Channel(0),
    });
    ops.push(NetOp::Mix {
        ports: arms.clone(),
        matrix: householder_to_uniform(3),
    });
    emit_element(spec, ops, PortId::Channel(0), PathId::new(1, 1));
    ops.push(NetOp::Mix {
        ports: arms,
        matrix: out,
    });
    ops.push(NetOp::Rename {
        from: PortId::Channel(0),
        to: PortId::D1,
    });
    ops.push(NetOp::Rename {
        from: PortId::Channel(1),
        to: PortId::D2,
    });
    ops.push(NetOp::Rename {
        from: PortId::Channel(2),
        to: PortId::D3,
    });
    vec![PortId::D1, PortId::D2, PortId::D3]
}

/// Clean forward and backward amplitudes at every channel tag, plus the
/// clean source-to-detector transfer amplitude.
#[derive(Clone, Debug)]
pub struct PathAmplitudeTable {
    pub detector: PortId,
    pub fwd: BTreeMap<PathId, f64>,
    pub bwd: BTreeMap<PathId, f64>,
    pub overlap: f64,
}

/// First-order post-selected probe metrics from the two-pass method.
#[derive(Clone, Debug)]
pub struct FirstOrderMetrics {
    pub detector: PortId,
    /// Probability of a click at `detector` (untagged plus tagged weight).
    pub postselect_prob: f64,
    /// Tagged fraction of the click probability.
    pub trace_detect_prob: f64,
    /// Damped no-tag amplitude reaching the detector.
    pub untagged_amp: Amplitude,
    /// Post-selected (unnormalized) tagged amplitude per channel path.
    pub tagged_amps: BTreeMap<PathId, Amplitude>,
}

impl Network {
    /// Forward propagation with no probe: a plain `ModeState`.
    pub fn propagate_clean(&self) -> ModeState {
        let mut st = ModeState::unit(PortId::Source);
        for op in &self.ops {
            apply_op(&mut st, op, Direction::Forward);
        }
        st
    }

    /// Brute-force branched propagation, first-order truncation.
    pub fn run_first_order(&self, eps: f64) -> BranchedState {
        let mut bs = BranchedState::new(ModeState::unit(PortId::Source), Truncation::FirstOrder);
        for op in &self.ops {
            bs.apply(op, eps);
        }
        bs
    }

    /// Full power-set branched propagation. Exponential in the number of
    /// channel paths, hence the hard limit.
    pub fn run_exact(&self, eps: f64) -> Result<BranchedState> {
        if self.paths.len() > EXACT_ORACLE_MAX_PATHS {
            return Err(Error::TooManyPaths {
                paths: self.paths.len(),
                limit: EXACT_ORACLE_MAX_PATHS,
            });
        }
        let mut bs = BranchedState::new(ModeState::unit(PortId::Source), Truncation::Exact);
        for op in &self.ops {
            bs.apply(op, eps);
        }
        Ok(bs)
    }

    /// Clean forward/backward amplitudes at every tag for a given detector.
    ///
    /// The backward amplitude at a tag is the detector unit state propagated
    /// through the transposed ops downstream of that tag; paths feeding an
    /// absorber get exactly zero.
    pub fn clean_table(&self, detector: PortId) -> PathAmplitudeTable {
        let mut fwd = BTreeMap::new();
        let mut st = ModeState::unit(PortId::Source);
        for op in &self.ops {
            if let Some((port, path)) = op.tag_target() {
                fwd.insert(path, st.amp(port).re);
            }
            apply_op(&mut st, op, Direction::Forward);
        }
        let overlap = st.amp(detector).re;

        let mut bwd = BTreeMap::new();
        let mut bw = ModeState::unit(detector);
        for op in self.ops.iter().rev() {
            if let Some((port, path)) = op.tag_target() {
                bwd.insert(path, bw.amp(port).re);
            } else {
                apply_op(&mut bw, op, Direction::Backward);
            }
        }
        PathAmplitudeTable {
            detector,
            fwd,
            bwd,
            overlap,
        }
    }

    /// First-order metrics without enumerating branches: the tagged
    /// amplitude reaching the detector from a coupling at path `p` is
    /// `eps * fwd_damped(p) * bwd_clean(p)`, where the damped forward pass
    /// applies the `sqrt(1-eps^2)` survival factor at every tag.
    pub fn first_order_metrics(&self, eps: f64, detector: PortId) -> FirstOrderMetrics {
        let keep = (1.0 - eps * eps).sqrt();
        let mut fwd_damped: BTreeMap<PathId, Amplitude> = BTreeMap::new();
        let mut st = ModeState::unit(PortId::Source);
        for op in &self.ops {
            if let Some((port, path)) = op.tag_target() {
                let a = st.amp(port);
                fwd_damped.insert(path, a);
                if eps != 0.0 {
                    st.set_amp(port, keep * a);
                }
            } else {
                apply_op(&mut st, op, Direction::Forward);
            }
        }
        let untagged_amp = st.amp(detector);

        let clean = self.clean_table(detector);
        let mut tagged_amps = BTreeMap::new();
        let mut tagged_weight = 0.0;
        for (path, f) in &fwd_damped {
            let b = clean.bwd.get(path).copied().unwrap_or(0.0);
            let amp = eps * f * b;
            tagged_weight += amp.norm_sqr();
            tagged_amps.insert(*path, amp);
        }
        let postselect_prob = untagged_amp.norm_sqr() + tagged_weight;
        let trace_detect_prob = if postselect_prob > 0.0 {
            tagged_weight / postselect_prob
        } else {
            0.0
        };
        FirstOrderMetrics {
            detector,
            postselect_prob,
            trace_detect_prob,
            untagged_amp,
            tagged_amps,
        }
    }
}

/// Simulation output: per-port probabilities and the final branched state.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub probs: BTreeMap<PortId, f64>,
    pub state: BranchedState,
}

/// Builds and runs `spec` under first-order probe truncation.
pub fn simulate(spec: &NetworkSpec, probe: &ProbeModel) -> Result<Simulation> {
    let net = build(spec)?;
    let state = net.run_first_order(probe.epsilon);
    Ok(Simulation {
        probs: state.port_probs(),
        state,
    })
}

/// Clean path-amplitude table for the protocol network kinds, taken at the
/// spec's heralding detector.
pub fn path_amplitudes(spec: &NetworkSpec) -> Result<PathAmplitudeTable> {
    match spec.kind {
        NetworkKind::ZenoChain | NetworkKind::NestedMzi3 | NetworkKind::Salih | NetworkKind::Li => {
        }
        other => return Err(Error::UnsupportedKind(other.to_string())),
    }
    let net = build(spec)?;
    Ok(net.clean_table(spec.default_detector()))
}

/// Full power-set probe expansion of a small network.
pub fn exact_oracle_simulate(spec: &NetworkSpec, eps: f64) -> Result<BranchedState> {
    let net = build(spec)?;
    net.run_exact(eps)
}

/// Channel pointer state conditioned on the bright detector D1 of the
/// three-arm network: returns the click probability and the conditional
/// branch set.
pub fn nested_mzi3_channel_state(
    element: Element,
    probe: &ProbeModel,
) -> Result<(f64, BranchedState)> {
    let sim = simulate(&NetworkSpec::nested3(element), probe)?;
    post_select(&sim.state, PortId::D1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::trace_detect_prob;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn probe(eps: f64) -> ProbeModel {
        ProbeModel::from_epsilon(eps).unwrap()
    }

    #[test]
    fn spec_validation_rejects_bad_shapes() {
        assert!(NetworkSpec::zeno(1, 0).validate().is_err());
        assert!(NetworkSpec::salih(1, 5, 0).validate().is_err());
        assert!(NetworkSpec::li(3, 8, 0).validate().is_err());
        assert!(NetworkSpec::li(8, 6, 2).validate().is_err());
        assert!(NetworkSpec::salih(4, 4, 0)
            .with_side_mirror_t3(1.5)
            .validate()
            .is_err());
        assert!(NetworkSpec::zeno(5, 0)
            .with_side_mirror_t3(0.1)
            .validate()
            .is_err());
        assert!(NetworkSpec::zeno(5, 0)
            .with_element(PathId::new(1, 7), Element::Shutter)
            .validate()
            .is_err());
        assert!(NetworkSpec::zeno(5, 0).validate().is_ok());
    }

    #[test]
    fn free_zeno_chain_crosses_fully() {
        let sim = simulate(&NetworkSpec::zeno(10, 0), &ProbeModel::off()).unwrap();
        assert_abs_diff_eq!(sim.probs[&PortId::D2], 1.0, epsilon = 1e-12);
        assert!(sim.probs.get(&PortId::D1).copied().unwrap_or(0.0) < 1e-30);
    }

    #[test]
    fn blocked_zeno_chain_survives_on_the_left() {
        let n = 10;
        let sim = simulate(&NetworkSpec::zeno(n, 1), &ProbeModel::off()).unwrap();
        let survival = (FRAC_PI_2 / n as f64).cos().powi(2 * n as i32);
        assert_abs_diff_eq!(sim.probs[&PortId::D1], survival, epsilon = 1e-12);
        assert_abs_diff_eq!(sim.probs[&PortId::D1], 0.7805460697811408, epsilon = 1e-12);
        // The shutter on the final channel lead keeps D2 exactly dark.
        assert_eq!(sim.probs.get(&PortId::D2), None);
        let absorbed: f64 = sim
            .probs
            .iter()
            .filter(|(p, _)| p.is_sink())
            .map(|(_, w)| w)
            .sum();
        assert_abs_diff_eq!(absorbed, 0.21945393021885917, epsilon = 1e-12);
        let total: f64 = sim.probs.values().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn blocked_mzi_splits_between_detectors_and_shutter() {
        let sim = simulate(&NetworkSpec::ifm_mzi(1), &ProbeModel::off()).unwrap();
        // Classic interaction-free split: 1/4 bright, 1/4 dark-port herald,
        // 1/2 absorbed.
        assert_abs_diff_eq!(sim.probs[&PortId::D1], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(sim.probs[&PortId::D2], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(
            sim.probs[&PortId::Shutter { m: 1, n: 1 }],
            0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn hwp_mzi_reroutes_without_loss() {
        let free = simulate(&NetworkSpec::hwp_mzi(0), &ProbeModel::off()).unwrap();
        assert_abs_diff_eq!(free.probs[&PortId::D2], 1.0, epsilon = 1e-12);
        let flipped = simulate(&NetworkSpec::hwp_mzi(1), &ProbeModel::off()).unwrap();
        assert_abs_diff_eq!(flipped.probs[&PortId::D1], 1.0, epsilon = 1e-12);
        assert!(flipped.probs.iter().all(|(p, _)| !p.is_sink()));
    }

    #[test]
    fn salih_blocked_channel_heralds_at_d2() {
        for (m, n) in [(2u32, 2u32), (3, 3), (4, 6), (8, 80)] {
            let sim = simulate(&NetworkSpec::salih(m, n, 1), &ProbeModel::off()).unwrap();
            let a = FRAC_PI_2 / n as f64;
            let expect = a.cos().powi((2 * (m - 1) * n) as i32);
            assert_abs_diff_eq!(sim.probs[&PortId::D2], expect, epsilon = 1e-12);
            // Perfect outer interference: D1 stays dark.
            assert!(sim.probs.get(&PortId::D1).copied().unwrap_or(0.0) < 1e-25);
            let total: f64 = sim.probs.values().sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn salih_free_channel_heralds_at_d1() {
        for (m, n) in [(2u32, 2u32), (3, 3), (4, 6), (16, 2000)] {
            let sim = simulate(&NetworkSpec::salih(m, n, 0), &ProbeModel::off()).unwrap();
            let a = FRAC_PI_2 / n as f64;
            let b = FRAC_PI_2 / m as f64;
            let expect = b.cos().powi(2 * m as i32) * a.cos().powi((2 * (m - 1) * n) as i32);
            assert_abs_diff_eq!(sim.probs[&PortId::D1], expect, epsilon = 1e-12);
            let total: f64 = sim.probs.values().sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn salih_free_large_example_value() {
        let sim = simulate(&NetworkSpec::salih(10, 1000, 0), &ProbeModel::off()).unwrap();
        assert_abs_diff_eq!(sim.probs[&PortId::D1], 0.7634038207139259, epsilon = 1e-12);
    }

    #[test]
    fn li_routes_both_bits_losslessly() {
        for (m, n) in [(2u32, 2u32), (2, 16), (8, 8), (16, 64)] {
            let free = simulate(&NetworkSpec::li(m, n, 0), &ProbeModel::off()).unwrap();
            assert_abs_diff_eq!(free.probs[&PortId::D1], 1.0, epsilon = 1e-12);
            let flipped = simulate(&NetworkSpec::li(m, n, 1), &ProbeModel::off()).unwrap();
            assert_abs_diff_eq!(flipped.probs[&PortId::D2], 1.0, epsilon = 1e-12);
            for sim in [&free, &flipped] {
                let sunk: f64 = sim
                    .probs
                    .iter()
                    .filter(|(p, _)| p.is_sink())
                    .map(|(_, w)| w)
                    .sum();
                assert!(sunk < 1e-12, "li should be lossless, sank {sunk}");
            }
        }
    }

    #[test]
    fn nested3_output_split_free_and_blocked() {
        let free = simulate(&NetworkSpec::nested3(Element::Free), &ProbeModel::off()).unwrap();
        assert_abs_diff_eq!(free.probs[&PortId::D1], 1.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(free.probs[&PortId::D2], 2.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(free.probs[&PortId::D3], 2.0 / 3.0, epsilon = 1e-12);

        let blocked =
            simulate(&NetworkSpec::nested3(Element::Shutter), &ProbeModel::off()).unwrap();
        assert!(blocked.probs.get(&PortId::D1).copied().unwrap_or(0.0) < 1e-25);
        assert_abs_diff_eq!(blocked.probs[&PortId::D2], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(blocked.probs[&PortId::D3], 1.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            blocked.probs[&PortId::Shutter { m: 1, n: 1 }],
            1.0 / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn simple_channel_recombines_perfectly() {
        for n in [1u32, 2, 4, 16] {
            let sim = simulate(&NetworkSpec::simple(n), &ProbeModel::off()).unwrap();
            assert_abs_diff_eq!(sim.probs[&PortId::D1], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn zeno_forward_amplitudes_are_chain_rotations() {
        for n in [2u32, 5, 10, 40] {
            let table = path_amplitudes(&NetworkSpec::zeno(n, 0)).unwrap();
            let a = FRAC_PI_2 / n as f64;
            for k in 1..n as u16 {
                let p = PathId::new(1, k);
                assert_abs_diff_eq!(table.fwd[&p], (k as f64 * a).sin(), epsilon = 1e-12);
                assert_abs_diff_eq!(
                    table.bwd[&p],
                    ((n as f64 - k as f64) * a).cos(),
                    epsilon = 1e-12
                );
            }
            assert_abs_diff_eq!(table.overlap, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn salih_forward_amplitudes_factor_across_layers() {
        for (m_total, n_inner) in [(3u32, 3u32), (4, 4), (8, 10), (20, 40)] {
            let table = path_amplitudes(&NetworkSpec::salih(m_total, n_inner, 0)).unwrap();
            let b = FRAC_PI_2 / m_total as f64;
            let a = FRAC_PI_2 / n_inner as f64;
            for m in 1..m_total as u16 {
                for n in 1..n_inner as u16 {
                    let p = PathId::new(m, n);
                    let fwd = a.cos().powi(((m as u32 - 1) * n_inner) as i32)
                        * b.cos().powi(m as i32 - 1)
                        * b.sin()
                        * (n as f64 * a).sin();
                    let bwd = a.cos().powi(((m_total - m as u32 - 1) * n_inner) as i32)
                        * b.cos().powi((m_total - m as u32 - 1) as i32)
                        * b.sin()
                        * ((n_inner as f64 - n as f64) * a).sin();
                    assert_abs_diff_eq!(table.fwd[&p], fwd, epsilon = 1e-10);
                    assert_abs_diff_eq!(table.bwd[&p], bwd, epsilon = 1e-10);
                }
            }
            let overlap =
                b.cos().powi(m_total as i32) * a.cos().powi(((m_total - 1) * n_inner) as i32);
            assert_abs_diff_eq!(table.overlap, overlap, epsilon = 1e-10);
        }
    }

    #[test]
    fn salih_blocked_paths_carry_no_backward_amplitude() {
        let table = path_amplitudes(&NetworkSpec::salih(3, 3, 1)).unwrap();
        for (p, f) in &table.fwd {
            assert!(*f > 0.0, "forward amplitude at {p} should be positive");
        }
        for b in table.bwd.values() {
            assert_abs_diff_eq!(*b, 0.0, epsilon = 1e-15);
        }
        let a = FRAC_PI_2 / 3.0;
        assert_abs_diff_eq!(table.overlap.abs(), a.cos().powi(6), epsilon = 1e-12);
    }

    #[test]
    fn li_amplitude_magnitudes_follow_parity_selection() {
        for (m_total, n_inner) in [(2u32, 2u32), (4, 4), (8, 8), (4, 16)] {
            let bo = FRAC_PI_2 / m_total as f64;
            let ai = PI / n_inner as f64;

            let t0 = path_amplitudes(&NetworkSpec::li(m_total, n_inner, 0)).unwrap();
            assert_abs_diff_eq!(t0.overlap.abs(), 1.0, epsilon = 1e-12);
            for m in 1..m_total as u16 {
                for n in 1..n_inner as u16 {
                    let p = PathId::new(m, n);
                    let expect = if m % 2 == 1 {
                        bo.sin() * (n as f64 * ai).sin()
                    } else {
                        0.0
                    };
                    assert_abs_diff_eq!(t0.fwd[&p].abs(), expect.abs(), epsilon = 1e-10);
                }
            }

            let t1 = path_amplitudes(&NetworkSpec::li(m_total, n_inner, 1)).unwrap();
            assert_abs_diff_eq!(t1.overlap.abs(), 1.0, epsilon = 1e-12);
            for m in 1..m_total as u16 {
                for n in 1..n_inner as u16 {
                    let p = PathId::new(m, n);
                    let expect = if n % 2 == 1 {
                        (m as f64 * bo).sin() * ai.sin()
                    } else {
                        0.0
                    };
                    assert_abs_diff_eq!(t1.fwd[&p].abs(), expect.abs(), epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn path_amplitudes_guards_unsupported_kinds() {
        assert!(matches!(
            path_amplitudes(&NetworkSpec::simple(4)),
            Err(Error::UnsupportedKind(_))
        ));
        assert!(matches!(
            path_amplitudes(&NetworkSpec::ifm_mzi(0)),
            Err(Error::UnsupportedKind(_))
        ));
    }

    #[test]
    fn two_pass_metrics_match_brute_force() {
        let eps = 0.05;
        let cases = vec![
            NetworkSpec::zeno(5, 0),
            NetworkSpec::zeno(5, 1),
            NetworkSpec::ifm_mzi(0),
            NetworkSpec::hwp_mzi(1),
            NetworkSpec::salih(3, 3, 0),
            NetworkSpec::salih(3, 3, 1),
            NetworkSpec::li(4, 4, 0),
            NetworkSpec::li(4, 4, 1),
            NetworkSpec::nested3(Element::Free),
            NetworkSpec::nested3(Element::Hwp),
            NetworkSpec::simple(3),
        ];
        for spec in cases {
            let det = spec.default_detector();
            let net = build(&spec).unwrap();
            let fast = net.first_order_metrics(eps, det);
            let brute = net.run_first_order(eps);

            let mut brute_prob = brute.untagged.amp(det).norm_sqr();
            for (tags, st) in &brute.tagged {
                let path = *tags.iter().next().unwrap();
                let amp = st.amp(det);
                brute_prob += amp.norm_sqr();
                let fast_amp = fast.tagged_amps.get(&path).copied().unwrap_or_default();
                assert_abs_diff_eq!((amp - fast_amp).norm(), 0.0, epsilon = 1e-12);
            }
            assert_abs_diff_eq!(fast.postselect_prob, brute_prob, epsilon = 1e-12);

            let (prob, cond) = post_select(&brute, det).unwrap();
            assert_abs_diff_eq!(prob, fast.postselect_prob, epsilon = 1e-12);
            assert_abs_diff_eq!(
                trace_detect_prob(&cond),
                fast.trace_detect_prob,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn exact_oracle_conserves_weight_and_caps_paths() {
        let bs = exact_oracle_simulate(&NetworkSpec::salih(4, 5, 0), 0.05).unwrap();
        assert_abs_diff_eq!(bs.total_weight(), 1.0, epsilon = 1e-10);
        assert!(matches!(
            exact_oracle_simulate(&NetworkSpec::salih(5, 5, 0), 0.05),
            Err(Error::TooManyPaths { paths: 16, .. })
        ));
    }

    #[test]
    fn first_order_stays_close_to_exact_at_small_eps() {
        let eps = 0.01;
        let spec = NetworkSpec::zeno(5, 0);
        let net = build(&spec).unwrap();
        let first = net.run_first_order(eps);
        let exact = net.run_exact(eps).unwrap();
        let det = spec.default_detector();
        for (tags, st) in &exact.tagged {
            if tags.len() != 1 {
                // Multi-tag branches are O(eps^2) in amplitude.
                assert!(st.total_weight() < eps.powi(4) * 10.0);
                continue;
            }
            let path = *tags.iter().next().unwrap();
            let f = first.single_tag_branch(path).unwrap().amp(det);
            let e = st.amp(det);
            assert!((f - e).norm() <= 1e-3 * e.norm().max(1e-12));
        }
    }

    #[test]
    fn nested_channel_state_is_the_probe_split() {
        let eps = 0.23;
        let (prob, cond) = nested_mzi3_channel_state(Element::Free, &probe(eps)).unwrap();
        assert_abs_diff_eq!(prob, 1.0 / 9.0, epsilon = 1e-12);
        let keep = (1.0f64 - eps * eps).sqrt();
        assert_abs_diff_eq!(cond.untagged.amp(PortId::D1).re, keep, epsilon = 1e-12);
        let tagged = cond.single_tag_branch(PathId::new(1, 1)).unwrap();
        assert_abs_diff_eq!(tagged.amp(PortId::D1).re, eps, epsilon = 1e-12);

        // A shuttered arm makes the bright port strictly dark: conditioning
        // on it must fail.
        assert!(nested_mzi3_channel_state(Element::Shutter, &probe(eps)).is_err());
    }

    #[test]
    fn element_overrides_change_single_paths() {
        // Blocking just one early path of a free chain absorbs weight but
        // leaves some transmission.
        let spec = NetworkSpec::zeno(4, 0).with_element(PathId::new(1, 1), Element::Shutter);
        let sim = simulate(&spec, &ProbeModel::off()).unwrap();
        let a = FRAC_PI_2 / 4.0;
        assert_abs_diff_eq!(
            sim.probs[&PortId::Shutter { m: 1, n: 1 }],
            a.sin().powi(2),
            epsilon = 1e-12
        );
        let total: f64 = sim.probs.values().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn salih_side_mirror_t3_override_is_used() {
        // Perfect mirrors: bit-0 keeps the full outer-arm norm through the
        // gaps, so D1 improves to cos^2m(b).
        let spec = NetworkSpec::salih(4, 4, 0).with_side_mirror_t3(0.0);
        let sim = simulate(&spec, &ProbeModel::off()).unwrap();
        let b = FRAC_PI_2 / 4.0;
        assert_abs_diff_eq!(sim.probs[&PortId::D1], b.cos().powi(8), epsilon = 1e-12);
    }
}
