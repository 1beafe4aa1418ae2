//! Single-photon mode algebra: named ports, complex amplitudes, and the
//! elementary optical operations (beam splitters, mixers, phase plates,
//! absorbers, lossy mirrors).
//!
//! Every operation is represented as an orthogonal map on the full port
//! vector (absorbers are completed to swaps with their sink, lossy mirrors
//! to rotations into their sink), so total weight is conserved exactly and
//! the transposed map is the correct backward propagator.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Amplitude = Complex64;

/// Identifier of one crossing of the transmission channel: outer gap `m`,
/// inner step `n`. Single-layer networks use `m = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathId {
    pub m: u16,
    pub n: u16,
}

impl PathId {
    pub fn new(m: u16, n: u16) -> Self {
        PathId { m, n }
    }
}

impl fmt::Display for PathId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.m, self.n)
    }
}

impl FromStr for PathId {
    type Err = Error;

    /// Parses `"m,n"` (as used by `--element` and `--eve-path`).
    fn from_str(s: &str) -> Result<Self> {
        let (m, n) = s
            .split_once(',')
            .ok_or_else(|| Error::Usage(format!("path id must be `m,n`, got `{s}`")))?;
        let parse = |t: &str| -> Result<u16> {
            t.trim()
                .parse()
                .map_err(|_| Error::Usage(format!("path id must be `m,n`, got `{s}`")))
        };
        Ok(PathId::new(parse(m)?, parse(n)?))
    }
}

/// A spatial mode of the interferometer. Sink variants hold weight that has
/// left the interfering part of the network for good.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PortId {
    /// Photon injection port.
    Source,
    /// Left (sender-side) arm of the current splitter stage.
    Left,
    /// Right arm: the transmission-channel side.
    Right,
    /// Right arm of an inner chain nested inside an outer right arm.
    InnerRight,
    /// Parallel channel arm `i` (multi-arm networks and the reference
    /// single-splitter channel).
    Channel(u16),
    D1,
    D2,
    D3,
    /// Orthogonal leftover output of a multi-port recombiner.
    Reject(u16),
    /// Absorber sitting on channel path `(m,n)`.
    Shutter {
        m: u16,
        n: u16,
    },
    /// Absorber on the final channel lead of a blocked splitter chain.
    FinalShutter,
    /// Loss port of the imperfect side mirror in outer gap `m`.
    MirrorLoss(u16),
    /// Discarded inner-chain exit in outer gap `m`.
    InnerOut(u16),
    /// Generic absorber used by the standalone shutter operation.
    Absorbed(u16),
}

impl PortId {
    pub fn is_sink(&self) -> bool {
        matches!(
            self,
            PortId::Shutter { .. }
                | PortId::FinalShutter
                | PortId::MirrorLoss(_)
                | PortId::InnerOut(_)
                | PortId::Absorbed(_)
        )
    }

    pub fn is_detector(&self) -> bool {
        matches!(self, PortId::D1 | PortId::D2 | PortId::D3)
    }
}

impl fmt::Display for PortId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PortId::Source => write!(f, "src"),
            PortId::Left => write!(f, "L"),
            PortId::Right => write!(f, "R"),
            PortId::InnerRight => write!(f, "IR"),
            PortId::Channel(i) => write!(f, "ch{i}"),
            PortId::D1 => write!(f, "D1"),
            PortId::D2 => write!(f, "D2"),
            PortId::D3 => write!(f, "D3"),
            PortId::Reject(i) => write!(f, "rej{i}"),
            PortId::Shutter { m, n } => write!(f, "shutter({m},{n})"),
            PortId::FinalShutter => write!(f, "shutter(final)"),
            PortId::MirrorLoss(m) => write!(f, "mirror_loss({m})"),
            PortId::InnerOut(m) => write!(f, "inner_out({m})"),
            PortId::Absorbed(i) => write!(f, "absorbed{i}"),
        }
    }
}

/// Two-port beam splitter with mixing angle `alpha`:
/// `L' = L cos a - R sin a`, `R' = L sin a + R cos a`.
#[derive(Clone, Copy, Debug)]
pub struct BeamSplitter {
    pub alpha: f64,
    pub left: PortId,
    pub right: PortId,
}

impl BeamSplitter {
    pub fn new(alpha: f64, left: PortId, right: PortId) -> Self {
        BeamSplitter { alpha, left, right }
    }

    /// Probability of crossing from one arm to the other.
    pub fn transmittance(&self) -> f64 {
        self.alpha.sin().powi(2)
    }
}

/// Sparse amplitude vector over declared ports. A port is part of the state
/// once an entry exists for it, even with zero amplitude; operations refuse
/// to act on undeclared ports.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModeState {
    amps: BTreeMap<PortId, Amplitude>,
}

impl ModeState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Unit amplitude on a single port.
    pub fn unit(port: PortId) -> Self {
        let mut s = ModeState::new();
        s.set_amp(port, Amplitude::new(1.0, 0.0));
        s
    }

    pub fn from_amps<I: IntoIterator<Item = (PortId, Amplitude)>>(iter: I) -> Self {
        ModeState {
            amps: iter.into_iter().collect(),
        }
    }

    pub fn contains(&self, port: PortId) -> bool {
        self.amps.contains_key(&port)
    }

    /// Amplitude at `port`; zero if the port is not declared.
    pub fn amp(&self, port: PortId) -> Amplitude {
        self.amps.get(&port).copied().unwrap_or_default()
    }

    /// Sets (and declares) the amplitude at `port`.
    pub fn set_amp(&mut self, port: PortId, amp: Amplitude) {
        self.amps.insert(port, amp);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PortId, &Amplitude)> {
        self.amps.iter()
    }

    pub fn ports(&self) -> impl Iterator<Item = &PortId> {
        self.amps.keys()
    }

    /// Total weight `sum |amp|^2` over all ports, sinks included.
    pub fn total_weight(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    /// Weight restricted to sink ports.
    pub fn sink_weight(&self) -> f64 {
        self.amps
            .iter()
            .filter(|(p, _)| p.is_sink())
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Drops entries with negligible weight; declared structure is not
    /// needed once propagation has finished.
    pub fn prune(&mut self, floor: f64) {
        self.amps.retain(|_, a| a.norm_sqr() > floor);
    }

    fn require(&self, port: PortId) -> Result<()> {
        if !self.contains(port) {
            return Err(Error::Config(format!("port `{port}` not present in state")));
        }
        Ok(())
    }

    fn require_live(&self, port: PortId) -> Result<()> {
        self.require(port)?;
        if port.is_sink() {
            return Err(Error::Config(format!(
                "port `{port}` is a loss sink and cannot be operated on"
            )));
        }
        Ok(())
    }
}

/// Propagation direction. `Backward` applies the transposed map, which is
/// the correct retrodictive propagator for these real orthogonal elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// One element of a compiled network, applied in sequence to a `ModeState`.
#[derive(Clone, Debug)]
pub enum NetOp {
    /// Beam splitter with precomputed `cos`/`sin` of the mixing angle.
    Bs {
        left: PortId,
        right: PortId,
        cos: f64,
        sin: f64,
    },
    /// Dense orthogonal mixer over `ports` (row-major `k x k` matrix).
    Mix {
        ports: Vec<PortId>,
        matrix: Vec<f64>,
    },
    /// Householder reflection `x -> x - 2 (axis . x) axis` over `ports`,
    /// stored as its unit axis: O(k) to apply where the dense form is
    /// O(k^2), and symmetric, so it is its own transpose. An all-zero axis
    /// is the identity.
    Reflect { ports: Vec<PortId>, axis: Vec<f64> },
    /// Half-wave plate: sign flip on one port.
    Hwp { port: PortId },
    /// Total absorber: moves the port amplitude into `sink` (a swap, so the
    /// transposed op feeds the sink's vacuum back — blocked paths carry no
    /// backward amplitude).
    Absorb { port: PortId, sink: PortId },
    /// Side mirror with power loss `lose^2` into `sink`.
    LossyMirror {
        port: PortId,
        keep: f64,
        lose: f64,
        sink: PortId,
    },
    /// Relabels a mode (swap with a fresh port).
    Rename { from: PortId, to: PortId },
    /// Probe coupling marker on channel path `path`; inert at this layer,
    /// interpreted by the branching propagators.
    Tag { port: PortId, path: PathId },
}

impl NetOp {
    pub fn bs(left: PortId, right: PortId, alpha: f64) -> Self {
        NetOp::Bs {
            left,
            right,
            cos: alpha.cos(),
            sin: alpha.sin(),
        }
    }

    /// The port a probe tag couples to, if this op is a tag.
    pub fn tag_target(&self) -> Option<(PortId, PathId)> {
        match self {
            NetOp::Tag { port, path } => Some((*port, *path)),
            _ => None,
        }
    }
}

/// Applies `op` in place. Ports referenced by an op are declared on first
/// use (networks start from a bare source port).
pub fn apply_op(state: &mut ModeState, op: &NetOp, dir: Direction) {
    match op {
        NetOp::Bs {
            left,
            right,
            cos,
            sin,
        } => {
            let s = match dir {
                Direction::Forward => *sin,
                Direction::Backward => -*sin,
            };
            let al = state.amp(*left);
            let ar = state.amp(*right);
            state.set_amp(*left, al * *cos - ar * s);
            state.set_amp(*right, al * s + ar * *cos);
        }
        NetOp::Mix { ports, matrix } => {
            let k = ports.len();
            let old: Vec<Amplitude> = ports.iter().map(|p| state.amp(*p)).collect();
            for (i, p) in ports.iter().enumerate() {
                let mut acc = Amplitude::default();
                for (j, a) in old.iter().enumerate() {
                    let m = match dir {
                        Direction::Forward => matrix[i * k + j],
                        Direction::Backward => matrix[j * k + i],
                    };
                    acc += m * a;
                }
                state.set_amp(*p, acc);
            }
        }
        NetOp::Reflect { ports, axis } => {
            let mut dot = Amplitude::default();
            for (p, x) in ports.iter().zip(axis) {
                dot += *x * state.amp(*p);
            }
            for (p, x) in ports.iter().zip(axis) {
                let a = state.amp(*p);
                state.set_amp(*p, a - 2.0 * dot * *x);
            }
        }
        NetOp::Hwp { port } => {
            let a = state.amp(*port);
            state.set_amp(*port, -a);
        }
        NetOp::Absorb { port, sink }
        | NetOp::Rename {
            from: port,
            to: sink,
        } => {
            let a = state.amp(*port);
            let b = state.amp(*sink);
            state.set_amp(*port, b);
            state.set_amp(*sink, a);
        }
        NetOp::LossyMirror {
            port,
            keep,
            lose,
            sink,
        } => {
            let l = match dir {
                Direction::Forward => *lose,
                Direction::Backward => -*lose,
            };
            let a = state.amp(*port);
            let b = state.amp(*sink);
            state.set_amp(*port, a * *keep - b * l);
            state.set_amp(*sink, a * l + b * *keep);
        }
        NetOp::Tag { .. } => {}
    }
}

fn fresh_index<F: Fn(u16) -> PortId>(state: &ModeState, make: F) -> PortId {
    let mut k = 0u16;
    loop {
        let p = make(k);
        if !state.contains(p) {
            return p;
        }
        k += 1;
    }
}

/// Applies a two-port beam splitter. Both ports must already be declared
/// and must not be loss sinks.
pub fn apply_beam_splitter(state: &ModeState, bs: &BeamSplitter) -> Result<ModeState> {
    state.require_live(bs.left)?;
    state.require_live(bs.right)?;
    if bs.left == bs.right {
        return Err(Error::Config("beam splitter ports must differ".into()));
    }
    if !bs.alpha.is_finite() {
        return Err(Error::Domain("beam splitter angle must be finite".into()));
    }
    let mut out = state.clone();
    apply_op(
        &mut out,
        &NetOp::bs(bs.left, bs.right, bs.alpha),
        Direction::Forward,
    );
    Ok(out)
}

/// `n` successive identical beam splitters on `(Left, Right)`; equals a
/// single rotation by `n * alpha`.
pub fn chain_evolve(state: &ModeState, alpha: f64, n: u32) -> Result<ModeState> {
    let bs = BeamSplitter::new(alpha, PortId::Left, PortId::Right);
    let mut s = state.clone();
    for _ in 0..n {
        s = apply_beam_splitter(&s, &bs)?;
    }
    Ok(s)
}

/// Imperfect mirror on `port`: keeps `sqrt(1 - t3)` of the amplitude and
/// diverts `sqrt(t3)` into a fresh mirror-loss sink.
pub fn apply_lossy_mirror(state: &ModeState, port: PortId, t3: f64) -> Result<ModeState> {
    state.require_live(port)?;
    if !(0.0..=1.0).contains(&t3) {
        return Err(Error::Domain(format!(
            "mirror loss must lie in [0, 1], got {t3}"
        )));
    }
    let mut out = state.clone();
    let sink = fresh_index(&out, PortId::MirrorLoss);
    out.set_amp(sink, Amplitude::default());
    apply_op(
        &mut out,
        &NetOp::LossyMirror {
            port,
            keep: (1.0 - t3).sqrt(),
            lose: t3.sqrt(),
            sink,
        },
        Direction::Forward,
    );
    Ok(out)
}

/// Half-wave plate on `port`: flips the amplitude sign.
pub fn apply_hwp_phase(state: &ModeState, port: PortId) -> Result<ModeState> {
    state.require_live(port)?;
    let mut out = state.clone();
    apply_op(&mut out, &NetOp::Hwp { port }, Direction::Forward);
    Ok(out)
}

/// Opaque shutter on `port`: the full amplitude moves into a fresh absorber
/// sink and never re-interferes.
pub fn apply_shutter(state: &ModeState, port: PortId) -> Result<ModeState> {
    state.require_live(port)?;
    let mut out = state.clone();
    let sink = fresh_index(&out, PortId::Absorbed);
    out.set_amp(sink, Amplitude::default());
    apply_op(&mut out, &NetOp::Absorb { port, sink }, Direction::Forward);
    Ok(out)
}
