//! Eavesdropper analysis: presence probes placed on channel paths, the
//! joint click/outcome statistics they induce, and a sampled key-agreement
//! protocol built on blocked/free splitter chains.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mode::{apply_op, Direction, ModeState, PathId, PortId};
use crate::networks::{build, simulate, Network, NetworkKind, NetworkSpec};
use crate::trace::ProbeModel;

/// How the adversary monitors the channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EveMode {
    /// Weak coupling of strength `epsilon`, same model as the legitimate
    /// probe.
    Weak,
    /// Projective which-path measurement: a crossing photon always clicks.
    Projective,
}

impl fmt::Display for EveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EveMode::Weak => "weak",
            EveMode::Projective => "projective",
        })
    }
}

impl FromStr for EveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "weak" => EveMode::Weak,
            "projective" => EveMode::Projective,
            other => {
                return Err(Error::Usage(format!(
                    "unknown eve mode `{other}` (expected weak|projective)"
                )))
            }
        })
    }
}

/// Where the adversary sits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EveLocation {
    /// A single channel path.
    Path(PathId),
    /// Every channel path of one outer gap (a whole inner chain).
    Gap(u16),
}

/// An adversarial presence probe.
#[derive(Clone, Copy, Debug)]
pub struct EveProbe {
    pub location: EveLocation,
    pub mode: EveMode,
    pub epsilon: f64,
}

impl EveProbe {
    pub fn weak(location: EveLocation, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Domain(format!(
                "eve coupling must lie in [0, 1], got {epsilon}"
            )));
        }
        Ok(EveProbe {
            location,
            mode: EveMode::Weak,
            epsilon,
        })
    }

    pub fn projective(location: EveLocation) -> Self {
        EveProbe {
            location,
            mode: EveMode::Projective,
            epsilon: 1.0,
        }
    }

    /// Coupling actually applied: a projective measurement is the `eps = 1`
    /// limit of the weak probe.
    pub fn effective_epsilon(&self) -> f64 {
        match self.mode {
            EveMode::Weak => self.epsilon,
            EveMode::Projective => 1.0,
        }
    }

    pub fn covers(&self, path: PathId) -> bool {
        match self.location {
            EveLocation::Path(p) => p == path,
            EveLocation::Gap(m) => path.m == m,
        }
    }
}

/// Where a run of the network ends up.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    D1,
    D2,
    D3,
    Absorbed,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::D1 => "D1",
            Outcome::D2 => "D2",
            Outcome::D3 => "D3",
            Outcome::Absorbed => "absorbed",
        })
    }
}

fn port_outcome(port: PortId) -> Outcome {
    match port {
        PortId::D1 => Outcome::D1,
        PortId::D2 => Outcome::D2,
        PortId::D3 => Outcome::D3,
        _ => Outcome::Absorbed,
    }
}

/// Joint probability of (adversary clicked, photon outcome).
#[derive(Clone, Debug, Default)]
pub struct JointDistribution {
    pub probs: BTreeMap<(bool, Outcome), f64>,
}

impl JointDistribution {
    pub fn p(&self, clicked: bool, outcome: Outcome) -> f64 {
        self.probs.get(&(clicked, outcome)).copied().unwrap_or(0.0)
    }

    pub fn p_click(&self) -> f64 {
        self.probs
            .iter()
            .filter(|((c, _), _)| *c)
            .map(|(_, v)| v)
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    fn add(&mut self, clicked: bool, outcome: Outcome, w: f64) {
        if w != 0.0 {
            *self.probs.entry((clicked, outcome)).or_insert(0.0) += w;
        }
    }
}

/// Propagates one localized packet from `start` to the end of the op list,
/// spawning click packets at every covered tag and depositing terminal
/// weight into `dist`.
#[allow(clippy::too_many_arguments)]
fn run_packet(
    net: &Network,
    eve: &EveProbe,
    eps: f64,
    keep: f64,
    start: usize,
    init: ModeState,
    w: f64,
    clicked: bool,
    spawn: &mut BTreeMap<(usize, PortId), f64>,
    dist: &mut JointDistribution,
) {
    let mut st = init;
    for (i, op) in net.ops.iter().enumerate().skip(start) {
        if let Some((port, path)) = op.tag_target() {
            if eve.covers(path) {
                let a = st.amp(port);
                let wk = w * eps * eps * a.norm_sqr();
                if wk > 0.0 {
                    *spawn.entry((i, port)).or_insert(0.0) += wk;
                    st.set_amp(port, keep * a);
                }
            }
        } else {
            apply_op(&mut st, op, Direction::Forward);
        }
    }
    let mut by_outcome: BTreeMap<Outcome, f64> = BTreeMap::new();
    for (port, amp) in st.iter() {
        *by_outcome.entry(port_outcome(*port)).or_insert(0.0) += amp.norm_sqr();
    }
    for (outcome, weight) in by_outcome {
        dist.add(clicked, outcome, w * weight);
    }
}

/// Exact joint click/outcome distribution for an adversary on a shuttered
/// chain network, any coupling strength.
///
/// Incoherent worklist over click events: a packet that clicks at `(op,
/// port)` restarts localized there, so packets sharing that key can merge
/// their weights (their pointer records are orthogonal to everyone else's).
/// Spawns only point forward, so popping keys in increasing op order
/// processes each at most once, after all of its contributors.
pub fn eve_joint_distribution(spec: &NetworkSpec, eve: &EveProbe) -> Result<JointDistribution> {
    match spec.kind {
        NetworkKind::ZenoChain | NetworkKind::Salih => {}
        other => return Err(Error::UnsupportedKind(other.to_string())),
    }
    let eps = eve.effective_epsilon();
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::Domain(format!(
            "eve coupling must lie in [0, 1], got {eps}"
        )));
    }
    let keep = (1.0 - eps * eps).sqrt();
    let net = build(spec)?;
    let mut spawn: BTreeMap<(usize, PortId), f64> = BTreeMap::new();
    let mut dist = JointDistribution::default();
    run_packet(
        &net,
        eve,
        eps,
        keep,
        0,
        ModeState::unit(PortId::Source),
        1.0,
        false,
        &mut spawn,
        &mut dist,
    );
    while let Some(((i, port), w)) = spawn.pop_first() {
        run_packet(
            &net,
            eve,
            eps,
            keep,
            i + 1,
            ModeState::unit(port),
            w,
            true,
            &mut spawn,
            &mut dist,
        );
    }
    Ok(dist)
}

/// Adversary configuration for the key-agreement simulation. She monitors
/// every channel path of the chain.
#[derive(Clone, Copy, Debug)]
pub struct KeydistEve {
    pub mode: EveMode,
    pub epsilon: f64,
}

impl KeydistEve {
    pub fn effective_epsilon(&self) -> f64 {
        match self.mode {
            EveMode::Weak => self.epsilon,
            EveMode::Projective => 1.0,
        }
    }
}

/// Tally of a sampled key-agreement run.
#[derive(Clone, Debug)]
pub struct KeyReport {
    pub chain_n: u32,
    pub rounds: u64,
    pub seed: u64,
    pub eve: bool,
    /// Rounds heralded into the key (detector D1).
    pub announced: u64,
    pub announced_rate: f64,
    /// Announced rounds whose bits disagree.
    pub errors: u64,
    /// Errors per announced round.
    pub error_rate: f64,
    pub eve_clicks: u64,
    pub clicked_announced: u64,
    pub clicked_announced_errors: u64,
    /// Plug-in mutual information (bits) between the adversary's click and
    /// the error indicator, over announced rounds.
    pub mi_click_error_bits: f64,
}

/// Cumulative sampling table over the strictly positive cells.
struct OutcomeSampler {
    cumulative: Vec<((bool, Outcome), f64)>,
}

impl OutcomeSampler {
    fn new(dist: &JointDistribution) -> Self {
        let mut acc = 0.0;
        let mut cumulative = Vec::new();
        for (k, v) in &dist.probs {
            if *v > 0.0 {
                acc += v;
                cumulative.push((*k, acc));
            }
        }
        OutcomeSampler { cumulative }
    }

    /// Total mass is 1 up to rounding; a draw past the last edge takes the
    /// last cell.
    fn sample(&self, u: f64) -> (bool, Outcome) {
        for (k, edge) in &self.cumulative {
            if u < *edge {
                return *k;
            }
        }
        self.cumulative
            .last()
            .map(|(k, _)| *k)
            .expect("outcome distribution is never empty")
    }
}

fn no_eve_distribution(spec: &NetworkSpec) -> Result<JointDistribution> {
    let sim = simulate(spec, &ProbeModel::off())?;
    let mut dist = JointDistribution::default();
    for (port, p) in sim.probs {
        dist.add(false, port_outcome(port), p);
    }
    Ok(dist)
}

fn plug_in_mi_bits(counts: [[u64; 2]; 2]) -> f64 {
    let total: u64 = counts.iter().flatten().sum();
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    let row: Vec<f64> = (0..2)
        .map(|i| (counts[i][0] + counts[i][1]) as f64 / t)
        .collect();
    let col: Vec<f64> = (0..2)
        .map(|j| (counts[0][j] + counts[1][j]) as f64 / t)
        .collect();
    let mut mi = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let p = counts[i][j] as f64 / t;
            if p > 0.0 && row[i] > 0.0 && col[j] > 0.0 {
                mi += p * (p / (row[i] * col[j])).log2();
            }
        }
    }
    mi.max(0.0)
}

/// Samples the chained-interferometer key-agreement protocol.
///
/// Each round both parties draw a random bit; equal bits block every channel
/// path of a fresh chain, unequal bits leave it free. A round is announced
/// into the key exactly when D1 fires, which a free chain never does on its
/// own — only an intercepting adversary can push free rounds into the key,
/// and those all carry bit disagreements.
///
/// Reproducible: round `i` uses stream `i` of a ChaCha generator seeded with
/// `seed`, so reports are independent of iteration order and machine.
pub fn keydist_simulate(
    chain_n: u32,
    rounds: u64,
    seed: u64,
    eve: Option<&KeydistEve>,
) -> Result<KeyReport> {
    let dist_for = |bit: u8| -> Result<JointDistribution> {
        let spec = NetworkSpec::zeno(chain_n, bit);
        match eve {
            Some(e) => {
                let probe = EveProbe {
                    location: EveLocation::Gap(1),
                    mode: e.mode,
                    epsilon: e.epsilon,
                };
                eve_joint_distribution(&spec, &probe)
            }
            None => no_eve_distribution(&spec),
        }
    };
    // Blocked chains encode equal bits; free chains unequal ones.
    let blocked = OutcomeSampler::new(&dist_for(1)?);
    let free = OutcomeSampler::new(&dist_for(0)?);

    let mut announced = 0u64;
    let mut errors = 0u64;
    let mut eve_clicks = 0u64;
    let mut clicked_announced = 0u64;
    let mut clicked_announced_errors = 0u64;
    // counts[click][error] over announced rounds, for the leak estimate.
    let mut counts = [[0u64; 2]; 2];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for round in 0..rounds {
        rng.set_stream(round);
        rng.set_word_pos(0);
        let a: bool = rng.gen();
        let b: bool = rng.gen();
        let sampler = if a == b { &blocked } else { &free };
        let (clicked, outcome) = sampler.sample(rng.gen::<f64>());
        if clicked {
            eve_clicks += 1;
        }
        if outcome == Outcome::D1 {
            announced += 1;
            let err = a != b;
            if err {
                errors += 1;
            }
            if clicked {
                clicked_announced += 1;
                if err {
                    clicked_announced_errors += 1;
                }
            }
            counts[clicked as usize][err as usize] += 1;
        }
    }

    Ok(KeyReport {
        chain_n,
        rounds,
        seed,
        eve: eve.is_some(),
        announced,
        announced_rate: if rounds > 0 {
            announced as f64 / rounds as f64
        } else {
            0.0
        },
        errors,
        error_rate: if announced > 0 {
            errors as f64 / announced as f64
        } else {
            0.0
        },
        eve_clicks,
        clicked_announced,
        clicked_announced_errors,
        mi_click_error_bits: plug_in_mi_bits(counts),
    })
}
