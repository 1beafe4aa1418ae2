//! Command-line interface: network runs, probe records, reference
//! comparisons, parameter sweeps, adversary statistics, key-agreement
//! sampling, and trajectory summaries, as CSV or JSON.
//!
//! Every run is reproducible byte for byte: map-backed ordering everywhere,
//! floats rendered in exponent form, and output files written atomically
//! (temp file + rename) so a failed run never leaves a partial file.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use crate::adversary::{
    eve_joint_distribution, keydist_simulate, EveLocation, EveMode, EveProbe, KeydistEve,
};
use crate::bohm::bohm_estimate;
use crate::error::{Error, Result};
use crate::metrics::{
    compare, eval_asymptotic, formulas_for, probe_trace, regime_warning, single_particle_standard,
};
use crate::mode::PathId;
use crate::networks::{simulate, Element, NetworkKind, NetworkSpec};
use crate::trace::ProbeModel;

pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[derive(Parser)]
#[command(
    name = "cftrace",
    version,
    about = "Interferometric counterfactual-communication simulator and weak-trace analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a network and report the outcome probability of every port.
    Simulate(SimulateArgs),
    /// Post-selected probe record: detection probability, weak values and
    /// pointer shifts per channel path.
    Trace(TraceArgs),
    /// Single-pass parallel reference channel metrics.
    Standard(StandardArgs),
    /// Probe record of a network side by side with the reference channel,
    /// with a counterfactuality verdict.
    Compare(CompareArgs),
    /// Compare over a grid of sizes and couplings, with asymptotic columns.
    Sweep(SweepArgs),
    /// Joint click/outcome statistics of an adversarial presence probe.
    Eve(EveArgs),
    /// Sample the chained-interferometer key-agreement protocol.
    Keydist(KeydistArgs),
    /// Trajectory-weight (crossing probability) summary of a network.
    Bohm(BohmArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Config file with `key=value` lines; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output format: csv (default) or json.
    #[arg(long)]
    format: Option<String>,
    /// Output file; writes to stdout when omitted. Relative paths land in
    /// $CFTRACE_OUT_DIR when that is set.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NetArgs {
    /// Network kind: simple|ifm|hwp|zeno|nested3|salih|li.
    #[arg(long)]
    kind: Option<String>,
    /// Outer chain length (salih/li).
    #[arg(long)]
    m: Option<u32>,
    /// Inner chain length / splitter count / arm count, by kind.
    #[arg(long)]
    n: Option<u32>,
    /// Encoded bit: selects the default element on every channel path.
    #[arg(long)]
    bit: Option<u8>,
    /// Per-path element override, `m,n=free|shutter|hwp`; repeatable.
    #[arg(long)]
    element: Vec<String>,
    /// Side-mirror power loss override (salih only).
    #[arg(long)]
    t3: Option<f64>,
}

#[derive(Args)]
struct ProbeArgs {
    /// Probe branching amplitude, in [0, 1).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Pointer displacement per crossing (with --width).
    #[arg(long)]
    delta: Option<f64>,
    /// Pointer wavepacket width (with --delta).
    #[arg(long)]
    width: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    net: NetArgs,
    #[command(flatten)]
    probe: ProbeArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    net: NetArgs,
    #[command(flatten)]
    probe: ProbeArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct StandardArgs {
    /// Number of parallel channel arms.
    #[arg(long)]
    n: Option<u32>,
    #[command(flatten)]
    probe: ProbeArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    net: NetArgs,
    #[command(flatten)]
    probe: ProbeArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// Network kind: zeno|nested3|salih|li.
    #[arg(long)]
    kind: Option<String>,
    /// Encoded bit.
    #[arg(long)]
    bit: Option<u8>,
    /// Comma-separated outer sizes.
    #[arg(long = "m-list")]
    m_list: Option<String>,
    /// Comma-separated inner sizes.
    #[arg(long = "n-list")]
    n_list: Option<String>,
    /// Comma-separated probe amplitudes.
    #[arg(long = "eps-list")]
    eps_list: Option<String>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct EveArgs {
    #[command(flatten)]
    net: NetArgs,
    /// Monitor a single channel path, `m,n`.
    #[arg(long = "eve-path")]
    eve_path: Option<String>,
    /// Monitor every channel path of one outer gap.
    #[arg(long = "eve-gap")]
    eve_gap: Option<u16>,
    /// Adversary coupling mode: weak|projective (default projective).
    #[arg(long = "eve-mode")]
    eve_mode: Option<String>,
    /// Weak coupling strength, in [0, 1].
    #[arg(long = "eve-eps")]
    eve_eps: Option<f64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct KeydistArgs {
    /// Splitter count of each round's chain.
    #[arg(long = "chain-n")]
    chain_n: Option<u32>,
    /// Number of protocol rounds to sample.
    #[arg(long)]
    rounds: Option<u64>,
    /// Generator seed; a given seed reproduces the run exactly.
    #[arg(long)]
    seed: Option<u64>,
    /// Enable the intercepting adversary (projective by default).
    #[arg(long)]
    eve: bool,
    /// Adversary weak-coupling strength; implies --eve.
    #[arg(long = "eve-eps")]
    eve_eps: Option<f64>,
    /// Force the projective adversary; implies --eve.
    #[arg(long = "eve-projective")]
    eve_projective: bool,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct BohmArgs {
    #[command(flatten)]
    net: NetArgs,
    #[command(flatten)]
    common: CommonArgs,
}

// ---------------------------------------------------------------------------
// config-file merging

/// Parsed `key=value` file with consumption tracking: every key must belong
/// to the subcommand that loaded it.
struct FileCfg {
    entries: BTreeMap<String, Vec<String>>,
}

impl FileCfg {
    fn load(path: Option<&Path>) -> Result<FileCfg> {
        let mut entries: BTreeMap<String, Vec<String>> = BTreeMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path)?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    return Err(Error::Usage(format!(
                        "{}:{}: expected `key=value`, got `{line}`",
                        path.display(),
                        lineno + 1
                    )));
                };
                entries
                    .entry(key.trim().to_string())
                    .or_default()
                    .push(value.trim().to_string());
            }
        }
        Ok(FileCfg { entries })
    }

    fn take_raw(&mut self, key: &str) -> Result<Option<String>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(mut vs) if vs.len() == 1 => Ok(Some(vs.remove(0))),
            Some(_) => Err(Error::Usage(format!(
                "config key `{key}` given more than once"
            ))),
        }
    }

    fn take_all(&mut self, key: &str) -> Vec<String> {
        self.entries.remove(key).unwrap_or_default()
    }

    /// Flag wins; otherwise parse the file value.
    fn merge<T: FromStr>(&mut self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        let file = self.take_raw(key)?;
        if flag.is_some() {
            return Ok(flag);
        }
        match file {
            None => Ok(None),
            Some(s) => s
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::Usage(format!("config key `{key}`: cannot parse `{s}`"))),
        }
    }

    fn merge_flag(&mut self, flag: bool, key: &str) -> Result<bool> {
        Ok(self
            .merge(if flag { Some(true) } else { None }, key)?
            .unwrap_or(false))
    }

    fn finish(self) -> Result<()> {
        if let Some(key) = self.entries.keys().next() {
            return Err(Error::Usage(format!(
                "unknown config key `{key}` for this subcommand"
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// output rendering

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Usage(format!(
                "unknown format `{other}` (expected csv|json)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
enum Cell {
    Str(String),
    Uint(u64),
    Float(f64),
    Bool(bool),
    Null,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Str(s) => s.clone(),
            Cell::Uint(u) => u.to_string(),
            Cell::Float(x) => format!("{x:e}"),
            Cell::Bool(b) => b.to_string(),
            Cell::Null => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Str(s) => Value::String(s.clone()),
            Cell::Uint(u) => json!(u),
            Cell::Float(x) => json!(x),
            Cell::Bool(b) => json!(b),
            Cell::Null => Value::Null,
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Str(s.to_string())
    }
}

/// One table of results plus the resolved configuration that produced it.
struct OutputDoc {
    config: Map<String, Value>,
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl OutputDoc {
    fn render(&self, format: Format) -> Result<Vec<u8>> {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.columns)
                    .map_err(|e| Error::Usage(format!("csv: {e}")))?;
                for row in &self.rows {
                    debug_assert_eq!(row.len(), self.columns.len());
                    let rec: Vec<String> = row.iter().map(Cell::csv).collect();
                    w.write_record(&rec)
                        .map_err(|e| Error::Usage(format!("csv: {e}")))?;
                }
                w.into_inner()
                    .map_err(|e| Error::Usage(format!("csv: {e}")))
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let mut obj = Map::new();
                        for (col, cell) in self.columns.iter().zip(row) {
                            obj.insert(col.to_string(), cell.json());
                        }
                        Value::Object(obj)
                    })
                    .collect();
                let doc = json!({
                    "schema_version": 1,
                    "config": Value::Object(self.config.clone()),
                    "rows": rows,
                });
                let mut bytes = serde_json::to_vec_pretty(&doc)
                    .map_err(|e| Error::Usage(format!("json: {e}")))?;
                bytes.push(b'\n');
                Ok(bytes)
            }
        }
    }
}

fn resolve_out_path(out: &Path) -> PathBuf {
    if out.is_absolute() {
        return out.to_path_buf();
    }
    match std::env::var_os("CFTRACE_OUT_DIR") {
        Some(dir) if !dir.is_empty() => Path::new(&dir).join(out),
        _ => out.to_path_buf(),
    }
}

/// All rows are computed before this is called, so an error never leaves a
/// partial output file; the temp + rename also keeps concurrent readers of
/// a previous version intact.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path.file_name().ok_or_else(|| {
        Error::Usage(format!("output path `{}` has no file name", path.display()))
    })?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(format!(".tmp.{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    if let Err(e) = fs::write(&tmp, bytes) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

fn emit(doc: &OutputDoc, format: Format, out: Option<&Path>) -> Result<()> {
    let bytes = doc.render(format)?;
    match out {
        Some(path) => write_atomic(&resolve_out_path(path), &bytes),
        None => {
            std::io::stdout().write_all(&bytes)?;
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// argument resolution

struct CommonResolved {
    format: Format,
    out: Option<PathBuf>,
}

fn resolve_common(cfg: &mut FileCfg, common: &CommonArgs) -> Result<CommonResolved> {
    let format = cfg
        .merge(common.format.clone(), "format")?
        .map(|s| s.parse::<Format>())
        .transpose()?
        .unwrap_or(Format::Csv);
    let out = cfg
        .merge(common.out.clone().map(path_to_string), "out")?
        .map(PathBuf::from);
    Ok(CommonResolved { format, out })
}

fn path_to_string(p: PathBuf) -> String {
    p.to_string_lossy().into_owned()
}

fn parse_element_override(s: &str) -> Result<(PathId, Element)> {
    let usage = || {
        Error::Usage(format!(
            "element override must look like `m,n=shutter`, got `{s}`"
        ))
    };
    let (lhs, rhs) = s.split_once('=').ok_or_else(usage)?;
    let (m, n) = lhs.split_once(',').ok_or_else(usage)?;
    let m: u16 = m.trim().parse().map_err(|_| usage())?;
    let n: u16 = n.trim().parse().map_err(|_| usage())?;
    Ok((PathId::new(m, n), rhs.trim().parse()?))
}

fn parse_path(s: &str) -> Result<PathId> {
    let usage = || Error::Usage(format!("path must look like `m,n`, got `{s}`"));
    let (m, n) = s.split_once(',').ok_or_else(usage)?;
    Ok(PathId::new(
        m.trim().parse().map_err(|_| usage())?,
        n.trim().parse().map_err(|_| usage())?,
    ))
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for item in s.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        out.push(
            item.parse::<T>()
                .map_err(|_| Error::Usage(format!("cannot parse `{item}` in {what} list")))?,
        );
    }
    if out.is_empty() {
        return Err(Error::Usage(format!("{what} list is empty")));
    }
    Ok(out)
}

struct NetResolved {
    spec: NetworkSpec,
    kind: NetworkKind,
}

fn resolve_net(cfg: &mut FileCfg, net: &NetArgs) -> Result<NetResolved> {
    let kind: NetworkKind = cfg
        .merge(net.kind.clone(), "kind")?
        .ok_or_else(|| Error::Usage("--kind is required".into()))?
        .parse()?;
    let m = cfg.merge(net.m, "m")?;
    let n = cfg.merge(net.n, "n")?;
    let bit = cfg.merge(net.bit, "bit")?.unwrap_or(0);
    let t3 = cfg.merge(net.t3, "t3")?;
    let mut elements: Vec<String> = net.element.clone();
    elements.extend(cfg.take_all("element"));

    let need = |v: Option<u32>, flag: &str| {
        v.ok_or_else(|| Error::Usage(format!("--{flag} is required for kind `{kind}`")))
    };
    let mut spec = match kind {
        NetworkKind::SimpleChannel => NetworkSpec::simple(need(n, "n")?),
        NetworkKind::IfmMzi => NetworkSpec::ifm_mzi(bit),
        NetworkKind::HwpMzi => NetworkSpec::hwp_mzi(bit),
        NetworkKind::ZenoChain => NetworkSpec::zeno(need(n, "n")?, bit),
        NetworkKind::NestedMzi3 => NetworkSpec::nested3(Element::Free),
        NetworkKind::Salih => NetworkSpec::salih(need(m, "m")?, need(n, "n")?, bit),
        NetworkKind::Li => NetworkSpec::li(need(m, "m")?, need(n, "n")?, bit),
    };
    // Explicit sizes on fixed-shape kinds are checked, not silently dropped.
    if let Some(m) = m {
        spec.m = m;
    }
    if let Some(n) = n {
        spec.n = n;
    }
    spec.bit = bit;
    for raw in &elements {
        let (path, element) = parse_element_override(raw)?;
        spec = spec.with_element(path, element);
    }
    if let Some(t3) = t3 {
        spec = spec.with_side_mirror_t3(t3);
    }
    spec.validate()?;
    Ok(NetResolved { spec, kind })
}

fn resolve_probe(cfg: &mut FileCfg, probe: &ProbeArgs) -> Result<ProbeModel> {
    let epsilon = cfg.merge(probe.epsilon, "epsilon")?;
    let delta = cfg.merge(probe.delta, "delta")?;
    let width = cfg.merge(probe.width, "width")?;
    match (epsilon, delta, width) {
        (Some(e), None, None) => ProbeModel::from_epsilon(e),
        (None, Some(d), Some(w)) => ProbeModel::from_shift_width(d, w),
        (None, None, None) => Err(Error::Usage(
            "probe required: give --epsilon, or --delta together with --width".into(),
        )),
        _ => Err(Error::Usage(
            "give either --epsilon alone or --delta together with --width".into(),
        )),
    }
}

fn warn_truncation(spec: &NetworkSpec, epsilon: f64) {
    let scale = spec.m.max(spec.n) as f64;
    if epsilon * scale > 0.3 {
        eprintln!(
            "warning: epsilon * max(m, n) = {:.3} > 0.3; the first-order probe \
             expansion may be off at this coupling",
            epsilon * scale
        );
    }
}

fn spec_config(spec: &NetworkSpec) -> Map<String, Value> {
    let mut cfg = Map::new();
    cfg.insert("kind".into(), json!(spec.kind.to_string()));
    cfg.insert("m".into(), json!(spec.m));
    cfg.insert("n".into(), json!(spec.n));
    cfg.insert("bit".into(), json!(spec.bit));
    if !spec.elements.is_empty() {
        let overrides: Vec<String> = spec
            .elements
            .iter()
            .map(|(p, e)| format!("{},{}={}", p.m, p.n, e))
            .collect();
        cfg.insert("element".into(), json!(overrides));
    }
    if let Some(t3) = spec.side_mirror_t3 {
        cfg.insert("t3".into(), json!(t3));
    }
    cfg
}

fn probe_config(cfg: &mut Map<String, Value>, probe: &ProbeModel) {
    cfg.insert("epsilon".into(), json!(probe.epsilon));
    cfg.insert("delta".into(), json!(probe.delta));
    cfg.insert("width".into(), json!(probe.width));
}

// ---------------------------------------------------------------------------
// subcommands

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(args) => run_simulate(args),
        Command::Trace(args) => run_trace(args),
        Command::Standard(args) => run_standard(args),
        Command::Compare(args) => run_compare(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Eve(args) => run_eve(args),
        Command::Keydist(args) => run_keydist(args),
        Command::Bohm(args) => run_bohm(args),
    }
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = FileCfg::load(args.common.config.as_deref())?;
    let net = resolve_net(&mut cfg, &args.net)?;
    let probe = resolve_probe(&mut cfg, &args.probe)?;
    let common = resolve_common(&mut cfg, &args.common)?;
    cfg.finish()?;
    warn_truncation(&net.spec, probe.epsilon);

    let sim = simulate(&net.spec, &probe)?;
    let mut config = spec_config(&net.spec);
    probe_config(&mut config, &probe);
    config.insert("command".into(), json!("simulate"));

    let rows = sim
        .probs
        .iter()
        .map(|(port, p)| vec![Cell::Str(port.to_string()), Cell::Float(*p)])
        .collect();
    let doc = OutputDoc {
        config,
        columns: vec!["port", "prob"],
        rows,
    };
    emit(&doc, common.format, common.out.as_deref())
}

fn run_trace(args: TraceArgs) -> Result<()> {
    let mut cfg = FileCfg::load(args.common.config.as_deref())?;
    let net = resolve_net(&mut cfg, &args.net)?;
    let probe = resolve_probe(&mut cfg, &args.probe)?;
    let common = resolve_common(&mut cfg, &args.common)?;
    cfg.finish()?;
    warn_truncation(&net.spec, probe.epsilon);

    let summary = probe_trace(&net.spec, &probe)?;
    let mut config = spec_config(&net.spec);
    probe_config(&mut config, &probe);
    config.insert("command".into(), json!("trace"));

    let mut rows = Vec::new();
    for (path, weak) in &summary.weak_values {
        let fwd = summary.table.fwd.get(path).copied().unwrap_or(0.0);
        let bwd = summary.table.bwd.get(path).copied().unwrap_or(0.0);
        rows.push(vec![
            Cell::Str(summary.detector.to_string()),
            Cell::Float(summary.postselect_prob),
            Cell::Float(summary.trace_detect_prob),
            Cell::Float(summary.shift_sum),
            Cell::Uint(path.m as u64),
            Cell::Uint(path.n as u64),
            Cell::Float(fwd),
            Cell::Float(bwd),
            Cell::Float(weak.re),
            Cell::Float(weak.norm()),
        ]);
    }
    let doc = OutputDoc {
        config,
        columns: vec![
            "detector",
            "postselect_prob",
            "trace_detect_prob",
            "shift_sum",
            "path_m",
            "path_n",
            "fwd",
            "bwd",
            "weak",
            "weak_abs",
        ],
        rows,
    };
    emit(&doc, common.format, common.out.as_deref())
}

fn run_standard(args: StandardArgs) -> Result<()> {
    let mut cfg = FileCfg::load(args.common.config.as_deref())?;
    let n = cfg
        .merge(args.n, "n")?
        .ok_or_else(|| Error::Usage("--n is required".into()))?;
    let probe = resolve_probe(&mut cfg, &args.probe)?;
    let common = resolve_common(&mut cfg, &args.common)?;
    cfg.finish()?;

    let standard = single_particle_standard(n, &probe)?;
    let mut config = Map::new();
    config.insert("command".into(), json!("standard"));
    config.insert("n".into(), json!(n));
    probe_config(&mut config, &probe);

    let doc = OutputDoc {
        config,
        columns: vec!["n_paths", "postselect_prob", "detect_prob", "shift_sum"],
        rows: vec![vec![
            Cell::Uint(standard.n_paths as u64),
            Cell::Float(standard.postselect_prob),
            Cell::Float(standard.detect_prob),
            Cell::Float(standard.shift_sum),
        ]],
    };
    emit(&doc, common.format, common.out.as_deref())
}

fn run_compare(args: CompareArgs) -> Result<()> {
    let mut cfg = FileCfg::load(args.common.config.as_deref())?;
    let net = resolve_net(&mut cfg, &args.net)?;
    let probe = resolve_probe(&mut cfg, &args.probe)?;
    let common = resolve_common(&mut cfg, &args.common)?;
    cfg.finish()?;
    warn_truncation(&net.spec, probe.epsilon);

    let report = compare(&net.spec, &probe)?;
    let mut config = spec_config(&net.spec);
    probe_config(&mut config, &probe);
    config.insert("command".into(), json!("compare"));

    let doc = OutputDoc {
        config,
        columns: vec![
            "kind",
            "m",
            "n",
            "bit",
            "epsilon",
            "delta",
            "n_paths",
            "postselect_prob",
            "trace_detect_prob",
            "shift_sum",
            "standard_detect",
            "standard_shift",
            "verdict",
        ],
        rows: vec![vec![
            Cell::Str(net.kind.to_string()),
            Cell::Uint(net.spec.m as u64),
            Cell::Uint(net.spec.n as u64),
            Cell::Uint(net.spec.bit as u64),
            Cell::Float(probe.epsilon),
            Cell::Float(probe.delta),
            Cell::Uint(report.n_paths as u64),
            Cell::Float(report.postselect_prob),
            Cell::Float(report.trace_detect_prob),
            Cell::Float(report.shift_sum),
            Cell::Float(report.standard_detect),
            Cell::Float(report.standard_shift),
            Cell::Str(report.verdict.to_string()),
        ]],
    };
    emit(&doc, common.format, common.out.as_deref())
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let mut cfg = FileCfg::load(args.common.config.as_deref())?;
    let kind: NetworkKind = cfg
        .merge(args.kind.clone(), "kind")?
        .ok_or_else(|| Error::Usage("--kind is required".into()))?
        .parse()?;
    let bit = cfg.merge(args.bit, "bit")?.unwrap_or(0);
    let m_list = cfg.merge(args.m_list.clone(), "m-list")?;
    let n_list = cfg.merge(args.n_list.clone(), "n-list")?;
    let eps_list = cfg
        .merge(args.eps_list.clone(), "eps-list")?
        .ok_or_else(|| Error::Usage("--eps-list is required".into()))?;
    let common = resolve_common(&mut cfg, &args.common)?;
    cfg.finish()?;

    let mut ms: Vec<u32> = match (kind, m_list) {
        (NetworkKind::ZenoChain | NetworkKind::NestedMzi3, None) => vec![1],
        (_, Some(list)) => parse_list(&list, "m")?,
        (_, None) => return Err(Error::Usage("--m-list is required for this kind".into())),
    };
    let mut ns: Vec<u32> = match (kind, n_list) {
        (NetworkKind::NestedMzi3, None) => vec![3],
        (_, Some(list)) => parse_list(&list, "n")?,
        (_, None) => return Err(Error::Usage("--n-list is required for this kind".into())),
    };
    let mut epss: Vec<f64> = parse_list(&eps_list, "epsilon")?;
    for e in &epss {
        if !e.is_finite() {
            return Err(Error::Usage("epsilon list entries must be finite".into()));
        }
    }
    ms.sort_unstable();
    ms.dedup();
    ns.sort_unstable();
    ns.dedup();
    epss.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    epss.dedup();

    let (trace_id, shift_id) = formulas_for(kind, bit);
    let mut warnings: Vec<String> = Vec::new();
    let mut rows = Vec::new();
    for &m in &ms {
        for &n in &ns {
            for id in [trace_id, shift_id].into_iter().flatten() {
                if let Some(w) = regime_warning(id, m, n) {
                    if !warnings.contains(&w) {
                        warnings.push(w);
                    }
                }
            }
            for &eps in &epss {
                let probe = ProbeModel::from_epsilon(eps)?;
                let mut spec = match kind {
                    NetworkKind::ZenoChain => NetworkSpec::zeno(n, bit),
                    NetworkKind::NestedMzi3 => NetworkSpec::nested3(Element::Free),
                    NetworkKind::Salih => NetworkSpec::salih(m, n, bit),
                    NetworkKind::Li => NetworkSpec::li(m, n, bit),
                    other => return Err(Error::UnsupportedKind(other.to_string())),
                };
                spec.bit = bit;
                spec.validate()?;
                if eps * spec.m.max(spec.n) as f64 > 0.3 {
                    let w = format!(
                        "epsilon {eps} at size ({m}, {n}) strains the first-order expansion"
                    );
                    if !warnings.contains(&w) {
                        warnings.push(w);
                    }
                }
                let report = compare(&spec, &probe)?;
                let asym = |id: Option<crate::metrics::FormulaId>| match id {
                    Some(id) => Cell::Float(eval_asymptotic(id, m, n, eps, probe.delta)),
                    None => Cell::Null,
                };
                rows.push(vec![
                    Cell::Str(kind.to_string()),
                    Cell::Uint(bit as u64),
                    Cell::Uint(m as u64),
                    Cell::Uint(n as u64),
                    Cell::Float(eps),
                    Cell::Float(probe.delta),
                    Cell::Float(report.trace_detect_prob),
                    Cell::Float(report.shift_sum),
                    Cell::Float(report.standard_detect),
                    Cell::Float(report.standard_shift),
                    asym(trace_id),
                    asym(shift_id),
                    Cell::Str(report.verdict.to_string()),
                ]);
            }
        }
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let mut config = Map::new();
    config.insert("command".into(), json!("sweep"));
    config.insert("kind".into(), json!(kind.to_string()));
    config.insert("bit".into(), json!(bit));
    config.insert("m_list".into(), json!(ms));
    config.insert("n_list".into(), json!(ns));
    config.insert("eps_list".into(), json!(epss));

    let doc = OutputDoc {
        config,
        columns: vec![
            "kind",
            "bit",
            "m",
            "n",
            "epsilon",
            "delta",
            "trace_detect_prob",
            "shift_sum",
            "standard_detect",
            "standard_shift",
            "asym_trace",
            "asym_shift",
            "verdict",
        ],
        rows,
    };
    emit(&doc, common.format, common.out.as_deref())
}

fn run_eve(args: EveArgs) -> Result<()> {
    let mut cfg = FileCfg::load(args.common.config.as_deref())?;
    let net = resolve_net(&mut cfg, &args.net)?;
    let eve_path = cfg.merge(args.eve_path.clone(), "eve-path")?;
    let eve_gap = cfg.merge(args.eve_gap, "eve-gap")?;
    let eve_mode = cfg.merge(args.eve_mode.clone(), "eve-mode")?;
    let eve_eps = cfg.merge(args.eve_eps, "eve-eps")?;
    let common = resolve_common(&mut cfg, &args.common)?;
    cfg.finish()?;

    let location = match (eve_path, eve_gap) {
        (Some(path), None) => EveLocation::Path(parse_path(&path)?),
        (None, Some(gap)) => EveLocation::Gap(gap),
        _ => {
            return Err(Error::Usage(
                "give exactly one of --eve-path and --eve-gap".into(),
            ))
        }
    };
    let mode: EveMode = match eve_mode {
        Some(s) => s.parse()?,
        None => {
            if eve_eps.is_some() {
                EveMode::Weak
            } else {
                EveMode::Projective
            }
        }
    };
    let probe = match mode {
        EveMode::Projective => {
            if eve_eps.is_some() {
                return Err(Error::Usage(
                    "--eve-eps only applies to --eve-mode weak".into(),
                ));
            }
            EveProbe::projective(location)
        }
        EveMode::Weak => {
            let eps =
                eve_eps.ok_or_else(|| Error::Usage("--eve-mode weak needs --eve-eps".into()))?;
            EveProbe::weak(location, eps)?
        }
    };

    let dist = eve_joint_distribution(&net.spec, &probe)?;
    let mut config = spec_config(&net.spec);
    config.insert("command".into(), json!("eve"));
    config.insert(
        "eve_location".into(),
        json!(match probe.location {
            EveLocation::Path(p) => format!("path {},{}", p.m, p.n),
            EveLocation::Gap(m) => format!("gap {m}"),
        }),
    );
    config.insert("eve_mode".into(), json!(probe.mode.to_string()));
    config.insert("eve_epsilon".into(), json!(probe.effective_epsilon()));

    let rows = dist
        .probs
        .iter()
        .map(|((clicked, outcome), p)| {
            vec![
                Cell::Bool(*clicked),
                Cell::Str(outcome.to_string()),
                Cell::Float(*p),
            ]
        })
        .collect();
    let doc = OutputDoc {
        config,
        columns: vec!["clicked", "outcome", "prob"],
        rows,
    };
    emit(&doc, common.format, common.out.as_deref())
}

fn run_keydist(args: KeydistArgs) -> Result<()> {
    let mut cfg = FileCfg::load(args.common.config.as_deref())?;
    let chain_n = cfg.merge(args.chain_n, "chain-n")?.unwrap_or(10);
    let rounds = cfg.merge(args.rounds, "rounds")?.unwrap_or(10_000);
    let seed = cfg.merge(args.seed, "seed")?.unwrap_or(0);
    let eve_on = cfg.merge_flag(args.eve, "eve")?;
    let eve_eps = cfg.merge(args.eve_eps, "eve-eps")?;
    let eve_projective = cfg.merge_flag(args.eve_projective, "eve-projective")?;
    let common = resolve_common(&mut cfg, &args.common)?;
    cfg.finish()?;

    if eve_projective && eve_eps.is_some() {
        return Err(Error::Usage(
            "--eve-projective conflicts with --eve-eps".into(),
        ));
    }
    let eve = if eve_on || eve_projective || eve_eps.is_some() {
        Some(match eve_eps {
            Some(eps) => {
                if !(0.0..=1.0).contains(&eps) {
                    return Err(Error::Domain(format!(
                        "eve coupling must lie in [0, 1], got {eps}"
                    )));
                }
                KeydistEve {
                    mode: EveMode::Weak,
                    epsilon: eps,
                }
            }
            None => KeydistEve {
                mode: EveMode::Projective,
                epsilon: 1.0,
            },
        })
    } else {
        None
    };

    let report = keydist_simulate(chain_n, rounds, seed, eve.as_ref())?;
    let mut config = Map::new();
    config.insert("command".into(), json!("keydist"));
    config.insert("chain_n".into(), json!(chain_n));
    config.insert("rounds".into(), json!(rounds));
    config.insert("seed".into(), json!(seed));
    config.insert("eve".into(), json!(report.eve));
    if let Some(e) = &eve {
        config.insert("eve_mode".into(), json!(e.mode.to_string()));
        config.insert("eve_epsilon".into(), json!(e.effective_epsilon()));
    }

    let doc = OutputDoc {
        config,
        columns: vec![
            "chain_n",
            "rounds",
            "seed",
            "eve",
            "announced",
            "announced_rate",
            "errors",
            "error_rate",
            "eve_clicks",
            "clicked_announced",
            "clicked_announced_errors",
            "mi_click_error_bits",
        ],
        rows: vec![vec![
            Cell::Uint(report.chain_n as u64),
            Cell::Uint(report.rounds),
            Cell::Uint(report.seed),
            Cell::Bool(report.eve),
            Cell::Uint(report.announced),
            Cell::Float(report.announced_rate),
            Cell::Uint(report.errors),
            Cell::Float(report.error_rate),
            Cell::Uint(report.eve_clicks),
            Cell::Uint(report.clicked_announced),
            Cell::Uint(report.clicked_announced_errors),
            Cell::Float(report.mi_click_error_bits),
        ]],
    };
    emit(&doc, common.format, common.out.as_deref())
}

fn run_bohm(args: BohmArgs) -> Result<()> {
    let mut cfg = FileCfg::load(args.common.config.as_deref())?;
    let net = resolve_net(&mut cfg, &args.net)?;
    let common = resolve_common(&mut cfg, &args.common)?;
    cfg.finish()?;

    let report = bohm_estimate(&net.spec)?;
    if report.approximate {
        eprintln!(
            "warning: trajectory weights are exact only for the lossless kind; \
             treat the `{}` numbers as a sketch",
            report.kind
        );
    }
    let mut config = spec_config(&net.spec);
    config.insert("command".into(), json!("bohm"));

    let doc = OutputDoc {
        config,
        columns: vec![
            "kind",
            "m",
            "n",
            "bit",
            "max_path_prob",
            "counterfactual_prob",
            "cross_expectation",
            "approximate",
        ],
        rows: vec![vec![
            Cell::Str(report.kind.to_string()),
            Cell::Uint(report.m as u64),
            Cell::Uint(report.n as u64),
            Cell::Uint(report.bit as u64),
            Cell::Float(report.max_path_prob),
            Cell::Float(report.counterfactual_prob),
            Cell::Float(report.cross_expectation),
            Cell::Bool(report.approximate),
        ]],
    };
    emit(&doc, common.format, common.out.as_deref())
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.csv())
    }
}
