//! `ldplab` command-line front end.
//!
//! Every run prints a reproducibility header followed by result records, as
//! JSON objects one per line or as CSV with a header row. Exit status is 0 on
//! success, 1 on a domain error (reported as one JSON line on stderr) and 2 on
//! a usage error.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ldplab::ldp::{
    deviation_series_exact, fit_points, growth_report, recommended_tilt, ExactMode, ExactOptions, Interval, McOptions,
    DEFAULT_WORK_BUDGET,
};
use ldplab::thermo::{equilibrium_state, pressure_at_block};
use ldplab::{
    axioms_check, deviation_mass_mc, leaf_measure_with_block, LeafMeasure, Potential, RateCurve, System, TiltFamily,
};
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

/// Environment variable overriding the enumeration and DP work budget.
pub const BUDGET_VAR: &str = "LDPLAB_BUDGET";

#[derive(Debug, Parser)]
#[command(name = "ldplab", version, about = "Local large deviations on mixing subshifts of finite type")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Seed for sampling commands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(untagged)]
enum Command {
    /// Topological pressure of a potential.
    Pressure(SinglePotential),
    /// Transitions and stationary law of the equilibrium state.
    Gibbs(SinglePotential),
    /// Entropy, pressure and mean of the equilibrium state.
    Entropy(SinglePotential),
    /// `q(t) = P(G + tφ) - P(G)` and its derivative on a grid.
    Qcurve(Qcurve),
    /// Scalar rate function at the given values.
    Rate(Rate),
    /// Scalar rate function over the ergodic range.
    Ratecurve(Ratecurve),
    /// Observed constants in the conditional Gibbs bound.
    LeafAudit(LeafAudit),
    /// Growth estimate against `q(1)`.
    Growth(Growth),
    /// Exact or certified deviation masses.
    DeviationExact(DeviationExact),
    /// Monte Carlo deviation masses.
    DeviationMc(DeviationMc),
    /// Decay-rate fit of a deviation series.
    Fit(Fit),
    /// Sampled check of the bracket axioms.
    Axioms(Axioms),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Pressure(_) => "pressure",
            Command::Gibbs(_) => "gibbs",
            Command::Entropy(_) => "entropy",
            Command::Qcurve(_) => "qcurve",
            Command::Rate(_) => "rate",
            Command::Ratecurve(_) => "ratecurve",
            Command::LeafAudit(_) => "leaf-audit",
            Command::Growth(_) => "growth",
            Command::DeviationExact(_) => "deviation-exact",
            Command::DeviationMc(_) => "deviation-mc",
            Command::Fit(_) => "fit",
            Command::Axioms(_) => "axioms",
        }
    }

    fn spec_path(&self) -> Option<&Path> {
        match self {
            Command::Pressure(a) | Command::Gibbs(a) | Command::Entropy(a) => Some(&a.spec),
            Command::Qcurve(a) => Some(&a.pair.spec),
            Command::Rate(a) => Some(&a.pair.spec),
            Command::Ratecurve(a) => Some(&a.pair.spec),
            Command::LeafAudit(a) => Some(&a.spec),
            Command::Growth(a) => Some(&a.leaf.pair.spec),
            Command::DeviationExact(a) => Some(&a.dev.leaf.pair.spec),
            Command::DeviationMc(a) => Some(&a.dev.leaf.pair.spec),
            Command::Fit(a) => a.spec.as_deref(),
            Command::Axioms(a) => Some(&a.spec),
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct SinglePotential {
    /// System file.
    #[arg(long)]
    spec: PathBuf,
    /// Potential name in the system file.
    #[arg(long, visible_alias = "G")]
    potential: String,
    /// Recoding block length (defaults to the potential's memory).
    #[arg(long)]
    block: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
struct Pair {
    /// System file.
    #[arg(long)]
    spec: PathBuf,
    /// Name of the reference potential `G`.
    #[arg(long = "G", visible_alias = "g")]
    g: String,
    /// Name of the observable `φ`.
    #[arg(long)]
    phi: String,
}

#[derive(Debug, Args, Serialize)]
struct Qcurve {
    #[command(flatten)]
    #[serde(flatten)]
    pair: Pair,
    /// Tilts: `a,b,...` or `start:stop:count`.
    #[arg(long, default_value = "-3:3:61")]
    t: FloatGrid,
}

#[derive(Debug, Args, Serialize)]
struct Rate {
    #[command(flatten)]
    #[serde(flatten)]
    pair: Pair,
    /// Values: `a,b,...` or `start:stop:count`.
    #[arg(long)]
    alpha: FloatGrid,
}

#[derive(Debug, Args, Serialize)]
struct Ratecurve {
    #[command(flatten)]
    #[serde(flatten)]
    pair: Pair,
    /// Number of equally spaced points across the ergodic range.
    #[arg(long, default_value_t = 101, conflicts_with = "alpha")]
    points: usize,
    /// Explicit sorted grid instead of `--points`.
    #[arg(long)]
    alpha: Option<FloatGrid>,
}

#[derive(Debug, Args, Serialize)]
struct LeafAudit {
    /// System file.
    #[arg(long)]
    spec: PathBuf,
    /// Name of the reference potential `G`.
    #[arg(long = "G", visible_alias = "g")]
    g: String,
    /// Past word fixing the leaf (defaults to the first admissible block).
    #[arg(long)]
    past: Option<String>,
    /// Largest word length audited.
    #[arg(long, default_value_t = 12)]
    n_max: usize,
    /// Bowen-ball depth, `ε = 2^-r`.
    #[arg(long, default_value_t = 2)]
    r: usize,
}

#[derive(Debug, Args, Serialize)]
struct LeafPair {
    #[command(flatten)]
    #[serde(flatten)]
    pair: Pair,
    /// Past word fixing the leaf (defaults to the first admissible block).
    #[arg(long)]
    past: Option<String>,
}

#[derive(Debug, Args, Serialize)]
struct Growth {
    #[command(flatten)]
    #[serde(flatten)]
    leaf: LeafPair,
    /// Lengths: `a,b,...` or `start:stop[:step]`.
    #[arg(long, default_value = "10:100:10")]
    n: IntGrid,
}

#[derive(Debug, Args, Serialize)]
struct DeviationArgs {
    #[command(flatten)]
    #[serde(flatten)]
    leaf: LeafPair,
    /// Target interval, e.g. `0.7:1`, `[0.4,0.5)` or `(0.6,inf]`.
    #[arg(long)]
    interval: Interval,
    /// Lengths: `a,b,...` or `start:stop[:step]`.
    #[arg(long)]
    n: IntGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Mode {
    Auto,
    Enumerate,
    Lattice,
    Binned,
}

#[derive(Debug, Args, Serialize)]
struct DeviationExact {
    #[command(flatten)]
    #[serde(flatten)]
    dev: DeviationArgs,
    #[arg(long, value_enum, default_value_t = Mode::Auto)]
    mode: Mode,
    /// Bin width for binned DP.
    #[arg(long)]
    bin_width: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct DeviationMc {
    #[command(flatten)]
    #[serde(flatten)]
    dev: DeviationArgs,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Proposal tilt: `auto`, `none` or a number.
    #[arg(long, default_value = "auto")]
    tilt: TiltChoice,
}

#[derive(Debug, Args, Serialize)]
struct Fit {
    /// Deviation output (JSON lines or CSV) to fit instead of computing a series.
    #[arg(long, conflicts_with_all = ["spec", "g", "phi", "past", "interval", "n"])]
    input: Option<PathBuf>,
    /// System file.
    #[arg(long, required_unless_present = "input")]
    spec: Option<PathBuf>,
    #[arg(long = "G", visible_alias = "g", required_unless_present = "input")]
    g: Option<String>,
    #[arg(long, required_unless_present = "input")]
    phi: Option<String>,
    #[arg(long)]
    past: Option<String>,
    #[arg(long, required_unless_present = "input")]
    interval: Option<Interval>,
    #[arg(long, default_value = "100:500:50")]
    n: IntGrid,
}

#[derive(Debug, Args, Serialize)]
struct Axioms {
    /// System file.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
}

/// Real grid: comma list or `start:stop:count`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
struct FloatGrid(Vec<f64>);

impl FromStr for FloatGrid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
        let values = if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            if parts.len() != 3 {
                return Err(format!("expected start:stop:count, got {s:?}"));
            }
            let (a, b) = (num(parts[0])?, num(parts[1])?);
            let count: usize = parts[2].trim().parse().map_err(|e| format!("count {:?}: {e}", parts[2]))?;
            match count {
                0 => Vec::new(),
                1 => vec![a],
                _ => (0..count).map(|i| a + (b - a) * i as f64 / (count - 1) as f64).collect(),
            }
        } else {
            s.split(',').map(num).collect::<std::result::Result<_, _>>()?
        };
        if values.is_empty() {
            return Err("grid is empty".into());
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err("grid values must be finite".into());
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err("grid must be strictly increasing".into());
        }
        Ok(FloatGrid(values))
    }
}

/// Length grid: comma list or `start:stop[:step]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
struct IntGrid(Vec<usize>);

impl FromStr for IntGrid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
        let values: Vec<usize> = if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            let step = match parts.len() {
                2 => 1,
                3 => num(parts[2])?,
                _ => return Err(format!("expected start:stop[:step], got {s:?}")),
            };
            if step == 0 {
                return Err("step must be positive".into());
            }
            (num(parts[0])?..=num(parts[1])?).step_by(step).collect()
        } else {
            s.split(',').map(num).collect::<std::result::Result<_, _>>()?
        };
        if values.is_empty() {
            return Err("grid is empty".into());
        }
        if values[0] == 0 {
            return Err("lengths must be positive".into());
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err("grid must be strictly increasing".into());
        }
        Ok(IntGrid(values))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum TiltChoice {
    Auto,
    None,
    Fixed(f64),
}

impl FromStr for TiltChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "auto" => Ok(TiltChoice::Auto),
            "none" => Ok(TiltChoice::None),
            _ => match s.parse::<f64>() {
                Ok(t) if t.is_finite() => Ok(TiltChoice::Fixed(t)),
                _ => Err(format!("expected auto, none or a finite number, got {s:?}")),
            },
        }
    }
}

impl Serialize for TiltChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TiltChoice::Auto => s.serialize_str("auto"),
            TiltChoice::None => s.serialize_str("none"),
            TiltChoice::Fixed(t) => s.serialize_f64(*t),
        }
    }
}

enum Failure {
    Usage { flag: String, message: String },
    Domain(ldplab::Error),
}

impl From<ldplab::Error> for Failure {
    fn from(e: ldplab::Error) -> Self {
        Failure::Domain(e)
    }
}

fn usage(flag: &str, message: impl fmt::Display) -> Failure {
    Failure::Usage { flag: flag.to_string(), message: message.to_string() }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Result records plus their fixed column order.
struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Map<String, Value>>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Table { columns: columns.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, values: Vec<Value>) {
        debug_assert_eq!(values.len(), self.columns.len());
        self.rows.push(self.columns.iter().map(|c| c.to_string()).zip(values).collect());
    }

    /// Single record from a serializable report; nested fields become dotted columns in CSV.
    fn single(value: impl Serialize) -> Self {
        let obj = match serde_json::to_value(value).expect("reports serialize") {
            Value::Object(m) => m,
            other => Map::from_iter([("value".to_string(), other)]),
        };
        Table { columns: Vec::new(), rows: vec![obj] }
    }
}

/// JSON number, or the strings `inf`, `-inf`, `nan` for non-finite values.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn opt_num(x: Option<f64>) -> Value {
    x.map(num).unwrap_or(Value::Null)
}

/// Parses `argv` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads: must be positive");
            return 2;
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match execute(&cli) {
        Ok(()) => 0,
        Err(Failure::Usage { flag, message }) => {
            eprintln!("error: {flag}: {message}");
            2
        }
        Err(Failure::Domain(e)) => {
            let record = json!({"error": {"kind": e.root().kind(), "context": e.kind(), "message": e.to_string()}});
            eprintln!("{record}");
            1
        }
    }
}

fn budget() -> CliResult<u64> {
    match std::env::var(BUDGET_VAR) {
        Err(_) => Ok(DEFAULT_WORK_BUDGET),
        Ok(text) => {
            let v: f64 = text.trim().parse().map_err(|_| usage(BUDGET_VAR, format!("not a number: {text:?}")))?;
            if !(v >= 1.0) || v > u64::MAX as f64 {
                return Err(usage(BUDGET_VAR, format!("must be a positive count, got {text:?}")));
            }
            Ok(v as u64)
        }
    }
}

fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| ldplab::Error::Io(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn execute(cli: &Cli) -> CliResult<()> {
    let budget = budget()?;
    let spec_hash = cli.command.spec_path().map(sha256_file).transpose()?;
    let input_hash = match &cli.command {
        Command::Fit(Fit { input: Some(p), .. }) => Some(sha256_file(p)?),
        _ => None,
    };
    let table = match &cli.command {
        Command::Pressure(a) => pressure_cmd(a)?,
        Command::Gibbs(a) => gibbs_cmd(a)?,
        Command::Entropy(a) => entropy_cmd(a)?,
        Command::Qcurve(a) => qcurve_cmd(a)?,
        Command::Rate(a) => rate_cmd(a)?,
        Command::Ratecurve(a) => ratecurve_cmd(a)?,
        Command::LeafAudit(a) => leaf_audit_cmd(a, budget)?,
        Command::Growth(a) => growth_cmd(a)?,
        Command::DeviationExact(a) => deviation_exact_cmd(a, budget)?,
        Command::DeviationMc(a) => deviation_mc_cmd(a, cli.seed)?,
        Command::Fit(a) => fit_cmd(a, budget)?,
        Command::Axioms(a) => axioms_cmd(a, cli.seed)?,
    };
    let mut header = Map::new();
    header.insert("tool".into(), json!("ldplab"));
    header.insert("version".into(), json!(ldplab::VERSION));
    header.insert("command".into(), json!(cli.command.name()));
    header.insert("spec_sha256".into(), json!(spec_hash));
    if let Some(h) = input_hash {
        header.insert("input_sha256".into(), json!(h));
    }
    header.insert("seed".into(), json!(cli.seed));
    header.insert("budget".into(), json!(budget));
    header.insert("params".into(), serde_json::to_value(&cli.command).expect("arguments serialize"));
    let header = json!({ "header": header });
    let text = match cli.format {
        Format::Json => render_json(&header, &table),
        Format::Csv => render_csv(&header, &table),
    };
    match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|e| ldplab::Error::Io(format!("{}: {e}", path.display())))?,
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| ldplab::Error::Io(format!("stdout: {e}")))?;
        }
    }
    Ok(())
}

fn render_json(header: &Value, table: &Table) -> String {
    let mut s = header.to_string();
    s.push('\n');
    for row in &table.rows {
        s.push_str(&Value::Object(row.clone()).to_string());
        s.push('\n');
    }
    s
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        Value::Array(items) => {
            let cells: Vec<String> = items.iter().map(scalar_cell).collect();
            out.push((prefix.to_string(), cells.join(";")));
        }
        other => out.push((prefix.to_string(), scalar_cell(other))),
    }
}

fn scalar_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn render_csv(header: &Value, table: &Table) -> String {
    let mut s = format!("# {header}\n");
    let rows: Vec<Vec<(String, String)>> = table
        .rows
        .iter()
        .map(|r| {
            let mut cells = Vec::new();
            flatten("", &Value::Object(r.clone()), &mut cells);
            cells
        })
        .collect();
    let columns: Vec<String> = if table.columns.is_empty() {
        rows.first().map(|r| r.iter().map(|(k, _)| k.clone()).collect()).unwrap_or_default()
    } else {
        table.columns.iter().map(|c| c.to_string()).collect()
    };
    s.push_str(&columns.iter().map(|c| csv_escape(c)).collect::<Vec<_>>().join(","));
    s.push('\n');
    for r in rows {
        let line: Vec<String> = columns
            .iter()
            .map(|c| csv_escape(r.iter().find(|(k, _)| k == c).map(|(_, v)| v.as_str()).unwrap_or("")))
            .collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

fn load(path: &Path) -> CliResult<System> {
    Ok(System::load(path)?)
}

fn potential<'a>(sys: &'a System, flag: &str, name: &str) -> CliResult<&'a Potential> {
    sys.potential(name).map_err(|e| usage(flag, e))
}

fn single_setup(a: &SinglePotential) -> CliResult<(System, Potential, usize)> {
    let sys = load(&a.spec)?;
    let g = potential(&sys, "--potential", &a.potential)?.clone();
    let block = a.block.unwrap_or(g.memory());
    if block < g.memory() {
        return Err(usage("--block", format!("must be at least the potential memory {}", g.memory())));
    }
    Ok((sys, g, block))
}

fn pressure_cmd(a: &SinglePotential) -> CliResult<Table> {
    let (sys, g, block) = single_setup(a)?;
    let p = pressure_at_block(&sys.spec, &g, block)?;
    let mut t = Table::new(&["pressure"]);
    t.push(vec![num(p)]);
    Ok(t)
}

fn gibbs_cmd(a: &SinglePotential) -> CliResult<Table> {
    let (sys, g, block) = single_setup(a)?;
    let (mu, _) = equilibrium_state(&sys.spec, &g, block)?;
    let chain = mu.chain();
    let mut t = Table::new(&["state", "next", "stationary", "transition"]);
    for i in 0..chain.len() {
        for &j in chain.successors(i) {
            t.push(vec![
                json!(sys.spec.format_word(chain.state_word(i))),
                json!(sys.spec.format_word(chain.state_word(j))),
                num(mu.stationary()[i]),
                num(mu.transition(i, j)),
            ]);
        }
    }
    Ok(t)
}

fn entropy_cmd(a: &SinglePotential) -> CliResult<Table> {
    let (sys, g, block) = single_setup(a)?;
    let (mu, p) = equilibrium_state(&sys.spec, &g, block)?;
    let mut t = Table::new(&["entropy", "pressure", "integral"]);
    t.push(vec![num(mu.entropy()), num(p), num(mu.integrate(&g)?)]);
    Ok(t)
}

fn family(pair: &Pair) -> CliResult<(System, Potential, Potential, TiltFamily)> {
    let sys = load(&pair.spec)?;
    let g = potential(&sys, "--G", &pair.g)?.clone();
    let phi = potential(&sys, "--phi", &pair.phi)?.clone();
    let fam = TiltFamily::new(&sys.spec, &g, &phi)?;
    Ok((sys, g, phi, fam))
}

fn qcurve_cmd(a: &Qcurve) -> CliResult<Table> {
    let (_, _, _, fam) = family(&a.pair)?;
    let mut t = Table::new(&["t", "q", "derivative"]);
    for &x in &a.t.0 {
        let p = fam.at(x)?;
        t.push(vec![num(x), num(p.q), num(p.derivative)]);
    }
    Ok(t)
}

const RATE_COLUMNS: [&str; 4] = ["alpha", "rate", "tilt", "boundary"];

fn rate_table(fam: &TiltFamily, alphas: &[f64]) -> CliResult<Table> {
    let curve = RateCurve::on_grid(fam, alphas)?;
    let mut t = Table::new(&RATE_COLUMNS);
    for i in 0..curve.alphas.len() {
        t.push(vec![num(curve.alphas[i]), num(curve.values[i]), opt_num(curve.tilts[i]), json!(curve.boundary[i])]);
    }
    Ok(t)
}

fn rate_cmd(a: &Rate) -> CliResult<Table> {
    let (_, _, _, fam) = family(&a.pair)?;
    rate_table(&fam, &a.alpha.0)
}

fn ratecurve_cmd(a: &Ratecurve) -> CliResult<Table> {
    let (_, _, _, fam) = family(&a.pair)?;
    match &a.alpha {
        Some(grid) => rate_table(&fam, &grid.0),
        None => {
            if a.points < 2 {
                return Err(usage("--points", "need at least 2 points"));
            }
            let curve = RateCurve::uniform(&fam, a.points)?;
            rate_table(&fam, &curve.alphas)
        }
    }
}

/// Leaf of `G` on the block `max(memories)` recoding, based at `--past`.
fn leaf_for(sys: &System, g: &Potential, block: usize, past: Option<&str>) -> CliResult<LeafMeasure> {
    let past = match past {
        Some(text) => sys.spec.parse_word(text).map_err(|e| usage("--past", e))?,
        None => sys.spec.admissible_words(block).into_iter().next().expect("primitive subshifts have words"),
    };
    if past.len() < block || !sys.spec.is_admissible(&past) {
        return Err(usage(
            "--past",
            format!("{:?} must be an admissible word of length at least {block}", sys.spec.format_word(&past)),
        ));
    }
    Ok(leaf_measure_with_block(&sys.spec, g, &past, block)?)
}

fn leaf_audit_cmd(a: &LeafAudit, budget: u64) -> CliResult<Table> {
    let sys = load(&a.spec)?;
    let g = potential(&sys, "--G", &a.g)?.clone();
    let leaf = leaf_for(&sys, &g, g.memory(), a.past.as_deref())?;
    if a.n_max == 0 {
        return Err(usage("--n-max", "must be positive"));
    }
    Ok(Table::single(leaf.gibbs_ratio_audit_with_budget(a.n_max, a.r, budget)?))
}

fn pair_leaf(a: &LeafPair) -> CliResult<(System, Potential, Potential, LeafMeasure)> {
    let sys = load(&a.pair.spec)?;
    let g = potential(&sys, "--G", &a.pair.g)?.clone();
    let phi = potential(&sys, "--phi", &a.pair.phi)?.clone();
    let leaf = leaf_for(&sys, &g, g.memory().max(phi.memory()), a.past.as_deref())?;
    Ok((sys, g, phi, leaf))
}

fn growth_cmd(a: &Growth) -> CliResult<Table> {
    let (_, _, phi, leaf) = pair_leaf(&a.leaf)?;
    let rep = growth_report(&leaf, &phi, &a.n.0)?;
    let mut t = Table::new(&["n", "estimate", "q", "scaled_error"]);
    for (&n, &e) in rep.lengths.iter().zip(&rep.estimates) {
        t.push(vec![json!(n), num(e), num(rep.q), num(n as f64 * (e - rep.q).abs())]);
    }
    Ok(t)
}

fn exact_options(mode: Mode, bin_width: Option<f64>, budget: u64) -> CliResult<ExactOptions> {
    if let Some(w) = bin_width {
        if !(w > 0.0 && w.is_finite()) {
            return Err(usage("--bin-width", "must be positive"));
        }
    }
    let mode = match mode {
        Mode::Auto => ExactMode::Auto,
        Mode::Enumerate => ExactMode::Enumerate,
        Mode::Lattice => ExactMode::Lattice,
        Mode::Binned => {
            ExactMode::Binned { bin_width: bin_width.ok_or_else(|| usage("--bin-width", "required with --mode binned"))? }
        }
    };
    Ok(ExactOptions { mode, budget, bin_width })
}

const EXACT_COLUMNS: [&str; 7] = ["n", "log_mass", "mass", "stderr", "lower", "upper", "method"];

fn deviation_exact_cmd(a: &DeviationExact, budget: u64) -> CliResult<Table> {
    let (_, _, phi, leaf) = pair_leaf(&a.dev.leaf)?;
    let opts = exact_options(a.mode, a.bin_width, budget)?;
    let series = deviation_series_exact(&leaf, &phi, &a.dev.interval, &a.dev.n.0, &opts)?;
    let mut t = Table::new(&EXACT_COLUMNS);
    for p in &series.points {
        t.push(vec![
            json!(p.n),
            num(p.log_mass),
            num(p.mass),
            num(p.stderr),
            num(p.lower),
            num(p.upper),
            json!(series.method.as_str()),
        ]);
    }
    Ok(t)
}

fn deviation_mc_cmd(a: &DeviationMc, seed: u64) -> CliResult<Table> {
    let (_, g, phi, leaf) = pair_leaf(&a.dev.leaf)?;
    if a.samples < 2 {
        return Err(usage("--samples", "need at least 2 samples"));
    }
    let tilt = match a.tilt {
        TiltChoice::None => None,
        TiltChoice::Fixed(t) => Some(t),
        TiltChoice::Auto => {
            let fam = TiltFamily::on_chain(leaf.chain(), &g, &phi)?;
            Some(recommended_tilt(&fam, &a.dev.interval)?)
        }
    };
    let mut t = Table::new(&["n", "log_mass", "mass", "stderr", "samples", "tilt"]);
    for &n in &a.dev.n.0 {
        let p = deviation_mass_mc(&leaf, &phi, &a.dev.interval, n, &McOptions { samples: a.samples, tilt, seed })?;
        t.push(vec![json!(p.n), num(p.log_mass), num(p.mass), num(p.stderr), json!(a.samples), opt_num(tilt)]);
    }
    Ok(t)
}

/// `(n, mass)` pairs from a deviation output file in either format.
fn read_series(path: &Path) -> CliResult<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| ldplab::Error::Io(format!("{}: {e}", path.display())))?;
    let bad = |line: usize, msg: &str| usage("--input", format!("{}:{line}: {msg}", path.display()));
    let mut out = Vec::new();
    let mut columns: Option<(usize, usize)> = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with('{') {
            let v: Value = serde_json::from_str(line).map_err(|e| bad(i + 1, &e.to_string()))?;
            if v.get("header").is_some() {
                continue;
            }
            let n = v.get("n").and_then(Value::as_f64).ok_or_else(|| bad(i + 1, "missing numeric \"n\""))?;
            let m = v.get("mass").and_then(Value::as_f64).ok_or_else(|| bad(i + 1, "missing numeric \"mass\""))?;
            out.push((n, m));
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        match columns {
            None => {
                let find = |name: &str| cells.iter().position(|c| *c == name);
                columns = Some((
                    find("n").ok_or_else(|| bad(i + 1, "CSV header lacks \"n\""))?,
                    find("mass").ok_or_else(|| bad(i + 1, "CSV header lacks \"mass\""))?,
                ));
            }
            Some((cn, cm)) => {
                let get = |c: usize| cells.get(c).and_then(|x| x.parse::<f64>().ok());
                let (n, m) = get(cn).zip(get(cm)).ok_or_else(|| bad(i + 1, "unparsable row"))?;
                out.push((n, m));
            }
        }
    }
    Ok(out)
}

fn fit_cmd(a: &Fit, budget: u64) -> CliResult<Table> {
    let (points, reference) = match &a.input {
        Some(path) => (read_series(path)?, None),
        None => {
            let (spec, g, phi, interval) = match (&a.spec, &a.g, &a.phi, &a.interval) {
                (Some(s), Some(g), Some(p), Some(iv)) => (s, g, p, iv),
                _ => return Err(usage("--spec", "--spec, --G, --phi and --interval are required without --input")),
            };
            let leaf_args = LeafPair {
                pair: Pair { spec: spec.clone(), g: g.clone(), phi: phi.clone() },
                past: a.past.clone(),
            };
            let (_, g, phi, leaf) = pair_leaf(&leaf_args)?;
            let opts = ExactOptions { budget, ..Default::default() };
            let series = deviation_series_exact(&leaf, &phi, interval, &a.n.0, &opts)?;
            let points = series.points.iter().map(|p| (p.n as f64, p.mass)).collect();
            let fam = TiltFamily::on_chain(leaf.chain(), &g, &phi)?;
            let mean = fam.mean()?;
            let target = if interval.contains(mean) {
                mean
            } else if mean < interval.lo {
                interval.lo
            } else {
                interval.hi
            };
            (points, Some(fam.rate(target)?.rate))
        }
    };
    let fit = fit_points(&points)?;
    let mut t = Table::new(&["estimate", "b", "c", "residual", "monotone", "points", "reference_rate"]);
    t.push(vec![
        num(fit.estimate),
        num(fit.b),
        num(fit.c),
        num(fit.residual),
        json!(fit.monotone),
        json!(fit.points),
        opt_num(reference),
    ]);
    Ok(t)
}

fn axioms_cmd(a: &Axioms, seed: u64) -> CliResult<Table> {
    let sys = load(&a.spec)?;
    if a.samples == 0 {
        return Err(usage("--samples", "must be positive"));
    }
    let rep = axioms_check(&sys.spec, a.samples, seed);
    let mut value = serde_json::to_value(&rep).expect("reports serialize");
    value["total_violations"] = json!(rep.total_violations());
    Ok(Table::single(value))
}
