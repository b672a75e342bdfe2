//! `godel-lattice` command line.
//!
//! Every output file carries the config digest: JSON files as a leading
//! `"config_digest"` key, CSV files as a `# config_digest=…` first line.
//! Failures print one line `error: <category>: <message>` to stderr and
//! exit with the category's code.

mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_bigint::BigUint;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::godel::{godel_number, godel_unnumber, GodelError, GodelMap};
use crate::head::{
    build_transcription_machine, estimate_tau, limit_estimate, projector_trace, reachable_subspace,
    tau_scaling_with, time_grid, HeadError, HorizonPolicy, Trials,
};
use crate::numfmt::{sig17, RawInteger, Sig17};
use crate::qstate::{Projector, StateError, StateFile};
use crate::reading::{adversarial_rule, cost_scaling, straight_rule, ReadError};
use crate::godel::PathRule;

pub use config::{
    load_config_file, normalize, validate_config, ConfigError, ConfigFile, Lengths, MachineParams, ReadingParams,
    RuleName, RunConfig, DEFAULT_SEED,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    Io(String),
    Config(String),
    Guard(String),
    Criterion(String),
    Input(String),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Io(_) => "io",
            CliError::Config(_) => "config",
            CliError::Guard(_) => "guard",
            CliError::Criterion(_) => "criterion",
            CliError::Input(_) => "input",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Guard(_) => 3,
            CliError::Criterion(_) => 4,
            CliError::Input(_) => 5,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Io(m) | CliError::Config(m) | CliError::Guard(m) | CliError::Criterion(m) | CliError::Input(m) => m,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "error: {}: {}", self.category(), self.message().replace('\n', " "))
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

fn from_state(e: StateError) -> CliError {
    match e {
        StateError::DimensionCap { .. } => CliError::Guard(e.to_string()),
        _ => CliError::Input(e.to_string()),
    }
}

impl From<GodelError> for CliError {
    fn from(e: GodelError) -> Self {
        match e {
            GodelError::GuardExceeded { .. } => CliError::Guard(e.to_string()),
            GodelError::State(s) => from_state(s),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<HeadError> for CliError {
    fn from(e: HeadError) -> Self {
        match e {
            HeadError::DimensionCap { .. } | HeadError::GuardExceeded { .. } => CliError::Guard(e.to_string()),
            HeadError::HorizonTooShort { .. }
            | HeadError::StepCap { .. }
            | HeadError::TraceTooShort { .. }
            | HeadError::Fit(_) => CliError::Criterion(e.to_string()),
            HeadError::NonPositiveCoupling(_) | HeadError::EmptyTarget | HeadError::BadGrid => {
                CliError::Config(e.to_string())
            }
            HeadError::State(s) => from_state(s),
            HeadError::Godel(g) => g.into(),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<ReadError> for CliError {
    fn from(e: ReadError) -> Self {
        match e {
            ReadError::GuardExceeded { .. } => CliError::Guard(e.to_string()),
            ReadError::Godel(g) => g.into(),
            ReadError::Fit(_) => CliError::Criterion(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "godel-lattice", version, about = "Gödel maps into spin lattices, head dynamics and reading costs")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed (default 1729).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files (default `out`).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Encode an expression as a product state (state.json).
    Encode {
        #[arg(long)]
        expr: String,
    },
    /// Decode a state file (decoded.json): exactly for product states,
    /// by seeded sampling for dense states.
    Decode {
        #[arg(long)]
        state: PathBuf,
        /// Samples to draw from a dense state.
        #[arg(long)]
        draws: Option<usize>,
    },
    /// Check that the map separates all trimmed expressions (injectivity.json).
    CheckInjective {
        #[arg(long, default_value_t = 4)]
        max_len: usize,
    },
    /// Length-lex Gödel number of an expression, or its inverse (godel_number.json).
    GodelNumber {
        #[arg(long, conflicts_with = "number", required_unless_present = "number")]
        expr: Option<String>,
        #[arg(long)]
        number: Option<String>,
    },
    /// Creation-probability trace of the transcription machine (trace.csv, simulate.json).
    Simulate {
        #[arg(long)]
        target: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        horizon: Option<f64>,
        #[arg(long)]
        m: Option<u32>,
        #[arg(long, allow_hyphen_values = true)]
        a: Option<i64>,
    },
    /// Stabilization time against length and its growth fits (tau_scaling.json, tau_scaling.csv).
    TauScaling {
        #[arg(long)]
        lengths: Option<Lengths>,
        #[arg(long)]
        m: Option<u32>,
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
        /// First horizon of the doubling schedule.
        #[arg(long, allow_hyphen_values = true)]
        horizon: Option<f64>,
        /// Fixed target pattern instead of the maximum over all targets.
        #[arg(long)]
        target: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        a: Option<i64>,
    },
    /// Worst-case reading cost against length (read_cost.json, read_cost.csv).
    ReadCost {
        #[arg(long, value_enum)]
        rule: Option<RuleName>,
        #[arg(long)]
        lengths: Option<Lengths>,
        #[arg(long)]
        k: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Encode { .. } => "encode",
            Command::Decode { .. } => "decode",
            Command::CheckInjective { .. } => "check-injective",
            Command::GodelNumber { .. } => "godel-number",
            Command::Simulate { .. } => "simulate",
            Command::TauScaling { .. } => "tau-scaling",
            Command::ReadCost { .. } => "read-cost",
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes `body` (a JSON object) with the digest as its first key.
fn write_json(path: &Path, digest: &str, body: &str) -> Result<(), CliError> {
    let rest = body.strip_prefix('{').expect("JSON object");
    let sep = if rest.starts_with('}') { "" } else { "," };
    let text = format!("{{\"config_digest\":\"{digest}\"{sep}{rest}\n");
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_csv(path: &Path, digest: &str, body: &str) -> Result<(), CliError> {
    std::fs::write(path, format!("# config_digest={digest}\n{body}")).map_err(|e| io_err(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string(value).map_err(|e| CliError::Input(e.to_string()))
}

/// Parses arguments, runs the command and returns the files written.
pub fn run<I, T>(args: I) -> Result<Vec<PathBuf>, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| {
        let text = e.to_string();
        let head = text.split("Usage:").next().unwrap_or("");
        let words: Vec<&str> = head.split_whitespace().collect();
        CliError::Config(words.join(" ").trim_start_matches("error: ").to_string())
    })?;
    let mut file = match &cli.config {
        Some(path) => load_config_file(path)?,
        None => ConfigFile::default(),
    };
    if let Some(seed) = cli.seed {
        file.seed = Some(seed);
    }
    if let Some(dir) = &cli.out_dir {
        file.out_dir = Some(dir.clone());
    }
    let mut inputs = BTreeMap::new();
    match &cli.command {
        Command::Encode { expr } => {
            inputs.insert("expr".into(), expr.clone());
        }
        Command::Decode { state, draws } => {
            let bytes = std::fs::read(state).map_err(|e| io_err(state, e))?;
            inputs.insert("state_sha256".into(), hex::encode(Sha256::digest(&bytes)));
            if let Some(d) = draws {
                file.draws = Some(*d);
            }
        }
        Command::CheckInjective { max_len } => {
            inputs.insert("max_len".into(), max_len.to_string());
        }
        Command::GodelNumber { expr, number } => {
            if let Some(e) = expr {
                inputs.insert("expr".into(), e.clone());
            }
            if let Some(n) = number {
                inputs.insert("number".into(), n.clone());
            }
        }
        Command::Simulate { target, lambda, horizon, m, a } => {
            override_machine(&mut file.machine, None, *m, *lambda, *horizon, target.clone(), *a);
        }
        Command::TauScaling { lengths, m, lambda, horizon, target, a } => {
            override_machine(&mut file.machine, lengths.clone(), *m, *lambda, *horizon, target.clone(), *a);
        }
        Command::ReadCost { rule, lengths, k } => {
            let r = &mut file.reading;
            if let Some(rule) = rule {
                r.rule = *rule;
            }
            if let Some(l) = lengths {
                r.lengths = l.clone();
            }
            if let Some(k) = k {
                r.k = *k;
            }
        }
    }
    let cfg = normalize(file, cli.command.name(), inputs)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| io_err(&cfg.out_dir, e))?;
    execute(&cli.command, &cfg)
}

fn override_machine(
    machine: &mut MachineParams,
    lengths: Option<Lengths>,
    m: Option<u32>,
    lambda: Option<f64>,
    horizon: Option<f64>,
    target: Option<String>,
    a: Option<i64>,
) {
    if let Some(l) = lengths {
        machine.lengths = l;
    }
    if let Some(m) = m {
        machine.m = m;
    }
    if let Some(l) = lambda {
        machine.lambda = l;
    }
    if horizon.is_some() {
        machine.horizon = horizon;
    }
    if target.is_some() {
        machine.target = target;
    }
    if let Some(a) = a {
        machine.a = a;
    }
}

fn parse_expr(map: &GodelMap, text: &str) -> Result<crate::lang::Expression, CliError> {
    map.alphabet().parse(text).map_err(|e| CliError::Input(e.to_string()))
}

fn execute(command: &Command, cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let digest = cfg.digest();
    let map = cfg.map.build().map_err(|e| CliError::Config(format!("map: {e}")))?;
    let out = |name: &str| cfg.out_dir.join(name);
    let mut written = Vec::new();
    match command {
        Command::Encode { expr } => {
            let x = parse_expr(&map, expr)?;
            let state = map.encode(&x)?;
            let path = out("state.json");
            write_json(&path, &digest, &to_json(&state)?)?;
            written.push(path);
        }
        Command::Decode { state, .. } => {
            let text = std::fs::read_to_string(state).map_err(|e| io_err(state, e))?;
            let parsed = StateFile::from_json(&text).map_err(from_state)?;
            let body = match parsed {
                StateFile::Product(p) => {
                    let x = map.decode_exact(&p)?;
                    to_json(&ExactDecode { mode: "exact", expression: map.alphabet().render(&x), symbols: x.symbols() })?
                }
                StateFile::Dense(d) => {
                    let samples = map.decode_sample(&d, cfg.seed, cfg.draws)?;
                    let rendered: Vec<String> = samples.iter().map(|x| map.alphabet().render(x)).collect();
                    let mut counts = BTreeMap::new();
                    for r in &rendered {
                        *counts.entry(r.clone()).or_insert(0usize) += 1;
                    }
                    to_json(&SampledDecode { mode: "sample", seed: cfg.seed, draws: cfg.draws, counts, samples: rendered })?
                }
            };
            let path = out("decoded.json");
            write_json(&path, &digest, &body)?;
            written.push(path);
        }
        Command::CheckInjective { max_len } => {
            let report = map.is_injective(*max_len)?;
            let body = InjectivityOut {
                kind: map.kind().to_string(),
                injective: report.injective,
                max_len: report.max_len,
                checked: report.checked,
                excluded_by_trimming: report.excluded_by_trimming,
                counterexample: report
                    .counterexample
                    .map(|(a, b)| [map.alphabet().render(&a), map.alphabet().render(&b)]),
            };
            let path = out("injectivity.json");
            write_json(&path, &digest, &to_json(&body)?)?;
            written.push(path);
        }
        Command::GodelNumber { expr, number } => {
            let (x, n) = match (expr, number) {
                (Some(e), _) => {
                    let x = parse_expr(&map, e)?;
                    let n = godel_number(&x, map.alphabet().len());
                    (x, n)
                }
                (None, Some(n)) => {
                    let n: BigUint = n.parse().map_err(|_| CliError::Input(format!("not a natural number: {n:?}")))?;
                    (godel_unnumber(&n, map.alphabet()), n)
                }
                (None, None) => return Err(CliError::Config("give --expr or --number".into())),
            };
            let body = NumberOut { expression: map.alphabet().render(&x), number: RawInteger(n.to_string()) };
            let path = out("godel_number.json");
            write_json(&path, &digest, &to_json(&body)?)?;
            written.push(path);
        }
        Command::Simulate { .. } => {
            let mp = &cfg.machine;
            let target_text =
                mp.target.as_deref().ok_or_else(|| CliError::Config("simulate needs a target (--target)".into()))?;
            let target = parse_expr(&map, target_text)?;
            let spec = build_transcription_machine(map.alphabet(), &target, mp.lambda)?.at_origin(mp.a);
            let sub = reachable_subspace(&spec, spec.initial())?;
            let proj = Projector { target, interval: spec.tape_sites() };
            let horizon = mp.horizon.unwrap_or(100.0 / mp.lambda);
            let trace = projector_trace(&sub, &proj, &time_grid(0.1 / mp.lambda, horizon))?;
            let csv = out("trace.csv");
            write_csv(&csv, &digest, &trace.to_csv())?;
            written.push(csv);
            let limit = limit_estimate(&trace);
            let tau = estimate_tau(&trace, mp.m);
            let body = SimulateOut {
                target: target_text.to_string(),
                lambda: Sig17(mp.lambda),
                m: mp.m,
                a: mp.a,
                dimension: sub.dim(),
                horizon: Sig17(trace.horizon()),
                points: trace.len(),
                limit: limit.as_ref().ok().map(|&l| Sig17(l)),
                tau: tau.as_ref().ok().map(|&t| Sig17(t)),
            };
            let path = out("simulate.json");
            write_json(&path, &digest, &to_json(&body)?)?;
            written.push(path);
            limit?;
            tau?;
        }
        Command::TauScaling { .. } => {
            let mp = &cfg.machine;
            let trials = match &mp.target {
                Some(t) => Trials::Fixed(parse_expr(&map, t)?),
                None => Trials::AllTargets,
            };
            let mut policy = HorizonPolicy::for_coupling(mp.lambda);
            if let Some(h) = mp.horizon {
                policy.initial_horizon = h;
            }
            let report = tau_scaling_with(map.alphabet(), &mp.lengths.0, mp.m, mp.a, &trials, mp.lambda, policy)?;
            let trials_text = match &mp.target {
                Some(t) => format!("fixed:{t}"),
                None => "all".to_string(),
            };
            let body = TauOut { trials: trials_text, report: &report };
            let path = out("tau_scaling.json");
            write_json(&path, &digest, &to_json(&body)?)?;
            written.push(path);
            let mut csv = String::from("n,tau,limit,target\n");
            for p in &report.points {
                csv.push_str(&format!("{},{},{},{}\n", p.n, sig17(p.tau), sig17(p.limit), p.target));
            }
            let path = out("tau_scaling.csv");
            write_csv(&path, &digest, &csv)?;
            written.push(path);
        }
        Command::ReadCost { .. } => {
            let rp = &cfg.reading;
            let rule = match rp.rule {
                RuleName::Line => straight_rule(),
                RuleName::List => PathRule::list(rp.sites.clone().unwrap_or_default())?,
                RuleName::Adversarial => PathRule::Adaptive(adversarial_rule(rp.k)),
            };
            let scaling = cost_scaling(&rule, &rp.lengths.0, rp.k)?;
            let body = CostOut { rule: rp.rule, scaling: &scaling };
            let path = out("read_cost.json");
            write_json(&path, &digest, &to_json(&body)?)?;
            written.push(path);
            let path = out("read_cost.csv");
            write_csv(&path, &digest, &scaling.to_csv())?;
            written.push(path);
        }
    }
    Ok(written)
}

#[derive(Serialize)]
struct ExactDecode<'a> {
    mode: &'static str,
    expression: String,
    symbols: &'a [usize],
}

#[derive(Serialize)]
struct SampledDecode {
    mode: &'static str,
    seed: u64,
    draws: usize,
    counts: BTreeMap<String, usize>,
    samples: Vec<String>,
}

#[derive(Serialize)]
struct InjectivityOut {
    kind: String,
    injective: bool,
    max_len: usize,
    checked: usize,
    excluded_by_trimming: usize,
    counterexample: Option<[String; 2]>,
}

#[derive(Serialize)]
struct NumberOut {
    expression: String,
    number: RawInteger,
}

#[derive(Serialize)]
struct SimulateOut {
    target: String,
    lambda: Sig17,
    m: u32,
    a: i64,
    dimension: usize,
    horizon: Sig17,
    points: usize,
    limit: Option<Sig17>,
    tau: Option<Sig17>,
}

#[derive(Serialize)]
struct TauOut<'a> {
    trials: String,
    #[serde(flatten)]
    report: &'a crate::head::ScalingReport,
}

#[derive(Serialize)]
struct CostOut<'a> {
    rule: RuleName,
    #[serde(flatten)]
    scaling: &'a crate::reading::CostScaling,
}

/// Runs the command line, reporting failures on stderr; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    // help and version go through clap's own printer
    if let Err(e) = Cli::try_parse_from(&args) {
        if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            | clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand)
        {
            let _ = e.print();
            return if e.kind() == clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 2 } else { 0 };
        }
    }
    match run(args) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
