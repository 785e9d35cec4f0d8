//! Command implementations behind the `stable-branching` binary.
//!
//! Settings come from three layers. Command-line flags win over keys in the
//! optional TOML config file, which win over built-in defaults. In the file,
//! keys are the long flag names without the leading dashes, read from a
//! `[common]` table and then overridden by the table named after the
//! subcommand:
//!
//! ```toml
//! [common]
//! beta = 0.5
//! seed = 7
//!
//! [verify]
//! replicates = 5000
//! t-grid = [1.0, 10.0]
//! ```

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analytic::{
    extinction_prob_x, extinction_prob_y, finite_laplace, limit_laplace, pgf_f, pgf_phi, ModelParams, Ordering,
    RegimeLimit,
};
use crate::error::{domain, Error, Result};
use crate::simulator::{
    run_replicates, simulate_trajectory, Process, SimConfig, DEFAULT_BATCH_CAP, DEFAULT_EVENT_CAP,
    DEFAULT_POPULATION_CAP,
};
use crate::verify::{estimate_pgf_grid, run_verification_suite, SuiteReport, SuiteSpec};

/// Environment variable read for the default seed.
pub const SEED_ENV: &str = "STABLE_BRANCHING_SEED";
pub const DEFAULT_SEED: u64 = 42;
pub const CSV_REPORT: &str = "verify_report.csv";
pub const RECORDS_REPORT: &str = "verify_report.jsonl";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// Comma-separated table with a header row.
    Csv,
    /// One JSON object per line.
    Records,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessArg {
    X,
    Y,
}

impl From<ProcessArg> for Process {
    fn from(p: ProcessArg) -> Self {
        match p {
            ProcessArg::X => Process::X,
            ProcessArg::Y => Process::Y,
        }
    }
}

/// A list of reals, written `0.1,1,10` on the command line. An empty string
/// is an empty grid.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(transparent)]
pub struct Grid(pub Vec<f64>);

fn parse_grid(text: &str) -> std::result::Result<Grid, String> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Grid(Vec::new()));
    }
    text.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Grid)
}

/// Settings shared by every subcommand. Each field is optional so that
/// unset flags fall through to the config file and then to defaults.
#[derive(Args, Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Settings {
    /// Particle lifetime rate K > 0 [default: 1]
    #[arg(long = "K", value_name = "K")]
    #[serde(rename = "K")]
    pub k: Option<f64>,
    /// Offspring tail index, 0 < beta <= 1 [default: 0.5]
    #[arg(long)]
    pub beta: Option<f64>,
    /// Immigration tail index, 0 < gamma <= 1 [default: 0.5]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Immigration rate theta > 0 [default: 1]
    #[arg(long)]
    pub theta: Option<f64>,
    /// Base seed [default: $STABLE_BRANCHING_SEED, else 42]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo replicates
    #[arg(long)]
    pub replicates: Option<u64>,
    /// Worker threads; results do not depend on it [default: available cores]
    #[arg(long)]
    pub workers: Option<usize>,
    /// Simulation horizon [default: 1]
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Comma-separated times
    #[arg(long, value_parser = parse_grid, value_name = "LIST")]
    pub t_grid: Option<Grid>,
    /// Comma-separated p.g.f. arguments in [0, 1]
    #[arg(long, value_parser = parse_grid, value_name = "LIST")]
    pub s_grid: Option<Grid>,
    /// Comma-separated Laplace arguments >= 0
    #[arg(long, value_parser = parse_grid, value_name = "LIST")]
    pub lambda_grid: Option<Grid>,
    /// Runs whose population exceeds this are aborted [default: 10000000]
    #[arg(long)]
    pub population_cap: Option<u64>,
    /// Single offspring or batch draws are truncated here [default: 1000000]
    #[arg(long)]
    pub batch_cap: Option<u64>,
    /// Runs reaching this many events are aborted [default: 100000000]
    #[arg(long)]
    pub event_cap: Option<u64>,
    /// Output file (pgf, simulate, limit) or directory (verify) [default: stdout / .]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format for tables
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Limit case 1-5 for `limit` [default: every case matching the parameters]
    #[arg(long)]
    pub case: Option<u8>,
    /// Process simulated by `simulate`
    #[arg(long, value_enum)]
    pub process: Option<ProcessArg>,
    /// Write replicate 0's event-by-event trajectory (`clock,alive,event_type`) here
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    /// Write every replicate's terminal state here
    #[arg(long)]
    pub states: Option<PathBuf>,
}

impl Settings {
    /// Fills every unset field from `lower`.
    fn or(self, lower: Settings) -> Settings {
        Settings {
            k: self.k.or(lower.k),
            beta: self.beta.or(lower.beta),
            gamma: self.gamma.or(lower.gamma),
            theta: self.theta.or(lower.theta),
            seed: self.seed.or(lower.seed),
            replicates: self.replicates.or(lower.replicates),
            workers: self.workers.or(lower.workers),
            horizon: self.horizon.or(lower.horizon),
            t_grid: self.t_grid.or(lower.t_grid),
            s_grid: self.s_grid.or(lower.s_grid),
            lambda_grid: self.lambda_grid.or(lower.lambda_grid),
            population_cap: self.population_cap.or(lower.population_cap),
            batch_cap: self.batch_cap.or(lower.batch_cap),
            event_cap: self.event_cap.or(lower.event_cap),
            out: self.out.or(lower.out),
            format: self.format.or(lower.format),
            case: self.case.or(lower.case),
            process: self.process.or(lower.process),
            trajectory: self.trajectory.or(lower.trajectory),
            states: self.states.or(lower.states),
        }
    }

    fn any_parameter(&self) -> bool {
        self.k.is_some() || self.beta.is_some() || self.gamma.is_some() || self.theta.is_some()
    }
}

#[derive(Args, Clone, Debug, Default, PartialEq)]
pub struct CommandArgs {
    /// TOML file with `[common]` and per-subcommand tables of settings
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Subcommand, Clone, Debug, PartialEq)]
pub enum CliCommand {
    /// Tabulate F(t,s), Phi(t,s) and the extinction probabilities
    Pgf(CommandArgs),
    /// Simulate replicates and estimate E[s^X(t)] or E[s^Y(t)]
    Simulate(CommandArgs),
    /// Tabulate Psi(t,lambda) against its t -> infinity limit
    Limit(CommandArgs),
    /// Run the verification suite and write verify_report.{csv,jsonl}
    Verify(CommandArgs),
}

#[derive(Parser, Clone, Debug, PartialEq)]
#[command(
    name = "stable-branching",
    version,
    about = "Critical Markov branching with Sibuya offspring tails and discrete-stable immigration"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Command {
    Pgf,
    Simulate,
    Limit,
    Verify,
}

impl Command {
    fn section(self) -> &'static str {
        match self {
            Command::Pgf => "pgf",
            Command::Simulate => "simulate",
            Command::Limit => "limit",
            Command::Verify => "verify",
        }
    }
}

/// Fully resolved and validated settings for one subcommand.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub params: ModelParams,
    /// Whether any model parameter was set explicitly.
    pub explicit_params: bool,
    pub t_grid: Vec<f64>,
    pub s_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub replicates: u64,
    pub seed: u64,
    pub workers: usize,
    pub horizon: f64,
    pub population_cap: u64,
    pub batch_cap: u64,
    pub event_cap: u64,
    pub case: Option<u8>,
    pub process: Process,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub trajectory: Option<PathBuf>,
    pub states: Option<PathBuf>,
}

/// Reads the `[common]` and `[section]` tables of a config file.
pub fn load_config_file(path: &Path, section: &str) -> Result<Settings> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut table: toml::Table = text
        .parse()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    for key in table.keys() {
        if !["common", "pgf", "simulate", "limit", "verify"].contains(&key.as_str()) {
            return Err(Error::Config(format!("{}: unknown section `{key}`", path.display())));
        }
    }
    let mut read = |name: &str| -> Result<Settings> {
        match table.remove(name) {
            None => Ok(Settings::default()),
            Some(v) => v
                .try_into()
                .map_err(|e| Error::Config(format!("{} [{name}]: {e}", path.display()))),
        }
    };
    let specific = read(section)?;
    let common = read("common")?;
    Ok(specific.or(common))
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn resolve_seed(explicit: Option<u64>) -> Result<u64> {
    if let Some(seed) = explicit {
        log::info!("seed {seed} (flag or config file)");
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => {
            let seed = v
                .trim()
                .parse::<u64>()
                .map_err(|e| Error::Config(format!("{SEED_ENV}={v}: {e}")))?;
            log::info!("seed {seed} from {SEED_ENV}");
            Ok(seed)
        }
        Err(_) => {
            log::info!("seed {DEFAULT_SEED} (default)");
            Ok(DEFAULT_SEED)
        }
    }
}

fn check_grid(name: &'static str, grid: &[f64], lo: f64, hi: f64, constraint: &'static str) -> Result<()> {
    for &v in grid {
        if !(v >= lo && v <= hi) {
            return Err(domain(name, v, constraint));
        }
    }
    Ok(())
}

impl RunConfig {
    /// Layers `flags` over the config file (if any) over defaults and
    /// validates the result.
    pub fn resolve(command: Command, args: CommandArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => load_config_file(path, command.section())?,
            None => Settings::default(),
        };
        let s = args.settings.or(file);
        let explicit_params = s.any_parameter();
        let params = ModelParams::new(
            s.k.unwrap_or(1.0),
            s.beta.unwrap_or(0.5),
            s.gamma.unwrap_or(0.5),
            s.theta.unwrap_or(1.0),
        )?;
        let horizon = s.horizon.unwrap_or(1.0);
        let (t_default, s_default, l_default, n_default) = match command {
            Command::Pgf => (
                vec![0.0, 0.1, 1.0, 10.0, 100.0],
                vec![0.0, 0.25, 0.5, 0.75, 0.95, 1.0],
                vec![],
                0,
            ),
            Command::Simulate => (vec![horizon], vec![0.0, 0.3, 0.6], vec![], 10_000),
            Command::Limit => (
                [1e2, 1e3, 1e4].iter().map(|m| m * params.a()).collect(),
                vec![],
                vec![0.0, 0.5, 1.0, 2.0],
                0,
            ),
            Command::Verify => {
                let d = SuiteSpec::default_suite(0);
                (d.t_grid, d.s_grid, d.lambda_grid, d.pgf_replicates)
            }
        };
        let cfg = Self {
            command,
            params,
            explicit_params,
            t_grid: s.t_grid.map_or(t_default, |g| g.0),
            s_grid: s.s_grid.map_or(s_default, |g| g.0),
            lambda_grid: s.lambda_grid.map_or(l_default, |g| g.0),
            replicates: s.replicates.unwrap_or(n_default),
            seed: resolve_seed(s.seed)?,
            workers: s.workers.unwrap_or_else(default_workers),
            horizon,
            population_cap: s.population_cap.unwrap_or(DEFAULT_POPULATION_CAP),
            batch_cap: s.batch_cap.unwrap_or(DEFAULT_BATCH_CAP),
            event_cap: s.event_cap.unwrap_or(DEFAULT_EVENT_CAP),
            case: s.case,
            process: s.process.map_or(Process::Y, Process::from),
            out: s.out,
            format: s.format.unwrap_or(Format::Csv),
            trajectory: s.trajectory,
            states: s.states,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_grid("t", &self.t_grid, 0.0, f64::MAX, "0 <= t < infinity")?;
        check_grid("lambda", &self.lambda_grid, 0.0, f64::MAX, "lambda >= 0")?;
        match self.command {
            Command::Simulate => check_grid("s", &self.s_grid, 0.0, 1.0 - f64::EPSILON, "0 <= s < 1")?,
            _ => check_grid("s", &self.s_grid, 0.0, 1.0, "0 <= s <= 1")?,
        }
        if self.workers == 0 {
            return Err(domain("workers", 0.0, "workers >= 1"));
        }
        if self.command == Command::Simulate {
            check_grid("t", &self.t_grid, 0.0, self.horizon, "0 <= t <= horizon")?;
        }
        if let Some(c) = self.case {
            RegimeLimit::new(c, &self.params)?;
        }
        self.sim_config()?;
        Ok(())
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let mut cfg = SimConfig::new(self.params, self.horizon, self.seed)?;
        cfg.population_cap = self.population_cap;
        cfg.batch_cap = self.batch_cap;
        cfg.event_cap = self.event_cap;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Suite descriptor for `verify`: the three default parameter sets
    /// unless a model parameter was given, in which case only that set.
    pub fn suite_spec(&self) -> SuiteSpec {
        let base = SuiteSpec::default_suite(self.seed);
        let ratio = base.degenerate_replicates as f64 / base.laplace_replicates as f64;
        SuiteSpec {
            workers: self.workers,
            parameter_sets: if self.explicit_params {
                vec![self.params]
            } else {
                SuiteSpec::default_parameter_sets()
            },
            t_grid: self.t_grid.clone(),
            s_grid: self.s_grid.clone(),
            lambda_grid: self.lambda_grid.clone(),
            pgf_replicates: self.replicates,
            laplace_replicates: self.replicates,
            degenerate_replicates: ((self.replicates as f64 * ratio).ceil() as u64).min(self.replicates),
            batch_cap: self.batch_cap,
            population_cap: self.population_cap,
            event_cap: self.event_cap,
            ..base
        }
    }

    /// Opens `--out` or stdout.
    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(io::BufWriter::new(fs::File::create(path)?)),
            None => Box::new(io::BufWriter::new(io::stdout().lock())),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Real(f64),
    Count(u64),
    Text(String),
    Flag(bool),
    Missing,
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Real(v) => write!(f, "{v:?}"),
            Cell::Count(v) => write!(f, "{v}"),
            Cell::Text(v) => f.write_str(v),
            Cell::Flag(v) => write!(f, "{v}"),
            Cell::Missing => Ok(()),
        }
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Real)
    }
}

/// A rectangular result with named columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn write<W: Write>(&self, format: Format, mut out: W) -> Result<()> {
        match format {
            Format::Csv => {
                writeln!(out, "{}", self.columns.join(","))?;
                for row in &self.rows {
                    let line: Vec<String> = row.iter().map(Cell::to_string).collect();
                    writeln!(out, "{}", line.join(","))?;
                }
            }
            Format::Records => {
                for row in &self.rows {
                    let mut obj = serde_json::Map::new();
                    for (c, v) in self.columns.iter().zip(row) {
                        let value = match v {
                            Cell::Missing => serde_json::Value::Null,
                            other => serde_json::to_value(other).map_err(|e| Error::Io(e.to_string()))?,
                        };
                        obj.insert((*c).to_string(), value);
                    }
                    writeln!(out, "{}", serde_json::Value::Object(obj))?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn regime_name(p: &ModelParams) -> &'static str {
    match p.ordering() {
        Ordering::Equal => "beta=gamma",
        Ordering::GammaBelow => "gamma<beta",
        Ordering::GammaAbove => "gamma>beta",
    }
}

/// Rows `(t, s, F, Phi, extinction_X, extinction_Y, regime)`.
pub fn cmd_pgf(cfg: &RunConfig) -> Result<Table> {
    let p = &cfg.params;
    let mut table = Table::new(&["t", "s", "F", "Phi", "extinction_X", "extinction_Y", "regime"]);
    for &t in &cfg.t_grid {
        let ex = extinction_prob_x(t, p)?;
        let ey = extinction_prob_y(t, p)?;
        for &s in &cfg.s_grid {
            table.rows.push(vec![
                Cell::Real(t),
                Cell::Real(s),
                Cell::Real(pgf_f(t, s, p)?),
                Cell::Real(pgf_phi(t, s, p)?),
                Cell::Real(ex),
                Cell::Real(ey),
                Cell::Text(regime_name(p).into()),
            ]);
        }
    }
    Ok(table)
}

/// Estimator rows for each `(t, s)` with abort and truncation diagnostics.
/// Optionally writes replicate 0's trajectory and every terminal state.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Table> {
    let sim = cfg.sim_config()?;
    if let Some(path) = &cfg.trajectory {
        let tr = simulate_trajectory(&sim, cfg.process, 0)?;
        tr.write_csv(io::BufWriter::new(fs::File::create(path)?))?;
    }
    if let Some(path) = &cfg.states {
        let states = run_replicates(&sim, cfg.process, cfg.replicates, cfg.workers)?;
        let mut out = io::BufWriter::new(fs::File::create(path)?);
        writeln!(
            out,
            "stream_id,clock,alive,events,deaths,immigrations,truncations,peak,aborted"
        )?;
        for (i, s) in states.iter().enumerate() {
            writeln!(
                out,
                "{i},{},{},{},{},{},{},{},{}",
                s.clock, s.alive, s.events_processed, s.deaths, s.immigrations, s.truncations, s.peak, s.aborted
            )?;
        }
        let aborted = states.iter().filter(|s| s.aborted).count();
        log::info!("{aborted} of {} replicates aborted", states.len());
    }
    let rows = estimate_pgf_grid(cfg.process, &cfg.t_grid, &cfg.s_grid, cfg.replicates, &sim, cfg.workers)?;
    let mut table = Table::new(&[
        "process",
        "t",
        "s",
        "estimate",
        "std_error",
        "analytic",
        "z_score",
        "n_replicates",
        "abort_fraction",
        "truncation_bias_bound",
        "flagged",
    ]);
    let mut k = 0;
    for &t in &cfg.t_grid {
        for &s in &cfg.s_grid {
            let r = &rows[k];
            k += 1;
            table.rows.push(vec![
                Cell::Text(cfg.process.to_string()),
                Cell::Real(t),
                Cell::Real(s),
                Cell::Real(r.mc_estimate),
                Cell::Real(r.std_error),
                Cell::Real(r.analytic_value),
                Cell::Real(r.z_score),
                Cell::Count(r.n_replicates),
                Cell::Real(r.abort_fraction),
                Cell::Real(r.truncation_bias_bound),
                Cell::Flag(r.flagged),
            ]);
        }
    }
    Ok(table)
}

/// Rows `(case, t, t_over_A, lambda, finite, limit, gap)`.
pub fn cmd_limit(cfg: &RunConfig) -> Result<Table> {
    let p = &cfg.params;
    let cases = match cfg.case {
        Some(c) => vec![RegimeLimit::new(c, p)?],
        None => RegimeLimit::applicable(p),
    };
    let mut table = Table::new(&["case", "t", "t_over_A", "lambda", "finite", "limit", "gap"]);
    for case in &cases {
        for &t in &cfg.t_grid {
            for &l in &cfg.lambda_grid {
                let finite = finite_laplace(t, l, case, p)?;
                let limit = match limit_laplace(l, case, p) {
                    Ok(v) => Some(v),
                    Err(Error::UndefinedLimit) => None,
                    Err(e) => return Err(e),
                };
                table.rows.push(vec![
                    Cell::Count(case.case_id as u64),
                    Cell::Real(t),
                    Cell::Real(t / p.a()),
                    Cell::Real(l),
                    Cell::Real(finite),
                    limit.into(),
                    limit.map(|v| (finite - v).abs()).into(),
                ]);
            }
        }
    }
    Ok(table)
}

/// Runs the suite and writes `verify_report.csv` and `verify_report.jsonl`
/// into the output directory.
pub fn cmd_verify(cfg: &RunConfig) -> Result<SuiteReport> {
    let report = run_verification_suite(&cfg.suite_spec())?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    report.write_csv(io::BufWriter::new(fs::File::create(dir.join(CSV_REPORT))?))?;
    report.write_jsonl(io::BufWriter::new(fs::File::create(dir.join(RECORDS_REPORT))?))?;
    Ok(report)
}

/// Runs a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    let (command, args) = match cli.command {
        CliCommand::Pgf(a) => (Command::Pgf, a),
        CliCommand::Simulate(a) => (Command::Simulate, a),
        CliCommand::Limit(a) => (Command::Limit, a),
        CliCommand::Verify(a) => (Command::Verify, a),
    };
    let cfg = RunConfig::resolve(command, args)?;
    let table = match command {
        Command::Pgf => cmd_pgf(&cfg)?,
        Command::Simulate => cmd_simulate(&cfg)?,
        Command::Limit => cmd_limit(&cfg)?,
        Command::Verify => {
            let report = cmd_verify(&cfg)?;
            for o in report.oracle_failures() {
                log::error!(
                    "{} at {}: {} vs {} (tolerance {})",
                    o.label,
                    o.point,
                    o.closed_form,
                    o.oracle_value,
                    o.tolerance
                );
            }
            log::info!(
                "{} oracle rows, {} failed; {} estimate rows, |z| > 4 fraction {}",
                report.oracles().count(),
                report.oracle_failures().len(),
                report.estimates().count(),
                report.exceedance_fraction()
            );
            return Ok(if report.passed() { 0 } else { 1 });
        }
    };
    table.write(cfg.format, cfg.writer()?)?;
    Ok(0)
}
