//! Command-line front end: `discover`, `simulate`, `benchmark`, `evaluate`.
//!
//! Every command accepts a JSON config (`--config`) whose values are
//! overridden by flags, and writes the merged config to
//! `config_echo.json` in the output directory. Feeding that file back via
//! `--config` reproduces the run.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{load_csv, ColumnSchema, LoadOptions};
use crate::error::{Error, Result};
use crate::eval::{self, EffectMetrics, GridConfig, RecoveryMetrics};
use crate::objective::Direction;
use crate::synth::{self, Setting, SynthConfig};
use crate::trainer::{self, DiscoveryReport, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Env var capping the worker thread count.
pub const THREADS_ENV: &str = "DIFFSUB_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Discover,
    Simulate,
    Benchmark,
    Evaluate,
}

/// Fully merged configuration of one invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<CommandKind>,
    pub data: Option<PathBuf>,
    /// Column schema, inlined so the echo is self-contained.
    pub schema: Option<Vec<ColumnSchema>>,
    pub load: LoadOptions,
    pub train: TrainConfig,
    pub synth: SynthConfig,
    pub grid: Option<GridConfig>,
    /// Number of subgroups to extract in sequence.
    pub subgroups: usize,
    pub report: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub verbosity: u8,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            data: None,
            schema: None,
            load: LoadOptions::default(),
            train: TrainConfig::default(),
            synth: SynthConfig::default(),
            grid: None,
            subgroups: 1,
            report: None,
            truth: None,
            out: None,
            verbosity: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Checks the parts relevant to `command`, including that referenced paths exist.
    pub fn validate(&self) -> Result<()> {
        let command = self
            .command
            .ok_or_else(|| Error::InvalidConfig("no command given".into()))?;
        if self.out.is_none() {
            return Err(Error::InvalidConfig("--out is required".into()));
        }
        match command {
            CommandKind::Discover => {
                self.train.validate()?;
                let data = self
                    .data
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("--data is required".into()))?;
                must_exist(data)?;
                if self.schema.is_none() {
                    return Err(Error::InvalidConfig(
                        "no schema: pass --schema or put schema.json next to the data".into(),
                    ));
                }
                if self.subgroups == 0 {
                    return Err(Error::InvalidConfig("--subgroups must be at least 1".into()));
                }
            }
            CommandKind::Simulate => self.synth.validate()?,
            CommandKind::Benchmark => {
                self.grid
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("benchmark needs a grid".into()))?
                    .validate()?;
            }
            CommandKind::Evaluate => {
                for (flag, p) in [("--report", &self.report), ("--truth", &self.truth)] {
                    let p = p
                        .as_ref()
                        .ok_or_else(|| Error::InvalidConfig(format!("{flag} is required")))?;
                    must_exist(p)?;
                }
                if self.schema.is_none() {
                    return Err(Error::InvalidConfig(
                        "no schema: pass --schema or put schema.json next to the truth file".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Parser, Debug)]
#[command(name = "diffsub", version, about = "Differential subgroup discovery")]
struct Cli {
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Find subgroups in a CSV file.
    Discover(DiscoverArgs),
    /// Generate a synthetic dataset with a planted subgroup.
    Simulate(SimulateArgs),
    /// Run a grid of synthetic recovery experiments.
    Benchmark(BenchmarkArgs),
    /// Score a discovery report against ground-truth columns.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// JSON config file; flags take precedence over its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Default)]
struct TrainFlags {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    refit_every: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Look for regions where the two groups agree instead of differ.
    #[arg(long)]
    min_divergence: bool,
}

impl TrainFlags {
    fn apply(&self, t: &mut TrainConfig) {
        if let Some(v) = self.lambda {
            t.objective.lambda = v;
        }
        if let Some(v) = self.gamma {
            t.objective.gamma = v;
        }
        if let Some(v) = self.epochs {
            t.epochs = v;
        }
        if let Some(v) = self.lr {
            t.lr = v;
        }
        if let Some(v) = self.refit_every {
            t.refit_every = v;
        }
        if let Some(v) = self.restarts {
            t.restarts = v;
        }
        if self.min_divergence {
            t.objective.direction = Direction::Minimize;
        }
    }
}

#[derive(Args, Debug, Default)]
struct SynthFlags {
    #[arg(long)]
    setting: Option<Setting>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
}

impl SynthFlags {
    fn apply(&self, s: &mut SynthConfig) {
        if let Some(v) = self.setting {
            s.setting = v;
        }
        if let Some(v) = self.tau {
            s.tau = v;
        }
        if let Some(v) = self.eta {
            s.eta = v;
        }
        if let Some(v) = self.n {
            s.n = v;
        }
        if let Some(v) = self.d {
            s.d = v;
        }
    }
}

#[derive(Args, Debug)]
struct DiscoverArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data: Option<PathBuf>,
    /// JSON column schema; defaults to schema.json beside the data file.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[command(flatten)]
    train: TrainFlags,
    /// Extract up to N subgroups, removing covered rows after each.
    #[arg(long)]
    subgroups: Option<usize>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    synth: SynthFlags,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    #[command(flatten)]
    common: Common,
    /// JSON grid file.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[command(flatten)]
    train: TrainFlags,
    /// Restricts the grid to this setting / tau, and sets n, d and eta.
    #[command(flatten)]
    synth: SynthFlags,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    report: Option<PathBuf>,
    /// CSV with ground-truth columns.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
}

/// Scores written by `evaluate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub rule: String,
    pub recovery: RecoveryMetrics,
    pub effect: Option<EffectMetrics>,
}

/// Machine-readable error written to stderr on failure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
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
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").to_string();
            return report_error("InvalidArguments", &first, EXIT_VALIDATION);
        }
    };
    init_logging(cli.verbose);
    if let Err(e) = init_threads() {
        return fail(&e);
    }
    match execute(cli) {
        Ok(summary) => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            let _ = writeln!(lock, "{summary}");
            EXIT_OK
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &Error) -> i32 {
    let code = if e.is_validation() { EXIT_VALIDATION } else { EXIT_RUNTIME };
    report_error(e.kind(), &e.to_string(), code)
}

fn report_error(kind: &str, message: &str, code: i32) -> i32 {
    let rep = ErrorReport {
        kind: kind.to_string(),
        message: message.to_string(),
        exit_code: code,
    };
    eprintln!("error: {message}");
    eprintln!("{}", serde_json::to_string(&rep).unwrap_or_default());
    code
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Caps the global rayon pool at `DIFFSUB_THREADS` workers, if set.
fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidConfig(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    // A pool may already exist when run() is called twice in one process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn base_config(common: &Common, command: CommandKind, verbose: u8) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => {
            must_exist(p)?;
            RunConfig::from_json_file(p)?
        }
        None => RunConfig::default(),
    };
    if let Some(c) = cfg.command {
        if c != command {
            return Err(Error::InvalidConfig(format!(
                "config is for `{}`, not `{}`",
                command_name(c),
                command_name(command)
            )));
        }
    }
    cfg.command = Some(command);
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    if verbose > 0 {
        cfg.verbosity = verbose;
    }
    Ok(cfg)
}

fn command_name(c: CommandKind) -> &'static str {
    match c {
        CommandKind::Discover => "discover",
        CommandKind::Simulate => "simulate",
        CommandKind::Benchmark => "benchmark",
        CommandKind::Evaluate => "evaluate",
    }
}

/// Turns parsed flags into a merged, validated [`RunConfig`].
fn build_config(cli: &Cli) -> Result<RunConfig> {
    match &cli.command {
        Cmd::Discover(a) => {
            let mut cfg = base_config(&a.common, CommandKind::Discover, cli.verbose)?;
            if let Some(d) = &a.data {
                cfg.data = Some(d.clone());
            }
            if let Some(s) = a.common.seed {
                cfg.train.seed = s;
            }
            a.train.apply(&mut cfg.train);
            if let Some(k) = a.subgroups {
                cfg.subgroups = k;
            }
            let schema_path = a.schema.clone().or_else(|| {
                if cfg.schema.is_some() {
                    return None;
                }
                sibling(cfg.data.as_deref(), "schema.json")
            });
            if let Some(p) = schema_path {
                cfg.schema = Some(read_schema(&p)?);
            }
            Ok(cfg)
        }
        Cmd::Simulate(a) => {
            let mut cfg = base_config(&a.common, CommandKind::Simulate, cli.verbose)?;
            if let Some(s) = a.common.seed {
                cfg.synth.seed = s;
            }
            a.synth.apply(&mut cfg.synth);
            Ok(cfg)
        }
        Cmd::Benchmark(a) => {
            let mut cfg = base_config(&a.common, CommandKind::Benchmark, cli.verbose)?;
            if let Some(p) = &a.grid {
                must_exist(p)?;
                cfg.grid = Some(serde_json::from_str(&read_text(p)?)?);
            }
            let grid = cfg.grid.get_or_insert_with(GridConfig::default);
            if let Some(s) = a.common.seed {
                grid.seed = s;
            }
            a.train.apply(&mut grid.train);
            a.synth.apply(&mut grid.synth);
            if let Some(s) = a.synth.setting {
                grid.settings = vec![s];
            }
            if let Some(t) = a.synth.tau {
                grid.taus = vec![t];
            }
            Ok(cfg)
        }
        Cmd::Evaluate(a) => {
            let mut cfg = base_config(&a.common, CommandKind::Evaluate, cli.verbose)?;
            if let Some(r) = &a.report {
                cfg.report = Some(r.clone());
            }
            if let Some(t) = &a.truth {
                cfg.truth = Some(t.clone());
            }
            if cfg.out.is_none() {
                cfg.out = cfg
                    .report
                    .as_deref()
                    .map(|r| r.parent().unwrap_or(Path::new("")).join("evaluation"));
            }
            let schema_path = a.schema.clone().or_else(|| {
                if cfg.schema.is_some() {
                    return None;
                }
                sibling(cfg.truth.as_deref(), "schema.json")
            });
            if let Some(p) = schema_path {
                cfg.schema = Some(read_schema(&p)?);
            }
            Ok(cfg)
        }
    }
}

fn execute(cli: Cli) -> Result<String> {
    let cfg = build_config(&cli)?;
    cfg.validate()?;
    let out = cfg.out.clone().expect("validated");
    fs::create_dir_all(&out)?;
    write_json(&out.join("config_echo.json"), &cfg)?;
    match cfg.command.expect("validated") {
        CommandKind::Discover => run_discover(&cfg, &out),
        CommandKind::Simulate => run_simulate(&cfg, &out),
        CommandKind::Benchmark => run_benchmark(&cfg, &out),
        CommandKind::Evaluate => run_evaluate(&cfg, &out),
    }
}

fn run_discover(cfg: &RunConfig, out: &Path) -> Result<String> {
    let schema = cfg.schema.as_deref().expect("validated");
    let ds = load_csv(cfg.data.as_ref().expect("validated"), schema, cfg.load)?;
    let reports = if cfg.subgroups == 1 {
        vec![trainer::discover(&ds, &cfg.train)?]
    } else {
        let multi = trainer::discover_multiple(&ds, &cfg.train, cfg.subgroups)?;
        if multi.reports.is_empty() {
            return Err(Error::InsufficientData(
                multi.stopped_early.unwrap_or_else(|| "no subgroup found".into()),
            ));
        }
        write_json(&out.join("subgroups.json"), &multi)?;
        multi.reports
    };
    for (k, rep) in reports.iter().enumerate() {
        let suffix = if k == 0 { String::new() } else { format!("_{}", k + 1) };
        write_json(&out.join(format!("report{suffix}.json")), rep)?;
        write_trace(&out.join(format!("trace{suffix}.jsonl")), rep)?;
    }
    let mut lines = Vec::new();
    for (k, rep) in reports.iter().enumerate() {
        lines.push(summarize_report(k + 1, rep));
    }
    Ok(lines.join("\n"))
}

fn summarize_report(k: usize, rep: &DiscoveryReport) -> String {
    let mut s = format!(
        "subgroup {k}: {}\n  coverage g0={:.3} g1={:.3}  members {}/{}  loss={:.4} E={:.4}",
        rep.rule.text,
        rep.coverage[0],
        rep.coverage[1],
        rep.n_members[0],
        rep.n_members[1],
        rep.scores.loss,
        rep.hard_exceptionality
    );
    if let Some(e) = &rep.effect {
        s.push_str(&format!("  tau_hat={:.3}", e.tau_hat));
    }
    s
}

fn write_trace(path: &Path, rep: &DiscoveryReport) -> Result<()> {
    let mut buf = String::new();
    for e in &rep.trace {
        buf.push_str(&serde_json::to_string(e)?);
        buf.push('\n');
    }
    fs::write(path, buf)?;
    Ok(())
}

fn run_simulate(cfg: &RunConfig, out: &Path) -> Result<String> {
    let (ds, truth) = synth::generate(&cfg.synth)?;
    synth::write_outputs(out, &ds, &truth)?;
    Ok(format!(
        "simulated {} rows ({} setting, d={}, tau={}): true coverage {:.3}, wrote {}",
        ds.n(),
        cfg.synth.setting,
        cfg.synth.d,
        cfg.synth.tau,
        truth.coverage,
        out.join("data.csv").display()
    ))
}

fn run_benchmark(cfg: &RunConfig, out: &Path) -> Result<String> {
    let grid = cfg.grid.as_ref().expect("validated");
    let res = eval::benchmark(grid)?;
    eval::write_rows_csv(out.join("results.csv"), &res.rows, true)?;
    eval::write_summary_csv(out.join("summary.csv"), &res.summary)?;
    write_json(&out.join("summary.json"), &res.summary)?;
    let mut lines = vec![format!("{} runs", res.rows.len())];
    for c in &res.summary {
        let f1 = c
            .f1
            .as_ref()
            .map(|m| format!("{:.3} ± {:.3}", m.mean, m.se))
            .unwrap_or_else(|| "n/a".into());
        lines.push(format!("{:<24} tau={:<4} F1 {f1}  failures {}", c.setting.name(), c.tau, c.failures));
    }
    Ok(lines.join("\n"))
}

fn run_evaluate(cfg: &RunConfig, out: &Path) -> Result<String> {
    let report: DiscoveryReport = serde_json::from_str(&read_text(cfg.report.as_ref().expect("validated"))?)?;
    let schema = cfg.schema.as_deref().expect("validated");
    let ds = load_csv(cfg.truth.as_ref().expect("validated"), schema, cfg.load)?;
    let truth = ds.truth_membership().ok_or(Error::MissingTruth("true_membership"))?;
    let pred = report.rule.membership(&ds)?;
    let recovery = eval::recovery(&pred, truth)?;
    let effect = if ds.truth_effect().is_some() {
        match eval::effect_metrics_for(&ds, &pred) {
            Ok(m) => Some(m),
            Err(e) => {
                log::warn!("no effect metrics: {e}");
                None
            }
        }
    } else {
        None
    };
    let ev = Evaluation {
        rule: report.rule.text.clone(),
        recovery,
        effect,
    };
    write_json(&out.join("metrics.json"), &ev)?;
    let mut s = format!(
        "rule: {}\nF1={:.3} accuracy={:.3} precision={:.3} recall={:.3}",
        ev.rule, recovery.f1, recovery.accuracy, recovery.precision, recovery.recall
    );
    if let Some(e) = &ev.effect {
        s.push_str(&format!("\ntau_hat={:.3} PEHE={:.3}", e.tau_hat, e.pehe));
    }
    Ok(s)
}

fn sibling(path: Option<&Path>, name: &str) -> Option<PathBuf> {
    let p = path?.parent().map(|d| d.join(name)).unwrap_or_else(|| PathBuf::from(name));
    p.exists().then_some(p)
}

fn must_exist(p: &Path) -> Result<()> {
    if p.exists() {
        Ok(())
    } else {
        Err(Error::NotFound(p.display().to_string()))
    }
}

fn read_text(p: &Path) -> Result<String> {
    must_exist(p)?;
    Ok(fs::read_to_string(p)?)
}

fn read_schema(p: &Path) -> Result<Vec<ColumnSchema>> {
    Ok(serde_json::from_str(&read_text(p)?)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}
