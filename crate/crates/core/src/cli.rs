//! The `lqgame` command-line front end.
//!
//! ```text
//! lqgame nash   [--config PATH] [--out DIR] [--dump-certificate]
//! lqgame run    [--config PATH] [--seed N]... [--out DIR] [--full] [--wallclock]
//! lqgame verify [--config PATH] [--seed N]... [--out DIR]
//! ```
//!
//! Exit codes: 0 ok, 1 configuration or parse error, 2 infeasible instance,
//! 3 divergence (partial trace saved), 4 verification failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{best_response_l, solve_nash, ValueCertificate};
use crate::error::GameError;
use crate::exact::{outer_npg_exact, ExactSolverConfig};
use crate::linalg::{from_rows, to_rows};
use crate::model::{GainSide, LqGame, StructuredGain};
use crate::rng::{Purpose, RngStream, StreamKey};
use crate::sim::RolloutPlan;
use crate::trace::{fmt_f64, FailureReason, RunFailure, RunTrace};
use crate::verify::{all_pass, run_property_suite, summary_table, to_json_lines, SuiteOptions};
use crate::zo::{outer_zo_npg, ZoConfig};

/// Batch sizes of the full-scale stochastic experiment.
pub const FULL_M1: usize = 1_000_000;
pub const FULL_M2: usize = 500_000;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_DIVERGED: u8 = 3;
pub const EXIT_VERIFY: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "lqgame", version, about = "Zero-sum LQ game solvers and checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the Riccati equations for the saddle point.
    Nash(CommonArgs),
    /// Run exact or zeroth-order nested NPG, one trace per seed.
    Run(RunArgs),
    /// Run the randomized property suite.
    Verify(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed; repeat for several runs. Overrides the config's seed list.
    #[arg(long = "seed")]
    pub seeds: Vec<u64>,
    /// Output directory (default: the config's `output`, else `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the model-based certificate of the resulting gains.
    #[arg(long)]
    pub dump_certificate: bool,
    /// Worker threads for batch simulation (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Use the full-scale batch sizes (M1 = 1e6, M2 = 5e5) for zeroth-order runs.
    #[arg(long)]
    pub full: bool,
    /// Record elapsed milliseconds in the trace (makes output time-dependent).
    #[arg(long)]
    pub wallclock: bool,
    /// Override the outer iteration count.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Write this many rollouts under the final gains to CSV.
    #[arg(long)]
    pub dump_trajectories: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Nash,
    ExactNpg,
    ZoNpg,
    Verify,
}

/// Where the game comes from: `{"builtin": "benchmark"}` or `{"path": "game.json"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameSource {
    Builtin(String),
    Path(PathBuf),
}

impl Default for GameSource {
    fn default() -> Self {
        GameSource::Builtin("benchmark".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub game: GameSource,
    /// Initial gain block repeated over the horizon (row-major rows).
    /// Defaults to the benchmark's gain for the builtin benchmark and zero otherwise.
    #[serde(default)]
    pub k0: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub exact: Option<ExactSolverConfig>,
    #[serde(default)]
    pub zo: Option<ZoConfig>,
    #[serde(default)]
    pub suite: Option<SuiteOptions>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            game: GameSource::default(),
            k0: None,
            exact: None,
            zo: None,
            suite: None,
            seeds: Vec::new(),
            output: None,
        }
    }

    /// Parses and checks that the override sections fit the mode.
    pub fn from_json_str(text: &str) -> Result<Self, GameError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| GameError::Config(format!("config: {e}")))?;
        let misplaced = match cfg.mode {
            Mode::Nash => cfg.exact.is_some() || cfg.zo.is_some() || cfg.suite.is_some(),
            Mode::ExactNpg => cfg.zo.is_some() || cfg.suite.is_some(),
            Mode::ZoNpg => cfg.exact.is_some() || cfg.suite.is_some(),
            Mode::Verify => cfg.exact.is_some() || cfg.zo.is_some(),
        };
        if misplaced {
            return Err(GameError::Config(format!(
                "config: parameter section does not apply to mode {:?}",
                cfg.mode
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, GameError> {
        let text = fs::read_to_string(path)
            .map_err(|e| GameError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json_str(&text)?;
        // game paths are relative to the config file
        if let GameSource::Path(p) = &cfg.game {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.game = GameSource::Path(dir.join(p));
                }
            }
        }
        Ok(cfg)
    }

    pub fn load_game(&self) -> Result<LqGame, GameError> {
        match &self.game {
            GameSource::Builtin(name) => match name.as_str() {
                "benchmark" => Ok(LqGame::benchmark()),
                "scalar-demo" => Ok(LqGame::scalar_demo()),
                other => Err(GameError::Config(format!("unknown builtin game {other:?}"))),
            },
            GameSource::Path(p) => {
                if !p.exists() {
                    return Err(GameError::Config(format!("game file {} does not exist", p.display())));
                }
                LqGame::load(p)
            }
        }
    }

    pub fn initial_gain(&self, game: &LqGame) -> Result<StructuredGain, GameError> {
        match (&self.k0, &self.game) {
            (Some(rows), _) => game.constant_gain(GainSide::K, &from_rows(rows)?),
            (None, GameSource::Builtin(name)) if name == "benchmark" => Ok(game.benchmark_initial_gain()),
            (None, _) => Ok(game.zero_gain(GainSide::K)),
        }
    }
}

#[derive(Debug, Serialize)]
struct NashArtifact {
    value: f64,
    margin: f64,
    k_star: Vec<Vec<Vec<f64>>>,
    l_star: Vec<Vec<Vec<f64>>>,
    p_star: Vec<Vec<Vec<f64>>>,
}

fn gain_rows(g: &StructuredGain) -> Vec<Vec<Vec<f64>>> {
    g.blocks().iter().map(to_rows).collect()
}

#[derive(Debug, Serialize)]
struct SeedSummary {
    seed: u64,
    status: String,
    iterations_recorded: usize,
    initial_gap: Option<f64>,
    final_gap: Option<f64>,
    reduction_factor: Option<f64>,
    all_in_khat: bool,
    trajectories: u64,
    mu_hat: Option<f64>,
}

#[derive(Debug, Serialize)]
struct RunSummary {
    mode: Mode,
    seeds: Vec<u64>,
    target_value: f64,
    /// Median over seeds of the gap at each iteration (final entry: after the last update).
    median_gap: Vec<Option<f64>>,
    total_trajectories: u64,
    runs: Vec<SeedSummary>,
}

/// Exit code for an aborted run: an infeasible start is an input problem,
/// leaving the feasible set later is a divergence.
fn failure_code(f: &RunFailure) -> u8 {
    match &f.reason {
        FailureReason::Diverged { .. } => EXIT_DIVERGED,
        FailureReason::Game(GameError::Infeasible { .. }) if f.iteration > 0 => EXIT_DIVERGED,
        FailureReason::Game(e) => exit_code_for(e),
    }
}

/// Exit code for a library error.
pub fn exit_code_for(err: &GameError) -> u8 {
    match err {
        GameError::Unbounded { .. }
        | GameError::IndefiniteValue { .. }
        | GameError::Singular { .. }
        | GameError::Infeasible { .. }
        | GameError::NotStationary { .. } => EXIT_INFEASIBLE,
        GameError::InnerNotConverged { .. }
        | GameError::CovarianceGate { .. }
        | GameError::NonFiniteEstimate { .. } => EXIT_DIVERGED,
        _ => EXIT_CONFIG,
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl From<GameError> for Failure {
    fn from(e: GameError) -> Self {
        let message = match &e {
            GameError::Unbounded { .. } | GameError::IndefiniteValue { .. } => {
                format!("{e}\nthe game violates the standing assumption (Rw - D'P*D must stay positive definite)")
            }
            _ => e.to_string(),
        };
        Failure {
            code: exit_code_for(&e),
            message,
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: format!("{}: {e}", path.display()),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_failure(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    write_file(path, &text)
}

fn load_config(args: &CommonArgs, default_mode: Mode) -> Result<ExperimentConfig, Failure> {
    match &args.config {
        Some(p) => Ok(ExperimentConfig::load(p)?),
        None => Ok(ExperimentConfig::new(default_mode)),
    }
}

fn output_dir(args: &CommonArgs, cfg: &ExperimentConfig) -> Result<PathBuf, Failure> {
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).map_err(|e| io_failure(&dir, e))?;
    Ok(dir)
}

fn seeds(args: &CommonArgs, cfg: &ExperimentConfig) -> Vec<u64> {
    if !args.seeds.is_empty() {
        args.seeds.clone()
    } else if !cfg.seeds.is_empty() {
        cfg.seeds.clone()
    } else {
        vec![0]
    }
}

fn cmd_nash(args: &CommonArgs) -> Result<(), Failure> {
    let cfg = load_config(args, Mode::Nash)?;
    let game = cfg.load_game()?;
    let ne = solve_nash(&game)?;
    let out = output_dir(args, &cfg)?;
    write_json(
        &out.join("nash.json"),
        &NashArtifact {
            value: ne.value,
            margin: ne.margin,
            k_star: gain_rows(&ne.k_star),
            l_star: gain_rows(&ne.l_star),
            p_star: ne.p_star.iter().map(to_rows).collect(),
        },
    )?;
    if args.dump_certificate {
        let cert = ValueCertificate::compute(&game, &ne.k_star, &ne.l_star);
        write_json(&out.join("certificate.json"), &cert)?;
    }
    println!("value={:.4} margin={:.4}", ne.value, ne.margin);
    Ok(())
}

enum RunOutcome {
    Done(StructuredGain, RunTrace),
    Aborted(Box<RunFailure>),
}

fn gap_series(trace: &RunTrace) -> Vec<f64> {
    let mut g = trace.gaps();
    if let Some(r) = &trace.final_row {
        g.push(r.objective_gap);
    }
    g
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

fn dump_trajectories(path: &Path, game: &LqGame, k: &StructuredGain, count: usize, seed: u64) -> Result<(), Failure> {
    let l = best_response_l(game, k).l;
    let plan = RolloutPlan::new(game, k, &l);
    let mut w = csv::Writer::from_path(path).map_err(|e| io_failure(path, e))?;
    let m = game.state_dim();
    let mut header = vec!["sample".to_string(), "h".to_string()];
    header.extend((0..m).map(|i| format!("x{i}")));
    header.push("cost".into());
    w.write_record(&header).map_err(|e| io_failure(path, e))?;
    for i in 0..count {
        let stream = RngStream::new(seed, StreamKey::new(Purpose::Rollout, u64::MAX, 0, i as u64));
        let traj = plan.run(game, &mut stream.rng(), stream.id());
        for (h, x) in traj.states.iter().enumerate() {
            let mut rec = vec![i.to_string(), h.to_string()];
            rec.extend(x.iter().map(|v| fmt_f64(*v)));
            rec.push(fmt_f64(traj.cost));
            w.write_record(&rec).map_err(|e| io_failure(path, e))?;
        }
    }
    w.flush().map_err(|e| io_failure(path, e))
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let common = &args.common;
    let cfg = load_config(common, Mode::ExactNpg)?;
    if !matches!(cfg.mode, Mode::ExactNpg | Mode::ZoNpg) {
        return Err(Failure {
            code: EXIT_CONFIG,
            message: format!("run needs mode exact-npg or zo-npg, config has {:?}", cfg.mode),
        });
    }
    let game = cfg.load_game()?;
    let k0 = cfg.initial_gain(&game)?;
    let ne = solve_nash(&game)?;
    let out = output_dir(common, &cfg)?;
    let seeds = seeds(common, &cfg);

    let mut exact = cfg.exact.clone().unwrap_or_default();
    exact.target_value = Some(ne.value);
    exact.record_wallclock = args.wallclock;
    let mut zo = cfg.zo.clone().unwrap_or_else(ZoConfig::desk_scale);
    zo.target_value = Some(ne.value);
    zo.record_wallclock = args.wallclock;
    if args.full {
        zo.m1 = FULL_M1;
        zo.m2 = FULL_M2;
    }
    if let Some(t) = args.iterations {
        exact.iterations = t;
        zo.iterations = t;
    }

    let outcomes: Vec<(u64, RunOutcome)> = seeds
        .par_iter()
        .map(|&seed| {
            let res = match cfg.mode {
                Mode::ExactNpg => outer_npg_exact(&game, &k0, &exact),
                _ => outer_zo_npg(&game, &k0, &ZoConfig { seed, ..zo.clone() }),
            };
            let outcome = match res {
                Ok((k, tr)) => RunOutcome::Done(k, tr),
                Err(f) => RunOutcome::Aborted(Box::new(f)),
            };
            (seed, outcome)
        })
        .collect();

    let mut code = EXIT_OK;
    let mut runs = Vec::new();
    let mut series = Vec::new();
    for (seed, outcome) in &outcomes {
        let (trace, status, final_k) = match outcome {
            RunOutcome::Done(k, tr) => (tr, "ok".to_string(), Some(k)),
            RunOutcome::Aborted(f) => {
                let c = failure_code(f);
                code = code.max(c);
                eprintln!("seed {seed}: {f}");
                (&f.trace, format!("aborted at iteration {}: {}", f.iteration, f.reason), None)
            }
        };
        let csv_path = out.join(format!("trace_seed{seed}.csv"));
        let file = fs::File::create(&csv_path).map_err(|e| io_failure(&csv_path, e))?;
        trace.write_csv(file).map_err(|e| io_failure(&csv_path, e))?;

        let gaps = gap_series(trace);
        let initial = gaps.first().copied();
        let last = gaps.last().copied();
        let trajectories = trace
            .final_row
            .as_ref()
            .or(trace.rows.last())
            .map_or(0, |r| r.samples_used_inner + r.samples_used_outer);
        let all_in_khat = trace.rows.iter().chain(trace.final_row.as_ref()).all(|r| r.in_khat);
        runs.push(SeedSummary {
            seed: *seed,
            status,
            iterations_recorded: trace.rows.len(),
            initial_gap: initial,
            final_gap: last,
            reduction_factor: initial.zip(last).map(|(a, b)| a / b),
            all_in_khat,
            trajectories,
            mu_hat: trace.mu_hat,
        });
        series.push(gaps);

        if let Some(k) = final_k {
            if common.dump_certificate {
                let l = best_response_l(&game, k).l;
                let cert = ValueCertificate::compute(&game, k, &l);
                write_json(&out.join(format!("certificate_seed{seed}.json")), &cert)?;
            }
            if let Some(n) = args.dump_trajectories {
                dump_trajectories(&out.join(format!("trajectories_seed{seed}.csv")), &game, k, n, *seed)?;
            }
        }
        println!(
            "seed={seed} status={} final_gap={} reduction={}",
            runs.last().unwrap().status,
            last.map_or("n/a".into(), |g| format!("{g:.6e}")),
            runs.last().unwrap().reduction_factor.map_or("n/a".into(), |r| format!("{r:.3}")),
        );
    }

    let longest = series.iter().map(Vec::len).max().unwrap_or(0);
    let median_gap = (0..longest)
        .map(|t| median(series.iter().filter_map(|s| s.get(t).copied()).collect()))
        .collect();
    let summary = RunSummary {
        mode: cfg.mode,
        seeds: seeds.clone(),
        target_value: ne.value,
        median_gap,
        total_trajectories: runs.iter().map(|r| r.trajectories).sum(),
        runs,
    };
    write_json(&out.join("summary.json"), &summary)?;
    println!("total_trajectories={}", summary.total_trajectories);
    if code == EXIT_OK {
        Ok(())
    } else {
        Err(Failure {
            code,
            message: format!("partial traces written to {}", out.display()),
        })
    }
}

fn cmd_verify(args: &CommonArgs) -> Result<(), Failure> {
    let cfg = load_config(args, Mode::Verify)?;
    let opts = cfg.suite.clone().unwrap_or_default();
    let out = output_dir(args, &cfg)?;
    let mut reports = Vec::new();
    for seed in seeds(args, &cfg) {
        reports.extend(run_property_suite(seed, &opts));
    }
    let report_path = out.join("verify_report.jsonl");
    write_file(&report_path, &to_json_lines(&reports))?;
    let table = summary_table(&reports);
    write_file(&out.join("verify_summary.txt"), &table)?;
    print!("{table}");
    if all_pass(&reports) {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VERIFY,
            message: format!("verification failed; see {}", report_path.display()),
        })
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> u8 {
    let threads = match &cli.command {
        Command::Nash(a) | Command::Verify(a) => a.threads,
        Command::Run(a) => a.common.threads,
    };
    let body = || match &cli.command {
        Command::Nash(a) => cmd_nash(a),
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
    };
    let result = match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(body),
            Err(e) => Err(Failure {
                code: EXIT_CONFIG,
                message: format!("thread pool: {e}"),
            }),
        },
        None => body(),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

/// Entry point used by the binary.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    ExitCode::from(run(&cli))
}
