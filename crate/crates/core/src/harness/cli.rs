//! Command-line interface.
//!
//! Subcommands `forecast`, `decide`, and `test` play the configured game and
//! write the transcript as JSONL; `metrics` evaluates a saved transcript
//! into CSV; `bench` runs an acceptance suite. Exit codes: 0 success,
//! 1 input error, 2 solver failure, 3 acceptance-check failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::bench;
use crate::decision::LossSpec;
use crate::error::{Error, Result};
use crate::harness::config::{Mode, RunConfig};
use crate::harness::{io, run};
use crate::kernel::{ForecastPoint, KernelSpec, Simplex};
use crate::metrics::{
    calibration_bins, kernel_discrepancy, regret, MetricRow, PredictionRule, TestFunction,
    Transcript,
};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DEFCAST_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "defcast",
    about = "Defensive forecasting engine: neutralized probability forecasts, \
             loss-competitive decisions, and game-theoretic testing",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GameArgs {
    /// Run configuration file (.toml or .json).
    #[arg(long)]
    config: PathBuf,
    /// Override the number of rounds.
    #[arg(long)]
    rounds: Option<usize>,
    /// Override the stream seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the kernel (inline JSON).
    #[arg(long)]
    kernel: Option<String>,
    /// Override the loss (inline JSON).
    #[arg(long)]
    loss: Option<String>,
    /// Transcript output path (JSONL); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Transcript to evaluate (JSONL).
    #[arg(long)]
    transcript: PathBuf,
    /// Calibration bin width.
    #[arg(long, default_value_t = 0.1)]
    bin_width: f64,
    /// Number of random representer test functions.
    #[arg(long, default_value_t = 20)]
    test_functions: usize,
    /// Seed for the random test functions.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Benchmark prediction rule (inline JSON) for the regret report.
    #[arg(long)]
    rule: Option<String>,
    /// Norm estimate for the regret bound.
    #[arg(long, default_value_t = 1.0)]
    norm_estimate: f64,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Suite: neutrality, theorem4, capital, regret, hoeffding, choice,
    /// calibration, mixture, oracle, or all.
    #[arg(long)]
    suite: String,
    /// Override the round count of the suite's runs.
    #[arg(long)]
    rounds: Option<usize>,
    /// Override the number of seeds per stream.
    #[arg(long)]
    seeds: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Play the game in forecast mode (probability forecasts only).
    Forecast(GameArgs),
    /// Play the game in decide mode (forecasts plus predictions).
    Decide(GameArgs),
    /// Play the game in test mode (forecasts plus the Skeptic panel).
    Test(GameArgs),
    /// Evaluate a saved transcript into metrics CSV.
    Metrics(MetricsArgs),
    /// Run an acceptance suite; exit 3 if any check fails.
    Bench(BenchArgs),
}

/// Runs the CLI on the given arguments (excluding the program name is fine;
/// clap handles both). Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Usage and parse diagnostics go to the diagnostic stream.
            eprint!("{e}");
            return 1;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Forecast(args) => play(args, Mode::Forecast),
        Command::Decide(args) => play(args, Mode::Decide),
        Command::Test(args) => play(args, Mode::Test),
        Command::Metrics(args) => metrics_report(args),
        Command::Bench(args) => bench_suite(args),
    }
}

fn resolve_out(path: &Path) -> PathBuf {
    if path.is_relative() && path.parent().map(|p| p.as_os_str().is_empty()).unwrap_or(true) {
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            if !dir.is_empty() {
                return PathBuf::from(dir).join(path);
            }
        }
    }
    path.to_path_buf()
}

fn play(args: GameArgs, mode: Mode) -> Result<i32> {
    let mut config = RunConfig::from_path(&args.config)?;
    config.mode = mode;
    if let Some(rounds) = args.rounds {
        config.rounds = rounds;
    }
    if let Some(seed) = args.seed {
        config.seed = Some(seed);
    }
    if let Some(kernel) = &args.kernel {
        config.kernel = KernelSpec::from_json(kernel)?;
    }
    if let Some(loss) = &args.loss {
        let loss: LossSpec =
            serde_json::from_str(loss).map_err(|e| Error::Input(format!("bad loss: {e}")))?;
        loss.validate()?;
        config.loss = Some(loss);
    }
    config.validate()?;

    let transcript = if config.doubling.enabled {
        run::doubling_wrapper(&config)?
    } else {
        run::run_game(&config)?
    };

    match &args.out {
        Some(path) => {
            let path = resolve_out(path);
            io::save_transcript(&path, &transcript)?;
        }
        None => {
            let stdout = std::io::stdout();
            io::write_transcript_jsonl(stdout.lock(), &transcript)?;
        }
    }
    Ok(0)
}

fn random_test_function(
    rng: &mut ChaCha8Rng,
    t: &Transcript,
    m: usize,
) -> Result<TestFunction> {
    let dim = t.rounds.first().map(|r| r.x.len()).unwrap_or(1);
    let mut anchors = Vec::new();
    let mut coeffs = Vec::new();
    for _ in 0..3 {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = Simplex::normalized((0..m).map(|_| rng.random_range(0.05..1.0)).collect())?;
        let y = rng.random_range(0..m);
        anchors.push(ForecastPoint::new(x, p, y)?);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        coeffs.push(sign * rng.random_range(0.2..1.0));
    }
    TestFunction::new(anchors, coeffs)
}

fn metrics_report(args: MetricsArgs) -> Result<i32> {
    let t = io::read_transcript_jsonl(&args.transcript)?;
    let m = t.meta.m.unwrap_or(2);
    let n = t.len() as u64;
    let mut rows = Vec::new();

    for class in 0..m.min(2).max(1) {
        let class = if m == 2 { 1 } else { class };
        for bin in calibration_bins(&t, args.bin_width, class)? {
            rows.push(MetricRow {
                metric: "calibration".into(),
                params: format!("class={class} bin=[{:.3},{:.3})", bin.lo, bin.hi),
                n: bin.count as u64,
                statistic: bin.deviation,
                bound: 0.0,
                ratio: 0.0,
            });
        }
        if m == 2 {
            break;
        }
    }

    if t.meta.kernel.is_some() && !t.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        for j in 0..args.test_functions {
            let f = random_test_function(&mut rng, &t, m)?;
            let d = kernel_discrepancy(&t, &f)?;
            rows.push(MetricRow {
                metric: "discrepancy".into(),
                params: format!("f={j}"),
                n,
                statistic: d.statistic,
                bound: d.bound,
                ratio: d.ratio,
            });
        }
    }

    if let Some(rule_json) = &args.rule {
        let rule: PredictionRule = serde_json::from_str(rule_json)
            .map_err(|e| Error::Input(format!("bad rule: {e}")))?;
        let loss = t
            .meta
            .loss
            .clone()
            .ok_or_else(|| Error::Input("transcript has no loss metadata".into()))?;
        let rep = regret(&t, &rule, &loss, args.norm_estimate)?;
        rows.push(MetricRow {
            metric: "regret".into(),
            params: "rule".into(),
            n,
            statistic: rep.regret,
            bound: rep.bound,
            ratio: if rep.bound > 0.0 { rep.regret / rep.bound } else { 0.0 },
        });
    }

    match &args.out {
        Some(path) => {
            let path = resolve_out(path);
            let file = std::fs::File::create(path)?;
            crate::metrics::write_metrics_csv(file, &rows)?;
        }
        None => {
            let stdout = std::io::stdout();
            crate::metrics::write_metrics_csv(stdout.lock(), &rows)?;
        }
    }
    Ok(0)
}

fn bench_suite(args: BenchArgs) -> Result<i32> {
    let mut params = bench::BenchParams::default();
    if let Some(rounds) = args.rounds {
        params.rounds = rounds;
    }
    if let Some(seeds) = args.seeds {
        params.seeds = seeds;
    }
    let report = bench::run_suite(&args.suite, &params)?;
    report.print();
    Ok(if report.passed() { 0 } else { 3 })
}
