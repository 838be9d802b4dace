//! Command-line pipeline for the robust MDP solver: validate a
//! configuration, solve a finite MDP exactly, train the neural policy on a
//! price CSV, backtest a checkpoint, or certify the build.
//!
//! Exit codes: 0 success, 2 invalid input, 3 runtime failure. Errors go to
//! stderr as one-line JSON objects with a stable `code` field.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use robust_mdp::ambiguity::AmbiguityMode;
use robust_mdp::backtest::run_backtest;
use robust_mdp::bellman::{tabular_solve, BellmanError, FiniteMdp};
use robust_mdp::core::{validate_config, ActionVector, MdpConfig, ModeKind};
use robust_mdp::data::{
    build_windows, compute_returns, estimate_sigma_r, load_prices, period_slice, SplitSummary,
    TestPanel, TestPeriodSummary,
};
use robust_mdp::neural::{train, Checkpoint, NeuralError};
use robust_mdp::selfcheck;
use robust_mdp::RewardSpec;

#[derive(Parser)]
#[command(name = "robust-mdp", version, about = "Distributionally robust portfolio MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration against the standing assumptions and print
    /// the effective growth constant and discount margin.
    Validate(ValidateArgs),
    /// Solve a finite robust MDP by exact value iteration.
    SolveTabular(SolveArgs),
    /// Train the actor/critic networks on a price CSV.
    Train(TrainArgs),
    /// Roll a trained checkpoint through test periods and report metrics.
    Backtest(BacktestArgs),
    /// Run the oracle, contraction, and certification suites end to end.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct ValidateArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Finite MDP as JSON.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Directory for the solution JSON (also printed to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Price CSV (date,TICKER1,...).
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint output path.
    #[arg(long)]
    model: PathBuf,
    /// Directory for the train report and split summary.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BacktestArgs {
    /// Trained checkpoint.
    #[arg(long)]
    model: PathBuf,
    /// Price CSV (date,TICKER1,...).
    #[arg(long)]
    data: PathBuf,
    /// Test period as START:END (ISO dates, inclusive); repeatable.
    /// Without periods the whole panel is one period.
    #[arg(long = "period")]
    periods: Vec<String>,
    /// Output directory for reports and cumulative-profit CSVs.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// An error with a stable code, a message, and the exit class.
struct CliError {
    code: &'static str,
    message: String,
    exit: u8,
}

impl CliError {
    fn input(code: &'static str, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), exit: 2 }
    }

    fn runtime(code: &'static str, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), exit: 3 }
    }
}

fn configure_thread_cap() {
    #[cfg(feature = "parallel")]
    if let Ok(value) = std::env::var("ROBUSTMDP_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads >= 1 {
                // ignore failure if a pool already exists
                let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    configure_thread_cap();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate(args) => cmd_validate(&args),
        Command::SolveTabular(args) => cmd_solve_tabular(&args),
        Command::Train(args) => cmd_train(&args),
        Command::Backtest(args) => cmd_backtest(&args),
        Command::Selftest(args) => cmd_selftest(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", json!({ "code": err.code, "message": err.message }));
            ExitCode::from(err.exit)
        }
    }
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::input("IoError", format!("{}: {e}", path.display())))
}

fn load_config(path: &Path) -> Result<MdpConfig, CliError> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::input("ParseError", e.to_string()))
}

/// Replaces the configured growth constant with the one implied by the
/// ambiguity mode and runs the full validity gate.
fn resolve_and_validate(mut cfg: MdpConfig) -> Result<MdpConfig, CliError> {
    cfg.c_p = cfg
        .mode_c_p()
        .map_err(|e| CliError::input("InvalidParameter", e.to_string()))?;
    validate_config(cfg).map_err(|e| CliError::input(error_code_for_core(&e), e.to_string()))
}

fn error_code_for_core(err: &robust_mdp::core::CoreError) -> &'static str {
    use robust_mdp::core::CoreError::*;
    match err {
        DiscountTooLarge { .. } => "DiscountTooLarge",
        InvalidDimension { .. } => "InvalidDimension",
        NegativeRadius { .. } => "NegativeRadius",
        DimensionMismatch { .. } => "DimensionMismatch",
        InvalidParameter { .. } => "InvalidParameter",
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::runtime("SerializeError", e.to_string()))?;
    fs::write(path, text)
        .map_err(|e| CliError::runtime("IoError", format!("{}: {e}", path.display())))
}

fn cmd_validate(args: &ValidateArgs) -> Result<(), CliError> {
    let cfg = resolve_and_validate(load_config(&args.config)?)?;
    let product = cfg.alpha * cfg.c_p;
    println!(
        "{}",
        json!({
            "mode": cfg.mode,
            "alpha": cfg.alpha,
            "c_p": cfg.c_p,
            "alpha_c_p": product,
            "margin": 1.0 - product,
            "growth_exponent": cfg.growth_exponent(),
        })
    );
    Ok(())
}

fn cmd_solve_tabular(args: &SolveArgs) -> Result<(), CliError> {
    let text = read_to_string(&args.data)?;
    let mdp: FiniteMdp =
        serde_json::from_str(&text).map_err(|e| CliError::input("ParseError", e.to_string()))?;
    let table = tabular_solve(&mdp, args.alpha, args.tol).map_err(|e| match e {
        BellmanError::NoConvergence { .. } => CliError::runtime("NoConvergence", e.to_string()),
        BellmanError::InvalidMdp(_) | BellmanError::InvalidArgument(_) => {
            CliError::input("InvalidMdp", e.to_string())
        }
        other => CliError::runtime("SolverError", other.to_string()),
    })?;
    let rendered = serde_json::to_string_pretty(&table)
        .map_err(|e| CliError::runtime("SerializeError", e.to_string()))?;
    println!("{rendered}");
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::runtime("IoError", format!("{}: {e}", dir.display())))?;
        write_json(&dir.join("value_table.json"), &table)?;
    }
    Ok(())
}

fn ambiguity_from_config(cfg: &MdpConfig, history: Vec<Vec<f64>>) -> AmbiguityMode {
    match cfg.mode {
        ModeKind::NonRobust => {
            AmbiguityMode::NonRobust { history, tilde_epsilon: cfg.tilde_epsilon }
        }
        ModeKind::Wasserstein => AmbiguityMode::WassersteinBall {
            history,
            epsilon: cfg.epsilon,
            q: cfg.q,
            tilde_epsilon: cfg.tilde_epsilon,
        },
        ModeKind::Parametric => AmbiguityMode::ParametricGaussian { epsilon: cfg.epsilon },
    }
}

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let mut cfg = resolve_and_validate(load_config(&args.config)?)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let file = fs::File::open(&args.data)
        .map_err(|e| CliError::input("IoError", format!("{}: {e}", args.data.display())))?;
    let panel =
        load_prices(BufReader::new(file)).map_err(|e| CliError::input("DataError", e.to_string()))?;
    if panel.n_assets() != cfg.d {
        return Err(CliError::input(
            "DimensionMismatch",
            format!("config expects d={}, CSV has {} tickers", cfg.d, panel.n_assets()),
        ));
    }
    let returns = compute_returns(&panel).map_err(|e| CliError::input("DataError", e.to_string()))?;
    let sigma_r =
        estimate_sigma_r(&returns).map_err(|e| CliError::input("DataError", e.to_string()))?;
    let reward_spec = RewardSpec::new(cfg.lambda_risk, sigma_r.clone(), cfg.d)
        .map_err(|e| CliError::input("InvalidParameter", e.to_string()))?;
    let pairs =
        build_windows(&returns, cfg.m).map_err(|e| CliError::input("DataError", e.to_string()))?;
    let windows: Vec<_> = pairs.into_iter().map(|(w, _)| w).collect();
    let mode = ambiguity_from_config(&cfg, returns.row_vecs());

    let output = train(&cfg, &mode, &windows, &reward_spec).map_err(|e| match e {
        NeuralError::EmptyTrainingSet | NeuralError::DimensionMismatch { .. } => {
            CliError::input("DataError", e.to_string())
        }
        other => CliError::runtime("TrainingError", other.to_string()),
    })?;

    let checkpoint = Checkpoint::from_training(&cfg, &reward_spec, &output);
    let rendered = serde_json::to_string(&checkpoint)
        .map_err(|e| CliError::runtime("SerializeError", e.to_string()))?;
    fs::write(&args.model, rendered)
        .map_err(|e| CliError::runtime("IoError", format!("{}: {e}", args.model.display())))?;

    let out_dir = args.out.clone().unwrap_or_else(|| {
        args.model.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
    });
    fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::runtime("IoError", format!("{}: {e}", out_dir.display())))?;
    write_json(&out_dir.join("train_report.json"), &output.report)?;
    let summary = SplitSummary {
        train_rows: returns.rows(),
        train_start: returns.dates.first().cloned().unwrap_or_default(),
        train_end: returns.dates.last().cloned().unwrap_or_default(),
        test_periods: Vec::new(),
        sigma_r,
        n_assets: cfg.d,
    };
    write_json(&out_dir.join("split_summary.json"), &summary)?;
    println!(
        "{}",
        json!({
            "model": args.model.display().to_string(),
            "epochs": cfg.epochs,
            "train_windows": windows.len(),
            "config_hash": checkpoint.config_hash,
        })
    );
    Ok(())
}

fn parse_period(raw: &str) -> Result<(String, String), CliError> {
    match raw.split_once(':') {
        Some((start, end)) if !start.is_empty() && !end.is_empty() => {
            Ok((start.to_string(), end.to_string()))
        }
        _ => Err(CliError::input(
            "ParseError",
            format!("period '{raw}' must be START:END with ISO dates"),
        )),
    }
}

fn cmd_backtest(args: &BacktestArgs) -> Result<(), CliError> {
    let text = read_to_string(&args.model)?;
    let checkpoint: Checkpoint =
        serde_json::from_str(&text).map_err(|e| CliError::input("ParseError", e.to_string()))?;
    let file = fs::File::open(&args.data)
        .map_err(|e| CliError::input("IoError", format!("{}: {e}", args.data.display())))?;
    let panel =
        load_prices(BufReader::new(file)).map_err(|e| CliError::input("DataError", e.to_string()))?;
    if panel.n_assets() != checkpoint.d {
        return Err(CliError::input(
            "DimensionMismatch",
            format!(
                "model expects {} assets, CSV has {}",
                checkpoint.d,
                panel.n_assets()
            ),
        ));
    }
    let returns = compute_returns(&panel).map_err(|e| CliError::input("DataError", e.to_string()))?;

    let tests: Vec<TestPanel> = if args.periods.is_empty() {
        vec![TestPanel {
            panel: returns.clone(),
            warmup_rows: 0,
            label: "full".into(),
        }]
    } else {
        let mut panels = Vec::with_capacity(args.periods.len());
        for (idx, raw) in args.periods.iter().enumerate() {
            let (start, end) = parse_period(raw)?;
            let slice =
                period_slice(&returns, &start, &end, checkpoint.m, format!("period-{}", idx + 1))
                    .map_err(|e| CliError::input("DataError", e.to_string()))?;
            panels.push(slice);
        }
        panels
    };

    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::runtime("IoError", format!("{}: {e}", args.out.display())))?;
    let reward_spec = checkpoint.reward_spec();
    let mut period_summaries = Vec::new();
    for test in &tests {
        let pairs = build_windows(&test.panel, checkpoint.m)
            .map_err(|e| CliError::input("DataError", e.to_string()))?;
        let policy = |x: &robust_mdp::StateWindow| -> ActionVector {
            checkpoint.action(x).expect("dimensions checked against the panel")
        };
        let result = run_backtest(policy, &pairs, &reward_spec)
            .map_err(|e| CliError::runtime("BacktestError", e.to_string()))?;

        let report_path = args.out.join(format!("report-{}.json", test.label));
        write_json(&report_path, &result)?;
        let mut csv = String::from("day,cumulative_profit\n");
        for (day, value) in result.cumulative.iter().enumerate() {
            csv.push_str(&format!("{},{}\n", day + 1, value));
        }
        let csv_path = args.out.join(format!("cumulative-{}.csv", test.label));
        fs::write(&csv_path, csv)
            .map_err(|e| CliError::runtime("IoError", format!("{}: {e}", csv_path.display())))?;

        period_summaries.push(TestPeriodSummary {
            label: test.label.clone(),
            rows: test.panel.rows(),
            warmup_rows: test.warmup_rows,
            start: test.panel.dates.first().cloned().unwrap_or_default(),
            end: test.panel.dates.last().cloned().unwrap_or_default(),
        });
        println!(
            "{}",
            json!({
                "period": test.label,
                "trades": result.profits.len(),
                "overall_profit": result.overall_profit,
                "sharpe": result.sharpe,
                "sortino": result.sortino,
            })
        );
    }
    write_json(&args.out.join("periods.json"), &period_summaries)?;
    Ok(())
}

fn cmd_selftest(args: &SelftestArgs) -> Result<(), CliError> {
    let outcomes = selfcheck::run_all(args.seed);
    let mut failed = 0usize;
    for outcome in &outcomes {
        let status = if outcome.passed { "PASS" } else { "FAIL" };
        println!("{status} {}: {}", outcome.name, outcome.detail);
        if !outcome.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(CliError::runtime(
            "SelftestFailed",
            format!("{failed} of {} suites failed", outcomes.len()),
        ));
    }
    Ok(())
}
