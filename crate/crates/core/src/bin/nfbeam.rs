use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nfbeam::geometry::ChannelMode;
use nfbeam::harness::output::{
    config_path, edof_table, print_record, summary_path, write_edof, write_results, write_run_config, write_summary,
    write_trace,
};
use nfbeam::harness::{aggregate, run_single, run_sweep, validate_seed, ExperimentConfig, SolverKind, SweepAxis};
use nfbeam::Error;

#[derive(Parser)]
#[command(name = "nfbeam", version, about = "Near-field hybrid beamforming experiments")]
struct Cli {
    /// Experiment configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; trial `i` uses `seed ^ i`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Trials per sweep point.
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SolverArgs {
    /// wmmse-ts, pli or fixed
    #[arg(long)]
    solver: Option<SolverKind>,
    /// near or far
    #[arg(long)]
    channel: Option<ChannelMode>,
    /// Record wall-clock time per trial.
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and print its record.
    Solve {
        #[command(flatten)]
        solver: SolverArgs,
        /// Write the per-iteration objective and penalty here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run trials over a grid of one parameter and write CSV.
    Sweep {
        #[command(flatten)]
        solver: SolverArgs,
        /// p_max_dbm, beta, mu, bits or distance
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated grid.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Effective degrees of freedom against distance.
    Edof {
        #[arg(long, default_value_t = 2.0)]
        from: f64,
        #[arg(long, default_value_t = 20.0)]
        to: f64,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
    },
    /// Check solver invariants on one seed.
    Validate,
}

enum Failure {
    Config(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).map_err(|e| match e {
            Error::Io { path, source } => Failure::Config(format!("cannot read config {}: {source}", path.display())),
            other => Failure::Config(other.to_string()),
        })?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(cfg)
}

fn apply(cfg: &mut ExperimentConfig, args: &SolverArgs) {
    if let Some(s) = args.solver {
        cfg.solver = s;
    }
    if let Some(c) = args.channel {
        cfg.channel = c;
    }
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    let mut cfg = load(cli)?;
    match &cli.command {
        Command::Solve { solver, trace } => {
            apply(&mut cfg, solver);
            let out = run_single(&cfg, 0, solver.timing)?;
            let stdout = std::io::stdout();
            print_record(&mut stdout.lock(), &out.record, cfg.k_users).map_err(|e| Error::io("<stdout>", e))?;
            if let Some(p) = &cli.out {
                write_results(p, std::slice::from_ref(&out.record), cfg.k_users)?;
            }
            if let Some(p) = trace {
                write_trace(p, &out.trace)?;
            }
            Ok(out.record.warning)
        }
        Command::Sweep { solver, axis, values } => {
            apply(&mut cfg, solver);
            let path = cli.out.clone().unwrap_or_else(|| PathBuf::from("results.csv"));
            let res = run_sweep(&cfg, *axis, values, solver.timing)?;
            write_results(&path, &res.records, cfg.k_users)?;
            write_summary(&summary_path(&path), &aggregate(&res.records), cfg.k_users)?;
            write_run_config(&config_path(&path), &cfg)?;
            if let Some(e) = res.failure {
                return Err(e.into());
            }
            let warnings = res.records.iter().filter(|r| r.warning).count();
            if warnings > 0 {
                log::warn!("{warnings} trials stopped at an iteration limit");
            }
            Ok(warnings > 0)
        }
        Command::Edof { from, to, step } => {
            if !(*step > 0.0 && from <= to && *from > 0.0) {
                return Err(Failure::Config(format!("bad distance grid {from}..{to} step {step}")));
            }
            let n = ((to - from) / step + 1e-9).floor() as usize + 1;
            let grid: Vec<f64> = (0..n).map(|i| from + i as f64 * step).collect();
            let path = cli.out.clone().unwrap_or_else(|| PathBuf::from("edof.csv"));
            write_edof(&path, &edof_table(&cfg, &grid)?)?;
            Ok(false)
        }
        Command::Validate => {
            let checks = validate_seed(&cfg, cfg.seed)?;
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for c in &checks {
                writeln!(
                    out,
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                )
                .map_err(|e| Error::io("<stdout>", e))?;
            }
            Ok(checks.iter().any(|c| !c.passed))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
