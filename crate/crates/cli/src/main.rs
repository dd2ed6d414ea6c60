use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use pvfl_cli::{cmd_onboard, cmd_run, cmd_trace, write_trace, ExperimentSpec, NewCenterSpec, StrategyChoice};
use pvfl_core::federation::Strategy;

#[derive(Parser)]
#[command(
    name = "pvfl",
    version,
    about = "Federated behind-the-meter PV disaggregation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every requested strategy and write logs, report and checkpoints.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the spec: pfl, fedavg, local or all.
        #[arg(long)]
        strategy: Option<StrategyChoice>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Half-hourly estimates of one prosumer's PV from a finished run.
    Trace {
        /// Output directory of an earlier `run`.
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        prosumer: String,
        #[arg(long)]
        from: NaiveDate,
        /// Inclusive; defaults to `--from`.
        #[arg(long)]
        to: Option<NaiveDate>,
        /// Comma-separated; defaults to every strategy in the run.
        #[arg(long, value_delimiter = ',')]
        strategy: Option<Vec<Strategy>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Add a new center to a finished run and continue training.
    Onboard {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        new_center: PathBuf,
        #[arg(long, default_value_t = 10)]
        rounds: usize,
        /// Defaults to `<run>/onboard`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            strategy,
            seed,
            rounds,
            out,
        } => {
            let mut spec = ExperimentSpec::load(&config)?;
            if let Some(s) = strategy {
                spec.strategy = s;
            }
            if let Some(s) = seed {
                spec.seed = s;
            }
            if let Some(r) = rounds {
                spec.rounds = r;
            }
            let report = cmd_run(&spec, &out)?;
            for s in &report.strategies {
                println!(
                    "{:<7} MAE {:.4}  RMSE {:.4}  R2 {:.4}",
                    s.strategy.name(),
                    s.mean.mae,
                    s.mean.rmse,
                    s.mean.r2
                );
            }
            println!("wrote {}", out.display());
        }
        Command::Trace {
            run,
            prosumer,
            from,
            to,
            strategy,
            out,
        } => {
            let trace = cmd_trace(&run, &prosumer, from, to.unwrap_or(from), strategy)?;
            write_trace(&out, &trace)?;
            println!("wrote {} rows to {}", trace.rows.len(), out.display());
        }
        Command::Onboard {
            run,
            new_center,
            rounds,
            out,
        } => {
            let spec = NewCenterSpec::load(&new_center).context("loading the new center")?;
            let out = out.unwrap_or_else(|| run.join("onboard"));
            let report = cmd_onboard(&run, &spec, rounds, &out)?;
            let info = &report.new_center;
            println!(
                "{}: {} training windows, {:.1}% of the mean existing volume",
                info.center,
                info.train_samples,
                100.0 * info.volume_ratio
            );
            for s in &report.strategies {
                if let Some(c) = s.center(&info.center) {
                    println!(
                        "{:<7} MAE {:.4}  RMSE {:.4}  R2 {:.4}",
                        s.strategy.name(),
                        c.raw.mae,
                        c.raw.rmse,
                        c.raw.r2
                    );
                }
            }
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
