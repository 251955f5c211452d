use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use itosim::cli::{cmd_converge, cmd_integrals, cmd_simulate, CliError, RunConfig};
use itosim::convergence::{Metric, Mode};

#[derive(Parser)]
#[command(name = "itosim", version, about = "Strong simulation and convergence studies for Itô SDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump one sample path per scheme, all on the same Brownian path.
    Simulate(Common),
    /// Estimate convergence rates and write per-level errors and fits.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Overrides `study.mode`.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Overrides `study.metric`.
        #[arg(long, value_enum)]
        metric: Option<MetricArg>,
    },
    /// Run the double-integral experiments enabled in the config.
    Integrals(Common),
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory for the CSV files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Truth,
    Coupled,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Strong,
    Weak,
    Mse,
    L2,
}

fn load(c: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(w) = c.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    match cli.command {
        Command::Simulate(c) => cmd_simulate(&load(&c)?, &c.out),
        Command::Integrals(c) => cmd_integrals(&load(&c)?, &c.out),
        Command::Converge { common, mode, metric } => {
            let mut cfg = load(&common)?;
            if let Some(study) = cfg.study.as_mut() {
                if let Some(m) = mode {
                    study.mode = match m {
                        ModeArg::Truth => Mode::Truth,
                        ModeArg::Coupled => Mode::Coupled,
                    };
                }
                if let Some(m) = metric {
                    study.metric = match m {
                        MetricArg::Strong => Metric::StrongAbs,
                        MetricArg::Weak => Metric::WeakMean,
                        MetricArg::Mse => Metric::Mse,
                        MetricArg::L2 => Metric::L2Vector,
                    };
                }
            }
            cmd_converge(&cfg, &common.out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
