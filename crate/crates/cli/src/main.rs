#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod catalog;
mod config;
mod error;
mod experiment;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "tvopt",
    version,
    about = "Run and sweep time-varying optimization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Directory for CSV and JSON artifacts.
    #[arg(long, global = true, env = "TVOPT_OUT_DIR")]
    out_dir: Option<PathBuf>,

    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides the trailing ATE window fraction in the config.
    #[arg(long, global = true)]
    window: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One run at `grid.h`.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// One run per value of `grid.sweep`, with slopes and paired gains.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Problems, solvers, predictors and metrics.
    List,
}

fn load(cli: &Cli, path: &Path) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(window) = cli.window {
        cfg.window = window;
    }
    cfg.validate()?;
    let out_dir = cli
        .out_dir
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, out_dir))
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::List => {
            print!("{}", catalog::render());
        }
        Command::Run { config } => {
            let (cfg, out_dir) = load(cli, config)?;
            let (summary, artifacts) = experiment::run_experiment(&cfg, &out_dir)?;
            println!(
                "{} {} h={}: ate_max={:.6e} ate_mean={:.6e} tr={:.3e} cr_steps={}",
                summary.problem,
                summary.solver,
                summary.h,
                summary.ate_max,
                summary.ate_mean,
                summary.tr,
                summary.cr_steps
            );
            println!(
                "wrote {} and {}",
                artifacts.csv.display(),
                artifacts.json.display()
            );
        }
        Command::Sweep { config } => {
            let (cfg, out_dir) = load(cli, config)?;
            let (report, path) = experiment::sweep_h(&cfg, &out_dir)?;
            for (solver, slope) in &report.slopes {
                match slope {
                    Some(s) => println!("{solver}: slope {s:.3}"),
                    None => println!("{solver}: slope unavailable"),
                }
            }
            for p in &report.pairs {
                println!(
                    "h={}: improvement_ratio {:.3} (sg {:.3})",
                    p.h, p.improvement_ratio, p.sg
                );
            }
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
