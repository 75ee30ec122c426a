use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use felsim::Levels;
use felsim_cli::commands::{self, load_config, AnalyzeOptions, RunOptions};
use felsim_cli::presets::{find, PRESETS};
use felsim_cli::units::Units;
use felsim_cli::Report;

#[derive(Parser)]
#[command(
    name = "felsim",
    version,
    about = "Chaotic FEL pulses driving Auger resonances"
)]
struct Cli {
    /// Annotate outputs with physical units (computation stays in units of Gamma2).
    #[arg(long, global = true, value_name = "SYSTEM")]
    units: Option<Units>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file, or `preset:NAME` for a bundled one.
    #[arg(long)]
    config: String,
    /// Output CSV; variants of a series go to sibling files.
    #[arg(long)]
    out: PathBuf,
    /// Master seed (overrides the configuration).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of realizations (overrides the configuration).
    #[arg(long)]
    realizations: Option<usize>,
    /// Worker threads; falls back to FELSIM_WORKERS, then the configuration.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Moments, intensity PDF, spectrum, g1 and energies of chaotic pulses.
    PulseStats(RunArgs),
    /// Two-level yield scan.
    SingleScan(RunArgs),
    /// Three-level (double resonance) yield scan.
    DrScan(RunArgs),
    /// Doublet and Lorentzian features of scan CSVs.
    Analyze {
        /// Scan CSVs to analyze.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Fourier-limited scan used to normalize the splitting.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Column to analyze (default: q3_mean for delta_d scans, else q2_mean).
        #[arg(long)]
        column: Option<String>,
        /// 3-point moving average before peak detection.
        #[arg(long)]
        smooth: bool,
    },
    /// List bundled configurations, or print one.
    Presets {
        /// Print the named preset.
        #[arg(long)]
        show: Option<String>,
    },
}

fn run_options(args: &RunArgs, units: Option<Units>) -> RunOptions {
    RunOptions {
        out: args.out.clone(),
        seed: args.seed,
        realizations: args.realizations,
        workers: args.workers,
        units,
    }
}

fn finish(report: Report, out: &std::path::Path) -> Result<ExitCode> {
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let status = report.write_status(out)?;
    for f in &report.files {
        println!("{}", f.display());
    }
    if report.is_complete() {
        Ok(ExitCode::SUCCESS)
    } else {
        for f in &report.failures {
            eprintln!("failure: {f}");
        }
        eprintln!("partial results; see {}", status.display());
        Ok(ExitCode::from(2))
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::PulseStats(args) => {
            let config = load_config(&args.config)?;
            let report = commands::pulse_stats(config, &run_options(&args, cli.units))?;
            finish(report, &args.out)
        }
        Command::SingleScan(args) => {
            let config = load_config(&args.config)?;
            let report = commands::scan(config, &run_options(&args, cli.units), Levels::Two)?;
            finish(report, &args.out)
        }
        Command::DrScan(args) => {
            let config = load_config(&args.config)?;
            let report = commands::scan(config, &run_options(&args, cli.units), Levels::Three)?;
            finish(report, &args.out)
        }
        Command::Analyze {
            inputs,
            out,
            reference,
            column,
            smooth,
        } => {
            let opts = AnalyzeOptions {
                inputs,
                out: out.clone(),
                reference,
                column,
                smooth,
            };
            finish(commands::analyze(&opts)?, &out)
        }
        Command::Presets { show } => {
            match show {
                Some(name) => match find(&name) {
                    Some(p) => print!("{}", p.text),
                    None => bail!("unknown preset '{name}'"),
                },
                None => {
                    for p in PRESETS {
                        println!("{:<18} {:<12} {}", p.name, p.command, p.summary);
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
