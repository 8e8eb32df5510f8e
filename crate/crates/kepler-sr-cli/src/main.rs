//! `kepler-sr`: searches tabulated (angle, distance) orbit data for the
//! equation generating it, under selectable observational and inductive
//! physics biases, and writes Pareto-front reports.

mod report;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use settings::{CliError, RawSettings};

#[derive(Parser)]
#[command(
    name = "kepler-sr",
    version,
    about = "Physics-biased symbolic regression on Mars orbit tables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config carrying the same keys as the flags below; flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Input table: historical four-column CSV or normalized theta_rad,r.
    #[arg(long, global = true, value_name = "FILE")]
    data: Option<PathBuf>,

    /// Generate the data instead: a=..,eps=..,n=..,noise=..,seed=..
    #[arg(long, global = true, value_name = "SPEC")]
    synthetic: Option<String>,

    /// Admission cut for candidate equations, in description-length bits.
    #[arg(long, global = true, value_name = "BITS")]
    max_bits: Option<f64>,

    /// Stop after scoring this many candidates.
    #[arg(long, global = true, value_name = "N")]
    max_candidates: Option<usize>,

    /// Wall-clock cutoff for a search run, in seconds.
    #[arg(long, global = true, value_name = "SECS")]
    max_seconds: Option<f64>,

    /// Directory the run report is written into.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Loss column driving Pareto dominance: dl or mse.
    #[arg(long, global = true, value_name = "KEY")]
    loss: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize a table to (theta_rad, r) CSV.
    Ingest {
        /// Output file; stdout when omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Fit r = a/(1 + eps*cos(theta)) and print the parameters.
    FitEllipse,
    /// Run one bias experiment and write its report files.
    Run {
        /// 1 = no bias, 2 = observational, 3 = inductive, 4 = both.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4), conflicts_with = "custom")]
        experiment: Option<u8>,
        /// Arbitrary bias combination, e.g. obs=true,ind=false.
        #[arg(long, value_name = "SPEC")]
        custom: Option<String>,
    },
    /// Score an equation string against the data.
    Eval {
        /// Equation over x0 (raw angle) or x0, x1 (cos theta, sin theta).
        equation: String,
        /// Also refit the constants on this data and report the refit loss.
        #[arg(long)]
        refit: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => settings::load_file_config(path)?,
        None => settings::FileConfig::default(),
    };
    let flags = RawSettings {
        data: cli.data,
        synthetic: cli.synthetic,
        max_bits: cli.max_bits,
        max_candidates: cli.max_candidates,
        max_seconds: cli.max_seconds,
        out_dir: cli.out_dir,
        loss: cli.loss,
    };
    let settings = settings::merge(flags, file)?;
    match cli.command {
        Command::Ingest { out } => report::cmd_ingest(&settings, out.as_deref()),
        Command::FitEllipse => report::cmd_fit_ellipse(&settings),
        Command::Run { experiment, custom } => {
            report::cmd_run(&settings, experiment, custom.as_deref())
        }
        Command::Eval { equation, refit } => report::cmd_eval(&settings, &equation, refit),
    }
}
