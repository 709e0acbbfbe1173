use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};
use rayon::prelude::*;

mod commands;
mod config;
mod error;
mod svg;

use commands::Country;
use config::Overrides;
use error::CliError;

/// Contact-network simulation, calibration and epidemic reports per country
#[derive(Debug, Parser)]
#[command(author, version, about)]
#[command(propagate_version = true)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// batch configuration file
    #[arg(short, long, global = true, default_value = "countries.toml")]
    config: PathBuf,
    /// output root; countries write to subdirectories
    #[arg(short, long, global = true, env = "DTCNS_OUTPUT")]
    output: Option<PathBuf>,
    /// restrict the run to these countries (repeatable)
    #[arg(long = "country", global = true)]
    countries: Vec<String>,
    /// override a configuration key, e.g. `--set budget=50` (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// worker threads (default: all cores)
    #[arg(short = 'j', long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample populations and report Hill numbers
    Population,
    /// Form networks and report topology and recreated contact matrices
    Simulate,
    /// Compare model families, search fuzzy-set counts and fit parameters
    Calibrate,
    /// Variogram sensitivity of membership-function parameters
    Sensitivity,
    /// Run the SI process and report the proportion at risk
    Epidemic,
    /// Population, calibration, simulation and epidemic for every country
    ReportAll,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = cli.common;
    if let Some(t) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let overrides = Overrides { set: common.set, countries: common.countries, output: common.output };
    let runs = config::load(&common.config, &overrides)?;
    let root = runs
        .first()
        .and_then(|r| r.output.parent())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("output"));

    // everything is read and checked before the first file is written
    let countries: Vec<Country> = runs.into_iter().map(Country::load).collect::<Result<_, _>>()?;
    info!("{} countries loaded", countries.len());

    match cli.command {
        Command::Population => each(&countries, |c| commands::population(c).map(drop)),
        Command::Simulate => each(&countries, |c| commands::simulate(c).map(drop)),
        Command::Calibrate => each(&countries, |c| commands::calibrate(c).map(drop)),
        Command::Sensitivity => each(&countries, |c| commands::sensitivity(c).map(drop)),
        Command::Epidemic => each(&countries, |c| commands::epidemic(c).map(drop)),
        Command::ReportAll => {
            let rows: Vec<_> = countries.into_par_iter().map(commands::report).collect::<anyhow::Result<_>>()?;
            commands::write_batch_summary(&root, &rows)?;
            for r in &rows {
                info!(
                    "[{}] edges {} EU {:.4} fake paths {} terminal PaR {:.3}",
                    r.country, r.edges, r.final_eu, r.fake_paths, r.terminal_par
                );
            }
            Ok(())
        }
    }
}

fn each(countries: &[Country], f: impl Fn(&Country) -> anyhow::Result<()> + Sync) -> Result<(), CliError> {
    countries.par_iter().try_for_each(|c| {
        f(c)?;
        info!("[{}] done", c.name());
        Ok(())
    })
}
