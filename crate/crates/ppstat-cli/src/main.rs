//! Command-line front end: ingestion, per-species and per-pair analyses,
//! screening batches, and plot/report emission.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric error.

mod commands;
mod config;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "ppstat",
    about = "Inhomogeneous point pattern analysis for mapped census data",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StatArg {
    K,
    J,
    Kcross,
    Jcross,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Mad,
    Dclf,
    Stud,
    Dq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SidedArg {
    Two,
    Greater,
    Less,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScreenMode {
    Species,
    Pairs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProcessArg {
    Poisson,
    Thomas,
}

#[derive(Args, Debug)]
pub struct CommonArgs {
    /// Census CSV file (header tree_id,species,x,y,status,census_id).
    #[arg(long)]
    census: PathBuf,
    /// Optional TOML configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Census to analyse.
    #[arg(long, default_value_t = 1)]
    census_id: u32,
    /// Kernel bandwidth in metres; omitted selects by the mass criterion.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Simulation count override.
    #[arg(long)]
    nsim: Option<usize>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate an intensity surface and write its CSV grid and heatmap.
    Intensity {
        #[command(flatten)]
        common: CommonArgs,
        /// Species code.
        #[arg(long)]
        species: String,
        /// Reference census for the null-intensity construction.
        #[arg(long)]
        ref_census_id: Option<u32>,
    },
    /// Compute a summary statistic curve and write its CSV and plot.
    Stats {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        species: Option<String>,
        /// Species pair A,B for the cross statistics.
        #[arg(long)]
        pair: Option<String>,
        #[arg(long, value_enum)]
        stat: StatArg,
    },
    /// Run a Monte Carlo test and write its JSON report and envelope plot.
    Test {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        species: Option<String>,
        #[arg(long)]
        pair: Option<String>,
        #[arg(long, value_enum)]
        stat: StatArg,
        #[arg(long, value_enum, default_value_t = KindArg::Mad)]
        kind: KindArg,
        #[arg(long, value_enum)]
        sided: Option<SidedArg>,
        /// Reference census for the null-intensity construction
        /// (species tests only).
        #[arg(long)]
        ref_census_id: Option<u32>,
    },
    /// Batch screening over species or random pairs.
    Screen {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        mode: ScreenMode,
        #[arg(long, value_enum, default_value_t = KindArg::Mad)]
        kind: KindArg,
    },
    /// Generate a synthetic census CSV from a point process model.
    Simulate {
        /// Optional TOML configuration file (window, seed).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long, value_enum)]
        process: ProcessArg,
        /// Species code written into the file.
        #[arg(long, default_value = "sp01")]
        species: String,
        /// Homogeneous intensity (points per square metre) for poisson.
        #[arg(long)]
        lambda: Option<f64>,
        /// Parent rate per square metre for thomas.
        #[arg(long)]
        parent_rate: Option<f64>,
        /// Mean offspring per parent for thomas.
        #[arg(long)]
        mean_offspring: Option<f64>,
        /// Offspring displacement standard deviation in metres for thomas.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Error carrying its intended process exit code.
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            code: 3,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        CliError {
            code: 4,
            message: message.into(),
        }
    }
}

impl From<ppstat_core::Error> for CliError {
    fn from(e: ppstat_core::Error) -> Self {
        use ppstat_core::Error as E;
        let code = match &e {
            E::Schema(_)
            | E::MalformedRow { .. }
            | E::OutOfWindowRow(_)
            | E::UnknownSpecies(_)
            | E::NullIntensityUndefined(_)
            | E::NothingToPair
            | E::NoPoints
            | E::InsufficientPoints
            | E::Io(_)
            | E::Csv(_) => 3,
            _ => 4,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig, CliError> {
    RunConfig::load(path.map(|p| p.as_path())).map_err(CliError::usage)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Intensity {
            common,
            species,
            ref_census_id,
        } => load_config(common.config.as_ref())
            .and_then(|cfg| commands::cmd_intensity(&common, cfg, &species, ref_census_id)),
        Command::Stats {
            common,
            species,
            pair,
            stat,
        } => load_config(common.config.as_ref())
            .and_then(|cfg| commands::cmd_stats(&common, cfg, species, pair, stat)),
        Command::Test {
            common,
            species,
            pair,
            stat,
            kind,
            sided,
            ref_census_id,
        } => load_config(common.config.as_ref()).and_then(|cfg| {
            commands::cmd_test(&common, cfg, species, pair, stat, kind, sided, ref_census_id)
        }),
        Command::Screen { common, mode, kind } => load_config(common.config.as_ref())
            .and_then(|cfg| commands::cmd_screen(&common, cfg, mode, kind)),
        Command::Simulate {
            config,
            out_dir,
            process,
            species,
            lambda,
            parent_rate,
            mean_offspring,
            sigma,
            seed,
        } => load_config(config.as_ref()).and_then(|cfg| {
            commands::cmd_simulate(
                cfg,
                &out_dir,
                process,
                &species,
                lambda,
                parent_rate,
                mean_offspring,
                sigma,
                seed,
            )
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
