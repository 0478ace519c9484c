use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use starlattice_cli::{parse_config, run, Command, Precision, RunConfig, RunOptions};

#[derive(Parser)]
#[command(
    name = "starlattice",
    version,
    about = "NLS on Moyal-deformed and quasiperiodic lattices"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the ⋆-product kernels and experiment runs.
    #[arg(long)]
    threads: Option<usize>,
    /// Snapshot precision in bits per complex value.
    #[arg(long, value_enum, default_value = "128")]
    precision: Bits,
}

#[derive(Clone, Copy, ValueEnum)]
enum Bits {
    #[value(name = "64")]
    B64,
    #[value(name = "128")]
    B128,
}

#[derive(Subcommand)]
enum Sub {
    /// Evolve an initial state and write snapshots and diagnostics.
    Simulate(Common),
    /// Print the ⋆-product property table.
    StarCheck {
        #[command(flatten)]
        common: Common,
        /// Check a single planar θ instead of the configured list.
        #[arg(long, allow_negative_numbers = true)]
        theta0: Option<f64>,
    },
    /// Convergent-by-convergent envelope comparison against free evolution.
    LimitExperiment(Common),
    /// Compare the 1D quasiperiodic envelope with the restricted 2D noncommutative one.
    DiagramExperiment(Common),
    /// Print continued-fraction convergents.
    Approximants {
        #[command(flatten)]
        common: Common,
        /// Exact frequency literal such as "(1+sqrt(5))/2".
        #[arg(long)]
        frequency: Option<String>,
        #[arg(long)]
        depth: Option<usize>,
    },
}

fn load(common: &Common) -> Result<RunConfig> {
    match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            parse_config(&text).with_context(|| format!("invalid config {}", path.display()))
        }
        None => Ok(RunConfig::default()),
    }
}

fn execute(cli: Cli) -> Result<bool> {
    let (command, common, mut config) = match &cli.command {
        Sub::Simulate(c) => (Command::Simulate, c, load(c)?),
        Sub::LimitExperiment(c) => (Command::LimitExperiment, c, load(c)?),
        Sub::DiagramExperiment(c) => (Command::DiagramExperiment, c, load(c)?),
        Sub::StarCheck { common, theta0 } => {
            let mut config = load(common)?;
            if let Some(t) = theta0 {
                config.experiment.star_thetas = vec![*t];
            }
            (Command::StarCheck, common, config)
        }
        Sub::Approximants {
            common,
            frequency,
            depth,
        } => {
            let mut config = load(common)?;
            if let Some(f) = frequency {
                config.potential.frequencies = vec![f.clone()];
            }
            if let Some(d) = depth {
                config.experiment.depth = *d;
            }
            (Command::Approximants, common, config)
        }
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    config.validate()?;
    let options = RunOptions {
        out: common.out.clone(),
        precision: match common.precision {
            Bits::B64 => Precision::Complex64,
            Bits::B128 => Precision::Complex128,
        },
    };
    config = config.resolved_for(command);
    let outcome = run(command, &config, &options)?;
    print!("{}", outcome.summary);
    println!("outputs written to {}", outcome.out_dir.display());
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
