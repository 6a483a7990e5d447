//! `vexcap`: variable-exponent capacities from scenario files.

mod config;
mod error;
mod expr;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;
use crate::run::{FieldInput, Options, Pointwise};

#[derive(Parser, Debug)]
#[command(
    name = "vexcap",
    version,
    about = "Variable-exponent norms, energies and capacities on uniform grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// Scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for report.json and dumped minimizers.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a param,value,gap,iters table here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Exit with status 3 when any solve misses its tolerances.
    #[arg(long)]
    strict: bool,
    /// Single-threaded, no timings in the report.
    #[arg(long)]
    deterministic: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
struct InputArgs {
    /// Grid function file (vexcap-gf format).
    #[arg(long)]
    gf: Option<PathBuf>,
    /// Exponent expression in x (and y), e.g. "1.5+0.4*sin(pi*x)".
    #[arg(long)]
    exponent: Option<String>,
    /// isotropic or anisotropic.
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Capacities of the sets listed in [capacity].
    Capacity(CommonArgs),
    /// Luxemburg and mixed norms of a grid function.
    Norm {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Modulars of a grid function.
    Modular {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Total variation of a grid function.
    Tv {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Check one capacity axiom on the [check] family.
    Check {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        axiom: Option<String>,
    },
    /// Capacity of one set over a range of h or radius values.
    Sweep(CommonArgs),
}

impl From<&CommonArgs> for Options {
    fn from(c: &CommonArgs) -> Self {
        Options {
            config: c.config.clone(),
            out: c.out.clone(),
            csv: c.csv.clone(),
            strict: c.strict,
            deterministic: c.deterministic,
            seed: c.seed,
        }
    }
}

impl From<&InputArgs> for FieldInput {
    fn from(i: &InputArgs) -> Self {
        FieldInput {
            gf: i.gf.clone(),
            exponent: i.exponent.clone(),
            mode: i.mode.clone(),
        }
    }
}

fn configure_threads(deterministic: bool) -> Result<(), CliError> {
    let threads = match std::env::var("VEXCAP_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Some(n),
            _ => {
                return Err(CliError::Config(format!(
                    "VEXCAP_THREADS must be a positive integer, got '{v}'"
                )))
            }
        },
        Err(_) => None,
    };
    let threads = if deterministic { Some(1) } else { threads };
    if let Some(n) = threads {
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Capacity(c) => {
            configure_threads(c.deterministic)?;
            run::run_capacity(&c.into())
        }
        Command::Sweep(c) => {
            configure_threads(c.deterministic)?;
            run::run_sweep(&c.into())
        }
        Command::Check { common, axiom } => {
            configure_threads(common.deterministic)?;
            run::run_check(&common.into(), axiom.as_deref())
        }
        Command::Norm { common, input } => {
            configure_threads(common.deterministic)?;
            run::run_pointwise(&common.into(), &input.into(), Pointwise::Norm)
        }
        Command::Modular { common, input } => {
            configure_threads(common.deterministic)?;
            run::run_pointwise(&common.into(), &input.into(), Pointwise::Modular)
        }
        Command::Tv { common, input } => {
            configure_threads(common.deterministic)?;
            run::run_pointwise(&common.into(), &input.into(), Pointwise::Tv)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vexcap: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
