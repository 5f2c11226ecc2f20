//! The `ifslab` command-line tool.

pub mod commands;
pub mod config;
pub mod output;

use std::io::Write;
use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ConfigError, ExperimentConfig, PartialConfig};

#[derive(Debug, Parser)]
#[command(name = "ifslab", version, about = "Experiments with the Diaconis-Friedman chain and place-dependent IFS on [0, 1]")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form invariant density, Ulam stationary vector and Q* residual
    Density(CommonArgs),
    /// Regime classification with the invariant-measure description
    Classify(CommonArgs),
    /// Contraction, regularity and minorization hypotheses
    Verify(CommonArgs),
    /// Ulam stationary vector and second eigenvalue
    Spectrum {
        #[command(flatten)]
        common: CommonArgs,
        /// Also write the nonzero Ulam matrix entries
        #[arg(long)]
        dump_matrix: bool,
    },
    /// Monte Carlo chains, empirical measure and KS statistic
    Simulate(CommonArgs),
    /// Decay of the expected distance to the boundary
    Drift(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Weight spec: const:<c>, x, 1-x, poly:<c0>,<c1>,..., pwl:<file.csv>
    #[arg(long)]
    pub weight: Option<String>,
    /// Hölder exponent in (0, 1]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Grid cells for densities and harmonic functions
    #[arg(long)]
    pub grid: Option<usize>,
    /// Ulam cells
    #[arg(long)]
    pub cells: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long = "burn-in")]
    pub burn_in: Option<usize>,
    /// Master seed; falls back to $IFSLAB_SEED
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads
    #[arg(long)]
    pub threads: Option<usize>,
    /// Starting point of the chains
    #[arg(long)]
    pub x0: Option<f64>,
    /// Flat key=value config file; flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl CommonArgs {
    fn layer(&self) -> PartialConfig {
        PartialConfig {
            weight: self.weight.clone(),
            alpha: self.alpha,
            grid: self.grid,
            cells: self.cells,
            chains: self.chains,
            steps: self.steps,
            burn_in: self.burn_in,
            seed: self.seed,
            out: self.out.clone(),
            threads: self.threads,
            x0: self.x0,
        }
    }
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Density(c) | Command::Classify(c) | Command::Verify(c) | Command::Simulate(c) | Command::Drift(c) => c,
            Command::Spectrum { common, .. } => common,
        }
    }

    /// Per-command defaults beneath all other layers.
    pub fn defaults(&self) -> ExperimentConfig {
        let base = ExperimentConfig::default();
        match self {
            Command::Drift(_) => ExperimentConfig {
                weight: "1-x".into(),
                steps: 20,
                ..base
            },
            _ => base,
        }
    }

    pub fn resolve(&self) -> Result<ExperimentConfig, ConfigError> {
        let c = self.common();
        let file = match &c.config {
            Some(path) => PartialConfig::from_file(path)?,
            None => PartialConfig::default(),
        };
        let layers = c.layer().or(file).or(PartialConfig::from_env()?);
        ExperimentConfig::resolve(layers, &self.defaults())
    }
}

pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_REGIME: u8 = 2;

/// Exit code for a failed command: 2 for a regime mismatch, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    let regime = err
        .chain()
        .any(|e| matches!(e.downcast_ref::<ifslab_core::Error>(), Some(ifslab_core::Error::Regime { .. })));
    if regime {
        EXIT_REGIME
    } else {
        EXIT_CONFIG
    }
}

fn execute(command: &Command, cfg: &ExperimentConfig) -> anyhow::Result<serde_json::Value> {
    match command {
        Command::Density(_) => commands::density(cfg),
        Command::Classify(_) => commands::classify(cfg),
        Command::Verify(_) => commands::verify(cfg),
        Command::Spectrum { dump_matrix, .. } => commands::spectrum(cfg, *dump_matrix),
        Command::Simulate(_) => commands::simulate(cfg),
        Command::Drift(_) => commands::drift(cfg),
    }
}

#[cfg(feature = "parallel")]
fn execute_with_threads(command: &Command, cfg: &ExperimentConfig) -> anyhow::Result<serde_json::Value> {
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()?
            .install(|| execute(command, cfg)),
        None => execute(command, cfg),
    }
}

#[cfg(not(feature = "parallel"))]
fn execute_with_threads(command: &Command, cfg: &ExperimentConfig) -> anyhow::Result<serde_json::Value> {
    execute(command, cfg)
}

/// Parses `args`, runs the command and prints its JSON summary.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match cli.command.resolve() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match execute_with_threads(&cli.command, &cfg) {
        Ok(summary) => {
            // a closed stdout (e.g. piped into `head`) is not an error; the
            // output files are already written
            let text = serde_json::to_string_pretty(&summary).unwrap_or_default();
            let _ = writeln!(std::io::stdout(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
