use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cem_harness::config::CALIBRATION_SEED;
use cem_harness::output::{emit, render};
use cem_harness::{
    alpha_sweep, calibrate, compare_variants, run_experiment, variant_family, ExperimentConfig,
    Format, HarnessError, Result,
};

/// Seeded experiments with the batch, sliding-window and memoryless
/// cross-entropy engines.
///
/// Configuration is a TOML file; `cem config-dump` prints one with every
/// default filled in. Replicate r runs with seed base_seed + r.
///
/// Exit status: 0 on success, 1 on a runtime error, 2 on a configuration error.
#[derive(Parser)]
#[command(name = "cem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every replicate and write one row per replicate.
    Run(Common),
    /// Optimum-hit rate per step size, with the theoretical miss bound.
    SweepAlpha {
        #[command(flatten)]
        common: Common,
        /// Comma-separated step sizes, replacing `sweep.alphas`.
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
    },
    /// Run the experiment under all three variants at a matched budget.
    Compare(Common),
    /// Monte Carlo calibration of Delta0 for normally distributed values.
    CalibrateDelta0 {
        #[command(flatten)]
        common: Common,
        /// Population size N (default: from the config, else 100).
        #[arg(long)]
        population: Option<usize>,
        /// Elite fraction (default: from the config, else 0.1).
        #[arg(long)]
        rho: Option<f64>,
        /// Monte Carlo repetitions (default: `memoryless.calibration_reps`).
        #[arg(long)]
        reps: Option<u64>,
    },
    /// Print the effective configuration, defaults included, as TOML.
    ConfigDump {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed, replacing `base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Maximum number of replicates run at once (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output file, replacing `output.path`; standard output when neither is set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format, replacing `output.format`.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl Common {
    fn load(&self, required: bool) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None if required => {
                return Err(HarnessError::Config("`--config <path>` is required".into()))
            }
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.base_seed = seed;
        }
        if let Some(out) = &self.out {
            config.output.path = Some(out.clone());
        }
        if let Some(format) = self.format {
            config.output.format = format;
        }
        Ok(config)
    }
}

fn write<R: serde::Serialize>(config: &ExperimentConfig, schema: &str, rows: &[R]) -> Result<()> {
    let body = render(schema, rows, config.output.format)?;
    emit(&body, config.output.path.as_deref())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(common) => {
            let config = common.load(true)?;
            let outcome = run_experiment(&config, common.jobs)?;
            write(&config, "results", &outcome.rows)?;
            outcome.check()
        }
        Command::SweepAlpha { common, alphas } => {
            let config = common.load(true)?;
            let alphas = alphas.unwrap_or_else(|| config.sweep.alphas.clone());
            let outcome = alpha_sweep(&config, &alphas, common.jobs)?;
            write(&config, "sweep", &outcome.rows)?;
            outcome.check()
        }
        Command::Compare(common) => {
            let config = common.load(true)?;
            let outcome = compare_variants(&variant_family(&config), common.jobs)?;
            write(&config, "compare", &outcome.rows)?;
            outcome.check()
        }
        Command::CalibrateDelta0 {
            common,
            population,
            rho,
            reps,
        } => {
            let config = common.load(false)?;
            let row = calibrate(
                population.unwrap_or(config.algorithm.population),
                rho.unwrap_or(config.algorithm.rho),
                reps.unwrap_or(config.memoryless.calibration_reps),
                common.seed.unwrap_or(CALIBRATION_SEED),
            )?;
            write(&config, "calibration", &[row])
        }
        Command::ConfigDump { config, seed, out } => {
            let common = Common {
                config,
                seed,
                jobs: None,
                out: None,
                format: None,
            };
            let config = common.load(false)?;
            emit(config.to_toml().as_bytes(), out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cem: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
