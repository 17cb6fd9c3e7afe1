//! Experiment configuration, read from TOML.
//!
//! Every field except `problem` and `variant` has a default; `cem config-dump`
//! prints a complete file with all defaults filled in.

use std::path::{Path, PathBuf};

use cem_core::{
    BatchConfig, BernoulliParams, Estimator, EstimatorConfig, GaussMode, MemorylessConfig,
    OnlineConfig, ProblemSpec, RngStream, RunOptions, Variant,
};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Seed of the Monte Carlo run that fixes the calibrated Gaussian constant.
pub const CALIBRATION_SEED: u64 = 0x5EED_CA1B;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub variant: Variant,
    #[serde(default = "default_replicates")]
    pub replicates: u32,
    /// Replicate `r` runs with seed `base_seed + r` (wrapping).
    #[serde(default)]
    pub base_seed: u64,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub algorithm: AlgorithmParams,
    #[serde(default)]
    pub memoryless: MemorylessParams,
    #[serde(default)]
    pub sweep: SweepParams,
    #[serde(default)]
    pub output: OutputParams,
}

fn default_replicates() -> u32 {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmParams {
    /// Population size, window length or nominal population `N`.
    pub population: usize,
    pub rho: f64,
    pub alpha: f64,
    /// Objective evaluations per replicate: `T * N` for batch, `K` online.
    pub budget: u64,
    /// Initial probability of every bit.
    pub p0: f64,
    pub eps_conv: f64,
    pub stop_on_convergence: bool,
    /// Steps between parameter snapshots; unset means one generation-equivalent.
    pub snapshot_stride: Option<u64>,
}

impl Default for AlgorithmParams {
    fn default() -> Self {
        Self {
            population: 100,
            rho: 0.1,
            alpha: 0.7,
            budget: 50_000,
            p0: 0.5,
            eps_conv: 1e-6,
            stop_on_convergence: true,
            snapshot_stride: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaussModeName {
    Quantile,
    Calibrated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemorylessParams {
    pub estimator: Estimator,
    pub gauss_mode: GaussModeName,
    /// Constant for calibrated mode; estimated by Monte Carlo when unset.
    pub gauss_constant: Option<f64>,
    pub calibration_reps: u64,
    pub beta: f64,
    pub delta: Option<f64>,
    pub delta0: Option<f64>,
    pub delta_min: f64,
    pub gamma0: Option<f64>,
}

impl Default for MemorylessParams {
    fn default() -> Self {
        let est = EstimatorConfig::default();
        Self {
            estimator: est.kind,
            gauss_mode: GaussModeName::Quantile,
            gauss_constant: None,
            calibration_reps: 100_000,
            beta: est.beta,
            delta: est.delta,
            delta0: est.delta0,
            delta_min: est.delta_min,
            gamma0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepParams {
    pub alphas: Vec<f64>,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            alphas: vec![0.9, 0.5, 0.2, 0.05],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputParams {
    /// Output file; standard output when unset.
    pub path: Option<PathBuf>,
    pub format: Format,
    /// Add per-replicate wall-clock time. Off by default because it makes
    /// output files differ between otherwise identical runs.
    pub timing: bool,
}

/// Engine configuration for one replicate, fully validated.
#[derive(Debug, Clone)]
pub enum EngineConfig {
    Batch(BatchConfig),
    Window(OnlineConfig),
    Memoryless(MemorylessConfig),
}

impl EngineConfig {
    pub fn step_size(&self) -> f64 {
        match self {
            EngineConfig::Batch(c) => c.alpha,
            EngineConfig::Window(c) => c.step_size(),
            EngineConfig::Memoryless(c) => c.step_size(),
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Batch,
            replicates: default_replicates(),
            base_seed: 0,
            problem: ProblemSpec::onemax(20),
            algorithm: AlgorithmParams::default(),
            memoryless: MemorylessParams::default(),
            sweep: SweepParams::default(),
            output: OutputParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable as TOML")
    }

    pub fn seed_for(&self, replicate: u32) -> u64 {
        self.base_seed.wrapping_add(replicate as u64)
    }

    /// Objective evaluations each replicate may spend.
    pub fn evaluation_budget(&self) -> u64 {
        match self.variant {
            Variant::Batch => self.generations() * self.algorithm.population as u64,
            Variant::Window | Variant::Memoryless => self.algorithm.budget,
        }
    }

    fn generations(&self) -> u64 {
        self.algorithm.budget / self.algorithm.population.max(1) as u64
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(HarnessError::Config("`replicates` must be positive".into()));
        }
        let alg = &self.algorithm;
        if self.variant == Variant::Batch
            && alg.population > 0
            && !alg.budget.is_multiple_of(alg.population as u64)
        {
            return Err(HarnessError::Config(format!(
                "`budget` ({}) must be a multiple of `population` ({}) for the batch variant",
                alg.budget, alg.population
            )));
        }
        if self
            .memoryless
            .gauss_constant
            .is_some_and(|c| !(c.is_finite() && c > 0.0))
        {
            return Err(HarnessError::Config(
                "`gauss_constant` must be finite and positive".into(),
            ));
        }
        cem_core::make_objective(&self.problem).map_err(HarnessError::config_from)?;
        self.engine_config_with(self.algorithm.alpha, Some(1.0))?;
        Ok(())
    }

    fn run_options(&self) -> RunOptions {
        RunOptions {
            eps_conv: self.algorithm.eps_conv,
            stop_on_convergence: self.algorithm.stop_on_convergence,
            snapshot_stride: self.algorithm.snapshot_stride,
            record_steps: false,
        }
    }

    /// Builds the engine configuration, running the Gaussian calibration when
    /// calibrated mode has no explicit constant.
    pub fn engine_config(&self) -> Result<EngineConfig> {
        self.engine_config_with(self.algorithm.alpha, None)
    }

    pub(crate) fn engine_config_for_alpha(
        &self,
        alpha: f64,
        gauss_constant: Option<f64>,
    ) -> Result<EngineConfig> {
        self.engine_config_with(alpha, gauss_constant)
    }

    /// Constant used by calibrated Gaussian mode, if that mode is selected.
    pub fn resolve_gauss_constant(&self) -> Result<Option<f64>> {
        let m = &self.memoryless;
        if self.variant != Variant::Memoryless
            || m.estimator != Estimator::GaussModel
            || m.gauss_mode != GaussModeName::Calibrated
        {
            return Ok(None);
        }
        if let Some(c) = m.gauss_constant {
            return Ok(Some(c));
        }
        let mut rng = RngStream::new(CALIBRATION_SEED);
        let c = cem_core::oracles::calibrate_gauss_constant(
            self.algorithm.population,
            self.algorithm.rho,
            m.calibration_reps,
            &mut rng,
        )
        .map_err(HarnessError::config_from)?;
        Ok(Some(c))
    }

    fn engine_config_with(&self, alpha: f64, gauss_constant: Option<f64>) -> Result<EngineConfig> {
        let alg = &self.algorithm;
        let n = self.problem.dim();
        let p0 = BernoulliParams::constant(n, alg.p0).map_err(HarnessError::config_from)?;
        let options = self.run_options();
        let engine = match self.variant {
            Variant::Batch => {
                let mut c =
                    BatchConfig::new(alg.population, alg.rho, alpha, self.generations(), p0)
                        .map_err(HarnessError::config_from)?;
                c.options = options;
                c.validate().map(|_| EngineConfig::Batch(c))
            }
            Variant::Window => {
                let mut c = OnlineConfig::new(alg.population, alg.rho, alpha, alg.budget, p0)
                    .map_err(HarnessError::config_from)?;
                c.options = options;
                c.validate().map(|_| EngineConfig::Window(c))
            }
            Variant::Memoryless => {
                let m = &self.memoryless;
                let gauss_mode = match m.gauss_mode {
                    GaussModeName::Quantile => GaussMode::Quantile,
                    GaussModeName::Calibrated => {
                        let c = match gauss_constant.or(m.gauss_constant) {
                            Some(c) => c,
                            None => self.resolve_gauss_constant()?.expect("calibrated mode"),
                        };
                        GaussMode::Calibrated { c }
                    }
                };
                let mut c = MemorylessConfig::new(alg.population, alg.rho, alpha, alg.budget, p0)
                    .map_err(HarnessError::config_from)?;
                c.options = options;
                c.gamma0 = m.gamma0;
                c.estimator = EstimatorConfig {
                    kind: m.estimator,
                    gauss_mode,
                    beta: m.beta,
                    delta: m.delta,
                    delta0: m.delta0,
                    delta_min: m.delta_min,
                };
                c.validate()
                    .and_then(|_| c.delta0())
                    .map(|_| EngineConfig::Memoryless(c))
            }
        };
        engine.map_err(HarnessError::config_from)
    }
}
