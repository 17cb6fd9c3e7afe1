//! Online cross-entropy method without a sample buffer.
//!
//! The elite threshold performs a random walk: it rises by `(1 - rho) Delta`
//! after an elite sample and falls by `rho Delta` otherwise, so it settles
//! where a fraction `rho` of samples clears it. `Delta` is either constant or
//! tracked as `Delta0 * E|f - f'|` with an exponentially weighted average of
//! consecutive absolute differences, `Delta0` coming from a uniform or a
//! Gaussian model of the objective values.

use serde::{Deserialize, Serialize};

use crate::error::{CemError, Result};
use crate::model::{draw_sample, evaluate, BernoulliParams, Objective, RngStream};
use crate::normal::normal_quantile;
use crate::trace::{
    check_alpha, check_p0, check_rho, elite_count, RunOptions, RunTrace, StepRecord, Variant,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Constant,
    UniformModel,
    GaussModel,
}

/// Which constant multiplies the quantile gap in the Gaussian model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GaussMode {
    /// `2 sqrt(pi) * gap`.
    Quantile,
    /// `c * gap` with `c` measured by Monte Carlo (see
    /// [`crate::oracles::calibrate_delta0_gauss`]).
    Calibrated { c: f64 },
}

/// `3 / (N + 1)`.
pub fn delta0_uniform(n: usize) -> f64 {
    3.0 / (n as f64 + 1.0)
}

/// `Phi^{-1}(1 - rho + 1/N) - Phi^{-1}(1 - rho)` for the standard normal `Phi`.
pub fn gauss_quantile_gap(n: usize, rho: f64) -> Result<f64> {
    let upper = 1.0 - rho + 1.0 / n as f64;
    let lower = 1.0 - rho;
    Ok(normal_quantile(upper)? - normal_quantile(lower)?)
}

pub fn delta0_gauss(n: usize, rho: f64, mode: GaussMode) -> Result<f64> {
    let gap = gauss_quantile_gap(n, rho)?;
    Ok(match mode {
        GaussMode::Quantile => 2.0 * std::f64::consts::PI.sqrt() * gap,
        GaussMode::Calibrated { c } => c * gap,
    })
}

/// O(1) state of the threshold random walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdState {
    pub gamma: f64,
    /// Current step scale `Delta_t`.
    pub delta: f64,
    /// Previous objective value, for the consecutive-difference estimate.
    pub prev_value: Option<f64>,
    pub estimator: Estimator,
    /// Forgetting rate of the `Delta` average.
    pub beta: f64,
    pub delta0: f64,
    /// Lower clamp applied after every `Delta` update.
    pub delta_min: f64,
}

/// Moves `gamma` up by `(1 - rho) delta` after an elite sample, down by
/// `rho delta` otherwise.
pub fn threshold_step(state: &ThresholdState, is_elite: bool, rho: f64) -> ThresholdState {
    let shift = if is_elite {
        (1.0 - rho) * state.delta
    } else {
        -rho * state.delta
    };
    ThresholdState {
        gamma: state.gamma + shift,
        ..*state
    }
}

/// `delta <- (1 - beta) delta + beta delta0 |f_new - prev|`, then
/// `prev <- f_new`. The first value only primes `prev`; the constant
/// estimator leaves `delta` untouched.
pub fn delta_update(state: &ThresholdState, f_new: f64) -> ThresholdState {
    let mut next = ThresholdState {
        prev_value: Some(f_new),
        ..*state
    };
    if state.estimator == Estimator::Constant {
        return next;
    }
    if let Some(prev) = state.prev_value {
        let d = (1.0 - state.beta) * state.delta + state.beta * state.delta0 * (f_new - prev).abs();
        next.delta = d.max(state.delta_min);
    }
    next
}

/// Threshold-walk settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub kind: Estimator,
    pub gauss_mode: GaussMode,
    pub beta: f64,
    /// Constant `Delta` for the constant estimator; initial `Delta` otherwise.
    /// When unset for the adaptive estimators, the first consecutive
    /// difference seeds `Delta = Delta0 |f_1 - f_0|`.
    pub delta: Option<f64>,
    /// User-supplied `Delta0`, replacing the model constant.
    pub delta0: Option<f64>,
    pub delta_min: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            kind: Estimator::GaussModel,
            gauss_mode: GaussMode::Quantile,
            beta: 0.01,
            delta: None,
            delta0: None,
            delta_min: 0.0,
        }
    }
}

impl EstimatorConfig {
    pub fn constant(delta: f64) -> Self {
        Self {
            kind: Estimator::Constant,
            delta: Some(delta),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorylessConfig {
    /// Nominal population size `N`; enters only the step size and `Delta0`.
    pub population: usize,
    pub rho: f64,
    pub alpha: f64,
    /// Number of samples `K`.
    pub samples: u64,
    pub p0: BernoulliParams,
    /// Initial threshold; defaults to the value of the first sample.
    #[serde(default)]
    pub gamma0: Option<f64>,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub options: RunOptions,
    /// Never update the parameters; only the threshold walk runs.
    #[serde(default)]
    pub frozen_params: bool,
}

impl MemorylessConfig {
    pub fn new(
        population: usize,
        rho: f64,
        alpha: f64,
        samples: u64,
        p0: BernoulliParams,
    ) -> Result<Self> {
        let config = Self {
            population,
            rho,
            alpha,
            samples,
            p0,
            gamma0: None,
            estimator: EstimatorConfig::default(),
            options: RunOptions::default(),
            frozen_params: false,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.population == 0 {
            return Err(CemError::config("population", "must be positive"));
        }
        check_rho(self.rho)?;
        check_alpha(self.alpha)?;
        check_p0(&self.p0)?;
        if self.population as f64 * self.rho <= 1.0 {
            return Err(CemError::config(
                "population",
                format!(
                    "must exceed 1 / rho = {} so that 1 - rho + 1/N < 1",
                    1.0 / self.rho
                ),
            ));
        }
        if self.gamma0.is_some_and(|g| !g.is_finite()) {
            return Err(CemError::config("gamma0", "must be finite"));
        }
        let est = &self.estimator;
        if !(est.beta > 0.0 && est.beta <= 1.0) && est.kind != Estimator::Constant {
            return Err(CemError::config("beta", "must lie in (0, 1]"));
        }
        match est.delta {
            Some(d) if !(d.is_finite() && d >= 0.0) => {
                return Err(CemError::config("delta", "must be finite and non-negative"))
            }
            None if est.kind == Estimator::Constant => {
                return Err(CemError::config(
                    "delta",
                    "is required by the constant estimator",
                ))
            }
            _ => {}
        }
        if est.delta0.is_some_and(|d| !(d.is_finite() && d > 0.0)) {
            return Err(CemError::config("delta0", "must be finite and positive"));
        }
        if !(est.delta_min.is_finite() && est.delta_min >= 0.0) {
            return Err(CemError::config(
                "delta_min",
                "must be finite and non-negative",
            ));
        }
        if let GaussMode::Calibrated { c } = est.gauss_mode {
            if !(c.is_finite() && c > 0.0) {
                return Err(CemError::config(
                    "gauss_mode.c",
                    "must be finite and positive",
                ));
            }
        }
        self.options.validate()
    }

    pub fn step_size(&self) -> f64 {
        self.alpha / elite_count(self.population, self.rho) as f64
    }

    /// `Delta0` implied by the estimator settings.
    pub fn delta0(&self) -> Result<f64> {
        if let Some(d) = self.estimator.delta0 {
            return Ok(d);
        }
        match self.estimator.kind {
            Estimator::Constant => Ok(0.0),
            Estimator::UniformModel => Ok(delta0_uniform(self.population)),
            Estimator::GaussModel => {
                delta0_gauss(self.population, self.rho, self.estimator.gauss_mode)
            }
        }
    }
}

pub fn run_memoryless<O: Objective + ?Sized>(
    config: &MemorylessConfig,
    obj: &O,
    rng: &mut RngStream,
) -> Result<RunTrace> {
    config.validate()?;
    if config.p0.dim() != obj.dim() {
        return Err(CemError::Dimension {
            expected: obj.dim(),
            actual: config.p0.dim(),
        });
    }
    let opts = &config.options;
    let est = &config.estimator;
    let stride = opts.snapshot_stride.unwrap_or(config.population as u64);
    let alpha1 = config.step_size();
    let mut trace = RunTrace::new(Variant::Memoryless, config.p0.clone(), alpha1);
    let mut params = config.p0.clone();

    let mut state = ThresholdState {
        gamma: config.gamma0.unwrap_or(f64::NAN),
        delta: est.delta.unwrap_or(0.0).max(est.delta_min),
        prev_value: None,
        estimator: est.kind,
        beta: est.beta,
        delta0: config.delta0()?,
        delta_min: est.delta_min,
    };
    let mut delta_seeded = est.delta.is_some() || est.kind == Estimator::Constant;

    for t in 0..config.samples {
        let sample = evaluate(obj, draw_sample(&params, rng), t)?;
        trace.evaluations += 1;
        trace.offer(&sample);
        let value = sample.value;
        if state.gamma.is_nan() {
            state.gamma = value;
        }

        let (gamma, delta) = (state.gamma, state.delta);
        let elite = value >= gamma;
        state = threshold_step(&state, elite, config.rho);
        if elite && !config.frozen_params {
            let before = params.clone();
            params.step_toward(sample.bits.iter().map(|&b| b as u8 as f64), alpha1);
            trace.sign_changes.record(before.probs(), params.probs());
            trace.updates += 1;
        }

        if !delta_seeded {
            if let Some(prev) = state.prev_value {
                state.delta = (state.delta0 * (value - prev).abs()).max(state.delta_min);
                state.prev_value = Some(value);
                delta_seeded = true;
            } else {
                state.prev_value = Some(value);
            }
        } else {
            state = delta_update(&state, value);
        }

        if opts.record_steps {
            trace.steps.push(StepRecord {
                index: t,
                value,
                gamma: Some(gamma),
                delta: Some(delta),
                elite,
            });
        }
        if (t + 1) % stride == 0 {
            trace.snapshot(&params);
        }
        if elite && !config.frozen_params && trace.check_convergence(&params, opts) {
            break;
        }
    }
    trace.finish(params);
    Ok(trace)
}
