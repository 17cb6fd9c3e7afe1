//! Generational cross-entropy method with an elite-quantile threshold and a
//! smoothed Bernoulli refit.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{CemError, Result};
use crate::model::{draw_sample, evaluate, BernoulliParams, EvaluatedSample, Objective, RngStream};
use crate::trace::{
    check_alpha, check_p0, check_rho, elite_count, RunOptions, RunTrace, StepRecord, Variant,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    /// Population size `N`.
    pub population: usize,
    pub rho: f64,
    pub alpha: f64,
    /// Number of generations `T`.
    pub generations: u64,
    pub p0: BernoulliParams,
    #[serde(default)]
    pub options: RunOptions,
}

impl BatchConfig {
    pub fn new(
        population: usize,
        rho: f64,
        alpha: f64,
        generations: u64,
        p0: BernoulliParams,
    ) -> Result<Self> {
        let config = Self {
            population,
            rho,
            alpha,
            generations,
            p0,
            options: RunOptions::default(),
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
        self.options.validate()
    }

    /// `N_b = ceil(rho N)`.
    pub fn elite_size(&self) -> usize {
        elite_count(self.population, self.rho)
    }
}

/// Outcome of one generation.
#[derive(Debug, Clone)]
pub struct GenerationResult {
    pub gamma: f64,
    /// Every sample with value `>= gamma`, best first. May exceed `N_b` under ties.
    pub elite: Vec<EvaluatedSample>,
    pub new_params: BernoulliParams,
    pub best: EvaluatedSample,
}

/// Descending value, then ascending draw index.
fn rank_order(a: &EvaluatedSample, b: &EvaluatedSample) -> Ordering {
    b.value
        .total_cmp(&a.value)
        .then(a.draw_index.cmp(&b.draw_index))
}

/// The `ceil(rho N)`-th largest of `values` (1-indexed, duplicates counted).
pub fn elite_threshold(values: &[f64], rho: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(CemError::Argument(
            "elite threshold of an empty list".into(),
        ));
    }
    check_rho(rho)?;
    let k = elite_count(values.len(), rho);
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    Ok(sorted[k - 1])
}

/// Smoothed refit toward the mean of the first `n_b` elite vectors.
///
/// `elite` is expected in rank order; extra members beyond `n_b` (ties at the
/// threshold) are ignored so the average is over exactly `n_b` vectors.
pub fn batch_update(
    elite: &[&[bool]],
    params: &BernoulliParams,
    alpha: f64,
    n_b: usize,
) -> Result<BernoulliParams> {
    if elite.is_empty() || n_b == 0 {
        return Err(CemError::Argument(
            "batch update needs a non-empty elite set".into(),
        ));
    }
    if elite.len() < n_b {
        return Err(CemError::Argument(format!(
            "elite set has {} members, fewer than N_b = {n_b}",
            elite.len()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(CemError::Argument(format!("alpha {alpha} outside [0, 1]")));
    }
    let n = params.dim();
    let mut counts = vec![0usize; n];
    for x in &elite[..n_b] {
        if x.len() != n {
            return Err(CemError::Dimension {
                expected: n,
                actual: x.len(),
            });
        }
        for (c, &b) in counts.iter_mut().zip(x.iter()) {
            *c += b as usize;
        }
    }
    let mut next = params.clone();
    next.step_toward(counts.iter().map(|&c| c as f64 / n_b as f64), alpha);
    Ok(next)
}

/// Draws and evaluates one population, then applies the batch update.
pub fn run_generation<O: Objective + ?Sized>(
    config: &BatchConfig,
    params: &BernoulliParams,
    obj: &O,
    rng: &mut RngStream,
    first_draw: u64,
) -> Result<GenerationResult> {
    let mut population = (0..config.population as u64)
        .map(|i| evaluate(obj, draw_sample(params, rng), first_draw + i))
        .collect::<Result<Vec<_>>>()?;
    population.sort_by(rank_order);

    let n_b = config.elite_size();
    let gamma = population[n_b - 1].value;
    let elite_len = population.partition_point(|s| s.value >= gamma);
    let elite_bits: Vec<&[bool]> = population[..n_b]
        .iter()
        .map(|s| s.bits.as_slice())
        .collect();
    let new_params = batch_update(&elite_bits, params, config.alpha, n_b)?;

    let best = population[0].clone();
    population.truncate(elite_len);
    Ok(GenerationResult {
        gamma,
        elite: population,
        new_params,
        best,
    })
}

pub fn run_batch<O: Objective + ?Sized>(
    config: &BatchConfig,
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
    let stride = opts.snapshot_stride.unwrap_or(1);
    let mut trace = RunTrace::new(Variant::Batch, config.p0.clone(), config.alpha);
    let mut params = config.p0.clone();

    for t in 0..config.generations {
        let generation = run_generation(config, &params, obj, rng, trace.evaluations)?;
        trace.evaluations += config.population as u64;
        trace.offer(&generation.best);
        trace
            .sign_changes
            .record(params.probs(), generation.new_params.probs());
        params = generation.new_params;
        trace.updates += 1;
        if opts.record_steps {
            trace.steps.push(StepRecord {
                index: t,
                value: generation.best.value,
                gamma: Some(generation.gamma),
                delta: None,
                elite: true,
            });
        }
        if (t + 1) % stride == 0 {
            trace.snapshot(&params);
        }
        if trace.check_convergence(&params, opts) {
            break;
        }
    }
    trace.finish(params);
    Ok(trace)
}
