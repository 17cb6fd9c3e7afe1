//! Replicate execution, the alpha sweep and the variant comparison.

use std::time::Instant;

use cem_core::{
    analyze, make_objective, miss_probability_bound, phi, run_batch, run_memoryless,
    run_online_window, AnalysisConfig, CemError, Objective, RngStream, RunTrace, Variant,
};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::config::{EngineConfig, ExperimentConfig};
use crate::error::{HarnessError, Result};

/// A step count, written as `never` when the event did not happen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step(pub Option<u64>);

impl Serialize for Step {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Some(v) => s.serialize_u64(v),
            None => s.serialize_str("never"),
        }
    }
}

/// An optional float, written as an empty field (CSV) or `null` (JSON).
pub type Maybe = Option<f64>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub replicate: u32,
    pub seed: u64,
    pub variant: Variant,
    pub alpha: f64,
    /// Objective evaluations actually spent.
    pub steps: u64,
    pub updates: u64,
    pub first_hit: Step,
    pub best_value: f64,
    pub converged_binary: bool,
    pub converged_step: Step,
    pub sign_changes: u64,
    pub envelope_violations: u64,
    pub wall_clock_ms: Maybe,
}

/// Rows in replicate order plus the replicates that errored.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<(u32, CemError)>,
}

impl ExperimentOutcome {
    /// Turns recorded failures into an error, after the rows have been used.
    pub fn check(&self) -> Result<()> {
        match self.failures.first() {
            None => Ok(()),
            Some((r, e)) => Err(HarnessError::Replicates {
                failed: self.failures.len(),
                total: self.rows.len() + self.failures.len(),
                first_replicate: *r,
                first_error: e.clone(),
            }),
        }
    }
}

pub fn run_engine<O: Objective + ?Sized>(
    engine: &EngineConfig,
    obj: &O,
    rng: &mut RngStream,
) -> cem_core::Result<RunTrace> {
    match engine {
        EngineConfig::Batch(c) => run_batch(c, obj, rng),
        EngineConfig::Window(c) => run_online_window(c, obj, rng),
        EngineConfig::Memoryless(c) => run_memoryless(c, obj, rng),
    }
}

fn run_replicate<O: Objective + ?Sized>(
    config: &ExperimentConfig,
    engine: &EngineConfig,
    obj: &O,
    alpha: f64,
    replicate: u32,
) -> cem_core::Result<ResultRow> {
    let seed = config.seed_for(replicate);
    let mut rng = RngStream::new(seed);
    let started = Instant::now();
    let trace = run_engine(engine, obj, &mut rng)?;
    let elapsed = started.elapsed();
    let report = analyze(
        &trace,
        obj,
        &AnalysisConfig {
            eps_conv: config.algorithm.eps_conv,
            ..AnalysisConfig::default()
        },
    );
    Ok(ResultRow {
        replicate,
        seed,
        variant: config.variant,
        alpha,
        steps: trace.evaluations,
        updates: trace.updates,
        first_hit: Step(report.first_hit),
        best_value: trace.best().map_or(f64::NAN, |b| b.value),
        converged_binary: report.converged_binary,
        converged_step: Step(report.converged_step),
        sign_changes: trace.sign_changes.total(),
        envelope_violations: report.envelope_violations,
        wall_clock_ms: config.output.timing.then_some(elapsed.as_secs_f64() * 1e3),
    })
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(HarnessError::Config("`--jobs` must be positive".into()));
        }
        builder = builder.num_threads(j);
    }
    builder
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start {jobs:?} workers: {e}")))
}

fn run_with_alpha(
    config: &ExperimentConfig,
    alpha: f64,
    gauss_constant: Option<f64>,
    pool: &rayon::ThreadPool,
) -> Result<ExperimentOutcome> {
    let obj = make_objective(&config.problem).map_err(HarnessError::config_from)?;
    let engine = config.engine_config_for_alpha(alpha, gauss_constant)?;
    let results: Vec<_> = pool.install(|| {
        (0..config.replicates)
            .into_par_iter()
            .map(|r| (r, run_replicate(config, &engine, &obj, alpha, r)))
            .collect()
    });
    let mut outcome = ExperimentOutcome {
        rows: Vec::with_capacity(results.len()),
        failures: Vec::new(),
    };
    for (r, result) in results {
        match result {
            Ok(row) => outcome.rows.push(row),
            Err(e) => outcome.failures.push((r, e)),
        }
    }
    Ok(outcome)
}

/// Runs every replicate of `config`, at most `jobs` at a time.
pub fn run_experiment(config: &ExperimentConfig, jobs: Option<usize>) -> Result<ExperimentOutcome> {
    config.validate()?;
    let pool = pool(jobs)?;
    let c = config.resolve_gauss_constant()?;
    run_with_alpha(config, config.algorithm.alpha, c, &pool)
}

/// Wilson score interval at 95% for `hits` successes out of `n`.
pub fn wilson_interval(hits: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    const Z: f64 = 1.959963984540054;
    let n = n as f64;
    let p = hits as f64 / n;
    let z2 = Z * Z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub step_size: f64,
    pub replicates: u64,
    pub hits: u64,
    pub hit_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `exp(-phi_1 h(alpha_1))`, with `phi_1` the probability of the optimum under `p0`.
    pub miss_bound: f64,
    /// `(1 - phi_1) exp(-phi_1 h(alpha_1))`.
    pub miss_bound_full: f64,
    pub failed: u64,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<(f64, u32, CemError)>,
}

impl SweepOutcome {
    pub fn check(&self) -> Result<()> {
        match self.failures.first() {
            None => Ok(()),
            Some((_, r, e)) => Err(HarnessError::Replicates {
                failed: self.failures.len(),
                total: self
                    .rows
                    .iter()
                    .map(|row| row.replicates + row.failed)
                    .sum::<u64>() as usize,
                first_replicate: *r,
                first_error: e.clone(),
            }),
        }
    }
}

/// Optimum-hit rate per step size, next to the theoretical miss bound.
pub fn alpha_sweep(
    config: &ExperimentConfig,
    alphas: &[f64],
    jobs: Option<usize>,
) -> Result<SweepOutcome> {
    config.validate()?;
    if alphas.is_empty() {
        return Err(HarnessError::Config(
            "`sweep.alphas` must not be empty".into(),
        ));
    }
    let obj = make_objective(&config.problem).map_err(HarnessError::config_from)?;
    let optimum = obj.optimum().cloned().ok_or_else(|| {
        HarnessError::Config(format!(
            "problem `{}` has no known optimum; the sweep needs one",
            config.problem.kind_name()
        ))
    })?;
    let pool = pool(jobs)?;
    let c = config.resolve_gauss_constant()?;
    let n = config.problem.dim();
    let mut outcome = SweepOutcome {
        rows: Vec::with_capacity(alphas.len()),
        failures: Vec::new(),
    };
    for &alpha in alphas {
        let engine = config.engine_config_for_alpha(alpha, c)?;
        let step_size = engine.step_size();
        let p0 = match &engine {
            EngineConfig::Batch(c) => &c.p0,
            EngineConfig::Window(c) => &c.p0,
            EngineConfig::Memoryless(c) => &c.p0,
        };
        let phi1 = phi(p0, &optimum.bits)?;
        let miss_bound = miss_probability_bound(phi1, step_size, n)?;

        let run = run_with_alpha(config, alpha, c, &pool)?;
        let total = run.rows.len() as u64;
        let hits = run.rows.iter().filter(|r| r.first_hit.0.is_some()).count() as u64;
        let (ci_low, ci_high) = wilson_interval(hits, total);
        outcome.rows.push(SweepRow {
            alpha,
            step_size,
            replicates: total,
            hits,
            hit_rate: if total == 0 {
                0.0
            } else {
                hits as f64 / total as f64
            },
            ci_low,
            ci_high,
            miss_bound,
            miss_bound_full: (1.0 - phi1) * miss_bound,
            failed: run.failures.len() as u64,
        });
        outcome
            .failures
            .extend(run.failures.into_iter().map(|(r, e)| (alpha, r, e)));
    }
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub variant: Variant,
    pub budget: u64,
    pub replicates: u64,
    pub hits: u64,
    pub hit_rate: f64,
    /// Mean first-hit step over the replicates that hit the optimum.
    pub mean_first_hit: Maybe,
    pub converged: u64,
    /// Mean evaluations to binary convergence over the converged replicates.
    pub mean_converged_step: Maybe,
    pub failed: u64,
}

#[derive(Debug)]
pub struct CompareOutcome {
    pub rows: Vec<CompareRow>,
    pub failures: Vec<(Variant, u32, CemError)>,
}

impl CompareOutcome {
    pub fn check(&self) -> Result<()> {
        match self.failures.first() {
            None => Ok(()),
            Some((variant, r, e)) => Err(HarnessError::Replicates {
                failed: self.failures.len(),
                total: self
                    .rows
                    .iter()
                    .map(|row| row.replicates + row.failed)
                    .sum::<u64>() as usize,
                first_replicate: *r,
                first_error: CemError::Argument(format!("{variant}: {e}")),
            }),
        }
    }
}

/// The same experiment under each of the three variants.
pub fn variant_family(config: &ExperimentConfig) -> Vec<ExperimentConfig> {
    Variant::ALL
        .iter()
        .map(|&variant| ExperimentConfig {
            variant,
            ..config.clone()
        })
        .collect()
}

fn mean(values: impl Iterator<Item = u64>) -> Maybe {
    let (sum, count) = values.fold((0.0, 0u64), |(s, c), v| (s + v as f64, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Runs each config of `family` with matched seeds and summarizes per variant.
///
/// The configs must share problem, seeds, replicate count and evaluation budget.
pub fn compare_variants(
    family: &[ExperimentConfig],
    jobs: Option<usize>,
) -> Result<CompareOutcome> {
    let Some(first) = family.first() else {
        return Err(HarnessError::Config("nothing to compare".into()));
    };
    for c in family {
        c.validate()?;
        if c.problem != first.problem {
            return Err(HarnessError::Config(
                "compared configs must share `problem`".into(),
            ));
        }
        if c.base_seed != first.base_seed || c.replicates != first.replicates {
            return Err(HarnessError::Config(
                "compared configs must share `base_seed` and `replicates`".into(),
            ));
        }
        if c.evaluation_budget() != first.evaluation_budget() {
            return Err(HarnessError::Config(format!(
                "budget mismatch: {} spends {} evaluations, {} spends {}",
                first.variant,
                first.evaluation_budget(),
                c.variant,
                c.evaluation_budget()
            )));
        }
    }

    let mut rows = Vec::with_capacity(family.len());
    let mut failures = Vec::new();
    for c in family {
        let run = run_experiment(c, jobs)?;
        let total = run.rows.len() as u64;
        let hits = run.rows.iter().filter(|r| r.first_hit.0.is_some()).count() as u64;
        rows.push(CompareRow {
            variant: c.variant,
            budget: c.evaluation_budget(),
            replicates: total,
            hits,
            hit_rate: if total == 0 {
                0.0
            } else {
                hits as f64 / total as f64
            },
            mean_first_hit: mean(run.rows.iter().filter_map(|r| r.first_hit.0)),
            converged: run.rows.iter().filter(|r| r.converged_binary).count() as u64,
            mean_converged_step: mean(run.rows.iter().filter_map(|r| r.converged_step.0)),
            failed: run.failures.len() as u64,
        });
        failures.extend(run.failures.into_iter().map(|(r, e)| (c.variant, r, e)));
    }
    Ok(CompareOutcome { rows, failures })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationRow {
    pub population: usize,
    pub rho: f64,
    pub reps: u64,
    pub seed: u64,
    pub mean_gap: f64,
    pub gap_stderr: f64,
    pub mean_absdiff: f64,
    pub absdiff_stderr: f64,
    /// Monte Carlo `Delta0`: mean gap over mean absolute difference.
    pub delta0_calibrated: f64,
    pub delta0_quantile: f64,
    /// Normal quantile spacing at the elite boundary.
    pub quantile_gap: f64,
    /// Constant for calibrated mode: `delta0_calibrated / quantile_gap`.
    pub gauss_constant: f64,
    /// `delta0_quantile / delta0_calibrated`.
    pub discrepancy: f64,
}

/// Monte Carlo calibration of `Delta0` for normally distributed values.
pub fn calibrate(population: usize, rho: f64, reps: u64, seed: u64) -> Result<CalibrationRow> {
    let mut rng = RngStream::new(seed);
    let est = cem_core::order_gap_mc(
        cem_core::oracles::GapDistribution::Normal {
            mu: 0.0,
            sigma: 1.0,
        },
        population,
        rho,
        reps,
        &mut rng,
    )
    .map_err(HarnessError::config_from)?;
    let quantile_gap = cem_core::memoryless::gauss_quantile_gap(population, rho)?;
    let delta0_quantile =
        cem_core::memoryless::delta0_gauss(population, rho, cem_core::GaussMode::Quantile)?;
    Ok(CalibrationRow {
        population,
        rho,
        reps,
        seed,
        mean_gap: est.mean_gap,
        gap_stderr: est.gap_stderr,
        mean_absdiff: est.mean_absdiff,
        absdiff_stderr: est.absdiff_stderr,
        delta0_calibrated: est.ratio,
        delta0_quantile,
        quantile_gap,
        gauss_constant: est.ratio / quantile_gap,
        discrepancy: delta0_quantile / est.ratio,
    })
}
