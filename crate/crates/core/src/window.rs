//! Online cross-entropy method with a sliding window of the last `N` samples.
//!
//! Each new sample is judged against the `ceil(rho N)`-th largest value among
//! the `N` most recent samples (itself included) and, if elite, moves the
//! parameters immediately with step `alpha / ceil(rho N)`.

use std::cmp::Ordering;
use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{CemError, Result};
use crate::model::{draw_sample, evaluate, BernoulliParams, EvaluatedSample, Objective, RngStream};
use crate::trace::{
    check_alpha, check_p0, check_rho, elite_count, RunOptions, RunTrace, StepRecord, Variant,
};

/// Single-sample convex step `p <- (1 - alpha1) p + alpha1 x`.
pub fn online_update(x: &[bool], params: &BernoulliParams, alpha1: f64) -> Result<BernoulliParams> {
    if x.len() != params.dim() {
        return Err(CemError::Dimension {
            expected: params.dim(),
            actual: x.len(),
        });
    }
    if !(0.0..=1.0).contains(&alpha1) {
        return Err(CemError::Argument(format!(
            "step size {alpha1} outside [0, 1]"
        )));
    }
    let mut next = params.clone();
    next.step_toward(x.iter().map(|&b| b as u8 as f64), alpha1);
    Ok(next)
}

/// Result of pushing a sample into the window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowDecision {
    /// The window has not overflowed yet; no threshold, no update.
    Warmup,
    Decided {
        gamma: f64,
        is_elite: bool,
    },
}

/// Sorting key: descending value, then ascending draw index.
#[derive(Debug, Clone, Copy)]
struct RankKey {
    value: f64,
    draw_index: u64,
}

impl RankKey {
    fn cmp(&self, other: &RankKey) -> Ordering {
        other
            .value
            .total_cmp(&self.value)
            .then(self.draw_index.cmp(&other.draw_index))
    }
}

/// FIFO of the last `capacity` samples plus a rank-ordered index of their
/// values. Insertion and eviction locate their slot by binary search.
#[derive(Debug, Clone)]
pub struct SampleWindow {
    capacity: usize,
    elite_rank: usize,
    entries: VecDeque<EvaluatedSample>,
    ranked: Vec<RankKey>,
}

impl SampleWindow {
    pub fn new(capacity: usize, rho: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(CemError::config(
                "population",
                "window length must be positive",
            ));
        }
        check_rho(rho)?;
        Ok(Self {
            capacity,
            elite_rank: elite_count(capacity, rho),
            entries: VecDeque::with_capacity(capacity + 1),
            ranked: Vec::with_capacity(capacity + 1),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Samples currently held, oldest first.
    pub fn entries(&self) -> impl Iterator<Item = &EvaluatedSample> {
        self.entries.iter()
    }

    pub fn newest(&self) -> Option<&EvaluatedSample> {
        self.entries.back()
    }

    /// Appends `sample`; once the window overflows, evicts the oldest entry and
    /// judges `sample` against the `ceil(rho N)`-th largest remaining value.
    pub fn push(&mut self, sample: EvaluatedSample) -> WindowDecision {
        debug_assert!(self
            .entries
            .back()
            .is_none_or(|last| last.draw_index < sample.draw_index));
        let key = RankKey {
            value: sample.value,
            draw_index: sample.draw_index,
        };
        let slot = self
            .ranked
            .partition_point(|k| k.cmp(&key) == Ordering::Less);
        self.ranked.insert(slot, key);
        self.entries.push_back(sample);

        if self.entries.len() <= self.capacity {
            return WindowDecision::Warmup;
        }
        let oldest = self.entries.pop_front().expect("window overflowed");
        let gone = RankKey {
            value: oldest.value,
            draw_index: oldest.draw_index,
        };
        let at = self
            .ranked
            .binary_search_by(|k| k.cmp(&gone))
            .expect("evicted sample is indexed");
        self.ranked.remove(at);

        let gamma = self.ranked[self.elite_rank - 1].value;
        WindowDecision::Decided {
            gamma,
            is_elite: key.value >= gamma,
        }
    }

    /// Threshold recomputed by sorting a copy of the window; the oracle for
    /// the incremental index. `None` until the window is full.
    pub fn threshold_by_resort(&self) -> Option<f64> {
        if self.entries.len() < self.capacity {
            return None;
        }
        let mut values: Vec<f64> = self.entries.iter().map(|s| s.value).collect();
        values.sort_by(|a, b| b.total_cmp(a));
        Some(values[self.elite_rank - 1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineConfig {
    /// Window length `N`.
    pub population: usize,
    pub rho: f64,
    pub alpha: f64,
    /// Number of samples `K`.
    pub samples: u64,
    pub p0: BernoulliParams,
    #[serde(default)]
    pub options: RunOptions,
    /// Cross-check every threshold against a full re-sort of the window.
    #[serde(default)]
    pub verify_with_resort: bool,
}

impl OnlineConfig {
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
            options: RunOptions::default(),
            verify_with_resort: false,
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

    /// Per-sample step `alpha / ceil(rho N)`.
    pub fn step_size(&self) -> f64 {
        self.alpha / elite_count(self.population, self.rho) as f64
    }
}

pub fn run_online_window<O: Objective + ?Sized>(
    config: &OnlineConfig,
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
    let stride = opts.snapshot_stride.unwrap_or(config.population as u64);
    let alpha1 = config.step_size();
    let mut trace = RunTrace::new(Variant::Window, config.p0.clone(), alpha1);
    let mut window = SampleWindow::new(config.population, config.rho)?;
    let mut params = config.p0.clone();

    for t in 0..config.samples {
        let sample = evaluate(obj, draw_sample(&params, rng), t)?;
        trace.evaluations += 1;
        trace.offer(&sample);
        let value = sample.value;

        let decision = window.push(sample);
        let (gamma, elite) = match decision {
            WindowDecision::Warmup => (None, false),
            WindowDecision::Decided { gamma, is_elite } => {
                if config.verify_with_resort {
                    let resorted = window.threshold_by_resort().expect("window is full");
                    if resorted != gamma {
                        return Err(CemError::WindowOracle {
                            draw: t,
                            incremental: gamma,
                            resorted,
                        });
                    }
                }
                (Some(gamma), is_elite)
            }
        };
        if elite {
            let x = &window.newest().expect("just pushed").bits;
            let before = params.clone();
            params.step_toward(x.iter().map(|&b| b as u8 as f64), alpha1);
            trace.sign_changes.record(before.probs(), params.probs());
            trace.updates += 1;
        }
        if opts.record_steps {
            trace.steps.push(StepRecord {
                index: t,
                value,
                gamma,
                delta: None,
                elite,
            });
        }
        if (t + 1) % stride == 0 {
            trace.snapshot(&params);
        }
        if elite && trace.check_convergence(&params, opts) {
            break;
        }
    }
    trace.finish(params);
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{make_objective, ProblemSpec};
    use proptest::prelude::*;

    fn sample(value: f64, draw_index: u64) -> EvaluatedSample {
        EvaluatedSample {
            bits: vec![],
            value,
            draw_index,
        }
    }

    #[test]
    fn online_update_examples() {
        let p = BernoulliParams::new(vec![0.2, 0.8]).unwrap();
        let next = online_update(&[true, false], &p, 0.1).unwrap();
        assert!((next.probs()[0] - 0.28).abs() < 1e-12);
        assert!((next.probs()[1] - 0.72).abs() < 1e-12);

        let full = online_update(&[false, true], &p, 1.0).unwrap();
        assert_eq!(full.probs(), &[0.0, 1.0]);

        assert!(matches!(
            online_update(&[true], &p, 0.1),
            Err(CemError::Dimension {
                expected: 2,
                actual: 1
            })
        ));
    }

    #[test]
    fn repeated_target_contracts_geometrically() {
        let v = [true, false, true];
        let mut p = BernoulliParams::new(vec![0.3, 0.6, 0.9]).unwrap();
        let alpha1 = 0.05;
        let gap = |p: &BernoulliParams| -> Vec<f64> {
            p.probs()
                .iter()
                .zip(v)
                .map(|(q, b)| (b as u8 as f64 - q).abs())
                .collect()
        };
        for _ in 0..200 {
            let before = gap(&p);
            p = online_update(&v, &p, alpha1).unwrap();
            for (g, b) in gap(&p).iter().zip(before) {
                assert!((g - (1.0 - alpha1) * b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn window_decisions_by_hand() {
        // After warm-up the window holds {5, 9, 2, 7}; 7 is newest.
        let mut w = SampleWindow::new(4, 0.5).unwrap();
        for (i, v) in [100.0, 5.0, 9.0, 2.0].into_iter().enumerate() {
            assert_eq!(w.push(sample(v, i as u64)), WindowDecision::Warmup);
        }
        assert_eq!(
            w.push(sample(7.0, 4)),
            WindowDecision::Decided {
                gamma: 7.0,
                is_elite: true
            }
        );

        let mut w = SampleWindow::new(4, 0.5).unwrap();
        for (i, v) in [100.0, 5.0, 9.0, 2.0].into_iter().enumerate() {
            w.push(sample(v, i as u64));
        }
        assert_eq!(
            w.push(sample(1.0, 4)),
            WindowDecision::Decided {
                gamma: 5.0,
                is_elite: false
            }
        );
        assert_eq!(w.len(), 4);
    }

    #[test]
    fn strict_new_maximum_is_always_elite() {
        let mut w = SampleWindow::new(10, 0.1).unwrap();
        for i in 0..10 {
            w.push(sample(i as f64, i));
        }
        assert_eq!(
            w.push(sample(50.0, 10)),
            WindowDecision::Decided {
                gamma: 50.0,
                is_elite: true
            }
        );
    }

    #[test]
    fn no_updates_during_warmup() {
        let obj = make_objective(&ProblemSpec::onemax(8)).unwrap();
        let p0 = BernoulliParams::uniform(8).unwrap();
        let cfg = OnlineConfig::new(20, 0.1, 0.7, 20, p0.clone()).unwrap();
        let trace = run_online_window(&cfg, &obj, &mut RngStream::new(1)).unwrap();
        assert_eq!(trace.updates, 0);
        assert_eq!(trace.final_params, p0);
        assert!(trace.steps.iter().all(|s| s.gamma.is_none() && !s.elite));
    }

    #[test]
    fn step_size_uses_ceiling() {
        let p0 = BernoulliParams::uniform(4).unwrap();
        let cfg = OnlineConfig::new(100, 0.1, 0.7, 1000, p0.clone()).unwrap();
        assert!((cfg.step_size() - 0.07).abs() < 1e-15);
        let cfg = OnlineConfig::new(15, 0.1, 0.6, 1000, p0).unwrap();
        assert!((cfg.step_size() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn elite_count_in_binomial_band() {
        // Continuous-valued objective so ties do not inflate the elite count.
        let weights: Vec<f64> = (0..16).map(|i| 1.0 + (i as f64).sqrt() * 0.37).collect();
        let obj = make_objective(&ProblemSpec::weighted_linear(weights)).unwrap();
        let (n, rho, k) = (100usize, 0.1, 20_000u64);
        // Tiny step so the sampler stays close to stationary over the run.
        let mut cfg =
            OnlineConfig::new(n, rho, 0.001, k, BernoulliParams::uniform(16).unwrap()).unwrap();
        cfg.options.stop_on_convergence = false;
        let trace = run_online_window(&cfg, &obj, &mut RngStream::new(99)).unwrap();
        let trials = (k - n as u64) as f64;
        let mean = trials * rho;
        let sd = (trials * rho * (1.0 - rho)).sqrt();
        let elites = trace.updates as f64;
        assert!(
            (elites - mean).abs() <= 3.0 * sd,
            "elites {elites}, expected {mean} +- {}",
            3.0 * sd
        );
    }

    #[test]
    fn resort_oracle_agrees_during_runs() {
        let obj = make_objective(&ProblemSpec::trap(12, 3)).unwrap();
        let mut cfg =
            OnlineConfig::new(30, 0.2, 0.5, 5000, BernoulliParams::uniform(12).unwrap()).unwrap();
        cfg.verify_with_resort = true;
        cfg.options.stop_on_convergence = false;
        run_online_window(&cfg, &obj, &mut RngStream::new(4)).unwrap();
    }

    proptest! {
        #[test]
        fn incremental_threshold_equals_resort(
            values in prop::collection::vec(0u8..20, 1..400),
            cap in 1usize..40,
            rho in 0.01f64..0.99,
        ) {
            let mut w = SampleWindow::new(cap, rho).unwrap();
            for (i, v) in values.into_iter().enumerate() {
                if let WindowDecision::Decided { gamma, .. } = w.push(sample(v as f64, i as u64)) {
                    prop_assert_eq!(Some(gamma), w.threshold_by_resort());
                }
                prop_assert!(w.len() <= cap);
            }
        }

        #[test]
        fn entries_stay_ordered(values in prop::collection::vec(-5.0f64..5.0, 1..200), cap in 1usize..30) {
            let mut w = SampleWindow::new(cap, 0.3).unwrap();
            for (i, v) in values.into_iter().enumerate() {
                w.push(sample(v, i as u64));
                let idx: Vec<u64> = w.entries().map(|s| s.draw_index).collect();
                prop_assert!(idx.windows(2).all(|p| p[0] < p[1]));
            }
        }
    }
}
