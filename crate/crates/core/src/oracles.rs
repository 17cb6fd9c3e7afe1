//! Brute-force and Monte Carlo reference computations.
//!
//! These take independent routes from the engines and are what the tests and
//! the Gaussian `Delta0` calibration compare against.

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{CemError, Result};
use crate::memoryless::gauss_quantile_gap;
use crate::model::{BernoulliParams, RngStream};
use crate::trace::{check_rho, elite_count};

pub const MIN_REPS: u64 = 10_000;
pub const EXHAUSTIVE_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GapDistribution {
    Uniform { a: f64, b: f64 },
    Normal { mu: f64, sigma: f64 },
}

impl GapDistribution {
    fn sampler(&self) -> Result<Sampler> {
        match *self {
            GapDistribution::Uniform { a, b } => Uniform::new(a, b)
                .map(Sampler::Uniform)
                .map_err(|e| CemError::Argument(format!("uniform({a}, {b}): {e}"))),
            GapDistribution::Normal { mu, sigma } => Normal::new(mu, sigma)
                .map(Sampler::Normal)
                .map_err(|e| CemError::Argument(format!("normal({mu}, {sigma}): {e}"))),
        }
    }
}

enum Sampler {
    Uniform(Uniform<f64>),
    Normal(Normal<f64>),
}

impl Sampler {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Uniform(d) => d.sample(rng),
            Sampler::Normal(d) => d.sample(rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    /// Mean spacing between the `N_e`-th and `(N_e + 1)`-th largest of `N`
    /// draws, `N_e = ceil(rho N)`.
    pub mean_gap: f64,
    pub gap_stderr: f64,
    /// Mean of `|X - Y|` over independent pairs.
    pub mean_absdiff: f64,
    pub absdiff_stderr: f64,
    pub ratio: f64,
    pub samples: u64,
}

/// Running mean and variance (Welford).
#[derive(Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

/// Monte Carlo estimate of the elite-boundary spacing and of `E|X - Y|`.
///
/// All draws come from `rng` in a fixed order: first `reps` batches of `N`
/// values, then `reps` pairs.
pub fn order_gap_mc(
    dist: GapDistribution,
    n: usize,
    rho: f64,
    reps: u64,
    rng: &mut RngStream,
) -> Result<GapEstimate> {
    check_rho(rho)?;
    if n as f64 * rho <= 1.0 {
        return Err(CemError::Argument(format!(
            "population {n} must exceed 1 / rho = {}",
            1.0 / rho
        )));
    }
    if reps < MIN_REPS {
        return Err(CemError::Argument(format!(
            "at least {MIN_REPS} repetitions are required (got {reps})"
        )));
    }
    let sampler = dist.sampler()?;
    let ne = elite_count(n, rho);
    if ne >= n {
        return Err(CemError::Argument(format!(
            "rho = {rho} leaves no sample below the elite"
        )));
    }

    let mut gaps = Moments::default();
    let mut batch = vec![0.0; n];
    for _ in 0..reps {
        for v in batch.iter_mut() {
            *v = sampler.draw(rng);
        }
        // Descending: positions 0..ne hold the ne largest, position ne the next one.
        let (top, next, _) = batch.select_nth_unstable_by(ne, |a, b| b.total_cmp(a));
        let boundary = top.iter().copied().fold(f64::INFINITY, f64::min);
        gaps.push(boundary - *next);
    }

    let mut absdiff = Moments::default();
    for _ in 0..reps {
        let x = sampler.draw(rng);
        let y = sampler.draw(rng);
        absdiff.push((x - y).abs());
    }

    Ok(GapEstimate {
        mean_gap: gaps.mean,
        gap_stderr: gaps.stderr(),
        mean_absdiff: absdiff.mean,
        absdiff_stderr: absdiff.stderr(),
        ratio: gaps.mean / absdiff.mean,
        samples: reps,
    })
}

/// Empirical `Delta0` for normally distributed values: mean boundary spacing
/// over mean absolute difference, for standard normal draws.
pub fn calibrate_delta0_gauss(n: usize, rho: f64, reps: u64, rng: &mut RngStream) -> Result<f64> {
    let est = order_gap_mc(
        GapDistribution::Normal {
            mu: 0.0,
            sigma: 1.0,
        },
        n,
        rho,
        reps,
        rng,
    )?;
    Ok(est.ratio)
}

/// Constant `c` for [`crate::memoryless::GaussMode::Calibrated`]: the
/// calibrated `Delta0` divided by the normal quantile gap.
pub fn calibrate_gauss_constant(n: usize, rho: f64, reps: u64, rng: &mut RngStream) -> Result<f64> {
    let delta0 = calibrate_delta0_gauss(n, rho, reps, rng)?;
    Ok(delta0 / gauss_quantile_gap(n, rho)?)
}

/// Probability of drawing exactly `x_star`, summed over the full outcome space.
pub fn exhaustive_success_prob(params: &BernoulliParams, x_star: &[bool]) -> Result<f64> {
    let n = params.dim();
    if n > EXHAUSTIVE_LIMIT {
        return Err(CemError::Capacity {
            n,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    if x_star.len() != n {
        return Err(CemError::Dimension {
            expected: n,
            actual: x_star.len(),
        });
    }
    let mut total = 0.0;
    for code in 0u32..(1u32 << n) {
        let mut prob = 1.0;
        let mut matches = true;
        for (i, &p) in params.probs().iter().enumerate() {
            let bit = (code >> i) & 1 == 1;
            prob *= if bit { p } else { 1.0 - p };
            matches &= bit == x_star[i];
        }
        if matches {
            total += prob;
        }
    }
    Ok(total)
}
