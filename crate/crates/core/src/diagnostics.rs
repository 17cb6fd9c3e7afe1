//! Convergence diagnostics: parameter envelopes, the probability of drawing
//! the optimum, the miss-probability bound and sign-change accounting of the
//! parameter increments `Z_t = p_t - p_{t-1}`.

use serde::{Deserialize, Serialize};

use crate::error::{CemError, Result};
use crate::model::{is_binary_converged, BernoulliParams, Objective};
use crate::trace::RunTrace;

/// Probability that a fresh draw from `params` equals `x_star`.
pub fn phi(params: &BernoulliParams, x_star: &[bool]) -> Result<f64> {
    if x_star.len() != params.dim() {
        return Err(CemError::Dimension {
            expected: params.dim(),
            actual: x_star.len(),
        });
    }
    Ok(params
        .probs()
        .iter()
        .zip(x_star)
        .map(|(&p, &b)| if b { p } else { 1.0 - p })
        .product())
}

/// Smallest and largest values each component can take after `updates`
/// convex steps of size `alpha1` starting from `p0`:
/// `lo = p0 (1 - a)^u`, `hi = lo + 1 - (1 - a)^u`.
pub fn param_envelope(p0: &BernoulliParams, alpha1: f64, updates: u64) -> (Vec<f64>, Vec<f64>) {
    let keep = (1.0 - alpha1).powf(updates as f64);
    let lo: Vec<f64> = p0.probs().iter().map(|&p| p * keep).collect();
    let hi = lo.iter().map(|&l| l + 1.0 - keep).collect();
    (lo, hi)
}

/// `h(a) = sum_{t >= 1} (1 - a)^{n t} = 1 / (1 - (1 - a)^n) - 1`.
pub fn h_series(alpha1: f64, n: usize) -> Result<f64> {
    if !(alpha1 > 0.0 && alpha1 <= 1.0) {
        return Err(CemError::Domain {
            function: "h",
            value: alpha1,
        });
    }
    if n == 0 {
        return Err(CemError::Argument("dimension must be positive".into()));
    }
    let log_keep = n as f64 * (-alpha1).ln_1p();
    // 1 - (1 - a)^n without cancellation for small a
    let escape = -log_keep.exp_m1();
    Ok(1.0 / escape - 1.0)
}

/// `exp(-phi1 h(alpha1))`; multiply by `1 - phi1` for the full bound on the
/// probability that the optimum is never generated.
pub fn miss_probability_bound(phi1: f64, alpha1: f64, n: usize) -> Result<f64> {
    if !(phi1 > 0.0 && phi1 <= 1.0) {
        return Err(CemError::Domain {
            function: "miss_probability_bound",
            value: phi1,
        });
    }
    Ok((-phi1 * h_series(alpha1, n)?).exp())
}

/// Per-component count of sign changes of the nonzero increments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignChangeCounter {
    last_sign: Vec<i8>,
    counts: Vec<u64>,
}

impl SignChangeCounter {
    pub fn new(n: usize) -> Self {
        Self {
            last_sign: vec![0; n],
            counts: vec![0; n],
        }
    }

    /// Accounts for one parameter update. Zero increments are not events.
    pub fn record(&mut self, before: &[f64], after: &[f64]) {
        for ((last, count), (b, a)) in self
            .last_sign
            .iter_mut()
            .zip(self.counts.iter_mut())
            .zip(before.iter().zip(after))
        {
            let sign = match a.partial_cmp(b) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => continue,
            };
            if *last != 0 && *last != sign {
                *count += 1;
            }
            *last = sign;
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub eps_conv: f64,
    /// Absolute slack allowed when comparing parameters against the envelope.
    pub envelope_tolerance: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            eps_conv: 1e-6,
            envelope_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub converged_binary: bool,
    /// Evaluations at the first snapshot from which every later snapshot is
    /// binary within `eps_conv`.
    pub converged_step: Option<u64>,
    pub final_params: BernoulliParams,
    /// Whether the objective carries optimum metadata at all.
    pub optimum_known: bool,
    /// Draw index at which the optimum was first generated.
    pub first_hit: Option<u64>,
    pub sign_changes: Vec<u64>,
    pub envelope_violations: u64,
    /// `(evaluations, phi)` at each snapshot.
    pub phi_series: Vec<(u64, f64)>,
    /// Probability of drawing the optimum from `p0`.
    pub phi1: Option<f64>,
    /// `(1 - phi1) exp(-phi1 h(alpha1))`.
    pub miss_bound: Option<f64>,
}

impl ConvergenceReport {
    pub fn optimum_generated(&self) -> bool {
        self.first_hit.is_some()
    }
}

/// Number of components, over all snapshots, that leave the envelope implied
/// by the snapshot's update count.
pub fn envelope_violations(trace: &RunTrace, tolerance: f64) -> u64 {
    trace
        .snapshots
        .iter()
        .map(|snap| {
            let (lo, hi) = param_envelope(&trace.p0, trace.step_size, snap.updates);
            snap.params
                .probs()
                .iter()
                .zip(lo.iter().zip(&hi))
                .filter(|(&p, (&l, &h))| p < l - tolerance || p > h + tolerance)
                .count() as u64
        })
        .sum()
}

pub fn analyze<O: Objective + ?Sized>(
    trace: &RunTrace,
    obj: &O,
    config: &AnalysisConfig,
) -> ConvergenceReport {
    let converged_binary = is_binary_converged(&trace.final_params, config.eps_conv);
    let converged_step = if converged_binary {
        let tail = trace
            .snapshots
            .iter()
            .rev()
            .take_while(|s| is_binary_converged(&s.params, config.eps_conv))
            .last();
        tail.map(|s| s.evaluations)
    } else {
        None
    };

    let optimum = obj.optimum().filter(|o| o.bits.len() == trace.p0.dim());
    let (phi_series, phi1, miss_bound) = match optimum {
        Some(opt) => {
            let series = trace
                .snapshots
                .iter()
                .map(|s| (s.evaluations, phi(&s.params, &opt.bits).unwrap_or(0.0)))
                .collect();
            let phi1 = phi(&trace.p0, &opt.bits).ok();
            let bound = phi1.and_then(|p| {
                miss_probability_bound(p, trace.step_size, trace.p0.dim())
                    .ok()
                    .map(|b| (1.0 - p) * b)
            });
            (series, phi1, bound)
        }
        None => (Vec::new(), None, None),
    };

    ConvergenceReport {
        converged_binary,
        converged_step,
        final_params: trace.final_params.clone(),
        optimum_known: optimum.is_some(),
        first_hit: trace.first_optimum_hit(obj),
        sign_changes: trace.sign_changes.counts().to_vec(),
        envelope_violations: envelope_violations(trace, config.envelope_tolerance),
        phi_series,
        phi1,
        miss_bound,
    }
}
