//! Shared domain types: Bernoulli parameter vectors, evaluated samples,
//! the objective contract and the seeded random stream.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CemError, Result};

/// Parameter vector of a product of independent Bernoulli distributions.
///
/// Entry `i` is the probability that bit `i` of a drawn sample is one. Every
/// entry stays inside `[0, 1]` for the whole lifetime of the value; the only
/// mutating operations are convex steps toward points of `[0, 1]^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BernoulliParams {
    probs: Vec<f64>,
}

impl BernoulliParams {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(CemError::config("p0", "must have at least one component"));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(CemError::Argument(format!(
                "probability {p} at index {i} is outside [0, 1]"
            )));
        }
        Ok(Self { probs })
    }

    /// `n` fair coins, the customary starting point.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::constant(n, 0.5)
    }

    pub fn constant(n: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; n])
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// True when every entry lies strictly inside `(0, 1)`.
    pub fn is_interior(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0 && p < 1.0)
    }

    /// In-place convex step `p <- (1 - weight) p + weight * target`.
    ///
    /// `target` must have `dim()` entries in `[0, 1]` and `weight` must be in
    /// `[0, 1]`; callers check both. The clamp only absorbs rounding.
    pub(crate) fn step_toward<I>(&mut self, target: I, weight: f64)
    where
        I: IntoIterator<Item = f64>,
    {
        for (p, t) in self.probs.iter_mut().zip(target) {
            *p = ((1.0 - weight) * *p + weight * t).clamp(0.0, 1.0);
        }
    }
}

impl TryFrom<Vec<f64>> for BernoulliParams {
    type Error = CemError;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<BernoulliParams> for Vec<f64> {
    fn from(params: BernoulliParams) -> Self {
        params.probs
    }
}

/// A drawn bit vector together with its cached objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedSample {
    pub bits: Vec<bool>,
    pub value: f64,
    /// Global evaluation counter at the time of the draw, starting at 0.
    pub draw_index: u64,
}

/// Optimal point of a test problem, when it is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownOptimum {
    pub bits: Vec<bool>,
    pub value: f64,
}

/// A deterministic function `{0,1}^n -> R` to be maximized.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    /// Objective value of `bits`. Callers guarantee `bits.len() == self.dim()`.
    fn value(&self, bits: &[bool]) -> f64;

    fn optimum(&self) -> Option<&KnownOptimum> {
        None
    }
}

impl<O: Objective + ?Sized> Objective for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn value(&self, bits: &[bool]) -> f64 {
        (**self).value(bits)
    }

    fn optimum(&self) -> Option<&KnownOptimum> {
        (**self).optimum()
    }
}

impl<O: Objective + ?Sized> Objective for Box<O> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn value(&self, bits: &[bool]) -> f64 {
        (**self).value(bits)
    }

    fn optimum(&self) -> Option<&KnownOptimum> {
        (**self).optimum()
    }
}

/// Turns a minimization problem into the maximization form the engines expect.
#[derive(Debug, Clone)]
pub struct Negated<O>(pub O);

impl<O: Objective> Objective for Negated<O> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn value(&self, bits: &[bool]) -> f64 {
        -self.0.value(bits)
    }
}

/// Deterministic pseudo-random stream with an explicit 64-bit seed.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw from `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// True with probability `p`; exactly never for `p = 0` and always for `p = 1`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Draws one bit vector from the product distribution `params`.
pub fn draw_sample(params: &BernoulliParams, rng: &mut RngStream) -> Vec<bool> {
    params.probs.iter().map(|&p| rng.bernoulli(p)).collect()
}

pub fn evaluate<O: Objective + ?Sized>(
    obj: &O,
    bits: Vec<bool>,
    draw_index: u64,
) -> Result<EvaluatedSample> {
    if bits.len() != obj.dim() {
        return Err(CemError::Dimension {
            expected: obj.dim(),
            actual: bits.len(),
        });
    }
    let value = obj.value(&bits);
    if !value.is_finite() {
        return Err(CemError::NonFinite(value));
    }
    Ok(EvaluatedSample {
        bits,
        value,
        draw_index,
    })
}

/// True iff every probability is within `eps` of 0 or of 1.
pub fn is_binary_converged(params: &BernoulliParams, eps: f64) -> bool {
    params.probs.iter().all(|&p| p <= eps || p >= 1.0 - eps)
}

pub fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Parses a string of `0`/`1` characters; anything else yields `None`.
pub fn bits_from_str(s: &str) -> Option<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Some(false),
            '1' => Some(true),
            _ => None,
        })
        .collect()
}
