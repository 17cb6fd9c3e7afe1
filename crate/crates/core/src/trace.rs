//! Per-run records shared by all three engines.

use serde::{Deserialize, Serialize};

use crate::diagnostics::SignChangeCounter;
use crate::error::{CemError, Result};
use crate::model::{is_binary_converged, BernoulliParams, EvaluatedSample, Objective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Batch,
    Window,
    Memoryless,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Batch, Variant::Window, Variant::Memoryless];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Batch => "batch",
            Variant::Window => "window",
            Variant::Memoryless => "memoryless",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = CemError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "batch" => Ok(Variant::Batch),
            "window" => Ok(Variant::Window),
            "memoryless" => Ok(Variant::Memoryless),
            other => Err(CemError::config(
                "variant",
                format!("must be batch, window or memoryless (got `{other}`)"),
            )),
        }
    }
}

/// Options common to every engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    /// Tolerance of the 0/1 convergence detector.
    pub eps_conv: f64,
    /// Stop as soon as the parameters are binary within `eps_conv`.
    pub stop_on_convergence: bool,
    /// Steps between parameter snapshots: generations for the batch engine,
    /// samples for the online engines. `None` means one generation-equivalent
    /// (1 for batch, `N` for the online engines).
    pub snapshot_stride: Option<u64>,
    /// Keep one [`StepRecord`] per step.
    pub record_steps: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            eps_conv: 1e-6,
            stop_on_convergence: true,
            snapshot_stride: None,
            record_steps: true,
        }
    }
}

impl RunOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_conv > 0.0 && self.eps_conv < 0.5) {
            return Err(CemError::config("eps_conv", "must lie in (0, 0.5)"));
        }
        if self.snapshot_stride == Some(0) {
            return Err(CemError::config("snapshot_stride", "must be positive"));
        }
        Ok(())
    }
}

/// Parameter vector captured after a given number of evaluations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub evaluations: u64,
    /// Parameter updates applied so far.
    pub updates: u64,
    pub params: BernoulliParams,
}

/// One engine step. For the batch engine a step is a generation and `value`
/// is the best value of that generation; for the online engines it is the
/// single sample drawn at `index`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: u64,
    pub value: f64,
    /// Threshold the step was judged against; `None` during window warm-up.
    pub gamma: Option<f64>,
    /// Step scale used by the memoryless threshold walk.
    pub delta: Option<f64>,
    /// Whether the step updated the parameters.
    pub elite: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunTrace {
    pub variant: Variant,
    pub p0: BernoulliParams,
    /// Parameter step size: `alpha` per generation for batch, `alpha / ceil(rho N)`
    /// per elite sample for the online engines.
    pub step_size: f64,
    pub steps: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    /// Strict best-so-far improvements in draw order.
    pub best_history: Vec<EvaluatedSample>,
    pub sign_changes: SignChangeCounter,
    pub evaluations: u64,
    pub updates: u64,
    /// Evaluation count at which the parameters first became binary within
    /// the run's `eps_conv`.
    pub converged_at: Option<u64>,
    pub final_params: BernoulliParams,
}

impl RunTrace {
    pub(crate) fn new(variant: Variant, p0: BernoulliParams, step_size: f64) -> Self {
        let n = p0.dim();
        Self {
            variant,
            snapshots: vec![Snapshot {
                evaluations: 0,
                updates: 0,
                params: p0.clone(),
            }],
            final_params: p0.clone(),
            p0,
            step_size,
            steps: Vec::new(),
            best_history: Vec::new(),
            sign_changes: SignChangeCounter::new(n),
            evaluations: 0,
            updates: 0,
            converged_at: None,
        }
    }

    pub fn best(&self) -> Option<&EvaluatedSample> {
        self.best_history.last()
    }

    /// Draw index of the first sample whose value reaches `target`.
    pub fn first_reaching(&self, target: f64) -> Option<u64> {
        self.best_history
            .iter()
            .find(|s| reaches(s.value, target))
            .map(|s| s.draw_index)
    }

    /// Draw index at which the objective's known optimum was first generated.
    pub fn first_optimum_hit<O: Objective + ?Sized>(&self, obj: &O) -> Option<u64> {
        obj.optimum().and_then(|opt| self.first_reaching(opt.value))
    }

    pub(crate) fn offer(&mut self, sample: &EvaluatedSample) {
        if self.best().is_none_or(|b| sample.value > b.value) {
            self.best_history.push(sample.clone());
        }
    }

    pub(crate) fn snapshot(&mut self, params: &BernoulliParams) {
        if self
            .snapshots
            .last()
            .is_some_and(|s| s.evaluations == self.evaluations && s.updates == self.updates)
        {
            return;
        }
        self.snapshots.push(Snapshot {
            evaluations: self.evaluations,
            updates: self.updates,
            params: params.clone(),
        });
    }

    /// Records convergence; returns true when the run should stop.
    pub(crate) fn check_convergence(
        &mut self,
        params: &BernoulliParams,
        opts: &RunOptions,
    ) -> bool {
        if self.converged_at.is_none() && is_binary_converged(params, opts.eps_conv) {
            self.converged_at = Some(self.evaluations);
        }
        self.converged_at.is_some() && opts.stop_on_convergence
    }

    pub(crate) fn finish(&mut self, params: BernoulliParams) {
        self.snapshot(&params);
        self.final_params = params;
    }
}

/// Objective values are compared with a relative slack of 1e-9 so optima
/// computed by a different summation order still register.
pub fn reaches(value: f64, target: f64) -> bool {
    value >= target - 1e-9 * target.abs().max(1.0)
}

/// `ceil(rho * n)`, treating products within 1e-9 of an integer as that
/// integer so that e.g. `0.3 * 10` gives 3.
pub fn elite_count(n: usize, rho: f64) -> usize {
    let x = rho * n as f64;
    let r = x.round();
    let k = if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r
    } else {
        x.ceil()
    };
    (k as usize).max(1)
}

pub(crate) fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho < 1.0 {
        Ok(())
    } else {
        Err(CemError::config(
            "rho",
            format!("must lie in (0, 1) (got {rho})"),
        ))
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(CemError::config(
            "alpha",
            format!("must lie in (0, 1] (got {alpha})"),
        ))
    }
}

pub(crate) fn check_p0(p0: &BernoulliParams) -> Result<()> {
    if p0.is_interior() {
        Ok(())
    } else {
        Err(CemError::config(
            "p0",
            "every entry must lie strictly inside (0, 1)",
        ))
    }
}
