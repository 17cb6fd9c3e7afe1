//! Cross-entropy optimization over `{0,1}^n` with Bernoulli product
//! distributions.
//!
//! Three engines share the same sampling model and parameter update:
//!
//! * [`batch`]: generational method, elite threshold from each population.
//! * [`window`]: per-sample decisions against a sliding window of the last `N`
//!   samples.
//! * [`memoryless`]: per-sample decisions against a threshold that follows a
//!   random walk, with O(1) state.
//!
//! [`diagnostics`] turns a finished [`trace::RunTrace`] into convergence
//! quantities and [`oracles`] holds the brute-force references used to test
//! all of the above.

pub mod batch;
pub mod diagnostics;
pub mod error;
pub mod memoryless;
pub mod model;
pub mod normal;
pub mod objectives;
pub mod oracles;
pub mod trace;
pub mod window;

pub use batch::{batch_update, elite_threshold, run_batch, BatchConfig, GenerationResult};
pub use diagnostics::{
    analyze, miss_probability_bound, param_envelope, phi, AnalysisConfig, ConvergenceReport,
};
pub use error::{CemError, Result};
pub use memoryless::{
    delta0_gauss, delta0_uniform, delta_update, run_memoryless, threshold_step, Estimator,
    EstimatorConfig, GaussMode, MemorylessConfig, ThresholdState,
};
pub use model::{
    draw_sample, evaluate, is_binary_converged, BernoulliParams, EvaluatedSample, KnownOptimum,
    Negated, Objective, RngStream,
};
pub use objectives::{enumerate_optimum, make_objective, Problem, ProblemSpec};
pub use oracles::{calibrate_delta0_gauss, exhaustive_success_prob, order_gap_mc, GapEstimate};
pub use trace::{elite_count, RunOptions, RunTrace, Snapshot, StepRecord, Variant};
pub use window::{online_update, run_online_window, OnlineConfig, SampleWindow, WindowDecision};
