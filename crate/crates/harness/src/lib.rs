//! Seeded experiment harness for the cross-entropy engines in `cem-core`.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;

pub use config::{ExperimentConfig, Format};
pub use error::{HarnessError, Result};
pub use experiment::{
    alpha_sweep, calibrate, compare_variants, run_experiment, variant_family, wilson_interval,
    CalibrationRow, CompareOutcome, CompareRow, ExperimentOutcome, ResultRow, Step, SweepOutcome,
    SweepRow,
};
