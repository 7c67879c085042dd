//! Monte Carlo studies over the α grid.

pub mod config;
pub mod fit;
pub mod output;
pub mod study;
pub mod tail;

pub use config::{GammaSeq, StudyConfig, Threshold};
pub use fit::{fit_rate, RateFit};
pub use study::{
    calibrate_r, run_ensemble, run_study, Calibration, Dumps, EnsembleResult, LevelSummary, SampleOutcome,
    StudyReport,
};
pub use tail::{tail_study, tail_table, wilson_interval, TailRow};
