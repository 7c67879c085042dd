use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent grids, bad dimensions, malformed config files.
    #[error("configuration error: {0}")]
    Config(String),

    /// A parameter outside its admissible range.
    #[error("validation error: {0}")]
    Validation(String),

    /// A non-finite coefficient appeared during time stepping.
    #[error("numerical blow-up at step {step}{}{}", fmt_sample(*.sample), fmt_alpha(*.alpha))]
    BlowUp {
        step: usize,
        sample: Option<u64>,
        alpha: Option<f64>,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub fn is_blow_up(&self) -> bool {
        matches!(self, Error::BlowUp { .. })
    }

    /// Attach trajectory context to a blow-up error; other variants pass through.
    pub fn with_context(self, sample_id: Option<u64>, level: Option<f64>) -> Self {
        match self {
            Error::BlowUp { step, sample, alpha } => Error::BlowUp {
                step,
                sample: sample.or(sample_id),
                alpha: alpha.or(level),
            },
            other => other,
        }
    }
}

fn fmt_sample(sample: Option<u64>) -> String {
    sample.map(|s| format!(" (sample {s})")).unwrap_or_default()
}

fn fmt_alpha(alpha: Option<f64>) -> String {
    alpha.map(|a| format!(" (alpha {a})")).unwrap_or_default()
}
