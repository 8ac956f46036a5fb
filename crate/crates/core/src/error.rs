//! Error type shared by every module.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Domain(String),

    #[error("stage beyond frustration: r/2 + 2cos(2πΦ/Φ₀) = {denominator:.6} is not positive")]
    Frustrated { denominator: f64 },

    #[error("cutoff exceeded: {freq_hz:.6e} Hz is at or above the {cutoff_hz:.6e} Hz divergence")]
    Cutoff { freq_hz: f64, cutoff_hz: f64 },

    #[error("frequency grids differ")]
    GridMismatch,

    #[error("nonlinear solve failed at step {step} after {iterations} iterations (update norm {update:.3e})")]
    NonConvergence { step: usize, iterations: usize, update: f64 },

    #[error("spectral leakage: tone at {freq_hz:.6e} Hz sits {offset_bins:.3e} bins off the FFT grid")]
    Leakage { freq_hz: f64, offset_bins: f64 },

    #[error("ill-conditioned fit: {0}")]
    Conditioning(String),

    #[error("target unreachable: {0}")]
    Unreachable(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a numerical method rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::Conditioning(_) | Error::Unreachable(_)
        )
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
