use alloc::string::String;

/// Errors raised by the simulator.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("operator spaces differ: expected {expected}, found {found}")]
    SpaceMismatch { expected: String, found: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Fock truncation {0} is too small (need at least 2 levels)")]
    InvalidTruncation(usize),

    /// Population in the top Fock levels exceeded the leakage limit.
    #[error("truncation leakage in factor `{factor}`: population {population:.3e} in the top levels exceeds {limit:.0e}")]
    Leakage {
        factor: String,
        population: f64,
        limit: f64,
    },

    #[error("operator is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("unknown factor `{0}`")]
    UnknownFactor(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("rate fit window: {0}")]
    FitWindow(String),

    #[error("spectral decomposition failed: {0}")]
    Spectral(String),

    #[error("unknown platform `{0}`")]
    UnknownPlatform(String),

    #[error("signal-to-noise ratio diverges at 4αβ = {phase:.6}")]
    Divergence { phase: f64 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
