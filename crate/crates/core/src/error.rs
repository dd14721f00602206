//! Error type shared by every module of the crate.

use thiserror::Error;

/// Which side of an overhead comparison is above the accuracy threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalabilityFailure {
    /// The unprotected noise strength is at or above the threshold.
    Unprotected,
    /// The protected noise strength is at or above the threshold.
    Protected,
    /// Both noise strengths are at or above the threshold.
    Both,
}

impl std::fmt::Display for ScalabilityFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Unprotected => "unprotected gates are above threshold",
            Self::Protected => "protected gates are above threshold",
            Self::Both => "both protected and unprotected gates are above threshold",
        };
        f.write_str(s)
    }
}

/// Coarse error classes, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Malformed input or configuration.
    Config,
    /// Inputs outside the regime where a bound or expansion is valid.
    Validity,
    /// A numerical procedure failed.
    Numeric,
}

/// Errors raised by `ddlab-core`.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DdError {
    /// Non-finite entries or an operator lacking a required structure.
    #[error("invalid numeric input: {0}")]
    NumericInput(String),
    /// A unitary has an eigenvalue too close to -1 for a principal logarithm.
    #[error("eigenvalue within {distance:.3e} of -1; principal logarithm is ambiguous")]
    BranchAmbiguity {
        /// Distance of the offending eigenvalue from -1.
        distance: f64,
    },
    /// Operator dimensions are incompatible.
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    /// A scalar argument lies outside its permitted range.
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    /// A bound was requested outside the regime where it holds.
    #[error("outside validity regime: {message} (margin {margin:.6})")]
    Validity {
        /// Human-readable reason.
        message: String,
        /// Signed distance to the regime boundary; negative means violated.
        margin: f64,
    },
    /// The Magnus convergence condition is violated.
    #[error("Magnus expansion may diverge: integrated norm {integrated_norm:.6} >= pi")]
    ExpansionDivergence {
        /// Integral of the Hamiltonian norm over the sequence.
        integrated_norm: f64,
    },
    /// A pulse cannot be described by signed Pauli switching functions.
    #[error("pulse {index} is not representable by Pauli switching functions")]
    NotRepresentable {
        /// Index of the offending pulse.
        index: usize,
    },
    /// A memory sequence does not return to the identity.
    #[error("schedule is not cyclic: residual {residual:.3e}")]
    NonCyclic {
        /// Distance of the pulse product from the identity up to phase.
        residual: f64,
    },
    /// A bracketing root finder found no sign change.
    #[error("no sign change on bracket [{lo:.6e}, {hi:.6e}]")]
    NoSignChange {
        /// Lower end of the bracket.
        lo: f64,
        /// Upper end of the bracket.
        hi: f64,
    },
    /// Overhead ratio undefined because a noise strength exceeds the threshold.
    #[error("not scalable: {0}")]
    NotScalable(ScalabilityFailure),
    /// Configuration error located by a JSON pointer.
    #[error("config error at '{pointer}': {message}")]
    Config {
        /// JSON pointer to the offending value.
        pointer: String,
        /// Description of the problem.
        message: String,
    },
    /// File system failure.
    #[error("i/o error: {0}")]
    Io(String),
}

impl DdError {
    /// Coarse class of the error.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Self::Config { .. } | Self::Io(_) | Self::OutOfRange(_) | Self::DimMismatch(_) => {
                ErrorCategory::Config
            }
            Self::Validity { .. } | Self::NotScalable(_) | Self::NonCyclic { .. } => {
                ErrorCategory::Validity
            }
            Self::NumericInput(_)
            | Self::BranchAmbiguity { .. }
            | Self::ExpansionDivergence { .. }
            | Self::NotRepresentable { .. }
            | Self::NoSignChange { .. } => ErrorCategory::Numeric,
        }
    }
}

impl From<std::io::Error> for DdError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, DdError>;
