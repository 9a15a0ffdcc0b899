use thiserror::Error;

/// Errors raised by the repair toolkit.
///
/// Indices are stored 0-based but rendered 1-based in messages.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RepairError {
    #[error("time series must contain at least one point")]
    EmptySeries,

    #[error("non-finite value at index {}", .index + 1)]
    NonFinite { index: usize },

    #[error("index {} out of range 1..={len}", .index + 1)]
    IndexOutOfRange { index: usize, len: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("series of length {len} is too short for order {order}")]
    TooShort { len: usize, order: usize },

    #[error("order {0} is outside the supported range 1..=8")]
    InvalidOrder(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index {} is labeled and cannot be repaired", .index + 1)]
    LabeledIndex { index: usize },

    #[error("normal equations are singular (pivot magnitude {pivot:e})")]
    SingularSystem { pivot: f64 },

    #[error("labeled diffs carry no information for estimation")]
    DegenerateLabels,

    #[error("parameter fixpoint did not settle after {steps} steps (residual {residual:e})")]
    NoFixpoint { steps: usize, residual: f64 },
}

impl RepairError {
    /// True for failures of the numerical procedures rather than of the input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            RepairError::SingularSystem { .. }
                | RepairError::DegenerateLabels
                | RepairError::NoFixpoint { .. }
        )
    }
}

pub type Result<T, E = RepairError> = std::result::Result<T, E>;
