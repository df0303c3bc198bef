use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("cannot parse group spec {text:?}: {reason}")]
    ParseGroup { text: String, reason: String },

    #[error("cyclic factor of order {0} is not allowed (orders must be >= 2)")]
    FactorTooSmall(u64),

    #[error("group of order {order} exceeds the enumeration cap of {cap} elements")]
    GroupTooLarge { order: u128, cap: usize },

    #[error("element has {found} coordinates, group has dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("coordinate {index} = {value} is not reduced modulo {modulus}")]
    CoordinateOutOfRange { index: usize, value: u64, modulus: u32 },

    #[error("index {index} out of range for a group of order {order}")]
    IndexOutOfRange { index: usize, order: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A proven-unreachable branch or a loop invariant failed. Always a bug.
    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("search budget of {budget} exceeded")]
    BudgetExceeded { budget: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
