use serde::Serialize;

/// One failed condition found by a verifier. Indices are 0-based positions
/// in the request sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    LengthMismatch { expected: usize, found: usize },
    RequestMismatch { index: usize },
    SumMismatch { index: usize },
    DuplicateX { first: usize, second: usize },
    DuplicateY { first: usize, second: usize },
    /// `x_first` equals `y_second` in a special service.
    XYCollision { first: usize, second: usize },
    ZeroRequest { index: usize },
    EmptySet { index: usize },
    SetTooLarge { index: usize, size: usize, max: usize },
    ColumnOutOfRange { index: usize, column: u64 },
    RepeatedColumnInSet { index: usize, column: u64 },
    OverlappingColumn { column: u64, first: usize, second: usize },
    ElementOutOfRange { index: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl VerificationReport {
    pub(crate) fn from_violations(violations: Vec<Violation>) -> Self {
        VerificationReport {
            valid: violations.is_empty(),
            violations,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.valid
    }
}
