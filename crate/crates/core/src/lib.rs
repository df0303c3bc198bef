//! Serving batch requests from the binary simplex code with column sets of
//! size at most two, built on services in finite abelian groups.
//!
//! - [`group`]: finite abelian groups as direct sums of cyclic groups.
//! - [`service`]: services, special services and the chain-rotation extension.
//! - [`simplex`]: the simplex code, hyperplane reduction and odd/batch serving.
//! - [`search`]: exhaustive and greedy searches (special services, Snevily
//!   numberings, a definition-level serving oracle).
//! - [`poly`]: exact sparse polynomial expansion for the coefficient claims
//!   behind the prime-order special-service argument.

mod bitset;
pub mod error;
pub mod group;
pub mod poly;
pub mod report;
pub mod service;
pub mod search;
pub mod simplex;

pub use error::{Error, Result};
pub use group::{GroupElement, GroupSpec};
pub use report::{VerificationReport, Violation};
