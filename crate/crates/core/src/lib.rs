//! Compressed low-rank factorization.
//!
//! Data `M` (or a tensor `T`) is observed only through a sparse binary
//! projection `M̃ = P·M`. The crate factorizes the small projected object and
//! then recovers the sparse ambient left factor column by column with ℓ1
//! minimization (*factorize-recover*), alongside the baseline that recovers
//! every column of `M` first (*recover-factorize*), planted-instance
//! generators, and empirical oracles for the uniqueness and expansion
//! properties that make the approach work.

pub mod error;
pub mod factorize;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod recovery;
pub mod rng;
pub mod sensing;
pub mod synthgen;
pub mod tensor;
pub mod uniqueness;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use sensing::ProjectionMatrix;
pub use tensor::{Tensor3, TensorFactors};
