//! Hybrid Kronecker product approximation (hKoPA) of dense real matrices.
//!
//! A P×Q matrix is modeled as a sum of Kronecker products
//!
//! ```text
//! Y = Σ_k λ_k A_k ⊗ B_k + σE,
//! ```
//!
//! where each term may use a different factor shape ("configuration"): A_k is
//! p_k×q_k with p_k | P and q_k | Q, and B_k fills the remaining (P/p_k)×(Q/q_k).
//! Fitting a single term of a given configuration reduces to a rank-one
//! approximation of a rearranged copy of the matrix, so the whole machinery is
//! built on a truncated SVD primitive.
//!
//! The crate provides:
//!
//! - [`config`]: configuration enumeration over divisor lattices and parameter
//!   counting,
//! - [`matrix`]: the dense row-major matrix value type and seeded Gaussian noise,
//! - [`rearrange`]: the permutation bridging Kronecker and rank-one structure,
//! - [`lowrank`]: truncated SVD and spectral norm,
//! - [`terms`]: Kronecker terms and the multi-term model object,
//! - [`orthogonalize`]: the identifiability (Gram-Schmidt) machinery,
//! - [`fit`]: backfitting for known configurations, greedy fitting with
//!   configuration selection by information criterion, and the random-matrix
//!   stopping rule,
//! - [`baseline`]: the low-rank SVD baseline and comparison curves,
//! - [`bench`]: the two-term simulation generator and grid driver,
//! - [`io`]: PGM images, a binary matrix format, model files and CSV reports.

pub mod baseline;
pub mod bench;
pub mod config;
mod error;
pub mod fit;
pub mod io;
pub mod lowrank;
pub mod matrix;
pub mod orthogonalize;
pub mod rearrange;
pub mod terms;

pub use config::{enumerate_configurations, AmbientShape, Configuration, ParameterCount};
pub use error::Error;
pub use matrix::{DenseMatrix, GaussianSource, NoiseSpec};
pub use terms::{HKopaModel, KroneckerTerm};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
