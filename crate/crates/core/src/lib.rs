//! Vertex operators of Zamolodchikov-Faddeev algebras built from a unitary
//! R-matrix, and numerical checks of their algebraic identities on a
//! discretised Fock space.

pub mod braid;
pub mod config;
pub mod error;
pub mod fock;
pub mod hierarchy;
pub mod report;
pub mod rmatrix;
pub mod suite;
pub mod tensor;
pub mod vertex;

pub use config::{RunConfig, Suite};
pub use error::{Error, Result};
pub use report::{CheckRecord, VerificationReport};
pub use rmatrix::RMatrixModel;
pub use tensor::MultiSiteOperator;

/// Residual threshold used when nothing else is configured.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
