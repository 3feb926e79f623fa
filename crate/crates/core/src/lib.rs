//! Certified fixed-point solvers on ordered coordinate spaces.
//!
//! The library decides whether a nonnegative matrix is a valid contraction
//! datum (four equivalent characterizations with positive certificates),
//! turns certificates into weighted renormings with an explicit contraction
//! factor, and drives Picard iteration with a-priori/a-posteriori error
//! bounds on scalar, vector-valued (product), and coupled/tripled
//! fixed-point problems.

pub mod coupled_tripled;
pub mod expr;
pub mod nonneg_matrix;
pub mod norms;
pub mod order;
pub mod perov;
pub mod picard;

pub use nonneg_matrix::{MatrixError, NonnegativeMatrix, NormalityVerdict, SpectralEstimate};
pub use norms::Renorming;
pub use order::{CoordinateOrder, OrderDirection};
pub use picard::{OrderedProblem, PicardRun};
