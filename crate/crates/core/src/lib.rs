//! Joint estimation of sparse Gaussian graphical models across several
//! related groups.
//!
//! Each group's precision matrix is written as a sum of components, one per
//! subset of groups, and every off-diagonal entry is attributed to at most one
//! component. Sampling runs a Gibbs chain over that assignment using a
//! pseudo-likelihood, so no positive-definiteness constraint is needed.

pub mod error;
pub mod gibbs;
pub mod inference;
pub mod model;
pub mod oracle;
pub mod screening;
pub mod stats;
pub mod synthetic;

pub use error::{BjnsError, Result};
pub use model::{Component, DiagState, EdgeCoefficient, ModelSpec, ThetaState};
pub use stats::{compute_group_stats, GroupStats, QuadFormCache};
