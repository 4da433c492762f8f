//! Video-based identification of reduced-order models on spectral submanifolds.
//!
//! The pipeline runs from raw frames to a tracked observable, a delay
//! embedding, a fitted invariant manifold, reduced dynamics in normal form,
//! and finally backbone curves and prediction errors.

// Negated float comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod embedding;
pub mod error;
pub mod linalg;
pub mod media_io;
pub mod metrics;
pub mod ode;
pub mod par;
pub mod poly;
pub mod reduced_dynamics;
pub mod serde_mat;
pub mod ssm_geometry;
pub mod synthetic_oracle;
pub mod tracker;

pub use error::{Error, Result};
pub use par::Exec;
pub use poly::{monomials, MultiIndexBasis};
