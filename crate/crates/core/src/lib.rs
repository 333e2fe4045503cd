//! Sparse probability mappings with controllable sparsity.
//!
//! - [`simplex`]: closed-form regularized simplex projection (sort and
//!   randomized-pivot routes).
//! - [`mappings`]: softmax, spherical softmax, sum-normalization, hardmax,
//!   sparsemax, sparsegen, sparsegen-lin, sparsecone, sparsehourglass,
//!   sum-normalization++.
//! - [`jacobian`]: analytic Jacobians, JVPs and finite-difference checks.
//! - [`losses`]: convex multilabel hinge losses and their subgradients.
//! - [`multilabel`]: synthetic data, linear model training and metrics.
//! - [`bench`]: sort vs pivot projection timing.

pub mod bench;
mod error;
pub mod jacobian;
pub mod losses;
pub mod mappings;
pub mod multilabel;
pub mod simplex;

pub use error::{Error, Result};
pub use jacobian::JacobianMatrix;
pub use losses::{LabelDistribution, LossKind};
pub use mappings::{HourglassParams, MappingSpec, Transform, TransformKind};
pub use simplex::{ProbabilityVector, ScoreVector, ThresholdResult};
