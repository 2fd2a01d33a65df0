//! Reward redistribution for sparse multi-objective reinforcement learning,
//! reflection-equivariant policy regularisation, and Pareto-front metrics.

pub mod envs;
pub mod resymnet;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod morl;
pub mod scalar;
pub mod seeds;
pub mod sparsity;
pub mod symmetry;
pub mod tensor;

pub use error::{PrismError, Result};
pub use scalar::{Real, Scalar};

/// Exact rational scalar for the symmetry lemmas and release accounting.
pub type Rational = num_rational::Ratio<i64>;
/// Default floating scalar for everything numeric.
pub type Float = f64;
/// Pareto point at the default precision.
pub type Point = metrics::ParetoPoint<Float>;
/// Reflection-aware policy output at the default precision.
pub type Output = symmetry::PolicyOutput<Float>;
