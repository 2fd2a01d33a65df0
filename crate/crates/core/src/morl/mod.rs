//! Multi-objective policy-gradient backbone: one stochastic policy per
//! scalarisation weight, optionally regularised towards reflection
//! equivariance, evaluated into a coverage set.

mod coverage;
mod learner;
mod policy;
mod weights;

pub use coverage::{build_coverage_set, CoveragePoint, CoverageSet, Schedule, SourceKind, COVERAGE_HEADER};
pub use learner::{
    evaluate_policy, evaluate_scalarized, greedy_returns, sample_episode, train_policy, Episode, Evaluation,
    PolicyLearner, RLConfig, RewardSource, Sparsity, UpdateStats,
};
pub use policy::{PolicyNet, SampledAction, LOG_STD_MAX, LOG_STD_MIN};
pub use weights::{scalarize, weight_grid, WeightVector};
