//! Experiment orchestration: config parsing, variant dispatch, metric
//! aggregation, CSV output and the property-verification report.

mod config;
mod run;
pub mod verify;

pub use config::{
    parse_config, parse_config_str, BudgetConfig, ConfigError, RewardModelConfig, RunConfig, Variant,
    BASE_INITIAL_EPISODES, BASE_REFINE_EPISODES, BASE_STEPS_PER_CYCLE, DEFAULT_LAMBDA,
};
pub use run::{
    collect_random_episodes, coverage_metrics, reward_net_spec, run_experiment, run_seed, sweep_sparsity,
    train_initial_ensemble, write_metrics_csv, write_outputs, ResultRow, RunOutput, SeedOutput, EUM_WEIGHTS,
    METRICS_HEADER, VO_PREFERENCES,
};

use crate::error::PrismError;

/// Exit status for a property failure.
pub const EXIT_PROPERTY_FAILURE: i32 = 1;
pub const EXIT_CONFIG_ERROR: i32 = 2;
pub const EXIT_NUMERIC_FAILURE: i32 = 3;

/// Maps a library error to the CLI exit status: input problems count as
/// configuration errors, everything else aborts as a numeric failure.
pub fn exit_code(err: &PrismError) -> i32 {
    match err {
        PrismError::Input(_) | PrismError::Unsupported(_) => EXIT_CONFIG_ERROR,
        PrismError::Numeric(_) | PrismError::State(_) | PrismError::Io(_) => EXIT_NUMERIC_FAILURE,
    }
}
