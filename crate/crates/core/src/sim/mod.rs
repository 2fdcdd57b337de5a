//! Closed-loop simulation against the true follower and the experiment
//! suites built on it.

mod experiments;
mod rollout;

pub use experiments::{
    run_adaptation_experiment, run_individual_experiment, run_unilateral_experiment, ExperimentKind,
    ExperimentReport, ExperimentSettings, ExperimentSetup, ReportRow,
};
pub use rollout::{mean_and_variance, monte_carlo_cost, rollout, rollout_with_rng, Noise, SimResult};
