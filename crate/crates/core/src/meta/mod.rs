//! Meta-learning of the follower response model.
//!
//! Each follower type defines a task with objective
//! `L_θ(M; D) = J̃^{L*}(M) + γ Q_θ(M; D)`. Training is bilevel: the inner
//! problem fits `Z*_θ` near the meta parameter with a proximity weight `λ`,
//! the outer problem moves `M` along the batch-averaged task gradient at
//! `Z*_θ`. After training, [`adapt`] specializes `M_meta` to one type.

mod config;
mod dataset;
mod objective;
mod trainer;

pub use config::TrainConfig;
pub use dataset::{
    fit_cost, fit_cost_gradient, sample_dataset, split_counts, ResponseDataset, ResponseSample,
    SampleSource,
};
pub use objective::{task_loss, task_loss_gradient};
pub use trainer::{
    adapt, adapt_on, adaptation_gradient, adaptation_objective, initial_model, inner_solve,
    outer_step, sample_batch, train_individual, train_meta, train_meta_from, InnerSolution,
    MetaTrace, MetaTraining, OuterStep, TaskOutcome, TraceRecord,
};
