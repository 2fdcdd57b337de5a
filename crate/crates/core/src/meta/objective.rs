use crate::error::Result;
use crate::linalg::Mat;
use crate::lqg::{expected_cost, ResponseParam, Task};
use crate::matdiff::d_expected_cost;

use super::{fit_cost, fit_cost_gradient, ResponseDataset};

/// Task objective `L_θ(M; D) = J̃^{L*}(M) + γ Q_θ(M; D)`.
pub fn task_loss(m: &ResponseParam, dataset: &ResponseDataset, task: Task<'_>, gamma: f64) -> Result<f64> {
    let guidance = expected_cost(task.spec, task.follower, m)?;
    if gamma == 0.0 {
        return Ok(guidance);
    }
    Ok(guidance + gamma * fit_cost(m, dataset, task)?)
}

/// Gradient of [`task_loss`] with respect to `M`.
pub fn task_loss_gradient(m: &ResponseParam, dataset: &ResponseDataset, task: Task<'_>, gamma: f64) -> Result<Mat> {
    let guidance = d_expected_cost(task.spec, task.follower, m)?;
    if gamma == 0.0 {
        return Ok(guidance);
    }
    Ok(guidance + fit_cost_gradient(m, dataset, task)? * gamma)
}
