//! Finite-difference checks of every analytic derivative, evaluated on a
//! concrete scenario.

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::io::{label, RngStreams};
use crate::linalg::Mat;
use crate::lqg::{closed_loop_matrices, expected_cost, model_solution, true_response_matrix, ResponseParam, Task};
use crate::matdiff::{d_closed_loop, d_expected_cost, d_identity, d_inverse, d_riccati, fd_gradient, fd_jacobian, Tensor4};
use crate::meta::{fit_cost, fit_cost_gradient, sample_dataset, task_loss, task_loss_gradient, TrainConfig};

/// Relative tolerance of every check.
pub const GRADIENT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientCheck {
    pub name: &'static str,
    pub type_id: usize,
    pub relative_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// `‖a - b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn relative_difference(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn tensor_error(a: &Tensor4, b: &Tensor4) -> f64 {
    relative_difference(a.as_slice(), b.as_slice())
}

fn matrix_error(a: &Mat, b: &Mat) -> f64 {
    relative_difference(a.as_slice(), b.as_slice())
}

/// Runs all derivative checks for one task at `m` with central step `h`.
pub fn check_task(task: Task<'_>, m: &ResponseParam, cfg: &TrainConfig, h: f64, seed: u64) -> Result<Vec<GradientCheck>> {
    let (spec, f) = (task.spec, task.follower);
    let param = |x: &Mat| ResponseParam::new(x.clone());
    let mut errors: Vec<(&'static str, f64)> = Vec::new();

    let (da, db) = d_closed_loop(spec, f)?;
    let fd_a = fd_jacobian(|x| Ok(closed_loop_matrices(spec, f, &param(x)?)?.0), m.matrix(), h)?;
    let fd_b = fd_jacobian(|x| Ok(closed_loop_matrices(spec, f, &param(x)?)?.1), m.matrix(), h)?;
    errors.push(("d_closed_loop_a", tensor_error(&da, &fd_a)));
    errors.push(("d_closed_loop_b", tensor_error(&db, &fd_b)));

    let sol = model_solution(spec, f, m)?;
    let (_, b_tilde) = closed_loop_matrices(spec, f, m)?;
    let p1 = &sol.p[1];
    let w = &spec.r_leader + b_tilde.transpose() * p1 * &b_tilde;
    let (r, _) = w.shape();
    let dinv = d_inverse(&w, &d_identity(r, r))?;
    let fd_inv = fd_jacobian(
        |x| x.clone().try_inverse().ok_or_else(|| crate::Error::Singular("probe of W".into())),
        &w,
        h * w.amax().max(1.0),
    )?;
    errors.push(("d_inverse", tensor_error(&dinv, &fd_inv)));

    let d = d_riccati(spec, f, m)?;
    let fd_p0 = fd_jacobian(|x| Ok(model_solution(spec, f, &param(x)?)?.p[0].clone()), m.matrix(), h)?;
    errors.push(("d_riccati_p0", tensor_error(&d.dp[0], &fd_p0)));

    let dj = d_expected_cost(spec, f, m)?;
    let fd_j = fd_gradient(|x: &Mat| expected_cost(spec, f, &param(x)?), m.matrix(), h)?;
    errors.push(("d_expected_cost", matrix_error(&dj, &fd_j)));

    let mut rng = RngStreams::new(seed).stream(&[label::CHECK, f.id as u64]);
    let data = sample_dataset(task, m, cfg, &mut rng)?;
    let dq = fit_cost_gradient(m, &data, task)?;
    let fd_q = fd_gradient(|x: &Mat| fit_cost(&param(x)?, &data, task), m.matrix(), h)?;
    errors.push(("fit_cost_gradient", matrix_error(&dq, &fd_q)));

    let dl = task_loss_gradient(m, &data, task, cfg.gamma)?;
    let fd_l = fd_gradient(|x: &Mat| task_loss(&param(x)?, &data, task, cfg.gamma), m.matrix(), h)?;
    errors.push(("task_loss_gradient", matrix_error(&dl, &fd_l)));

    Ok(errors
        .into_iter()
        .map(|(name, relative_error)| GradientCheck {
            name,
            type_id: f.id,
            relative_error,
            tolerance: GRADIENT_TOLERANCE,
            passed: relative_error <= GRADIENT_TOLERANCE,
        })
        .collect())
}

/// Checks every task at a seeded point near its true response matrix.
pub fn check_gradients(tasks: &[Task<'_>], cfg: &TrainConfig, h: f64) -> Result<Vec<GradientCheck>> {
    let mut out = Vec::new();
    for task in tasks {
        let m_true = true_response_matrix(task.spec, task.follower)?;
        let mut rng = RngStreams::new(cfg.seed).stream(&[label::CHECK, task.follower.id as u64, 1]);
        let m = ResponseParam::new(m_true.matrix().map(|v| v + rng.random_range(-0.1..=0.1)))?;
        out.extend(check_task(*task, &m, cfg, h, cfg.seed)?);
    }
    Ok(out)
}
