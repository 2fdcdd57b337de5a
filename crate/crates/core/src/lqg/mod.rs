//! Game data model, the myopic follower's best response and the parametric
//! LQG solver.
//!
//! A follower of type `θ` minimizes the one-step cost
//! `E[x_{t+1}^T Q_F x_{t+1} + u^T R_F u]`, which yields the linear response
//! `u^F = M_true (A x + B_L u^L)`. The leader replaces `M_true` by a
//! parameter `M` and solves the resulting single-agent LQG problem with
//! closed-loop matrices `Ã = A + B_F M A` and `B̃ = B_L + B_F M B_L`.

mod riccati;
mod scenario;
mod types;

pub use riccati::{accumulate_residues, expected_cost, model_solution, solve_riccati};
pub use scenario::{
    build_double_integrator_spec, DoubleIntegratorCosts, FollowerCost, LeaderWeights,
    FollowerWeights, JOINT_STATE_DIM, AGENT_CONTROL_DIM,
};
pub use types::{
    FollowerType, GameSpec, ResponseParam, RiccatiSolution, Task, Trajectory, TypeDistribution,
};

use crate::error::{Error, Result};
use crate::linalg::{check_len, check_shape, spd_solve, Mat, Vector};

/// `M_true = -(B_F^T Q_F B_F + R_F)^{-1} B_F^T Q_F`.
pub fn true_response_matrix(spec: &GameSpec, ftype: &FollowerType) -> Result<ResponseParam> {
    check_shape("B_F", &ftype.b_follower, spec.state_dim(), ftype.control_dim())?;
    let bt_q = ftype.b_follower.transpose() * &ftype.q_follower;
    let inner = &bt_q * &ftype.b_follower + &ftype.r_follower;
    let m = spd_solve("follower response (B_F^T Q_F B_F + R_F)", &inner, &bt_q)
        .map_err(|_| Error::Singular(format!("B_F^T Q_F B_F + R_F for follower type {}", ftype.id)))?;
    ResponseParam::new(-m)
}

/// Follower's myopic best response to the observed state and leader control.
pub fn follower_best_response(
    spec: &GameSpec,
    ftype: &FollowerType,
    x: &Vector,
    u_leader: &Vector,
) -> Result<Vector> {
    check_len("state x", x, spec.state_dim())?;
    check_len("leader control", u_leader, spec.leader_dim())?;
    let m_true = true_response_matrix(spec, ftype)?;
    Ok(m_true.apply(spec, x, u_leader))
}

/// Closed-loop matrices `(Ã, B̃)` of the leader's model under response `M`.
pub fn closed_loop_matrices(
    spec: &GameSpec,
    ftype: &FollowerType,
    m: &ResponseParam,
) -> Result<(Mat, Mat)> {
    check_shape("M", m.matrix(), ftype.control_dim(), spec.state_dim())?;
    check_shape("B_F", &ftype.b_follower, spec.state_dim(), ftype.control_dim())?;
    let bf_m = &ftype.b_follower * m.matrix();
    let a_tilde = &spec.a + &bf_m * &spec.a;
    let b_tilde = &spec.b_leader + &bf_m * &spec.b_leader;
    Ok((a_tilde, b_tilde))
}
