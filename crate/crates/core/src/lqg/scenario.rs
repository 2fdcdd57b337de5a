//! Leader/follower robot-teaming scenario with planar double-integrator
//! agents.
//!
//! Joint state layout: `[p^L (2), v^L (2), p^F (2), v^F (2)]`; both agents
//! take 2D acceleration inputs. Each agent block is the exact zero-order-hold
//! discretization of `p̈ = u`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};

use super::{FollowerType, GameSpec};

pub const JOINT_STATE_DIM: usize = 8;
pub const AGENT_CONTROL_DIM: usize = 2;

const LEADER_POS: usize = 0;
const LEADER_VEL: usize = 2;
const FOLLOWER_POS: usize = 4;
const FOLLOWER_VEL: usize = 6;

/// Weights that assemble the leader's quadratic costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderWeights {
    /// Penalty on both agents' absolute positions.
    pub position: f64,
    /// Penalty on the leader-follower position gap.
    pub relative: f64,
    /// Penalty on both agents' velocities.
    pub velocity: f64,
    /// `R_L = control * I`.
    pub control: f64,
    /// `Q_Lf = terminal_scale * Q_L`.
    pub terminal_scale: f64,
}

impl Default for LeaderWeights {
    fn default() -> Self {
        Self {
            position: 0.02,
            relative: 0.02,
            velocity: 0.0,
            control: 0.02,
            terminal_scale: 1.0,
        }
    }
}

/// Weights that assemble one follower type's costs and input matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FollowerWeights {
    /// Scales the follower's double-integrator input block.
    pub input_gain: f64,
    pub position: f64,
    pub relative: f64,
    pub velocity: f64,
    /// `R_F = control * I`.
    pub control: f64,
}

impl FollowerWeights {
    /// The five default follower types.
    pub fn robot_teaming_types() -> Vec<Self> {
        const CONTROL: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];
        const GAIN: [f64; 5] = [1.0, 0.8, 1.2, 0.6, 1.5];
        CONTROL
            .iter()
            .zip(GAIN)
            .map(|(&control, input_gain)| Self {
                input_gain,
                position: 1.0,
                relative: 4.0,
                velocity: 1.0,
                control,
            })
            .collect()
    }
}

/// Cost matrices of one follower type.
#[derive(Debug, Clone, PartialEq)]
pub struct FollowerCost {
    pub input_gain: f64,
    pub q_follower: Mat,
    pub r_follower: Mat,
}

/// Everything `build_double_integrator_spec` needs besides `dt` and the
/// start positions.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleIntegratorCosts {
    pub q_leader: Mat,
    pub r_leader: Mat,
    pub q_terminal: Mat,
    pub sigma: Mat,
    pub horizon: usize,
    pub followers: Vec<FollowerCost>,
}

fn selector(offset: usize) -> Mat {
    let mut s = Mat::zeros(AGENT_CONTROL_DIM, JOINT_STATE_DIM);
    for axis in 0..AGENT_CONTROL_DIM {
        s[(axis, offset + axis)] = 1.0;
    }
    s
}

fn gram(s: &Mat) -> Mat {
    s.transpose() * s
}

/// `position * (S_Lᵀ S_L + S_Fᵀ S_F) + relative * (S_L - S_F)ᵀ (S_L - S_F)
///  + velocity * (V_Lᵀ V_L + V_Fᵀ V_F)`
fn leader_state_cost(w: &LeaderWeights) -> Mat {
    let (sl, sf) = (selector(LEADER_POS), selector(FOLLOWER_POS));
    let (vl, vf) = (selector(LEADER_VEL), selector(FOLLOWER_VEL));
    (gram(&sl) + gram(&sf)) * w.position
        + gram(&(&sl - &sf)) * w.relative
        + (gram(&vl) + gram(&vf)) * w.velocity
}

fn follower_state_cost(w: &FollowerWeights) -> Mat {
    let (sl, sf) = (selector(LEADER_POS), selector(FOLLOWER_POS));
    gram(&sf) * w.position + gram(&(&sl - &sf)) * w.relative + gram(&selector(FOLLOWER_VEL)) * w.velocity
}

impl DoubleIntegratorCosts {
    pub fn from_weights(
        leader: &LeaderWeights,
        followers: &[FollowerWeights],
        noise_scale: f64,
        horizon: usize,
    ) -> Self {
        let q_leader = leader_state_cost(leader);
        Self {
            q_terminal: &q_leader * leader.terminal_scale,
            q_leader,
            r_leader: Mat::identity(AGENT_CONTROL_DIM, AGENT_CONTROL_DIM) * leader.control,
            sigma: Mat::identity(JOINT_STATE_DIM, JOINT_STATE_DIM) * noise_scale,
            horizon,
            followers: followers
                .iter()
                .map(|f| FollowerCost {
                    input_gain: f.input_gain,
                    q_follower: follower_state_cost(f),
                    r_follower: Mat::identity(AGENT_CONTROL_DIM, AGENT_CONTROL_DIM) * f.control,
                })
                .collect(),
        }
    }

    /// Default robot-teaming costs: `T = 10`, `Σ = 0.5 I`, five follower types.
    pub fn robot_teaming() -> Self {
        Self::from_weights(
            &LeaderWeights::default(),
            &FollowerWeights::robot_teaming_types(),
            0.5,
            10,
        )
    }
}

/// Zero-order-hold discretization of one planar double integrator with
/// state `[p (2), v (2)]`.
fn agent_blocks(dt: f64) -> (Mat, Mat) {
    let mut a = Mat::identity(4, 4);
    let mut b = Mat::zeros(4, AGENT_CONTROL_DIM);
    for axis in 0..AGENT_CONTROL_DIM {
        a[(axis, 2 + axis)] = dt;
        b[(axis, axis)] = 0.5 * dt * dt;
        b[(2 + axis, axis)] = dt;
    }
    (a, b)
}

/// Builds the joint leader/follower game and the follower types.
pub fn build_double_integrator_spec(
    dt: f64,
    leader_start: [f64; 2],
    follower_start: [f64; 2],
    costs: &DoubleIntegratorCosts,
) -> Result<(GameSpec, Vec<FollowerType>)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("must be positive and finite, got {dt}")));
    }
    let (agent_a, agent_b) = agent_blocks(dt);
    let mut a = Mat::zeros(JOINT_STATE_DIM, JOINT_STATE_DIM);
    a.view_mut((0, 0), (4, 4)).copy_from(&agent_a);
    a.view_mut((4, 4), (4, 4)).copy_from(&agent_a);
    let mut b_leader = Mat::zeros(JOINT_STATE_DIM, AGENT_CONTROL_DIM);
    b_leader.view_mut((0, 0), (4, 2)).copy_from(&agent_b);

    let mut x0 = Vector::zeros(JOINT_STATE_DIM);
    x0[LEADER_POS] = leader_start[0];
    x0[LEADER_POS + 1] = leader_start[1];
    x0[FOLLOWER_POS] = follower_start[0];
    x0[FOLLOWER_POS + 1] = follower_start[1];

    let spec = GameSpec::new(
        a,
        b_leader,
        costs.sigma.clone(),
        costs.q_leader.clone(),
        costs.r_leader.clone(),
        costs.q_terminal.clone(),
        costs.horizon,
        x0,
    )?;
    let followers = costs
        .followers
        .iter()
        .enumerate()
        .map(|(id, fc)| {
            let mut b_follower = Mat::zeros(JOINT_STATE_DIM, AGENT_CONTROL_DIM);
            b_follower
                .view_mut((4, 0), (4, 2))
                .copy_from(&(&agent_b * fc.input_gain));
            FollowerType::new(id, b_follower, fc.q_follower.clone(), fc.r_follower.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((spec, followers))
}
