use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    check_finite, check_len, check_pd, check_psd, check_shape, quad_form, Mat, Vector,
};

/// System matrices, leader costs, noise covariance and horizon of one
/// guided-cooperation game. Follower data lives in [`FollowerType`].
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    pub a: Mat,
    pub b_leader: Mat,
    pub sigma: Mat,
    pub q_leader: Mat,
    pub r_leader: Mat,
    pub q_terminal: Mat,
    pub horizon: usize,
    pub x0: Vector,
}

impl GameSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: Mat,
        b_leader: Mat,
        sigma: Mat,
        q_leader: Mat,
        r_leader: Mat,
        q_terminal: Mat,
        horizon: usize,
        x0: Vector,
    ) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::param("A", "state dimension must be positive"));
        }
        let r = b_leader.ncols();
        if r == 0 {
            return Err(Error::param("B_L", "leader control dimension must be positive"));
        }
        check_shape("A", &a, n, n)?;
        check_shape("B_L", &b_leader, n, r)?;
        check_shape("Sigma", &sigma, n, n)?;
        check_shape("Q_L", &q_leader, n, n)?;
        check_shape("R_L", &r_leader, r, r)?;
        check_shape("Q_Lf", &q_terminal, n, n)?;
        check_len("x0", &x0, n)?;
        for (name, m) in [("A", &a), ("B_L", &b_leader)] {
            check_finite(name, m)?;
        }
        check_psd("Sigma", &sigma)?;
        check_psd("Q_L", &q_leader)?;
        check_psd("Q_Lf", &q_terminal)?;
        check_pd("R_L", &r_leader)?;
        if horizon == 0 {
            return Err(Error::param("T", "horizon must be at least 1"));
        }
        if !x0.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("x0".into()));
        }
        Ok(Self {
            a,
            b_leader,
            sigma,
            q_leader,
            r_leader,
            q_terminal,
            horizon,
            x0,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn leader_dim(&self) -> usize {
        self.b_leader.ncols()
    }

    /// `A x + B_L u^L`, the input of every linear response model.
    pub fn response_input(&self, x: &Vector, u_leader: &Vector) -> Vector {
        &self.a * x + &self.b_leader * u_leader
    }

    pub fn stage_cost(&self, x: &Vector, u_leader: &Vector) -> f64 {
        quad_form(&self.q_leader, x) + quad_form(&self.r_leader, u_leader)
    }

    pub fn terminal_cost(&self, x: &Vector) -> f64 {
        quad_form(&self.q_terminal, x)
    }

    pub fn with_x0(&self, x0: Vector) -> Result<Self> {
        check_len("x0", &x0, self.state_dim())?;
        Ok(Self { x0, ..self.clone() })
    }

    pub fn with_sigma(&self, sigma: Mat) -> Result<Self> {
        check_shape("Sigma", &sigma, self.state_dim(), self.state_dim())?;
        check_psd("Sigma", &sigma)?;
        Ok(Self { sigma, ..self.clone() })
    }
}

/// Type-specific follower parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FollowerType {
    pub id: usize,
    pub b_follower: Mat,
    pub q_follower: Mat,
    pub r_follower: Mat,
}

impl FollowerType {
    pub fn new(id: usize, b_follower: Mat, q_follower: Mat, r_follower: Mat) -> Result<Self> {
        let n = b_follower.nrows();
        let r = b_follower.ncols();
        if n == 0 || r == 0 {
            return Err(Error::param("B_F", "dimensions must be positive"));
        }
        check_finite("B_F", &b_follower)?;
        check_shape("Q_F", &q_follower, n, n)?;
        check_shape("R_F", &r_follower, r, r)?;
        check_psd("Q_F", &q_follower)?;
        check_pd("R_F", &r_follower)?;
        Ok(Self {
            id,
            b_follower,
            q_follower,
            r_follower,
        })
    }

    pub fn control_dim(&self) -> usize {
        self.b_follower.ncols()
    }

    pub(crate) fn check_compatible(&self, spec: &GameSpec) -> Result<()> {
        check_shape("B_F", &self.b_follower, spec.state_dim(), self.control_dim())
    }
}

/// A game paired with one follower type.
#[derive(Debug, Clone, Copy)]
pub struct Task<'a> {
    pub spec: &'a GameSpec,
    pub follower: &'a FollowerType,
}

impl<'a> Task<'a> {
    pub fn new(spec: &'a GameSpec, follower: &'a FollowerType) -> Self {
        Self { spec, follower }
    }

    pub fn response_shape(&self) -> (usize, usize) {
        (self.follower.control_dim(), self.spec.state_dim())
    }
}

/// Prior probabilities over follower types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeDistribution {
    probs: Vec<f64>,
}

impl TypeDistribution {
    pub const SUM_TOL: f64 = 1e-12;

    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::param("type distribution", "must not be empty"));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::param(
                "type distribution",
                "probabilities must lie in [0, 1]",
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOL {
            return Err(Error::param(
                "type distribution",
                format!("probabilities must sum to 1 (sum is {sum})"),
            ));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// The `r_F x n` matrix `M` of the linear response model
/// `r(x, u^L; M) = M (A x + B_L u^L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseParam(Mat);

impl ResponseParam {
    pub fn new(m: Mat) -> Result<Self> {
        check_finite("M", &m)?;
        Ok(Self(m))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(Mat::zeros(rows, cols))
    }

    pub fn with_shape(m: Mat, rows: usize, cols: usize) -> Result<Self> {
        check_shape("M", &m, rows, cols)?;
        Self::new(m)
    }

    pub fn matrix(&self) -> &Mat {
        &self.0
    }

    pub fn into_matrix(self) -> Mat {
        self.0
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn apply(&self, spec: &GameSpec, x: &Vector, u_leader: &Vector) -> Vector {
        &self.0 * spec.response_input(x, u_leader)
    }
}

/// Backward Riccati recursion output: `P_0..P_T`, gains `K_0..K_{T-1}` and
/// noise residues `res_0..res_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub p: Vec<Mat>,
    pub k: Vec<Mat>,
    pub res: Vec<f64>,
}

impl RiccatiSolution {
    pub fn horizon(&self) -> usize {
        self.k.len()
    }

    /// `x^T P_t x + res_t`.
    pub fn cost_to_go(&self, t: usize, x: &Vector) -> f64 {
        quad_form(&self.p[t], x) + self.res[t]
    }
}

/// One realized interaction: `x_0..x_T`, controls and noise for
/// `t = 0..T-1`, and the leader's realized cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vector>,
    pub leader_controls: Vec<Vector>,
    pub follower_controls: Vec<Vector>,
    pub noise: Vec<Vector>,
    pub realized_cost: f64,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.leader_controls.len()
    }

    /// Stage costs over `t = 0..T-1` plus the terminal cost at `x_T`.
    pub fn recompute_cost(&self, spec: &GameSpec) -> f64 {
        let stage: f64 = self
            .states
            .iter()
            .zip(&self.leader_controls)
            .map(|(x, u)| spec.stage_cost(x, u))
            .sum();
        stage + spec.terminal_cost(self.states.last().expect("trajectory has x_0"))
    }
}
