use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{label, RngStreams};
use crate::linalg::{psd_factor, Vector};
use crate::lqg::{model_solution, true_response_matrix, ResponseParam, Task, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Noise {
    On,
    Off,
}

/// Simulates the leader planning with model `M` against the true follower.
///
/// The leader plays `u^L_t = -K_t x_t` with gains from the Riccati solution
/// under `M`; the follower plays its exact myopic best response; the state
/// advances with the true dynamics plus `w_t ~ N(0, Σ)` when noise is on.
pub fn rollout(task: Task<'_>, m: &ResponseParam, noise: Noise, seed: u64) -> Result<Trajectory> {
    let mut rng = RngStreams::new(seed).stream(&[label::ROLLOUT]);
    rollout_with_rng(task, m, noise, &mut rng)
}

pub fn rollout_with_rng<R: Rng + ?Sized>(
    task: Task<'_>,
    m: &ResponseParam,
    noise: Noise,
    rng: &mut R,
) -> Result<Trajectory> {
    let spec = task.spec;
    let sol = model_solution(spec, task.follower, m)?;
    let m_true = true_response_matrix(spec, task.follower)?;
    let noise_factor = psd_factor(&spec.sigma);
    let n = spec.state_dim();

    let mut x = spec.x0.clone();
    let horizon = spec.horizon;
    let mut traj = Trajectory {
        states: Vec::with_capacity(horizon + 1),
        leader_controls: Vec::with_capacity(horizon),
        follower_controls: Vec::with_capacity(horizon),
        noise: Vec::with_capacity(horizon),
        realized_cost: 0.0,
    };
    let mut cost = 0.0;
    for gain in &sol.k {
        let u_l = -(gain * &x);
        let u_f = m_true.apply(spec, &x, &u_l);
        let w = match noise {
            Noise::On => {
                let xi = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                &noise_factor * xi
            }
            Noise::Off => Vector::zeros(n),
        };
        cost += spec.stage_cost(&x, &u_l);
        let next = &spec.a * &x + &spec.b_leader * &u_l + &task.follower.b_follower * &u_f + &w;
        traj.states.push(std::mem::replace(&mut x, next));
        traj.leader_controls.push(u_l);
        traj.follower_controls.push(u_f);
        traj.noise.push(w);
    }
    cost += spec.terminal_cost(&x);
    traj.states.push(x);
    if !cost.is_finite() {
        return Err(Error::NonFinite("realized rollout cost".into()));
    }
    traj.realized_cost = cost;
    Ok(traj)
}

/// Independent noisy rollouts with per-run streams derived from `seed`.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub trajectories: Vec<Trajectory>,
    pub costs: Vec<f64>,
    pub mean_cost: f64,
    /// Unbiased sample variance; zero for a single run.
    pub cost_variance: f64,
    pub seed: u64,
}

impl SimResult {
    pub fn runs(&self) -> usize {
        self.costs.len()
    }

    pub fn standard_error(&self) -> f64 {
        (self.cost_variance / self.runs() as f64).sqrt()
    }
}

/// Sample mean and unbiased variance by Welford's update, which returns
/// exactly zero variance for identical costs.
pub fn mean_and_variance(costs: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (k, c) in costs.iter().enumerate() {
        let delta = c - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (c - mean);
    }
    let var = if costs.len() > 1 { m2 / (costs.len() - 1) as f64 } else { 0.0 };
    (mean, var)
}

pub fn monte_carlo_cost(task: Task<'_>, m: &ResponseParam, runs: usize, seed: u64) -> Result<SimResult> {
    if runs == 0 {
        return Err(Error::param("runs", "must be at least 1"));
    }
    let streams = RngStreams::new(seed);
    let trajectories = (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.stream(&[label::ROLLOUT, i as u64]);
            rollout_with_rng(task, m, Noise::On, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let costs: Vec<f64> = trajectories.iter().map(|t| t.realized_cost).collect();
    let (mean_cost, cost_variance) = mean_and_variance(&costs);
    Ok(SimResult { trajectories, costs, mean_cost, cost_variance, seed })
}
