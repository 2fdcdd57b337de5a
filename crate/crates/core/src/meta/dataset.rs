use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::lqg::{closed_loop_matrices, model_solution, true_response_matrix, ResponseParam, RiccatiSolution, Task};

use super::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSource {
    Random,
    NearTrajectory,
}

/// One observation `(x̂, û^L, û^F)` of the follower's true response.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSample {
    pub x: Vector,
    pub u_leader: Vector,
    pub u_follower: Vector,
    pub source: SampleSource,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResponseDataset {
    pub samples: Vec<ResponseSample>,
}

impl ResponseDataset {
    pub fn new(samples: Vec<ResponseSample>) -> Self {
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count(&self, source: SampleSource) -> usize {
        self.samples.iter().filter(|s| s.source == source).count()
    }
}

/// `(N1, N2)` with `N1 = round(N / (1 + κ))` uniform samples and
/// `N2 = N - N1` near-trajectory samples.
pub fn split_counts(samples: usize, kappa: f64) -> Result<(usize, usize)> {
    if samples == 0 {
        return Err(Error::param("samples", "must be at least 1"));
    }
    if kappa > 0.0 && samples < 2 {
        return Err(Error::param("samples", "need at least 2 samples when kappa > 0"));
    }
    let n1 = ((samples as f64 / (1.0 + kappa)).round() as usize).min(samples);
    Ok((n1, samples - n1))
}

/// Noise-free trajectory the leader plans under model `M`:
/// `x_{t+1} = Ã x_t + B̃ u_t`, `u_t = -K_t x_t`.
pub(crate) fn planned_trajectory(task: Task<'_>, m: &ResponseParam, sol: &RiccatiSolution) -> Result<(Vec<Vector>, Vec<Vector>)> {
    let (a_t, b_t) = closed_loop_matrices(task.spec, task.follower, m)?;
    let mut x = task.spec.x0.clone();
    let mut states = Vec::with_capacity(sol.k.len());
    let mut controls = Vec::with_capacity(sol.k.len());
    for k in &sol.k {
        let u = -(k * &x);
        let next = &a_t * &x + &b_t * &u;
        states.push(std::mem::replace(&mut x, next));
        controls.push(u);
    }
    Ok((states, controls))
}

fn uniform_vector<R: Rng + ?Sized>(rng: &mut R, len: usize, range: [f64; 2]) -> Vector {
    Vector::from_fn(len, |_, _| rng.random_range(range[0]..range[1]))
}

fn perturb<R: Rng + ?Sized>(rng: &mut R, v: &Vector, scale: f64) -> Vector {
    v.map(|x| {
        let z: f64 = rng.sample(StandardNormal);
        x + scale * z
    })
}

/// Draws a response dataset for `task`, labeled with the true follower
/// response.
///
/// `N1` points are uniform over the sampling box. The remaining `N2` are
/// Gaussian perturbations of uniformly chosen points of the trajectory the
/// leader plans under `M`.
pub fn sample_dataset<R: Rng + ?Sized>(
    task: Task<'_>,
    m: &ResponseParam,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<ResponseDataset> {
    let (n1, n2) = split_counts(cfg.samples, cfg.kappa)?;
    let sol = if n2 > 0 { Some(model_solution(task.spec, task.follower, m)?) } else { None };
    sample_with_solution(task, m, sol.as_ref(), cfg, rng, n1, n2)
}

pub(crate) fn sample_with_solution<R: Rng + ?Sized>(
    task: Task<'_>,
    m: &ResponseParam,
    sol: Option<&RiccatiSolution>,
    cfg: &TrainConfig,
    rng: &mut R,
    n1: usize,
    n2: usize,
) -> Result<ResponseDataset> {
    let spec = task.spec;
    let m_true = true_response_matrix(spec, task.follower)?;
    let label = |x: Vector, u: Vector, source| {
        let u_follower = m_true.apply(spec, &x, &u);
        ResponseSample { x, u_leader: u, u_follower, source }
    };

    let mut samples = Vec::with_capacity(n1 + n2);
    for _ in 0..n1 {
        let x = uniform_vector(rng, spec.state_dim(), cfg.state_range);
        let u = uniform_vector(rng, spec.leader_dim(), cfg.control_range);
        samples.push(label(x, u, SampleSource::Random));
    }
    if n2 > 0 {
        let sol = sol.ok_or_else(|| Error::param("sample_dataset", "near-trajectory samples need a Riccati solution"))?;
        let (states, controls) = planned_trajectory(task, m, sol)?;
        for _ in 0..n2 {
            let t = rng.random_range(0..states.len());
            let x = perturb(rng, &states[t], cfg.sigma_nbhd);
            let u = perturb(rng, &controls[t], cfg.sigma_nbhd);
            samples.push(label(x, u, SampleSource::NearTrajectory));
        }
    }
    Ok(ResponseDataset::new(samples))
}

/// `(1/N) Σ ‖M (A x̂_i + B_L û^L_i) - û^F_i‖²`.
pub fn fit_cost(m: &ResponseParam, dataset: &ResponseDataset, task: Task<'_>) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::param("dataset", "fit cost needs at least one sample"));
    }
    let total: f64 = dataset
        .samples
        .iter()
        .map(|s| (m.apply(task.spec, &s.x, &s.u_leader) - &s.u_follower).norm_squared())
        .sum();
    Ok(total / dataset.len() as f64)
}

/// `(2/N) Σ (M z_i - û^F_i) z_iᵀ` with `z_i = A x̂_i + B_L û^L_i`.
pub fn fit_cost_gradient(m: &ResponseParam, dataset: &ResponseDataset, task: Task<'_>) -> Result<Mat> {
    if dataset.is_empty() {
        return Err(Error::param("dataset", "fit cost needs at least one sample"));
    }
    let (rows, cols) = m.shape();
    let mut grad = Mat::zeros(rows, cols);
    for s in &dataset.samples {
        let z = task.spec.response_input(&s.x, &s.u_leader);
        let resid = m.matrix() * &z - &s.u_follower;
        grad.ger(2.0, &resid, &z, 1.0);
    }
    Ok(grad / dataset.len() as f64)
}
