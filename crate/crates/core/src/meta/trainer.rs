use std::time::Instant;

use rand::Rng;
use rand_distr::{weighted::WeightedIndex, Distribution};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{label, RngStreams};
use crate::linalg::{quad_form, Mat};
use crate::lqg::{ResponseParam, Task, TypeDistribution};
use crate::matdiff::{d_riccati, RiccatiDerivative};

use super::dataset::sample_with_solution;
use super::{fit_cost, fit_cost_gradient, sample_dataset, split_counts, ResponseDataset, TrainConfig};

/// Result of the regularized inner problem for one task.
#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub z: ResponseParam,
    /// Training set drawn in the final inner iteration.
    pub dataset: ResponseDataset,
    pub steps: usize,
}

/// Per-task quantities of one outer iteration.
#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub type_id: usize,
    pub z_star: ResponseParam,
    pub test_dataset: ResponseDataset,
    /// `L_θ(Z*; D_test)`.
    pub loss: f64,
    /// `J̃^{L*}(Z*)`.
    pub expected_cost: f64,
    /// `∂L_θ/∂M` evaluated at `Z*` on `D_test`.
    pub gradient: Mat,
    pub inner_steps: usize,
}

#[derive(Debug, Clone)]
pub struct OuterStep {
    pub next: ResponseParam,
    pub outcomes: Vec<TaskOutcome>,
    /// Batch mean of `L_θ(Z*; D_test)`.
    pub meta_cost: f64,
    pub mean_expected_cost: f64,
    /// Frobenius norm of the averaged meta-gradient.
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub meta_cost: f64,
    pub mean_expected_cost: f64,
    pub grad_norm: f64,
    pub wall_time_secs: f64,
}

/// One record per completed outer iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetaTrace {
    pub records: Vec<TraceRecord>,
}

impl MetaTrace {
    pub fn initial_meta_cost(&self) -> Option<f64> {
        self.records.first().map(|r| r.meta_cost)
    }

    pub fn final_meta_cost(&self) -> Option<f64> {
        self.records.last().map(|r| r.meta_cost)
    }
}

/// Guidance cost and its gradient from a differentiated Riccati solution.
fn guidance_terms(task: Task<'_>, d: &RiccatiDerivative) -> (f64, Mat) {
    let x0 = &task.spec.x0;
    let cost = quad_form(&d.solution.p[0], x0) + d.solution.res[0];
    let grad = d.dp[0].quadratic_form(x0) + &d.dres[0];
    (cost, grad)
}

fn check_divergence(z: &Mat, cfg: &TrainConfig, context: &str) -> Result<()> {
    let norm = z.norm();
    if !norm.is_finite() || norm > cfg.divergence_bound {
        return Err(Error::Divergence(format!(
            "{context}: ‖Z‖_F = {norm:e} exceeds {:e}; reduce the step size",
            cfg.divergence_bound
        )));
    }
    Ok(())
}

/// Approximately solves `min_Z L_θ(Z; D_train) + λ‖Z - M_k‖²_F` by fixed-step
/// gradient descent, drawing a fresh `D_train` around the current `Z` at
/// every step. Runs at most `max_gd` steps and stops once `‖g‖_F < eps`.
pub fn inner_solve<R: Rng + ?Sized>(
    m_k: &ResponseParam,
    task: Task<'_>,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<InnerSolution> {
    let (n1, n2) = split_counts(cfg.samples, cfg.kappa)?;
    let mut z = m_k.clone();
    let mut dataset = None;
    let mut steps = 0;
    while steps < cfg.max_gd {
        let d = d_riccati(task.spec, task.follower, &z)?;
        let train = sample_with_solution(task, &z, Some(&d.solution), cfg, rng, n1, n2)?;
        let (_, mut g) = guidance_terms(task, &d);
        if cfg.gamma != 0.0 {
            g += fit_cost_gradient(&z, &train, task)? * cfg.gamma;
        }
        g += (z.matrix() - m_k.matrix()) * (2.0 * cfg.lambda);
        let next = z.matrix() - &g * cfg.alpha;
        check_divergence(&next, cfg, "inner solve")?;
        z = ResponseParam::new(next)?;
        dataset = Some(train);
        steps += 1;
        if g.norm() < cfg.eps {
            break;
        }
    }
    let dataset = match dataset {
        Some(d) => d,
        None => sample_dataset(task, &z, cfg, rng)?,
    };
    Ok(InnerSolution { z, dataset, steps })
}

fn evaluate_task(
    m_k: &ResponseParam,
    task: Task<'_>,
    cfg: &TrainConfig,
    streams: &RngStreams,
    iteration: usize,
    slot: usize,
) -> Result<TaskOutcome> {
    let (it, sl) = (iteration as u64, slot as u64);
    let mut inner_rng = streams.stream(&[label::INNER, it, sl]);
    let inner = inner_solve(m_k, task, cfg, &mut inner_rng)?;

    let (n1, n2) = split_counts(cfg.samples, cfg.kappa)?;
    let d = d_riccati(task.spec, task.follower, &inner.z)?;
    let mut test_rng = streams.stream(&[label::TEST, it, sl]);
    let test = sample_with_solution(task, &inner.z, Some(&d.solution), cfg, &mut test_rng, n1, n2)?;
    let (expected_cost, mut gradient) = guidance_terms(task, &d);
    let mut loss = expected_cost;
    if cfg.gamma != 0.0 {
        loss += cfg.gamma * fit_cost(&inner.z, &test, task)?;
        gradient += fit_cost_gradient(&inner.z, &test, task)? * cfg.gamma;
    }
    Ok(TaskOutcome {
        type_id: task.follower.id,
        z_star: inner.z,
        test_dataset: test,
        loss,
        expected_cost,
        gradient,
        inner_steps: inner.steps,
    })
}

/// One meta-update `M_{k+1} = M_k - β/|batch| Σ ∂L_θ(Z*_θ; D_test)/∂M`.
///
/// The task gradient is taken at `Z*_θ` without differentiating through the
/// inner solve (first-order). Tasks run in parallel on their own RNG
/// streams and are reduced in batch order.
pub fn outer_step(
    m_k: &ResponseParam,
    batch: &[Task<'_>],
    cfg: &TrainConfig,
    streams: &RngStreams,
    iteration: usize,
) -> Result<OuterStep> {
    if batch.is_empty() {
        return Err(Error::param("batch", "must contain at least one task"));
    }
    let outcomes = batch
        .par_iter()
        .enumerate()
        .map(|(slot, task)| evaluate_task(m_k, *task, cfg, streams, iteration, slot))
        .collect::<Result<Vec<_>>>()?;

    let count = outcomes.len() as f64;
    let (rows, cols) = m_k.shape();
    let mut grad = Mat::zeros(rows, cols);
    let mut meta_cost = 0.0;
    let mut expected = 0.0;
    for o in &outcomes {
        grad += &o.gradient;
        meta_cost += o.loss;
        expected += o.expected_cost;
    }
    grad /= count;
    let next = ResponseParam::new(m_k.matrix() - &grad * cfg.beta)?;
    Ok(OuterStep {
        next,
        meta_cost: meta_cost / count,
        mean_expected_cost: expected / count,
        grad_norm: grad.norm(),
        outcomes,
    })
}

/// `M_0` with entries uniform in `[-init_scale, init_scale]`.
pub fn initial_model(rows: usize, cols: usize, cfg: &TrainConfig) -> ResponseParam {
    let mut rng = RngStreams::new(cfg.seed).stream(&[label::INIT]);
    let s = cfg.init_scale;
    let m = Mat::from_fn(rows, cols, |_, _| if s > 0.0 { rng.random_range(-s..=s) } else { 0.0 });
    ResponseParam::new(m).expect("finite initial model")
}

/// Draws `batch_size` type indices i.i.d. from `dist`.
pub fn sample_batch(dist: &TypeDistribution, cfg: &TrainConfig, iteration: usize) -> Result<Vec<usize>> {
    let index = WeightedIndex::new(dist.probs())
        .map_err(|e| Error::param("type distribution", e.to_string()))?;
    let mut rng = RngStreams::new(cfg.seed).stream(&[label::BATCH, iteration as u64]);
    Ok((0..cfg.batch_size).map(|_| index.sample(&mut rng)).collect())
}

#[derive(Debug, Clone)]
pub struct MetaTraining {
    pub initial: ResponseParam,
    pub model: ResponseParam,
    pub trace: MetaTrace,
}

/// Stackelberg meta-learning: `max_iter` outer steps from the seeded `M_0`.
///
/// `tasks[i]` must be the task of type `i` in `dist`.
pub fn train_meta(tasks: &[Task<'_>], dist: &TypeDistribution, cfg: &TrainConfig) -> Result<MetaTraining> {
    let (rows, cols) = tasks
        .first()
        .ok_or_else(|| Error::param("tasks", "need at least one task"))?
        .response_shape();
    let m0 = initial_model(rows, cols, cfg);
    train_meta_from(m0, tasks, dist, cfg)
}

pub fn train_meta_from(
    m0: ResponseParam,
    tasks: &[Task<'_>],
    dist: &TypeDistribution,
    cfg: &TrainConfig,
) -> Result<MetaTraining> {
    cfg.validate()?;
    if tasks.len() != dist.len() {
        return Err(Error::dim("tasks vs type distribution", dist.len(), tasks.len()));
    }
    let streams = RngStreams::new(cfg.seed);
    let start = Instant::now();
    let mut m = m0.clone();
    let mut trace = MetaTrace::default();
    for k in 0..cfg.max_iter {
        let batch: Vec<Task<'_>> = sample_batch(dist, cfg, k)?.into_iter().map(|i| tasks[i]).collect();
        let step = outer_step(&m, &batch, cfg, &streams, k)?;
        if !step.meta_cost.is_finite() {
            return Err(Error::NonFinite(format!(
                "meta-cost at iteration {k} is {}; last grad norm {:e}",
                step.meta_cost, step.grad_norm
            )));
        }
        trace.records.push(TraceRecord {
            iteration: k,
            meta_cost: step.meta_cost,
            mean_expected_cost: step.mean_expected_cost,
            grad_norm: step.grad_norm,
            wall_time_secs: start.elapsed().as_secs_f64(),
        });
        log::debug!("meta iteration {k}: cost {:.6} grad {:.3e}", step.meta_cost, step.grad_norm);
        m = step.next;
    }
    Ok(MetaTraining { initial: m0, model: m, trace })
}

/// Minimizes `L_θ(M; D') + η‖M - M_base‖²_F` from `M_base` on a fixed
/// dataset `D'` drawn with `M_base`'s planned trajectory.
pub fn adapt<R: Rng + ?Sized>(
    m_base: &ResponseParam,
    task: Task<'_>,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<ResponseParam> {
    let dataset = sample_dataset(task, m_base, cfg, rng)?;
    adapt_on(m_base, task, &dataset, cfg)
}

pub fn adapt_on(
    m_base: &ResponseParam,
    task: Task<'_>,
    dataset: &ResponseDataset,
    cfg: &TrainConfig,
) -> Result<ResponseParam> {
    let mut m = m_base.clone();
    for _ in 0..cfg.max_gd {
        let g = adaptation_gradient(&m, m_base, task, dataset, cfg)?;
        let next = m.matrix() - &g * cfg.alpha;
        check_divergence(&next, cfg, "adaptation")?;
        m = ResponseParam::new(next)?;
        if g.norm() < cfg.eps {
            break;
        }
    }
    Ok(m)
}

/// Value of the adaptation objective `L_θ(M; D') + η‖M - M_base‖²_F`.
pub fn adaptation_objective(
    m: &ResponseParam,
    m_base: &ResponseParam,
    task: Task<'_>,
    dataset: &ResponseDataset,
    cfg: &TrainConfig,
) -> Result<f64> {
    let loss = super::task_loss(m, dataset, task, cfg.gamma)?;
    Ok(loss + cfg.eta * (m.matrix() - m_base.matrix()).norm_squared())
}

pub fn adaptation_gradient(
    m: &ResponseParam,
    m_base: &ResponseParam,
    task: Task<'_>,
    dataset: &ResponseDataset,
    cfg: &TrainConfig,
) -> Result<Mat> {
    let g = super::task_loss_gradient(m, dataset, task, cfg.gamma)?;
    Ok(g + (m.matrix() - m_base.matrix()) * (2.0 * cfg.eta))
}

/// Single-task training without meta-learning: `steps` plain gradient steps
/// on `L_θ` from the seeded `M_0`, with a fresh dataset at every step.
pub fn train_individual(task: Task<'_>, cfg: &TrainConfig, steps: usize) -> Result<ResponseParam> {
    cfg.validate()?;
    let (rows, cols) = task.response_shape();
    let (n1, n2) = split_counts(cfg.samples, cfg.kappa)?;
    let streams = RngStreams::new(cfg.seed);
    let mut z = initial_model(rows, cols, cfg);
    for step in 0..steps {
        let mut rng = streams.stream(&[label::INDIVIDUAL, task.follower.id as u64, step as u64]);
        let d = d_riccati(task.spec, task.follower, &z)?;
        let (_, mut g) = guidance_terms(task, &d);
        if cfg.gamma != 0.0 {
            let data = sample_with_solution(task, &z, Some(&d.solution), cfg, &mut rng, n1, n2)?;
            g += fit_cost_gradient(&z, &data, task)? * cfg.gamma;
        }
        let next = z.matrix() - &g * cfg.alpha;
        check_divergence(&next, cfg, "individual training")?;
        z = ResponseParam::new(next)?;
    }
    Ok(z)
}
