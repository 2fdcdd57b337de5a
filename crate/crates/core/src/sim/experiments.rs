use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{label, RngStreams};
use crate::lqg::{expected_cost, FollowerType, GameSpec, ResponseParam, Task, TypeDistribution};
use crate::meta::{adapt, train_individual, train_meta, TrainConfig};

use super::{monte_carlo_cost, SimResult};

/// Knobs of the experiment suites that are not training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSettings {
    /// Monte-Carlo rollouts per simulated cost.
    pub mc_runs: usize,
    /// Largest accepted relative excess of simulated over expected cost.
    pub sim_gap_threshold: f64,
    /// Follower type whose individual model seeds the transfer baseline.
    pub transfer_source: usize,
    /// Gradient steps of each individually trained model.
    pub individual_steps: usize,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            mc_runs: 100,
            sim_gap_threshold: 0.5,
            transfer_source: 4,
            individual_steps: 5000,
        }
    }
}

impl ExperimentSettings {
    pub fn validate(&self) -> Result<()> {
        if self.mc_runs == 0 {
            return Err(Error::param("mc_runs", "must be at least 1"));
        }
        if !(self.sim_gap_threshold >= 0.0 && self.sim_gap_threshold.is_finite()) {
            return Err(Error::param("sim_gap_threshold", "must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Everything an experiment needs: the game, the follower population and
/// the training configuration. `cfg.seed` is the master seed.
#[derive(Debug, Clone, Copy)]
pub struct ExperimentSetup<'a> {
    pub spec: &'a GameSpec,
    pub followers: &'a [FollowerType],
    pub dist: &'a TypeDistribution,
    pub cfg: &'a TrainConfig,
    pub settings: &'a ExperimentSettings,
}

impl<'a> ExperimentSetup<'a> {
    pub fn tasks(&self) -> Vec<Task<'a>> {
        self.followers.iter().map(|f| Task::new(self.spec, f)).collect()
    }

    fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        self.settings.validate()?;
        if self.followers.len() != self.dist.len() {
            return Err(Error::dim("follower types vs type distribution", self.dist.len(), self.followers.len()));
        }
        for (i, f) in self.followers.iter().enumerate() {
            if f.id != i {
                return Err(Error::param("follower types", format!("type at position {i} has id {}", f.id)));
            }
        }
        Ok(())
    }

    /// Seed of the Monte-Carlo evaluation for type `type_id`. Every model
    /// evaluated on that type sees the same noise sequences, so simulated
    /// costs of different models are paired comparisons.
    pub fn evaluation_seed(&self, type_id: usize) -> u64 {
        RngStreams::new(self.cfg.seed).derive(&[label::EXPERIMENT, type_id as u64]).master()
    }

    fn simulate(&self, task: Task<'_>, m: &ResponseParam) -> Result<SimResult> {
        monte_carlo_cost(task, m, self.settings.mc_runs, self.evaluation_seed(task.follower.id))
    }

    fn adapt_to(&self, base: &ResponseParam, task: Task<'_>) -> Result<ResponseParam> {
        let mut rng = RngStreams::new(self.cfg.seed).stream(&[label::ADAPT, task.follower.id as u64]);
        adapt(base, task, self.cfg, &mut rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Adaptation,
    Unilateral,
    Individual,
}

/// Costs of one follower type. Columns an experiment does not produce are
/// `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub type_id: usize,
    pub expected_meta: Option<f64>,
    pub expected_adapted: Option<f64>,
    pub simulated_adapted: Option<f64>,
    pub expected_unilateral: Option<f64>,
    pub simulated_unilateral: Option<f64>,
    pub expected_individual: Option<f64>,
    pub simulated_individual: Option<f64>,
    pub expected_transfer: Option<f64>,
    pub simulated_transfer: Option<f64>,
}

impl ReportRow {
    fn new(type_id: usize) -> Self {
        Self { type_id, ..Default::default() }
    }

    pub fn values(&self) -> [Option<f64>; 9] {
        [
            self.expected_meta,
            self.expected_adapted,
            self.simulated_adapted,
            self.expected_unilateral,
            self.simulated_unilateral,
            self.expected_individual,
            self.simulated_individual,
            self.expected_transfer,
            self.simulated_transfer,
        ]
    }
}

/// Per-type results of one experiment, in type order.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    /// Fit-cost weight the evaluated models were trained with.
    pub gamma: f64,
    pub rows: Vec<ReportRow>,
    /// Model evaluated in each row's primary columns.
    pub models: Vec<ResponseParam>,
    /// Type-source model adapted to each type (individual experiment only).
    pub transfer_models: Vec<ResponseParam>,
    /// Monte-Carlo results behind each row's primary simulated cost.
    pub simulations: Vec<SimResult>,
}

impl ExperimentReport {
    fn check(self) -> Result<Self> {
        for row in &self.rows {
            for v in row.values().into_iter().flatten() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::NonFinite(format!("report cost {v} for type {}", row.type_id)));
                }
            }
        }
        Ok(self)
    }
}

/// Adapts `m_meta` to every type and reports expected cost before and after
/// adaptation together with the simulated cost of the adapted model.
pub fn run_adaptation_experiment(setup: &ExperimentSetup<'_>, m_meta: &ResponseParam) -> Result<ExperimentReport> {
    setup.validate()?;
    let mut report = ExperimentReport {
        kind: ExperimentKind::Adaptation,
        gamma: setup.cfg.gamma,
        rows: Vec::new(),
        models: Vec::new(),
        transfer_models: Vec::new(),
        simulations: Vec::new(),
    };
    for task in setup.tasks() {
        let f = task.follower;
        let adapted = setup.adapt_to(m_meta, task)?;
        let sim = setup.simulate(task, &adapted)?;
        let mut row = ReportRow::new(f.id);
        row.expected_meta = Some(expected_cost(setup.spec, f, m_meta)?);
        row.expected_adapted = Some(expected_cost(setup.spec, f, &adapted)?);
        row.simulated_adapted = Some(sim.mean_cost);
        log::info!(
            "type {}: simulated adapted cost {:.6} (variance {:.6}, {} runs)",
            f.id,
            sim.mean_cost,
            sim.cost_variance,
            sim.runs()
        );
        report.rows.push(row);
        report.models.push(adapted);
        report.simulations.push(sim);
    }
    report.check()
}

/// Trains one model on the guidance cost alone (`γ = 0`) and evaluates it
/// against every type. With no response data in the objective, the model
/// is shared by all types.
pub fn run_unilateral_experiment(setup: &ExperimentSetup<'_>) -> Result<ExperimentReport> {
    setup.validate()?;
    let cfg = TrainConfig { gamma: 0.0, ..setup.cfg.clone() };
    let tasks = setup.tasks();
    let trained = train_meta(&tasks, setup.dist, &cfg)?;
    let mut report = ExperimentReport {
        kind: ExperimentKind::Unilateral,
        gamma: 0.0,
        rows: Vec::new(),
        models: Vec::new(),
        transfer_models: Vec::new(),
        simulations: Vec::new(),
    };
    for task in tasks {
        let sim = setup.simulate(task, &trained.model)?;
        let mut row = ReportRow::new(task.follower.id);
        row.expected_unilateral = Some(expected_cost(setup.spec, task.follower, &trained.model)?);
        row.simulated_unilateral = Some(sim.mean_cost);
        report.rows.push(row);
        report.models.push(trained.model.clone());
        report.simulations.push(sim);
    }
    report.check()
}

/// Trains a standalone model per type, then adapts the source type's model
/// to every type as the transfer baseline.
pub fn run_individual_experiment(setup: &ExperimentSetup<'_>) -> Result<ExperimentReport> {
    setup.validate()?;
    let source = setup.settings.transfer_source;
    if source >= setup.followers.len() {
        return Err(Error::param(
            "transfer_source",
            format!("type {source} does not exist among {} types", setup.followers.len()),
        ));
    }
    let tasks = setup.tasks();
    let models = tasks
        .iter()
        .map(|t| train_individual(*t, setup.cfg, setup.settings.individual_steps))
        .collect::<Result<Vec<_>>>()?;
    let mut report = ExperimentReport {
        kind: ExperimentKind::Individual,
        gamma: setup.cfg.gamma,
        rows: Vec::new(),
        models: Vec::new(),
        transfer_models: Vec::new(),
        simulations: Vec::new(),
    };
    for (task, model) in tasks.iter().zip(models.iter()) {
        let f = task.follower;
        let transferred = setup.adapt_to(&models[source], *task)?;
        let sim = setup.simulate(*task, model)?;
        let mut row = ReportRow::new(f.id);
        row.expected_individual = Some(expected_cost(setup.spec, f, model)?);
        row.simulated_individual = Some(sim.mean_cost);
        row.expected_transfer = Some(expected_cost(setup.spec, f, &transferred)?);
        row.simulated_transfer = Some(setup.simulate(*task, &transferred)?.mean_cost);
        report.rows.push(row);
        report.simulations.push(sim);
        report.transfer_models.push(transferred);
    }
    report.models = models;
    report.check()
}
