use std::fmt;
use std::path::Path;

use anyhow::Result;
use serde::Serialize;
use stackmeta_core::diagnostics::{check_gradients as run_checks, GradientCheck};
use stackmeta_core::io::csv::{costs_table, format_float, report_table, trace_table, trajectory_table, CsvTable};
use stackmeta_core::io::{load_config_with_provenance, parse_config, read_model, Provenance, RunConfig, Scenario, ValueSource};
use stackmeta_core::lqg::{expected_cost, true_response_matrix, ResponseParam, Task};
use stackmeta_core::matdiff::DEFAULT_FD_STEP;
use stackmeta_core::meta::train_meta;
use stackmeta_core::sim::{
    monte_carlo_cost, rollout, run_adaptation_experiment, run_individual_experiment, run_unilateral_experiment,
    ExperimentReport, ExperimentSettings, Noise, ReportRow, SimResult,
};
use stackmeta_core::Error;

use crate::output::OutDir;
use crate::Common;

/// Returned when at least one finite-difference check exceeds tolerance.
#[derive(Debug)]
pub struct ChecksFailed {
    pub failed: usize,
    pub total: usize,
}

impl fmt::Display for ChecksFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} of {} gradient checks failed", self.failed, self.total)
    }
}

impl std::error::Error for ChecksFailed {}

struct Run {
    config: RunConfig,
    scenario: Scenario,
    out: OutDir,
}

impl Run {
    fn tasks(&self) -> Vec<Task<'_>> {
        self.scenario.setup().tasks()
    }
}

/// Loads the configuration, applies overrides, and records provenance and
/// the resolved configuration in the output directory.
fn prepare(common: &Common, command: &str) -> Result<Run> {
    let (mut config, mut provenance): (RunConfig, Provenance) = match &common.config {
        Some(path) => load_config_with_provenance(path)?,
        None => parse_config("")?,
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
        provenance.set("seed", seed, ValueSource::CommandLine);
    }
    if let Some(out) = &common.out {
        config.output_dir = out.clone();
        provenance.set("output_dir", out.display(), ValueSource::CommandLine);
    } else if let Some(out) = std::env::var_os("STACKMETA_OUT").filter(|v| !v.is_empty()) {
        config.output_dir = out.into();
        provenance.set("output_dir", config.output_dir.display(), ValueSource::Environment);
    }
    let scenario = config.scenario()?;
    for e in provenance.defaults() {
        log::info!("{} = {} [{}]", e.key, e.value, e.source);
    }
    let mut out = OutDir::create(config.output_dir.clone())?;
    out.text(&format!("{command}_provenance.txt"), &provenance.to_string())?;
    out.text(&format!("{command}_config.toml"), &config.to_toml()?)?;
    Ok(Run { config, scenario, out })
}

fn check_shape(run: &Run, m: &ResponseParam) -> Result<()> {
    let expected = run.tasks()[0].response_shape();
    if m.shape() != expected {
        return Err(Error::Dimension {
            context: "response model for this scenario".into(),
            expected: format!("{}x{}", expected.0, expected.1),
            actual: format!("{}x{}", m.shape().0, m.shape().1),
        }
        .into());
    }
    Ok(())
}

#[derive(Serialize)]
struct TypeCost {
    type_id: usize,
    expected_cost: f64,
    expected_cost_true_response: f64,
}

#[derive(Serialize)]
struct TrainSummary {
    seed: u64,
    iterations: usize,
    initial_meta_cost: Option<f64>,
    final_meta_cost: Option<f64>,
    types: Vec<TypeCost>,
}

/// Trains the meta model and writes `meta_model.txt` and `train_trace.csv`.
fn train_and_store(run: &mut Run) -> Result<(ResponseParam, TrainSummary)> {
    let trained = {
        let tasks = run.tasks();
        train_meta(&tasks, &run.scenario.dist, &run.scenario.train)?
    };
    run.out.model("meta_model.txt", &trained.model)?;
    run.out.csv("train_trace.csv", &trace_table(&trained.trace))?;
    let types = run
        .tasks()
        .iter()
        .map(|t| {
            Ok(TypeCost {
                type_id: t.follower.id,
                expected_cost: expected_cost(t.spec, t.follower, &trained.model)?,
                expected_cost_true_response: expected_cost(
                    t.spec,
                    t.follower,
                    &true_response_matrix(t.spec, t.follower)?,
                )?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = TrainSummary {
        seed: run.config.seed,
        iterations: trained.trace.records.len(),
        initial_meta_cost: trained.trace.initial_meta_cost(),
        final_meta_cost: trained.trace.final_meta_cost(),
        types,
    };
    Ok((trained.model, summary))
}

pub fn train(common: &Common) -> Result<()> {
    let mut run = prepare(common, "train")?;
    let (_, summary) = train_and_store(&mut run)?;
    run.out.summary("train", &summary)
}

fn meta_model(run: &mut Run, model: Option<&Path>) -> Result<ResponseParam> {
    match model {
        Some(path) => {
            let m = read_model(path)?;
            check_shape(run, &m)?;
            Ok(m)
        }
        None => Ok(train_and_store(run)?.0),
    }
}

/// Noise-free trajectory, first noisy trajectory and per-run costs of one
/// evaluated model.
fn write_evaluation(run: &mut Run, tag: &str, type_id: usize, m: &ResponseParam, sim: &SimResult) -> Result<()> {
    let nominal = {
        let task = run.tasks()[type_id];
        rollout(task, m, Noise::Off, sim.seed)?
    };
    run.out.csv(&format!("trajectory_{tag}_type{type_id}.csv"), &trajectory_table(&nominal))?;
    if let Some(first) = sim.trajectories.first() {
        run.out.csv(&format!("trajectory_{tag}_noisy_type{type_id}.csv"), &trajectory_table(first))?;
    }
    run.out.csv(&format!("costs_{tag}_type{type_id}.csv"), &costs_table(&sim.costs))
}

#[derive(Serialize)]
struct SimStats {
    type_id: usize,
    runs: usize,
    mean_cost: f64,
    cost_variance: f64,
    standard_error: f64,
}

fn sim_stats(report: &ExperimentReport) -> Vec<SimStats> {
    report
        .rows
        .iter()
        .zip(&report.simulations)
        .map(|(row, sim)| SimStats {
            type_id: row.type_id,
            runs: sim.runs(),
            mean_cost: sim.mean_cost,
            cost_variance: sim.cost_variance,
            standard_error: sim.standard_error(),
        })
        .collect()
}

#[derive(Serialize)]
struct AdaptCheck {
    type_id: usize,
    adapted_not_worse_than_meta: bool,
    /// `(simulated - expected) / expected` of the adapted model.
    relative_sim_gap: f64,
    sim_gap_within_threshold: bool,
}

#[derive(Serialize)]
struct AdaptSummary {
    seed: u64,
    sim_gap_threshold: f64,
    rows: Vec<ReportRow>,
    simulations: Vec<SimStats>,
    checks: Vec<AdaptCheck>,
}

fn adaptation_checks(report: &ExperimentReport, threshold: f64) -> Vec<AdaptCheck> {
    report
        .rows
        .iter()
        .filter_map(|r| {
            let (meta, exp, sim) = (r.expected_meta?, r.expected_adapted?, r.simulated_adapted?);
            let gap = (sim - exp) / exp;
            Some(AdaptCheck {
                type_id: r.type_id,
                adapted_not_worse_than_meta: exp <= meta,
                relative_sim_gap: gap,
                sim_gap_within_threshold: gap >= 0.0 && gap <= threshold,
            })
        })
        .collect()
}

fn adaptation(run: &mut Run, m_meta: &ResponseParam) -> Result<ExperimentReport> {
    let report = run_adaptation_experiment(&run.scenario.setup(), m_meta)?;
    for (k, m) in report.models.iter().enumerate() {
        run.out.model(&format!("adapted_model_type{k}.txt"), m)?;
        write_evaluation(run, "adapted", k, m, &report.simulations[k])?;
    }
    Ok(report)
}

pub fn adapt(common: &Common, model: Option<&Path>) -> Result<()> {
    let mut run = prepare(common, "adapt")?;
    let m_meta = meta_model(&mut run, model)?;
    let report = adaptation(&mut run, &m_meta)?;
    run.out.csv("adaptation.csv", &report_table(&report))?;
    let threshold = run.scenario.settings.sim_gap_threshold;
    let summary = AdaptSummary {
        seed: run.config.seed,
        sim_gap_threshold: threshold,
        checks: adaptation_checks(&report, threshold),
        simulations: sim_stats(&report),
        rows: report.rows,
    };
    run.out.summary("adapt", &summary)
}

#[derive(Serialize)]
struct SimulateRow {
    type_id: usize,
    expected_cost: f64,
    #[serde(flatten)]
    stats: SimStats,
}

#[derive(Serialize)]
struct SimulateSummary {
    seed: u64,
    rows: Vec<SimulateRow>,
}

pub fn simulate(common: &Common, model: &Path, runs: Option<usize>) -> Result<()> {
    let mut run = prepare(common, "simulate")?;
    let m = read_model(model)?;
    check_shape(&run, &m)?;
    let runs = runs.unwrap_or(run.scenario.settings.mc_runs);
    ExperimentSettings { mc_runs: runs, ..run.scenario.settings.clone() }.validate()?;

    let mut table = CsvTable::new(["type", "expected_cost", "simulated_mean", "simulated_variance", "standard_error", "runs"]);
    let mut rows = Vec::new();
    for k in 0..run.scenario.followers.len() {
        let (expected, sim) = {
            let setup = run.scenario.setup();
            let task = setup.tasks()[k];
            let expected = expected_cost(task.spec, task.follower, &m)?;
            (expected, monte_carlo_cost(task, &m, runs, setup.evaluation_seed(k))?)
        };
        write_evaluation(&mut run, "simulated", k, &m, &sim)?;
        table.push(vec![
            k.to_string(),
            format_float(expected),
            format_float(sim.mean_cost),
            format_float(sim.cost_variance),
            format_float(sim.standard_error()),
            runs.to_string(),
        ])?;
        rows.push(SimulateRow {
            type_id: k,
            expected_cost: expected,
            stats: SimStats {
                type_id: k,
                runs,
                mean_cost: sim.mean_cost,
                cost_variance: sim.cost_variance,
                standard_error: sim.standard_error(),
            },
        });
    }
    run.out.csv("simulate.csv", &table)?;
    run.out.summary("simulate", &SimulateSummary { seed: run.config.seed, rows })
}

#[derive(Serialize)]
struct BaselineSummary {
    seed: u64,
    gamma: f64,
    rows: Vec<ReportRow>,
    simulations: Vec<SimStats>,
}

pub fn unilateral(common: &Common) -> Result<()> {
    let mut run = prepare(common, "baseline_unilateral")?;
    let report = run_unilateral_experiment(&run.scenario.setup())?;
    run.out.model("unilateral_model.txt", &report.models[0])?;
    for (k, m) in report.models.iter().enumerate() {
        write_evaluation(&mut run, "unilateral", k, m, &report.simulations[k])?;
    }
    run.out.csv("unilateral.csv", &report_table(&report))?;
    let summary = BaselineSummary {
        seed: run.config.seed,
        gamma: report.gamma,
        simulations: sim_stats(&report),
        rows: report.rows,
    };
    run.out.summary("baseline_unilateral", &summary)
}

fn individual_baseline(run: &mut Run) -> Result<ExperimentReport> {
    let report = run_individual_experiment(&run.scenario.setup())?;
    for (k, m) in report.models.iter().enumerate() {
        run.out.model(&format!("individual_model_type{k}.txt"), m)?;
        write_evaluation(run, "individual", k, m, &report.simulations[k])?;
    }
    for (k, m) in report.transfer_models.iter().enumerate() {
        run.out.model(&format!("transfer_model_type{k}.txt"), m)?;
    }
    Ok(report)
}

pub fn individual(common: &Common) -> Result<()> {
    let mut run = prepare(common, "baseline_individual")?;
    let report = individual_baseline(&mut run)?;
    run.out.csv("individual.csv", &report_table(&report))?;
    let summary = BaselineSummary {
        seed: run.config.seed,
        gamma: report.gamma,
        simulations: sim_stats(&report),
        rows: report.rows,
    };
    run.out.summary("baseline_individual", &summary)
}

fn merge(a: &ReportRow, b: &ReportRow) -> ReportRow {
    ReportRow {
        type_id: a.type_id,
        expected_meta: a.expected_meta.or(b.expected_meta),
        expected_adapted: a.expected_adapted.or(b.expected_adapted),
        simulated_adapted: a.simulated_adapted.or(b.simulated_adapted),
        expected_unilateral: a.expected_unilateral.or(b.expected_unilateral),
        simulated_unilateral: a.simulated_unilateral.or(b.simulated_unilateral),
        expected_individual: a.expected_individual.or(b.expected_individual),
        simulated_individual: a.simulated_individual.or(b.simulated_individual),
        expected_transfer: a.expected_transfer.or(b.expected_transfer),
        simulated_transfer: a.simulated_transfer.or(b.simulated_transfer),
    }
}

#[derive(Serialize)]
struct TransferComparison {
    type_id: usize,
    simulated_adapted: f64,
    simulated_transfer: f64,
    meta_adaptation_not_worse: bool,
}

#[derive(Serialize)]
struct TransferSummary {
    seed: u64,
    transfer_source: usize,
    rows: Vec<ReportRow>,
    comparisons: Vec<TransferComparison>,
    meta_not_worse_count: usize,
    compared_types: usize,
}

pub fn transfer(common: &Common, model: Option<&Path>) -> Result<()> {
    let mut run = prepare(common, "transfer")?;
    let m_meta = meta_model(&mut run, model)?;
    let adapted = adaptation(&mut run, &m_meta)?;
    let individual = individual_baseline(&mut run)?;
    let rows: Vec<ReportRow> = adapted.rows.iter().zip(&individual.rows).map(|(a, b)| merge(a, b)).collect();
    let merged = ExperimentReport { rows: rows.clone(), ..adapted };
    run.out.csv("transfer.csv", &report_table(&merged))?;

    let source = run.scenario.settings.transfer_source;
    let comparisons: Vec<TransferComparison> = rows
        .iter()
        .filter(|r| r.type_id != source)
        .filter_map(|r| {
            let (a, t) = (r.simulated_adapted?, r.simulated_transfer?);
            Some(TransferComparison {
                type_id: r.type_id,
                simulated_adapted: a,
                simulated_transfer: t,
                meta_adaptation_not_worse: a <= t,
            })
        })
        .collect();
    let summary = TransferSummary {
        seed: run.config.seed,
        transfer_source: source,
        meta_not_worse_count: comparisons.iter().filter(|c| c.meta_adaptation_not_worse).count(),
        compared_types: comparisons.len(),
        comparisons,
        rows,
    };
    run.out.summary("transfer", &summary)
}

#[derive(Serialize)]
struct CheckSummary {
    seed: u64,
    step: f64,
    total: usize,
    failed: usize,
    checks: Vec<GradientCheck>,
}

pub fn check_gradients(common: &Common) -> Result<()> {
    let mut run = prepare(common, "check_gradients")?;
    let checks = {
        let tasks = run.tasks();
        run_checks(&tasks, &run.scenario.train, DEFAULT_FD_STEP)?
    };
    let mut table = CsvTable::new(["type", "check", "relative_error", "tolerance", "passed"]);
    for c in &checks {
        table.push(vec![
            c.type_id.to_string(),
            c.name.to_string(),
            format_float(c.relative_error),
            format_float(c.tolerance),
            c.passed.to_string(),
        ])?;
        if !c.passed {
            log::warn!("type {} {}: relative error {:e} > {:e}", c.type_id, c.name, c.relative_error, c.tolerance);
        }
    }
    run.out.csv("gradient_checks.csv", &table)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    let total = checks.len();
    run.out.summary("check_gradients", &CheckSummary { seed: run.config.seed, step: DEFAULT_FD_STEP, total, failed, checks })?;
    if failed > 0 {
        return Err(ChecksFailed { failed, total }.into());
    }
    println!("all {total} gradient checks passed");
    Ok(())
}
