//! Run configuration: one TOML file describes the scenario, the follower
//! population, training and experiment settings, the output directory and
//! the master seed.
//!
//! Every field is optional; an empty file is the robot-teaming experiment.
//! Unknown keys are rejected. Defaults applied while loading are reported
//! in a [`Provenance`] log.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::lqg::{
    build_double_integrator_spec, DoubleIntegratorCosts, FollowerType, FollowerWeights, GameSpec, LeaderWeights,
    TypeDistribution,
};
use crate::meta::TrainConfig;
use crate::sim::{ExperimentSettings, ExperimentSetup};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Probability of each follower type, in type order.
    pub distribution: Vec<f64>,
    pub scenario: ScenarioConfig,
    pub train: TrainConfig,
    pub experiments: ExperimentSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            distribution: vec![0.2, 0.3, 0.1, 0.2, 0.2],
            scenario: ScenarioConfig::default(),
            train: TrainConfig::default(),
            experiments: ExperimentSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioConfig {
    DoubleIntegrator(DoubleIntegratorConfig),
    Matrices(MatrixScenario),
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::DoubleIntegrator(DoubleIntegratorConfig::default())
    }
}

/// Planar leader and follower double integrators with weight-built costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DoubleIntegratorConfig {
    pub dt: f64,
    pub horizon: usize,
    /// `Σ = noise_scale · I`.
    pub noise_scale: f64,
    pub leader_start: [f64; 2],
    pub follower_start: [f64; 2],
    pub leader: LeaderWeights,
    pub followers: Vec<FollowerWeights>,
}

impl Default for DoubleIntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 0.5,
            horizon: 10,
            noise_scale: 0.5,
            leader_start: [5.0, 6.5],
            follower_start: [7.0, 4.5],
            leader: LeaderWeights::default(),
            followers: FollowerWeights::robot_teaming_types(),
        }
    }
}

/// A game given by explicit matrices (row-major nested arrays).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixScenario {
    pub horizon: usize,
    pub x0: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b_leader: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    pub q_leader: Vec<Vec<f64>>,
    pub r_leader: Vec<Vec<f64>>,
    pub q_terminal: Vec<Vec<f64>>,
    pub followers: Vec<MatrixFollower>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFollower {
    pub b_follower: Vec<Vec<f64>>,
    pub q_follower: Vec<Vec<f64>>,
    pub r_follower: Vec<Vec<f64>>,
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<Mat> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err(Error::param(name, "matrix must be non-empty"));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
        return Err(Error::param(name, format!("row {bad} has {} entries, expected {cols}", rows[bad].len())));
    }
    Ok(Mat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn nested(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl MatrixScenario {
    /// Inverse of [`ScenarioConfig::build`] for matrix scenarios.
    pub fn from_game(spec: &GameSpec, followers: &[FollowerType]) -> Self {
        Self {
            horizon: spec.horizon,
            x0: spec.x0.iter().copied().collect(),
            a: nested(&spec.a),
            b_leader: nested(&spec.b_leader),
            sigma: nested(&spec.sigma),
            q_leader: nested(&spec.q_leader),
            r_leader: nested(&spec.r_leader),
            q_terminal: nested(&spec.q_terminal),
            followers: followers
                .iter()
                .map(|f| MatrixFollower {
                    b_follower: nested(&f.b_follower),
                    q_follower: nested(&f.q_follower),
                    r_follower: nested(&f.r_follower),
                })
                .collect(),
        }
    }
}

impl ScenarioConfig {
    /// Builds and validates the game and the follower types.
    pub fn build(&self) -> Result<(GameSpec, Vec<FollowerType>)> {
        match self {
            Self::DoubleIntegrator(c) => {
                if !(c.noise_scale >= 0.0 && c.noise_scale.is_finite()) {
                    return Err(Error::param("noise_scale", "must be finite and non-negative"));
                }
                let costs = DoubleIntegratorCosts::from_weights(&c.leader, &c.followers, c.noise_scale, c.horizon);
                build_double_integrator_spec(c.dt, c.leader_start, c.follower_start, &costs)
            }
            Self::Matrices(c) => {
                let spec = GameSpec::new(
                    matrix("a", &c.a)?,
                    matrix("b_leader", &c.b_leader)?,
                    matrix("sigma", &c.sigma)?,
                    matrix("q_leader", &c.q_leader)?,
                    matrix("r_leader", &c.r_leader)?,
                    matrix("q_terminal", &c.q_terminal)?,
                    c.horizon,
                    Vector::from_column_slice(&c.x0),
                )?;
                let followers = c
                    .followers
                    .iter()
                    .enumerate()
                    .map(|(id, f)| {
                        let ft = FollowerType::new(
                            id,
                            matrix("b_follower", &f.b_follower)?,
                            matrix("q_follower", &f.q_follower)?,
                            matrix("r_follower", &f.r_follower)?,
                        )?;
                        ft.check_compatible(&spec)?;
                        Ok(ft)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((spec, followers))
            }
        }
    }
}

/// The validated objects a run operates on.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: GameSpec,
    pub followers: Vec<FollowerType>,
    pub dist: TypeDistribution,
    pub train: TrainConfig,
    pub settings: ExperimentSettings,
}

impl Scenario {
    pub fn setup(&self) -> ExperimentSetup<'_> {
        ExperimentSetup {
            spec: &self.spec,
            followers: &self.followers,
            dist: &self.dist,
            cfg: &self.train,
            settings: &self.settings,
        }
    }
}

impl RunConfig {
    /// Training configuration carrying the master seed.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.train.clone() }
    }

    /// Validates every invariant and builds the scenario.
    pub fn scenario(&self) -> Result<Scenario> {
        if self.seed > i64::MAX as u64 {
            return Err(Error::param("seed", format!("{} exceeds the TOML integer range (at most {})", self.seed, i64::MAX)));
        }
        let dist = TypeDistribution::new(self.distribution.clone())?;
        let (spec, followers) = self.scenario.build()?;
        if followers.len() != dist.len() {
            return Err(Error::dim("follower types vs distribution entries", dist.len(), followers.len()));
        }
        let train = self.train_config();
        train.validate()?;
        self.experiments.validate()?;
        if self.experiments.transfer_source >= followers.len() {
            return Err(Error::param(
                "transfer_source",
                format!("type {} does not exist among {} types", self.experiments.transfer_source, followers.len()),
            ));
        }
        Ok(Scenario { spec, followers, dist, train, settings: self.experiments.clone() })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize configuration: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueSource {
    File,
    /// Default equal to the reference robot-teaming experiment.
    ReferenceDefault,
    /// Default with no reference value; chosen for this implementation.
    ChosenDefault,
    CommandLine,
    Environment,
}

impl fmt::Display for ValueSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::File => "set in file",
            Self::ReferenceDefault => "default (reference experiment value)",
            Self::ChosenDefault => "default (unspecified in reference; chosen)",
            Self::CommandLine => "set on command line",
            Self::Environment => "set by environment",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProvenanceEntry {
    pub key: String,
    pub value: String,
    pub source: ValueSource,
}

/// Where each known setting of a loaded configuration came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    pub entries: Vec<ProvenanceEntry>,
}

impl Provenance {
    pub fn defaults(&self) -> impl Iterator<Item = &ProvenanceEntry> {
        self.entries.iter().filter(|e| {
            matches!(e.source, ValueSource::ReferenceDefault | ValueSource::ChosenDefault)
        })
    }

    /// Records an override applied after loading.
    pub fn set(&mut self, key: &str, value: impl ToString, source: ValueSource) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|e| e.key == key) {
            Some(e) => {
                e.value = value;
                e.source = source;
            }
            None => self.entries.push(ProvenanceEntry { key: key.into(), value, source }),
        }
    }

    pub fn get(&self, key: &str) -> Option<&ProvenanceEntry> {
        self.entries.iter().find(|e| e.key == key)
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(f, "{} = {} [{}]", e.key, e.value, e.source)?;
        }
        Ok(())
    }
}

fn lookup<'v>(root: &'v toml::Table, path: &str) -> Option<&'v toml::Value> {
    let mut parts = path.split('.');
    let mut value = root.get(parts.next()?)?;
    for part in parts {
        value = value.as_table()?.get(part)?;
    }
    Some(value)
}

fn provenance(root: &toml::Table, cfg: &RunConfig) -> Provenance {
    use ValueSource::{ChosenDefault as C, ReferenceDefault as R};
    let t = &cfg.train;
    let e = &cfg.experiments;
    let mut keys: Vec<(String, String, ValueSource)> = vec![
        ("seed".into(), cfg.seed.to_string(), C),
        ("output_dir".into(), cfg.output_dir.display().to_string(), C),
        ("distribution".into(), format!("{:?}", cfg.distribution), R),
        ("train.alpha".into(), t.alpha.to_string(), C),
        ("train.beta".into(), t.beta.to_string(), C),
        ("train.gamma".into(), t.gamma.to_string(), R),
        ("train.lambda".into(), t.lambda.to_string(), R),
        ("train.eta".into(), t.eta.to_string(), R),
        ("train.kappa".into(), t.kappa.to_string(), R),
        ("train.samples".into(), t.samples.to_string(), R),
        ("train.max_iter".into(), t.max_iter.to_string(), C),
        ("train.max_gd".into(), t.max_gd.to_string(), C),
        ("train.eps".into(), t.eps.to_string(), C),
        ("train.batch_size".into(), t.batch_size.to_string(), C),
        ("train.state_range".into(), format!("{:?}", t.state_range), C),
        ("train.control_range".into(), format!("{:?}", t.control_range), C),
        ("train.sigma_nbhd".into(), t.sigma_nbhd.to_string(), C),
        ("train.divergence_bound".into(), t.divergence_bound.to_string(), C),
        ("train.init_scale".into(), t.init_scale.to_string(), C),
        ("experiments.mc_runs".into(), e.mc_runs.to_string(), C),
        ("experiments.sim_gap_threshold".into(), e.sim_gap_threshold.to_string(), C),
        ("experiments.transfer_source".into(), e.transfer_source.to_string(), R),
        ("experiments.individual_steps".into(), e.individual_steps.to_string(), C),
    ];
    if let ScenarioConfig::DoubleIntegrator(d) = &cfg.scenario {
        keys.extend([
            ("scenario.kind".into(), "double_integrator".into(), R),
            ("scenario.dt".into(), d.dt.to_string(), R),
            ("scenario.horizon".into(), d.horizon.to_string(), R),
            ("scenario.noise_scale".into(), d.noise_scale.to_string(), R),
            ("scenario.leader_start".into(), format!("{:?}", d.leader_start), R),
            ("scenario.follower_start".into(), format!("{:?}", d.follower_start), R),
            ("scenario.leader".into(), format!("{:?}", d.leader), C),
            ("scenario.followers".into(), format!("{} types", d.followers.len()), C),
        ]);
    }
    let entries = keys
        .into_iter()
        .map(|(key, value, default)| {
            let source = if lookup(root, &key).is_some() { ValueSource::File } else { default };
            ProvenanceEntry { key, value, source }
        })
        .collect();
    Provenance { entries }
}

/// Parses and validates a configuration from TOML text.
pub fn parse_config(text: &str) -> Result<(RunConfig, Provenance)> {
    let root: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.scenario()?;
    let prov = provenance(&root, &cfg);
    Ok((cfg, prov))
}

pub fn load_config_with_provenance(path: &Path) -> Result<(RunConfig, Provenance)> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    Ok(load_config_with_provenance(path)?.0)
}
