//! Experiment harness: configuration, seeded run scheduling and record
//! files.
//!
//! An experiment is a grid of demand variances × model variants ×
//! replications × agents. Every cell trains one agent and optionally tests
//! its greedy policy. Runs in the same (variance, replication) cell share a
//! seed, so all agents see the same demand draws. Summaries are computed
//! from the emitted records alone.

mod report;

use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use report::{
    closer_fraction, convergence_series, fig3_summary, improvement, scenario_summary,
    table1_summary, write_report, ConvergencePoint, Fig3Point, ScenarioRow, Table1Row,
};

use crate::agents::{self, AgentConfig, Algorithm, DemandSource, Hyperparameters, TrainedAgent};
use crate::demand::{self, Binning, DemandDistribution, DemandSeries, TransactionFormat};
use crate::env::{Action, CostParams, InventoryMdp, InventoryState};
use crate::envmodel::{ModelVariant, NetModelConfig};
use crate::error::{Error, Result};
use crate::forecast::{self, ForecastConfig, Forecaster, WarmStart, WarmStartConfig};
use crate::metrics::RunMetrics;
use crate::schedule::Schedule;
use crate::seeding::{self, label_key, Stream};

/// Which study an experiment reproduces. Selects the preset a config file
/// is layered on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Train,
    Table1,
    Scenario1,
    Scenario2,
    Fig3,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Train => "train",
            Scenario::Table1 => "table1",
            Scenario::Scenario1 => "scenario1",
            Scenario::Scenario2 => "scenario2",
            Scenario::Fig3 => "fig3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSettings {
    pub max_stock: u32,
    pub max_order: u32,
    pub costs: CostParams,
    /// Stock `[s1, s2, s3]` at the start of every episode.
    pub initial_state: [u32; 3],
}

impl Default for EnvSettings {
    fn default() -> Self {
        Self {
            max_stock: crate::env::DEFAULT_MAX_STOCK,
            max_order: crate::env::DEFAULT_MAX_ORDER,
            costs: CostParams::default(),
            initial_state: [0, 0, 5],
        }
    }
}

impl EnvSettings {
    pub fn mdp(&self) -> Result<InventoryMdp> {
        InventoryMdp::new(self.max_stock, self.max_order, self.costs)
    }

    pub fn initial(&self) -> InventoryState {
        let [s1, s2, s3] = self.initial_state;
        InventoryState::new(s1, s2, s3)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSettings {
    pub mean: f64,
    /// One experiment cell per variance.
    pub variances: Vec<f64>,
    pub max_demand: u32,
    pub binning: Binning,
}

impl Default for DemandSettings {
    fn default() -> Self {
        Self {
            mean: 5.0,
            variances: vec![5.0],
            max_demand: demand::DEFAULT_MAX_DEMAND,
            binning: Binning::Center,
        }
    }
}

impl DemandSettings {
    pub fn distribution(&self, variance: f64) -> Result<DemandDistribution> {
        DemandDistribution::discretized_gamma_with(
            self.mean,
            variance,
            self.max_demand,
            self.binning,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSettings {
    /// Days per training episode.
    pub horizon: usize,
    pub episodes: usize,
    /// Days per greedy test run; no testing when zero.
    pub test_days: usize,
    pub test_repetitions: usize,
    pub hyperparameters: Hyperparameters,
    pub net: NetModelConfig,
}

impl Default for TrainingSettings {
    fn default() -> Self {
        Self {
            horizon: 100,
            episodes: 500,
            test_days: 100,
            test_repetitions: 1,
            hyperparameters: Hyperparameters::COMPARISON,
            net: NetModelConfig::default(),
        }
    }
}

/// One agent to train in every experiment cell. Unset fields come from the
/// experiment's hyperparameters for the agent's algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub transfer: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exploration: Option<Schedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planning: Option<Schedule>,
}

impl AgentSpec {
    pub fn new(algorithm: Algorithm, transfer: bool) -> Self {
        Self {
            label: None,
            algorithm,
            transfer,
            alpha: None,
            gamma: None,
            exploration: None,
            planning: None,
        }
    }

    pub fn label(&self) -> String {
        match &self.label {
            Some(l) => l.clone(),
            None if self.transfer => format!("{}+transfer", self.algorithm),
            None => self.algorithm.name().to_string(),
        }
    }

    fn config(
        &self,
        training: &TrainingSettings,
        model: ModelVariant,
        seed: u64,
    ) -> Result<AgentConfig> {
        let hp = &training.hyperparameters;
        let config = AgentConfig {
            algorithm: self.algorithm,
            alpha: self.alpha.unwrap_or(hp.alpha),
            gamma: self.gamma.unwrap_or(hp.gamma),
            exploration: match self.exploration {
                Some(s) => s,
                None => hp.exploration(self.algorithm)?,
            },
            planning: match self.planning {
                Some(s) => s,
                None => hp.planning(self.algorithm)?,
            },
            model,
            net: training.net,
            horizon: training.horizon,
            episodes: training.episodes,
            seed,
            warm_start: None,
        };
        config
            .validate()
            .map_err(|e| Error::Config(format!("agent {}: {e}", self.label())))?;
        Ok(config)
    }
}

/// History of the similar existing product the forecaster learns from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HistorySource {
    /// Independent daily draws from a discretized Gamma.
    Synthetic {
        mean: f64,
        variance: f64,
        start: NaiveDate,
        end: NaiveDate,
    },
    /// Daily totals of one product in a transaction file.
    Dataset {
        path: PathBuf,
        product: String,
        #[serde(default)]
        start: Option<NaiveDate>,
        #[serde(default)]
        end: Option<NaiveDate>,
        #[serde(default)]
        format: TransactionFormat,
    },
}

impl HistorySource {
    pub fn load(&self, max_demand: u32, seed: u64) -> Result<DemandSeries> {
        match self {
            HistorySource::Synthetic {
                mean,
                variance,
                start,
                end,
            } => {
                if end < start {
                    return Err(Error::Config(format!(
                        "history ends {end} before it starts {start}"
                    )));
                }
                let dist = DemandDistribution::discretized_gamma(*mean, *variance, max_demand)?;
                let days = (*end - *start).num_days() as usize + 1;
                let mut rng = seeding::rng(
                    seeding::derive(seed, &[label_key("history")]),
                    Stream::Transfer,
                );
                Ok(demand::synthesize_history(&dist, days, *start, &mut rng))
            }
            HistorySource::Dataset {
                path,
                product,
                start,
                end,
                format,
            } => {
                let range = match (start, end) {
                    (Some(a), Some(b)) => Some((*a, *b)),
                    (None, None) => None,
                    _ => {
                        return Err(Error::Config(
                            "dataset history needs both start and end, or neither".into(),
                        ))
                    }
                };
                demand::load_transactions(path, product, range, format)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferSettings {
    pub history: HistorySource,
    pub forecast: ForecastConfig,
    /// Length of the generated offline series.
    pub horizon: usize,
    /// First forecast day; defaults to the day after the history ends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<NaiveDate>,
    pub warm_start: WarmStartConfig,
}

impl Default for TransferSettings {
    fn default() -> Self {
        Self {
            history: HistorySource::Synthetic {
                mean: 4.48,
                variance: 5.0,
                start: NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date"),
                end: NaiveDate::from_ymd_opt(2022, 9, 30).expect("valid date"),
            },
            forecast: ForecastConfig::default(),
            horizon: 10,
            start: None,
            warm_start: WarmStartConfig::default(),
        }
    }
}

/// Pair whose estimated transition probability is tracked per episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackedTransition {
    pub state: [u32; 3],
    pub action: u32,
    pub next: [u32; 3],
}

impl Default for TrackedTransition {
    fn default() -> Self {
        Self {
            state: [0, 0, 3],
            action: 2,
            next: [0, 1, 2],
        }
    }
}

impl TrackedTransition {
    fn parts(&self) -> (InventoryState, Action, InventoryState) {
        let [a, b, c] = self.state;
        let [x, y, z] = self.next;
        (
            InventoryState::new(a, b, c),
            Action(self.action),
            InventoryState::new(x, y, z),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub scenario: Scenario,
    pub seed: u64,
    pub replications: usize,
    pub models: Vec<ModelVariant>,
    pub env: EnvSettings,
    pub demand: DemandSettings,
    pub training: TrainingSettings,
    pub agents: Vec<AgentSpec>,
    pub transfer: TransferSettings,
    pub tracked: TrackedTransition,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self::preset(Scenario::Table1)
    }
}

impl ExperimentSpec {
    /// Default settings of each study.
    pub fn preset(scenario: Scenario) -> Self {
        let base = Self {
            name: scenario.name().to_string(),
            scenario,
            seed: 0,
            replications: 1,
            models: vec![ModelVariant::Tabular],
            env: EnvSettings::default(),
            demand: DemandSettings::default(),
            training: TrainingSettings::default(),
            agents: Vec::new(),
            transfer: TransferSettings::default(),
            tracked: TrackedTransition::default(),
        };
        let five = vec![
            AgentSpec::new(Algorithm::AdjustedDynaQ, true),
            AgentSpec::new(Algorithm::AdjustedDynaQ, false),
            AgentSpec::new(Algorithm::DynaQ, true),
            AgentSpec::new(Algorithm::DynaQ, false),
            AgentSpec::new(Algorithm::QLearning, false),
        ];
        let month = |hyperparameters, test_days, test_repetitions, episodes| TrainingSettings {
            horizon: 30,
            episodes,
            test_days,
            test_repetitions,
            hyperparameters,
            net: NetModelConfig::default(),
        };
        match scenario {
            Scenario::Train => Self {
                agents: vec![AgentSpec::new(Algorithm::AdjustedDynaQ, false)],
                ..base
            },
            Scenario::Table1 => Self {
                replications: 20,
                demand: DemandSettings {
                    variances: vec![1.0, 3.0, 5.0],
                    ..DemandSettings::default()
                },
                agents: Algorithm::ALL
                    .into_iter()
                    .map(|a| AgentSpec::new(a, false))
                    .collect(),
                ..base
            },
            Scenario::Scenario1 => Self {
                replications: 20,
                training: month(Hyperparameters::TRAINING_SCENARIO, 0, 0, 100),
                agents: five,
                ..base
            },
            Scenario::Scenario2 => Self {
                replications: 20,
                training: month(Hyperparameters::TESTING_SCENARIO, 30, 100, 100),
                agents: five,
                ..base
            },
            Scenario::Fig3 => Self {
                replications: 100,
                training: month(Hyperparameters::TRAINING_SCENARIO, 0, 0, 30),
                agents: five,
                ..base
            },
        }
    }

    /// Layers a TOML document over the preset of its scenario. The
    /// `scenario` key in the document wins over `default_scenario`.
    pub fn from_toml(text: &str, default_scenario: Scenario) -> Result<Self> {
        let overlay: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let scenario = match overlay.get("scenario") {
            Some(v) => v
                .clone()
                .try_into::<Scenario>()
                .map_err(|e| Error::Config(format!("scenario: {e}")))?,
            None => default_scenario,
        };
        let preset = Self::preset(scenario);
        let mut base = toml::Table::try_from(&preset).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut base, overlay);
        let spec: Self = toml::Value::Table(base)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>, default_scenario: Scenario) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, default_scenario)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents.is_empty() {
            return Err(Error::Config("experiment needs at least one agent".into()));
        }
        if self.models.is_empty() || self.demand.variances.is_empty() {
            return Err(Error::Config(
                "experiment needs at least one model and one demand variance".into(),
            ));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be positive".into()));
        }
        let mut labels: Vec<String> = self.agents.iter().map(AgentSpec::label).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("duplicate agent label {:?}", w[0])));
        }
        let mdp = self.env.mdp()?;
        mdp.check_state(self.env.initial())?;
        for &variance in &self.demand.variances {
            self.demand.distribution(variance)?;
        }
        for agent in &self.agents {
            agent.config(&self.training, self.models[0], 0)?;
        }
        if self.agents.iter().any(|a| a.transfer) && self.transfer.horizon == 0 {
            return Err(Error::Config("transfer horizon must be positive".into()));
        }
        Ok(())
    }

    fn uses_transfer(&self) -> bool {
        self.agents.iter().any(|a| a.transfer)
    }

    /// Seed shared by every agent in one (variance, replication) cell.
    pub fn run_seed(&self, variance: f64, replication: usize) -> u64 {
        seeding::derive(self.seed, &[variance.to_bits(), replication as u64])
    }
}

/// Recursive table merge. A table whose `kind` tag changes is replaced
/// whole, since the other variant's fields would not fit.
fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o))
                if o.get("kind").is_none_or(|k| b.get("kind") == Some(k)) =>
            {
                merge(b, o)
            }
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Train,
    Test,
}

/// One episode (training) or one repetition (testing) of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment: String,
    pub sigma2: f64,
    pub model: ModelVariant,
    pub agent: String,
    pub algorithm: Algorithm,
    pub transfer: bool,
    pub replication: usize,
    pub phase: Phase,
    /// Episode or repetition index.
    pub index: usize,
    pub days: usize,
    pub total_cost: f64,
    pub shortage_fraction: f64,
    pub average_holding: f64,
    pub planning_steps: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub daily_costs: Option<Vec<f64>>,
}

/// Estimated probability of the tracked transition after one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub sigma2: f64,
    pub model: ModelVariant,
    pub agent: String,
    pub replication: usize,
    pub iteration: usize,
    /// `None` while the pair is unvisited.
    pub estimate: Option<f64>,
    pub truth: f64,
}

/// Wall-clock time of one training run; kept apart from the records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub sigma2: f64,
    pub model: ModelVariant,
    pub agent: String,
    pub replication: usize,
    pub seconds_per_episode: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    pub transitions: Vec<TransitionRecord>,
    pub timings: Vec<Timing>,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    variance_index: usize,
    model: ModelVariant,
    replication: usize,
    agent: usize,
}

/// Options of a harness invocation that are not part of the experiment.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; all available cores when `None`.
    pub workers: Option<usize>,
    /// Keep per-day costs in training records.
    pub daily_costs: bool,
}

/// Runs every cell of the experiment on a worker pool. Output order is the
/// grid order and independent of the number of workers.
pub fn run_experiment(spec: &ExperimentSpec, options: RunOptions) -> Result<ExperimentOutput> {
    spec.validate()?;
    let pool = pool(options.workers)?;
    pool.install(|| run_in_pool(spec, options))
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

fn run_in_pool(spec: &ExperimentSpec, options: RunOptions) -> Result<ExperimentOutput> {
    let mdp = spec.env.mdp()?;
    let warm_starts = if spec.uses_transfer() {
        let forecaster = train_forecaster(spec)?;
        build_warm_starts(spec, &forecaster, &mdp)?
    } else {
        Vec::new()
    };

    let mut cells = Vec::new();
    for variance_index in 0..spec.demand.variances.len() {
        for &model in &spec.models {
            for replication in 0..spec.replications {
                for agent in 0..spec.agents.len() {
                    cells.push(Cell {
                        variance_index,
                        model,
                        replication,
                        agent,
                    });
                }
            }
        }
    }

    let results: Vec<Result<ExperimentOutput>> = cells
        .par_iter()
        .map(|cell| {
            let warm = if spec.agents[cell.agent].transfer {
                let m = spec
                    .models
                    .iter()
                    .position(|&m| m == cell.model)
                    .expect("model in grid");
                Some(&warm_starts[m * spec.replications + cell.replication])
            } else {
                None
            };
            run_cell(spec, &mdp, *cell, warm, options)
        })
        .collect();

    let mut out = ExperimentOutput::default();
    for r in results {
        let r = r?;
        out.records.extend(r.records);
        out.transitions.extend(r.transitions);
        out.timings.extend(r.timings);
    }
    Ok(out)
}

/// Fits the forecaster on the configured history. One per experiment.
pub fn train_forecaster(spec: &ExperimentSpec) -> Result<Forecaster> {
    let history = spec
        .transfer
        .history
        .load(spec.demand.max_demand, spec.seed)?;
    let mut rng = seeding::rng(
        seeding::derive(spec.seed, &[label_key("forecaster")]),
        Stream::Transfer,
    );
    forecast::train_forecaster(&history, &spec.transfer.forecast, &mut rng)
}

/// Generates the offline series for one replication and learns a warm start
/// of the given model variant from it.
pub fn warm_start_for(
    spec: &ExperimentSpec,
    forecaster: &Forecaster,
    mdp: &InventoryMdp,
    model: ModelVariant,
    replication: usize,
) -> Result<WarmStart> {
    let start = match spec.transfer.start {
        Some(d) => d,
        None => forecaster
            .last_date()
            .succ_opt()
            .ok_or_else(|| Error::Config("history ends at the end of the calendar".into()))?,
    };
    let mut rng = seeding::rng(
        seeding::derive(spec.seed, &[label_key("offline"), replication as u64]),
        Stream::Transfer,
    );
    let series = forecast::generate_offline(forecaster, start, spec.transfer.horizon, &mut rng)?;
    let mut config = WarmStartConfig {
        model,
        net: spec.training.net,
        ..spec.transfer.warm_start
    };
    if config.episode_days == 0 {
        config.episode_days = spec.training.horizon;
    }
    forecast::build_warm_start(
        &series,
        mdp,
        spec.env.initial(),
        spec.demand.max_demand,
        &config,
        seeding::derive(spec.seed, &[label_key("warm-start"), replication as u64]),
    )
}

fn build_warm_starts(
    spec: &ExperimentSpec,
    forecaster: &Forecaster,
    mdp: &InventoryMdp,
) -> Result<Vec<WarmStart>> {
    let jobs: Vec<(ModelVariant, usize)> = spec
        .models
        .iter()
        .flat_map(|&m| (0..spec.replications).map(move |r| (m, r)))
        .collect();
    jobs.par_iter()
        .map(|&(model, replication)| warm_start_for(spec, forecaster, mdp, model, replication))
        .collect()
}

fn run_cell(
    spec: &ExperimentSpec,
    mdp: &InventoryMdp,
    cell: Cell,
    warm: Option<&WarmStart>,
    options: RunOptions,
) -> Result<ExperimentOutput> {
    let variance = spec.demand.variances[cell.variance_index];
    let agent_spec = &spec.agents[cell.agent];
    let label = agent_spec.label();
    let seed = spec.run_seed(variance, cell.replication);
    let dist = spec.demand.distribution(variance)?;
    let mut config = agent_spec.config(&spec.training, cell.model, seed)?;
    if let Some(ws) = warm {
        config = config.with_warm_start(ws.clone());
    }

    let (state, action, next) = spec.tracked.parts();
    let truth = tracked_truth(&dist, state, action, next);
    let mut transitions = Vec::new();
    let track = spec.scenario == Scenario::Fig3;
    let mut probe_rng = seeding::rng(seed, Stream::Evaluation);
    let agent = agents::train_observed(
        &config,
        DemandSource::Distribution(&dist),
        mdp,
        spec.env.initial(),
        |episode, agent: &TrainedAgent| {
            if track {
                transitions.push(TransitionRecord {
                    sigma2: variance,
                    model: cell.model,
                    agent: label.clone(),
                    replication: cell.replication,
                    iteration: episode + 1,
                    estimate: agent
                        .model
                        .transition_prob(state, action, next, &mut probe_rng)
                        .ok(),
                    truth,
                });
            }
        },
    )?;

    let mut records = training_records(
        spec,
        cell.variance_index,
        cell.model,
        cell.agent,
        cell.replication,
        &agent.metrics,
        options.daily_costs,
    );
    if spec.training.test_days > 0 && spec.training.test_repetitions > 0 {
        let mut rng = seeding::rng(seed, Stream::Evaluation);
        let tests = agents::evaluate(
            &agent.q,
            &dist,
            mdp,
            spec.env.initial(),
            spec.training.test_days,
            spec.training.test_repetitions,
            &mut rng,
        )?;
        records.extend(tests.iter().enumerate().map(|(i, m)| {
            let at = RecordAt {
                variance_index: cell.variance_index,
                model: cell.model,
                agent: cell.agent,
                replication: cell.replication,
            };
            run_record(spec, at, Phase::Test, i, m, false)
        }));
    }
    let timings = vec![Timing {
        sigma2: variance,
        model: cell.model,
        agent: label.clone(),
        replication: cell.replication,
        seconds_per_episode: agent.training_seconds() / agent.metrics.len() as f64,
    }];
    Ok(ExperimentOutput {
        records,
        transitions,
        timings,
    })
}

/// Configuration of agent `agent` of the experiment for one run.
pub fn agent_config(
    spec: &ExperimentSpec,
    agent: usize,
    model: ModelVariant,
    seed: u64,
) -> Result<AgentConfig> {
    spec.agents[agent].config(&spec.training, model, seed)
}

/// Position of a run in the experiment grid.
#[derive(Debug, Clone, Copy)]
struct RecordAt {
    variance_index: usize,
    model: ModelVariant,
    agent: usize,
    replication: usize,
}

fn run_record(
    spec: &ExperimentSpec,
    at: RecordAt,
    phase: Phase,
    index: usize,
    m: &RunMetrics,
    daily_costs: bool,
) -> RunRecord {
    let agent_spec = &spec.agents[at.agent];
    RunRecord {
        experiment: spec.name.clone(),
        sigma2: spec.demand.variances[at.variance_index],
        model: at.model,
        agent: agent_spec.label(),
        algorithm: agent_spec.algorithm,
        transfer: agent_spec.transfer,
        replication: at.replication,
        phase,
        index,
        days: m.days(),
        total_cost: m.total_cost,
        shortage_fraction: m.shortage_fraction,
        average_holding: m.average_holding,
        planning_steps: m.planning_steps,
        daily_costs: daily_costs.then(|| m.daily_costs.clone()),
    }
}

/// Training-phase records of one run, one per episode.
pub fn training_records(
    spec: &ExperimentSpec,
    variance_index: usize,
    model: ModelVariant,
    agent: usize,
    replication: usize,
    metrics: &[RunMetrics],
    daily_costs: bool,
) -> Vec<RunRecord> {
    let at = RecordAt {
        variance_index,
        model,
        agent,
        replication,
    };
    metrics
        .iter()
        .enumerate()
        .map(|(i, m)| run_record(spec, at, Phase::Train, i, m, daily_costs))
        .collect()
}

/// True probability of moving `state → next` under `action`.
pub fn tracked_truth(
    dist: &DemandDistribution,
    state: InventoryState,
    action: Action,
    next: InventoryState,
) -> f64 {
    let received = crate::env::age(state, action);
    dist.pmf()
        .iter()
        .enumerate()
        .filter(|(d, _)| crate::env::consume_demand(received, *d as u32) == next)
        .map(|(_, p)| p)
        .sum()
}

/// Writes one JSON object per line.
pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                row: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes records, summaries and the text report for `spec` into `dir`.
/// Everything but `timings.csv` is a pure function of (config, seed).
pub fn write_outputs(
    spec: &ExperimentSpec,
    output: &ExperimentOutput,
    dir: impl AsRef<Path>,
) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    std::fs::write(dir.join("config.toml"), spec.to_toml()?)
        .map_err(|e| Error::io(dir.join("config.toml"), e))?;
    write_jsonl(dir.join("records.jsonl"), &output.records)?;
    write_csv(dir.join("timings.csv"), &output.timings)?;
    match spec.scenario {
        Scenario::Table1 => write_csv(dir.join("table1.csv"), &table1_summary(&output.records))?,
        Scenario::Scenario1 => write_csv(
            dir.join("scenario1.csv"),
            &scenario_summary(&output.records, Phase::Train),
        )?,
        Scenario::Scenario2 => {
            write_csv(
                dir.join("scenario2_train.csv"),
                &scenario_summary(&output.records, Phase::Train),
            )?;
            write_csv(
                dir.join("scenario2_test.csv"),
                &scenario_summary(&output.records, Phase::Test),
            )?;
        }
        Scenario::Fig3 => {
            write_jsonl(dir.join("transitions.jsonl"), &output.transitions)?;
            write_csv(dir.join("fig3.csv"), &fig3_summary(&output.transitions))?;
        }
        Scenario::Train => write_csv(dir.join("fig2.csv"), &convergence_series(&output.records))?,
    }
    let report = write_report(spec.scenario, &output.records, &output.transitions);
    std::fs::write(dir.join("report.txt"), report).map_err(|e| Error::io(dir.join("report.txt"), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip_through_toml() {
        for scenario in [
            Scenario::Train,
            Scenario::Table1,
            Scenario::Scenario1,
            Scenario::Scenario2,
            Scenario::Fig3,
        ] {
            let spec = ExperimentSpec::preset(scenario);
            spec.validate().unwrap();
            let text = spec.to_toml().unwrap();
            assert_eq!(
                ExperimentSpec::from_toml(&text, Scenario::Train).unwrap(),
                spec,
                "{scenario:?}"
            );
        }
    }

    #[test]
    fn overlay_changes_only_named_fields() {
        let spec = ExperimentSpec::from_toml(
            "seed = 7\n[training]\nepisodes = 3\n[training.hyperparameters]\nalpha = 0.2\n",
            Scenario::Scenario2,
        )
        .unwrap();
        let preset = ExperimentSpec::preset(Scenario::Scenario2);
        assert_eq!(spec.seed, 7);
        assert_eq!(spec.training.episodes, 3);
        assert_eq!(spec.training.hyperparameters.alpha, 0.2);
        assert_eq!(
            spec.training.hyperparameters.gamma,
            preset.training.hyperparameters.gamma
        );
        assert_eq!(spec.training.horizon, 30);
        assert_eq!(spec.agents, preset.agents);
    }

    #[test]
    fn overlay_switching_kind_replaces_the_table() {
        let spec = ExperimentSpec::from_toml(
            "[transfer.history]\nkind = \"dataset\"\npath = \"sales.csv\"\nproduct = \"bread\"\n",
            Scenario::Scenario1,
        )
        .unwrap();
        assert!(
            matches!(spec.transfer.history, HistorySource::Dataset { ref product, .. } if product == "bread")
        );
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(ExperimentSpec::from_toml("agents = []", Scenario::Table1).is_err());
        assert!(ExperimentSpec::from_toml("unknown_key = 1", Scenario::Table1).is_err());
        assert!(ExperimentSpec::from_toml("replications = 0", Scenario::Table1).is_err());
        assert!(ExperimentSpec::from_toml(
            "[[agents]]\nalgorithm = \"q-learning\"\nplanning = { kind = \"constant\", value = 5.0 }\n",
            Scenario::Table1
        )
        .is_err());
        assert!(ExperimentSpec::from_toml(
            "[[agents]]\nalgorithm = \"dyna-q\"\n[[agents]]\nalgorithm = \"dyna-q\"\n",
            Scenario::Table1
        )
        .is_err());
    }

    #[test]
    fn tracked_truth_is_the_demand_mass() {
        let dist = DemandDistribution::discretized_gamma(5.0, 5.0, 10).unwrap();
        let (s, a, n) = TrackedTransition::default().parts();
        assert_eq!(tracked_truth(&dist, s, a, n), dist.prob(2));
    }

    fn tiny(scenario: Scenario) -> ExperimentSpec {
        let mut spec = ExperimentSpec::preset(scenario);
        spec.replications = 2;
        spec.training.episodes = 3;
        spec.training.horizon = 10;
        spec.transfer.forecast.epochs = 1;
        spec.transfer.warm_start.epochs = 2;
        spec
    }

    #[test]
    fn output_is_independent_of_worker_count() {
        let spec = tiny(Scenario::Scenario2);
        let a = run_experiment(
            &spec,
            RunOptions {
                workers: Some(1),
                daily_costs: false,
            },
        )
        .unwrap();
        let b = run_experiment(
            &spec,
            RunOptions {
                workers: Some(3),
                daily_costs: false,
            },
        )
        .unwrap();
        assert_eq!(a.records, b.records);
        let per_agent = spec.training.episodes + spec.training.test_repetitions;
        assert_eq!(
            a.records.len(),
            spec.replications * spec.agents.len() * per_agent
        );
    }

    #[test]
    fn fig3_emits_one_estimate_per_iteration() {
        let spec = tiny(Scenario::Fig3);
        let out = run_experiment(&spec, RunOptions::default()).unwrap();
        assert_eq!(
            out.transitions.len(),
            spec.replications * spec.agents.len() * spec.training.episodes
        );
    }
}
