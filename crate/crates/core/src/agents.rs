//! Training loops for Q-learning, classic Dyna-Q and adjusted Dyna-Q, plus
//! greedy-policy evaluation.
//!
//! All three share one loop. Per real step `t` (counted across episodes):
//! read ε and the planning depth from their schedules, act ε-greedily, draw
//! the day's demand, update Q and the model from the real transition, then
//! run the planning updates on pairs sampled from the model's memory.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::demand::DemandDistribution;
use crate::env::{Action, InventoryMdp, InventoryState};
use crate::envmodel::{EnvModel, ModelVariant, NetModelConfig};
use crate::error::{Error, Result};
use crate::forecast::WarmStart;
use crate::metrics::{EpisodeRecorder, RunMetrics};
use crate::qcore::QTable;
use crate::schedule::Schedule;
use crate::seeding::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    QLearning,
    DynaQ,
    AdjustedDynaQ,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::AdjustedDynaQ,
        Algorithm::DynaQ,
        Algorithm::QLearning,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::QLearning => "q-learning",
            Algorithm::DynaQ => "dyna-q",
            Algorithm::AdjustedDynaQ => "adjusted-dyna-q",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

/// Exploration and planning settings shared by an experiment's algorithms.
///
/// Adjusted Dyna-Q decays both quantities; classic Dyna-Q holds them at
/// their initial values; Q-learning decays ε and never plans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_initial: f64,
    pub epsilon_floor: f64,
    pub epsilon_smoothing: f64,
    pub planning_initial: f64,
    pub planning_floor: f64,
    pub planning_smoothing: f64,
}

impl Hyperparameters {
    /// Settings of the convergence and three-algorithm comparison runs.
    pub const COMPARISON: Hyperparameters = Hyperparameters {
        alpha: 0.3,
        gamma: 0.9,
        epsilon_initial: 0.4,
        epsilon_floor: 0.1,
        epsilon_smoothing: 7500.0,
        planning_initial: 100.0,
        planning_floor: 10.0,
        planning_smoothing: 5000.0,
    };

    /// Cold-start training scenario.
    pub const TRAINING_SCENARIO: Hyperparameters = Hyperparameters {
        alpha: 0.1,
        gamma: 0.9,
        epsilon_initial: 0.4,
        epsilon_floor: 0.0,
        epsilon_smoothing: 1000.0,
        planning_initial: 100.0,
        planning_floor: 0.0,
        planning_smoothing: 1000.0,
    };

    /// Train-then-test scenario.
    pub const TESTING_SCENARIO: Hyperparameters = Hyperparameters {
        alpha: 0.1,
        gamma: 0.9,
        epsilon_initial: 0.3,
        epsilon_floor: 0.1,
        epsilon_smoothing: 1000.0,
        planning_initial: 20.0,
        planning_floor: 10.0,
        planning_smoothing: 1000.0,
    };

    pub fn exploration(&self, algorithm: Algorithm) -> Result<Schedule> {
        match algorithm {
            Algorithm::DynaQ => Ok(Schedule::constant(self.epsilon_initial)),
            Algorithm::QLearning | Algorithm::AdjustedDynaQ => Schedule::stc(
                self.epsilon_initial,
                self.epsilon_floor,
                self.epsilon_smoothing,
            ),
        }
    }

    pub fn planning(&self, algorithm: Algorithm) -> Result<Schedule> {
        match algorithm {
            Algorithm::QLearning => Ok(Schedule::ZERO),
            Algorithm::DynaQ => Ok(Schedule::constant(self.planning_initial)),
            Algorithm::AdjustedDynaQ => Schedule::stc(
                self.planning_initial,
                self.planning_floor,
                self.planning_smoothing,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub gamma: f64,
    pub exploration: Schedule,
    pub planning: Schedule,
    pub model: ModelVariant,
    #[serde(default)]
    pub net: NetModelConfig,
    /// Days per episode.
    pub horizon: usize,
    pub episodes: usize,
    pub seed: u64,
    #[serde(skip)]
    pub warm_start: Option<WarmStart>,
}

impl AgentConfig {
    pub fn from_hyperparameters(
        algorithm: Algorithm,
        hp: &Hyperparameters,
        model: ModelVariant,
        horizon: usize,
        episodes: usize,
        seed: u64,
    ) -> Result<Self> {
        let config = Self {
            algorithm,
            alpha: hp.alpha,
            gamma: hp.gamma,
            exploration: hp.exploration(algorithm)?,
            planning: hp.planning(algorithm)?,
            model,
            net: NetModelConfig::default(),
            horizon,
            episodes,
            seed,
            warm_start: None,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_warm_start(mut self, warm_start: WarmStart) -> Self {
        self.warm_start = Some(warm_start);
        self
    }

    /// Checks the schedules agree with the algorithm tag.
    pub fn validate(&self) -> Result<()> {
        let ok = match self.algorithm {
            Algorithm::QLearning => self.planning.is_zero(),
            Algorithm::DynaQ => !self.exploration.is_stc() && !self.planning.is_stc(),
            Algorithm::AdjustedDynaQ => self.exploration.is_stc() && self.planning.is_stc(),
        };
        if !ok {
            return Err(Error::Config(format!(
                "{} does not accept exploration {:?} with planning {:?}",
                self.algorithm, self.exploration, self.planning
            )));
        }
        if let Schedule::Constant { value } = self.exploration {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Config(format!("epsilon {value} outside [0, 1]")));
            }
        }
        if let Schedule::Stc(s) = self.exploration {
            if s.initial > 1.0 {
                return Err(Error::Config(format!(
                    "epsilon {} outside [0, 1]",
                    s.initial
                )));
            }
        }
        if let Schedule::Constant { value } = self.planning {
            if value < 0.0 {
                return Err(Error::Config("planning steps must be non-negative".into()));
            }
        }
        if self.horizon == 0 || self.episodes == 0 {
            return Err(Error::Config(
                "horizon and episode count must be positive".into(),
            ));
        }
        if let Some(ws) = &self.warm_start {
            if ws.model.variant() != self.model {
                return Err(Error::Config(format!(
                    "warm start carries a {} model but the agent uses {}",
                    ws.model.variant(),
                    self.model
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainedAgent {
    pub q: QTable,
    pub model: EnvModel,
    pub metrics: Vec<RunMetrics>,
}

impl TrainedAgent {
    pub fn total_planning_steps(&self) -> u64 {
        self.metrics.iter().map(|m| m.planning_steps).sum()
    }

    pub fn training_seconds(&self) -> f64 {
        self.metrics.iter().map(|m| m.wall_seconds).sum()
    }
}

/// Where a run's daily demand comes from.
#[derive(Debug, Clone, Copy)]
pub enum DemandSource<'a> {
    Distribution(&'a DemandDistribution),
    /// Replays a fixed sequence from its start in every episode, wrapping
    /// when an episode is longer than the sequence. `max_demand` sets the
    /// number of demand classes of a freshly built model.
    Replay {
        demands: &'a [u32],
        max_demand: u32,
    },
}

impl DemandSource<'_> {
    fn draw<R: Rng + ?Sized>(&self, day: usize, rng: &mut R) -> u32 {
        match self {
            DemandSource::Distribution(d) => d.sample(rng),
            DemandSource::Replay { demands, .. } => demands[day % demands.len()],
        }
    }

    fn classes(&self) -> u32 {
        match self {
            DemandSource::Distribution(d) => d.max_demand(),
            DemandSource::Replay { max_demand, .. } => *max_demand,
        }
    }

    fn largest(&self) -> u32 {
        match self {
            DemandSource::Distribution(d) => d.max_demand(),
            DemandSource::Replay { demands, .. } => demands.iter().copied().max().unwrap_or(0),
        }
    }
}

/// Trains an agent against the true demand distribution.
pub fn train(
    config: &AgentConfig,
    true_demand: &DemandDistribution,
    mdp: &InventoryMdp,
    initial_state: InventoryState,
) -> Result<TrainedAgent> {
    train_observed(
        config,
        DemandSource::Distribution(true_demand),
        mdp,
        initial_state,
        |_, _| {},
    )
}

/// [`train`] with a demand source and a callback run after every episode.
pub fn train_observed<F>(
    config: &AgentConfig,
    source: DemandSource<'_>,
    mdp: &InventoryMdp,
    initial_state: InventoryState,
    mut after_episode: F,
) -> Result<TrainedAgent>
where
    F: FnMut(usize, &TrainedAgent),
{
    config.validate()?;
    mdp.check_state(initial_state)?;
    if let DemandSource::Replay { demands: [], .. } = source {
        return Err(Error::domain("cannot replay an empty demand sequence"));
    }
    let max_demand = match &config.warm_start {
        Some(ws) => ws.model.max_demand(),
        None => source.classes(),
    };
    if source.largest() > max_demand {
        return Err(Error::domain(format!(
            "demand up to {} exceeds the model's {max_demand} classes",
            source.largest()
        )));
    }

    let mut env_rng = seeding::rng(config.seed, Stream::Environment);
    let mut explore_rng = seeding::rng(config.seed, Stream::Exploration);
    let mut plan_rng = seeding::rng(config.seed, Stream::Planning);

    let (q, model) = match &config.warm_start {
        Some(ws) => (
            ws.q.with_params(config.alpha, config.gamma)?,
            ws.model.clone(),
        ),
        None => {
            let mut init_rng = seeding::rng(config.seed, Stream::ModelInit);
            (
                QTable::new(
                    mdp.num_states(),
                    mdp.num_actions(),
                    config.alpha,
                    config.gamma,
                )?,
                EnvModel::new(config.model, *mdp, max_demand, &config.net, &mut init_rng)?,
            )
        }
    };
    if model.mdp() != mdp {
        return Err(Error::Config(
            "warm-start model was built for a different MDP".into(),
        ));
    }
    let mut agent = TrainedAgent {
        q,
        model,
        metrics: Vec::with_capacity(config.episodes),
    };

    let mut t: u64 = 0;
    for episode in 0..config.episodes {
        let started = Instant::now();
        let mut recorder = EpisodeRecorder::default();
        let mut state = initial_state;
        for day in 0..config.horizon {
            let epsilon = config.exploration.value(t);
            let planning_steps = config.planning.steps(t);

            let s = mdp.state_index(state);
            let a = agent.q.select_action(s, epsilon, &mut explore_rng);
            let action = mdp.action_at(a);
            let demand = source.draw(day, &mut env_rng);
            let out = mdp.step(state, action, demand)?;
            agent
                .q
                .update(s, a, out.cost, mdp.state_index(out.next_state))?;
            agent
                .model
                .update(state, action, out.next_state, out.cost, &mut plan_rng)?;
            recorder.record(out.cost, out.shortage, out.received.total());
            state = out.next_state;

            plan(&mut agent, mdp, planning_steps, &mut plan_rng)?;
            recorder.planning_steps += planning_steps as u64;
            t += 1;
        }
        agent
            .metrics
            .push(recorder.finish(started.elapsed().as_secs_f64()));
        after_episode(episode, &agent);
    }
    Ok(agent)
}

fn plan(
    agent: &mut TrainedAgent,
    mdp: &InventoryMdp,
    steps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    for _ in 0..steps {
        let (state, action) = agent.model.sample_visited(rng)?;
        let (next, cost) = agent.model.simulate(state, action, rng)?;
        agent.q.update(
            mdp.state_index(state),
            mdp.action_index(action),
            cost,
            mdp.state_index(next),
        )?;
    }
    Ok(())
}

/// Runs the greedy policy (lowest-index tie-break) for `days` per
/// repetition against fresh demand draws from `rng`.
pub fn evaluate<R: Rng + ?Sized>(
    q: &QTable,
    true_demand: &DemandDistribution,
    mdp: &InventoryMdp,
    initial_state: InventoryState,
    days: usize,
    repetitions: usize,
    rng: &mut R,
) -> Result<Vec<RunMetrics>> {
    if q.num_states() != mdp.num_states() || q.num_actions() != mdp.num_actions() {
        return Err(Error::Dimension {
            expected: mdp.num_states() * mdp.num_actions(),
            actual: q.num_states() * q.num_actions(),
        });
    }
    mdp.check_state(initial_state)?;
    let policy = q.greedy_policy();
    (0..repetitions)
        .map(|_| {
            let started = Instant::now();
            let mut recorder = EpisodeRecorder::default();
            let mut state = initial_state;
            for _ in 0..days {
                let action = Action(policy[mdp.state_index(state)] as u32);
                let out = mdp.step(state, action, true_demand.sample(rng))?;
                recorder.record(out.cost, out.shortage, out.received.total());
                state = out.next_state;
            }
            Ok(recorder.finish(started.elapsed().as_secs_f64()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::CostParams;
    use crate::schedule::StcSchedule;

    fn mdp() -> InventoryMdp {
        InventoryMdp::default()
    }

    fn config(algorithm: Algorithm, episodes: usize, seed: u64) -> AgentConfig {
        AgentConfig::from_hyperparameters(
            algorithm,
            &Hyperparameters::COMPARISON,
            ModelVariant::Tabular,
            30,
            episodes,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn config_consistency() {
        let mut c = config(Algorithm::QLearning, 1, 0);
        c.planning = Schedule::constant(5.0);
        assert!(c.validate().is_err());

        let mut c = config(Algorithm::DynaQ, 1, 0);
        c.exploration = Schedule::Stc(StcSchedule::new(0.4, 0.1, 10.0).unwrap());
        assert!(c.validate().is_err());

        let mut c = config(Algorithm::AdjustedDynaQ, 1, 0);
        c.planning = Schedule::constant(10.0);
        assert!(c.validate().is_err());

        let mut c = config(Algorithm::DynaQ, 1, 0);
        c.exploration = Schedule::constant(1.5);
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_planning_matches_reference_q_learning() {
        let demand = DemandDistribution::discretized_gamma(5.0, 5.0, 10).unwrap();
        let cfg = config(Algorithm::QLearning, 5, 17);
        let agent = train(&cfg, &demand, &mdp(), InventoryState::new(0, 0, 5)).unwrap();

        // Independent plain loop over the same streams.
        let m = mdp();
        let mut q = QTable::new(m.num_states(), m.num_actions(), 0.3, 0.9).unwrap();
        let mut env_rng = seeding::rng(17, Stream::Environment);
        let mut explore_rng = seeding::rng(17, Stream::Exploration);
        let mut t = 0u64;
        for _ in 0..5 {
            let mut state = InventoryState::new(0, 0, 5);
            for _ in 0..30 {
                let s = m.state_index(state);
                let a = q.select_action(s, cfg.exploration.value(t), &mut explore_rng);
                let d = demand.sample(&mut env_rng);
                let out = m.step(state, Action(a as u32), d).unwrap();
                q.update(s, a, out.cost, m.state_index(out.next_state))
                    .unwrap();
                state = out.next_state;
                t += 1;
            }
        }
        assert_eq!(agent.q, q);
        assert_eq!(agent.total_planning_steps(), 0);
    }

    #[test]
    fn zero_demand_means_never_order() {
        let demand = DemandDistribution::point_mass(0, 10).unwrap();
        for algorithm in Algorithm::ALL {
            let cfg = config(algorithm, 40, 3);
            let agent = train(&cfg, &demand, &mdp(), InventoryState::new(0, 0, 5)).unwrap();
            assert_eq!(
                agent
                    .q
                    .greedy_action(mdp().state_index(InventoryState::EMPTY)),
                0,
                "{algorithm}"
            );
        }
    }

    #[test]
    fn metrics_length_and_planning_counts() {
        let demand = DemandDistribution::discretized_gamma(5.0, 5.0, 10).unwrap();
        let agent = train(
            &config(Algorithm::DynaQ, 3, 1),
            &demand,
            &mdp(),
            InventoryState::new(0, 0, 5),
        )
        .unwrap();
        assert_eq!(agent.metrics.len(), 3);
        assert!(agent.metrics.iter().all(|m| m.planning_steps == 30 * 100));
        assert!(agent.metrics.iter().all(|m| m.days() == 30));
    }

    #[test]
    fn real_demand_stream_is_shared_across_algorithms() {
        // With a single action every algorithm takes the same decisions, so
        // the cost sequence is a function of the demand stream alone.
        let m = InventoryMdp::new(10, 0, CostParams::default()).unwrap();
        let demand = DemandDistribution::discretized_gamma(5.0, 5.0, 10).unwrap();
        let costs: Vec<Vec<f64>> = Algorithm::ALL
            .into_iter()
            .map(|algorithm| {
                let mut cfg = config(algorithm, 2, 99);
                cfg.horizon = 50;
                let agent = train(&cfg, &demand, &m, InventoryState::new(3, 2, 1)).unwrap();
                agent
                    .metrics
                    .iter()
                    .flat_map(|r| r.daily_costs.clone())
                    .collect()
            })
            .collect();
        assert_eq!(costs[0], costs[1]);
        assert_eq!(costs[1], costs[2]);
    }

    #[test]
    fn evaluation() {
        let m = mdp();
        let zero = DemandDistribution::point_mass(0, 10).unwrap();
        let q = QTable::new(m.num_states(), m.num_actions(), 0.3, 0.9).unwrap();
        let mut rng = seeding::rng(1, Stream::Evaluation);
        let runs = evaluate(&q, &zero, &m, InventoryState::EMPTY, 30, 100, &mut rng).unwrap();
        assert_eq!(runs.len(), 100);
        assert!(runs
            .iter()
            .all(|r| r.total_cost == 0.0 && r.shortage_fraction == 0.0));

        let demand = DemandDistribution::discretized_gamma(5.0, 5.0, 10).unwrap();
        let a = evaluate(
            &q,
            &demand,
            &m,
            InventoryState::new(0, 0, 5),
            30,
            5,
            &mut seeding::rng(2, Stream::Evaluation),
        )
        .unwrap();
        let b = evaluate(
            &q,
            &demand,
            &m,
            InventoryState::new(0, 0, 5),
            30,
            5,
            &mut seeding::rng(2, Stream::Evaluation),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn replay_source_wraps() {
        let seq = [3, 0];
        let src = DemandSource::Replay {
            demands: &seq,
            max_demand: 10,
        };
        let mut rng = seeding::rng(0, Stream::Environment);
        let days: Vec<u32> = (0..5).map(|d| src.draw(d, &mut rng)).collect();
        assert_eq!(days, vec![3, 0, 3, 0, 3]);
    }
}
