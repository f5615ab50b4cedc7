//! Demand forecasting for a product without history, and the warm start
//! built from the forecast.
//!
//! A dropout network is fitted on a similar product's daily demand, rolled
//! forward to produce a short synthetic series, and Q-learning on that
//! series yields the initial Q-table and environment model.

use std::path::Path;

use chrono::{Days, NaiveDate};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{self, AgentConfig, Algorithm, DemandSource};
use crate::demand::{
    self, DemandSeries, FeatureVector, TransactionFormat, DEFAULT_MAX_DEMAND, DEFAULT_WINDOW,
};
use crate::env::{InventoryMdp, InventoryState};
use crate::envmodel::{EnvModel, ModelVariant, NetModelConfig};
use crate::error::{Error, Result};
use crate::nn::{Adam, Head, Network, DEFAULT_LEARNING_RATE};
use crate::qcore::QTable;
use crate::schedule::Schedule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastConfig {
    /// Lagged days fed to the network.
    pub window: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    /// Forecasts are clamped to `[0, max_demand]`; also the scale of inputs
    /// and targets.
    pub max_demand: u32,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            epochs: 30,
            batch_size: 32,
            learning_rate: DEFAULT_LEARNING_RATE,
            dropout: 0.5,
            max_demand: DEFAULT_MAX_DEMAND,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forecaster {
    net: Network,
    window: usize,
    max_demand: u32,
    /// The last `window` days of the training series.
    tail: DemandSeries,
}

impl Forecaster {
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn max_demand(&self) -> u32 {
        self.max_demand
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    /// Last observed day of the training series.
    pub fn last_date(&self) -> NaiveDate {
        self.tail
            .end_date()
            .expect("forecaster tail is never empty")
    }

    fn scaled_input(&self, features: &FeatureVector) -> Vec<f64> {
        scale_input(features, self.max_demand)
    }

    /// Predictive mean and variance (in demand units) of `samples` dropout
    /// passes for the day after `recent`.
    pub fn predict<R: Rng + ?Sized>(
        &self,
        recent: &[u32],
        previous_day: NaiveDate,
        samples: usize,
        rng: &mut R,
    ) -> Result<(f64, f64)> {
        if recent.len() != self.window {
            return Err(Error::Dimension {
                expected: self.window,
                actual: recent.len(),
            });
        }
        let input = self.scaled_input(&FeatureVector::from_recent(recent, previous_day));
        let p = self.net.mc_predict(&input, samples, rng)?;
        let scale = f64::from(self.max_demand);
        Ok((p.mean[0] * scale, p.variance[0] * scale * scale))
    }

    /// One stochastic forward pass, rounded half-up and clamped to
    /// `[0, max_demand]`.
    fn sample_demand<R: Rng + ?Sized>(
        &self,
        recent: &[u32],
        previous_day: NaiveDate,
        rng: &mut R,
    ) -> Result<u32> {
        let input = self.scaled_input(&FeatureVector::from_recent(recent, previous_day));
        let y = self.net.forward(&input, true, rng)?[0] * f64::from(self.max_demand);
        Ok(round_clamp(y, self.max_demand))
    }
}

fn scale_input(features: &FeatureVector, max_demand: u32) -> Vec<f64> {
    let scale = f64::from(max_demand.max(1));
    let mut v: Vec<f64> = features.numeric.iter().map(|x| x / scale).collect();
    v.extend_from_slice(&features.calendar);
    v
}

fn round_clamp(y: f64, max_demand: u32) -> u32 {
    if !y.is_finite() || y <= 0.0 {
        return 0;
    }
    // f64::round rounds halves away from zero, i.e. up for positive values.
    (y.round() as u64).min(u64::from(max_demand)) as u32
}

/// Fits a dropout network on (features, next-day demand) pairs by
/// minibatch Adam on squared error.
pub fn train_forecaster<R: Rng + ?Sized>(
    series: &DemandSeries,
    config: &ForecastConfig,
    rng: &mut R,
) -> Result<Forecaster> {
    let w = config.window;
    if w == 0 {
        return Err(Error::domain("forecast window must be at least 1"));
    }
    if series.len() <= w + 1 {
        return Err(Error::domain(format!(
            "a window of {w} needs more than {} days of history, got {}",
            w + 1,
            series.len()
        )));
    }
    if config.batch_size == 0 || config.max_demand == 0 {
        return Err(Error::Config(
            "batch size and max demand must be positive".into(),
        ));
    }
    let scale = f64::from(config.max_demand);
    let mut inputs = Vec::with_capacity(series.len() - w);
    let mut targets = Vec::with_capacity(series.len() - w);
    for day in w..series.len() {
        inputs.push(scale_input(
            &demand::extract_features(series, day, w)?,
            config.max_demand,
        ));
        let d = series.quantities()[day].min(config.max_demand);
        targets.push(vec![f64::from(d) / scale]);
    }

    let mut net = Network::standard(
        FeatureVector::dimension(w),
        1,
        config.dropout,
        Head::Regression,
        rng,
    )?;
    let mut adam = Adam::new(&net, config.learning_rate);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut batch_x = Vec::with_capacity(config.batch_size);
    let mut batch_y = Vec::with_capacity(config.batch_size);
    for _ in 0..config.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(config.batch_size) {
            batch_x.clear();
            batch_y.clear();
            for &i in chunk {
                batch_x.push(inputs[i].clone());
                batch_y.push(targets[i].clone());
            }
            net.train_step(&mut adam, &batch_x, &batch_y, rng)?;
        }
    }

    let tail_start = series.len() - w;
    let tail = DemandSeries::new(
        series.dates()[tail_start..].to_vec(),
        series.quantities()[tail_start..].to_vec(),
    )?;
    Ok(Forecaster {
        net,
        window: w,
        max_demand: config.max_demand,
        tail,
    })
}

/// Autoregressive rollout of `horizon` days starting at `start`, one dropout
/// sample per day. Days between the end of the training data and `start`
/// are rolled forward the same way but not returned.
pub fn generate_offline<R: Rng + ?Sized>(
    forecaster: &Forecaster,
    start: NaiveDate,
    horizon: usize,
    rng: &mut R,
) -> Result<DemandSeries> {
    if horizon == 0 {
        return Err(Error::domain("forecast horizon must be at least 1"));
    }
    let last = forecaster.last_date();
    if start <= last {
        return Err(Error::domain(format!(
            "forecast start {start} must follow the last observed day {last}"
        )));
    }
    let gap = (start - last).num_days() as usize - 1;
    let mut history: Vec<u32> = forecaster.tail.quantities().to_vec();
    let mut previous = last;
    let mut out = Vec::with_capacity(horizon);
    for i in 0..gap + horizon {
        let recent = &history[history.len() - forecaster.window..];
        let d = forecaster.sample_demand(recent, previous, rng)?;
        history.push(d);
        if i >= gap {
            out.push(d);
        }
        previous = previous
            .checked_add_days(Days::new(1))
            .ok_or_else(|| Error::domain("forecast runs past the calendar"))?;
    }
    Ok(DemandSeries::from_start(start, out))
}

/// Offline Q-learning settings for building a warm start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WarmStartConfig {
    pub alpha: f64,
    pub gamma: f64,
    /// Constant exploration rate.
    pub epsilon: f64,
    /// Episodes of offline Q-learning, each from the initial state.
    pub epochs: usize,
    /// Days per offline episode, cycling through the series; zero means one
    /// pass over the series. The experiment harness maps zero to the online
    /// training horizon.
    pub episode_days: usize,
    pub model: ModelVariant,
    pub net: NetModelConfig,
}

impl Default for WarmStartConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 0.9,
            epsilon: 0.2,
            epochs: 50,
            episode_days: 0,
            model: ModelVariant::Tabular,
            net: NetModelConfig::default(),
        }
    }
}

/// Initial Q-table and model learned offline, with the series they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub q: QTable,
    pub model: EnvModel,
    pub series: DemandSeries,
}

impl WarmStart {
    /// Zero Q-table and an untrained model: behaves exactly like a cold start.
    pub fn empty(model: EnvModel) -> Self {
        let mdp = *model.mdp();
        Self {
            q: QTable::new(mdp.num_states(), mdp.num_actions(), 0.5, 0.5).expect("valid defaults"),
            model,
            series: DemandSeries::default(),
        }
    }

    /// Writes `q.json`, `model.bin` and `series.csv` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.q.save(dir.join("q.json"))?;
        self.model.save(dir.join("model.bin"))?;
        demand::write_transactions(
            dir.join("series.csv"),
            &self.series,
            "forecast",
            &TransactionFormat::default(),
        )
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let q = QTable::load(dir.join("q.json"))?;
        let model = EnvModel::load(dir.join("model.bin"))?;
        let series = demand::load_transactions(
            dir.join("series.csv"),
            "forecast",
            None,
            &TransactionFormat::default(),
        )?;
        Ok(Self { q, model, series })
    }
}

/// Runs Q-learning with constant exploration on `series` replayed from
/// `initial_state` for `config.epochs` passes, feeding every transition to
/// a fresh model.
pub fn build_warm_start(
    series: &DemandSeries,
    mdp: &InventoryMdp,
    initial_state: InventoryState,
    max_demand: u32,
    config: &WarmStartConfig,
    seed: u64,
) -> Result<WarmStart> {
    if series.is_empty() {
        return Err(Error::domain(
            "cannot build a warm start from an empty series",
        ));
    }
    let agent_config = AgentConfig {
        algorithm: Algorithm::QLearning,
        alpha: config.alpha,
        gamma: config.gamma,
        exploration: Schedule::constant(config.epsilon),
        planning: Schedule::ZERO,
        model: config.model,
        net: config.net,
        horizon: if config.episode_days == 0 {
            series.len()
        } else {
            config.episode_days
        },
        episodes: config.epochs,
        seed,
        warm_start: None,
    };
    let source = DemandSource::Replay {
        demands: series.quantities(),
        max_demand,
    };
    let agent = agents::train_observed(&agent_config, source, mdp, initial_state, |_, _| {})?;
    Ok(WarmStart {
        q: agent.q,
        model: agent.model,
        series: series.clone(),
    })
}

#[cfg(test)]
mod tests {
    use crate::demand::DemandDistribution;
    use crate::seeding::{self, Stream};

    use super::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn small_config() -> ForecastConfig {
        ForecastConfig {
            epochs: 40,
            ..ForecastConfig::default()
        }
    }

    #[test]
    fn rounding_is_half_up_and_clamped() {
        assert_eq!(round_clamp(2.5, 10), 3);
        assert_eq!(round_clamp(2.49, 10), 2);
        assert_eq!(round_clamp(-3.0, 10), 0);
        assert_eq!(round_clamp(14.0, 10), 10);
        assert_eq!(round_clamp(f64::NAN, 10), 0);
    }

    #[test]
    fn constant_series_is_learned() {
        // Two full years so held-out dates reuse calendar values seen in training.
        let series = DemandSeries::from_start(date(2021, 1, 1), vec![4; 730]);
        let cfg = ForecastConfig {
            dropout: 0.0,
            epochs: 40,
            ..ForecastConfig::default()
        };
        let f = train_forecaster(&series, &cfg, &mut seeding::rng(1, Stream::Transfer)).unwrap();
        let mut rng = seeding::rng(2, Stream::Transfer);
        for offset in 0..10 {
            let day = date(2023, 3, 1) + Days::new(offset * 29);
            let (mean, var) = f.predict(&[4; DEFAULT_WINDOW], day, 1, &mut rng).unwrap();
            assert!((mean - 4.0).abs() < 0.5, "{mean}");
            assert_eq!(var, 0.0);
        }
    }

    #[test]
    fn beats_a_loose_error_bound() {
        let dist = DemandDistribution::discretized_gamma(5.0, 1.0, 10).unwrap();
        let mut rng = seeding::rng(3, Stream::Transfer);
        let series = demand::synthesize_history(&dist, 500, date(2021, 1, 1), &mut rng);
        let (train, holdout) = series.quantities().split_at(400);
        let train = DemandSeries::from_start(date(2021, 1, 1), train.to_vec());
        let f = train_forecaster(&train, &small_config(), &mut rng).unwrap();
        let all = series.quantities();
        let mut abs = 0.0;
        for (i, &actual) in holdout.iter().enumerate() {
            let day = 400 + i;
            let recent = &all[day - DEFAULT_WINDOW..day];
            let (mean, _) = f
                .predict(recent, series.dates()[day - 1], 10, &mut rng)
                .unwrap();
            abs += (mean - f64::from(actual)).abs();
        }
        let mae = abs / holdout.len() as f64;
        assert!(mae <= 2.0, "mae {mae}");
    }

    #[test]
    fn window_longer_than_series_is_rejected() {
        let series = DemandSeries::from_start(date(2022, 1, 1), vec![1; 5]);
        let cfg = ForecastConfig {
            window: 7,
            ..ForecastConfig::default()
        };
        assert!(train_forecaster(&series, &cfg, &mut seeding::rng(0, Stream::Transfer)).is_err());
    }

    #[test]
    fn offline_generation() {
        let dist = DemandDistribution::discretized_gamma(5.0, 5.0, 10).unwrap();
        let mut rng = seeding::rng(4, Stream::Transfer);
        let series = demand::synthesize_history(&dist, 120, date(2022, 1, 1), &mut rng);
        let f = train_forecaster(
            &series,
            &ForecastConfig {
                epochs: 5,
                ..Default::default()
            },
            &mut rng,
        )
        .unwrap();
        let start = series.end_date().unwrap() + Days::new(1);

        let one = generate_offline(&f, start, 1, &mut rng).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one.quantities()[0] <= 10);

        let d = generate_offline(&f, start + Days::new(5), 10, &mut rng).unwrap();
        assert_eq!(d.len(), 10);
        assert_eq!(d.dates()[0], start + Days::new(5));
        assert!(d.quantities().iter().all(|&q| q <= 10));

        assert!(generate_offline(&f, series.end_date().unwrap(), 3, &mut rng).is_err());
    }

    #[test]
    fn deterministic_forecaster_repeats() {
        let dist = DemandDistribution::discretized_gamma(5.0, 5.0, 10).unwrap();
        let mut rng = seeding::rng(5, Stream::Transfer);
        let series = demand::synthesize_history(&dist, 60, date(2022, 1, 1), &mut rng);
        let cfg = ForecastConfig {
            epochs: 3,
            dropout: 0.0,
            ..Default::default()
        };
        let f = train_forecaster(&series, &cfg, &mut rng).unwrap();
        let start = series.end_date().unwrap() + Days::new(1);
        let a = generate_offline(&f, start, 10, &mut seeding::rng(6, Stream::Transfer)).unwrap();
        let b = generate_offline(&f, start, 10, &mut seeding::rng(7, Stream::Transfer)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_series_warm_start_never_orders() {
        let mdp = InventoryMdp::default();
        let series = DemandSeries::from_start(date(2023, 1, 1), vec![0; 10]);
        let ws = build_warm_start(
            &series,
            &mdp,
            InventoryState::new(0, 0, 5),
            10,
            &WarmStartConfig::default(),
            1,
        )
        .unwrap();
        assert_eq!(
            ws.q.greedy_action(mdp.state_index(InventoryState::EMPTY)),
            0
        );
    }

    #[test]
    fn warm_start_model_support_matches_series() {
        let mdp = InventoryMdp::default();
        let series = DemandSeries::from_start(date(2023, 1, 1), vec![2, 5, 5, 7, 3, 2, 9, 4, 4, 6]);
        let ws = build_warm_start(
            &series,
            &mdp,
            InventoryState::new(0, 0, 5),
            10,
            &WarmStartConfig::default(),
            9,
        )
        .unwrap();
        assert!(ws.model.visited_count() > 0);
        assert!(ws.q.is_finite());
        let mut rng = seeding::rng(0, Stream::Planning);
        let present: Vec<u32> = series.quantities().to_vec();
        for (s, a) in ws.model.visited().collect::<Vec<_>>() {
            let pmf = ws.model.demand_pmf(s, a, &mut rng).unwrap();
            for (d, &p) in pmf.iter().enumerate() {
                if p > 0.0 {
                    assert!(present.contains(&(d as u32)), "class {d} at {s} {a:?}");
                }
            }
        }
        // Never-visited pairs keep their zero initialisation.
        for s in 0..mdp.num_states() {
            for a in 0..mdp.num_actions() {
                if !ws.model.is_visited(mdp.state_at(s), mdp.action_at(a)) {
                    assert_eq!(ws.q.get(s, a), 0.0);
                }
            }
        }
    }

    #[test]
    fn warm_start_is_deterministic_and_round_trips() {
        let mdp = InventoryMdp::default();
        let series = DemandSeries::from_start(date(2023, 1, 1), vec![3, 4, 6, 5, 2, 8, 5, 4, 1, 5]);
        let cfg = WarmStartConfig::default();
        let a = build_warm_start(&series, &mdp, InventoryState::new(0, 0, 5), 10, &cfg, 4).unwrap();
        let b = build_warm_start(&series, &mdp, InventoryState::new(0, 0, 5), 10, &cfg, 4).unwrap();
        assert_eq!(a, b);
        let dir = tempfile::tempdir().unwrap();
        a.save(dir.path()).unwrap();
        assert_eq!(WarmStart::load(dir.path()).unwrap(), a);
    }
}
