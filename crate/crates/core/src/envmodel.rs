//! Learned environment model used for planning.
//!
//! Given a state and an order, the next state is a deterministic function of
//! the day's demand, so the model estimates a distribution over demand
//! classes `0..=max_demand` per state-action pair and maps a sampled class
//! through the inventory dynamics. A second estimator predicts the day's
//! cost. Three variants exist: counting (tabular), a deterministic network
//! and an MC-dropout network.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{Reader, Writer};
use crate::demand::sample_index;
use crate::env::{
    age, consume_demand, period_cost, Action, CostParams, InventoryMdp, InventoryState,
};
use crate::error::{Error, Result};
use crate::nn::{Adam, Head, Network, DEFAULT_LEARNING_RATE, DEFAULT_MC_SAMPLES};

const MAGIC: &[u8; 4] = b"PDEM";
const FORMAT_VERSION: u32 = 1;
/// Costs are divided by this before regression so targets stay near unit scale.
const COST_SCALE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelVariant {
    #[serde(rename = "tabular")]
    Tabular,
    #[serde(rename = "det-net")]
    DeterministicNet,
    #[serde(rename = "mc-dropout")]
    McDropoutNet,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 3] = [
        ModelVariant::Tabular,
        ModelVariant::DeterministicNet,
        ModelVariant::McDropoutNet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Tabular => "tabular",
            ModelVariant::DeterministicNet => "det-net",
            ModelVariant::McDropoutNet => "mc-dropout",
        }
    }

    fn tag(self) -> u8 {
        match self {
            ModelVariant::Tabular => 0,
            ModelVariant::DeterministicNet => 1,
            ModelVariant::McDropoutNet => 2,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(ModelVariant::Tabular),
            1 => Ok(ModelVariant::DeterministicNet),
            2 => Ok(ModelVariant::McDropoutNet),
            t => Err(Error::Format(format!("unknown model variant tag {t}"))),
        }
    }
}

impl std::str::FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown model variant {s:?} (tabular, det-net, mc-dropout)"
                ))
            })
    }
}

impl std::fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Settings for the network-backed variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetModelConfig {
    pub learning_rate: f64,
    /// Dropout rate of the MC-dropout variant; the deterministic variant uses 0.
    pub dropout: f64,
    pub mc_samples: usize,
    /// `softmax` (cross-entropy) or `softmax-mse` (squared error on one-hot).
    pub transition_head: Head,
}

impl Default for NetModelConfig {
    fn default() -> Self {
        Self {
            learning_rate: DEFAULT_LEARNING_RATE,
            dropout: 0.5,
            mc_samples: DEFAULT_MC_SAMPLES,
            transition_head: Head::Softmax,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct TabularEstimator {
    /// `[pair × class]` observation counts.
    counts: Vec<u32>,
    totals: Vec<u32>,
    cost_mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct NetEstimator {
    transition: Network,
    cost: Network,
    transition_adam: Adam,
    cost_adam: Adam,
    mc_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Estimator {
    Tabular(TabularEstimator),
    Net(Box<NetEstimator>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvModel {
    variant: ModelVariant,
    mdp: InventoryMdp,
    max_demand: u32,
    estimator: Estimator,
    visited: Vec<(usize, usize)>,
    seen: Vec<bool>,
}

impl EnvModel {
    /// Counting model with no observations.
    pub fn tabular(mdp: InventoryMdp, max_demand: u32) -> Self {
        let pairs = mdp.num_states() * mdp.num_actions();
        let classes = max_demand as usize + 1;
        Self {
            variant: ModelVariant::Tabular,
            mdp,
            max_demand,
            estimator: Estimator::Tabular(TabularEstimator {
                counts: vec![0; pairs * classes],
                totals: vec![0; pairs],
                cost_mean: vec![0.0; pairs],
            }),
            visited: Vec::new(),
            seen: vec![false; pairs],
        }
    }

    /// A fresh model of the requested variant. Network weights are drawn from `rng`.
    pub fn new<R: Rng + ?Sized>(
        variant: ModelVariant,
        mdp: InventoryMdp,
        max_demand: u32,
        config: &NetModelConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let dropout = match variant {
            ModelVariant::Tabular => return Ok(Self::tabular(mdp, max_demand)),
            ModelVariant::DeterministicNet => 0.0,
            ModelVariant::McDropoutNet => config.dropout,
        };
        if !config.transition_head.is_categorical() {
            return Err(Error::Config(
                "the transition network needs a softmax head".into(),
            ));
        }
        let classes = max_demand as usize + 1;
        let transition = Network::standard(4, classes, dropout, config.transition_head, rng)?;
        let cost = Network::standard(4, 1, dropout, Head::Regression, rng)?;
        let pairs = mdp.num_states() * mdp.num_actions();
        Ok(Self {
            variant,
            mdp,
            max_demand,
            estimator: Estimator::Net(Box::new(NetEstimator {
                transition_adam: Adam::new(&transition, config.learning_rate),
                cost_adam: Adam::new(&cost, config.learning_rate),
                transition,
                cost,
                mc_samples: config.mc_samples.max(1),
            })),
            visited: Vec::new(),
            seen: vec![false; pairs],
        })
    }

    pub fn variant(&self) -> ModelVariant {
        self.variant
    }

    pub fn mdp(&self) -> &InventoryMdp {
        &self.mdp
    }

    pub fn max_demand(&self) -> u32 {
        self.max_demand
    }

    fn classes(&self) -> usize {
        self.max_demand as usize + 1
    }

    fn pair_index(&self, state: InventoryState, action: Action) -> Result<usize> {
        self.mdp.check_state(state)?;
        self.mdp.check_action(action)?;
        Ok(self.mdp.state_index(state) * self.mdp.num_actions() + self.mdp.action_index(action))
    }

    fn features(&self, state: InventoryState, action: Action) -> [f64; 4] {
        let s = f64::from(self.mdp.max_stock.max(1));
        let a = f64::from(self.mdp.max_order.max(1));
        [
            f64::from(state.s1) / s,
            f64::from(state.s2) / s,
            f64::from(state.s3) / s,
            f64::from(action.0) / a,
        ]
    }

    /// The demand class that turns `(state, action)` into `next` at `cost`.
    ///
    /// Demands at or above the on-hand stock all empty the shelves; the
    /// shortage term of the cost tells them apart. When costs cannot
    /// (zero shortage cost) the smallest such demand is returned.
    pub fn recover_demand(
        &self,
        state: InventoryState,
        action: Action,
        next: InventoryState,
        cost: f64,
    ) -> Result<u32> {
        recover_demand(&self.mdp.costs, self.max_demand, state, action, next, cost)
    }

    pub fn is_visited(&self, state: InventoryState, action: Action) -> bool {
        self.pair_index(state, action)
            .map(|p| self.seen[p])
            .unwrap_or(false)
    }

    /// Distinct observed pairs in first-observation order.
    pub fn visited(&self) -> impl Iterator<Item = (InventoryState, Action)> + '_ {
        self.visited
            .iter()
            .map(|&(s, a)| (self.mdp.state_at(s), self.mdp.action_at(a)))
    }

    pub fn visited_count(&self) -> usize {
        self.visited.len()
    }

    /// Number of real observations of a pair (tabular variant only).
    pub fn observation_count(&self, state: InventoryState, action: Action) -> Option<u32> {
        match &self.estimator {
            Estimator::Tabular(t) => self.pair_index(state, action).ok().map(|p| t.totals[p]),
            Estimator::Net(_) => None,
        }
    }

    /// Learns from one real transition and returns the recovered demand class.
    /// `rng` drives dropout masks when a network is trained.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        state: InventoryState,
        action: Action,
        next: InventoryState,
        cost: f64,
        rng: &mut R,
    ) -> Result<u32> {
        let pair = self.pair_index(state, action)?;
        let demand = self.recover_demand(state, action, next, cost)?;
        let classes = self.classes();
        let features = self.features(state, action);
        match &mut self.estimator {
            Estimator::Tabular(t) => {
                t.counts[pair * classes + demand as usize] += 1;
                t.totals[pair] += 1;
                let n = f64::from(t.totals[pair]);
                t.cost_mean[pair] += (cost - t.cost_mean[pair]) / n;
            }
            Estimator::Net(net) => {
                let mut target = vec![0.0; classes];
                target[demand as usize] = 1.0;
                let x = [features.to_vec()];
                net.transition
                    .train_step(&mut net.transition_adam, &x, &[target], rng)?;
                net.cost
                    .train_step(&mut net.cost_adam, &x, &[vec![cost / COST_SCALE]], rng)?;
            }
        }
        if !self.seen[pair] {
            self.seen[pair] = true;
            let na = self.mdp.num_actions();
            self.visited.push((pair / na, pair % na));
        }
        Ok(demand)
    }

    fn require_visited(&self, state: InventoryState, action: Action) -> Result<usize> {
        let pair = self.pair_index(state, action)?;
        if !self.seen[pair] {
            return Err(Error::UnvisitedPair {
                state: self.mdp.state_index(state),
                action: self.mdp.action_index(action),
            });
        }
        Ok(pair)
    }

    /// Estimated demand pmf for a visited pair. The MC-dropout variant
    /// averages its sampled passes, consuming `rng`.
    pub fn demand_pmf<R: Rng + ?Sized>(
        &self,
        state: InventoryState,
        action: Action,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let pair = self.require_visited(state, action)?;
        let classes = self.classes();
        match &self.estimator {
            Estimator::Tabular(t) => {
                let n = f64::from(t.totals[pair]);
                Ok(t.counts[pair * classes..(pair + 1) * classes]
                    .iter()
                    .map(|&c| f64::from(c) / n)
                    .collect())
            }
            Estimator::Net(net) => {
                let x = self.features(state, action);
                let mut p = match self.variant {
                    ModelVariant::McDropoutNet => {
                        net.transition.mc_predict(&x, net.mc_samples, rng)?.mean
                    }
                    _ => net.transition.predict(&x)?,
                };
                let total: f64 = p.iter().sum();
                p.iter_mut().for_each(|v| *v /= total);
                Ok(p)
            }
        }
    }

    /// Estimated cost of taking `action` in `state`.
    pub fn expected_cost<R: Rng + ?Sized>(
        &self,
        state: InventoryState,
        action: Action,
        rng: &mut R,
    ) -> Result<f64> {
        let pair = self.require_visited(state, action)?;
        match &self.estimator {
            Estimator::Tabular(t) => Ok(t.cost_mean[pair]),
            Estimator::Net(net) => {
                let x = self.features(state, action);
                let y = match self.variant {
                    ModelVariant::McDropoutNet => {
                        net.cost.mc_predict(&x, net.mc_samples, rng)?.mean[0]
                    }
                    _ => net.cost.predict(&x)?[0],
                };
                Ok(y * COST_SCALE)
            }
        }
    }

    /// Draws a next state from the demand estimate and pairs it with the
    /// estimated cost. Only observed pairs can be simulated.
    pub fn simulate<R: Rng + ?Sized>(
        &self,
        state: InventoryState,
        action: Action,
        rng: &mut R,
    ) -> Result<(InventoryState, f64)> {
        if let Estimator::Tabular(t) = &self.estimator {
            let pair = self.require_visited(state, action)?;
            let classes = self.classes();
            let mut r = rng.gen_range(0..t.totals[pair]);
            let mut demand = 0;
            for (d, &c) in t.counts[pair * classes..(pair + 1) * classes]
                .iter()
                .enumerate()
            {
                if r < c {
                    demand = d as u32;
                    break;
                }
                r -= c;
            }
            return Ok((
                consume_demand(age(state, action), demand),
                t.cost_mean[pair],
            ));
        }
        let pmf = self.demand_pmf(state, action, rng)?;
        let cost = self.expected_cost(state, action, rng)?;
        let demand = sample_index(&pmf, rng) as u32;
        Ok((consume_demand(age(state, action), demand), cost))
    }

    /// Estimated probability of moving from `state` to `next` under `action`:
    /// the mass of every demand class that produces `next`.
    pub fn transition_prob<R: Rng + ?Sized>(
        &self,
        state: InventoryState,
        action: Action,
        next: InventoryState,
        rng: &mut R,
    ) -> Result<f64> {
        let pmf = self.demand_pmf(state, action, rng)?;
        let received = age(state, action);
        Ok(pmf
            .iter()
            .enumerate()
            .filter(|(d, _)| consume_demand(received, *d as u32) == next)
            .map(|(_, p)| p)
            .sum())
    }

    /// A uniformly chosen observed pair.
    pub fn sample_visited<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(InventoryState, Action)> {
        if self.visited.is_empty() {
            return Err(Error::EmptyMemory);
        }
        let (s, a) = self.visited[rng.gen_range(0..self.visited.len())];
        Ok((self.mdp.state_at(s), self.mdp.action_at(a)))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = Writer::new(Vec::new());
        self.write_to(&mut w)?;
        std::fs::write(path, w.into_inner()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut Reader::new(bytes.as_slice()))
    }

    fn write_to<W: Write>(&self, w: &mut Writer<W>) -> Result<()> {
        w.bytes(MAGIC)?;
        w.u32(FORMAT_VERSION)?;
        w.u8(self.variant.tag())?;
        w.u32(self.mdp.max_stock)?;
        w.u32(self.mdp.max_order)?;
        let c = self.mdp.costs;
        for v in [c.b1, c.b2, c.b3, c.shortage] {
            w.f64(v)?;
        }
        w.u32(self.max_demand)?;
        w.u64(self.visited.len() as u64)?;
        for &(s, a) in &self.visited {
            w.u32(s as u32)?;
            w.u32(a as u32)?;
        }
        match &self.estimator {
            Estimator::Tabular(t) => {
                for &c in &t.counts {
                    w.u32(c)?;
                }
                for &n in &t.totals {
                    w.u32(n)?;
                }
                w.f64s(&t.cost_mean)?;
            }
            Estimator::Net(net) => {
                w.u32(net.mc_samples as u32)?;
                w.f64(net.transition_adam.learning_rate)?;
                net.transition.write_to(w)?;
                net.cost.write_to(w)?;
            }
        }
        Ok(())
    }

    fn read_from<R: Read>(r: &mut Reader<R>) -> Result<Self> {
        r.expect(MAGIC)?;
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported model format version {version}"
            )));
        }
        let variant = ModelVariant::from_tag(r.u8()?)?;
        let max_stock = r.u32()?;
        let max_order = r.u32()?;
        let costs = CostParams {
            b1: r.f64()?,
            b2: r.f64()?,
            b3: r.f64()?,
            shortage: r.f64()?,
        };
        if max_stock > 1000 || max_order > max_stock {
            return Err(Error::Format(format!(
                "implausible bounds {max_stock}/{max_order}"
            )));
        }
        let mdp = InventoryMdp::new(max_stock, max_order, costs)
            .map_err(|e| Error::Format(e.to_string()))?;
        let max_demand = r.u32()?;
        if max_demand > 10_000 {
            return Err(Error::Format(format!(
                "implausible max demand {max_demand}"
            )));
        }
        let pairs = mdp.num_states() * mdp.num_actions();
        let classes = max_demand as usize + 1;
        let n_visited = r.u64()? as usize;
        if n_visited > pairs {
            return Err(Error::Format(format!(
                "{n_visited} visited pairs out of {pairs}"
            )));
        }
        let mut visited = Vec::with_capacity(n_visited);
        let mut seen = vec![false; pairs];
        for _ in 0..n_visited {
            let (s, a) = (r.u32()? as usize, r.u32()? as usize);
            let p = s * mdp.num_actions() + a;
            if s >= mdp.num_states() || a >= mdp.num_actions() || seen[p] {
                return Err(Error::Format(format!("bad visited pair ({s}, {a})")));
            }
            seen[p] = true;
            visited.push((s, a));
        }
        let estimator = match variant {
            ModelVariant::Tabular => {
                let counts = (0..pairs * classes)
                    .map(|_| r.u32())
                    .collect::<Result<Vec<_>>>()?;
                let totals = (0..pairs).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
                let cost_mean = r.f64s(pairs)?;
                if cost_mean.len() != pairs {
                    return Err(Error::Format("cost table has the wrong length".into()));
                }
                Estimator::Tabular(TabularEstimator {
                    counts,
                    totals,
                    cost_mean,
                })
            }
            _ => {
                let mc_samples = r.u32()? as usize;
                let lr = r.f64()?;
                let transition = Network::read_from(r)?;
                let cost = Network::read_from(r)?;
                if transition.input_dim() != 4
                    || transition.output_dim() != classes
                    || cost.output_dim() != 1
                {
                    return Err(Error::Format(
                        "network shapes do not match the model".into(),
                    ));
                }
                Estimator::Net(Box::new(NetEstimator {
                    transition_adam: Adam::new(&transition, lr),
                    cost_adam: Adam::new(&cost, lr),
                    transition,
                    cost,
                    mc_samples: mc_samples.max(1),
                }))
            }
        };
        Ok(Self {
            variant,
            mdp,
            max_demand,
            estimator,
            visited,
            seen,
        })
    }
}

pub(crate) fn recover_demand(
    costs: &CostParams,
    max_demand: u32,
    state: InventoryState,
    action: Action,
    next: InventoryState,
    cost: f64,
) -> Result<u32> {
    let received = age(state, action);
    let tolerance = 1e-9 * cost.abs().max(1.0);
    (0..=max_demand)
        .filter(|&d| consume_demand(received, d) == next)
        .find(|&d| (period_cost(received, d, costs) - cost).abs() <= tolerance)
        .ok_or_else(|| Error::InconsistentTransition {
            from: state.to_string(),
            action: action.0,
            to: next.to_string(),
            cost,
            max_demand,
        })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::demand::DemandDistribution;

    const S: InventoryState = InventoryState::new(0, 0, 3);
    const A: Action = Action(2);

    fn observe(model: &mut EnvModel, s: InventoryState, a: Action, d: u32, rng: &mut ChaCha8Rng) {
        let out = model.mdp().step(s, a, d).unwrap();
        assert_eq!(
            model.update(s, a, out.next_state, out.cost, rng).unwrap(),
            d
        );
    }

    #[test]
    fn single_observation_is_a_point_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = EnvModel::tabular(InventoryMdp::default(), 10);
        observe(&mut m, S, A, 2, &mut rng);
        let pmf = m.demand_pmf(S, A, &mut rng).unwrap();
        assert_eq!(pmf[2], 1.0);
        assert_eq!(pmf.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = EnvModel::tabular(InventoryMdp::default(), 10);
        for d in [2, 2, 3] {
            observe(&mut m, S, A, d, &mut rng);
        }
        let pmf = m.demand_pmf(S, A, &mut rng).unwrap();
        assert!((pmf[2] - 2.0 / 3.0).abs() < 1e-12);
        assert!((pmf[3] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn converges_to_the_true_pmf() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let truth = DemandDistribution::discretized_gamma(5.0, 5.0, 10).unwrap();
        let mut m = EnvModel::tabular(InventoryMdp::default(), 10);
        for _ in 0..10_000 {
            let d = truth.sample(&mut rng);
            observe(&mut m, S, A, d, &mut rng);
        }
        let pmf = m.demand_pmf(S, A, &mut rng).unwrap();
        assert!(crate::demand::total_variation(&pmf, truth.pmf()) < 0.03);
    }

    #[test]
    fn simulate_composes_with_dynamics() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = EnvModel::tabular(InventoryMdp::default(), 10);
        observe(&mut m, S, A, 2, &mut rng);
        for _ in 0..20 {
            let (next, cost) = m.simulate(S, A, &mut rng).unwrap();
            assert_eq!(next, InventoryState::new(0, 1, 2));
            assert!((cost - 0.9).abs() < 1e-12);
        }
        let a: Vec<_> = (0..5)
            .map({
                let mut r = ChaCha8Rng::seed_from_u64(3);
                let m = m.clone();
                move |_| m.simulate(S, A, &mut r).unwrap()
            })
            .collect();
        let b: Vec<_> = (0..5)
            .map({
                let mut r = ChaCha8Rng::seed_from_u64(3);
                let m = m.clone();
                move |_| m.simulate(S, A, &mut r).unwrap()
            })
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn transition_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = EnvModel::tabular(InventoryMdp::default(), 10);
        observe(&mut m, S, A, 2, &mut rng);
        let p = m
            .transition_prob(S, A, InventoryState::new(0, 1, 2), &mut rng)
            .unwrap();
        assert_eq!(p, 1.0);
        let unreachable = m
            .transition_prob(S, A, InventoryState::new(5, 5, 5), &mut rng)
            .unwrap();
        assert_eq!(unreachable, 0.0);
    }

    #[test]
    fn unvisited_pairs_are_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = EnvModel::tabular(InventoryMdp::default(), 10);
        assert!(matches!(
            m.simulate(S, A, &mut rng),
            Err(Error::UnvisitedPair { .. })
        ));
        assert!(matches!(
            m.sample_visited(&mut rng),
            Err(Error::EmptyMemory)
        ));
        assert!(m
            .transition_prob(S, A, InventoryState::EMPTY, &mut rng)
            .is_err());
    }

    #[test]
    fn inconsistent_transition_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = EnvModel::tabular(InventoryMdp::default(), 10);
        // Stock cannot grow during a sale.
        let err = m
            .update(S, A, InventoryState::new(3, 3, 3), 0.9, &mut rng)
            .unwrap_err();
        assert!(matches!(err, Error::InconsistentTransition { .. }));
        // Right state but a cost no demand produces.
        let err = m
            .update(S, A, InventoryState::new(0, 1, 2), 5.0, &mut rng)
            .unwrap_err();
        assert!(matches!(err, Error::InconsistentTransition { .. }));
        assert_eq!(m.visited_count(), 0);
    }

    #[test]
    fn sample_visited_single_and_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = EnvModel::tabular(InventoryMdp::default(), 10);
        observe(&mut m, S, A, 2, &mut rng);
        assert!((0..50).all(|_| m.sample_visited(&mut rng).unwrap() == (S, A)));

        let other = (InventoryState::new(1, 2, 3), Action(4));
        observe(&mut m, other.0, other.1, 1, &mut rng);
        observe(&mut m, S, A, 3, &mut rng);
        assert_eq!(m.visited_count(), 2);
        let n = 10_000;
        let hits = (0..n)
            .filter(|_| m.sample_visited(&mut rng).unwrap() == other)
            .count();
        assert!((hits as i64 - 5_000).abs() < 200, "{hits}");
    }

    #[test]
    fn net_variants_learn_and_stay_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for variant in [ModelVariant::DeterministicNet, ModelVariant::McDropoutNet] {
            let mut m = EnvModel::new(
                variant,
                InventoryMdp::default(),
                10,
                &NetModelConfig::default(),
                &mut rng,
            )
            .unwrap();
            for _ in 0..300 {
                observe(&mut m, S, A, 2, &mut rng);
            }
            let pmf = m.demand_pmf(S, A, &mut rng).unwrap();
            assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert!(pmf.iter().all(|&p| p >= 0.0));
            assert!(pmf[2] > 0.5, "{variant}: {pmf:?}");
            let c = m.expected_cost(S, A, &mut rng).unwrap();
            assert!((c - 0.9).abs() < 0.3, "{variant}: cost {c}");
            let (next, _) = m.simulate(S, A, &mut rng).unwrap();
            let received = age(S, A);
            assert!((0..=10).any(|d| consume_demand(received, d) == next));
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for variant in ModelVariant::ALL {
            let mut m = EnvModel::new(
                variant,
                InventoryMdp::default(),
                10,
                &NetModelConfig::default(),
                &mut rng,
            )
            .unwrap();
            observe(&mut m, S, A, 2, &mut rng);
            observe(&mut m, InventoryState::new(1, 1, 1), Action(0), 0, &mut rng);
            let path = dir.path().join(format!("{variant}.bin"));
            m.save(&path).unwrap();
            let back = EnvModel::load(&path).unwrap();
            assert_eq!(back.variant(), variant);
            assert_eq!(
                back.visited().collect::<Vec<_>>(),
                m.visited().collect::<Vec<_>>()
            );
            let mut r1 = ChaCha8Rng::seed_from_u64(9);
            let mut r2 = ChaCha8Rng::seed_from_u64(9);
            assert_eq!(
                back.demand_pmf(S, A, &mut r1).unwrap(),
                m.demand_pmf(S, A, &mut r2).unwrap()
            );
        }
    }

    #[test]
    fn variant_names_parse() {
        for v in ModelVariant::ALL {
            assert_eq!(v.name().parse::<ModelVariant>().unwrap(), v);
        }
        assert!("bnn".parse::<ModelVariant>().is_err());
    }
}
