//! Per-episode records and the summary statistics computed from them.

use serde::{Deserialize, Serialize};

/// Outcome of one training episode or one test run. Equality ignores
/// `wall_seconds`, matching the serialized form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetrics {
    pub total_cost: f64,
    pub daily_costs: Vec<f64>,
    /// Fraction of days with unmet demand.
    pub shortage_fraction: f64,
    /// Mean pre-sale stock per day.
    pub average_holding: f64,
    /// Planning updates performed during the episode.
    pub planning_steps: u64,
    /// Wall-clock seconds; excluded from serialized records.
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl PartialEq for RunMetrics {
    fn eq(&self, other: &Self) -> bool {
        self.total_cost == other.total_cost
            && self.daily_costs == other.daily_costs
            && self.shortage_fraction == other.shortage_fraction
            && self.average_holding == other.average_holding
            && self.planning_steps == other.planning_steps
    }
}

impl RunMetrics {
    pub fn days(&self) -> usize {
        self.daily_costs.len()
    }

    pub fn average_daily_cost(&self) -> f64 {
        if self.daily_costs.is_empty() {
            0.0
        } else {
            self.total_cost / self.daily_costs.len() as f64
        }
    }
}

/// Accumulates one episode day by day.
#[derive(Debug, Default)]
pub(crate) struct EpisodeRecorder {
    daily_costs: Vec<f64>,
    shortage_days: usize,
    holding: u64,
    pub(crate) planning_steps: u64,
}

impl EpisodeRecorder {
    pub(crate) fn record(&mut self, cost: f64, shortage: u32, on_hand: u32) {
        self.daily_costs.push(cost);
        self.shortage_days += usize::from(shortage > 0);
        self.holding += u64::from(on_hand);
    }

    pub(crate) fn finish(self, wall_seconds: f64) -> RunMetrics {
        let days = self.daily_costs.len();
        let (shortage_fraction, average_holding) = if days == 0 {
            (0.0, 0.0)
        } else {
            (
                self.shortage_days as f64 / days as f64,
                self.holding as f64 / days as f64,
            )
        };
        RunMetrics {
            total_cost: self.daily_costs.iter().sum(),
            daily_costs: self.daily_costs,
            shortage_fraction,
            average_holding,
            planning_steps: self.planning_steps,
            wall_seconds,
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// `P(X >= k)` for `X ~ Binomial(n, 1/2)`.
pub fn binomial_upper_tail_half(n: u64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    // Sum log-space terms to stay finite for large n.
    let ln_choose = |n: u64, r: u64| -> f64 {
        statrs::function::factorial::ln_factorial(n)
            - statrs::function::factorial::ln_factorial(r)
            - statrs::function::factorial::ln_factorial(n - r)
    };
    let ln_half_n = n as f64 * 0.5f64.ln();
    (k..=n)
        .map(|r| (ln_choose(n, r) + ln_half_n).exp())
        .sum::<f64>()
        .min(1.0)
}

/// One-sided paired sign test of "the first sample is larger".
///
/// Returns the p-value of observing at least this many positive
/// differences `a[i] - b[i]` under the null of no difference; ties are
/// dropped.
pub fn sign_test_greater(a: &[f64], b: &[f64]) -> f64 {
    let (pos, neg) = a.iter().zip(b).fold((0u64, 0u64), |(p, n), (x, y)| {
        if x > y {
            (p + 1, n)
        } else if x < y {
            (p, n + 1)
        } else {
            (p, n)
        }
    });
    binomial_upper_tail_half(pos + neg, pos)
}
