//! Summaries computed from run records, and the text report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Phase, RunRecord, Scenario, TransitionRecord};
use crate::agents::Algorithm;
use crate::envmodel::ModelVariant;
use crate::metrics::{mean, sample_variance, sign_test_greater};

/// One agent in one (variance, model) cell; groups keep the order in which
/// they first appear in the records.
#[derive(Debug, Clone, PartialEq)]
struct Group<'a> {
    sigma2: f64,
    model: ModelVariant,
    agent: &'a str,
    algorithm: Algorithm,
    transfer: bool,
}

fn groups(records: &[RunRecord]) -> Vec<Group<'_>> {
    let mut out: Vec<Group<'_>> = Vec::new();
    for r in records {
        let g = Group {
            sigma2: r.sigma2,
            model: r.model,
            agent: &r.agent,
            algorithm: r.algorithm,
            transfer: r.transfer,
        };
        if !out.contains(&g) {
            out.push(g);
        }
    }
    out
}

fn in_group<'a>(
    records: &'a [RunRecord],
    g: &'a Group<'_>,
    phase: Phase,
) -> impl Iterator<Item = &'a RunRecord> + 'a {
    records.iter().filter(move |r| {
        r.phase == phase && r.sigma2 == g.sigma2 && r.model == g.model && r.agent == g.agent
    })
}

/// Per-replication mean of `f` over the group's records of one phase.
fn per_replication(
    records: &[RunRecord],
    g: &Group<'_>,
    phase: Phase,
    f: impl Fn(&RunRecord) -> f64,
) -> Vec<f64> {
    let mut by_rep: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in in_group(records, g, phase) {
        by_rep.entry(r.replication).or_default().push(f(r));
    }
    by_rep.values().map(|v| mean(v)).collect()
}

fn daily_cost(r: &RunRecord) -> f64 {
    if r.days == 0 {
        0.0
    } else {
        r.total_cost / r.days as f64
    }
}

/// `(baseline − value) / baseline`.
pub fn improvement(baseline: f64, value: f64) -> f64 {
    (baseline - value) / baseline
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub sigma2: f64,
    pub model: ModelVariant,
    pub agent: String,
    pub replications: usize,
    /// Mean over replications of the test-phase average daily cost.
    pub test_daily_cost: f64,
    /// Against the cold-start Q-learning agent of the same cell.
    pub cost_improvement: Option<f64>,
    /// Sign-test p-value that this agent is cheaper than Q-learning.
    pub p_cheaper: Option<f64>,
    /// Sign-test p-value that this agent is dearer than Q-learning.
    pub p_dearer: Option<f64>,
    pub planning_steps_per_episode: f64,
    /// Planning steps as a fraction of the cold-start classic Dyna-Q agent's.
    pub planning_ratio: Option<f64>,
    /// `1 − planning_ratio`: the reduction in planning work.
    pub time_improvement: Option<f64>,
}

fn baseline<'a>(
    all: &'a [Group<'a>],
    g: &Group<'_>,
    algorithm: Algorithm,
) -> Option<&'a Group<'a>> {
    all.iter().find(|b| {
        b.sigma2 == g.sigma2 && b.model == g.model && b.algorithm == algorithm && !b.transfer
    })
}

pub fn table1_summary(records: &[RunRecord]) -> Vec<Table1Row> {
    let all = groups(records);
    all.iter()
        .map(|g| {
            let costs = per_replication(records, g, Phase::Test, daily_cost);
            let planning: Vec<f64> = in_group(records, g, Phase::Train)
                .map(|r| r.planning_steps as f64)
                .collect();
            let test_daily_cost = mean(&costs);
            let (cost_improvement, p_cheaper, p_dearer) =
                match baseline(&all, g, Algorithm::QLearning) {
                    Some(q) => {
                        let q_costs = per_replication(records, q, Phase::Test, daily_cost);
                        (
                            Some(improvement(mean(&q_costs), test_daily_cost)),
                            Some(sign_test_greater(&q_costs, &costs)),
                            Some(sign_test_greater(&costs, &q_costs)),
                        )
                    }
                    None => (None, None, None),
                };
            let planning_steps_per_episode = mean(&planning);
            let planning_ratio = baseline(&all, g, Algorithm::DynaQ).and_then(|c| {
                let classic: Vec<f64> = in_group(records, c, Phase::Train)
                    .map(|r| r.planning_steps as f64)
                    .collect();
                let total: f64 = classic.iter().sum();
                (total > 0.0).then(|| planning.iter().sum::<f64>() / total)
            });
            Table1Row {
                sigma2: g.sigma2,
                model: g.model,
                agent: g.agent.to_string(),
                replications: costs.len(),
                test_daily_cost,
                cost_improvement,
                p_cheaper,
                p_dearer,
                planning_steps_per_episode,
                planning_ratio,
                time_improvement: planning_ratio.map(|r| 1.0 - r),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub sigma2: f64,
    pub model: ModelVariant,
    pub agent: String,
    pub replications: usize,
    /// Mean total cost per episode (training) or per test run.
    pub total_cost: f64,
    pub shortage_fraction: f64,
    pub average_holding: f64,
    /// Mean over replications of the variance of total cost across the
    /// episodes (or test runs) of one replication.
    pub total_cost_variance: f64,
    /// Replications in which this agent had the lowest mean total cost of
    /// all agents in the cell.
    pub wins: usize,
}

pub fn scenario_summary(records: &[RunRecord], phase: Phase) -> Vec<ScenarioRow> {
    let all = groups(records);
    // Per (variance, model, replication): mean total cost of each agent.
    let mut cell_means: BTreeMap<(u64, ModelVariant, usize), Vec<(String, f64)>> = BTreeMap::new();
    for g in &all {
        let mut by_rep: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for r in in_group(records, g, phase) {
            by_rep.entry(r.replication).or_default().push(r.total_cost);
        }
        for (rep, costs) in by_rep {
            cell_means
                .entry((g.sigma2.to_bits(), g.model, rep))
                .or_default()
                .push((g.agent.to_string(), mean(&costs)));
        }
    }
    let winners: Vec<((u64, ModelVariant), String)> = cell_means
        .iter()
        .filter_map(|(&(s, m, _), agents)| {
            // Strictly lowest; a tie gives no winner.
            let best = agents.iter().map(|(_, c)| *c).fold(f64::INFINITY, f64::min);
            let at_best: Vec<&String> = agents
                .iter()
                .filter(|(_, c)| *c == best)
                .map(|(a, _)| a)
                .collect();
            (at_best.len() == 1).then(|| ((s, m), at_best[0].clone()))
        })
        .collect();

    all.iter()
        .filter(|g| in_group(records, g, phase).next().is_some())
        .map(|g| {
            let rows: Vec<&RunRecord> = in_group(records, g, phase).collect();
            let mut by_rep: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for r in &rows {
                by_rep.entry(r.replication).or_default().push(r.total_cost);
            }
            let variances: Vec<f64> = by_rep.values().map(|v| sample_variance(v)).collect();
            let field =
                |f: fn(&RunRecord) -> f64| mean(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
            ScenarioRow {
                sigma2: g.sigma2,
                model: g.model,
                agent: g.agent.to_string(),
                replications: by_rep.len(),
                total_cost: field(|r| r.total_cost),
                shortage_fraction: field(|r| r.shortage_fraction),
                average_holding: field(|r| r.average_holding),
                total_cost_variance: mean(&variances),
                wins: winners
                    .iter()
                    .filter(|((s, m), a)| *s == g.sigma2.to_bits() && *m == g.model && a == g.agent)
                    .count(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig3Point {
    pub sigma2: f64,
    pub model: ModelVariant,
    pub agent: String,
    pub iteration: usize,
    /// Mean estimate over replications that have visited the pair.
    pub mean_estimate: Option<f64>,
    pub visited_replications: usize,
    pub truth: f64,
}

pub fn fig3_summary(transitions: &[TransitionRecord]) -> Vec<Fig3Point> {
    let mut points: Vec<Fig3Point> = Vec::new();
    let mut sums: Vec<f64> = Vec::new();
    for t in transitions {
        let idx = points.iter().position(|p| {
            p.sigma2 == t.sigma2
                && p.model == t.model
                && p.agent == t.agent
                && p.iteration == t.iteration
        });
        let idx = idx.unwrap_or_else(|| {
            points.push(Fig3Point {
                sigma2: t.sigma2,
                model: t.model,
                agent: t.agent.clone(),
                iteration: t.iteration,
                mean_estimate: None,
                visited_replications: 0,
                truth: t.truth,
            });
            sums.push(0.0);
            points.len() - 1
        });
        if let Some(e) = t.estimate {
            sums[idx] += e;
            points[idx].visited_replications += 1;
        }
    }
    for (p, s) in points.iter_mut().zip(sums) {
        if p.visited_replications > 0 {
            p.mean_estimate = Some(s / p.visited_replications as f64);
        }
    }
    points
}

/// Fraction of replications in which `agent`'s final estimate is strictly
/// closer to the truth than `rival`'s. An unvisited pair counts as an
/// estimate of zero.
pub fn closer_fraction(transitions: &[TransitionRecord], agent: &str, rival: &str) -> f64 {
    let last = transitions.iter().map(|t| t.iteration).max().unwrap_or(0);
    let finals = |label: &str| -> BTreeMap<(u64, ModelVariant, usize), f64> {
        transitions
            .iter()
            .filter(|t| t.agent == label && t.iteration == last)
            .map(|t| {
                (
                    (t.sigma2.to_bits(), t.model, t.replication),
                    (t.estimate.unwrap_or(0.0) - t.truth).abs(),
                )
            })
            .collect()
    };
    let (a, b) = (finals(agent), finals(rival));
    let paired: Vec<bool> = a
        .iter()
        .filter_map(|(k, ea)| b.get(k).map(|eb| ea < eb))
        .collect();
    if paired.is_empty() {
        return f64::NAN;
    }
    paired.iter().filter(|&&c| c).count() as f64 / paired.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub sigma2: f64,
    pub model: ModelVariant,
    pub agent: String,
    /// `across-episodes` (index = episode) or `within-episode` (index = day).
    pub series: String,
    pub index: usize,
    pub average_cost: f64,
}

/// Average cost per iteration two ways: per episode (mean over
/// replications of each episode's daily average), and per day within an
/// episode (running mean of daily cost up to that day, averaged over all
/// training episodes). The second needs records with daily costs.
pub fn convergence_series(records: &[RunRecord]) -> Vec<ConvergencePoint> {
    let mut out = Vec::new();
    for g in groups(records) {
        let rows: Vec<&RunRecord> = in_group(records, &g, Phase::Train).collect();
        let episodes = rows.iter().map(|r| r.index + 1).max().unwrap_or(0);
        for e in 0..episodes {
            let v: Vec<f64> = rows
                .iter()
                .filter(|r| r.index == e)
                .map(|r| daily_cost(r))
                .collect();
            out.push(ConvergencePoint {
                sigma2: g.sigma2,
                model: g.model,
                agent: g.agent.to_string(),
                series: "across-episodes".into(),
                index: e,
                average_cost: mean(&v),
            });
        }
        let daily: Vec<&Vec<f64>> = rows.iter().filter_map(|r| r.daily_costs.as_ref()).collect();
        let days = daily.iter().map(|d| d.len()).min().unwrap_or(0);
        for day in 0..days {
            let v: Vec<f64> = daily
                .iter()
                .map(|d| d[..=day].iter().sum::<f64>() / (day + 1) as f64)
                .collect();
            out.push(ConvergencePoint {
                sigma2: g.sigma2,
                model: g.model,
                agent: g.agent.to_string(),
                series: "within-episode".into(),
                index: day,
                average_cost: mean(&v),
            });
        }
    }
    out
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{:.2}%", 100.0 * x))
}

/// Human-readable tables for a finished experiment.
pub fn write_report(
    scenario: Scenario,
    records: &[RunRecord],
    transitions: &[TransitionRecord],
) -> String {
    let mut s = String::new();
    match scenario {
        Scenario::Table1 => {
            let _ = writeln!(
                s,
                "{:>6}  {:<11} {:<24} {:>10} {:>10} {:>9} {:>12} {:>10}",
                "sigma2",
                "model",
                "agent",
                "daily cost",
                "vs Q",
                "p(dearer)",
                "plan/episode",
                "vs classic"
            );
            for r in table1_summary(records) {
                let _ = writeln!(
                    s,
                    "{:>6}  {:<11} {:<24} {:>10.4} {:>10} {:>9} {:>12.1} {:>10}",
                    r.sigma2,
                    r.model.name(),
                    r.agent,
                    r.test_daily_cost,
                    pct(r.cost_improvement),
                    r.p_dearer
                        .map_or_else(|| "-".to_string(), |p| format!("{p:.4}")),
                    r.planning_steps_per_episode,
                    pct(r.time_improvement),
                );
            }
        }
        Scenario::Scenario1 | Scenario::Scenario2 | Scenario::Train => {
            let phases: &[Phase] = if scenario == Scenario::Scenario2 {
                &[Phase::Train, Phase::Test]
            } else {
                &[Phase::Train]
            };
            for &phase in phases {
                let _ = writeln!(s, "{phase:?}");
                let _ = writeln!(
                    s,
                    "{:>6}  {:<11} {:<24} {:>10} {:>9} {:>8} {:>10} {:>5}",
                    "sigma2",
                    "model",
                    "agent",
                    "total cost",
                    "shortage",
                    "holding",
                    "variance",
                    "wins"
                );
                for r in scenario_summary(records, phase) {
                    let _ = writeln!(
                        s,
                        "{:>6}  {:<11} {:<24} {:>10.2} {:>8.2}% {:>8.2} {:>10.2} {:>5}",
                        r.sigma2,
                        r.model.name(),
                        r.agent,
                        r.total_cost,
                        100.0 * r.shortage_fraction,
                        r.average_holding,
                        r.total_cost_variance,
                        r.wins
                    );
                }
            }
        }
        Scenario::Fig3 => {
            let _ = writeln!(
                s,
                "{:>9}  {:<24} {:>9} {:>8} {:>6}",
                "iteration", "agent", "estimate", "truth", "seen"
            );
            for p in fig3_summary(transitions) {
                let _ = writeln!(
                    s,
                    "{:>9}  {:<24} {:>9} {:>8.4} {:>6}",
                    p.iteration,
                    p.agent,
                    p.mean_estimate
                        .map_or_else(|| "-".to_string(), |e| format!("{e:.4}")),
                    p.truth,
                    p.visited_replications
                );
            }
            let mut agents: Vec<&str> = Vec::new();
            for t in transitions {
                if !agents.contains(&t.agent.as_str()) {
                    agents.push(&t.agent);
                }
            }
            let rival = Algorithm::QLearning.name();
            if agents.contains(&rival) {
                let _ = writeln!(s, "\nfinal estimate strictly closer to truth than {rival}");
                for a in agents.iter().filter(|&&a| a != rival) {
                    let _ = writeln!(
                        s,
                        "  {:<24} {:>6.1}%",
                        a,
                        100.0 * closer_fraction(transitions, a, rival)
                    );
                }
            }
        }
    }
    s
}
