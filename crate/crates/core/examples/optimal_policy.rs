//! Solve the inventory MDP exactly by value iteration under the true demand
//! and compare its cost with a learned policy.

use perishable_dynaq::seeding::{self, Stream};
use perishable_dynaq::{
    evaluate, train, AgentConfig, Algorithm, CostParams, DemandDistribution, Hyperparameters,
    InventoryMdp, InventoryState, ModelVariant, QTable,
};

fn main() -> perishable_dynaq::Result<()> {
    let mdp = InventoryMdp::new(10, 10, CostParams::default())?;
    let dist = DemandDistribution::discretized_gamma(5.0, 5.0, 10)?;
    let gamma = 0.9;
    let (ns, na) = (mdp.num_states(), mdp.num_actions());

    // Expected cost and successor distribution of every pair.
    let mut model = Vec::with_capacity(ns * na);
    for s in 0..ns {
        for a in 0..na {
            let mut outcomes = Vec::new();
            for (d, &p) in dist.pmf().iter().enumerate() {
                let out = mdp.step(mdp.state_at(s), mdp.action_at(a), d as u32)?;
                outcomes.push((p, out.cost, mdp.state_index(out.next_state)));
            }
            model.push(outcomes);
        }
    }
    // The learning rate is unused; values are written directly.
    let mut q = QTable::new(ns, na, 0.5, gamma)?;
    for sweep in 0.. {
        let v: Vec<f64> = (0..ns).map(|s| q.min_value(s)).collect();
        let mut delta: f64 = 0.0;
        for s in 0..ns {
            for a in 0..na {
                let target: f64 = model[s * na + a]
                    .iter()
                    .map(|&(p, c, n)| p * (c + gamma * v[n]))
                    .sum();
                delta = delta.max((target - q.get(s, a)).abs());
                q.set(s, a, target);
            }
        }
        if delta < 1e-9 {
            println!("value iteration converged after {sweep} sweeps");
            break;
        }
    }

    let initial = InventoryState::new(0, 0, 5);
    let mut rng = seeding::rng(1, Stream::Evaluation);
    let optimal = evaluate(&q, &dist, &mdp, initial, 100, 50, &mut rng)?;
    let config = AgentConfig::from_hyperparameters(
        Algorithm::AdjustedDynaQ,
        &Hyperparameters::COMPARISON,
        ModelVariant::Tabular,
        100,
        500,
        1,
    )?;
    let learned = train(&config, &dist, &mdp, initial)?;
    let mut rng = seeding::rng(1, Stream::Evaluation);
    let adjusted = evaluate(&learned.q, &dist, &mdp, initial, 100, 50, &mut rng)?;
    let daily = |runs: &[perishable_dynaq::RunMetrics]| {
        runs.iter().map(|r| r.average_daily_cost()).sum::<f64>() / runs.len() as f64
    };
    println!("optimal policy: {:.3}/day", daily(&optimal));
    println!(
        "adjusted Dyna-Q after 500 episodes: {:.3}/day",
        daily(&adjusted)
    );
    Ok(())
}
