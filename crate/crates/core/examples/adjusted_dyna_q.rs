//! Train Q-learning, classic Dyna-Q and adjusted Dyna-Q on the same demand
//! draws and compare their greedy policies.

use perishable_dynaq::seeding::{self, Stream};
use perishable_dynaq::{
    evaluate, train, AgentConfig, Algorithm, CostParams, DemandDistribution, Hyperparameters,
    InventoryMdp, InventoryState, ModelVariant,
};

fn main() -> perishable_dynaq::Result<()> {
    let mdp = InventoryMdp::new(10, 10, CostParams::default())?;
    let dist = DemandDistribution::discretized_gamma(5.0, 5.0, 10)?;
    let initial = InventoryState::new(0, 0, 5);
    for algorithm in Algorithm::ALL {
        let config = AgentConfig::from_hyperparameters(
            algorithm,
            &Hyperparameters::COMPARISON,
            ModelVariant::Tabular,
            100,
            300,
            11,
        )?;
        let agent = train(&config, &dist, &mdp, initial)?;
        let mut rng = seeding::rng(config.seed, Stream::Evaluation);
        let runs = evaluate(&agent.q, &dist, &mdp, initial, 100, 20, &mut rng)?;
        let daily: f64 =
            runs.iter().map(|r| r.average_daily_cost()).sum::<f64>() / runs.len() as f64;
        println!(
            "{:<16} test cost/day {daily:.3}, planning steps {:>8}, {:.2}s",
            algorithm.name(),
            agent.total_planning_steps(),
            agent.training_seconds()
        );
    }
    Ok(())
}
