//! Exploration and planning schedules of the three hyperparameter sets.

use perishable_dynaq::{Algorithm, Hyperparameters};

fn main() -> perishable_dynaq::Result<()> {
    let sets = [
        ("comparison", Hyperparameters::COMPARISON),
        ("training scenario", Hyperparameters::TRAINING_SCENARIO),
        ("testing scenario", Hyperparameters::TESTING_SCENARIO),
    ];
    for (name, hp) in sets {
        let eps = hp.exploration(Algorithm::AdjustedDynaQ)?;
        let plan = hp.planning(Algorithm::AdjustedDynaQ)?;
        println!("{name}");
        for t in [0u64, 100, 1_000, 3_000, 10_000, 50_000] {
            println!("  t={t:>6}  ε={:.4}  N={}", eps.value(t), plan.steps(t));
        }
        let classic = hp.planning(Algorithm::DynaQ)?;
        let horizon = 50_000;
        println!(
            "  planning over {horizon} steps: adjusted {} vs classic {}",
            plan.total_steps(horizon),
            classic.total_steps(horizon)
        );
    }
    Ok(())
}
