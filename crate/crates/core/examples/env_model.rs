//! Watch a tabular environment model learn one transition probability.

use perishable_dynaq::{
    Action, CostParams, DemandDistribution, EnvModel, InventoryMdp, InventoryState,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> perishable_dynaq::Result<()> {
    let mdp = InventoryMdp::new(10, 10, CostParams::default())?;
    let truth = DemandDistribution::discretized_gamma(5.0, 5.0, 10)?;
    let (state, action, next) = (
        InventoryState::new(0, 0, 3),
        Action(2),
        InventoryState::new(0, 1, 2),
    );
    let target = truth.prob(2);

    let mut model = EnvModel::tabular(mdp, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 1..=2_000u32 {
        let out = mdp.step(state, action, truth.sample(&mut rng))?;
        model.update(state, action, out.next_state, out.cost, &mut rng)?;
        if n.is_power_of_two() || n == 2_000 {
            let p = model.transition_prob(state, action, next, &mut rng)?;
            println!("{n:>5} observations: P̂ = {p:.4} (true {target:.4})");
        }
    }
    let (sim_next, sim_cost) = model.simulate(state, action, &mut rng)?;
    println!("a simulated step: {sim_next:?} at cost {sim_cost:.2}");
    Ok(())
}
