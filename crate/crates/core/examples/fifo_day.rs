//! One day of the perishable inventory, step by step.

use perishable_dynaq::env::{age, consume_demand, period_cost};
use perishable_dynaq::{Action, CostParams, InventoryMdp, InventoryState};

fn main() -> perishable_dynaq::Result<()> {
    let costs = CostParams::default();
    let mdp = InventoryMdp::new(10, 10, costs)?;
    let state = InventoryState::new(2, 3, 4);
    let order = Action(5);

    let received = age(state, order);
    println!("start {state:?}, order {}", order.order_qty());
    println!(
        "after aging and delivery {received:?} ({} units spoiled)",
        state.s1
    );
    for demand in [0, 3, 6, 15] {
        let left = consume_demand(received, demand);
        println!(
            "demand {demand:>2}: left {left:?}, cost {:.1}",
            period_cost(received, demand, &costs)
        );
    }

    let out = mdp.step(state, order, 6)?;
    println!(
        "step(): next {:?}, cost {:.1}, shortage {}",
        out.next_state, out.cost, out.shortage
    );
    Ok(())
}
