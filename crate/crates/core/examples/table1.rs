//! The three-algorithm comparison at reduced scale, through the
//! experiment harness.

use perishable_dynaq::bench::{
    run_experiment, table1_summary, ExperimentSpec, RunOptions, Scenario,
};

fn main() -> perishable_dynaq::Result<()> {
    let mut spec = ExperimentSpec::preset(Scenario::Table1);
    spec.seed = 1;
    spec.replications = 5;
    spec.demand.variances = vec![5.0];
    spec.training.episodes = 200;
    let out = run_experiment(&spec, RunOptions::default())?;
    println!(
        "{:<16} {:>9} {:>12} {:>14}",
        "agent", "cost/day", "vs q-learn", "planning ratio"
    );
    for row in table1_summary(&out.records) {
        let pct = |x: Option<f64>| x.map_or("-".into(), |v| format!("{:.1}%", 100.0 * v));
        println!(
            "{:<16} {:>9.3} {:>12} {:>14}",
            row.agent,
            row.test_daily_cost,
            pct(row.cost_improvement),
            pct(row.planning_ratio)
        );
    }
    Ok(())
}
