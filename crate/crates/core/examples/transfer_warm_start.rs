//! Forecast a new product's demand from an existing product's history and
//! turn the forecast into a warm start.

use chrono::NaiveDate;
use perishable_dynaq::demand::synthesize_history;
use perishable_dynaq::forecast::{self, ForecastConfig, WarmStartConfig};
use perishable_dynaq::{CostParams, DemandDistribution, InventoryMdp, InventoryState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> perishable_dynaq::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let start = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
    let existing = DemandDistribution::discretized_gamma(4.5, 5.0, 10)?;
    let history = synthesize_history(&existing, 640, start, &mut rng);
    println!(
        "history: {} days, mean {:.2}",
        history.len(),
        history.mean()
    );

    let forecaster = forecast::train_forecaster(&history, &ForecastConfig::default(), &mut rng)?;
    let first = forecaster.last_date().succ_opt().unwrap();
    let offline = forecast::generate_offline(&forecaster, first, 10, &mut rng)?;
    println!("offline series from {first}: {:?}", offline.quantities());

    let mdp = InventoryMdp::new(10, 10, CostParams::default())?;
    let cfg = WarmStartConfig {
        episode_days: 30,
        ..WarmStartConfig::default()
    };
    let warm =
        forecast::build_warm_start(&offline, &mdp, InventoryState::new(0, 0, 5), 10, &cfg, 9)?;
    let start_state = mdp.state_index(InventoryState::new(0, 0, 5));
    println!(
        "warm start: {} visited pairs, greedy order at (0,0,5) = {}",
        warm.model.visited_count(),
        warm.q.greedy_action(start_state)
    );
    Ok(())
}
