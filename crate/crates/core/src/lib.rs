//! Tabular Q-learning and Dyna-Q agents for perishable inventory control.
//!
//! The environment tracks stock by remaining shelf life and serves demand
//! first-in first-out. Agents learn ordering policies against a discretized
//! Gamma demand, optionally planning with a learned environment model whose
//! decaying planning depth follows a search-then-converge schedule. A demand
//! forecaster trained on a similar product can warm-start a new product's
//! Q-table and model.

pub mod agents;
pub mod bench;
pub mod cli;
mod codec;
pub mod demand;
pub mod env;
pub mod envmodel;
pub mod error;
pub mod forecast;
pub mod metrics;
pub mod nn;
pub mod qcore;
pub mod schedule;
pub mod seeding;

pub use agents::{
    evaluate, train, AgentConfig, Algorithm, DemandSource, Hyperparameters, TrainedAgent,
};
pub use demand::{Binning, DemandDistribution, DemandSeries};
pub use env::{Action, CostParams, DayOutcome, InventoryMdp, InventoryState};
pub use envmodel::{EnvModel, ModelVariant, NetModelConfig};
pub use error::{Error, Result};
pub use forecast::{Forecaster, WarmStart};
pub use metrics::RunMetrics;
pub use nn::{Adam, Head, Network};
pub use qcore::QTable;
pub use schedule::{Schedule, StcSchedule};
