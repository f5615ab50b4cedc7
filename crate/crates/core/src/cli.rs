//! Command line of the `dynaq-bench` binary.

use std::path::{Path, PathBuf};

use chrono::Days;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::agents;
use crate::bench::{self, ExperimentSpec, RunOptions, Scenario};
use crate::envmodel::ModelVariant;
use crate::error::{Error, Result};
use crate::metrics::RunMetrics;
use crate::qcore::QTable;
use crate::seeding::{self, Stream};

#[derive(Debug, Parser)]
#[command(
    name = "dynaq-bench",
    version,
    about = "Dyna-Q experiments on perishable inventory control"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one agent and write its Q-table, model and learning curves.
    Train(Common),
    /// Run the greedy policy of a saved Q-table.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Q-table to evaluate; defaults to `<out>/q.json`.
        #[arg(long)]
        q: Option<PathBuf>,
    },
    /// Three-algorithm cost and planning-work comparison.
    Table1(Common),
    /// Cold-start training with and without transfer.
    Scenario1(Common),
    /// Train then test the greedy policy, with and without transfer.
    Scenario2(Common),
    /// Track one estimated transition probability per episode.
    Fig3(Common),
    /// Fit the demand forecaster and write the offline series and warm start.
    Forecast(Common),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML experiment file layered over the subcommand's defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Master seed; overrides the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Run a single demand variance.
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Run a single environment-model variant.
    #[arg(long, value_parser = parse_model)]
    pub model: Option<ModelVariant>,
    /// `off` drops warm-started agents; `on` keeps only them. For `train`
    /// it toggles the warm start of the single agent.
    #[arg(long, value_enum)]
    pub transfer: Option<Switch>,
}

fn parse_model(s: &str) -> std::result::Result<ModelVariant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Common {
    fn spec(&self, scenario: Scenario) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => ExperimentSpec::load(path, scenario)?,
            None => ExperimentSpec::preset(scenario),
        };
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        if let Some(s) = self.sigma2 {
            spec.demand.variances = vec![s];
        }
        if let Some(m) = self.model {
            spec.models = vec![m];
        }
        match (self.transfer, spec.scenario) {
            (Some(t), Scenario::Train) => spec
                .agents
                .iter_mut()
                .for_each(|a| a.transfer = t == Switch::On),
            (Some(t), _) => spec.agents.retain(|a| a.transfer == (t == Switch::On)),
            (None, _) => {}
        }
        spec.validate()?;
        Ok(spec)
    }

    fn options(&self) -> RunOptions {
        RunOptions {
            workers: self.workers,
            daily_costs: false,
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(c) => train(&c),
        Command::Evaluate { common, q } => evaluate(&common, q.as_deref()),
        Command::Table1(c) => experiment(&c, Scenario::Table1),
        Command::Scenario1(c) => experiment(&c, Scenario::Scenario1),
        Command::Scenario2(c) => experiment(&c, Scenario::Scenario2),
        Command::Fig3(c) => experiment(&c, Scenario::Fig3),
        Command::Forecast(c) => forecast(&c),
    }
}

fn experiment(common: &Common, scenario: Scenario) -> Result<()> {
    let spec = common.spec(scenario)?;
    let output = bench::run_experiment(&spec, common.options())?;
    bench::write_outputs(&spec, &output, &common.out)?;
    print!(
        "{}",
        std::fs::read_to_string(common.out.join("report.txt"))
            .map_err(|e| Error::io(&common.out, e))?
    );
    Ok(())
}

fn train(common: &Common) -> Result<()> {
    let mut spec = common.spec(Scenario::Train)?;
    if spec.agents.len() != 1 || spec.demand.variances.len() != 1 || spec.models.len() != 1 {
        return Err(Error::Config(
            "train runs exactly one agent, variance and model".into(),
        ));
    }
    spec.replications = 1;
    let mdp = spec.env.mdp()?;
    let agent_spec = &spec.agents[0];
    let variance = spec.demand.variances[0];
    let dist = spec.demand.distribution(variance)?;
    let seed = spec.run_seed(variance, 0);
    let mut config = bench::agent_config(&spec, 0, spec.models[0], seed)?;
    if agent_spec.transfer {
        let forecaster = bench::train_forecaster(&spec)?;
        config = config.with_warm_start(bench::warm_start_for(
            &spec,
            &forecaster,
            &mdp,
            spec.models[0],
            0,
        )?);
    }
    let agent = agents::train(&config, &dist, &mdp, spec.env.initial())?;

    let out = &common.out;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    agent.q.save(out.join("q.json"))?;
    agent.model.save(out.join("model.bin"))?;
    let records = bench::training_records(&spec, 0, spec.models[0], 0, 0, &agent.metrics, true);
    let output = bench::ExperimentOutput {
        records,
        ..Default::default()
    };
    bench::write_outputs(&spec, &output, out)?;
    let last: Vec<f64> = agent
        .metrics
        .iter()
        .rev()
        .take(10)
        .map(RunMetrics::average_daily_cost)
        .collect();
    println!(
        "{} episodes, last-10 average daily cost {:.4}, {} planning steps",
        agent.metrics.len(),
        crate::metrics::mean(&last),
        agent.total_planning_steps()
    );
    Ok(())
}

fn evaluate(common: &Common, q_path: Option<&Path>) -> Result<()> {
    let spec = common.spec(Scenario::Train)?;
    let q_path = q_path.map_or_else(|| common.out.join("q.json"), Path::to_path_buf);
    let q = QTable::load(&q_path)?;
    let mdp = spec.env.mdp()?;
    let variance = spec.demand.variances[0];
    let dist = spec.demand.distribution(variance)?;
    let days = spec.training.test_days.max(1);
    let repetitions = spec.training.test_repetitions.max(1);
    let mut rng = seeding::rng(spec.run_seed(variance, 0), Stream::Evaluation);
    let runs = agents::evaluate(
        &q,
        &dist,
        &mdp,
        spec.env.initial(),
        days,
        repetitions,
        &mut rng,
    )?;
    std::fs::create_dir_all(&common.out).map_err(|e| Error::io(&common.out, e))?;
    bench::write_jsonl(common.out.join("evaluation.jsonl"), &runs)?;
    let totals: Vec<f64> = runs.iter().map(|r| r.total_cost).collect();
    println!(
        "{repetitions} runs of {days} days: mean total cost {:.4}, variance {:.4}",
        crate::metrics::mean(&totals),
        crate::metrics::sample_variance(&totals)
    );
    Ok(())
}

fn forecast(common: &Common) -> Result<()> {
    let spec = common.spec(Scenario::Scenario1)?;
    let mdp = spec.env.mdp()?;
    let forecaster = bench::train_forecaster(&spec)?;
    let model = spec.models[0];
    let warm = bench::warm_start_for(&spec, &forecaster, &mdp, model, 0)?;
    let out = &common.out;
    warm.save(out)?;
    forecaster.network().save(out.join("forecaster.bin"))?;
    let start = warm
        .series
        .dates()
        .first()
        .copied()
        .unwrap_or_else(|| forecaster.last_date() + Days::new(1));
    println!(
        "forecast from {start}: {:?}; warm start visits {} pairs",
        warm.series.quantities(),
        warm.model.visited_count()
    );
    Ok(())
}
