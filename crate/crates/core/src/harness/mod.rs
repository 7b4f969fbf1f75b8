//! Experiment runner: repeated trials of one scenario, aggregated metrics
//! and on-disk reports.

mod metrics;
mod mock;
mod report;

pub use metrics::{MetricsSummary, TrialMetrics};
pub use mock::{MockPlannerSpec, StochasticPlanner};
pub use report::{emit_report, ReportFormat};

use crate::controller::{AdaptationConfig, LogicalClock, WallClock};
use crate::planner::{ChatEndpointConfig, LlmPlanner, OraclePlanner, Planner};
use crate::scenario::{load_scenario_path, Scenario};
use crate::sim::{run_simulation, SimError, TrialTrace, DEFAULT_EVENT_LIMIT};
use crate::world::WorldError;
use std::fs;
use std::path::Path;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scenario error: {0}")]
    Scenario(#[from] WorldError),
    #[error("trial {trial} failed: {source}")]
    Trial { trial: usize, source: SimError },
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlannerChoice {
    Oracle,
    Mock(MockPlannerSpec),
    Llm(ChatEndpointConfig),
}

impl PlannerChoice {
    fn build(&self, trial: u64) -> Box<dyn Planner> {
        match self {
            PlannerChoice::Oracle => Box::new(OraclePlanner),
            PlannerChoice::Mock(spec) => spec.build(trial),
            PlannerChoice::Llm(endpoint) => Box::new(LlmPlanner::http(endpoint.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClockMode {
    /// Each planner call costs a fixed amount of logical time.
    Logical {
        per_call: Duration,
    },
    Wall,
}

impl ClockMode {
    fn basis(&self) -> &'static str {
        match self {
            ClockMode::Logical { .. } => "logical",
            ClockMode::Wall => "wall",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub adaptation: AdaptationConfig,
    pub event_limit: usize,
    pub clock: ClockMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            trials: 20,
            adaptation: AdaptationConfig::default(),
            event_limit: DEFAULT_EVENT_LIMIT,
            clock: ClockMode::Logical {
                per_call: Duration::from_secs(1),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub summary: MetricsSummary,
    pub traces: Vec<TrialTrace>,
}

/// Runs `cfg.trials` independent trials of the same scenario.
pub fn run_trials(
    scenario: &Scenario,
    planner: &PlannerChoice,
    cfg: &ExperimentConfig,
) -> Result<ExperimentResult, HarnessError> {
    if cfg.trials == 0 {
        return Err(HarnessError::Config("at least one trial is required".into()));
    }
    if let PlannerChoice::Mock(spec) = planner {
        spec.check().map_err(HarnessError::Config)?;
    }
    let mut traces = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let planner = planner.build(trial as u64);
        let result = match &cfg.clock {
            ClockMode::Logical { per_call } => run_simulation(
                &scenario.world,
                &scenario.faults,
                planner,
                &cfg.adaptation,
                LogicalClock::new(*per_call),
                cfg.event_limit,
            ),
            ClockMode::Wall => run_simulation(
                &scenario.world,
                &scenario.faults,
                planner,
                &cfg.adaptation,
                WallClock::default(),
                cfg.event_limit,
            ),
        };
        traces.push(result.map_err(|source| HarnessError::Trial {
            trial: trial + 1,
            source,
        })?);
    }
    let summary = MetricsSummary::from_traces(&traces, cfg.clock.basis());
    Ok(ExperimentResult { summary, traces })
}

/// Loads the scenario, runs the trials and, when `out_dir` is given, writes
/// `summary.json`, `summary.txt` and `trials/trial-<k>.ndjson` there.
pub fn run_experiment(
    scenario_path: &Path,
    planner: &PlannerChoice,
    cfg: &ExperimentConfig,
    out_dir: Option<&Path>,
) -> Result<ExperimentResult, HarnessError> {
    let scenario = load_scenario_path(scenario_path)?;
    let result = run_trials(&scenario, planner, cfg)?;
    if let Some(dir) = out_dir {
        write_outputs(&result, dir)?;
    }
    Ok(result)
}

pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<(), HarnessError> {
    let trials_dir = dir.join("trials");
    fs::create_dir_all(&trials_dir)?;
    fs::write(
        dir.join("summary.json"),
        emit_report(&result.summary, ReportFormat::Json),
    )?;
    fs::write(
        dir.join("summary.txt"),
        emit_report(&result.summary, ReportFormat::Table),
    )?;
    for (k, trace) in result.traces.iter().enumerate() {
        fs::write(trials_dir.join(format!("trial-{}.ndjson", k + 1)), trace.to_ndjson())?;
    }
    Ok(())
}
