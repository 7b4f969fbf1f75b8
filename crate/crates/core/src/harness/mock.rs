//! Offline stand-ins for a live LLM planner.

use crate::constraints::partition_feasible_with;
use crate::planner::{
    oracle_plan, serialize_plan, DisruptionContext, Planner, PlannerError, PromptText, ScriptedPlanner,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MockPlannerSpec {
    /// Replays the responses in order, one per planner call across the trial.
    Scripted { responses: Vec<String> },
    /// Answers correctly with the given probabilities, otherwise with a
    /// plausible but wrong response.
    Stochastic {
        first_attempt_success_prob: f64,
        per_retry_success_prob: f64,
        seed: u64,
    },
}

impl MockPlannerSpec {
    pub fn stochastic(first_attempt_success_prob: f64, per_retry_success_prob: f64, seed: u64) -> Self {
        MockPlannerSpec::Stochastic {
            first_attempt_success_prob,
            per_retry_success_prob,
            seed,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        if let MockPlannerSpec::Stochastic {
            first_attempt_success_prob: p,
            per_retry_success_prob: q,
            ..
        } = self
        {
            for (name, v) in [("first_attempt_success_prob", p), ("per_retry_success_prob", q)] {
                if !(0.0..=1.0).contains(v) {
                    return Err(format!("{name} must lie in [0, 1], got {v}"));
                }
            }
        }
        Ok(())
    }

    /// Planner for trial `trial`; stochastic trials draw from independent streams of one seed.
    pub fn build(&self, trial: u64) -> Box<dyn Planner> {
        match self {
            MockPlannerSpec::Scripted { responses } => Box::new(ScriptedPlanner::new(responses.clone())),
            MockPlannerSpec::Stochastic {
                first_attempt_success_prob,
                per_retry_success_prob,
                seed,
            } => Box::new(StochasticPlanner::new(
                *first_attempt_success_prob,
                *per_retry_success_prob,
                *seed,
                trial,
            )),
        }
    }
}

/// Emulates an LLM that is right with a fixed probability per call.
///
/// A correct answer is the oracle plan. A wrong answer mimics the typical
/// failure of claiming unreachable work: the oracle's robot claiming every
/// disrupted task. When the robot can do all of them, the wrong answer is a
/// prose reply without JSON.
#[derive(Debug, Clone)]
pub struct StochasticPlanner {
    first_attempt_success_prob: f64,
    per_retry_success_prob: f64,
    rng: ChaCha8Rng,
}

impl StochasticPlanner {
    pub fn new(first_attempt_success_prob: f64, per_retry_success_prob: f64, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            first_attempt_success_prob,
            per_retry_success_prob,
            rng,
        }
    }
}

impl Planner for StochasticPlanner {
    fn name(&self) -> &str {
        "mock"
    }

    fn respond(&mut self, ctx: &DisruptionContext, _prompt: &PromptText) -> Result<String, PlannerError> {
        let p = if ctx.feedback_history.is_empty() {
            self.first_attempt_success_prob
        } else {
            self.per_retry_success_prob
        };
        let correct = self.rng.random::<f64>() < p;
        let plan = oracle_plan(ctx).map_err(|_| PlannerError::NoFeasiblePlan)?;
        if correct {
            return Ok(serialize_plan(&plan));
        }
        let robot = ctx
            .candidate(plan.exploration_robot.as_str())
            .expect("oracle picks a candidate");
        let partition = partition_feasible_with(&ctx.orphaned_tasks, &robot.config, &ctx.world, ctx.options);
        if partition.infeasible.is_empty() {
            return Ok(format!(
                "Robot {} should be able to take over the disrupted work, but I need to double-check the layout first.",
                plan.exploration_robot
            ));
        }
        let mut wrong = plan;
        wrong.claimed_tasks = ctx.orphaned_tasks.iter().map(|t| t.id.clone()).collect();
        wrong.rationale = format!("{} takes over all disrupted tasks", wrong.exploration_robot);
        Ok(serialize_plan(&wrong))
    }
}
