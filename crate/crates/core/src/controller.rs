//! Central controller agent: reacts to a robot failure by asking a planner
//! for a reassignment, validating it, feeding violations back and retrying,
//! then applying the first fully valid plan to the world.

use crate::constraints::{validate_assignment_with, ValidationOptions, Verdict};
use crate::ids::{RobotId, TaskId};
use crate::planner::{
    build_prompt, parse_plan, DisruptionContext, FeedbackEntry, ParseFailure, Planner, PlannerError, PromptText,
    ProposedPlan, Rejection, TaskViolation,
};
use crate::world::{CapabilityConfiguration, RobotStatus, SystemKnowledge, WorldError};
use serde::{Deserialize, Serialize};
use std::cell::Cell;
use std::collections::{BTreeMap, VecDeque};
use std::time::{Duration, Instant};
use thiserror::Error;
use tracing::{debug, info, warn};

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationConfig {
    /// Retries after the first attempt; an episode makes at most `max_retries + 1` planner calls.
    pub max_retries: u32,
    pub planner_deadline: Duration,
    pub strict_dropoff_only: bool,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        Self {
            max_retries: 4,
            planner_deadline: Duration::from_secs(60),
            strict_dropoff_only: false,
        }
    }
}

impl AdaptationConfig {
    pub fn validation_options(&self) -> ValidationOptions {
        ValidationOptions {
            dropoff_only: self.strict_dropoff_only,
        }
    }
}

/// Time source for adaptation-time measurements.
pub trait Clock {
    fn now(&self) -> Duration;

    /// Called once after every planner call.
    fn planner_call_finished(&self) {}
}

#[derive(Debug)]
pub struct WallClock {
    origin: Instant,
}

impl Default for WallClock {
    fn default() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Clock for WallClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }
}

/// Deterministic clock charging a fixed cost per planner call.
#[derive(Debug, Default)]
pub struct LogicalClock {
    now: Cell<Duration>,
    per_call: Duration,
}

impl LogicalClock {
    pub fn new(per_call: Duration) -> Self {
        Self {
            now: Cell::new(Duration::ZERO),
            per_call,
        }
    }

    pub fn advance(&self, by: Duration) {
        self.now.set(self.now.get() + by);
    }
}

impl Clock for LogicalClock {
    fn now(&self) -> Duration {
        self.now.get()
    }

    fn planner_call_finished(&self) {
        self.advance(self.per_call);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptationStatus {
    Succeeded,
    ExhaustedRetries,
    NoCandidates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttemptResult {
    Plan { plan: ProposedPlan },
    Failed { rejection: Rejection },
}

/// One prompt/response round of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerExchange {
    pub attempt_number: u32,
    pub prompt: PromptText,
    pub raw_response: String,
    pub result: AttemptResult,
    /// Verdict per validated task; empty when the response did not parse.
    pub verdicts: BTreeMap<TaskId, Verdict>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedTask {
    pub task: TaskId,
    pub verdict: Verdict,
}

/// Full record of one adaptation episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationOutcome {
    pub failed_robot: RobotId,
    pub status: AdaptationStatus,
    pub episode: Vec<PlannerExchange>,
    pub final_plan: Option<ProposedPlan>,
    pub attempts_used: u32,
    /// From failure notification to configuration applied (or episode end).
    #[serde(with = "duration_secs")]
    pub adaptation_time: Duration,
    /// Orphaned tasks handed to the exploration robot.
    pub reassigned_tasks: Vec<TaskId>,
    /// Orphaned tasks left out of a successful plan, with their verdict under the updated configuration.
    pub excluded_tasks: Vec<ExcludedTask>,
    /// Orphaned tasks moved to the unassigned pool because no plan was applied.
    pub unassigned_tasks: Vec<TaskId>,
}

impl AdaptationOutcome {
    pub fn retries(&self) -> u32 {
        self.attempts_used.saturating_sub(1)
    }

    pub fn succeeded(&self) -> bool {
        self.status == AdaptationStatus::Succeeded
    }
}

mod duration_secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error("unknown robot {0}")]
    UnknownRobot(RobotId),
    #[error("robot {0} is not in the failed state")]
    NotFailed(RobotId),
    #[error("robot {0} has failed and cannot be reconfigured")]
    RobotFailed(RobotId),
    #[error(transparent)]
    World(#[from] WorldError),
}

/// Collects what the planner needs to know about a failure.
pub fn gather_context(world: &SystemKnowledge, failed_robot: &RobotId) -> Result<DisruptionContext, ControllerError> {
    let disrupted = world
        .robot(failed_robot.as_str())
        .ok_or_else(|| ControllerError::UnknownRobot(failed_robot.clone()))?
        .clone();
    let orphaned_tasks = world.tasks_assigned_to(failed_robot).cloned().collect();
    let candidates = world
        .robots
        .values()
        .filter(|r| r.id != *failed_robot && !r.status.is_failed())
        .cloned()
        .collect();
    Ok(DisruptionContext {
        disrupted_robot: disrupted,
        orphaned_tasks,
        candidates,
        world: world.clone(),
        feedback_history: Vec::new(),
        options: ValidationOptions::default(),
    })
}

/// Replaces one robot's configuration. The robot must exist and be operational,
/// and the new configuration must satisfy the world invariants.
pub fn refresh_configuration(
    world: &SystemKnowledge,
    robot: &RobotId,
    new_config: CapabilityConfiguration,
) -> Result<SystemKnowledge, ControllerError> {
    let current = world
        .robot(robot.as_str())
        .ok_or_else(|| ControllerError::UnknownRobot(robot.clone()))?;
    if current.status.is_failed() {
        return Err(ControllerError::RobotFailed(robot.clone()));
    }
    new_config
        .check()
        .map_err(|e| WorldError::Invariant(format!("robot {robot}: {e}")))?;
    let mut next = world.clone();
    next.robot_mut(robot.as_str()).expect("robot exists").config = new_config;
    next.validate_structure()?;
    Ok(next)
}

/// Runs one adaptation episode for `failed_robot`.
///
/// The input world is not modified; the returned world has the plan applied
/// on success, or the failed robot's tasks moved to the unassigned pool otherwise.
pub fn handle_failure(
    failed_robot: &RobotId,
    world: &SystemKnowledge,
    planner: &mut dyn Planner,
    cfg: &AdaptationConfig,
    clock: &dyn Clock,
) -> Result<(AdaptationOutcome, SystemKnowledge), ControllerError> {
    let started = clock.now();
    let robot = world
        .robot(failed_robot.as_str())
        .ok_or_else(|| ControllerError::UnknownRobot(failed_robot.clone()))?;
    if !robot.status.is_failed() {
        return Err(ControllerError::NotFailed(failed_robot.clone()));
    }

    let mut ctx = gather_context(world, failed_robot)?;
    ctx.options = cfg.validation_options();
    let orphaned: Vec<TaskId> = ctx.orphaned_tasks.iter().map(|t| t.id.clone()).collect();
    info!(robot = %failed_robot, orphaned = orphaned.len(), candidates = ctx.candidates.len(), "adaptation started");

    let mut outcome = AdaptationOutcome {
        failed_robot: failed_robot.clone(),
        status: AdaptationStatus::NoCandidates,
        episode: Vec::new(),
        final_plan: None,
        attempts_used: 0,
        adaptation_time: Duration::ZERO,
        reassigned_tasks: Vec::new(),
        excluded_tasks: Vec::new(),
        unassigned_tasks: Vec::new(),
    };

    if ctx.candidates.is_empty() {
        warn!(robot = %failed_robot, "no surviving robot to take over");
        outcome.unassigned_tasks = orphaned.clone();
        outcome.adaptation_time = clock.now().saturating_sub(started);
        return Ok((outcome, release_tasks(world, &orphaned)));
    }

    let max_attempts = cfg.max_retries.saturating_add(1);
    for attempt_number in 1..=max_attempts {
        let prompt = build_prompt(&ctx);
        let call_started = clock.now();
        let response = planner.respond(&ctx, &prompt);
        clock.planner_call_finished();
        let response = match response {
            Ok(_) if clock.now().saturating_sub(call_started) > cfg.planner_deadline => Err(PlannerError::Timeout),
            other => other,
        };

        let (raw_response, attempt) = match response {
            Ok(text) => {
                let judged = match parse_plan(&text, &ctx) {
                    Ok(plan) => judge_plan(plan, &ctx, world),
                    Err(failure) => Judgement::unparseable(failure),
                };
                (text, judged)
            }
            Err(PlannerError::Parse(failure)) => (String::new(), Judgement::unparseable(failure)),
            Err(e) => (
                String::new(),
                Judgement {
                    plan: None,
                    verdicts: BTreeMap::new(),
                    rejection: Some(Rejection::PlannerFailed { error: e.to_string() }),
                },
            ),
        };

        outcome.attempts_used = attempt_number;
        let accepted = attempt.rejection.is_none();
        outcome.episode.push(PlannerExchange {
            attempt_number,
            prompt,
            raw_response,
            result: match (&attempt.plan, &attempt.rejection) {
                (_, Some(rejection)) => AttemptResult::Failed {
                    rejection: rejection.clone(),
                },
                (Some(plan), None) => AttemptResult::Plan { plan: plan.clone() },
                (None, None) => unreachable!("accepted attempt without a plan"),
            },
            verdicts: attempt.verdicts.clone(),
            accepted,
        });

        match attempt.rejection {
            None => {
                let plan = attempt.plan.expect("accepted plan");
                let next = apply_plan(world, &ctx, &plan, &mut outcome)?;
                outcome.status = AdaptationStatus::Succeeded;
                outcome.final_plan = Some(plan);
                outcome.adaptation_time = clock.now().saturating_sub(started);
                info!(
                    robot = %failed_robot,
                    attempts = attempt_number,
                    reassigned = outcome.reassigned_tasks.len(),
                    excluded = outcome.excluded_tasks.len(),
                    "adaptation succeeded"
                );
                return Ok((outcome, next));
            }
            Some(rejection) => {
                debug!(attempt = attempt_number, code = rejection.code(), "attempt rejected");
                ctx.feedback_history.push(FeedbackEntry {
                    attempt_number,
                    rejected_plan: attempt.plan,
                    rejection,
                });
            }
        }
    }

    warn!(robot = %failed_robot, attempts = outcome.attempts_used, "retry limit reached");
    outcome.status = AdaptationStatus::ExhaustedRetries;
    outcome.unassigned_tasks = orphaned.clone();
    outcome.adaptation_time = clock.now().saturating_sub(started);
    Ok((outcome, release_tasks(world, &orphaned)))
}

struct Judgement {
    plan: Option<ProposedPlan>,
    verdicts: BTreeMap<TaskId, Verdict>,
    rejection: Option<Rejection>,
}

impl Judgement {
    fn unparseable(failure: ParseFailure) -> Self {
        Self {
            plan: None,
            verdicts: BTreeMap::new(),
            rejection: Some(Rejection::Unparseable { failure }),
        }
    }
}

/// Validates every claimed task, plus every task the exploration robot
/// already holds, under the proposed configuration.
fn judge_plan(plan: ProposedPlan, ctx: &DisruptionContext, world: &SystemKnowledge) -> Judgement {
    let robot_id = &plan.exploration_robot;
    let held = world.tasks_assigned_to(robot_id);
    let claimed = plan.claimed_tasks.iter().filter_map(|id| ctx.orphaned(id.as_str()));
    let mut verdicts = BTreeMap::new();
    let mut violations = Vec::new();
    for task in claimed.chain(held) {
        let verdict = validate_assignment_with(task, &plan.updated_config, world, ctx.options);
        if !verdict.valid {
            violations.push(TaskViolation {
                task: task.id.clone(),
                verdict: verdict.clone(),
            });
        }
        verdicts.insert(task.id.clone(), verdict);
    }

    let rejection = if !violations.is_empty() {
        Some(Rejection::Invalid { violations })
    } else {
        plan.updated_config
            .check()
            .err()
            .map(|reason| Rejection::InvalidConfiguration { reason })
    };
    Judgement {
        plan: Some(plan),
        verdicts,
        rejection,
    }
}

fn apply_plan(
    world: &SystemKnowledge,
    ctx: &DisruptionContext,
    plan: &ProposedPlan,
    outcome: &mut AdaptationOutcome,
) -> Result<SystemKnowledge, ControllerError> {
    let mut next = refresh_configuration(world, &plan.exploration_robot, plan.updated_config.clone())?;
    for task in &ctx.orphaned_tasks {
        if plan.claimed_tasks.contains(&task.id) {
            next.assignments.insert(task.id.clone(), plan.exploration_robot.clone());
            outcome.reassigned_tasks.push(task.id.clone());
        } else {
            next.assignments.remove(&task.id);
            outcome.excluded_tasks.push(ExcludedTask {
                task: task.id.clone(),
                verdict: validate_assignment_with(task, &plan.updated_config, world, ctx.options),
            });
        }
    }
    Ok(next)
}

fn release_tasks(world: &SystemKnowledge, tasks: &[TaskId]) -> SystemKnowledge {
    let mut next = world.clone();
    for task in tasks {
        next.assignments.remove(task);
    }
    next
}

/// The controller as a long-lived agent: owns the world, queues failure
/// notifications and processes them one at a time in arrival order.
pub struct CentralController<P: Planner, C: Clock = WallClock> {
    world: SystemKnowledge,
    planner: P,
    cfg: AdaptationConfig,
    clock: C,
    inbox: VecDeque<RobotId>,
}

impl<P: Planner, C: Clock> CentralController<P, C> {
    pub fn new(world: SystemKnowledge, planner: P, cfg: AdaptationConfig, clock: C) -> Self {
        Self {
            world,
            planner,
            cfg,
            clock,
            inbox: VecDeque::new(),
        }
    }

    /// Immutable snapshot of the current world.
    pub fn world(&self) -> &SystemKnowledge {
        &self.world
    }

    pub fn clock(&self) -> &C {
        &self.clock
    }

    pub fn world_mut(&mut self) -> &mut SystemKnowledge {
        &mut self.world
    }

    /// Marks the robot failed and queues the notification.
    pub fn notify_failure(&mut self, robot: RobotId) {
        if let Some(r) = self.world.robot_mut(robot.as_str()) {
            r.status = RobotStatus::Failed;
        }
        if !self.inbox.contains(&robot) {
            self.inbox.push_back(robot);
        }
    }

    pub fn pending(&self) -> usize {
        self.inbox.len()
    }

    /// Handles every queued failure, oldest first.
    pub fn process_pending(&mut self) -> Result<Vec<AdaptationOutcome>, ControllerError> {
        let mut outcomes = Vec::new();
        while let Some(robot) = self.inbox.pop_front() {
            let (outcome, next) = handle_failure(&robot, &self.world, &mut self.planner, &self.cfg, &self.clock)?;
            self.world = next;
            outcomes.push(outcome);
        }
        Ok(outcomes)
    }
}
