//! Discrete-event stand-in for the physical cell.
//!
//! Agents advance on a shared logical clock, one step per time unit. Failure
//! notifications are routed to the central controller, whose applied
//! reassignments come back as `ConfigRefreshed` and `TaskAssigned` events.

pub mod agent;
pub mod fault;
pub mod sensor;
mod trace;

pub use agent::{AgentEvent, AgentStatus, EventKind, RobotAgent};
pub use fault::{FaultEntry, FaultScript, FaultTrigger};
pub use sensor::observe;
pub use trace::{TraceRecord, TrialTrace};

use crate::controller::{AdaptationConfig, AdaptationStatus, CentralController, Clock, ControllerError};
use crate::ids::{RobotId, TaskId};
use crate::planner::Planner;
use crate::world::{RobotStatus, SystemKnowledge, WorldError};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

pub const DEFAULT_EVENT_LIMIT: usize = 10_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("event limit {limit} exceeded at logical time {time}")]
    EventLimitExceeded { limit: usize, time: u64 },
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
}

/// Runs one trial to completion.
///
/// Stops once no task is assigned any more. Both the number of recorded
/// events and the logical time are capped by `event_limit`.
pub fn run_simulation<P: Planner, C: Clock>(
    world: &SystemKnowledge,
    faults: &FaultScript,
    planner: P,
    cfg: &AdaptationConfig,
    clock: C,
    event_limit: usize,
) -> Result<TrialTrace, SimError> {
    world.validate()?;
    let mut cca = CentralController::new(world.clone(), planner, cfg.clone(), clock);
    let mut agents: BTreeMap<RobotId, RobotAgent> = world
        .robots
        .values()
        .filter(|r| !r.status.is_failed())
        .map(|r| (r.id.clone(), RobotAgent::new(r.id.clone(), faults.trigger_for(&r.id))))
        .collect();

    let mut trace = TrialTrace::default();
    let mut completed: BTreeSet<TaskId> = BTreeSet::new();
    let mut excluded: BTreeSet<TaskId> = BTreeSet::new();
    let mut unassigned: BTreeSet<TaskId> = world
        .tasks
        .iter()
        .filter(|t| !world.assignments.contains_key(&t.id))
        .map(|t| t.id.clone())
        .collect();

    let mut inbound: Vec<AgentEvent> = world
        .tasks
        .iter()
        .filter_map(|t| {
            world
                .assignments
                .get(&t.id)
                .map(|r| AgentEvent::new(EventKind::TaskAssigned, r.clone(), Some(t.id.clone()), 0))
        })
        .collect();
    for event in &inbound {
        trace.push_event(event.clone());
    }

    let mut now: u64 = 0;
    loop {
        if trace.event_count() > event_limit || now > event_limit as u64 {
            return Err(SimError::EventLimitExceeded {
                limit: event_limit,
                time: now,
            });
        }

        let mut emitted = Vec::new();
        for agent in agents.values_mut() {
            emitted.extend(agent.step(cca.world(), &inbound, now));
        }
        inbound.clear();

        for event in emitted {
            apply_agent_event(&mut cca, &event, &mut completed);
            trace.push_event(event);
        }

        for outcome in cca.process_pending()? {
            match outcome.status {
                AdaptationStatus::Succeeded => {
                    let plan = outcome.final_plan.as_ref().expect("succeeded outcome has a plan");
                    let mut follow_up = vec![AgentEvent::new(
                        EventKind::ConfigRefreshed,
                        plan.exploration_robot.clone(),
                        None,
                        now,
                    )];
                    follow_up.extend(outcome.reassigned_tasks.iter().map(|t| {
                        AgentEvent::new(
                            EventKind::TaskAssigned,
                            plan.exploration_robot.clone(),
                            Some(t.clone()),
                            now,
                        )
                    }));
                    for event in follow_up {
                        trace.push_event(event.clone());
                        inbound.push(event);
                    }
                    excluded.extend(outcome.excluded_tasks.iter().map(|e| e.task.clone()));
                }
                AdaptationStatus::ExhaustedRetries | AdaptationStatus::NoCandidates => {
                    unassigned.extend(outcome.unassigned_tasks.iter().cloned());
                }
            }
            trace.push_adaptation(outcome);
        }

        if cca.world().assignments.is_empty() && cca.pending() == 0 {
            break;
        }
        now += 1;
    }

    let final_world = cca.world().clone();
    trace.finish(
        completed.into_iter().collect(),
        excluded.into_iter().collect(),
        unassigned.into_iter().collect(),
        final_world,
        now,
    );
    Ok(trace)
}

fn apply_agent_event<P: Planner, C: Clock>(
    cca: &mut CentralController<P, C>,
    event: &AgentEvent,
    completed: &mut BTreeSet<TaskId>,
) {
    match event.kind {
        EventKind::TaskStarted => {
            if let (Some(robot), Some(task)) = (cca.world_mut().robot_mut(event.robot.as_str()), &event.task) {
                robot.status = RobotStatus::Executing(task.clone());
            }
        }
        EventKind::TaskCompleted => {
            let world = cca.world_mut();
            if let Some(task) = &event.task {
                world.assignments.remove(task);
                completed.insert(task.clone());
            }
            if let Some(robot) = world.robot_mut(event.robot.as_str()) {
                robot.status = RobotStatus::Idle;
            }
        }
        EventKind::FailureNotification => cca.notify_failure(event.robot.clone()),
        EventKind::TaskAssigned | EventKind::ConfigRefreshed => {}
    }
}
