//! Simulated robot agent: task manager queue, sensor input, a controller that
//! turns tasks into timed executions, and a passive health monitor driven by
//! the fault script.

use super::fault::FaultTrigger;
use super::sensor::observe;
use crate::ids::{RobotId, TaskId};
use crate::world::SystemKnowledge;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use tracing::warn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    TaskAssigned,
    TaskStarted,
    TaskCompleted,
    FailureNotification,
    ConfigRefreshed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentEvent {
    pub kind: EventKind,
    pub robot: RobotId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskId>,
    pub time: u64,
}

impl AgentEvent {
    pub fn new(kind: EventKind, robot: RobotId, task: Option<TaskId>, time: u64) -> Self {
        Self {
            kind,
            robot,
            task,
            time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentStatus {
    Idle,
    Executing { task: TaskId, until: u64 },
    Failed,
}

#[derive(Debug, Clone)]
pub struct RobotAgent {
    id: RobotId,
    status: AgentStatus,
    queue: VecDeque<TaskId>,
    completed: u32,
    fault: Option<FaultTrigger>,
}

impl RobotAgent {
    pub fn new(id: RobotId, fault: Option<FaultTrigger>) -> Self {
        Self {
            id,
            status: AgentStatus::Idle,
            queue: VecDeque::new(),
            completed: 0,
            fault,
        }
    }

    pub fn id(&self) -> &RobotId {
        &self.id
    }

    pub fn status(&self) -> &AgentStatus {
        &self.status
    }

    pub fn queue(&self) -> impl Iterator<Item = &TaskId> {
        self.queue.iter()
    }

    pub fn completed(&self) -> u32 {
        self.completed
    }

    pub fn is_failed(&self) -> bool {
        self.status == AgentStatus::Failed
    }

    pub fn is_busy(&self) -> bool {
        matches!(self.status, AgentStatus::Executing { .. })
    }

    fn fault_due(&self, now: u64) -> bool {
        match self.fault {
            Some(FaultTrigger::AfterTasksCompleted(n)) => self.completed >= n,
            Some(FaultTrigger::AtLogicalTime(t)) => now >= t,
            None => false,
        }
    }

    fn fail(&mut self, now: u64, out: &mut Vec<AgentEvent>) {
        self.status = AgentStatus::Failed;
        self.queue.clear();
        out.push(AgentEvent::new(
            EventKind::FailureNotification,
            self.id.clone(),
            None,
            now,
        ));
    }

    /// Advances the agent to logical time `now`, consuming the events addressed to it.
    pub fn step(&mut self, world: &SystemKnowledge, inbound: &[AgentEvent], now: u64) -> Vec<AgentEvent> {
        let mut out = Vec::new();
        if self.is_failed() {
            for event in inbound.iter().filter(|e| e.robot == self.id) {
                warn!(robot = %self.id, kind = ?event.kind, "failed agent ignores event");
            }
            return out;
        }

        for event in inbound.iter().filter(|e| e.robot == self.id) {
            match (event.kind, &event.task) {
                (EventKind::TaskAssigned, Some(task)) => {
                    if !self.queue.contains(task) {
                        self.queue.push_back(task.clone());
                    }
                }
                (EventKind::ConfigRefreshed, _) => {}
                (kind, _) => warn!(robot = %self.id, ?kind, "unexpected inbound event ignored"),
            }
        }

        if let AgentStatus::Executing { task, until } = &self.status {
            if now >= *until {
                out.push(AgentEvent::new(
                    EventKind::TaskCompleted,
                    self.id.clone(),
                    Some(task.clone()),
                    now,
                ));
                self.completed += 1;
                self.status = AgentStatus::Idle;
            }
        }

        if self.fault_due(now) {
            self.fail(now, &mut out);
            return out;
        }

        if self.status == AgentStatus::Idle {
            self.start_next(world, now, &mut out);
        }
        out
    }

    fn start_next(&mut self, world: &SystemKnowledge, now: u64, out: &mut Vec<AgentEvent>) {
        // Drop queue entries that are no longer ours.
        while let Some(front) = self.queue.front() {
            if world.assignments.get(front) == Some(&self.id) {
                break;
            }
            self.queue.pop_front();
        }
        let Some(task_id) = self.queue.front() else {
            return;
        };
        let Some(task) = world.task(task_id.as_str()) else {
            self.queue.pop_front();
            return;
        };
        let visible = observe(&self.id, world).iter().any(|o| o.location == task.pickup);
        if !visible {
            return;
        }
        let task_id = self.queue.pop_front().expect("front exists");
        out.push(AgentEvent::new(
            EventKind::TaskStarted,
            self.id.clone(),
            Some(task_id.clone()),
            now,
        ));
        self.status = AgentStatus::Executing {
            until: now + task.duration,
            task: task_id,
        };
    }
}
