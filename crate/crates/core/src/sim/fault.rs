use crate::ids::RobotId;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FaultTrigger {
    /// Fail right after the n-th task completion (immediately when n = 0).
    AfterTasksCompleted(u32),
    /// Fail at the first step whose logical time is at least t.
    AtLogicalTime(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultEntry {
    pub robot: RobotId,
    pub trigger: FaultTrigger,
}

/// Injected failures for one trial, at most one per robot.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FaultScript {
    entries: Vec<FaultEntry>,
}

impl FaultScript {
    pub fn new(entries: Vec<FaultEntry>) -> Result<Self, String> {
        let mut seen = BTreeSet::new();
        for entry in &entries {
            if !seen.insert(&entry.robot) {
                return Err(format!("more than one fault scripted for robot {}", entry.robot));
            }
        }
        Ok(Self { entries })
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn single(robot: impl Into<RobotId>, trigger: FaultTrigger) -> Self {
        Self {
            entries: vec![FaultEntry {
                robot: robot.into(),
                trigger,
            }],
        }
    }

    pub fn entries(&self) -> &[FaultEntry] {
        &self.entries
    }

    pub fn trigger_for(&self, robot: &RobotId) -> Option<FaultTrigger> {
        self.entries.iter().find(|e| e.robot == *robot).map(|e| e.trigger)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
