use super::agent::AgentEvent;
use crate::controller::AdaptationOutcome;
use crate::ids::{RobotId, TaskId};
use crate::world::SystemKnowledge;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One line of an exported trial trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TraceRecord {
    Event(AgentEvent),
    Adaptation(Box<AdaptationOutcome>),
    Final {
        completed: Vec<TaskId>,
        excluded: Vec<TaskId>,
        unassigned: Vec<TaskId>,
        assignments: BTreeMap<TaskId, RobotId>,
        end_time: u64,
    },
}

/// Everything that happened in one trial, in order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialTrace {
    pub records: Vec<TraceRecord>,
    /// World at the end of the run; not part of the exported trace.
    pub final_world: Option<SystemKnowledge>,
}

impl TrialTrace {
    pub(super) fn push_event(&mut self, event: AgentEvent) {
        self.records.push(TraceRecord::Event(event));
    }

    pub(super) fn push_adaptation(&mut self, outcome: AdaptationOutcome) {
        self.records.push(TraceRecord::Adaptation(Box::new(outcome)));
    }

    pub(super) fn finish(
        &mut self,
        completed: Vec<TaskId>,
        excluded: Vec<TaskId>,
        unassigned: Vec<TaskId>,
        world: SystemKnowledge,
        end_time: u64,
    ) {
        self.records.push(TraceRecord::Final {
            completed,
            excluded,
            unassigned,
            assignments: world.assignments.clone(),
            end_time,
        });
        self.final_world = Some(world);
    }

    pub fn event_count(&self) -> usize {
        self.events().count()
    }

    pub fn events(&self) -> impl Iterator<Item = &AgentEvent> {
        self.records.iter().filter_map(|r| match r {
            TraceRecord::Event(e) => Some(e),
            _ => None,
        })
    }

    pub fn adaptations(&self) -> impl Iterator<Item = &AdaptationOutcome> {
        self.records.iter().filter_map(|r| match r {
            TraceRecord::Adaptation(a) => Some(a.as_ref()),
            _ => None,
        })
    }

    fn final_record(&self) -> Option<(&[TaskId], &[TaskId], &[TaskId])> {
        self.records.iter().rev().find_map(|r| match r {
            TraceRecord::Final {
                completed,
                excluded,
                unassigned,
                ..
            } => Some((completed.as_slice(), excluded.as_slice(), unassigned.as_slice())),
            _ => None,
        })
    }

    pub fn completed(&self) -> &[TaskId] {
        self.final_record().map(|f| f.0).unwrap_or_default()
    }

    pub fn excluded(&self) -> &[TaskId] {
        self.final_record().map(|f| f.1).unwrap_or_default()
    }

    pub fn unassigned(&self) -> &[TaskId] {
        self.final_record().map(|f| f.2).unwrap_or_default()
    }

    /// Newline-delimited JSON, one record per line.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("trace record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_ndjson(text: &str) -> Result<Self, serde_json::Error> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<Vec<TraceRecord>, _>>()?;
        Ok(Self {
            records,
            final_world: None,
        })
    }
}
