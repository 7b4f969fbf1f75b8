//! Candidate reassignment planners.
//!
//! Every planner answers a [`DisruptionContext`] with response *text*; the
//! controller runs that text through [`parse_plan`] so LLM-backed and
//! deterministic planners share one validation path.

mod llm;
mod oracle;
mod parse;
mod prompt;
mod scripted;

pub use llm::{
    chat_request_body, extract_reply_content, ChatEndpointConfig, ChatTransport, HttpReply, LlmPlanner,
    ScriptedEndpoint, ScriptedReply, TransportError, UreqTransport, API_KEY_ENV,
};
pub use oracle::{oracle_plan, NoFeasiblePlan, OraclePlanner};
pub use parse::{parse_plan, serialize_plan, ParseFailure};
pub use prompt::{build_prompt, PromptSection, PromptText, SECTION_HEADINGS};
pub use scripted::ScriptedPlanner;

use crate::constraints::{ValidationOptions, Verdict};
use crate::ids::{RobotId, TaskId};
use crate::scenario::world_to_file;
use crate::world::{CapabilityConfiguration, Robot, SystemKnowledge, TaskSpec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Everything a planner sees about one failure.
#[derive(Debug, Clone, PartialEq)]
pub struct DisruptionContext {
    pub disrupted_robot: Robot,
    /// Tasks that were assigned to the disrupted robot, in queue order.
    pub orphaned_tasks: Vec<TaskSpec>,
    /// Surviving robots, sorted by id.
    pub candidates: Vec<Robot>,
    pub world: SystemKnowledge,
    pub feedback_history: Vec<FeedbackEntry>,
    pub options: ValidationOptions,
}

impl DisruptionContext {
    pub fn candidate(&self, id: &str) -> Option<&Robot> {
        self.candidates.iter().find(|r| r.id == id)
    }

    pub fn orphaned(&self, id: &str) -> Option<&TaskSpec> {
        self.orphaned_tasks.iter().find(|t| t.id == id)
    }

    /// JSON block embedded verbatim in the system-level section of every prompt.
    pub fn system_data_json(&self) -> String {
        #[derive(Serialize)]
        struct SystemData<'a> {
            disrupted_robot: &'a Robot,
            candidate_robots: Vec<&'a RobotId>,
            disrupted_tasks: Vec<&'a TaskId>,
            environment: crate::scenario::ScenarioFile,
        }
        let data = SystemData {
            disrupted_robot: &self.disrupted_robot,
            candidate_robots: self.candidates.iter().map(|r| &r.id).collect(),
            disrupted_tasks: self.orphaned_tasks.iter().map(|t| &t.id).collect(),
            environment: world_to_file(&self.world),
        };
        serde_json::to_string_pretty(&data).expect("context serializes")
    }
}

/// A reassignment proposal: the exploration robot, its updated configuration
/// and the orphaned tasks it takes over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposedPlan {
    pub exploration_robot: RobotId,
    pub updated_config: CapabilityConfiguration,
    pub claimed_tasks: Vec<TaskId>,
    #[serde(default)]
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskViolation {
    pub task: TaskId,
    pub verdict: Verdict,
}

/// Why an attempt was rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rejection {
    /// At least one task failed validation under the proposed configuration.
    Invalid {
        violations: Vec<TaskViolation>,
    },
    /// The proposed configuration is structurally unusable.
    InvalidConfiguration {
        reason: String,
    },
    Unparseable {
        failure: ParseFailure,
    },
    PlannerFailed {
        error: String,
    },
}

impl Rejection {
    pub fn code(&self) -> &'static str {
        match self {
            Rejection::Invalid { .. } => "VALIDATION_FAILED",
            Rejection::InvalidConfiguration { .. } => "INVALID_CONFIGURATION",
            Rejection::Unparseable { failure } => failure.code(),
            Rejection::PlannerFailed { .. } => "PLANNER_ERROR",
        }
    }
}

/// A rejected attempt, carried into every later prompt of the episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEntry {
    pub attempt_number: u32,
    pub rejected_plan: Option<ProposedPlan>,
    pub rejection: Rejection,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerError {
    #[error("planner call timed out")]
    Timeout,
    #[error("endpoint answered HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed chat reply: {0}")]
    BadReply(String),
    #[error(transparent)]
    Parse(#[from] ParseFailure),
    #[error("no candidate robot can take any disrupted task")]
    NoFeasiblePlan,
    #[error("scripted planner has no responses left")]
    ScriptExhausted,
}

/// Source of candidate plans.
pub trait Planner {
    fn name(&self) -> &str;

    /// Produces raw response text for the given context and rendered prompt.
    fn respond(&mut self, ctx: &DisruptionContext, prompt: &PromptText) -> Result<String, PlannerError>;
}

impl<P: Planner + ?Sized> Planner for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn respond(&mut self, ctx: &DisruptionContext, prompt: &PromptText) -> Result<String, PlannerError> {
        (**self).respond(ctx, prompt)
    }
}
