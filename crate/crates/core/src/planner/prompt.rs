use super::{DisruptionContext, FeedbackEntry, Rejection};
use crate::constraints::Constraint;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Section headings, in the order they appear in every prompt. The last one
/// is only present once an attempt has been rejected.
pub const SECTION_HEADINGS: [&str; 5] = [
    "Role and objectives",
    "Adaptation policy",
    "Task eligibility constraints",
    "System-level data",
    "Validation feedback",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSection {
    pub heading: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptText {
    pub sections: Vec<PromptSection>,
}

impl PromptText {
    pub fn section(&self, heading: &str) -> Option<&PromptSection> {
        self.sections.iter().find(|s| s.heading == heading)
    }

    pub fn feedback_section(&self) -> Option<&PromptSection> {
        self.section(SECTION_HEADINGS[4])
    }

    /// Number of rejected attempts listed in the feedback section.
    pub fn feedback_entry_count(&self) -> usize {
        self.feedback_section()
            .map(|s| s.body.lines().filter(|l| l.starts_with("Attempt ")).count())
            .unwrap_or(0)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, section) in self.sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "## {}\n", section.heading);
            out.push_str(section.body.trim_end());
            out.push('\n');
        }
        out
    }
}

const PLAN_SCHEMA: &str = r#"{
  "exploration_robot": "<id of one candidate robot>",
  "updated_config": { "<capability key>": <capability value>, ... },
  "claimed_tasks": ["<id of a disrupted task>", ...],
  "rationale": "<short explanation>"
}"#;

pub fn build_prompt(ctx: &DisruptionContext) -> PromptText {
    let mut sections = vec![
        PromptSection {
            heading: SECTION_HEADINGS[0].into(),
            body: role_section(ctx),
        },
        PromptSection {
            heading: SECTION_HEADINGS[1].into(),
            body: policy_section(),
        },
        PromptSection {
            heading: SECTION_HEADINGS[2].into(),
            body: eligibility_section(ctx),
        },
        PromptSection {
            heading: SECTION_HEADINGS[3].into(),
            body: format!(
                "The complete manufacturing environment follows as JSON. Lengths are millimetres, \
                 angles degrees.\n\n{}",
                ctx.system_data_json()
            ),
        },
    ];
    if !ctx.feedback_history.is_empty() {
        sections.push(PromptSection {
            heading: SECTION_HEADINGS[4].into(),
            body: feedback_section(&ctx.feedback_history),
        });
    }
    PromptText { sections }
}

fn role_section(ctx: &DisruptionContext) -> String {
    let tasks: Vec<&str> = ctx.orphaned_tasks.iter().map(|t| t.id.as_str()).collect();
    let candidates: Vec<&str> = ctx.candidates.iter().map(|r| r.id.as_str()).collect();
    format!(
        "You act as the central controller agent of a multi-robot manufacturing system. \
         Robot {} has failed and can no longer execute its tasks.\n\
         Objective: reassign the disrupted tasks to a single exploration robot chosen from the \
         candidate robots, so that production continues safely.\n\
         Disrupted tasks: [{}]\n\
         Candidate robots: [{}]",
        ctx.disrupted_robot.id,
        tasks.join(", "),
        candidates.join(", ")
    )
}

fn policy_section() -> String {
    format!(
        "- Select exactly one exploration robot from the candidate robots.\n\
         - Use the existing configuration of that robot as a baseline and update only the fields \
         directly relevant to the tasks you claim. Keep every other field unchanged.\n\
         - Claim only tasks that are valid under your updated configuration. Leave out any task \
         you cannot make valid; it will be excluded from the assignment.\n\
         - The updated configuration must remain valid for the tasks the robot already holds.\n\
         - Answer with one JSON object and nothing else, using exactly these keys:\n{PLAN_SCHEMA}"
    )
}

fn eligibility_section(ctx: &DisruptionContext) -> String {
    let mut out = String::from(
        "A task may be claimed only if every one of its constraints holds for the updated configuration:\n\
         - reachability: the checked endpoint positions lie inside the `reachability` region \
         (boxes and discs include their boundary).\n\
         - sensor_coverage: for every required modality, one sensor the robot can access through its \
         `sensing` entry (by sensor id or modality) covers both the pickup and the drop-off location.\n\
         - tool_capability: the `tool` entry lists the required tool.\n",
    );
    if ctx.options.dropoff_only {
        out.push_str("Reachability is checked at drop-off locations only.\n");
    } else {
        out.push_str("Reachability is checked at pickup and drop-off locations unless a constraint says otherwise.\n");
    }
    out.push_str("\nDisrupted tasks:\n");
    for task in &ctx.orphaned_tasks {
        let constraints: Vec<String> = task.constraints.iter().map(describe_constraint).collect();
        let modalities: Vec<&str> = task.required_modalities.iter().map(String::as_str).collect();
        let _ = writeln!(
            out,
            "- {}: pickup {}, drop-off {}, modalities [{}], tool {}, constraints [{}]",
            task.id,
            task.pickup,
            task.dropoff,
            modalities.join(", "),
            task.required_tool.as_deref().unwrap_or("none"),
            constraints.join(", ")
        );
    }
    out
}

fn describe_constraint(c: &Constraint) -> String {
    serde_json::to_string(c).expect("constraint serializes")
}

fn feedback_section(history: &[FeedbackEntry]) -> String {
    let mut out =
        String::from("Your previous responses failed validation. Correct every listed problem in your next answer.\n");
    let mut entries: Vec<&FeedbackEntry> = history.iter().collect();
    entries.sort_by_key(|e| e.attempt_number);
    for entry in entries {
        out.push('\n');
        match &entry.rejected_plan {
            Some(plan) => {
                let claimed: Vec<&str> = plan.claimed_tasks.iter().map(|t| t.as_str()).collect();
                let _ = writeln!(
                    out,
                    "Attempt {} rejected ({}): robot {} claiming [{}]",
                    entry.attempt_number,
                    entry.rejection.code(),
                    plan.exploration_robot,
                    claimed.join(", ")
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "Attempt {} rejected ({})",
                    entry.attempt_number,
                    entry.rejection.code()
                );
            }
        }
        match &entry.rejection {
            Rejection::Invalid { violations } => {
                for tv in violations {
                    for v in &tv.verdict.violations {
                        let _ = writeln!(
                            out,
                            "  - task {}: {} (constraint {}): {}",
                            tv.task, v.code, v.constraint_index, v.reason
                        );
                    }
                }
            }
            Rejection::InvalidConfiguration { reason } => {
                let _ = writeln!(out, "  - updated_config: {reason}");
            }
            Rejection::Unparseable { failure } => {
                let _ = writeln!(out, "  - response: {failure}");
            }
            Rejection::PlannerFailed { error } => {
                let _ = writeln!(out, "  - planner: {error}");
            }
        }
    }
    out
}
