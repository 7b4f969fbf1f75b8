use super::{DisruptionContext, ProposedPlan};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "reason", rename_all = "snake_case")]
pub enum ParseFailure {
    #[error("NO_JSON_FOUND: response contains no JSON object")]
    NoJsonFound,
    #[error("SCHEMA_MISMATCH: {0}")]
    SchemaMismatch(String),
    #[error("UNKNOWN_REFERENCE: {0}")]
    UnknownReference(String),
}

impl ParseFailure {
    pub fn code(&self) -> &'static str {
        match self {
            ParseFailure::NoJsonFound => "NO_JSON_FOUND",
            ParseFailure::SchemaMismatch(_) => "SCHEMA_MISMATCH",
            ParseFailure::UnknownReference(_) => "UNKNOWN_REFERENCE",
        }
    }
}

pub fn serialize_plan(plan: &ProposedPlan) -> String {
    serde_json::to_string_pretty(plan).expect("plan serializes")
}

/// Extracts the plan object from free-form response text and checks its
/// references against the context.
pub fn parse_plan(response_text: &str, ctx: &DisruptionContext) -> Result<ProposedPlan, ParseFailure> {
    let objects: Vec<serde_json::Value> = json_object_spans(response_text)
        .into_iter()
        .filter_map(|span| serde_json::from_str::<serde_json::Value>(span).ok())
        .filter(|v| v.is_object())
        .collect();
    if objects.is_empty() {
        return Err(ParseFailure::NoJsonFound);
    }

    let mut plans = Vec::new();
    let mut first_error = None;
    for value in objects {
        match serde_json::from_value::<ProposedPlan>(value) {
            Ok(plan) => plans.push(plan),
            Err(e) => {
                first_error.get_or_insert(e.to_string());
            }
        }
    }
    let plan = match plans.len() {
        1 => plans.pop().expect("one plan"),
        0 => return Err(ParseFailure::SchemaMismatch(first_error.unwrap_or_default())),
        n => {
            return Err(ParseFailure::SchemaMismatch(format!(
                "{n} plan objects found, expected one"
            )))
        }
    };

    if plan.exploration_robot == ctx.disrupted_robot.id {
        return Err(ParseFailure::UnknownReference(format!(
            "exploration_robot {} is the disrupted robot",
            plan.exploration_robot
        )));
    }
    if ctx.candidate(plan.exploration_robot.as_str()).is_none() {
        return Err(ParseFailure::UnknownReference(format!(
            "exploration_robot {} is not a candidate robot",
            plan.exploration_robot
        )));
    }
    let mut seen = BTreeSet::new();
    for task in &plan.claimed_tasks {
        if ctx.orphaned(task.as_str()).is_none() {
            return Err(ParseFailure::UnknownReference(format!(
                "claimed task {task} is not a disrupted task"
            )));
        }
        if !seen.insert(task) {
            return Err(ParseFailure::SchemaMismatch(format!("task {task} claimed twice")));
        }
    }
    Ok(plan)
}

/// Byte spans of balanced top-level `{...}` blocks, ignoring braces inside strings.
fn json_object_spans(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'{' {
            i += 1;
            continue;
        }
        match matching_brace(bytes, i) {
            Some(end) => {
                spans.push(&text[i..=end]);
                i = end + 1;
            }
            None => i += 1,
        }
    }
    spans
}

fn matching_brace(bytes: &[u8], start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (offset, &b) in bytes[start..].iter().enumerate() {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(start + offset);
                }
            }
            _ => {}
        }
    }
    None
}
