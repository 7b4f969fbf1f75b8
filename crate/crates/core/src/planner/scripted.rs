use super::{DisruptionContext, Planner, PlannerError, PromptText};
use std::collections::VecDeque;

/// Replays a fixed list of responses, one per call.
#[derive(Debug, Clone, Default)]
pub struct ScriptedPlanner {
    responses: VecDeque<Result<String, PlannerError>>,
    repeat_last: bool,
    last: Option<Result<String, PlannerError>>,
    prompts: Vec<PromptText>,
}

impl ScriptedPlanner {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::from_results(responses.into_iter().map(|s| Ok(s.into())))
    }

    pub fn from_results(responses: impl IntoIterator<Item = Result<String, PlannerError>>) -> Self {
        Self {
            responses: responses.into_iter().collect(),
            ..Self::default()
        }
    }

    /// Answers every call with the same text.
    pub fn repeating(response: impl Into<String>) -> Self {
        Self {
            repeat_last: true,
            last: Some(Ok(response.into())),
            ..Self::default()
        }
    }

    /// Prompts received so far, in call order.
    pub fn prompts(&self) -> &[PromptText] {
        &self.prompts
    }
}

impl Planner for ScriptedPlanner {
    fn name(&self) -> &str {
        "scripted"
    }

    fn respond(&mut self, _ctx: &DisruptionContext, prompt: &PromptText) -> Result<String, PlannerError> {
        self.prompts.push(prompt.clone());
        match self.responses.pop_front() {
            Some(next) => {
                self.last = Some(next.clone());
                next
            }
            None if self.repeat_last => self.last.clone().unwrap_or(Err(PlannerError::ScriptExhausted)),
            None => Err(PlannerError::ScriptExhausted),
        }
    }
}
