use super::{serialize_plan, DisruptionContext, Planner, PlannerError, PromptText, ProposedPlan};
use crate::constraints::partition_feasible_with;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoFeasiblePlan;

impl fmt::Display for NoFeasiblePlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("no candidate robot can take any disrupted task")
    }
}

impl std::error::Error for NoFeasiblePlan {}

/// Deterministic reference planner.
///
/// Keeps every candidate's existing configuration, and picks the candidate
/// that can validly take the most orphaned tasks (ties go to the smallest
/// robot id). The claimed set is everything that candidate can take.
pub fn oracle_plan(ctx: &DisruptionContext) -> Result<ProposedPlan, NoFeasiblePlan> {
    let mut best: Option<(&crate::world::Robot, Vec<crate::ids::TaskId>)> = None;
    let mut candidates: Vec<_> = ctx.candidates.iter().filter(|r| !r.status.is_failed()).collect();
    candidates.sort_by(|a, b| a.id.cmp(&b.id));
    for robot in candidates {
        let partition = partition_feasible_with(&ctx.orphaned_tasks, &robot.config, &ctx.world, ctx.options);
        let better = match &best {
            None => true,
            Some((_, feasible)) => partition.feasible.len() > feasible.len(),
        };
        if better {
            best = Some((robot, partition.feasible));
        }
    }
    match best {
        Some((robot, feasible)) if !feasible.is_empty() => Ok(ProposedPlan {
            exploration_robot: robot.id.clone(),
            updated_config: robot.config.clone(),
            rationale: format!(
                "{} can take {} of {} disrupted tasks with its existing configuration",
                robot.id,
                feasible.len(),
                ctx.orphaned_tasks.len()
            ),
            claimed_tasks: feasible,
        }),
        _ => Err(NoFeasiblePlan),
    }
}

/// [`oracle_plan`] behind the [`Planner`] interface.
#[derive(Debug, Default, Clone)]
pub struct OraclePlanner;

impl Planner for OraclePlanner {
    fn name(&self) -> &str {
        "oracle"
    }

    fn respond(&mut self, ctx: &DisruptionContext, _prompt: &PromptText) -> Result<String, PlannerError> {
        oracle_plan(ctx)
            .map(|plan| serialize_plan(&plan))
            .map_err(|_| PlannerError::NoFeasiblePlan)
    }
}
