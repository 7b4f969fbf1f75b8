//! Boolean task constraints over capability configurations.
//!
//! A reassignment of a task to a robot is valid iff every constraint of the
//! task holds for the robot's (possibly updated) configuration. Evaluation
//! never fails: a configuration that lacks the capability a constraint
//! inspects simply violates it with [`ViolationCode::MissingCapability`].

use crate::ids::TaskId;
use crate::world::{
    CapabilityConfiguration, CapabilityLookup, Region, SystemKnowledge, TaskSpec, REACHABILITY, SENSING, TOOL,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

/// Which task endpoints a reachability constraint checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoints {
    #[default]
    Both,
    Pickup,
    Dropoff,
}

impl Endpoints {
    fn is_both(&self) -> bool {
        *self == Endpoints::Both
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Constraint {
    Reachability {
        #[serde(default, skip_serializing_if = "Endpoints::is_both")]
        endpoints: Endpoints,
    },
    /// Defaults to the task's `required_modalities` when `modalities` is absent.
    SensorCoverage {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        modalities: Option<BTreeSet<String>>,
    },
    /// Defaults to the task's `required_tool` when `tool` is absent.
    ToolCapability {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tool: Option<String>,
    },
}

impl Constraint {
    pub fn reachability() -> Self {
        Constraint::Reachability {
            endpoints: Endpoints::Both,
        }
    }

    pub fn sensor_coverage() -> Self {
        Constraint::SensorCoverage { modalities: None }
    }

    pub fn tool(tool: impl Into<String>) -> Self {
        Constraint::ToolCapability {
            tool: Some(tool.into()),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Constraint::Reachability { .. } => "reachability",
            Constraint::SensorCoverage { .. } => "sensor_coverage",
            Constraint::ToolCapability { .. } => "tool_capability",
        }
    }
}

/// Ordered constraints of one task. May be empty, in which case every
/// configuration is valid for the task.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConstraintSet(Vec<Constraint>);

impl ConstraintSet {
    pub fn new(constraints: Vec<Constraint>) -> Self {
        Self(constraints)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Constraint> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Constraint] {
        &self.0
    }
}

impl FromIterator<Constraint> for ConstraintSet {
    fn from_iter<I: IntoIterator<Item = Constraint>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    ReachViolation,
    SensorGap,
    ToolMismatch,
    MissingCapability,
}

impl ViolationCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ViolationCode::ReachViolation => "REACH_VIOLATION",
            ViolationCode::SensorGap => "SENSOR_GAP",
            ViolationCode::ToolMismatch => "TOOL_MISMATCH",
            ViolationCode::MissingCapability => "MISSING_CAPABILITY",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint_index: usize,
    pub code: ViolationCode,
    pub reason: String,
}

/// Result of validating one task against one configuration.
///
/// `valid` is true exactly when `violations` is empty; build values through
/// [`Verdict::from_violations`] to keep the two in step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl Verdict {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            valid: violations.is_empty(),
            violations,
        }
    }

    pub fn valid() -> Self {
        Self::from_violations(Vec::new())
    }
}

/// Global evaluation switches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ValidationOptions {
    /// Check only drop-off locations for every reachability constraint.
    pub dropoff_only: bool,
}

/// A failed constraint before it is attached to a position in a set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: ViolationCode,
    pub reason: String,
}

impl Failure {
    fn new(code: ViolationCode, reason: impl Into<String>) -> Self {
        Self {
            code,
            reason: reason.into(),
        }
    }

    fn missing(key: &str, lookup: CapabilityLookup) -> Self {
        let reason = match lookup {
            CapabilityLookup::Missing => format!("configuration has no `{key}` entry"),
            CapabilityLookup::WrongType { found } => {
                format!("configuration entry `{key}` has the wrong type ({found})")
            }
        };
        Self::new(ViolationCode::MissingCapability, reason)
    }
}

pub fn evaluate(c: &Constraint, task: &TaskSpec, config: &CapabilityConfiguration, world: &SystemKnowledge) -> bool {
    check(c, task, config, world, ValidationOptions::default()).is_ok()
}

/// Evaluates one constraint, reporting why it failed.
pub fn check(
    c: &Constraint,
    task: &TaskSpec,
    config: &CapabilityConfiguration,
    world: &SystemKnowledge,
    opts: ValidationOptions,
) -> Result<(), Failure> {
    match c {
        Constraint::Reachability { endpoints } => {
            let endpoints = if opts.dropoff_only {
                Endpoints::Dropoff
            } else {
                *endpoints
            };
            check_reachability(endpoints, task, config, world)
        }
        Constraint::SensorCoverage { modalities } => {
            let required = modalities.as_ref().unwrap_or(&task.required_modalities);
            check_sensor_coverage(required, task, config, world)
        }
        Constraint::ToolCapability { tool } => match tool.as_ref().or(task.required_tool.as_ref()) {
            Some(tool) => check_tool(tool, config),
            None => Ok(()),
        },
    }
}

fn check_reachability(
    endpoints: Endpoints,
    task: &TaskSpec,
    config: &CapabilityConfiguration,
    world: &SystemKnowledge,
) -> Result<(), Failure> {
    let region = config.reachability().map_err(|e| Failure::missing(REACHABILITY, e))?;
    let checked: &[(&str, &crate::ids::LocationId)] = match endpoints {
        Endpoints::Both => &[("pickup", &task.pickup), ("dropoff", &task.dropoff)],
        Endpoints::Pickup => &[("pickup", &task.pickup)],
        Endpoints::Dropoff => &[("dropoff", &task.dropoff)],
    };
    let mut outside = Vec::new();
    for (role, loc_id) in checked {
        match world.location(loc_id.as_str()) {
            Some(loc) if region.contains(loc.position) => {}
            Some(loc) => outside.push(format!(
                "{role} {} at ({}, {}, {}) mm",
                loc.id, loc.position.x, loc.position.y, loc.position.z
            )),
            None => outside.push(format!("{role} {loc_id} (unknown location)")),
        }
    }
    if outside.is_empty() {
        Ok(())
    } else {
        Err(Failure::new(
            ViolationCode::ReachViolation,
            format!(
                "{} outside reachability {}",
                outside.join(" and "),
                describe_region(region)
            ),
        ))
    }
}

fn check_sensor_coverage(
    required: &BTreeSet<String>,
    task: &TaskSpec,
    config: &CapabilityConfiguration,
    world: &SystemKnowledge,
) -> Result<(), Failure> {
    config.list(SENSING).map_err(|e| Failure::missing(SENSING, e))?;
    let accessible = world.accessible_sensors(config);
    let gaps: Vec<&str> = required
        .iter()
        .filter(|m| {
            !accessible
                .iter()
                .any(|s| s.modality == **m && s.covers(&task.pickup) && s.covers(&task.dropoff))
        })
        .map(String::as_str)
        .collect();
    if gaps.is_empty() {
        Ok(())
    } else {
        Err(Failure::new(
            ViolationCode::SensorGap,
            format!(
                "no accessible {} sensor covers both {} and {}",
                gaps.join("/"),
                task.pickup,
                task.dropoff
            ),
        ))
    }
}

fn check_tool(tool: &str, config: &CapabilityConfiguration) -> Result<(), Failure> {
    let tools = config.list(TOOL).map_err(|e| Failure::missing(TOOL, e))?;
    if tools.contains(&tool) {
        Ok(())
    } else {
        Err(Failure::new(
            ViolationCode::ToolMismatch,
            format!("tool `{tool}` required, configuration offers [{}]", tools.join(", ")),
        ))
    }
}

fn describe_region(region: &Region) -> String {
    match region {
        Region::Box { min, max } => format!(
            "box [{}, {}, {}]..[{}, {}, {}]",
            min.x, min.y, min.z, max.x, max.y, max.z
        ),
        Region::Disc { center, radius, z } => format!(
            "disc center ({}, {}) radius {} z [{}, {}]",
            center[0], center[1], radius, z[0], z[1]
        ),
    }
}

pub fn validate_assignment(task: &TaskSpec, config: &CapabilityConfiguration, world: &SystemKnowledge) -> Verdict {
    validate_assignment_with(task, config, world, ValidationOptions::default())
}

/// Validates every constraint of `task`; violations are listed in constraint order.
pub fn validate_assignment_with(
    task: &TaskSpec,
    config: &CapabilityConfiguration,
    world: &SystemKnowledge,
    opts: ValidationOptions,
) -> Verdict {
    let violations = task
        .constraints
        .iter()
        .enumerate()
        .filter_map(|(constraint_index, c)| {
            check(c, task, config, world, opts).err().map(|f| Violation {
                constraint_index,
                code: f.code,
                reason: f.reason,
            })
        })
        .collect();
    Verdict::from_violations(violations)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub feasible: Vec<TaskId>,
    pub infeasible: Vec<(TaskId, Verdict)>,
}

impl Partition {
    pub fn is_feasible(&self, task: &TaskId) -> bool {
        self.feasible.contains(task)
    }
}

pub fn partition_feasible<'a>(
    tasks: impl IntoIterator<Item = &'a TaskSpec>,
    config: &CapabilityConfiguration,
    world: &SystemKnowledge,
) -> Partition {
    partition_feasible_with(tasks, config, world, ValidationOptions::default())
}

/// Splits `tasks` into those `config` can take on and those it cannot, preserving input order.
pub fn partition_feasible_with<'a>(
    tasks: impl IntoIterator<Item = &'a TaskSpec>,
    config: &CapabilityConfiguration,
    world: &SystemKnowledge,
    opts: ValidationOptions,
) -> Partition {
    let mut partition = Partition::default();
    for task in tasks {
        let verdict = validate_assignment_with(task, config, world, opts);
        if verdict.valid {
            partition.feasible.push(task.id.clone());
        } else {
            partition.infeasible.push((task.id.clone(), verdict));
        }
    }
    partition
}
