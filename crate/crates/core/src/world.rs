//! The CCA's system knowledge: robots and their capability configurations,
//! buffers and machines, sensors, tasks and the current assignment map.
//!
//! Worlds are loaded from JSON scenario files (see `docs/formats.md`). All
//! lengths are millimetres and all angles degrees; the loader rejects any
//! other unit declaration.

use crate::constraints::{Constraint, ConstraintSet};
use crate::ids::{CapabilityKey, LocationId, ObjectId, RobotId, SensorId, TaskId};
use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

pub const REACHABILITY: &str = "reachability";
pub const SENSING: &str = "sensing";
pub const TOOL: &str = "tool";
pub const SPEED: &str = "speed";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("unknown {kind} `{id}` referenced by {referrer}")]
    Reference {
        kind: &'static str,
        id: String,
        referrer: String,
    },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl WorldError {
    fn reference(kind: &'static str, id: impl fmt::Display, referrer: impl Into<String>) -> Self {
        WorldError::Reference {
            kind,
            id: id.to_string(),
            referrer: referrer.into(),
        }
    }
}

/// A point in the cell frame, millimetres. Serialized as `[x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl From<[f64; 3]> for Point {
    fn from([x, y, z]: [f64; 3]) -> Self {
        Self { x, y, z }
    }
}

impl From<Point> for [f64; 3] {
    fn from(p: Point) -> Self {
        [p.x, p.y, p.z]
    }
}

/// Reachability limits of a robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Region {
    /// Axis-aligned box given by its min and max corners.
    Box { min: Point, max: Point },
    /// Vertical cylinder: a disc in the xy-plane extruded over `z = [lo, hi]`.
    Disc { center: [f64; 2], radius: f64, z: [f64; 2] },
}

impl Region {
    pub fn check(&self) -> Result<(), String> {
        match self {
            Region::Box { min, max } => {
                if !min.is_finite() || !max.is_finite() {
                    return Err("box corners must be finite".into());
                }
                if min.x > max.x || min.y > max.y || min.z > max.z {
                    return Err(format!(
                        "box min {:?} exceeds max {:?} on some axis",
                        <[f64; 3]>::from(*min),
                        <[f64; 3]>::from(*max)
                    ));
                }
                Ok(())
            }
            Region::Disc { center, radius, z } => {
                if !(center[0].is_finite() && center[1].is_finite() && z[0].is_finite() && z[1].is_finite()) {
                    return Err("disc parameters must be finite".into());
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(format!("disc radius must be positive, got {radius}"));
                }
                if z[0] > z[1] {
                    return Err(format!("disc z-range [{}, {}] is inverted", z[0], z[1]));
                }
                Ok(())
            }
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        point_in_region(p, self)
    }
}

/// Closed containment test: points on the boundary are inside.
pub fn point_in_region(p: Point, region: &Region) -> bool {
    match region {
        Region::Box { min, max } => {
            (min.x..=max.x).contains(&p.x) && (min.y..=max.y).contains(&p.y) && (min.z..=max.z).contains(&p.z)
        }
        Region::Disc { center, radius, z } => {
            let dx = p.x - center[0];
            let dy = p.y - center[1];
            dx * dx + dy * dy <= radius * radius && (z[0]..=z[1]).contains(&p.z)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scalar {
    pub value: f64,
    pub unit: String,
}

/// Value of one capability entry.
///
/// JSON shapes: `{"value": v, "unit": u}` is a scalar, an object with a
/// `kind` tag is a region, an array of strings is an identifier list and a
/// bare string is free text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CapabilityValue {
    Scalar(Scalar),
    Region(Region),
    List(Vec<String>),
    Text(String),
}

impl CapabilityValue {
    pub fn kind_name(&self) -> &'static str {
        match self {
            CapabilityValue::Scalar(_) => "scalar",
            CapabilityValue::Region(_) => "region",
            CapabilityValue::List(_) => "list",
            CapabilityValue::Text(_) => "text",
        }
    }
}

/// Why a capability lookup did not produce the requested value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CapabilityLookup {
    Missing,
    WrongType { found: &'static str },
}

/// The key/value capability set of one robot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CapabilityConfiguration {
    entries: BTreeMap<CapabilityKey, CapabilityValue>,
}

impl CapabilityConfiguration {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces an entry, returning the previous value.
    pub fn set(&mut self, key: impl Into<CapabilityKey>, value: CapabilityValue) -> Option<CapabilityValue> {
        self.entries.insert(key.into(), value)
    }

    pub fn with(mut self, key: impl Into<CapabilityKey>, value: CapabilityValue) -> Self {
        self.set(key, value);
        self
    }

    pub fn remove(&mut self, key: &str) -> Option<CapabilityValue> {
        self.entries.remove(key)
    }

    pub fn get(&self, key: &str) -> Option<&CapabilityValue> {
        self.entries.get(key)
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CapabilityKey, &CapabilityValue)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn region(&self, key: &str) -> Result<&Region, CapabilityLookup> {
        match self.entries.get(key) {
            None => Err(CapabilityLookup::Missing),
            Some(CapabilityValue::Region(r)) => Ok(r),
            Some(other) => Err(CapabilityLookup::WrongType {
                found: other.kind_name(),
            }),
        }
    }

    /// Identifier-list lookup. A bare text value is accepted as a one-item list.
    pub fn list(&self, key: &str) -> Result<Vec<&str>, CapabilityLookup> {
        match self.entries.get(key) {
            None => Err(CapabilityLookup::Missing),
            Some(CapabilityValue::List(items)) => Ok(items.iter().map(String::as_str).collect()),
            Some(CapabilityValue::Text(t)) => Ok(vec![t.as_str()]),
            Some(other) => Err(CapabilityLookup::WrongType {
                found: other.kind_name(),
            }),
        }
    }

    pub fn reachability(&self) -> Result<&Region, CapabilityLookup> {
        self.region(REACHABILITY)
    }

    /// Checks the invariants every robot configuration held by the world must satisfy.
    pub fn check(&self) -> Result<(), String> {
        for (key, value) in &self.entries {
            if key.as_str().is_empty() {
                return Err("capability keys must be non-empty".into());
            }
            match value {
                CapabilityValue::Region(r) => r.check().map_err(|e| format!("`{key}`: {e}"))?,
                CapabilityValue::Scalar(s) if !s.value.is_finite() => {
                    return Err(format!("`{key}`: scalar value must be finite"));
                }
                _ => {}
            }
        }
        match self.reachability() {
            Ok(_) => Ok(()),
            Err(CapabilityLookup::Missing) => Err(format!("configuration lacks `{REACHABILITY}`")),
            Err(CapabilityLookup::WrongType { found }) => {
                Err(format!("`{REACHABILITY}` must be a region, found {found}"))
            }
        }
    }
}

impl Serialize for CapabilityConfiguration {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.entries.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CapabilityConfiguration {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ConfigVisitor;

        impl<'de> Visitor<'de> for ConfigVisitor {
            type Value = CapabilityConfiguration;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of capability keys to values")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut entries = BTreeMap::new();
                while let Some(key) = map.next_key::<String>()? {
                    if key.is_empty() {
                        return Err(de::Error::custom("empty capability key"));
                    }
                    let value: CapabilityValue = map.next_value()?;
                    if entries.insert(CapabilityKey::new(key.clone()), value).is_some() {
                        return Err(de::Error::custom(format!("duplicate capability key `{key}`")));
                    }
                }
                Ok(CapabilityConfiguration { entries })
            }
        }

        deserializer.deserialize_map(ConfigVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobotStatus {
    #[default]
    Idle,
    Executing(TaskId),
    Failed,
}

impl RobotStatus {
    pub fn is_failed(&self) -> bool {
        matches!(self, RobotStatus::Failed)
    }

    /// Idle and Executing may alternate; Failed is absorbing.
    pub fn can_transition_to(&self, next: &RobotStatus) -> bool {
        match (self, next) {
            (RobotStatus::Failed, _) => false,
            (_, RobotStatus::Failed) => true,
            (RobotStatus::Idle, RobotStatus::Executing(_)) => true,
            (RobotStatus::Executing(_), RobotStatus::Idle) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Robot {
    pub id: RobotId,
    pub home_cell: String,
    pub config: CapabilityConfiguration,
    #[serde(default, skip_serializing_if = "is_idle")]
    pub status: RobotStatus,
}

fn is_idle(status: &RobotStatus) -> bool {
    *status == RobotStatus::Idle
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocationKind {
    Buffer,
    Machine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Location {
    pub id: LocationId,
    pub kind: LocationKind,
    pub position: Point,
    pub cell: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub id: SensorId,
    pub modality: String,
    pub covered_locations: BTreeSet<LocationId>,
}

impl SensorSpec {
    pub fn covers(&self, location: &LocationId) -> bool {
        self.covered_locations.contains(location)
    }
}

fn default_duration() -> u64 {
    1
}

fn is_default_duration(d: &u64) -> bool {
    *d == 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub id: TaskId,
    pub pickup: LocationId,
    pub dropoff: LocationId,
    #[serde(default)]
    pub required_modalities: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required_tool: Option<String>,
    #[serde(default)]
    pub constraints: ConstraintSet,
    /// Logical time units the task occupies its robot.
    #[serde(default = "default_duration", skip_serializing_if = "is_default_duration")]
    pub duration: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    pub position: Point,
    pub yaw: f64,
}

/// A part sitting at a location, waiting to be picked up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: ObjectId,
    pub location: LocationId,
    pub pose: Pose,
}

/// One perceived object as reported by a sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub object_id: ObjectId,
    pub location: LocationId,
    pub pose: Pose,
    pub source_sensor: SensorId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    pub length: String,
    pub angle: String,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            length: "mm".into(),
            angle: "deg".into(),
        }
    }
}

/// Everything the controller knows about the cell.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SystemKnowledge {
    pub robots: BTreeMap<RobotId, Robot>,
    /// Task order is significant: it is the order robots work through their queues.
    pub tasks: Vec<TaskSpec>,
    pub locations: BTreeMap<LocationId, Location>,
    pub sensors: BTreeMap<SensorId, SensorSpec>,
    pub objects: Vec<ObjectSpec>,
    pub assignments: BTreeMap<TaskId, RobotId>,
}

impl SystemKnowledge {
    pub fn robot(&self, id: &str) -> Option<&Robot> {
        self.robots.get(id)
    }

    pub fn robot_mut(&mut self, id: &str) -> Option<&mut Robot> {
        self.robots.get_mut(id)
    }

    pub fn task(&self, id: &str) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.id == id)
    }

    pub fn location(&self, id: &str) -> Option<&Location> {
        self.locations.get(id)
    }

    /// Tasks currently assigned to `robot`, in queue order.
    pub fn tasks_assigned_to<'a>(&'a self, robot: &'a RobotId) -> impl Iterator<Item = &'a TaskSpec> + 'a {
        self.tasks
            .iter()
            .filter(move |t| self.assignments.get(&t.id) == Some(robot))
    }

    /// Sensors a robot may read: those whose id or modality appears in its `sensing` entry.
    pub fn accessible_sensors<'a>(&'a self, config: &CapabilityConfiguration) -> Vec<&'a SensorSpec> {
        let Ok(grants) = config.list(SENSING) else {
            return Vec::new();
        };
        self.sensors
            .values()
            .filter(|s| grants.iter().any(|g| *g == s.id.as_str() || *g == s.modality))
            .collect()
    }

    /// Checks every invariant of the world, including that no task is
    /// assigned to a failed robot.
    pub fn validate(&self) -> Result<(), WorldError> {
        self.validate_structure()?;
        for (task, robot) in &self.assignments {
            if self.robots[robot].status.is_failed() {
                return Err(WorldError::Invariant(format!(
                    "task {task} is assigned to failed robot {robot}"
                )));
            }
        }
        Ok(())
    }

    /// Like [`SystemKnowledge::validate`], but tolerates tasks still assigned
    /// to failed robots, as happens while an adaptation episode is running.
    pub fn validate_structure(&self) -> Result<(), WorldError> {
        for robot in self.robots.values() {
            robot
                .config
                .check()
                .map_err(|e| WorldError::Invariant(format!("robot {}: {e}", robot.id)))?;
            if let RobotStatus::Executing(task) = &robot.status {
                if self.task(task.as_str()).is_none() {
                    return Err(WorldError::reference("task", task, format!("robot {}", robot.id)));
                }
            }
        }
        for location in self.locations.values() {
            if !location.position.is_finite() {
                return Err(WorldError::Invariant(format!(
                    "location {} has a non-finite position",
                    location.id
                )));
            }
        }
        for sensor in self.sensors.values() {
            if sensor.modality.is_empty() {
                return Err(WorldError::Invariant(format!(
                    "sensor {} has an empty modality",
                    sensor.id
                )));
            }
            for loc in &sensor.covered_locations {
                if !self.locations.contains_key(loc) {
                    return Err(WorldError::reference("location", loc, format!("sensor {}", sensor.id)));
                }
            }
        }

        let mut task_ids = BTreeSet::new();
        for task in &self.tasks {
            if !task_ids.insert(&task.id) {
                return Err(WorldError::Invariant(format!("duplicate task id {}", task.id)));
            }
            self.validate_task(task)?;
        }

        let mut object_ids = BTreeSet::new();
        for object in &self.objects {
            if !object_ids.insert(&object.id) {
                return Err(WorldError::Invariant(format!("duplicate object id {}", object.id)));
            }
            if !self.locations.contains_key(&object.location) {
                return Err(WorldError::reference(
                    "location",
                    &object.location,
                    format!("object {}", object.id),
                ));
            }
        }

        for (task, robot) in &self.assignments {
            if !task_ids.contains(task) {
                return Err(WorldError::reference("task", task, "assignments"));
            }
            if !self.robots.contains_key(robot) {
                return Err(WorldError::reference("robot", robot, format!("assignment of {task}")));
            }
        }
        Ok(())
    }

    fn validate_task(&self, task: &TaskSpec) -> Result<(), WorldError> {
        let referrer = || format!("task {}", task.id);
        for endpoint in [&task.pickup, &task.dropoff] {
            if !self.locations.contains_key(endpoint) {
                return Err(WorldError::reference("location", endpoint, referrer()));
            }
        }
        if task.pickup == task.dropoff {
            return Err(WorldError::Invariant(format!(
                "task {} picks up and drops off at the same location {}",
                task.id, task.pickup
            )));
        }
        if task.duration == 0 {
            return Err(WorldError::Invariant(format!("task {} has zero duration", task.id)));
        }
        let known_modalities: BTreeSet<&str> = self.sensors.values().map(|s| s.modality.as_str()).collect();
        for modality in &task.required_modalities {
            if !known_modalities.contains(modality.as_str()) {
                return Err(WorldError::reference("modality", modality, referrer()));
            }
        }
        for constraint in task.constraints.iter() {
            match constraint {
                Constraint::ToolCapability { tool: None } if task.required_tool.is_none() => {
                    return Err(WorldError::Invariant(format!(
                        "task {}: tool constraint names no tool and the task has no required_tool",
                        task.id
                    )));
                }
                Constraint::SensorCoverage { modalities: Some(mods) } => {
                    for m in mods {
                        if !known_modalities.contains(m.as_str()) {
                            return Err(WorldError::reference("modality", m, referrer()));
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}
