//! Scenario file loading and serialization.

use crate::ids::{LocationId, ObjectId, RobotId, TaskId};
use crate::sim::fault::{FaultEntry, FaultScript};
use crate::world::{Location, ObjectSpec, Pose, Robot, SensorSpec, SystemKnowledge, TaskSpec, Units, WorldError};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

/// Two-cell layout bundled with the crate: an xArm6 in cell 1 and a Lite6 in cell 2.
pub const DUAL_CELL: &str = include_str!("../scenarios/dual_cell.json");

/// On-disk shape of a scenario. Unknown keys are rejected at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub units: Units,
    pub robots: Vec<Robot>,
    pub locations: Vec<Location>,
    pub sensors: Vec<SensorSpec>,
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub assignments: BTreeMap<TaskId, RobotId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objects: Option<Vec<ObjectSpec>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub faults: Vec<FaultEntry>,
}

/// A loaded world plus the fault script declared alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub world: SystemKnowledge,
    pub faults: FaultScript,
}

pub fn load_world(text: &str) -> Result<SystemKnowledge, WorldError> {
    load_scenario(text).map(|s| s.world)
}

pub fn load_scenario(text: &str) -> Result<Scenario, WorldError> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| WorldError::Parse(e.to_string()))?;
    Scenario::from_file(file)
}

pub fn load_scenario_path(path: impl AsRef<Path>) -> Result<Scenario, WorldError> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| WorldError::Parse(format!("cannot read {}: {e}", path.display())))?;
    load_scenario(&text)
}

impl Scenario {
    pub fn from_file(file: ScenarioFile) -> Result<Self, WorldError> {
        if file.units != Units::default() {
            return Err(WorldError::Invariant(format!(
                "units must be {{\"length\":\"mm\",\"angle\":\"deg\"}}, got length={:?} angle={:?}",
                file.units.length, file.units.angle
            )));
        }

        let mut world = SystemKnowledge::default();
        for robot in file.robots {
            let id = robot.id.clone();
            if world.robots.insert(id.clone(), robot).is_some() {
                return Err(WorldError::Invariant(format!("duplicate robot id {id}")));
            }
        }
        for location in file.locations {
            let id = location.id.clone();
            if world.locations.insert(id.clone(), location).is_some() {
                return Err(WorldError::Invariant(format!("duplicate location id {id}")));
            }
        }
        for sensor in file.sensors {
            let id = sensor.id.clone();
            if world.sensors.insert(id.clone(), sensor).is_some() {
                return Err(WorldError::Invariant(format!("duplicate sensor id {id}")));
            }
        }
        world.tasks = file.tasks;
        world.assignments = file.assignments;
        world.validate()?;

        world.objects = match file.objects {
            Some(objects) => objects,
            None => default_objects(&world),
        };
        world.validate()?;

        let faults = FaultScript::new(file.faults).map_err(WorldError::Invariant)?;
        for entry in faults.entries() {
            if !world.robots.contains_key(&entry.robot) {
                return Err(WorldError::Reference {
                    kind: "robot",
                    id: entry.robot.to_string(),
                    referrer: "faults".into(),
                });
            }
        }
        Ok(Scenario { world, faults })
    }

    pub fn to_file(&self) -> ScenarioFile {
        let mut file = world_to_file(&self.world);
        file.faults = self.faults.entries().to_vec();
        file
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serializes")
    }
}

pub fn world_to_file(world: &SystemKnowledge) -> ScenarioFile {
    ScenarioFile {
        units: Units::default(),
        robots: world.robots.values().cloned().collect(),
        locations: world.locations.values().cloned().collect(),
        sensors: world.sensors.values().cloned().collect(),
        tasks: world.tasks.clone(),
        assignments: world.assignments.clone(),
        objects: Some(world.objects.clone()),
        faults: Vec::new(),
    }
}

/// Serializes a world back into scenario JSON.
pub fn serialize_world(world: &SystemKnowledge) -> String {
    serde_json::to_string_pretty(&world_to_file(world)).expect("world serializes")
}

/// One part per distinct pickup location, posed at the location itself.
fn default_objects(world: &SystemKnowledge) -> Vec<ObjectSpec> {
    let mut seen: BTreeSet<&LocationId> = BTreeSet::new();
    let mut objects = Vec::new();
    for task in &world.tasks {
        if !seen.insert(&task.pickup) {
            continue;
        }
        let position = world.locations[&task.pickup].position;
        objects.push(ObjectSpec {
            id: ObjectId::new(format!("part@{}", task.pickup)),
            location: task.pickup.clone(),
            pose: Pose { position, yaw: 0.0 },
        });
    }
    objects
}
