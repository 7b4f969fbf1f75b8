//! Synthetic sensor module: turns the declared object inventory into the
//! observations a robot's accessible sensors would report.

use crate::ids::RobotId;
use crate::world::{Observation, SystemKnowledge};

/// Observations available to `robot`: every object at a location covered by
/// a sensor the robot can access. Each object is reported once, by the first
/// covering sensor in id order.
pub fn observe(robot: &RobotId, world: &SystemKnowledge) -> Vec<Observation> {
    let Some(robot) = world.robot(robot.as_str()) else {
        return Vec::new();
    };
    let sensors = world.accessible_sensors(&robot.config);
    world
        .objects
        .iter()
        .filter_map(|object| {
            sensors
                .iter()
                .find(|s| s.covers(&object.location))
                .map(|s| Observation {
                    object_id: object.id.clone(),
                    location: object.location.clone(),
                    pose: object.pose,
                    source_sensor: s.id.clone(),
                })
        })
        .collect()
}
