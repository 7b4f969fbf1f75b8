//! Random small worlds and brute-force reference checks shared by the
//! integration tests. Nothing in here calls the validator under test.

#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reassign_core::constraints::{Constraint, ConstraintSet, Endpoints};
use reassign_core::ids::{LocationId, ObjectId, RobotId, SensorId, TaskId};
use reassign_core::scenario::{load_scenario, DUAL_CELL};
use reassign_core::sim::{FaultEntry, FaultScript, FaultTrigger};
use reassign_core::world::{
    CapabilityConfiguration, CapabilityValue, Location, LocationKind, ObjectSpec, Point, Pose, Region, Robot,
    RobotStatus, SensorSpec, SystemKnowledge, TaskSpec,
};
use std::collections::{BTreeMap, BTreeSet};

pub const MODALITIES: [&str; 2] = ["camera", "lidar"];
pub const TOOLS: [&str; 2] = ["gripper", "vacuum"];

pub fn dual_cell() -> reassign_core::Scenario {
    load_scenario(DUAL_CELL).expect("bundled scenario loads")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn grid(rng: &mut ChaCha8Rng, lo: i32, hi: i32) -> f64 {
    f64::from(rng.random_range(lo / 50..=hi / 50) * 50)
}

pub fn random_region(rng: &mut ChaCha8Rng) -> Region {
    if rng.random_bool(0.5) {
        let (a, b) = (grid(rng, 0, 1000), grid(rng, 0, 1000));
        let (c, d) = (grid(rng, 0, 1000), grid(rng, 0, 1000));
        let (e, f) = (grid(rng, -100, 100), grid(rng, -100, 100));
        Region::Box {
            min: Point::new(a.min(b), c.min(d), e.min(f)),
            max: Point::new(a.max(b), c.max(d), e.max(f)),
        }
    } else {
        let lo = grid(rng, -100, 0);
        Region::Disc {
            center: [grid(rng, 0, 1000), grid(rng, 0, 1000)],
            radius: grid(rng, 50, 800),
            z: [lo, lo + grid(rng, 0, 200)],
        }
    }
}

fn pick_some<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str], min: usize) -> Vec<&'a str> {
    let n = rng.random_range(min..=pool.len());
    let mut picked: Vec<&str> = pool.choose_multiple(rng, n).copied().collect();
    picked.sort();
    picked
}

/// A robot configuration drawn over the world's sensors. With `allow_missing`
/// any of the three inspected keys may be absent or of the wrong type.
pub fn random_config(rng: &mut ChaCha8Rng, world: &SystemKnowledge, allow_missing: bool) -> CapabilityConfiguration {
    let mut cfg = CapabilityConfiguration::new();
    let drop = |rng: &mut ChaCha8Rng| allow_missing && rng.random_bool(0.15);
    if !drop(rng) {
        cfg.set("reachability", CapabilityValue::Region(random_region(rng)));
    } else if rng.random_bool(0.5) {
        cfg.set("reachability", CapabilityValue::Text("anywhere".into()));
    }
    if !drop(rng) {
        let mut grants: Vec<String> = Vec::new();
        for sensor in world.sensors.values() {
            if rng.random_bool(0.4) {
                grants.push(sensor.id.to_string());
            }
        }
        for m in MODALITIES {
            if rng.random_bool(0.25) {
                grants.push(m.to_string());
            }
        }
        cfg.set("sensing", CapabilityValue::List(grants));
    }
    if !drop(rng) {
        let tools = pick_some(rng, &TOOLS, 0);
        cfg.set(
            "tool",
            CapabilityValue::List(tools.into_iter().map(String::from).collect()),
        );
    }
    cfg
}

pub struct WorldShape {
    pub max_robots: usize,
    pub max_tasks: usize,
    pub max_locations: usize,
    pub max_constraints: usize,
    /// Every task carries a non-empty sensor-coverage requirement (so a
    /// valid assignment implies the robot can observe its part).
    pub observable_tasks: bool,
}

impl Default for WorldShape {
    fn default() -> Self {
        Self {
            max_robots: 4,
            max_tasks: 6,
            max_locations: 8,
            max_constraints: 3,
            observable_tasks: false,
        }
    }
}

fn random_constraint(rng: &mut ChaCha8Rng) -> Constraint {
    match rng.random_range(0..3) {
        0 => Constraint::Reachability {
            endpoints: *[Endpoints::Both, Endpoints::Pickup, Endpoints::Dropoff]
                .choose(rng)
                .unwrap(),
        },
        1 => Constraint::SensorCoverage {
            modalities: rng
                .random_bool(0.3)
                .then(|| pick_some(rng, &MODALITIES, 1).into_iter().map(String::from).collect()),
        },
        _ => Constraint::ToolCapability {
            tool: rng.random_bool(0.5).then(|| TOOLS.choose(rng).unwrap().to_string()),
        },
    }
}

/// A valid random world without assignments. Every modality is offered by
/// some sensor so any task may require any modality.
pub fn random_world(rng: &mut ChaCha8Rng, shape: &WorldShape) -> SystemKnowledge {
    let mut world = SystemKnowledge::default();
    let n_locations = rng.random_range(2..=shape.max_locations);
    for i in 0..n_locations {
        let id = LocationId::new(format!("L{i}"));
        world.locations.insert(
            id.clone(),
            Location {
                id,
                kind: if rng.random_bool(0.5) {
                    LocationKind::Buffer
                } else {
                    LocationKind::Machine
                },
                position: Point::new(grid(rng, 0, 1000), grid(rng, 0, 1000), grid(rng, -50, 50)),
                cell: format!("cell-{}", i % 2),
            },
        );
    }
    let location_ids: Vec<LocationId> = world.locations.keys().cloned().collect();

    let n_sensors = rng.random_range(MODALITIES.len()..=3);
    for i in 0..n_sensors {
        let modality = MODALITIES
            .get(i)
            .copied()
            .unwrap_or_else(|| MODALITIES.choose(rng).unwrap());
        let covered: BTreeSet<LocationId> = location_ids.iter().filter(|_| rng.random_bool(0.6)).cloned().collect();
        let id = SensorId::new(format!("S{i}"));
        world.sensors.insert(
            id.clone(),
            SensorSpec {
                id,
                modality: modality.into(),
                covered_locations: covered,
            },
        );
    }

    let n_robots = rng.random_range(1..=shape.max_robots);
    for i in 0..n_robots {
        let id = RobotId::new(format!("R{i}"));
        let config = random_config(rng, &world, false);
        world.robots.insert(
            id.clone(),
            Robot {
                id,
                home_cell: format!("cell-{}", i % 2),
                config,
                status: RobotStatus::Idle,
            },
        );
    }

    let n_tasks = rng.random_range(0..=shape.max_tasks);
    for i in 0..n_tasks {
        let pickup = location_ids.choose(rng).unwrap().clone();
        let dropoff = loop {
            let d = location_ids.choose(rng).unwrap();
            if *d != pickup {
                break d.clone();
            }
        };
        let n_constraints = rng.random_range(0..=shape.max_constraints);
        let mut constraints: Vec<Constraint> = (0..n_constraints).map(|_| random_constraint(rng)).collect();
        let mut required_modalities: BTreeSet<String> =
            pick_some(rng, &MODALITIES, 0).into_iter().map(String::from).collect();
        if shape.observable_tasks {
            if required_modalities.is_empty() {
                required_modalities.insert(MODALITIES.choose(rng).unwrap().to_string());
            }
            if constraints.len() >= shape.max_constraints.max(1) {
                constraints.pop();
            }
            constraints.push(Constraint::SensorCoverage { modalities: None });
        }
        world.tasks.push(TaskSpec {
            id: TaskId::new(format!("T{i}")),
            pickup,
            dropoff,
            required_modalities,
            required_tool: Some(TOOLS.choose(rng).unwrap().to_string()),
            constraints: ConstraintSet::new(constraints),
            duration: rng.random_range(1..=3),
        });
    }

    let mut seen = BTreeSet::new();
    for task in &world.tasks {
        if seen.insert(task.pickup.clone()) {
            let position = world.locations[&task.pickup].position;
            world.objects.push(ObjectSpec {
                id: ObjectId::new(format!("part@{}", task.pickup)),
                location: task.pickup.clone(),
                pose: Pose { position, yaw: 0.0 },
            });
        }
    }
    world.validate().expect("generated world is valid");
    world
}

/// Assigns each task to a random robot that can validly do it, or leaves it unassigned.
pub fn assign_feasibly(rng: &mut ChaCha8Rng, world: &mut SystemKnowledge) {
    let mut assignments = BTreeMap::new();
    for task in &world.tasks {
        let able: Vec<&RobotId> = world
            .robots
            .values()
            .filter(|r| brute_valid(task, &r.config, world))
            .map(|r| &r.id)
            .collect();
        if let Some(robot) = able.choose(rng) {
            assignments.insert(task.id.clone(), (*robot).clone());
        }
    }
    world.assignments = assignments;
}

pub fn random_faults(rng: &mut ChaCha8Rng, world: &SystemKnowledge) -> FaultScript {
    let mut entries = Vec::new();
    for robot in world.robots.keys() {
        if !rng.random_bool(0.5) {
            continue;
        }
        let trigger = if rng.random_bool(0.5) {
            FaultTrigger::AfterTasksCompleted(rng.random_range(0..=3))
        } else {
            FaultTrigger::AtLogicalTime(rng.random_range(0..=6))
        };
        entries.push(FaultEntry {
            robot: robot.clone(),
            trigger,
        });
    }
    FaultScript::new(entries).unwrap()
}

// ---------------------------------------------------------------------------
// Brute-force reference semantics, written from the constraint definitions.

pub fn brute_inside(p: Point, region: &Region) -> bool {
    match region {
        Region::Box { min, max } => {
            p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z && p.z <= max.z
        }
        Region::Disc { center, radius, z } => {
            let d2 = (p.x - center[0]).powi(2) + (p.y - center[1]).powi(2);
            d2 <= radius.powi(2) && p.z >= z[0] && p.z <= z[1]
        }
    }
}

fn list_entry<'a>(cfg: &'a CapabilityConfiguration, key: &str) -> Option<Vec<&'a str>> {
    match cfg.get(key)? {
        CapabilityValue::List(items) => Some(items.iter().map(String::as_str).collect()),
        CapabilityValue::Text(t) => Some(vec![t.as_str()]),
        _ => None,
    }
}

pub fn brute_constraint(
    c: &Constraint,
    task: &TaskSpec,
    cfg: &CapabilityConfiguration,
    world: &SystemKnowledge,
) -> bool {
    match c {
        Constraint::Reachability { endpoints } => {
            let Some(CapabilityValue::Region(region)) = cfg.get("reachability") else {
                return false;
            };
            let mut checked = vec![];
            if matches!(endpoints, Endpoints::Both | Endpoints::Pickup) {
                checked.push(&task.pickup);
            }
            if matches!(endpoints, Endpoints::Both | Endpoints::Dropoff) {
                checked.push(&task.dropoff);
            }
            checked
                .into_iter()
                .all(|l| brute_inside(world.locations[l].position, region))
        }
        Constraint::SensorCoverage { modalities } => {
            let Some(grants) = list_entry(cfg, "sensing") else {
                return false;
            };
            let required = modalities.clone().unwrap_or_else(|| task.required_modalities.clone());
            required.iter().all(|m| {
                world.sensors.values().any(|s| {
                    (grants.contains(&s.id.as_str()) || grants.contains(&s.modality.as_str()))
                        && s.modality == *m
                        && s.covered_locations.contains(&task.pickup)
                        && s.covered_locations.contains(&task.dropoff)
                })
            })
        }
        Constraint::ToolCapability { tool } => {
            let Some(tool) = tool.clone().or_else(|| task.required_tool.clone()) else {
                return true;
            };
            match list_entry(cfg, "tool") {
                Some(tools) => tools.contains(&tool.as_str()),
                None => false,
            }
        }
    }
}

pub fn brute_valid(task: &TaskSpec, cfg: &CapabilityConfiguration, world: &SystemKnowledge) -> bool {
    task.constraints.iter().all(|c| brute_constraint(c, task, cfg, world))
}

/// Largest subset of `tasks` all of which are valid under `cfg`, by
/// enumerating every subset.
pub fn brute_max_feasible_subset(
    tasks: &[TaskSpec],
    cfg: &CapabilityConfiguration,
    world: &SystemKnowledge,
) -> BTreeSet<TaskId> {
    assert!(tasks.len() <= 12, "subset enumeration is exponential");
    let mut best: BTreeSet<TaskId> = BTreeSet::new();
    for mask in 0u32..(1 << tasks.len()) {
        let subset: Vec<&TaskSpec> = (0..tasks.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &tasks[i])
            .collect();
        if subset.len() > best.len() && subset.iter().all(|t| brute_valid(t, cfg, world)) {
            best = subset.iter().map(|t| t.id.clone()).collect();
        }
    }
    best
}
