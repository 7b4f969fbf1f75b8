//! Failure-driven task reassignment for multi-robot manufacturing cells.
//!
//! When a robot fails, the central controller gathers the system context,
//! asks a [`planner::Planner`] for a new capability configuration of a
//! surviving robot, validates it against each task's constraints, feeds
//! violations back until a plan is valid or the retry budget is spent, and
//! applies the result. [`sim`] drives the whole loop on a logical clock and
//! [`harness`] runs repeated trials and summarizes them.

pub mod constraints;
pub mod controller;
pub mod harness;
pub mod ids;
pub mod planner;
pub mod scenario;
pub mod sim;
pub mod world;

pub use constraints::{
    evaluate, partition_feasible, validate_assignment, Constraint, ConstraintSet, Partition, Verdict, ViolationCode,
};
pub use controller::{handle_failure, AdaptationConfig, AdaptationOutcome, AdaptationStatus};
pub use ids::{LocationId, RobotId, SensorId, TaskId};
pub use scenario::{load_scenario, load_world, Scenario};
pub use world::{point_in_region, CapabilityConfiguration, Point, Region, SystemKnowledge};
