//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use common::{MODALITIES, TOOLS};
use rand::Rng;
use reassign_core::constraints::{partition_feasible, validate_assignment, ViolationCode};
use reassign_core::controller::{gather_context, handle_failure, AdaptationConfig, AdaptationStatus, LogicalClock};
use reassign_core::harness::{run_trials, ExperimentConfig, MockPlannerSpec, PlannerChoice};
use reassign_core::ids::{RobotId, TaskId};
use reassign_core::planner::{
    oracle_plan, serialize_plan, ChatEndpointConfig, LlmPlanner, OraclePlanner, ProposedPlan, ScriptedEndpoint,
    ScriptedPlanner, ScriptedReply,
};
use reassign_core::sim::{run_simulation, EventKind, DEFAULT_EVENT_LIMIT};
use reassign_core::world::{CapabilityValue, RobotStatus, SystemKnowledge};
use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

const GOLDEN_RUNTIME_LIMIT: Duration = Duration::from_secs(1);
const RANDOM_WORLDS: u64 = 600;
const VALIDATOR_RUNTIME_LIMIT: Duration = Duration::from_secs(30);
const CONFIGS_PER_WORLD: usize = 4;
const MAX_RETRIES: u32 = 4;
const P_FIRST: f64 = 0.6;
const P_RETRY: f64 = 0.8;
const CALIBRATION_TRIALS: usize = 1000;
const FIRST_ATTEMPT_BAND: (f64, f64) = (0.55, 0.65);
const MEAN_RETRY_TOLERANCE: f64 = 0.3;
const TWENTY_TRIAL_RUNS: u64 = 50;
/// A batch-count outcome this unlikely under the calibration counts as inconsistent.
const BINOMIAL_TAIL: f64 = 0.001;
const SAFETY_TRIALS: u64 = 250;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn clock() -> LogicalClock {
    LogicalClock::new(Duration::from_secs(1))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn sorted(ids: impl IntoIterator<Item = impl AsRef<str>>) -> Vec<String> {
    let mut v: Vec<String> = ids.into_iter().map(|s| s.as_ref().to_owned()).collect();
    v.sort();
    v
}

fn golden() -> Outcome {
    let started = Instant::now();
    let scenario = common::dual_cell();
    let trace = run_simulation(
        &scenario.world,
        &scenario.faults,
        OraclePlanner,
        &AdaptationConfig::default(),
        clock(),
        DEFAULT_EVENT_LIMIT,
    )
    .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();

    let r2_done = trace
        .events()
        .take_while(|e| e.kind != EventKind::FailureNotification)
        .filter(|e| e.kind == EventKind::TaskCompleted && e.robot == "R2")
        .count();
    ensure(r2_done == 2, || format!("R2 completed {r2_done} tasks before failing"))?;

    let outcomes: Vec<_> = trace.adaptations().collect();
    ensure(outcomes.len() == 1, || {
        format!("{} adaptation episodes", outcomes.len())
    })?;
    let o = outcomes[0];
    ensure(o.status == AdaptationStatus::Succeeded, || {
        format!("status {:?}", o.status)
    })?;
    ensure(o.attempts_used == 1, || format!("attempts_used {}", o.attempts_used))?;
    let plan = o.final_plan.as_ref().ok_or("no final plan")?;
    ensure(plan.exploration_robot == "R1", || {
        format!("exploration robot {}", plan.exploration_robot)
    })?;
    let reassigned = sorted(&o.reassigned_tasks);
    ensure(reassigned == ["B3-task", "M2-task"], || {
        format!("reassigned {reassigned:?}")
    })?;
    let excluded = sorted(o.excluded_tasks.iter().map(|e| &e.task));
    ensure(excluded == ["B4-task", "M3-task"], || format!("excluded {excluded:?}"))?;
    for e in &o.excluded_tasks {
        let codes: Vec<ViolationCode> = e.verdict.violations.iter().map(|v| v.code).collect();
        ensure(codes == [ViolationCode::ReachViolation], || {
            format!("{} excluded with {codes:?}", e.task)
        })?;
    }
    ensure(elapsed < GOLDEN_RUNTIME_LIMIT, || format!("runtime {elapsed:?}"))?;
    Ok(format!(
        "R1 takes M2-task, B3-task; M3-task, B4-task excluded (reach); {elapsed:.2?}"
    ))
}

fn validator_matches_brute_force() -> Outcome {
    let started = Instant::now();
    let mut checks = 0usize;
    let mut mismatches = Vec::new();
    for seed in 0..RANDOM_WORLDS {
        let mut rng = common::rng(seed);
        let world = common::random_world(&mut rng, &common::WorldShape::default());
        let mut configs: Vec<_> = world.robots.values().map(|r| r.config.clone()).collect();
        configs.extend((0..CONFIGS_PER_WORLD).map(|_| common::random_config(&mut rng, &world, true)));
        for cfg in &configs {
            let partition = partition_feasible(&world.tasks, cfg, &world);
            let expected: Vec<&TaskId> = world
                .tasks
                .iter()
                .filter(|t| common::brute_valid(t, cfg, &world))
                .map(|t| &t.id)
                .collect();
            let got: Vec<&TaskId> = partition.feasible.iter().collect();
            checks += world.tasks.len();
            if got != expected {
                mismatches.push(format!("seed {seed}: got {got:?} expected {expected:?}"));
            }
            for (task, verdict) in &partition.infeasible {
                let spec = world.task(task.as_str()).unwrap();
                let failing: Vec<usize> = spec
                    .constraints
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| !common::brute_constraint(c, spec, cfg, &world))
                    .map(|(i, _)| i)
                    .collect();
                let reported: Vec<usize> = verdict.violations.iter().map(|v| v.constraint_index).collect();
                if failing != reported {
                    mismatches.push(format!(
                        "seed {seed} task {task}: violations {reported:?} expected {failing:?}"
                    ));
                }
            }
        }
    }
    let elapsed = started.elapsed();
    ensure(mismatches.is_empty(), || {
        format!("{} mismatches, first: {}", mismatches.len(), mismatches[0])
    })?;
    ensure(elapsed < VALIDATOR_RUNTIME_LIMIT, || format!("runtime {elapsed:?}"))?;
    Ok(format!(
        "{RANDOM_WORLDS} worlds, {checks} task checks, 0 mismatches, {elapsed:.2?}"
    ))
}

fn failed_copy(world: &SystemKnowledge, robot: &RobotId) -> SystemKnowledge {
    let mut w = world.clone();
    w.robot_mut(robot.as_str()).unwrap().status = RobotStatus::Failed;
    w
}

fn oracle_is_sound_and_complete() -> Outcome {
    let mut contexts = 0usize;
    let mut plans = 0usize;
    for seed in 0..RANDOM_WORLDS {
        let mut rng = common::rng(seed);
        let mut world = common::random_world(&mut rng, &common::WorldShape::default());
        common::assign_feasibly(&mut rng, &mut world);
        let robots: Vec<RobotId> = world.robots.keys().cloned().collect();
        let failed = robots[rng.random_range(0..robots.len())].clone();
        let world = failed_copy(&world, &failed);
        let ctx = gather_context(&world, &failed).map_err(|e| e.to_string())?;
        contexts += 1;

        // Best robot by exhaustive subset enumeration; ties go to the lowest id.
        let mut best: Option<(&RobotId, BTreeSet<TaskId>)> = None;
        for robot in &ctx.candidates {
            let subset = common::brute_max_feasible_subset(&ctx.orphaned_tasks, &robot.config, &world);
            if best.as_ref().is_none_or(|(_, b)| subset.len() > b.len()) {
                best = Some((&robot.id, subset));
            }
        }
        let expected = best.filter(|(_, s)| !s.is_empty());

        match (oracle_plan(&ctx), expected) {
            (Err(_), None) => {}
            (Ok(plan), Some((robot, subset))) => {
                plans += 1;
                let claimed: BTreeSet<TaskId> = plan.claimed_tasks.iter().cloned().collect();
                ensure(plan.exploration_robot == *robot && claimed == subset, || {
                    format!(
                        "seed {seed}: oracle chose {} {claimed:?}, expected {robot} {subset:?}",
                        plan.exploration_robot
                    )
                })?;
                for task in &plan.claimed_tasks {
                    let verdict =
                        validate_assignment(ctx.orphaned(task.as_str()).unwrap(), &plan.updated_config, &world);
                    ensure(verdict.valid, || {
                        format!("seed {seed}: claimed {task} fails validation")
                    })?;
                }
                let mut planner = ScriptedPlanner::new([serialize_plan(&plan)]);
                let (outcome, _) =
                    handle_failure(&failed, &world, &mut planner, &AdaptationConfig::default(), &clock())
                        .map_err(|e| e.to_string())?;
                ensure(outcome.succeeded() && outcome.attempts_used == 1, || {
                    format!("seed {seed}: controller rejected the oracle plan")
                })?;
            }
            (got, want) => {
                return Err(format!("seed {seed}: oracle returned {got:?}, expected {want:?}"));
            }
        }
    }
    Ok(format!("{contexts} failure contexts, {plans} plans, 0 mismatches"))
}

fn retry_contract() -> Outcome {
    let mut world = common::dual_cell().world;
    world.robot_mut("R2").unwrap().status = RobotStatus::Failed;
    let r2 = RobotId::new("R2");
    let good = oracle_plan(&gather_context(&world, &r2).unwrap()).unwrap();
    let bad = ProposedPlan {
        claimed_tasks: world.tasks_assigned_to(&r2).map(|t| t.id.clone()).collect(),
        ..good.clone()
    };
    let cfg = AdaptationConfig {
        max_retries: MAX_RETRIES,
        ..AdaptationConfig::default()
    };
    for k in 0..=5usize {
        let mut script = vec![serialize_plan(&bad); k];
        script.push(serialize_plan(&good));
        let mut planner = ScriptedPlanner::new(script);
        let (outcome, _) = handle_failure(&r2, &world, &mut planner, &cfg, &clock()).map_err(|e| e.to_string())?;
        let (status, attempts) = if k <= MAX_RETRIES as usize {
            (AdaptationStatus::Succeeded, k + 1)
        } else {
            (AdaptationStatus::ExhaustedRetries, MAX_RETRIES as usize + 1)
        };
        ensure(
            outcome.status == status && outcome.attempts_used as usize == attempts,
            || format!("k={k}: {:?} after {} attempts", outcome.status, outcome.attempts_used),
        )?;
        for exchange in &outcome.episode {
            let n = exchange.attempt_number as usize;
            let entries = exchange.prompt.feedback_entry_count();
            ensure(entries == n - 1, || {
                format!("k={k}: prompt {n} has {entries} feedback entries")
            })?;
        }
    }
    Ok("k = 0..5 with max_retries = 4".into())
}

/// P(success) and E[retries | success] when the first call is right with
/// probability `p`, each retry with probability `q`, and `r` retries are allowed.
fn truncated_geometric(p: f64, q: f64, r: u32) -> (f64, f64) {
    let mut success = p;
    let mut weighted = 0.0;
    for k in 1..=r {
        let pk = (1.0 - p) * (1.0 - q).powi(k as i32 - 1) * q;
        success += pk;
        weighted += f64::from(k) * pk;
    }
    (success, weighted / success)
}

/// Largest `x` with P(X >= x) >= tail for X ~ Binomial(n, p).
fn binomial_upper(n: u64, p: f64, tail: f64) -> u64 {
    let pmf = |k: u64| {
        let mut ln = (k as f64) * p.ln() + ((n - k) as f64) * (1.0 - p).ln();
        for i in 0..k {
            ln += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
        }
        ln.exp()
    };
    let mut upper_tail = 1.0;
    for x in 0..=n {
        if upper_tail < tail {
            return x - 1;
        }
        upper_tail -= pmf(x);
    }
    n
}

fn table_shape() -> Outcome {
    let scenario = common::dual_cell();
    let (p_success, expected_retries) = truncated_geometric(P_FIRST, P_RETRY, MAX_RETRIES);
    let cfg = |trials| ExperimentConfig {
        trials,
        adaptation: AdaptationConfig {
            max_retries: MAX_RETRIES,
            ..AdaptationConfig::default()
        },
        ..ExperimentConfig::default()
    };
    let mock = |seed| PlannerChoice::Mock(MockPlannerSpec::stochastic(P_FIRST, P_RETRY, seed));

    let big = run_trials(&scenario, &mock(2024), &cfg(CALIBRATION_TRIALS)).map_err(|e| e.to_string())?;
    let s = &big.summary;
    ensure(
        (FIRST_ATTEMPT_BAND.0..=FIRST_ATTEMPT_BAND.1).contains(&s.first_attempt_rate),
        || format!("first_attempt_rate {:.3}", s.first_attempt_rate),
    )?;
    let mean_retries = s.mean_retries.ok_or("no successful trial")?;
    ensure((mean_retries - expected_retries).abs() <= MEAN_RETRY_TOLERANCE, || {
        format!("mean retries {mean_retries:.3} vs analytic {expected_retries:.3}")
    })?;

    let seeded = run_trials(&scenario, &mock(0), &cfg(20)).map_err(|e| e.to_string())?;
    ensure(seeded.summary.success_rate == 1.0, || {
        format!("20-trial seeded run success_rate {}", seeded.summary.success_rate)
    })?;

    let p_perfect = p_success.powi(20);
    let mut imperfect = 0;
    for seed in 1..=TWENTY_TRIAL_RUNS {
        let run = run_trials(&scenario, &mock(seed), &cfg(20)).map_err(|e| e.to_string())?;
        if run.summary.success_rate < 1.0 {
            imperfect += 1;
        }
    }
    let limit = binomial_upper(TWENTY_TRIAL_RUNS, 1.0 - p_perfect, BINOMIAL_TAIL);
    ensure(imperfect <= limit, || {
        format!("{imperfect}/{TWENTY_TRIAL_RUNS} 20-trial runs below 100% (limit {limit}, P(100%) = {p_perfect:.4})")
    })?;

    Ok(format!(
        "first_attempt_rate {:.3}, mean retries {mean_retries:.3} (analytic {expected_retries:.3}), \
         {imperfect}/{TWENTY_TRIAL_RUNS} 20-trial runs below 100% (P(100%) = {p_perfect:.4})",
        s.first_attempt_rate
    ))
}

fn safety_invariants() -> Outcome {
    let shape = common::WorldShape {
        observable_tasks: true,
        ..common::WorldShape::default()
    };
    let mut adaptations = 0usize;
    let mut starts = 0usize;
    for seed in 0..SAFETY_TRIALS {
        let mut rng = common::rng(10_000 + seed);
        let mut world = common::random_world(&mut rng, &shape);
        // Mostly well-equipped robots, so that tasks actually get assigned and executed.
        for robot in world.robots.values_mut() {
            if rng.random_bool(0.7) {
                robot
                    .config
                    .set("sensing", CapabilityValue::List(MODALITIES.map(String::from).to_vec()));
                robot
                    .config
                    .set("tool", CapabilityValue::List(TOOLS.map(String::from).to_vec()));
            }
        }
        common::assign_feasibly(&mut rng, &mut world);
        let faults = common::random_faults(&mut rng, &world);
        let trace = if seed % 2 == 0 {
            run_simulation(
                &world,
                &faults,
                OraclePlanner,
                &AdaptationConfig::default(),
                clock(),
                DEFAULT_EVENT_LIMIT,
            )
        } else {
            let planner = MockPlannerSpec::stochastic(P_FIRST, P_RETRY, seed).build(0);
            run_simulation(
                &world,
                &faults,
                planner,
                &AdaptationConfig::default(),
                clock(),
                DEFAULT_EVENT_LIMIT,
            )
        }
        .map_err(|e| format!("seed {seed}: {e}"))?;
        let end = trace.final_world.as_ref().ok_or("no final world")?;

        for (task, robot) in &end.assignments {
            let r = &end.robots[robot];
            let verdict = validate_assignment(end.task(task.as_str()).unwrap(), &r.config, end);
            ensure(verdict.valid && !r.status.is_failed(), || {
                format!("seed {seed}: final assignment {task} -> {robot} is unsafe")
            })?;
        }
        // Configurations never change under these planners, so every
        // execution can be checked against the final configuration.
        for e in trace.events().filter(|e| e.kind == EventKind::TaskStarted) {
            starts += 1;
            let task = end.task(e.task.as_ref().unwrap().as_str()).unwrap();
            ensure(
                validate_assignment(task, &end.robots[&e.robot].config, end).valid,
                || {
                    format!(
                        "seed {seed}: {} started {} without a valid configuration",
                        e.robot, task.id
                    )
                },
            )?;
        }
        for o in trace.adaptations() {
            adaptations += 1;
            if let Some(plan) = &o.final_plan {
                for task in &o.reassigned_tasks {
                    let spec = end.task(task.as_str()).unwrap();
                    ensure(validate_assignment(spec, &plan.updated_config, end).valid, || {
                        format!("seed {seed}: reassigned {task} is invalid under the plan")
                    })?;
                }
            }
        }

        let all: BTreeSet<&TaskId> = world.tasks.iter().map(|t| &t.id).collect();
        let groups = [trace.completed(), trace.excluded(), trace.unassigned()];
        let total: usize = groups.iter().map(|g| g.len()).sum();
        let union: BTreeSet<&TaskId> = groups.iter().flat_map(|g| g.iter()).collect();
        ensure(total == all.len() && union == all, || {
            format!("seed {seed}: completed/excluded/unassigned do not partition the task set")
        })?;
    }
    Ok(format!(
        "{SAFETY_TRIALS} trials, {adaptations} adaptations, {starts} task starts, 0 violations"
    ))
}

fn scripted_endpoint_only() -> Outcome {
    let mut world = common::dual_cell().world;
    world.robot_mut("R2").unwrap().status = RobotStatus::Failed;
    let r2 = RobotId::new("R2");
    let plan = oracle_plan(&gather_context(&world, &r2).unwrap()).unwrap();
    let server = ScriptedEndpoint::new([ScriptedReply::Content(serialize_plan(&plan))]);
    let endpoint = ChatEndpointConfig::new("http://scripted.invalid/v1", "scripted");
    let mut planner = LlmPlanner::new(endpoint, &server);
    let (outcome, _) =
        handle_failure(&r2, &world, &mut planner, &AdaptationConfig::default(), &clock()).map_err(|e| e.to_string())?;
    ensure(outcome.succeeded(), || format!("status {:?}", outcome.status))?;
    ensure(server.requests().len() == 1, || {
        format!("{} requests", server.requests().len())
    })?;
    Ok("LLM planner served in-process; no sockets opened".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("golden scenario", golden),
        ("validator matches brute force", validator_matches_brute_force),
        ("oracle soundness and completeness", oracle_is_sound_and_complete),
        ("retry-loop contract", retry_contract),
        ("statistical shape under the calibrated mock", table_shape),
        ("safety and task conservation", safety_invariants),
        ("no network", scripted_endpoint_only),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("acceptance {} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("acceptance {} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
