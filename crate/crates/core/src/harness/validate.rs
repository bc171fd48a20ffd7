//! Invariant suites on small instances, run by the `validate` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coordination::{find_conflicting_pair, EntityId, Intention, Manager, ManagerId, Task};
use crate::spatial::{Jurisdiction, LaneId, Layout, ResourceId};
use crate::temporal::{TemporalConfig, Tick};
use crate::traffic::Strategy;

use super::{run_scenario_with, RunOptions, ScenarioConfig};

/// Longest run the scenario suites use, in ticks.
pub const VALIDATE_MAX_DURATION: i64 = 3000;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub outcome: Result<String, String>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.outcome.is_ok()
    }
}

fn suite(name: &'static str, outcome: Result<String, String>) -> SuiteResult {
    SuiteResult { name, outcome }
}

fn random_tasks(rng: &mut ChaCha8Rng, entity: EntityId, now: Tick, lead: Tick) -> Vec<Task> {
    let n = rng.random_range(1..=4);
    (0..n)
        .map(|_| {
            let start = now + lead + rng.random_range(0..40);
            let loc = ResourceId::new(LaneId(0), rng.random_range(0..3));
            Task::with_duration(entity, loc, start, rng.random_range(0..6))
        })
        .collect()
}

/// Random submission sequences against one manager: the schedule stays
/// conflict-free, every approved task is its original moved later on the same
/// resource, and nothing approved earlier is touched.
fn kernel_sequences(
    seed: u64,
    rounds: usize,
) -> (
    Result<String, String>,
    Result<String, String>,
    Result<String, String>,
) {
    let cfg = TemporalConfig::new(3, 2, 5).expect("valid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut safety, mut intent, mut frozen) = (Ok(()), Ok(()), Ok(()));
    let mut submissions = 0;
    for round in 0..rounds {
        let mut mgr = Manager::new(ManagerId(1), cfg);
        let mut now = 0;
        for e in 1..=rng.random_range(1..=5u64) {
            let entity = EntityId(e);
            mgr.register(entity);
            let tasks = random_tasks(&mut rng, entity, now, cfg.submission_lead());
            let intention = Intention::new(entity, tasks.clone(), now).expect("well-formed");
            let before: Vec<Task> = mgr.schedule().tasks().copied().collect();
            let Ok(approval) = mgr.try_approve(&intention, now) else {
                continue;
            };
            submissions += 1;
            let after: Vec<Task> = mgr.schedule().tasks().copied().collect();
            if let Some((a, b)) = find_conflicting_pair(&after) {
                safety = Err(format!("round {round}: {a} conflicts with {b}"));
            }
            let approved = approval.outcome.altered.tasks();
            let conserved = approved.len() == tasks.len()
                && approved.iter().zip(&tasks).all(|(a, o)| {
                    a.location == o.location
                        && a.duration() == o.duration()
                        && a.start() >= o.start()
                });
            if !conserved {
                intent = Err(format!(
                    "round {round}: {entity} approved {approved:?} for {tasks:?}"
                ));
            }
            if let Some(t) = before.iter().find(|t| !mgr.schedule().contains(t)) {
                frozen = Err(format!(
                    "round {round}: previously approved {t} changed at tick {now}"
                ));
            }
            now += rng.random_range(0..4);
        }
    }
    let ok = |r: Result<(), String>| r.map(|_| format!("{submissions} approvals"));
    (ok(safety), ok(intent), ok(frozen))
}

/// Random submissions across three domains interleaved with handovers: the
/// task multiset is conserved and every manager stays conflict-free.
fn handover_sequences(seed: u64, rounds: usize) -> Result<String, String> {
    let cfg = TemporalConfig::new(3, 2, 5).expect("valid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut handovers = 0;
    for round in 0..rounds {
        let layout = Layout::uniform(0.0, 45.0, 3).map_err(|e| e.to_string())?;
        let mut j = Jurisdiction::new(layout, 5.0, cfg).map_err(|e| e.to_string())?;
        let entities: Vec<EntityId> = (1..=4).map(EntityId).collect();
        for e in &entities {
            j.register(*e, rng.random_range(0.0..45.0))
                .map_err(|e| e.to_string())?;
        }
        for step in 0..12 {
            let e = entities[rng.random_range(0..entities.len())];
            if rng.random_bool(0.5) {
                let n = rng.random_range(1..=3);
                let tasks: Vec<Task> = (0..n)
                    .map(|_| {
                        let loc = ResourceId::new(LaneId(0), rng.random_range(0..9));
                        Task::with_duration(
                            e,
                            loc,
                            5 + rng.random_range(0..30),
                            rng.random_range(0..4),
                        )
                    })
                    .collect();
                let intention = Intention::new(e, tasks, 0).expect("well-formed");
                let _ = j.submit(&intention, 0);
            } else {
                let from = j.home_of(e).expect("registered");
                let to = ManagerId(if from.0 == 3 || (from.0 > 1 && rng.random_bool(0.5)) {
                    from.0 - 1
                } else {
                    from.0 + 1
                });
                let mut before = j.all_tasks();
                let pending: Vec<Task> = j
                    .managers()
                    .flat_map(|m| m.schedule().tasks_of(e).to_vec())
                    .collect();
                if j.handover(e, from, to, &pending).is_ok() {
                    handovers += 1;
                }
                let mut after = j.all_tasks();
                before.sort_by_key(|t| (t.entity, t.location, t.start(), t.end()));
                after.sort_by_key(|t| (t.entity, t.location, t.start(), t.end()));
                if before != after {
                    return Err(format!(
                        "round {round} step {step}: handover changed the task multiset"
                    ));
                }
            }
            for m in j.managers() {
                let tasks: Vec<Task> = m.schedule().tasks().copied().collect();
                if let Some((a, b)) = find_conflicting_pair(&tasks) {
                    return Err(format!("round {round}: {} holds {a} and {b}", m.id()));
                }
            }
        }
    }
    Ok(format!("{handovers} handovers"))
}

/// Runs every suite. Scenario suites use `cfg` capped to a short duration.
pub fn run_validation(cfg: &ScenarioConfig) -> Vec<SuiteResult> {
    let (safety, intent, frozen) = kernel_sequences(cfg.seed, 300);
    let mut results = vec![
        suite("schedule safety", safety),
        suite("conservation of intent", intent),
        suite("frozen immutability", frozen),
        suite("handover conservation", handover_sequences(cfg.seed, 100)),
    ];

    let mut small = cfg.with_strategy(Strategy::Preemptive);
    small.duration = small.duration.min(VALIDATE_MAX_DURATION);
    let opts = RunOptions {
        record_trajectories: true,
        check_invariants: true,
        ..RunOptions::default()
    };
    match run_scenario_with(&small, &opts) {
        Ok(run) => {
            let m = run.metrics;
            let (kin, other): (Vec<&String>, Vec<&String>) = run
                .violations
                .iter()
                .partition(|v| v.starts_with("kinematics"));
            results.push(suite(
                "preemptive safety",
                if m.collisions == 0 && m.protocol_failures == 0 && other.is_empty() {
                    Ok(format!("{} vehicles, 0 collisions", m.vehicles_injected))
                } else {
                    Err(format!(
                        "{} collisions, {} protocol failures, {} violations{}",
                        m.collisions,
                        m.protocol_failures,
                        other.len(),
                        other
                            .first()
                            .map(|v| format!(", first: {v}"))
                            .unwrap_or_default()
                    ))
                },
            ));
            results.push(suite(
                "kinematics",
                match kin.first() {
                    None => Ok(format!(
                        "{} scheduled trajectories",
                        run.trajectories_checked
                    )),
                    Some(v) => Err((*v).clone()),
                },
            ));
            let again = run_scenario_with(&small, &opts);
            results.push(suite(
                "determinism",
                match again {
                    Ok(b)
                        if b.metrics == run.metrics
                            && b.trajectories == run.trajectories
                            && b.events == run.events =>
                    {
                        Ok("identical reruns".into())
                    }
                    Ok(_) => Err("rerun with the same seed differed".into()),
                    Err(e) => Err(e.to_string()),
                },
            ));
        }
        Err(e) => results.push(suite("preemptive safety", Err(e.to_string()))),
    }
    results
}
