//! Reference implementations used by the integration and acceptance tests.
//! They share no code with the library beyond its plain data types.

#![allow(dead_code)]

use std::collections::BTreeMap;

use preempt::{
    EntityId, Intention, LaneId, Manager, ManagerId, ResourceId, Task, TemporalConfig, Tick,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One intention shared at `now`: `(cell, start, duration)` per task.
#[derive(Debug, Clone)]
pub struct Submission {
    pub entity: u64,
    pub now: Tick,
    pub tasks: Vec<(i64, Tick, Tick)>,
}

impl Submission {
    pub fn to_tasks(&self) -> Vec<Task> {
        self.tasks
            .iter()
            .map(|&(cell, start, dur)| {
                Task::with_duration(
                    EntityId(self.entity),
                    ResourceId::new(LaneId(0), cell),
                    start,
                    dur,
                )
            })
            .collect()
    }
}

/// Small random instance: at most 5 entities, 4 tasks each, 3 resources,
/// task intervals inside [0, 60], non-decreasing submission times.
pub fn random_instance(rng: &mut ChaCha8Rng) -> Vec<Submission> {
    let entities = rng.random_range(1..=5u64);
    let mut now = 0;
    (1..=entities)
        .map(|entity| {
            let n = rng.random_range(1..=4);
            let tasks = (0..n)
                .map(|_| {
                    let start = rng.random_range(0..=55);
                    let dur = rng.random_range(0..=(60 - start).min(8));
                    (rng.random_range(0..3), start, dur)
                })
                .collect();
            let sub = Submission { entity, now, tasks };
            now += rng.random_range(0..=3);
            sub
        })
        .collect()
}

pub fn instances(seed: u64, count: usize) -> Vec<Vec<Submission>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_instance(&mut rng)).collect()
}

/// Brute force: reject if any task starts before `now + frozen + critical`;
/// otherwise move each task, in order, one tick at a time until it overlaps
/// nothing already committed and nothing placed earlier in the same intention.
pub fn oracle(cfg: &TemporalConfig, subs: &[Submission]) -> (Vec<Option<Vec<Task>>>, Vec<Task>) {
    let lead = cfg.frozen() + cfg.critical();
    let mut committed: Vec<Task> = Vec::new();
    let mut results = Vec::new();
    for sub in subs {
        if sub
            .tasks
            .iter()
            .any(|&(_, start, _)| start < sub.now + lead)
        {
            results.push(None);
            continue;
        }
        let mut placed: Vec<Task> = Vec::new();
        for task in sub.to_tasks() {
            let mut start = task.start();
            loop {
                let candidate = task.starting_at(start);
                let clash = committed
                    .iter()
                    .chain(&placed)
                    .any(|o| overlaps(o, &candidate));
                if !clash {
                    placed.push(candidate);
                    break;
                }
                start += 1;
            }
        }
        committed.extend(&placed);
        results.push(Some(placed));
    }
    (results, committed)
}

pub fn overlaps(a: &Task, b: &Task) -> bool {
    a.location == b.location && a.start() <= b.end() && b.start() <= a.end()
}

/// Every pair checked, no shortcuts.
pub fn conflicting_pairs(tasks: &[Task]) -> usize {
    let mut n = 0;
    for (i, a) in tasks.iter().enumerate() {
        for b in &tasks[i + 1..] {
            if overlaps(a, b) {
                n += 1;
            }
        }
    }
    n
}

pub fn sorted(mut tasks: Vec<Task>) -> Vec<Task> {
    tasks.sort_by_key(|t| (t.location, t.start(), t.end(), t.entity));
    tasks
}

/// What the kernel did with one instance.
pub struct Replay {
    pub results: Vec<Option<Vec<Task>>>,
    pub schedule: Vec<Task>,
    /// Conflicting pairs found after each commit.
    pub conflicts_after: Vec<usize>,
    /// Tasks intersecting `[now, now + frozen]` at a commit that changed or vanished.
    pub frozen_mutations: Vec<Task>,
    /// Previously approved tasks that changed or vanished at a commit.
    pub approved_mutations: Vec<Task>,
}

pub fn replay(cfg: &TemporalConfig, subs: &[Submission]) -> Replay {
    let mut mgr = Manager::new(ManagerId(1), *cfg);
    for s in subs {
        mgr.register(EntityId(s.entity));
    }
    let mut out = Replay {
        results: Vec::new(),
        schedule: Vec::new(),
        conflicts_after: Vec::new(),
        frozen_mutations: Vec::new(),
        approved_mutations: Vec::new(),
    };
    for sub in subs {
        let before: Vec<Task> = mgr.schedule().tasks().copied().collect();
        let frozen_edge = sub.now + cfg.frozen();
        let intention =
            Intention::new(EntityId(sub.entity), sub.to_tasks(), sub.now).expect("well-formed");
        let result = mgr
            .try_approve(&intention, sub.now)
            .ok()
            .map(|a| a.outcome.altered.tasks().to_vec());
        let after: Vec<Task> = mgr.schedule().tasks().copied().collect();
        for t in &before {
            if !after.contains(t) {
                out.approved_mutations.push(*t);
                if t.start() <= frozen_edge && t.end() >= sub.now {
                    out.frozen_mutations.push(*t);
                }
            }
        }
        out.conflicts_after.push(conflicting_pairs(&after));
        out.results.push(result);
    }
    out.schedule = mgr.schedule().tasks().copied().collect();
    out
}

/// Per-origin ticks from entry to exit with no other traffic, integrated
/// directly from the acceleration limit: speed rises by `a dt` per tick up to
/// `v_max`, position advances by the mean of consecutive speeds.
pub fn free_flow_ticks(entry: f64, exit: f64, v0: f64, v_max: f64, a: f64, dt: f64) -> Tick {
    let (mut x, mut v, mut ticks) = (entry, v0.min(v_max), 0);
    while x < exit {
        let next = (v + a * dt).min(v_max);
        x += 0.5 * (v + next) * dt;
        v = next;
        ticks += 1;
    }
    ticks
}

/// Parses `events.csv` into `(tick, event, vehicle_id, detail)` rows.
pub fn parse_events(text: &str) -> Vec<(Tick, String, String, String)> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("tick,event,vehicle_id,detail"));
    lines
        .map(|l| {
            let mut parts = l.splitn(4, ',');
            let tick = parts.next().unwrap().parse().unwrap();
            let event = parts.next().unwrap().to_string();
            let id = parts.next().unwrap().to_string();
            (tick, event, id, parts.next().unwrap_or("").to_string())
        })
        .collect()
}

/// `key=value` pairs from an event detail field.
pub fn detail_fields(detail: &str) -> BTreeMap<String, String> {
    detail
        .trim_matches('"')
        .split(' ')
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
