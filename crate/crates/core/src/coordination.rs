//! Task/intention model and the manager-side conflict resolution kernel.
//!
//! A [`Task`] claims one spatial resource over a closed tick interval. Entities
//! batch tasks into an [`Intention`] and share it with the manager owning the
//! resources. The manager delays conflicting tasks (never advances them, never
//! moves them to another resource) until the intention is conflict-free against
//! its [`ApprovedSchedule`], commits it, and notifies every entity involved.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::spatial::ResourceId;
use crate::temporal::{is_submittable, TemporalConfig, Tick};

/// Livelock guard for the shift loop in [`alter`].
pub const MAX_ALTER_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(pub u64);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ManagerId(pub u32);

impl fmt::Display for ManagerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoordinationError {
    #[error("task interval [{start}, {end}] is reversed")]
    ReversedInterval { start: Tick, end: Tick },
    #[error("an intention needs at least one task")]
    EmptyIntention,
    #[error("task {task} does not belong to {entity}")]
    ForeignTask { entity: EntityId, task: Task },
    #[error("task {task} cannot be shared at tick {now}")]
    NotSubmittable { task: Task, now: Tick },
    #[error("task {task} conflicts with scheduled task {existing}")]
    Conflict { task: Task, existing: Task },
    #[error("task {0} is not in the schedule")]
    NotScheduled(Task),
    #[error("task {task} lies inside the frozen horizon at tick {now}")]
    Frozen { task: Task, now: Tick },
}

/// Why a manager refused an intention. A refused intention leaves the schedule untouched.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Rejection {
    #[error("too late: task {task} shared at tick {now} violates the submission lead")]
    TooLate { task: Task, now: Tick },
    #[error("resolution failure: {0}")]
    ResolutionFailure(String),
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
}

/// A claim on one spatial resource over the closed interval `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Task {
    pub entity: EntityId,
    pub location: ResourceId,
    start: Tick,
    end: Tick,
}

impl Task {
    pub fn new(
        entity: EntityId,
        location: ResourceId,
        start: Tick,
        end: Tick,
    ) -> Result<Self, CoordinationError> {
        if start > end {
            return Err(CoordinationError::ReversedInterval { start, end });
        }
        Ok(Self {
            entity,
            location,
            start,
            end,
        })
    }

    /// # Panics
    /// If `duration` is negative.
    pub fn with_duration(
        entity: EntityId,
        location: ResourceId,
        start: Tick,
        duration: Tick,
    ) -> Self {
        assert!(duration >= 0, "negative task duration {duration}");
        Self {
            entity,
            location,
            start,
            end: start + duration,
        }
    }

    pub fn start(&self) -> Tick {
        self.start
    }

    pub fn end(&self) -> Tick {
        self.end
    }

    pub fn duration(&self) -> Tick {
        self.end - self.start
    }

    pub fn contains(&self, t: Tick) -> bool {
        self.start <= t && t <= self.end
    }

    /// Same task moved to begin at `start`, keeping its duration.
    pub fn starting_at(&self, start: Tick) -> Self {
        Self {
            start,
            end: start + self.duration(),
            ..*self
        }
    }

    /// Deterministic scan order: start tick, then entity, then location.
    pub fn scan_key(&self) -> (Tick, EntityId, ResourceId) {
        (self.start, self.entity, self.location)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}@{}[{},{}]",
            self.entity, self.location, self.start, self.end
        )
    }
}

/// Closed intervals on the same resource that share at least one tick.
pub fn is_conflicting(a: &Task, b: &Task) -> bool {
    let overlap =
        b.contains(a.start) || b.contains(a.end) || a.contains(b.start) || a.contains(b.end);
    overlap && a.location == b.location
}

/// Delays `task` to start one tick after `conflicting` ends.
pub fn modify_task(task: &Task, conflicting: &Task) -> Task {
    task.starting_at(conflicting.end + 1)
}

/// An ordered batch of tasks shared by one entity at `shared_at`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Intention {
    entity: EntityId,
    tasks: Vec<Task>,
    shared_at: Tick,
}

impl Intention {
    pub fn new(
        entity: EntityId,
        tasks: Vec<Task>,
        shared_at: Tick,
    ) -> Result<Self, CoordinationError> {
        if tasks.is_empty() {
            return Err(CoordinationError::EmptyIntention);
        }
        if let Some(task) = tasks.iter().find(|t| t.entity != entity) {
            return Err(CoordinationError::ForeignTask {
                entity,
                task: *task,
            });
        }
        Ok(Self {
            entity,
            tasks,
            shared_at,
        })
    }

    pub fn entity(&self) -> EntityId {
        self.entity
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn shared_at(&self) -> Tick {
        self.shared_at
    }
}

/// Conflict-free set of approved tasks, indexed by entity and by resource.
///
/// Intervals on one resource are pairwise disjoint, so the per-resource index
/// keyed by start tick is also sorted by end tick.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ApprovedSchedule {
    by_entity: BTreeMap<EntityId, Vec<Task>>,
    by_location: BTreeMap<ResourceId, BTreeMap<Tick, Task>>,
    len: usize,
}

impl ApprovedSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.by_entity.keys().copied()
    }

    /// Approved tasks of `entity`, sorted by start tick.
    pub fn tasks_of(&self, entity: EntityId) -> &[Task] {
        self.by_entity
            .get(&entity)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// All tasks, grouped by entity in ascending id order.
    pub fn tasks(&self) -> impl Iterator<Item = &Task> + '_ {
        self.by_entity.values().flatten()
    }

    pub fn contains(&self, task: &Task) -> bool {
        self.by_location
            .get(&task.location)
            .and_then(|m| m.get(&task.start))
            .is_some_and(|t| t == task)
    }

    /// First scheduled task, in scan order, that conflicts with `task`.
    pub fn first_conflict(&self, task: &Task) -> Option<&Task> {
        first_conflict_in(self.by_location.get(&task.location)?, task)
    }

    /// Inserts a task that must not conflict with anything already scheduled.
    pub fn insert(&mut self, task: Task) -> Result<(), CoordinationError> {
        if let Some(existing) = self.first_conflict(&task) {
            return Err(CoordinationError::Conflict {
                task,
                existing: *existing,
            });
        }
        self.by_location
            .entry(task.location)
            .or_default()
            .insert(task.start, task);
        let list = self.by_entity.entry(task.entity).or_default();
        let at = list.partition_point(|t| (t.start, t.location) < (task.start, task.location));
        list.insert(at, task);
        self.len += 1;
        Ok(())
    }

    pub fn remove(&mut self, task: &Task) -> bool {
        if !self.contains(task) {
            return false;
        }
        if let Some(m) = self.by_location.get_mut(&task.location) {
            m.remove(&task.start);
            if m.is_empty() {
                self.by_location.remove(&task.location);
            }
        }
        if let Some(list) = self.by_entity.get_mut(&task.entity) {
            list.retain(|t| t != task);
            if list.is_empty() {
                self.by_entity.remove(&task.entity);
            }
        }
        self.len -= 1;
        true
    }

    /// Removes every task of `entity`, returning them.
    pub fn withdraw(&mut self, entity: EntityId) -> Vec<Task> {
        let tasks = self.by_entity.remove(&entity).unwrap_or_default();
        for task in &tasks {
            if let Some(m) = self.by_location.get_mut(&task.location) {
                m.remove(&task.start);
                if m.is_empty() {
                    self.by_location.remove(&task.location);
                }
            }
        }
        self.len -= tasks.len();
        tasks
    }

    /// Drops history: tasks that ended before `tick`.
    pub fn prune_before(&mut self, tick: Tick) {
        let stale: Vec<Task> = self.tasks().filter(|t| t.end < tick).copied().collect();
        for task in stale {
            self.remove(&task);
        }
    }

    /// Replaces a scheduled task, refusing changes to frozen tasks.
    pub fn reschedule(
        &mut self,
        old: &Task,
        new: Task,
        now: Tick,
        cfg: &TemporalConfig,
    ) -> Result<(), CoordinationError> {
        if !self.contains(old) {
            return Err(CoordinationError::NotScheduled(*old));
        }
        if !freeze_check(self, now, cfg, old) {
            return Err(CoordinationError::Frozen { task: *old, now });
        }
        self.remove(old);
        if let Err(e) = self.insert(new) {
            self.insert(*old)
                .expect("restoring a removed task cannot conflict");
            return Err(e);
        }
        Ok(())
    }
}

fn first_conflict_in<'a>(index: &'a BTreeMap<Tick, Task>, task: &Task) -> Option<&'a Task> {
    if let Some((_, prev)) = index.range(..=task.start).next_back() {
        if prev.end >= task.start {
            return Some(prev);
        }
    }
    index.range(task.start..=task.end).map(|(_, t)| t).next()
}

/// Whether a scheduled task may still be changed: its whole interval must lie
/// after the frozen horizon `now + t_frozen`. Straddling tasks are immutable.
pub fn freeze_check(
    schedule: &ApprovedSchedule,
    now: Tick,
    cfg: &TemporalConfig,
    target: &Task,
) -> bool {
    schedule.contains(target) && target.start > now + cfg.frozen()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlterLimits {
    pub max_iterations: usize,
    /// Shifted tasks must start strictly after this tick.
    pub frozen_until: Option<Tick>,
}

impl Default for AlterLimits {
    fn default() -> Self {
        Self {
            max_iterations: MAX_ALTER_ITERATIONS,
            frozen_until: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskDelta {
    pub original: Task,
    pub approved: Task,
}

impl TaskDelta {
    pub fn shift(&self) -> Tick {
        self.approved.start - self.original.start
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApprovalOutcome {
    pub altered: Intention,
    /// Entities whose tasks forced a shift, plus the submitter if it was shifted.
    pub influenced: BTreeSet<EntityId>,
    pub deltas: Vec<TaskDelta>,
}

impl ApprovalOutcome {
    pub fn was_altered(&self) -> bool {
        self.deltas.iter().any(|d| d.shift() != 0)
    }

    /// Everyone who must be sent an updated approved intention.
    pub fn recipients(&self) -> BTreeSet<EntityId> {
        let mut r = self.influenced.clone();
        r.insert(self.altered.entity);
        r
    }
}

/// Shifts the intention's tasks until none conflicts with the schedule or with
/// an earlier task of the same intention.
///
/// Tasks are resolved in intention order. For each one the first conflicting
/// task in scan order is found and the task is moved to start right after it;
/// this repeats until a full scan finds nothing.
pub fn alter(
    intention: &Intention,
    schedule: &ApprovedSchedule,
    limits: AlterLimits,
) -> Result<ApprovalOutcome, Rejection> {
    let mut own: BTreeMap<ResourceId, BTreeMap<Tick, Task>> = BTreeMap::new();
    let mut influenced = BTreeSet::new();
    let mut deltas = Vec::with_capacity(intention.tasks.len());
    let mut iterations = 0usize;

    for original in &intention.tasks {
        let mut task = *original;
        loop {
            let from_schedule = schedule.first_conflict(&task);
            let from_own = own
                .get(&task.location)
                .and_then(|idx| first_conflict_in(idx, &task));
            let blocker = match (from_schedule, from_own) {
                (Some(a), Some(b)) => Some(if a.scan_key() <= b.scan_key() { a } else { b }),
                (a, b) => a.or(b),
            };
            let Some(blocker) = blocker.copied() else {
                break;
            };

            iterations += 1;
            if iterations > limits.max_iterations {
                return Err(Rejection::ResolutionFailure(format!(
                    "no conflict-free placement after {} shifts",
                    limits.max_iterations
                )));
            }
            task = modify_task(&task, &blocker);
            if let Some(horizon) = limits.frozen_until {
                if task.start <= horizon {
                    return Err(Rejection::ResolutionFailure(format!(
                        "shifted task {task} would start inside the frozen horizon ending at {horizon}"
                    )));
                }
            }
            influenced.insert(blocker.entity);
            influenced.insert(intention.entity);
        }
        own.entry(task.location)
            .or_default()
            .insert(task.start, task);
        deltas.push(TaskDelta {
            original: *original,
            approved: task,
        });
    }

    let altered = Intention {
        entity: intention.entity,
        tasks: deltas.iter().map(|d| d.approved).collect(),
        shared_at: intention.shared_at,
    };
    Ok(ApprovalOutcome {
        altered,
        influenced,
        deltas,
    })
}

/// Validates submission timing, resolves conflicts and commits the result.
/// All-or-nothing: on rejection the schedule is unchanged.
pub fn try_approve(
    intention: &Intention,
    schedule: &mut ApprovedSchedule,
    now: Tick,
    cfg: &TemporalConfig,
) -> Result<ApprovalOutcome, Rejection> {
    if let Some(task) = intention
        .tasks
        .iter()
        .find(|t| !is_submittable(now, t.start, cfg))
    {
        return Err(Rejection::TooLate { task: *task, now });
    }
    let limits = AlterLimits {
        frozen_until: Some(now + cfg.frozen()),
        ..AlterLimits::default()
    };
    let outcome = alter(intention, schedule, limits)?;
    for task in &outcome.altered.tasks {
        schedule
            .insert(*task)
            .expect("altered intention is conflict-free against the schedule");
    }
    Ok(outcome)
}

/// Updated approved intention sent from a manager to one entity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Notification {
    pub manager: ManagerId,
    pub entity: EntityId,
    pub approved: Vec<Task>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Approval {
    pub outcome: ApprovalOutcome,
    pub notifications: Vec<Notification>,
}

/// A sub-system manager: serial decision point over its own schedule.
#[derive(Debug, Clone)]
pub struct Manager {
    id: ManagerId,
    cfg: TemporalConfig,
    schedule: ApprovedSchedule,
    entities: BTreeSet<EntityId>,
}

impl Manager {
    pub fn new(id: ManagerId, cfg: TemporalConfig) -> Self {
        Self {
            id,
            cfg,
            schedule: ApprovedSchedule::new(),
            entities: BTreeSet::new(),
        }
    }

    pub fn id(&self) -> ManagerId {
        self.id
    }

    pub fn config(&self) -> &TemporalConfig {
        &self.cfg
    }

    pub fn schedule(&self) -> &ApprovedSchedule {
        &self.schedule
    }

    pub fn register(&mut self, entity: EntityId) {
        self.entities.insert(entity);
    }

    pub fn deregister(&mut self, entity: EntityId) -> bool {
        self.entities.remove(&entity)
    }

    pub fn knows(&self, entity: EntityId) -> bool {
        self.entities.contains(&entity)
    }

    pub fn try_approve(&mut self, intention: &Intention, now: Tick) -> Result<Approval, Rejection> {
        if !self.knows(intention.entity) {
            return Err(Rejection::UnknownEntity(intention.entity));
        }
        let outcome = try_approve(intention, &mut self.schedule, now, &self.cfg)?;
        let notifications = outcome
            .recipients()
            .into_iter()
            .map(|entity| Notification {
                manager: self.id,
                entity,
                approved: self.schedule.tasks_of(entity).to_vec(),
            })
            .collect();
        Ok(Approval {
            outcome,
            notifications,
        })
    }

    /// Removes specific tasks; used to roll back a partially approved intention.
    pub fn retract(&mut self, tasks: &[Task]) {
        for task in tasks {
            self.schedule.remove(task);
        }
    }

    pub fn withdraw(&mut self, entity: EntityId) -> Vec<Task> {
        self.schedule.withdraw(entity)
    }

    pub fn prune_before(&mut self, tick: Tick) {
        self.schedule.prune_before(tick);
    }

    pub(crate) fn schedule_mut(&mut self) -> &mut ApprovedSchedule {
        &mut self.schedule
    }
}

/// Builds an intention after checking every task may still be shared at `now`.
pub fn entity_submit(
    entity: EntityId,
    tasks: Vec<Task>,
    now: Tick,
    cfg: &TemporalConfig,
) -> Result<Intention, CoordinationError> {
    if let Some(task) = tasks.iter().find(|t| !is_submittable(now, t.start, cfg)) {
        return Err(CoordinationError::NotSubmittable { task: *task, now });
    }
    Intention::new(entity, tasks, now)
}

/// The approved task active at tick `t`, if any. `approved` must be sorted by
/// start tick; when several tasks contain `t` the latest-starting one wins.
pub fn entity_find_action(approved: &[Task], t: Tick) -> Option<&Task> {
    let started = approved.partition_point(|task| task.start <= t);
    approved[..started].iter().rev().find(|task| task.end >= t)
}

/// Entity-side view: the approved tasks received from each manager, plus an
/// inbox of updates that only take effect at the next tick boundary.
#[derive(Debug, Clone)]
pub struct Entity {
    id: EntityId,
    approved: BTreeMap<ManagerId, Vec<Task>>,
    merged: Vec<Task>,
    inbox: Vec<Notification>,
}

impl Entity {
    pub fn new(id: EntityId) -> Self {
        Self {
            id,
            approved: BTreeMap::new(),
            merged: Vec::new(),
            inbox: Vec::new(),
        }
    }

    pub fn id(&self) -> EntityId {
        self.id
    }

    pub fn submit(
        &self,
        tasks: Vec<Task>,
        now: Tick,
        cfg: &TemporalConfig,
    ) -> Result<Intention, CoordinationError> {
        entity_submit(self.id, tasks, now, cfg)
    }

    /// Queues an update. Notifications for other entities are ignored.
    pub fn deliver(&mut self, notification: Notification) {
        if notification.entity == self.id {
            self.inbox.push(notification);
        }
    }

    /// Applies queued updates atomically; call at a tick boundary.
    pub fn sync(&mut self) -> usize {
        let n = self.inbox.len();
        if n == 0 {
            return 0;
        }
        for note in self.inbox.drain(..) {
            self.approved.insert(note.manager, note.approved);
        }
        self.merged = self.approved.values().flatten().copied().collect();
        self.merged.sort_by_key(|t| (t.start, t.location));
        n
    }

    pub fn approved(&self) -> &[Task] {
        &self.merged
    }

    pub fn find_action(&self, t: Tick) -> Option<&Task> {
        entity_find_action(&self.merged, t)
    }
}

/// First pair of conflicting tasks, by exhaustive pairwise comparison.
pub fn find_conflicting_pair(tasks: &[Task]) -> Option<(Task, Task)> {
    for (i, a) in tasks.iter().enumerate() {
        for b in &tasks[i + 1..] {
            if is_conflicting(a, b) {
                return Some((*a, *b));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::LaneId;

    fn r(cell: i64) -> ResourceId {
        ResourceId::new(LaneId(0), cell)
    }

    fn task(e: u64, loc: i64, start: Tick, end: Tick) -> Task {
        Task::new(EntityId(e), r(loc), start, end).unwrap()
    }

    fn fig() -> TemporalConfig {
        TemporalConfig::new(10, 3, 17).unwrap()
    }

    #[test]
    fn conflict_examples() {
        assert!(is_conflicting(&task(1, 1, 5, 10), &task(2, 1, 8, 12)));
        assert!(!is_conflicting(&task(1, 1, 5, 10), &task(2, 2, 8, 12)));
        // touching endpoints: 10 ∈ [5, 10]
        assert!(is_conflicting(&task(1, 1, 5, 10), &task(2, 1, 10, 15)));
        assert!(!is_conflicting(&task(1, 1, 5, 10), &task(2, 1, 11, 15)));
        // containment without endpoint sharing
        assert!(is_conflicting(&task(1, 1, 0, 20), &task(2, 1, 5, 6)));
    }

    #[test]
    fn reversed_interval_rejected() {
        assert!(matches!(
            Task::new(EntityId(1), r(0), 5, 4),
            Err(CoordinationError::ReversedInterval { .. })
        ));
    }

    #[test]
    fn modify_examples() {
        let shifted = modify_task(&task(1, 1, 5, 15), &task(2, 1, 0, 12));
        assert_eq!(
            (shifted.start(), shifted.end(), shifted.duration()),
            (13, 23, 10)
        );
        assert_eq!(shifted.location, r(1));

        let zero = modify_task(&task(1, 1, 5, 5), &task(2, 1, 5, 5));
        assert_eq!((zero.start(), zero.end()), (6, 6));

        let third = task(3, 1, 20, 25);
        assert!(is_conflicting(&shifted, &third));
        let again = modify_task(&shifted, &third);
        assert_eq!((again.start(), again.end()), (26, 36));
    }

    #[test]
    fn alter_on_empty_schedule_is_identity() {
        let i =
            Intention::new(EntityId(2), vec![task(2, 1, 40, 50), task(2, 2, 45, 60)], 0).unwrap();
        let out = alter(&i, &ApprovedSchedule::new(), AlterLimits::default()).unwrap();
        assert_eq!(out.altered, i);
        assert!(out.influenced.is_empty());
        assert!(!out.was_altered());
    }

    #[test]
    fn alter_single_shift() {
        let mut s = ApprovedSchedule::new();
        s.insert(task(1, 1, 40, 50)).unwrap();
        let i = Intention::new(EntityId(2), vec![task(2, 1, 45, 55)], 0).unwrap();
        let out = alter(&i, &s, AlterLimits::default()).unwrap();
        assert_eq!(out.altered.tasks()[0], task(2, 1, 51, 61));
        assert_eq!(out.influenced, BTreeSet::from([EntityId(1), EntityId(2)]));
        assert_eq!(out.deltas[0].shift(), 6);
    }

    #[test]
    fn alter_chains_through_several_blockers() {
        let mut s = ApprovedSchedule::new();
        s.insert(task(1, 1, 0, 12)).unwrap();
        s.insert(task(3, 1, 20, 25)).unwrap();
        s.insert(task(4, 2, 0, 100)).unwrap();
        let i = Intention::new(EntityId(2), vec![task(2, 1, 5, 15)], 0).unwrap();
        let out = alter(&i, &s, AlterLimits::default()).unwrap();
        assert_eq!(out.altered.tasks()[0], task(2, 1, 26, 36));
        assert_eq!(
            out.influenced,
            BTreeSet::from([EntityId(1), EntityId(2), EntityId(3)])
        );
    }

    #[test]
    fn alter_resolves_intra_intention_conflicts() {
        let i =
            Intention::new(EntityId(2), vec![task(2, 1, 40, 50), task(2, 1, 45, 47)], 0).unwrap();
        let out = alter(&i, &ApprovedSchedule::new(), AlterLimits::default()).unwrap();
        assert_eq!(
            out.altered.tasks(),
            &[task(2, 1, 40, 50), task(2, 1, 51, 53)]
        );
        assert_eq!(out.influenced, BTreeSet::from([EntityId(2)]));
    }

    #[test]
    fn alter_iteration_guard() {
        let mut s = ApprovedSchedule::new();
        for k in 0..10 {
            s.insert(task(1, 1, k * 10, k * 10 + 9)).unwrap();
        }
        let i = Intention::new(EntityId(2), vec![task(2, 1, 0, 5)], 0).unwrap();
        let limits = AlterLimits {
            max_iterations: 5,
            frozen_until: None,
        };
        assert!(matches!(
            alter(&i, &s, limits),
            Err(Rejection::ResolutionFailure(_))
        ));
        assert!(alter(&i, &s, AlterLimits::default()).is_ok());
    }

    #[test]
    fn try_approve_examples() {
        let cfg = fig();
        let mut s = ApprovedSchedule::new();

        let a = Intention::new(EntityId(1), vec![task(1, 1, 40, 50)], 5).unwrap();
        let out = try_approve(&a, &mut s, 5, &cfg).unwrap();
        assert!(!out.was_altered());
        assert_eq!(s.len(), 1);

        let late = Intention::new(EntityId(2), vec![task(2, 1, 40, 50)], 35).unwrap();
        assert!(matches!(
            try_approve(&late, &mut s, 35, &cfg),
            Err(Rejection::TooLate { .. })
        ));
        assert_eq!(s.len(), 1);

        let b = Intention::new(EntityId(2), vec![task(2, 1, 40, 50)], 6).unwrap();
        let out = try_approve(&b, &mut s, 6, &cfg).unwrap();
        assert_eq!(out.altered.tasks()[0], task(2, 1, 51, 61));
        assert!(s.contains(&task(2, 1, 51, 61)));
        assert!(s.contains(&task(1, 1, 40, 50)));
    }

    #[test]
    fn manager_rejects_unknown_and_notifies_influenced() {
        let mut m = Manager::new(ManagerId(1), fig());
        let i = Intention::new(EntityId(1), vec![task(1, 1, 40, 50)], 0).unwrap();
        assert_eq!(
            m.try_approve(&i, 0),
            Err(Rejection::UnknownEntity(EntityId(1)))
        );

        m.register(EntityId(1));
        m.register(EntityId(2));
        let first = m.try_approve(&i, 0).unwrap();
        assert_eq!(first.notifications.len(), 1);

        let j = Intention::new(EntityId(2), vec![task(2, 1, 45, 55)], 0).unwrap();
        let second = m.try_approve(&j, 0).unwrap();
        let to: Vec<EntityId> = second.notifications.iter().map(|n| n.entity).collect();
        assert_eq!(to, vec![EntityId(1), EntityId(2)]);
        assert_eq!(second.notifications[1].approved, vec![task(2, 1, 51, 61)]);
    }

    #[test]
    fn rejected_intention_leaves_schedule_untouched() {
        let cfg = fig();
        let mut s = ApprovedSchedule::new();
        for k in 0..1100 {
            s.insert(task(1, 1, 100 + 2 * k, 101 + 2 * k)).unwrap();
        }
        let before = s.clone();
        // the first task fits, the second cannot be resolved within the guard
        let i = Intention::new(
            EntityId(2),
            vec![task(2, 2, 50, 60), task(2, 1, 100, 100)],
            0,
        )
        .unwrap();
        assert!(matches!(
            try_approve(&i, &mut s, 0, &cfg),
            Err(Rejection::ResolutionFailure(_))
        ));
        assert_eq!(s, before);
    }

    #[test]
    fn freeze_examples() {
        let cfg = TemporalConfig::new(10, 3, 17).unwrap();
        let mut s = ApprovedSchedule::new();
        let inside = task(1, 1, 5, 8);
        let beyond = task(1, 2, 11, 20);
        let straddling = task(1, 3, 9, 12);
        for t in [inside, beyond, straddling] {
            s.insert(t).unwrap();
        }
        assert!(!freeze_check(&s, 0, &cfg, &inside));
        assert!(freeze_check(&s, 0, &cfg, &beyond));
        assert!(!freeze_check(&s, 0, &cfg, &straddling));
        assert!(!freeze_check(&s, 0, &cfg, &task(9, 9, 50, 60)));

        assert!(matches!(
            s.reschedule(&straddling, straddling.starting_at(30), 0, &cfg),
            Err(CoordinationError::Frozen { .. })
        ));
        s.reschedule(&beyond, beyond.starting_at(30), 0, &cfg)
            .unwrap();
        assert!(s.contains(&task(1, 2, 30, 39)));
    }

    #[test]
    fn find_action_examples() {
        let tasks = [task(1, 0, 0, 5), task(1, 1, 10, 20)];
        assert_eq!(entity_find_action(&tasks, 12), Some(&tasks[1]));
        assert_eq!(entity_find_action(&tasks, 7), None);
        let tasks = [task(1, 0, 0, 5), task(1, 1, 6, 20)];
        assert_eq!(entity_find_action(&tasks, 6), Some(&tasks[1]));
        assert_eq!(entity_find_action(&tasks, 5), Some(&tasks[0]));
        assert_eq!(entity_find_action(&[], 5), None);
    }

    #[test]
    fn entity_submit_validation() {
        let cfg = fig();
        let ok = entity_submit(EntityId(1), vec![task(1, 1, 40, 45)], 5, &cfg).unwrap();
        assert_eq!(ok.shared_at(), 5);
        assert!(matches!(
            entity_submit(EntityId(1), vec![task(1, 1, 3, 4)], 5, &cfg),
            Err(CoordinationError::NotSubmittable { .. })
        ));
        assert!(matches!(
            entity_submit(EntityId(1), vec![task(2, 1, 40, 45)], 5, &cfg),
            Err(CoordinationError::ForeignTask { .. })
        ));
        assert_eq!(
            entity_submit(EntityId(1), vec![], 5, &cfg),
            Err(CoordinationError::EmptyIntention)
        );
    }

    #[test]
    fn entity_applies_updates_at_tick_boundary() {
        let mut e = Entity::new(EntityId(1));
        let first = vec![task(1, 0, 0, 5), task(1, 1, 10, 20)];
        e.deliver(Notification {
            manager: ManagerId(1),
            entity: EntityId(1),
            approved: first.clone(),
        });
        // not visible until sync
        assert_eq!(e.find_action(3), None);
        assert_eq!(e.sync(), 1);
        assert_eq!(e.find_action(3), Some(&first[0]));

        // an update lands between two execute steps
        e.deliver(Notification {
            manager: ManagerId(1),
            entity: EntityId(1),
            approved: vec![task(1, 0, 0, 5), task(1, 1, 14, 24)],
        });
        e.deliver(Notification {
            manager: ManagerId(1),
            entity: EntityId(7),
            approved: vec![],
        });
        assert_eq!(e.find_action(12), Some(&first[1]));
        assert_eq!(e.sync(), 1);
        assert_eq!(e.find_action(12), None);
        assert_eq!(e.find_action(24).map(|t| t.start()), Some(14));
    }

    #[test]
    fn prune_and_withdraw() {
        let mut s = ApprovedSchedule::new();
        s.insert(task(1, 1, 0, 5)).unwrap();
        s.insert(task(1, 2, 10, 20)).unwrap();
        s.insert(task(2, 1, 6, 9)).unwrap();
        s.prune_before(6);
        assert_eq!(s.len(), 2);
        assert_eq!(s.withdraw(EntityId(1)), vec![task(1, 2, 10, 20)]);
        assert_eq!(s.len(), 1);
        assert!(s.tasks_of(EntityId(1)).is_empty());
        assert!(s.first_conflict(&task(3, 2, 10, 20)).is_none());
    }
}
