//! Spatial jurisdiction over 1-D road space.
//!
//! Road space is tiled by half-open manager domains `[x_lo, x_hi)` and cut into
//! uniform cells per lane. A cell on a lane is the [`ResourceId`] that tasks
//! claim. Intentions that touch several domains are split at submission time
//! and every fragment must be approved by its owning manager.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::coordination::{
    Approval, CoordinationError, EntityId, Intention, Manager, ManagerId, Notification, Rejection,
    Task,
};
use crate::temporal::{TemporalConfig, Tick};

pub const DEFAULT_CELL_LENGTH: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LaneId(pub u8);

/// One cell of one lane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ResourceId {
    pub lane: LaneId,
    pub cell: i64,
}

impl ResourceId {
    pub fn new(lane: LaneId, cell: i64) -> Self {
        Self { lane, cell }
    }
}

impl fmt::Display for ResourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}:{}", self.lane.0, self.cell)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpatialError {
    #[error("position {0} m lies outside every domain")]
    OutOfWorld(f64),
    #[error("domains must tile the road: {0}")]
    BadLayout(String),
    #[error("cell length must be positive and finite, got {0}")]
    BadCellLength(f64),
    #[error("{from} and {to} are not neighbors")]
    NotNeighbors { from: ManagerId, to: ManagerId },
    #[error("{entity} is not registered with {manager}")]
    NotRegistered {
        entity: EntityId,
        manager: ManagerId,
    },
    #[error("unknown manager {0}")]
    UnknownManager(ManagerId),
    #[error(transparent)]
    Coordination(#[from] CoordinationError),
    #[error("fragment for {manager} rejected: {rejection}")]
    Rejected {
        manager: ManagerId,
        rejection: Rejection,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialDomain {
    pub manager: ManagerId,
    pub x_lo: f64,
    pub x_hi: f64,
    pub neighbors: BTreeSet<ManagerId>,
}

impl SpatialDomain {
    pub fn contains(&self, x: f64) -> bool {
        self.x_lo <= x && x < self.x_hi
    }
}

/// The unique domain with `x_lo <= position < x_hi`.
pub fn locate_manager(position: f64, domains: &[SpatialDomain]) -> Result<ManagerId, SpatialError> {
    domains
        .iter()
        .find(|d| d.contains(position))
        .map(|d| d.manager)
        .ok_or(SpatialError::OutOfWorld(position))
}

/// Validated domain tiling.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    domains: Vec<SpatialDomain>,
}

impl Layout {
    /// Domains must be contiguous, non-empty and carry a symmetric neighbor relation.
    pub fn new(mut domains: Vec<SpatialDomain>) -> Result<Self, SpatialError> {
        if domains.is_empty() {
            return Err(SpatialError::BadLayout("no domains".into()));
        }
        domains.sort_by(|a, b| a.x_lo.total_cmp(&b.x_lo));
        let mut ids = BTreeSet::new();
        for d in &domains {
            if d.x_lo.partial_cmp(&d.x_hi) != Some(std::cmp::Ordering::Less) {
                return Err(SpatialError::BadLayout(format!(
                    "{} has empty extent",
                    d.manager
                )));
            }
            if !ids.insert(d.manager) {
                return Err(SpatialError::BadLayout(format!(
                    "{} appears twice",
                    d.manager
                )));
            }
        }
        for pair in domains.windows(2) {
            if pair[0].x_hi != pair[1].x_lo {
                return Err(SpatialError::BadLayout(format!(
                    "gap or overlap between {} and {}",
                    pair[0].manager, pair[1].manager
                )));
            }
        }
        for d in &domains {
            for n in &d.neighbors {
                let back = domains.iter().find(|o| o.manager == *n);
                if !back.is_some_and(|o| o.neighbors.contains(&d.manager)) {
                    return Err(SpatialError::BadLayout(format!(
                        "neighbor relation {} -> {} is not symmetric",
                        d.manager, n
                    )));
                }
            }
        }
        Ok(Self { domains })
    }

    /// Splits `[x_lo, x_hi)` into `count` equal domains, each neighboring the next.
    pub fn uniform(x_lo: f64, x_hi: f64, count: u32) -> Result<Self, SpatialError> {
        if count == 0 {
            return Err(SpatialError::BadLayout("no domains".into()));
        }
        let width = (x_hi - x_lo) / count as f64;
        let domains = (0..count)
            .map(|i| {
                let mut neighbors = BTreeSet::new();
                if i > 0 {
                    neighbors.insert(ManagerId(i));
                }
                if i + 1 < count {
                    neighbors.insert(ManagerId(i + 2));
                }
                SpatialDomain {
                    manager: ManagerId(i + 1),
                    x_lo: x_lo + width * i as f64,
                    x_hi: if i + 1 == count {
                        x_hi
                    } else {
                        x_lo + width * (i + 1) as f64
                    },
                    neighbors,
                }
            })
            .collect();
        Self::new(domains)
    }

    pub fn domains(&self) -> &[SpatialDomain] {
        &self.domains
    }

    pub fn extent(&self) -> (f64, f64) {
        (
            self.domains[0].x_lo,
            self.domains[self.domains.len() - 1].x_hi,
        )
    }

    pub fn locate(&self, position: f64) -> Result<ManagerId, SpatialError> {
        locate_manager(position, &self.domains)
    }

    pub fn domain(&self, manager: ManagerId) -> Option<&SpatialDomain> {
        self.domains.iter().find(|d| d.manager == manager)
    }

    pub fn are_neighbors(&self, a: ManagerId, b: ManagerId) -> bool {
        self.domain(a).is_some_and(|d| d.neighbors.contains(&b))
    }
}

pub fn cell_of(x: f64, cell_length: f64) -> i64 {
    (x / cell_length).floor() as i64
}

/// Inclusive range of cells touched by the closed span `[x_a, x_b]`.
pub fn cells_spanned(x_a: f64, x_b: f64, cell_length: f64) -> std::ops::RangeInclusive<i64> {
    cell_of(x_a, cell_length)..=cell_of(x_b, cell_length)
}

/// One claim per cell overlapped by the span, each carrying the whole interval.
pub fn discretize_claim(
    entity: EntityId,
    lane: LaneId,
    span: (f64, f64),
    interval: (Tick, Tick),
    cell_length: f64,
) -> Vec<Task> {
    debug_assert!(span.0 <= span.1 && interval.0 <= interval.1);
    cells_spanned(span.0, span.1, cell_length)
        .map(|cell| {
            Task::with_duration(
                entity,
                ResourceId::new(lane, cell),
                interval.0,
                interval.1 - interval.0,
            )
        })
        .collect()
}

/// Where a body of road user sits at one tick: lane and closed longitudinal span.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub tick: Tick,
    pub lane: LaneId,
    pub rear: f64,
    pub front: f64,
}

/// Per-cell claims from a sequence of footprints: each touched cell is claimed
/// from the first to the last tick the body overlaps it. Footprints must be in
/// ascending tick order.
pub fn occupancy_claims<I>(entity: EntityId, footprints: I, cell_length: f64) -> Vec<Task>
where
    I: IntoIterator<Item = Footprint>,
{
    let mut spans: BTreeMap<ResourceId, (Tick, Tick)> = BTreeMap::new();
    for fp in footprints {
        for cell in cells_spanned(fp.rear, fp.front, cell_length) {
            spans
                .entry(ResourceId::new(fp.lane, cell))
                .and_modify(|s| s.1 = fp.tick)
                .or_insert((fp.tick, fp.tick));
        }
    }
    let mut claims: Vec<Task> = spans
        .into_iter()
        .map(|(loc, (a, b))| Task::with_duration(entity, loc, a, b - a))
        .collect();
    claims.sort_by_key(|t| (t.start(), t.location));
    claims
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HandoverAck {
    pub entity: EntityId,
    pub from: ManagerId,
    pub to: ManagerId,
    pub transferred: Vec<Task>,
}

/// All managers of a road, their schedules, and which manager each entity is registered with.
#[derive(Debug, Clone)]
pub struct Jurisdiction {
    layout: Layout,
    cell_length: f64,
    managers: BTreeMap<ManagerId, Manager>,
    home: BTreeMap<EntityId, ManagerId>,
}

impl Jurisdiction {
    pub fn new(
        layout: Layout,
        cell_length: f64,
        cfg: TemporalConfig,
    ) -> Result<Self, SpatialError> {
        if !(cell_length.is_finite() && cell_length > 0.0) {
            return Err(SpatialError::BadCellLength(cell_length));
        }
        let managers = layout
            .domains()
            .iter()
            .map(|d| (d.manager, Manager::new(d.manager, cfg)))
            .collect();
        Ok(Self {
            layout,
            cell_length,
            managers,
            home: BTreeMap::new(),
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn manager(&self, id: ManagerId) -> Option<&Manager> {
        self.managers.get(&id)
    }

    pub fn managers(&self) -> impl Iterator<Item = &Manager> + '_ {
        self.managers.values()
    }

    pub fn home_of(&self, entity: EntityId) -> Option<ManagerId> {
        self.home.get(&entity).copied()
    }

    /// Manager responsible for a resource: the domain holding the cell's lower edge.
    pub fn owner_of(&self, resource: ResourceId) -> Result<ManagerId, SpatialError> {
        self.layout.locate(resource.cell as f64 * self.cell_length)
    }

    pub fn register(&mut self, entity: EntityId, position: f64) -> Result<ManagerId, SpatialError> {
        let id = self.layout.locate(position)?;
        self.managers
            .get_mut(&id)
            .expect("layout and managers agree")
            .register(entity);
        self.home.insert(entity, id);
        Ok(id)
    }

    /// Tasks grouped by owning manager, preserving their relative order.
    pub fn route(&self, tasks: &[Task]) -> Result<BTreeMap<ManagerId, Vec<Task>>, SpatialError> {
        let mut parts: BTreeMap<ManagerId, Vec<Task>> = BTreeMap::new();
        for task in tasks {
            parts
                .entry(self.owner_of(task.location)?)
                .or_default()
                .push(*task);
        }
        Ok(parts)
    }

    /// Splits the intention per domain and has each owning manager approve its
    /// fragment. If any fragment is rejected, fragments already committed are
    /// retracted and the error is returned.
    pub fn submit(
        &mut self,
        intention: &Intention,
        now: Tick,
    ) -> Result<Vec<Approval>, SpatialError> {
        let entity = intention.entity();
        let home = self.home_of(entity).ok_or(SpatialError::Rejected {
            manager: ManagerId(0),
            rejection: Rejection::UnknownEntity(entity),
        })?;
        let parts = self.route(intention.tasks())?;
        let mut committed: Vec<(ManagerId, Approval)> = Vec::new();
        for (id, tasks) in parts {
            let fragment = Intention::new(entity, tasks, intention.shared_at())?;
            let manager = self
                .managers
                .get_mut(&id)
                .ok_or(SpatialError::UnknownManager(id))?;
            // the home manager introduces its entity to the managers it forwards to
            if id != home {
                manager.register(entity);
            }
            match manager.try_approve(&fragment, now) {
                Ok(approval) => committed.push((id, approval)),
                Err(rejection) => {
                    for (prev, approval) in &committed {
                        self.managers
                            .get_mut(prev)
                            .expect("committed manager exists")
                            .retract(approval.outcome.altered.tasks());
                    }
                    return Err(SpatialError::Rejected {
                        manager: id,
                        rejection,
                    });
                }
            }
        }
        Ok(committed.into_iter().map(|(_, a)| a).collect())
    }

    /// Moves `entity`'s registration from `from` to its neighbor `to`. Pending
    /// tasks located in `to`'s extent end up in `to`'s schedule unchanged; the
    /// rest stay where they are.
    pub fn handover(
        &mut self,
        entity: EntityId,
        from: ManagerId,
        to: ManagerId,
        pending: &[Task],
    ) -> Result<HandoverAck, SpatialError> {
        if !self.managers.contains_key(&to) {
            return Err(SpatialError::UnknownManager(to));
        }
        if !self.layout.are_neighbors(from, to) {
            return Err(SpatialError::NotNeighbors { from, to });
        }
        if self.home_of(entity) != Some(from) {
            return Err(SpatialError::NotRegistered {
                entity,
                manager: from,
            });
        }

        let mut moving = Vec::new();
        for task in pending {
            if self.owner_of(task.location)? == to {
                moving.push(*task);
            }
        }
        // dry run: anything not yet at the destination must fit there
        {
            let dest = self.managers[&to].schedule();
            for task in &moving {
                if !dest.contains(task) {
                    if let Some(existing) = dest.first_conflict(task) {
                        return Err(CoordinationError::Conflict {
                            task: *task,
                            existing: *existing,
                        }
                        .into());
                    }
                }
            }
        }
        let mut transferred = Vec::new();
        for task in moving {
            let src = self.managers.get_mut(&from).expect("checked");
            src.schedule_mut().remove(&task);
            let dest = self.managers.get_mut(&to).expect("checked");
            if !dest.schedule().contains(&task) {
                dest.schedule_mut().insert(task)?;
                transferred.push(task);
            }
        }
        self.managers
            .get_mut(&from)
            .expect("checked")
            .deregister(entity);
        self.managers
            .get_mut(&to)
            .expect("checked")
            .register(entity);
        self.home.insert(entity, to);
        Ok(HandoverAck {
            entity,
            from,
            to,
            transferred,
        })
    }

    /// Every scheduled task across all managers.
    pub fn all_tasks(&self) -> Vec<Task> {
        self.managers
            .values()
            .flat_map(|m| m.schedule().tasks().copied())
            .collect()
    }

    /// Notifications for `entity` from every manager holding its tasks.
    pub fn snapshot_for(&self, entity: EntityId) -> Vec<Notification> {
        self.managers
            .values()
            .filter(|m| !m.schedule().tasks_of(entity).is_empty())
            .map(|m| Notification {
                manager: m.id(),
                entity,
                approved: m.schedule().tasks_of(entity).to_vec(),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coordination::{entity_submit, find_conflicting_pair};

    fn two_domains() -> Layout {
        Layout::uniform(0.0, 1000.0, 2).unwrap()
    }

    #[test]
    fn locate_examples() {
        let layout = two_domains();
        assert_eq!(layout.locate(499.9).unwrap(), ManagerId(1));
        assert_eq!(layout.locate(500.0).unwrap(), ManagerId(2));
        assert_eq!(layout.locate(0.0).unwrap(), ManagerId(1));
        assert!(matches!(
            layout.locate(1000.0),
            Err(SpatialError::OutOfWorld(_))
        ));
        assert!(matches!(
            layout.locate(-0.1),
            Err(SpatialError::OutOfWorld(_))
        ));
    }

    #[test]
    fn layout_validation() {
        let d = |id, lo, hi, n: &[u32]| SpatialDomain {
            manager: ManagerId(id),
            x_lo: lo,
            x_hi: hi,
            neighbors: n.iter().map(|&i| ManagerId(i)).collect(),
        };
        assert!(Layout::new(vec![d(1, 0.0, 500.0, &[2]), d(2, 500.0, 1000.0, &[1])]).is_ok());
        assert!(Layout::new(vec![d(1, 0.0, 400.0, &[2]), d(2, 500.0, 1000.0, &[1])]).is_err());
        assert!(Layout::new(vec![d(1, 0.0, 600.0, &[2]), d(2, 500.0, 1000.0, &[1])]).is_err());
        assert!(Layout::new(vec![d(1, 0.0, 500.0, &[2]), d(2, 500.0, 1000.0, &[])]).is_err());
        assert!(Layout::new(vec![]).is_err());
    }

    #[test]
    fn discretize_examples() {
        let e = EntityId(1);
        let one = discretize_claim(e, LaneId(0), (0.0, 4.9), (3, 9), 5.0);
        assert_eq!(one.len(), 1);
        assert_eq!(
            (one[0].location.cell, one[0].start(), one[0].end()),
            (0, 3, 9)
        );

        let two = discretize_claim(e, LaneId(0), (4.9, 5.1), (3, 9), 5.0);
        let cells: Vec<i64> = two.iter().map(|t| t.location.cell).collect();
        assert_eq!(cells, vec![0, 1]);
        assert!(two.iter().all(|t| (t.start(), t.end()) == (3, 9)));
    }

    #[test]
    fn occupancy_of_a_moving_vehicle() {
        // 5 m body, front moving 5 m -> 20 m at 0.5 m per tick over ticks 0..=30.
        // A cell c is touched while floor((f-5)/5) <= c <= floor(f/5).
        let fps = (0..=30).map(|k| {
            let front = 5.0 + 0.5 * k as f64;
            Footprint {
                tick: k,
                lane: LaneId(0),
                rear: front - 5.0,
                front,
            }
        });
        let claims = occupancy_claims(EntityId(1), fps, 5.0);
        let got: Vec<(i64, Tick, Tick)> = claims
            .iter()
            .map(|t| (t.location.cell, t.start(), t.end()))
            .collect();
        assert_eq!(
            got,
            vec![(0, 0, 9), (1, 0, 19), (2, 10, 29), (3, 20, 30), (4, 30, 30)]
        );
    }

    fn cfg() -> TemporalConfig {
        TemporalConfig::new(10, 3, 17).unwrap()
    }

    fn task(e: u64, cell: i64, s: Tick, end: Tick) -> Task {
        Task::new(EntityId(e), ResourceId::new(LaneId(0), cell), s, end).unwrap()
    }

    #[test]
    fn cross_domain_intention_is_split_and_jointly_approved() {
        let mut j = Jurisdiction::new(two_domains(), 5.0, cfg()).unwrap();
        j.register(EntityId(1), 480.0).unwrap();
        // cells 98, 99 belong to M1; 100, 101 to M2
        let tasks = vec![
            task(1, 98, 20, 25),
            task(1, 99, 22, 27),
            task(1, 100, 24, 29),
            task(1, 101, 26, 31),
        ];
        let intention = entity_submit(EntityId(1), tasks, 0, &cfg()).unwrap();
        let approvals = j.submit(&intention, 0).unwrap();
        assert_eq!(approvals.len(), 2);
        assert_eq!(j.manager(ManagerId(1)).unwrap().schedule().len(), 2);
        assert_eq!(j.manager(ManagerId(2)).unwrap().schedule().len(), 2);

        // a second entity crossing the boundary at the same time gets delayed on both sides
        j.register(EntityId(2), 470.0).unwrap();
        let other = Intention::new(
            EntityId(2),
            vec![task(2, 99, 22, 27), task(2, 100, 24, 29)],
            0,
        )
        .unwrap();
        j.submit(&other, 0).unwrap();
        assert!(find_conflicting_pair(&j.all_tasks()).is_none());
    }

    #[test]
    fn rejected_fragment_rolls_back_the_others() {
        let mut j = Jurisdiction::new(two_domains(), 5.0, cfg()).unwrap();
        j.register(EntityId(1), 480.0).unwrap();
        // second fragment is too late (start 5 < 0 + 13)
        let i = Intention::new(
            EntityId(1),
            vec![task(1, 99, 20, 25), task(1, 100, 5, 10)],
            0,
        )
        .unwrap();
        assert!(matches!(
            j.submit(&i, 0),
            Err(SpatialError::Rejected { .. })
        ));
        assert!(j.all_tasks().is_empty());
    }

    #[test]
    fn unregistered_entity_cannot_submit() {
        let mut j = Jurisdiction::new(two_domains(), 5.0, cfg()).unwrap();
        let i = Intention::new(EntityId(9), vec![task(9, 10, 20, 25)], 0).unwrap();
        assert!(j.submit(&i, 0).is_err());
    }

    #[test]
    fn handover_examples() {
        let mut j = Jurisdiction::new(two_domains(), 5.0, cfg()).unwrap();
        j.register(EntityId(1), 490.0).unwrap();
        let tasks = vec![
            task(1, 98, 20, 25),
            task(1, 100, 24, 29),
            task(1, 102, 26, 31),
        ];
        j.submit(&Intention::new(EntityId(1), tasks.clone(), 0).unwrap(), 0)
            .unwrap();
        let before = {
            let mut t = j.all_tasks();
            t.sort_by_key(|t| t.scan_key());
            t
        };

        let ack = j
            .handover(EntityId(1), ManagerId(1), ManagerId(2), &tasks)
            .unwrap();
        assert_eq!(j.home_of(EntityId(1)), Some(ManagerId(2)));
        // destination already holds its fragment; nothing duplicated or dropped
        assert!(ack.transferred.is_empty());
        let mut after = j.all_tasks();
        after.sort_by_key(|t| t.scan_key());
        assert_eq!(before, after);

        // registration-only handover back
        j.handover(EntityId(1), ManagerId(2), ManagerId(1), &[])
            .unwrap();
        assert_eq!(j.home_of(EntityId(1)), Some(ManagerId(1)));
    }

    #[test]
    fn handover_to_non_neighbor_rejected() {
        let mut j = Jurisdiction::new(Layout::uniform(0.0, 900.0, 3).unwrap(), 5.0, cfg()).unwrap();
        j.register(EntityId(1), 10.0).unwrap();
        assert!(matches!(
            j.handover(EntityId(1), ManagerId(1), ManagerId(3), &[]),
            Err(SpatialError::NotNeighbors { .. })
        ));
        assert!(matches!(
            j.handover(EntityId(1), ManagerId(2), ManagerId(3), &[]),
            Err(SpatialError::NotRegistered { .. })
        ));
    }

    #[test]
    fn handover_moves_misplaced_tasks() {
        let mut j = Jurisdiction::new(two_domains(), 5.0, cfg()).unwrap();
        j.register(EntityId(1), 490.0).unwrap();
        // a task in M2's extent that M1 happens to hold
        let stray = task(1, 105, 40, 45);
        j.managers
            .get_mut(&ManagerId(1))
            .unwrap()
            .schedule_mut()
            .insert(stray)
            .unwrap();
        let ack = j
            .handover(EntityId(1), ManagerId(1), ManagerId(2), &[stray])
            .unwrap();
        assert_eq!(ack.transferred, vec![stray]);
        assert!(j.manager(ManagerId(1)).unwrap().schedule().is_empty());
        assert!(j.manager(ManagerId(2)).unwrap().schedule().contains(&stray));
    }
}
