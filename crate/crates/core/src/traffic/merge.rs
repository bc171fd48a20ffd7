use std::collections::BTreeMap;

use thiserror::Error;

use crate::coordination::{
    entity_submit, ApprovedSchedule, CoordinationError, EntityId, Manager, ManagerId, Rejection,
    Task,
};
use crate::spatial::occupancy_claims;
use crate::temporal::{TemporalConfig, Tick};

use super::{
    compose_trajectory, stretch_to_crossing, KraussParams, Origin, RoadGeometry, Trajectory,
    VehicleState, MIN_HEADWAY_SPEED,
};

/// Latest crossing, relative to the desired one, that `merge_into` will try.
pub const MAX_MERGE_DELAY: Tick = 3000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanFailure {
    #[error("{vehicle}: no approach profile reaches an admissible merge slot")]
    Infeasible { vehicle: EntityId },
    #[error("{vehicle}: claims could not be shared: {source}")]
    Submission {
        vehicle: EntityId,
        source: CoordinationError,
    },
    #[error("{vehicle}: manager rejected the claims: {source}")]
    Rejected {
        vehicle: EntityId,
        source: Rejection,
    },
    #[error("{vehicle}: manager shifted the claims, schedule no longer matches")]
    Altered { vehicle: EntityId },
}

/// One scheduled merge-point crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeEntry {
    pub vehicle: EntityId,
    pub crossing_tick: Tick,
    pub crossing_speed: f64,
    pub length: f64,
}

impl MergeEntry {
    pub fn from_trajectory(tr: &Trajectory, merge_point: f64) -> Option<Self> {
        tr.crossing(merge_point).map(|s| Self {
            vehicle: tr.vehicle(),
            crossing_tick: s.tick,
            crossing_speed: s.speed,
            length: tr.length(),
        })
    }
}

/// Ticks a follower must wait after `leader` crosses: the leader's length plus
/// `additional_space`, covered at the leader's crossing speed.
pub fn headway_ticks(leader: &MergeEntry, additional_space: f64, dt: f64) -> Tick {
    let speed = leader.crossing_speed.max(MIN_HEADWAY_SPEED);
    let ticks = (leader.length + additional_space) / (speed * dt);
    // absorb representation error so exact multiples do not round up
    (ticks - 1e-9).ceil().max(1.0) as Tick
}

/// Scheduled crossings ordered by tick, ties by vehicle.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MergeList {
    entries: Vec<MergeEntry>,
}

impl MergeList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[MergeEntry] {
        &self.entries
    }

    /// Last entry crossing at or before `tick`.
    pub fn predecessor(&self, tick: Tick) -> Option<&MergeEntry> {
        let i = self.entries.partition_point(|e| e.crossing_tick <= tick);
        i.checked_sub(1).map(|i| &self.entries[i])
    }

    /// First entry crossing after `tick`.
    pub fn successor(&self, tick: Tick) -> Option<&MergeEntry> {
        let i = self.entries.partition_point(|e| e.crossing_tick <= tick);
        self.entries.get(i)
    }

    /// Whether `candidate` keeps the headway to both neighbours.
    pub fn admits(&self, candidate: &MergeEntry, additional_space: f64, dt: f64) -> bool {
        let t = candidate.crossing_tick;
        if let Some(p) = self.predecessor(t) {
            if t - p.crossing_tick < headway_ticks(p, additional_space, dt) {
                return false;
            }
        }
        if let Some(s) = self.successor(t) {
            if s.crossing_tick - t < headway_ticks(candidate, additional_space, dt) {
                return false;
            }
        }
        true
    }

    pub fn insert(&mut self, entry: MergeEntry) {
        let key = (entry.crossing_tick, entry.vehicle);
        let i = self
            .entries
            .partition_point(|e| (e.crossing_tick, e.vehicle) < key);
        self.entries.insert(i, entry);
    }

    pub fn remove(&mut self, vehicle: EntityId) -> Option<MergeEntry> {
        let i = self.entries.iter().position(|e| e.vehicle == vehicle)?;
        Some(self.entries.remove(i))
    }

    /// Sorted, and every consecutive pair keeps the leader's headway.
    pub fn is_separated(&self, additional_space: f64, dt: f64) -> bool {
        self.entries.windows(2).all(|w| {
            (w[0].crossing_tick, w[0].vehicle) < (w[1].crossing_tick, w[1].vehicle)
                && w[1].crossing_tick - w[0].crossing_tick
                    >= headway_ticks(&w[0], additional_space, dt)
        })
    }
}

/// Finds the earliest crossing at or after the desired one that keeps the
/// merge-list headways and passes `clearance`, stretches the approach to hit
/// it, and records it in `merge_list`.
#[allow(clippy::too_many_arguments)]
pub fn merge_into<F>(
    vehicle: &VehicleState,
    now: Tick,
    desired: &Trajectory,
    merge_list: &mut MergeList,
    additional_space: f64,
    geometry: &RoadGeometry,
    params: &KraussParams,
    dt: f64,
    mut clearance: F,
) -> Result<Trajectory, PlanFailure>
where
    F: FnMut(&Trajectory) -> bool,
{
    let infeasible = PlanFailure::Infeasible {
        vehicle: vehicle.id,
    };
    let wanted = desired
        .crossing(geometry.merge_point)
        .ok_or(infeasible.clone())?
        .tick;
    let mut target = wanted;
    while target <= wanted + MAX_MERGE_DELAY {
        if let Some(p) = merge_list.predecessor(target) {
            let earliest = p.crossing_tick + headway_ticks(p, additional_space, dt);
            if target < earliest {
                target = earliest;
                continue;
            }
        }
        let tr = if target == wanted {
            desired.clone()
        } else {
            stretch_to_crossing(vehicle, now, target, geometry, params, dt)
                .ok_or(infeasible.clone())?
        };
        let entry =
            MergeEntry::from_trajectory(&tr, geometry.merge_point).ok_or(infeasible.clone())?;
        if merge_list.admits(&entry, additional_space, dt) && clearance(&tr) {
            merge_list.insert(entry);
            return Ok(tr);
        }
        // coarser steps once the delay is already large
        target = target.max(entry.crossing_tick) + 1 + (target - wanted) / 50;
    }
    Err(infeasible)
}

/// No same-lane overlap with any scheduled trajectory at any shared tick.
pub fn physically_clear(
    tr: &Trajectory,
    scheduled: &BTreeMap<EntityId, Trajectory>,
    geometry: &RoadGeometry,
) -> bool {
    scheduled
        .values()
        .filter(|o| o.vehicle() != tr.vehicle())
        .all(|other| {
            let lo = tr.start_tick().max(other.start_tick());
            let hi = tr.end_tick().min(other.end_tick());
            (lo..=hi).all(|t| {
                let (Some(a), Some(b)) = (
                    tr.footprint_at(t, geometry),
                    other.footprint_at(t, geometry),
                ) else {
                    return true;
                };
                a.lane != b.lane || a.front <= b.rear || b.front <= a.rear
            })
        })
}

/// The manager-side traffic state: the kernel schedule plus the merge list and
/// every approved trajectory.
#[derive(Debug, Clone)]
pub struct MergeCoordinator {
    geometry: RoadGeometry,
    params: KraussParams,
    dt: f64,
    cell_length: f64,
    additional_space: f64,
    manager: Manager,
    merge_list: MergeList,
    m_list: Vec<EntityId>,
    r_list: Vec<EntityId>,
    scheduled: BTreeMap<EntityId, Trajectory>,
    claims: BTreeMap<EntityId, Vec<Task>>,
}

impl MergeCoordinator {
    pub fn new(
        geometry: RoadGeometry,
        params: KraussParams,
        temporal: TemporalConfig,
        dt: f64,
        cell_length: f64,
        additional_space: f64,
    ) -> Self {
        Self {
            geometry,
            params,
            dt,
            cell_length,
            additional_space,
            manager: Manager::new(ManagerId(1), temporal),
            merge_list: MergeList::new(),
            m_list: Vec::new(),
            r_list: Vec::new(),
            scheduled: BTreeMap::new(),
            claims: BTreeMap::new(),
        }
    }

    pub fn manager(&self) -> &Manager {
        &self.manager
    }

    pub fn merge_list(&self) -> &MergeList {
        &self.merge_list
    }

    pub fn scheduled(&self) -> &BTreeMap<EntityId, Trajectory> {
        &self.scheduled
    }

    pub fn trajectory_of(&self, vehicle: EntityId) -> Option<&Trajectory> {
        self.scheduled.get(&vehicle)
    }

    pub fn claims_of(&self, vehicle: EntityId) -> &[Task] {
        self.claims.get(&vehicle).map_or(&[], Vec::as_slice)
    }

    pub fn registered(&self, origin: Origin) -> &[EntityId] {
        match origin {
            Origin::Mainline => &self.m_list,
            Origin::Ramp => &self.r_list,
        }
    }

    /// First tick a claim made at `now` may cover.
    pub fn claim_horizon(&self, now: Tick) -> Tick {
        now + self.manager.config().submission_lead()
    }

    /// Plans a newly detected vehicle, shares the resulting cell claims with
    /// the manager, and on success stores the schedule. Any failure leaves the
    /// state as it was.
    pub fn check_new_vehicle(
        &mut self,
        vehicle: &VehicleState,
        now: Tick,
    ) -> Result<&Trajectory, PlanFailure> {
        let id = vehicle.id;
        let desired = compose_trajectory(vehicle, now, &self.geometry, &self.params, self.dt);
        match vehicle.origin {
            Origin::Mainline => self.m_list.push(id),
            Origin::Ramp => self.r_list.push(id),
        }
        let horizon = self.claim_horizon(now);
        let planned = self.plan(vehicle, now, desired, horizon);
        let result = planned.and_then(|tr| {
            let claims = self.claims_for(&tr, horizon);
            self.commit(id, &claims, now)?;
            Ok((tr, claims))
        });
        match result {
            Ok((tr, claims)) => {
                self.claims.insert(id, claims);
                Ok(self.scheduled.entry(id).or_insert(tr))
            }
            Err(e) => {
                self.merge_list.remove(id);
                self.m_list.retain(|v| *v != id);
                self.r_list.retain(|v| *v != id);
                self.manager.deregister(id);
                Err(e)
            }
        }
    }

    fn plan(
        &mut self,
        vehicle: &VehicleState,
        now: Tick,
        desired: Trajectory,
        horizon: Tick,
    ) -> Result<Trajectory, PlanFailure> {
        let Self {
            geometry,
            params,
            dt,
            cell_length,
            additional_space,
            manager,
            merge_list,
            scheduled,
            ..
        } = self;
        let clearance = |tr: &Trajectory| {
            physically_clear(tr, scheduled, geometry)
                && claims_within(tr, horizon, *cell_length, geometry)
                    .iter()
                    .all(|c| manager.schedule().first_conflict(c).is_none())
        };
        if merge_list.is_empty() {
            let entry = MergeEntry::from_trajectory(&desired, geometry.merge_point).ok_or(
                PlanFailure::Infeasible {
                    vehicle: vehicle.id,
                },
            )?;
            if !clearance(&desired) {
                return Err(PlanFailure::Infeasible {
                    vehicle: vehicle.id,
                });
            }
            merge_list.insert(entry);
            Ok(desired)
        } else {
            merge_into(
                vehicle,
                now,
                &desired,
                merge_list,
                *additional_space,
                geometry,
                params,
                *dt,
                clearance,
            )
        }
    }

    fn claims_for(&self, tr: &Trajectory, horizon: Tick) -> Vec<Task> {
        claims_within(tr, horizon, self.cell_length, &self.geometry)
    }

    fn commit(&mut self, id: EntityId, claims: &[Task], now: Tick) -> Result<(), PlanFailure> {
        if claims.is_empty() {
            return Ok(());
        }
        self.manager.register(id);
        let intention =
            entity_submit(id, claims.to_vec(), now, self.manager.config()).map_err(|source| {
                PlanFailure::Submission {
                    vehicle: id,
                    source,
                }
            })?;
        let approval = self
            .manager
            .try_approve(&intention, now)
            .map_err(|source| PlanFailure::Rejected {
                vehicle: id,
                source,
            })?;
        if approval.outcome.was_altered() {
            self.manager.retract(approval.outcome.altered.tasks());
            return Err(PlanFailure::Altered { vehicle: id });
        }
        Ok(())
    }

    /// Drops everything held for a vehicle that left the road.
    pub fn remove_vehicle(&mut self, vehicle: EntityId) {
        self.merge_list.remove(vehicle);
        self.m_list.retain(|v| *v != vehicle);
        self.r_list.retain(|v| *v != vehicle);
        self.scheduled.remove(&vehicle);
        self.claims.remove(&vehicle);
        self.manager.withdraw(vehicle);
        self.manager.deregister(vehicle);
    }

    /// Forgets claims that ended before `tick`.
    pub fn prune_before(&mut self, tick: Tick) {
        self.manager.prune_before(tick);
    }

    pub fn schedule(&self) -> &ApprovedSchedule {
        self.manager.schedule()
    }
}

/// Cell claims for the part of a trajectory at or after `horizon`.
pub fn claims_within(
    tr: &Trajectory,
    horizon: Tick,
    cell_length: f64,
    geometry: &RoadGeometry,
) -> Vec<Task> {
    occupancy_claims(
        tr.vehicle(),
        tr.footprints(geometry).filter(|f| f.tick >= horizon),
        cell_length,
    )
}
