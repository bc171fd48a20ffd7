use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coordination::EntityId;
use crate::spatial::{LaneId, DEFAULT_CELL_LENGTH};
use crate::temporal::{TemporalConfig, Tick};

use super::{
    baseline_merge_decision, krauss_step, safe_speed, GapAcceptance, KraussParams,
    MergeCoordinator, MergeDecision, Obstacle, Origin, RoadGeometry, TrafficError, VehicleState,
    VehicleTag, MAIN_LANE, RAMP_LANE,
};

/// Below this a ramp vehicle in the merge zone counts as queued.
pub const QUEUE_SPEED: f64 = 5.0;

/// Ticks a ramp vehicle refused a merge slot waits at the entry before asking again.
pub const ENTRY_RETRY_TICKS: Tick = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Baseline,
    Preemptive,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Baseline => "baseline",
            Strategy::Preemptive => "preemptive",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Strategy::Baseline),
            "preemptive" => Ok(Strategy::Preemptive),
            other => Err(format!(
                "unknown strategy `{other}` (expected baseline or preemptive)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub geometry: RoadGeometry,
    pub krauss: KraussParams,
    pub gap: GapAcceptance,
    pub temporal: TemporalConfig,
    /// Seconds per tick.
    pub dt: f64,
    pub cell_length: f64,
    pub additional_space: f64,
    pub vehicle_length: f64,
    pub main_entry_speed: f64,
    pub ramp_entry_speed: f64,
    pub strategy: Strategy,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let krauss = KraussParams::default();
        Self {
            geometry: RoadGeometry::default(),
            krauss,
            gap: GapAcceptance::default(),
            temporal: TemporalConfig::default(),
            dt: 0.1,
            cell_length: DEFAULT_CELL_LENGTH,
            additional_space: 2.5,
            vehicle_length: 5.0,
            main_entry_speed: krauss.v_max,
            ramp_entry_speed: 20.0,
            strategy: Strategy::Preemptive,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), TrafficError> {
        self.geometry.validate()?;
        self.krauss.validate()?;
        let positive = [
            ("dt", self.dt),
            ("cell_length", self.cell_length),
            ("vehicle_length", self.vehicle_length),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(TrafficError::Params(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        let non_negative = [
            ("additional_space", self.additional_space),
            ("gap_lead_min", self.gap.lead_min),
            ("gap_lag_min", self.gap.lag_min),
            ("merge_zone", self.gap.merge_zone),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(TrafficError::Params(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("main_entry_speed", self.main_entry_speed),
            ("ramp_entry_speed", self.ramp_entry_speed),
        ] {
            if !(v.is_finite() && v >= 0.0 && v <= self.krauss.v_max) {
                return Err(TrafficError::Params(format!(
                    "{name} must lie in [0, v_max], got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn entry_speed(&self, origin: Origin) -> f64 {
        match origin {
            Origin::Mainline => self.main_entry_speed,
            Origin::Ramp => self.ramp_entry_speed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    Entered,
    Merged,
    /// Front passed the merge point.
    Crossed,
    Exited,
    Collision,
    ProtocolFailure,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Entered => "entered",
            EventKind::Merged => "merged",
            EventKind::Crossed => "crossed",
            EventKind::Exited => "exited",
            EventKind::Collision => "collision",
            EventKind::ProtocolFailure => "protocol_failure",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub tick: Tick,
    pub kind: EventKind,
    pub vehicle: VehicleTag,
    pub detail: String,
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    id: EntityId,
    origin: Origin,
    desired: Tick,
}

/// The road and everything on it, advanced one tick at a time.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: SimulationConfig,
    tick: Tick,
    vehicles: BTreeMap<EntityId, VehicleState>,
    queues: [VecDeque<Pending>; 2],
    coordinator: Option<MergeCoordinator>,
    registered: BTreeSet<EntityId>,
    fallen_back: BTreeSet<EntityId>,
    rng: ChaCha8Rng,
    next_id: u64,
    collisions: usize,
    protocol_failures: usize,
    ramp_retry_at: Tick,
}

fn queue_index(origin: Origin) -> usize {
    match origin {
        Origin::Mainline => 0,
        Origin::Ramp => 1,
    }
}

impl Simulation {
    pub fn new(cfg: SimulationConfig, seed: u64) -> Result<Self, TrafficError> {
        cfg.validate()?;
        let coordinator = (cfg.strategy == Strategy::Preemptive).then(|| {
            MergeCoordinator::new(
                cfg.geometry,
                cfg.krauss,
                cfg.temporal,
                cfg.dt,
                cfg.cell_length,
                cfg.additional_space,
            )
        });
        Ok(Self {
            cfg,
            tick: 0,
            vehicles: BTreeMap::new(),
            queues: [VecDeque::new(), VecDeque::new()],
            coordinator,
            registered: BTreeSet::new(),
            fallen_back: BTreeSet::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_id: 1,
            collisions: 0,
            protocol_failures: 0,
            ramp_retry_at: 0,
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.cfg
    }

    pub fn tick(&self) -> Tick {
        self.tick
    }

    pub fn vehicles(&self) -> impl Iterator<Item = &VehicleState> + '_ {
        self.vehicles.values()
    }

    pub fn vehicle(&self, id: EntityId) -> Option<&VehicleState> {
        self.vehicles.get(&id)
    }

    pub fn coordinator(&self) -> Option<&MergeCoordinator> {
        self.coordinator.as_ref()
    }

    pub fn is_registered(&self, id: EntityId) -> bool {
        self.registered.contains(&id)
    }

    pub fn queued(&self, origin: Origin) -> usize {
        self.queues[queue_index(origin)].len()
    }

    pub fn collisions(&self) -> usize {
        self.collisions
    }

    pub fn protocol_failures(&self) -> usize {
        self.protocol_failures
    }

    /// Queues a vehicle to enter at `desired` or as soon after as there is room.
    /// Arrivals per origin must be queued in non-decreasing `desired` order.
    pub fn schedule_arrival(&mut self, origin: Origin, desired: Tick) -> EntityId {
        let id = EntityId(self.next_id);
        self.next_id += 1;
        self.queues[queue_index(origin)].push_back(Pending {
            id,
            origin,
            desired,
        });
        id
    }

    /// Places a vehicle directly, bypassing the entry queue. Under the
    /// preemptive strategy it registers once past the detection boundary.
    pub fn place(&mut self, state: VehicleState) {
        self.next_id = self.next_id.max(state.id.0 + 1);
        self.vehicles.insert(state.id, state);
    }

    pub fn advance_tick(&mut self) -> Vec<Event> {
        let next = self.tick + 1;
        let mut events = Vec::new();
        let before: BTreeMap<EntityId, f64> = self
            .vehicles
            .iter()
            .map(|(id, v)| (*id, v.position))
            .collect();
        self.move_vehicles(next);
        self.change_lanes(next, &mut events);
        self.register_detected(next, &mut events);
        self.inject(next, &mut events);
        self.detect_collisions(next, &mut events);
        self.crossings_and_exits(next, &before, &mut events);
        if let Some(c) = self.coordinator.as_mut() {
            c.prune_before(next);
        }
        self.tick = next;
        events
    }

    fn lane_index(&self) -> BTreeMap<LaneId, Vec<(f64, EntityId)>> {
        let mut lanes: BTreeMap<LaneId, Vec<(f64, EntityId)>> = BTreeMap::new();
        for v in self.vehicles.values() {
            lanes.entry(v.lane).or_default().push((v.position, v.id));
        }
        for list in lanes.values_mut() {
            list.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        lanes
    }

    /// Nearest vehicle on `lane` whose front is strictly ahead of `x`.
    fn leader_on(
        &self,
        lanes: &BTreeMap<LaneId, Vec<(f64, EntityId)>>,
        lane: LaneId,
        x: f64,
    ) -> Option<&VehicleState> {
        let list = lanes.get(&lane)?;
        let i = list.partition_point(|(p, _)| *p <= x);
        list.get(i).map(|(_, id)| &self.vehicles[id])
    }

    fn obstacle_for(
        &self,
        lanes: &BTreeMap<LaneId, Vec<(f64, EntityId)>>,
        v: &VehicleState,
    ) -> Option<Obstacle> {
        let lead = self
            .leader_on(lanes, v.lane, v.position)
            .map(Obstacle::from);
        if v.lane == RAMP_LANE && self.cfg.strategy == Strategy::Baseline {
            let wall = Obstacle::wall(self.cfg.geometry.merge_point);
            return Some(match lead {
                Some(l) if l.rear < wall.rear => l,
                _ => wall,
            });
        }
        lead
    }

    fn move_vehicles(&mut self, next: Tick) {
        let lanes = self.lane_index();
        let p = self.cfg.krauss;
        let dt = self.cfg.dt;
        let mut updated = Vec::with_capacity(self.vehicles.len());
        for v in self.vehicles.values() {
            let planned = self
                .registered
                .contains(&v.id)
                .then(|| {
                    self.coordinator
                        .as_ref()
                        .and_then(|c| c.trajectory_of(v.id))
                })
                .flatten()
                .and_then(|tr| tr.sample_at(next));
            let (x, speed) = match planned {
                Some(s) => (s.position, s.speed),
                None => {
                    let noise: f64 = self.rng.random();
                    let leader = self.obstacle_for(&lanes, v);
                    let speed = krauss_step(v, leader, &p, dt, noise)
                        .max(v.speed - p.b_decel * dt)
                        .max(0.0);
                    (v.position + 0.5 * (v.speed + speed) * dt, speed)
                }
            };
            updated.push(VehicleState {
                position: x,
                acceleration: (speed - v.speed) / dt,
                speed,
                ..*v
            });
        }
        for v in updated {
            self.vehicles.insert(v.id, v);
        }
    }

    fn change_lanes(&mut self, next: Tick, events: &mut Vec<Event>) {
        let g = self.cfg.geometry;
        let mut on_ramp: Vec<VehicleState> = self
            .vehicles
            .values()
            .filter(|v| v.lane == RAMP_LANE)
            .copied()
            .collect();
        // front-most first so followers see merges ahead of them
        on_ramp.sort_by(|a, b| b.position.total_cmp(&a.position).then(a.id.cmp(&b.id)));
        for v in on_ramp {
            let registered = self.registered.contains(&v.id);
            let how = if v.position >= g.merge_point {
                if registered {
                    "scheduled"
                } else {
                    "overran"
                }
            } else if registered {
                continue;
            } else {
                let (lead_gap, lag_gap) = self.mainline_gaps(&v);
                match baseline_merge_decision(
                    &v,
                    lead_gap,
                    lag_gap,
                    &self.cfg.gap,
                    &g,
                    &self.cfg.krauss,
                ) {
                    MergeDecision::Accept => "accepted",
                    MergeDecision::Forced => "forced",
                    MergeDecision::Wait => continue,
                }
            };
            self.vehicles.get_mut(&v.id).expect("present").lane = MAIN_LANE;
            events.push(Event {
                tick: next,
                kind: EventKind::Merged,
                vehicle: v.tag(),
                detail: format!("{how} at={:.6}", v.position),
            });
        }
    }

    fn mainline_gaps(&self, v: &VehicleState) -> (f64, f64) {
        let mut lead = f64::INFINITY;
        let mut lag = f64::INFINITY;
        for other in self.vehicles.values().filter(|o| o.lane == MAIN_LANE) {
            if other.position > v.position {
                lead = lead.min(other.rear() - v.position);
            } else {
                lag = lag.min(v.rear() - other.position);
            }
        }
        (lead, lag)
    }

    fn register_detected(&mut self, next: Tick, events: &mut Vec<Event>) {
        let Some(coord) = self.coordinator.as_mut() else {
            return;
        };
        let boundary = self.cfg.geometry.detection_boundary;
        let candidates: Vec<VehicleState> = self
            .vehicles
            .values()
            .filter(|v| {
                v.position >= boundary
                    && !self.registered.contains(&v.id)
                    && !self.fallen_back.contains(&v.id)
            })
            .copied()
            .collect();
        for v in candidates {
            match coord.check_new_vehicle(&v, next) {
                Ok(_) => {
                    self.registered.insert(v.id);
                }
                Err(e) => {
                    self.fallen_back.insert(v.id);
                    self.protocol_failures += 1;
                    events.push(Event {
                        tick: next,
                        kind: EventKind::ProtocolFailure,
                        vehicle: v.tag(),
                        detail: e.to_string(),
                    });
                }
            }
        }
    }

    fn inject(&mut self, next: Tick, events: &mut Vec<Event>) {
        for origin in [Origin::Mainline, Origin::Ramp] {
            while let Some(&pending) = self.queues[queue_index(origin)].front() {
                if pending.desired > next || !self.try_enter(pending, next, events) {
                    break;
                }
                self.queues[queue_index(origin)].pop_front();
            }
        }
    }

    fn try_enter(&mut self, pending: Pending, next: Tick, events: &mut Vec<Event>) -> bool {
        let g = self.cfg.geometry;
        let p = self.cfg.krauss;
        let x = g.entry_position(pending.origin);
        let mut state = VehicleState::new(
            pending.id,
            pending.origin,
            x,
            0.0,
            self.cfg.vehicle_length,
            next,
        );
        let lanes = self.lane_index();
        let v_entry = self.cfg.entry_speed(pending.origin);
        // leader: anything on the entry lane with its front at or beyond the entry point
        let leader = lanes.get(&state.lane).and_then(|list| {
            let i = list.partition_point(|(pos, _)| *pos < x);
            list.get(i)
                .map(|(_, id)| Obstacle::from(&self.vehicles[id]))
        });
        let leader = match (leader, self.cfg.strategy, state.lane) {
            (None, Strategy::Baseline, RAMP_LANE) => Some(Obstacle::wall(g.merge_point)),
            (l, _, _) => l,
        };
        let mut speed = v_entry;
        if let Some(l) = leader {
            let gap = l.rear - x - p.min_gap;
            if gap < 0.0 {
                return false;
            }
            speed = speed.min(safe_speed(gap, v_entry, l.speed, &p)).max(0.0);
        }
        state.speed = speed;
        if state.origin == Origin::Ramp {
            if let Some(coord) = self.coordinator.as_mut() {
                if next < self.ramp_retry_at {
                    return false;
                }
                // no slot yet: wait at the entry and ask again later
                if coord.check_new_vehicle(&state, next).is_err() {
                    self.ramp_retry_at = next + ENTRY_RETRY_TICKS;
                    return false;
                }
                self.registered.insert(state.id);
            }
        }
        self.vehicles.insert(state.id, state);
        events.push(Event {
            tick: next,
            kind: EventKind::Entered,
            vehicle: state.tag(),
            detail: format!("desired={} speed={:.6}", pending.desired, speed),
        });
        true
    }

    fn detect_collisions(&mut self, next: Tick, events: &mut Vec<Event>) {
        let lanes = self.lane_index();
        let mut removed = BTreeSet::new();
        for list in lanes.values() {
            for w in list.windows(2) {
                let follower = &self.vehicles[&w[0].1];
                let leader = &self.vehicles[&w[1].1];
                if follower.position > leader.rear() {
                    self.collisions += 1;
                    events.push(Event {
                        tick: next,
                        kind: EventKind::Collision,
                        vehicle: follower.tag(),
                        detail: format!(
                            "with={} lane={} overlap={:.6}",
                            leader.tag(),
                            follower.lane.0,
                            follower.position - leader.rear()
                        ),
                    });
                    removed.insert(follower.id);
                    removed.insert(leader.id);
                }
            }
        }
        for id in removed {
            self.remove(id);
        }
    }

    fn crossings_and_exits(
        &mut self,
        next: Tick,
        before: &BTreeMap<EntityId, f64>,
        events: &mut Vec<Event>,
    ) {
        let g = self.cfg.geometry;
        let mut exited = Vec::new();
        for v in self.vehicles.values() {
            if let Some(&x0) = before.get(&v.id) {
                if x0 < g.merge_point && v.position >= g.merge_point {
                    events.push(Event {
                        tick: next,
                        kind: EventKind::Crossed,
                        vehicle: v.tag(),
                        detail: format!("speed={:.6}", v.speed),
                    });
                }
            }
            if v.position >= g.mainline_length {
                events.push(Event {
                    tick: next,
                    kind: EventKind::Exited,
                    vehicle: v.tag(),
                    detail: format!("entered_at={}", v.entered_at),
                });
                exited.push(v.id);
            }
        }
        for id in exited {
            self.remove(id);
        }
    }

    fn remove(&mut self, id: EntityId) {
        self.vehicles.remove(&id);
        self.registered.remove(&id);
        self.fallen_back.remove(&id);
        if let Some(c) = self.coordinator.as_mut() {
            c.remove_vehicle(id);
        }
    }

    /// Ramp vehicles in the merge zone crawling below the queue speed.
    pub fn queued_in_merge_zone(&self) -> usize {
        let zone_start = self.cfg.geometry.merge_point - self.cfg.gap.merge_zone;
        self.vehicles
            .values()
            .filter(|v| v.lane == RAMP_LANE && v.position >= zone_start && v.speed < QUEUE_SPEED)
            .count()
    }
}
