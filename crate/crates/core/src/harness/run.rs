use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::coordination::{find_conflicting_pair, EntityId, Task};
use crate::spatial::{cells_spanned, ResourceId};
use crate::temporal::Tick;
use crate::traffic::{
    compose_trajectory, Event, EventKind, Origin, Simulation, Strategy, VehicleState, VehicleTag,
};

use super::demand::{generate_demand, MAINLINE_STREAM, RAMP_STREAM};
use super::{HarnessError, ScenarioConfig};

/// How often the full kernel schedule is re-checked for conflicts.
const SCHEDULE_AUDIT_EVERY: Tick = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Keep the per-tick trajectory dump.
    pub record_trajectories: bool,
    /// Check invariants every tick and collect violations.
    pub check_invariants: bool,
    pub kinematic_tol: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            record_trajectories: false,
            check_invariants: false,
            kinematic_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    /// Seconds, averaged over vehicles exiting after the warm-up.
    pub mean_delay: f64,
    /// veh/h crossing the merge point after the warm-up.
    pub throughput: f64,
    pub collisions: usize,
    pub vehicles_completed: usize,
    pub protocol_failures: usize,
    pub vehicles_injected: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleRecord {
    pub tag: VehicleTag,
    pub desired: Tick,
    pub entered: Option<Tick>,
    pub crossed: Option<Tick>,
    pub exited: Option<Tick>,
    pub collided: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: MetricsReport,
    pub events: Vec<Event>,
    /// `trajectories.csv` contents when recording was requested.
    pub trajectories: Option<String>,
    pub vehicles: Vec<VehicleRecord>,
    pub violations: Vec<String>,
    /// Scheduled trajectories that went through the kinematic check.
    pub trajectories_checked: usize,
    /// Share of post-warm-up ticks with a ramp vehicle queued near the ramp end.
    pub ramp_end_queue_share: f64,
}

pub const TRAJECTORY_HEADER: &str = "vehicle_id,origin,tick,position_m,speed_mps,lane";

/// Ticks from entry to exit for an unimpeded vehicle entering at the nominal speed.
pub fn free_flow_ticks(cfg: &ScenarioConfig, origin: Origin) -> Tick {
    let sim = cfg.simulation();
    let v = VehicleState::new(
        EntityId(0),
        origin,
        cfg.geometry.entry_position(origin),
        sim.entry_speed(origin),
        cfg.vehicle_length,
        0,
    );
    compose_trajectory(&v, 0, &cfg.geometry, &cfg.krauss, cfg.dt).end_tick()
}

pub fn min_headway(cfg: &ScenarioConfig, origin: Origin) -> f64 {
    let speed = cfg.simulation().entry_speed(origin).max(1.0);
    (cfg.vehicle_length + cfg.krauss.min_gap) / speed
}

/// Mainline and ramp arrivals merged in time order, mainline first on ties.
pub fn arrivals(cfg: &ScenarioConfig) -> Vec<(Tick, Origin)> {
    let main = generate_demand(
        cfg.demand_main,
        cfg.duration,
        cfg.dt,
        min_headway(cfg, Origin::Mainline),
        cfg.seed,
        MAINLINE_STREAM,
    );
    let ramp = generate_demand(
        cfg.demand_ramp,
        cfg.duration,
        cfg.dt,
        min_headway(cfg, Origin::Ramp),
        cfg.seed,
        RAMP_STREAM,
    );
    let mut all: Vec<(Tick, Origin)> = main
        .into_iter()
        .map(|t| (t, Origin::Mainline))
        .chain(ramp.into_iter().map(|t| (t, Origin::Ramp)))
        .collect();
    all.sort();
    all
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput, HarnessError> {
    run_scenario_with(cfg, &RunOptions::default())
}

pub fn run_scenario_with(
    cfg: &ScenarioConfig,
    opts: &RunOptions,
) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let mut sim = Simulation::new(cfg.simulation(), cfg.seed)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut records: BTreeMap<EntityId, VehicleRecord> = BTreeMap::new();
    for (tick, origin) in arrivals(cfg) {
        // the first tick the simulation produces is 1
        let desired = tick.max(1);
        let id = sim.schedule_arrival(origin, desired);
        records.insert(
            id,
            VehicleRecord {
                tag: VehicleTag { origin, id },
                desired,
                entered: None,
                crossed: None,
                exited: None,
                collided: false,
            },
        );
    }

    let mut csv = opts.record_trajectories.then(|| {
        let mut s = String::with_capacity(1 << 20);
        s.push_str(TRAJECTORY_HEADER);
        s.push('\n');
        s
    });
    let mut checker = opts.check_invariants.then(Checker::default);
    let mut events = Vec::new();
    let mut held_ticks = 0usize;
    for _ in 0..cfg.duration {
        let step = sim.advance_tick();
        let now = sim.tick();
        for e in &step {
            let Some(r) = records.get_mut(&e.vehicle.id) else {
                continue;
            };
            match e.kind {
                EventKind::Entered => r.entered = Some(now),
                EventKind::Crossed => r.crossed = Some(now),
                EventKind::Exited => r.exited = Some(now),
                EventKind::Collision => r.collided = true,
                EventKind::Merged | EventKind::ProtocolFailure => {}
            }
            if e.kind == EventKind::Collision {
                if let Some(other) = e
                    .detail
                    .strip_prefix("with=")
                    .and_then(|d| d.split(' ').next())
                {
                    if let Ok(tag) = other.parse::<VehicleTag>() {
                        if let Some(r) = records.get_mut(&tag.id) {
                            r.collided = true;
                        }
                    }
                }
            }
        }
        if now > cfg.warmup() && sim.queued_in_merge_zone() > 0 {
            held_ticks += 1;
        }
        if let Some(out) = csv.as_mut() {
            append_rows(out, &sim, now);
        }
        if let Some(c) = checker.as_mut() {
            c.check(&sim, cfg, opts.kinematic_tol);
        }
        events.extend(step);
    }

    let vehicles: Vec<VehicleRecord> = records.into_values().collect();
    let metrics = compute_metrics(
        cfg,
        &vehicles,
        &events,
        sim.collisions(),
        sim.protocol_failures(),
    );
    let (violations, checked) = checker.map_or((Vec::new(), 0), |c| {
        (c.violations, c.kinematics_checked.len())
    });
    Ok(RunOutput {
        metrics,
        events,
        trajectories: csv,
        vehicles,
        violations,
        trajectories_checked: checked,
        ramp_end_queue_share: held_ticks as f64 / (cfg.duration - cfg.warmup()) as f64,
    })
}

fn append_rows(out: &mut String, sim: &Simulation, tick: Tick) {
    use std::fmt::Write as _;
    for v in sim.vehicles() {
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{:.6},{}",
            v.tag(),
            v.origin,
            tick,
            v.position,
            v.speed,
            v.lane.0
        );
    }
}

/// Delay in seconds of one exited vehicle.
pub fn vehicle_delay(
    cfg: &ScenarioConfig,
    record: &VehicleRecord,
    free: &BTreeMap<Origin, Tick>,
) -> Option<f64> {
    let exit = record.exited?;
    Some((exit - record.desired - free[&record.tag.origin]) as f64 * cfg.dt)
}

fn compute_metrics(
    cfg: &ScenarioConfig,
    vehicles: &[VehicleRecord],
    events: &[Event],
    collisions: usize,
    protocol_failures: usize,
) -> MetricsReport {
    let warmup = cfg.warmup();
    let free: BTreeMap<Origin, Tick> = [Origin::Mainline, Origin::Ramp]
        .into_iter()
        .map(|o| (o, free_flow_ticks(cfg, o)))
        .collect();
    let delays: Vec<f64> = vehicles
        .iter()
        .filter(|r| r.exited.is_some_and(|t| t >= warmup))
        .filter_map(|r| vehicle_delay(cfg, r, &free))
        .collect();
    let mean_delay = if delays.is_empty() {
        0.0
    } else {
        delays.iter().sum::<f64>() / delays.len() as f64
    };
    let crossings = events
        .iter()
        .filter(|e| e.kind == EventKind::Crossed && e.tick > warmup)
        .count();
    let window_h = (cfg.duration - warmup) as f64 * cfg.dt / 3600.0;
    MetricsReport {
        mean_delay,
        throughput: crossings as f64 / window_h,
        collisions,
        vehicles_completed: vehicles.iter().filter(|r| r.exited.is_some()).count(),
        protocol_failures,
        vehicles_injected: vehicles.iter().filter(|r| r.entered.is_some()).count(),
    }
}

/// veh/h of arrivals whose desired entry falls in the measurement window.
pub fn offered_rate(cfg: &ScenarioConfig, vehicles: &[VehicleRecord]) -> f64 {
    let warmup = cfg.warmup();
    let n = vehicles.iter().filter(|r| r.desired > warmup).count();
    n as f64 / ((cfg.duration - warmup) as f64 * cfg.dt / 3600.0)
}

/// Per-tick invariant checks for instrumented runs.
#[derive(Default)]
struct Checker {
    kinematics_checked: BTreeSet<EntityId>,
    claim_horizon: BTreeMap<EntityId, Tick>,
    violations: Vec<String>,
}

impl Checker {
    fn fail(&mut self, msg: String) {
        // keep reports readable on badly broken runs
        if self.violations.len() < 100 {
            self.violations.push(msg);
        }
    }

    fn check(&mut self, sim: &Simulation, cfg: &ScenarioConfig, tol: f64) {
        let now = sim.tick();
        let Some(coord) = sim.coordinator() else {
            return;
        };
        let lead = cfg.temporal.submission_lead();
        for v in sim.vehicles() {
            if !sim.is_registered(v.id) {
                continue;
            }
            let Some(tr) = coord.trajectory_of(v.id) else {
                self.fail(format!(
                    "tick {now}: {} registered without a schedule",
                    v.tag()
                ));
                continue;
            };
            if self.kinematics_checked.insert(v.id) {
                self.claim_horizon.insert(v.id, tr.start_tick() + lead);
                if let Err(e) = tr.check_kinematics(&cfg.krauss, cfg.dt, tol) {
                    self.fail(format!("kinematics: {e}"));
                }
            }
            match tr.sample_at(now) {
                Some(s) if s.position == v.position && s.speed == v.speed => {}
                _ => self.fail(format!("tick {now}: {} left its schedule", v.tag())),
            }
            if now >= self.claim_horizon[&v.id] {
                let claims = coord.claims_of(v.id);
                for cell in cells_spanned(v.rear(), v.position, cfg.cell_length) {
                    let loc = ResourceId::new(v.lane, cell);
                    let covered = claims.iter().any(|c| {
                        c.location == loc && c.contains(now) && coord.schedule().contains(c)
                    });
                    if !covered {
                        self.fail(format!("tick {now}: {} occupies unclaimed {loc}", v.tag()));
                    }
                }
            }
        }
        if !coord
            .merge_list()
            .is_separated(cfg.additional_space, cfg.dt)
        {
            self.fail(format!("tick {now}: merge list headways violated"));
        }
        if now % SCHEDULE_AUDIT_EVERY == 0 {
            let tasks: Vec<Task> = coord.schedule().tasks().copied().collect();
            if let Some((a, b)) = find_conflicting_pair(&tasks) {
                self.fail(format!(
                    "tick {now}: schedule holds conflicting {a} and {b}"
                ));
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityPoint {
    /// Nominal combined demand, veh/h.
    pub demand: f64,
    /// Arrival rate the seeded demand streams actually produced in the measurement window.
    pub offered: f64,
    pub throughput: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityReport {
    pub strategy: Strategy,
    pub points: Vec<CapacityPoint>,
    /// Highest stable demand on the grid.
    pub capacity: Option<f64>,
}

/// Share of demand that must come through for a level to count as stable.
pub const STABILITY_FRACTION: f64 = 0.95;

/// Runs every combined demand level (split as in `cfg`) and reports the
/// highest one whose merge-point throughput reaches 95% of the offered demand.
///
/// Offered demand is the realized arrival rate over the measurement window, so
/// sampling noise in the arrival process does not count as instability.
pub fn measure_capacity(
    cfg: &ScenarioConfig,
    rate_grid: &[f64],
) -> Result<CapacityReport, HarnessError> {
    if rate_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(HarnessError::Config("rate grid must be ascending".into()));
    }
    let points: Vec<CapacityPoint> = rate_grid
        .par_iter()
        .map(|&demand| {
            let level = cfg.with_total_demand(demand);
            let out = run_scenario(&level)?;
            let offered = offered_rate(&level, &out.vehicles);
            Ok(CapacityPoint {
                demand,
                offered,
                throughput: out.metrics.throughput,
                stable: out.metrics.throughput >= STABILITY_FRACTION * offered,
            })
        })
        .collect::<Result<_, HarnessError>>()?;
    let capacity = points.iter().rev().find(|p| p.stable).map(|p| p.demand);
    Ok(CapacityReport {
        strategy: cfg.strategy,
        points,
        capacity,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonResult {
    pub baseline: MetricsReport,
    pub preemptive: MetricsReport,
    /// `1 - preemptive / baseline` mean delay; `None` when the baseline has no delay.
    pub delay_reduction: Option<f64>,
    /// Preemptive over baseline throughput; `None` when the baseline has none.
    pub capacity_ratio: Option<f64>,
}

impl ComparisonResult {
    pub fn from_reports(baseline: MetricsReport, preemptive: MetricsReport) -> Self {
        let delay_reduction =
            (baseline.mean_delay > 0.0).then(|| 1.0 - preemptive.mean_delay / baseline.mean_delay);
        let capacity_ratio =
            (baseline.throughput > 0.0).then(|| preemptive.throughput / baseline.throughput);
        Self {
            baseline,
            preemptive,
            delay_reduction,
            capacity_ratio,
        }
    }
}

/// Runs `cfg` under both strategies, in parallel.
pub fn compare(
    cfg: &ScenarioConfig,
    opts: &RunOptions,
) -> Result<(ComparisonResult, RunOutput, RunOutput), HarnessError> {
    let (b, p) = rayon::join(
        || run_scenario_with(&cfg.with_strategy(Strategy::Baseline), opts),
        || run_scenario_with(&cfg.with_strategy(Strategy::Preemptive), opts),
    );
    let (b, p) = (b?, p?);
    Ok((ComparisonResult::from_reports(b.metrics, p.metrics), b, p))
}
