use crate::coordination::EntityId;
use crate::spatial::Footprint;
use crate::temporal::Tick;

use super::{KraussParams, Origin, RoadGeometry, VehicleState};

/// Hard cap on generated samples; a profile that has not exited by then is
/// returned incomplete.
const MAX_PROFILE_TICKS: usize = 200_000;

const BISECTION_STEPS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub tick: Tick,
    pub position: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    vehicle: EntityId,
    origin: Origin,
    length: f64,
    samples: Vec<Sample>,
    complete: bool,
}

impl Trajectory {
    /// Samples must be non-empty and on consecutive ticks.
    pub fn new(
        vehicle: EntityId,
        origin: Origin,
        length: f64,
        samples: Vec<Sample>,
        complete: bool,
    ) -> Self {
        assert!(!samples.is_empty(), "trajectory needs at least one sample");
        debug_assert!(samples.windows(2).all(|w| w[1].tick == w[0].tick + 1));
        Self {
            vehicle,
            origin,
            length,
            samples,
            complete,
        }
    }

    pub fn vehicle(&self) -> EntityId {
        self.vehicle
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Whether the last sample is at or beyond the scenario exit.
    pub fn complete(&self) -> bool {
        self.complete
    }

    pub fn start_tick(&self) -> Tick {
        self.samples[0].tick
    }

    pub fn end_tick(&self) -> Tick {
        self.samples[self.samples.len() - 1].tick
    }

    pub fn sample_at(&self, tick: Tick) -> Option<&Sample> {
        let i = tick - self.start_tick();
        if i < 0 {
            return None;
        }
        self.samples.get(i as usize)
    }

    /// First sample whose front is at or past `x`.
    pub fn crossing(&self, x: f64) -> Option<&Sample> {
        let i = self.samples.partition_point(|s| s.position < x);
        self.samples.get(i)
    }

    pub fn footprint_at(&self, tick: Tick, geometry: &RoadGeometry) -> Option<Footprint> {
        self.sample_at(tick).map(|s| self.footprint_of(s, geometry))
    }

    pub fn footprints<'a>(
        &'a self,
        geometry: &'a RoadGeometry,
    ) -> impl Iterator<Item = Footprint> + 'a {
        self.samples
            .iter()
            .map(move |s| self.footprint_of(s, geometry))
    }

    fn footprint_of(&self, s: &Sample, geometry: &RoadGeometry) -> Footprint {
        Footprint {
            tick: s.tick,
            lane: geometry.lane_at(self.origin, s.position),
            rear: s.position - self.length,
            front: s.position,
        }
    }

    /// Same motion, `delta` ticks later.
    pub fn shifted(&self, delta: Tick) -> Self {
        let samples = self
            .samples
            .iter()
            .map(|s| Sample {
                tick: s.tick + delta,
                ..*s
            })
            .collect();
        Self {
            samples,
            ..self.clone()
        }
    }

    /// Checks tick order, monotone position, speed bounds, acceleration
    /// bounds, and trapezoidal consistency `|dx - mean speed * dt| <= tol`.
    pub fn check_kinematics(&self, params: &KraussParams, dt: f64, tol: f64) -> Result<(), String> {
        for s in &self.samples {
            if !(s.speed >= -tol && s.speed <= params.v_max + tol) {
                return Err(format!(
                    "{}: speed {} out of [0, {}] at tick {}",
                    self.vehicle, s.speed, params.v_max, s.tick
                ));
            }
        }
        for w in self.samples.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b.tick <= a.tick {
                return Err(format!(
                    "{}: ticks not increasing at {}",
                    self.vehicle, b.tick
                ));
            }
            if b.position < a.position {
                return Err(format!(
                    "{}: moved backwards at tick {}",
                    self.vehicle, b.tick
                ));
            }
            let span = (b.tick - a.tick) as f64 * dt;
            let dx = b.position - a.position;
            let expected = 0.5 * (a.speed + b.speed) * span;
            if (dx - expected).abs() > tol {
                return Err(format!(
                    "{}: displacement {dx} vs mean-speed {expected} at tick {}",
                    self.vehicle, b.tick
                ));
            }
            let dv = b.speed - a.speed;
            if dv > params.a_accel * span + tol || dv < -params.b_decel * span - tol {
                return Err(format!(
                    "{}: speed change {dv} over {span} s at tick {}",
                    self.vehicle, b.tick
                ));
            }
        }
        Ok(())
    }
}

/// The delayed approach: hold `cruise` until the curve that reaches
/// `crossing_speed` at `until` by accelerating at `a_accel` rises above it.
#[derive(Debug, Clone, Copy)]
struct Approach {
    until: f64,
    crossing_speed: f64,
    cruise: f64,
}

fn target_speed(x: f64, approach: Option<&Approach>, p: &KraussParams) -> f64 {
    match approach {
        Some(ap) if x < ap.until => {
            let resume = (ap.crossing_speed * ap.crossing_speed - 2.0 * p.a_accel * (ap.until - x))
                .max(0.0)
                .sqrt();
            ap.cruise.max(resume)
        }
        _ => p.v_max,
    }
}

fn next_speed(x: f64, v: f64, approach: Option<&Approach>, p: &KraussParams, dt: f64) -> f64 {
    target_speed(x, approach, p)
        .clamp(v - p.b_decel * dt, v + p.a_accel * dt)
        .clamp(0.0, p.v_max)
}

fn advance(x: f64, v: f64, v_next: f64, dt: f64) -> f64 {
    x + 0.5 * (v + v_next) * dt
}

fn roll(
    start: Sample,
    approach: Option<&Approach>,
    stop_at: f64,
    p: &KraussParams,
    dt: f64,
) -> (Vec<Sample>, bool) {
    let mut samples = vec![start];
    let mut s = start;
    while s.position < stop_at {
        if samples.len() >= MAX_PROFILE_TICKS {
            return (samples, false);
        }
        let v = next_speed(s.position, s.speed, approach, p, dt);
        s = Sample {
            tick: s.tick + 1,
            position: advance(s.position, s.speed, v, dt),
            speed: v,
        };
        samples.push(s);
    }
    (samples, true)
}

/// Tick at which the front first reaches `approach.until`, or `None` if that
/// happens after `limit`.
fn crossing_tick(
    start: Sample,
    approach: &Approach,
    p: &KraussParams,
    dt: f64,
    limit: Tick,
) -> Option<Tick> {
    let mut s = start;
    while s.position < approach.until {
        if s.tick >= limit {
            return None;
        }
        let v = next_speed(s.position, s.speed, Some(approach), p, dt);
        s = Sample {
            tick: s.tick + 1,
            position: advance(s.position, s.speed, v, dt),
            speed: v,
        };
    }
    Some(s.tick)
}

fn start_sample(vehicle: &VehicleState, from_time: Tick, p: &KraussParams) -> Sample {
    Sample {
        tick: from_time,
        position: vehicle.position,
        speed: vehicle.speed.clamp(0.0, p.v_max),
    }
}

/// Unimpeded motion from the current state to the scenario exit: accelerate
/// at `a_accel` up to `v_max`, then cruise. One sample per tick.
pub fn compose_trajectory(
    vehicle: &VehicleState,
    from_time: Tick,
    geometry: &RoadGeometry,
    params: &KraussParams,
    dt: f64,
) -> Trajectory {
    let start = start_sample(vehicle, from_time, params);
    let (samples, complete) = roll(start, None, geometry.mainline_length, params, dt);
    Trajectory::new(
        vehicle.id,
        vehicle.origin,
        vehicle.length,
        samples,
        complete,
    )
}

/// The unimpeded profile with its approach stretched so the front reaches the
/// merge point exactly at `target` when possible. Returns the free profile if
/// it already arrives no earlier than `target`, and `None` when even the
/// hardest braking arrives too soon or the result never reaches the exit.
///
/// The actual crossing tick can exceed `target` when no cruise speed lands on
/// it exactly; callers should read it back from the result.
pub fn stretch_to_crossing(
    vehicle: &VehicleState,
    from_time: Tick,
    target: Tick,
    geometry: &RoadGeometry,
    params: &KraussParams,
    dt: f64,
) -> Option<Trajectory> {
    let free = compose_trajectory(vehicle, from_time, geometry, params, dt);
    let cross = *free.crossing(geometry.merge_point)?;
    if cross.tick >= target {
        return Some(free);
    }
    if vehicle.position >= geometry.merge_point {
        return None;
    }
    let start = start_sample(vehicle, from_time, params);
    let approach = |cruise: f64| Approach {
        until: geometry.merge_point,
        crossing_speed: cross.speed,
        cruise,
    };
    // crossing tick is non-increasing in the cruise speed
    if let Some(t) = crossing_tick(start, &approach(0.0), params, dt, target) {
        if t < target {
            return None;
        }
    }
    let (mut lo, mut hi) = (0.0, params.v_max);
    let mut chosen = None;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        match crossing_tick(start, &approach(mid), params, dt, target) {
            Some(t) if t == target => {
                chosen = Some(mid);
                break;
            }
            Some(_) => hi = mid,
            None => lo = mid,
        }
    }
    let cruise = chosen.unwrap_or(lo);
    let (samples, complete) = roll(
        start,
        Some(&approach(cruise)),
        geometry.mainline_length,
        params,
        dt,
    );
    if !complete {
        return None;
    }
    Some(Trajectory::new(
        vehicle.id,
        vehicle.origin,
        vehicle.length,
        samples,
        true,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const DT: f64 = 0.1;

    fn vehicle(x: f64, v: f64) -> VehicleState {
        VehicleState::new(EntityId(4), Origin::Mainline, x, v, 5.0, 0)
    }

    #[test]
    fn cruise_is_a_straight_line() {
        let p = KraussParams::default();
        let g = RoadGeometry::default();
        let tr = compose_trajectory(&vehicle(300.0, p.v_max), 0, &g, &p, DT);
        assert!(tr.complete());
        for s in tr.samples() {
            assert!((s.position - (300.0 + p.v_max * s.tick as f64 * DT)).abs() < 1e-9);
            assert_eq!(s.speed, p.v_max);
        }
        assert!(tr.samples().last().unwrap().position >= g.mainline_length);
        let penultimate = tr.samples()[tr.samples().len() - 2];
        assert!(penultimate.position < g.mainline_length);
    }

    #[test]
    fn constant_acceleration_closed_form() {
        let p = KraussParams {
            a_accel: 2.0,
            v_max: 20.0,
            ..KraussParams::default()
        };
        let g = RoadGeometry::default();
        let tr = compose_trajectory(&vehicle(0.0, 0.0), 0, &g, &p, DT);
        for s in tr.samples() {
            let t = s.tick as f64 * DT;
            // x = t^2 up to t = 10 s, then 100 + 20 (t - 10)
            let x = if t <= 10.0 {
                t * t
            } else {
                100.0 + 20.0 * (t - 10.0)
            };
            assert!(
                (s.position - x).abs() < 1e-9,
                "t={t} got {} want {x}",
                s.position
            );
        }
        // front reaches 700 m at t = 40 s exactly
        assert!((tr.sample_at(400).unwrap().position - 700.0).abs() < 1e-9);
        tr.check_kinematics(&p, DT, 1e-9).unwrap();
    }

    #[test]
    fn time_invariance() {
        let p = KraussParams::default();
        let g = RoadGeometry::default();
        let v = vehicle(310.0, 17.0);
        let a = compose_trajectory(&v, 0, &g, &p, DT);
        let b = compose_trajectory(&v, 1234, &g, &p, DT);
        assert_eq!(a.shifted(1234), b);
    }

    #[test]
    fn stretch_hits_target_and_stays_consistent() {
        let p = KraussParams::default();
        let g = RoadGeometry::default();
        let v = vehicle(300.0, p.v_max);
        let free = compose_trajectory(&v, 0, &g, &p, DT);
        let desired = free.crossing(g.merge_point).unwrap().tick;
        for delay in [1, 15, 40, 120, 400] {
            let tr = stretch_to_crossing(&v, 0, desired + delay, &g, &p, DT).unwrap();
            assert_eq!(
                tr.crossing(g.merge_point).unwrap().tick,
                desired + delay,
                "delay {delay}"
            );
            tr.check_kinematics(&p, DT, 1e-6).unwrap();
            assert!(tr.complete());
            // never ahead of the free profile
            for s in tr.samples() {
                if let Some(f) = free.sample_at(s.tick) {
                    assert!(s.position <= f.position + 1e-9);
                }
            }
        }
    }

    #[test]
    fn stretch_is_a_no_op_when_already_late_enough() {
        let p = KraussParams::default();
        let g = RoadGeometry::default();
        let v = vehicle(300.0, 20.0);
        let free = compose_trajectory(&v, 5, &g, &p, DT);
        let desired = free.crossing(g.merge_point).unwrap().tick;
        assert_eq!(
            stretch_to_crossing(&v, 5, desired, &g, &p, DT).unwrap(),
            free
        );
        assert_eq!(
            stretch_to_crossing(&v, 5, desired - 30, &g, &p, DT).unwrap(),
            free
        );
    }

    #[test]
    fn too_close_to_brake_is_infeasible() {
        let p = KraussParams::default();
        let g = RoadGeometry::default();
        // braking distance from v_max is ~123 m
        let v = vehicle(650.0, p.v_max);
        assert!(stretch_to_crossing(&v, 0, 200, &g, &p, DT).is_none());
    }

    #[test]
    fn kinematic_check_catches_teleports() {
        let p = KraussParams::default();
        let bad = Trajectory::new(
            EntityId(1),
            Origin::Mainline,
            5.0,
            vec![
                Sample {
                    tick: 0,
                    position: 0.0,
                    speed: 10.0,
                },
                Sample {
                    tick: 1,
                    position: 2.0,
                    speed: 10.0,
                },
            ],
            false,
        );
        assert!(bad.check_kinematics(&p, DT, 1e-6).is_err());
    }
}
