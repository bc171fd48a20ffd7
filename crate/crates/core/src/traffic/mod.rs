//! Single-lane mainline with one on-ramp, driven either by car following with
//! gap-acceptance merging or by schedules approved through a [`Manager`].
//!
//! Everything uses one longitudinal axis. Mainline vehicles enter at 0; ramp
//! vehicles enter at `merge_point - ramp_length` on the ramp lane and join the
//! mainline lane once their front passes `merge_point`.
//!
//! [`Manager`]: crate::coordination::Manager

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::coordination::EntityId;
use crate::spatial::{Footprint, LaneId};
use crate::temporal::Tick;

mod krauss;
mod merge;
mod trajectory;
mod world;

pub use krauss::{
    baseline_merge_decision, krauss_step, safe_speed, GapAcceptance, MergeDecision, Obstacle,
};
pub use merge::{
    headway_ticks, merge_into, MergeCoordinator, MergeEntry, MergeList, PlanFailure,
    MAX_MERGE_DELAY,
};
pub use trajectory::{compose_trajectory, stretch_to_crossing, Sample, Trajectory};
pub use world::{Event, EventKind, Simulation, SimulationConfig, Strategy, ENTRY_RETRY_TICKS};

pub const MAIN_LANE: LaneId = LaneId(0);
pub const RAMP_LANE: LaneId = LaneId(1);

/// Crossing speeds below this are treated as this for headway conversion.
pub const MIN_HEADWAY_SPEED: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrafficError {
    #[error("invalid road geometry: {0}")]
    Geometry(String),
    #[error("invalid car-following parameters: {0}")]
    Params(String),
    #[error("unknown entity tag `{0}`")]
    UnknownEntity(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Origin {
    Mainline,
    Ramp,
}

impl Origin {
    pub fn tag(self) -> char {
        match self {
            Origin::Mainline => 'm',
            Origin::Ramp => 'r',
        }
    }

    pub fn from_tag(tag: char) -> Option<Self> {
        match tag {
            'm' => Some(Origin::Mainline),
            'r' => Some(Origin::Ramp),
            _ => None,
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.tag())
    }
}

/// A vehicle name such as `m12` or `r7`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VehicleTag {
    pub origin: Origin,
    pub id: EntityId,
}

impl fmt::Display for VehicleTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.origin.tag(), self.id.0)
    }
}

impl FromStr for VehicleTag {
    type Err = TrafficError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || TrafficError::UnknownEntity(s.to_string());
        let mut chars = s.chars();
        let origin = chars
            .next()
            .and_then(Origin::from_tag)
            .ok_or_else(unknown)?;
        let id = chars.as_str().parse::<u64>().map_err(|_| unknown())?;
        Ok(VehicleTag {
            origin,
            id: EntityId(id),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadGeometry {
    pub mainline_length: f64,
    pub ramp_length: f64,
    pub merge_point: f64,
    pub detection_boundary: f64,
}

impl Default for RoadGeometry {
    fn default() -> Self {
        Self {
            mainline_length: 1000.0,
            ramp_length: 300.0,
            merge_point: 700.0,
            detection_boundary: 300.0,
        }
    }
}

impl RoadGeometry {
    pub fn validate(&self) -> Result<(), TrafficError> {
        let g = self;
        let finite = [
            g.mainline_length,
            g.ramp_length,
            g.merge_point,
            g.detection_boundary,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(TrafficError::Geometry("lengths must be finite".into()));
        }
        if !(0.0 < g.detection_boundary
            && g.detection_boundary < g.merge_point
            && g.merge_point < g.mainline_length)
        {
            return Err(TrafficError::Geometry(format!(
                "need 0 < detection_boundary ({}) < merge_point ({}) < mainline_length ({})",
                g.detection_boundary, g.merge_point, g.mainline_length
            )));
        }
        if !(g.ramp_length > 0.0 && g.ramp_length <= g.merge_point) {
            return Err(TrafficError::Geometry(format!(
                "ramp_length ({}) must lie in (0, merge_point]",
                g.ramp_length
            )));
        }
        Ok(())
    }

    pub fn ramp_start(&self) -> f64 {
        self.merge_point - self.ramp_length
    }

    pub fn entry_position(&self, origin: Origin) -> f64 {
        match origin {
            Origin::Mainline => 0.0,
            Origin::Ramp => self.ramp_start(),
        }
    }

    /// Lane implied by position alone, for vehicles that follow a schedule.
    pub fn lane_at(&self, origin: Origin, front: f64) -> LaneId {
        match origin {
            Origin::Ramp if front < self.merge_point => RAMP_LANE,
            _ => MAIN_LANE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KraussParams {
    pub v_max: f64,
    pub a_accel: f64,
    pub b_decel: f64,
    pub reaction_time: f64,
    pub sigma: f64,
    pub min_gap: f64,
}

impl Default for KraussParams {
    fn default() -> Self {
        Self {
            v_max: 33.3,
            a_accel: 2.6,
            b_decel: 4.5,
            reaction_time: 1.0,
            sigma: 0.5,
            min_gap: 2.5,
        }
    }
}

impl KraussParams {
    pub fn validate(&self) -> Result<(), TrafficError> {
        let p = self;
        for (name, v) in [
            ("v_max", p.v_max),
            ("a_accel", p.a_accel),
            ("b_decel", p.b_decel),
            ("reaction_time", p.reaction_time),
            ("min_gap", p.min_gap),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(TrafficError::Params(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&p.sigma) {
            return Err(TrafficError::Params(format!(
                "sigma must lie in [0, 1], got {}",
                p.sigma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub id: EntityId,
    pub origin: Origin,
    /// Front bumper.
    pub position: f64,
    pub speed: f64,
    pub acceleration: f64,
    pub length: f64,
    pub entered_at: Tick,
    pub lane: LaneId,
}

impl VehicleState {
    pub fn new(
        id: EntityId,
        origin: Origin,
        position: f64,
        speed: f64,
        length: f64,
        entered_at: Tick,
    ) -> Self {
        let lane = match origin {
            Origin::Mainline => MAIN_LANE,
            Origin::Ramp => RAMP_LANE,
        };
        Self {
            id,
            origin,
            position,
            speed,
            acceleration: 0.0,
            length,
            entered_at,
            lane,
        }
    }

    /// Builds a state from a textual tag; unknown origin letters are rejected.
    pub fn from_tag(
        tag: &str,
        position: f64,
        speed: f64,
        length: f64,
        entered_at: Tick,
    ) -> Result<Self, TrafficError> {
        let tag: VehicleTag = tag.parse()?;
        Ok(Self::new(
            tag.id, tag.origin, position, speed, length, entered_at,
        ))
    }

    pub fn tag(&self) -> VehicleTag {
        VehicleTag {
            origin: self.origin,
            id: self.id,
        }
    }

    pub fn rear(&self) -> f64 {
        self.position - self.length
    }

    pub fn footprint(&self, tick: Tick) -> Footprint {
        Footprint {
            tick,
            lane: self.lane,
            rear: self.rear(),
            front: self.position,
        }
    }
}
