use super::{KraussParams, RoadGeometry, VehicleState};

/// How close to the ramp end, beyond the standstill gap, counts as "at the end".
const RAMP_END_SLACK: f64 = 1.0;

/// What a follower sees ahead of it: a rear bumper and its speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub rear: f64,
    pub speed: f64,
}

impl Obstacle {
    /// A stopped obstacle, e.g. the end of the ramp.
    pub fn wall(x: f64) -> Self {
        Self {
            rear: x,
            speed: 0.0,
        }
    }
}

impl From<&VehicleState> for Obstacle {
    fn from(v: &VehicleState) -> Self {
        Self {
            rear: v.rear(),
            speed: v.speed,
        }
    }
}

/// Krauss safe speed for a net gap (already reduced by `min_gap`).
pub fn safe_speed(gap: f64, v_follower: f64, v_leader: f64, params: &KraussParams) -> f64 {
    let tau = params.reaction_time;
    let v_mean = 0.5 * (v_follower + v_leader);
    v_leader + (gap - v_leader * tau) / (v_mean / params.b_decel + tau)
}

/// One Krauss update. `noise` is a uniform draw in `[0, 1)`.
pub fn krauss_step(
    follower: &VehicleState,
    leader: Option<Obstacle>,
    params: &KraussParams,
    dt: f64,
    noise: f64,
) -> f64 {
    let v = follower.speed;
    let mut v_des = (v + params.a_accel * dt).min(params.v_max);
    if let Some(lead) = leader {
        let gap = lead.rear - follower.position - params.min_gap;
        v_des = v_des.min(safe_speed(gap, v, lead.speed, params));
    }
    (v_des - params.sigma * params.a_accel * dt * noise).max(0.0)
}

/// Gap-acceptance merging used by the baseline in place of a full lane-change model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapAcceptance {
    pub lead_min: f64,
    pub lag_min: f64,
    /// Merge anyway once stopped at the ramp end.
    pub forced_merge: bool,
    /// Length of ramp, ending at the merge point, where merging is allowed.
    pub merge_zone: f64,
}

impl Default for GapAcceptance {
    fn default() -> Self {
        Self {
            lead_min: 10.0,
            lag_min: 15.0,
            forced_merge: true,
            merge_zone: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeDecision {
    Accept,
    Wait,
    /// Merging at the ramp end without an acceptable gap.
    Forced,
}

impl MergeDecision {
    pub fn merges(self) -> bool {
        !matches!(self, MergeDecision::Wait)
    }
}

pub fn at_ramp_end(vehicle: &VehicleState, geometry: &RoadGeometry, params: &KraussParams) -> bool {
    vehicle.position >= geometry.merge_point - params.min_gap - RAMP_END_SLACK
}

/// Gaps are bumper to bumper along the mainline: `lead_gap` from the ramp
/// vehicle's front to the mainline leader's rear, `lag_gap` from the mainline
/// follower's front to the ramp vehicle's rear. Use infinity when absent.
pub fn baseline_merge_decision(
    ramp_vehicle: &VehicleState,
    lead_gap: f64,
    lag_gap: f64,
    rules: &GapAcceptance,
    geometry: &RoadGeometry,
    params: &KraussParams,
) -> MergeDecision {
    if ramp_vehicle.position < geometry.merge_point - rules.merge_zone {
        return MergeDecision::Wait;
    }
    if lead_gap >= rules.lead_min && lag_gap >= rules.lag_min {
        MergeDecision::Accept
    } else if rules.forced_merge && at_ramp_end(ramp_vehicle, geometry, params) {
        MergeDecision::Forced
    } else {
        MergeDecision::Wait
    }
}
