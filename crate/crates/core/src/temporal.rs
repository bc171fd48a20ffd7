//! Temporal-zone geometry over the (system time, action time) plane.
//!
//! Every task an entity intends to execute at action tick `τ` is, at system
//! tick `t`, in exactly one of five zones. Boundaries belong to the zone nearer
//! the present: `τ = t` is history, `τ = t + frozen` is frozen, and so on.
//! Submission is the one exception, see [`is_submittable`].

use std::fmt;

use thiserror::Error;

/// Simulation time in integer ticks.
pub type Tick = i64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TemporalError {
    #[error("zone width `{name}` must be strictly positive, got {value}")]
    NonPositiveWidth { name: &'static str, value: Tick },
    #[error("seconds-per-tick must be positive and finite, got {0}")]
    BadTickLength(f64),
    #[error("action tick {action} is too imminent to have been plannable (start of planning would be {start_planning})")]
    TooImminent { action: Tick, start_planning: Tick },
}

/// Widths of the frozen, critical and planning zones, in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TemporalConfig {
    frozen: Tick,
    critical: Tick,
    planning: Tick,
}

impl TemporalConfig {
    pub fn new(frozen: Tick, critical: Tick, planning: Tick) -> Result<Self, TemporalError> {
        for (name, value) in [
            ("t_frozen", frozen),
            ("t_critical", critical),
            ("t_planning", planning),
        ] {
            if value <= 0 {
                return Err(TemporalError::NonPositiveWidth { name, value });
            }
        }
        Ok(Self {
            frozen,
            critical,
            planning,
        })
    }

    /// Builds a config from widths in seconds, rounding to the nearest tick.
    pub fn from_seconds(
        frozen_s: f64,
        critical_s: f64,
        planning_s: f64,
        seconds_per_tick: f64,
    ) -> Result<Self, TemporalError> {
        if !(seconds_per_tick.is_finite() && seconds_per_tick > 0.0) {
            return Err(TemporalError::BadTickLength(seconds_per_tick));
        }
        let ticks = |s: f64| (s / seconds_per_tick).round() as Tick;
        Self::new(ticks(frozen_s), ticks(critical_s), ticks(planning_s))
    }

    pub fn frozen(&self) -> Tick {
        self.frozen
    }

    pub fn critical(&self) -> Tick {
        self.critical
    }

    pub fn planning(&self) -> Tick {
        self.planning
    }

    /// Minimum lead time between sharing a task and executing it.
    pub fn submission_lead(&self) -> Tick {
        self.frozen + self.critical
    }
}

impl Default for TemporalConfig {
    /// 10 s / 3 s / 17 s at 0.1 s per tick.
    fn default() -> Self {
        Self {
            frozen: 100,
            critical: 30,
            planning: 170,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Zone {
    History,
    Frozen,
    Critical,
    Planning,
    Intention,
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Zone::History => "history",
            Zone::Frozen => "frozen",
            Zone::Critical => "critical",
            Zone::Planning => "planning",
            Zone::Intention => "intention",
        };
        f.write_str(s)
    }
}

/// Zone of a task with action tick `action` as seen at system tick `now`.
pub fn classify_zone(now: Tick, action: Tick, cfg: &TemporalConfig) -> Zone {
    let frozen_edge = now + cfg.frozen;
    let critical_edge = frozen_edge + cfg.critical;
    let planning_edge = critical_edge + cfg.planning;
    if action <= now {
        Zone::History
    } else if action <= frozen_edge {
        Zone::Frozen
    } else if action <= critical_edge {
        Zone::Critical
    } else if action <= planning_edge {
        Zone::Planning
    } else {
        Zone::Intention
    }
}

/// Whether a task starting at `action` may still be shared at `now`.
///
/// Uses `action >= now + frozen + critical`, so the critical/planning boundary
/// point itself is submittable even though [`classify_zone`] labels it critical.
pub fn is_submittable(now: Tick, action: Tick, cfg: &TemporalConfig) -> bool {
    action >= now + cfg.submission_lead()
}

/// The four system ticks at which a task's planning must start, must have
/// started, must be finished, and at which the task executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PlanningDeadlines {
    pub start_planning: Tick,
    pub planning_start_deadline: Tick,
    pub planning_finish_deadline: Tick,
    pub execution: Tick,
}

pub fn deadlines_for(
    action: Tick,
    cfg: &TemporalConfig,
) -> Result<PlanningDeadlines, TemporalError> {
    let planning_finish_deadline = action - cfg.frozen;
    let planning_start_deadline = planning_finish_deadline - cfg.critical;
    let start_planning = planning_start_deadline - cfg.planning;
    if start_planning < 0 {
        return Err(TemporalError::TooImminent {
            action,
            start_planning,
        });
    }
    Ok(PlanningDeadlines {
        start_planning,
        planning_start_deadline,
        planning_finish_deadline,
        execution: action,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig() -> TemporalConfig {
        TemporalConfig::new(10, 3, 17).unwrap()
    }

    #[test]
    fn worked_example_zones() {
        assert_eq!(classify_zone(5, 40, &fig()), Zone::Intention);
        assert_eq!(classify_zone(20, 40, &fig()), Zone::Planning);
        assert_eq!(classify_zone(7, 7, &fig()), Zone::History);
        assert_eq!(
            classify_zone(7, 7, &TemporalConfig::default()),
            Zone::History
        );
    }

    #[test]
    fn boundaries_belong_to_the_nearer_zone() {
        let cfg = fig();
        assert_eq!(classify_zone(0, 10, &cfg), Zone::Frozen);
        assert_eq!(classify_zone(0, 11, &cfg), Zone::Critical);
        assert_eq!(classify_zone(0, 13, &cfg), Zone::Critical);
        assert_eq!(classify_zone(0, 14, &cfg), Zone::Planning);
        assert_eq!(classify_zone(0, 30, &cfg), Zone::Planning);
        assert_eq!(classify_zone(0, 31, &cfg), Zone::Intention);
    }

    #[test]
    fn submission_window() {
        let cfg = fig();
        assert!(is_submittable(5, 40, &cfg));
        // 40 < 35 + 13
        assert!(!is_submittable(35, 40, &cfg));
        assert!(is_submittable(27, 40, &cfg));
        assert_eq!(classify_zone(27, 40, &cfg), Zone::Critical);
        assert!(!is_submittable(28, 40, &cfg));
    }

    #[test]
    fn deadlines() {
        let cfg = fig();
        let d = deadlines_for(40, &cfg).unwrap();
        assert_eq!(
            (
                d.start_planning,
                d.planning_start_deadline,
                d.planning_finish_deadline,
                d.execution
            ),
            (10, 27, 30, 40)
        );
        let d = deadlines_for(30, &cfg).unwrap();
        assert_eq!(
            (
                d.start_planning,
                d.planning_start_deadline,
                d.planning_finish_deadline,
                d.execution
            ),
            (0, 17, 20, 30)
        );
        assert_eq!(
            deadlines_for(29, &cfg),
            Err(TemporalError::TooImminent {
                action: 29,
                start_planning: -1
            })
        );
    }

    #[test]
    fn config_validation() {
        assert!(TemporalConfig::new(0, 3, 17).is_err());
        assert!(TemporalConfig::new(10, -1, 17).is_err());
        assert_eq!(
            TemporalConfig::from_seconds(10.0, 3.0, 17.0, 0.1).unwrap(),
            TemporalConfig::default()
        );
        assert!(TemporalConfig::from_seconds(10.0, 3.0, 17.0, 0.0).is_err());
    }

    fn rank(z: Zone) -> u8 {
        match z {
            Zone::Intention => 0,
            Zone::Planning => 1,
            Zone::Critical => 2,
            Zone::Frozen => 3,
            Zone::History => 4,
        }
    }

    proptest! {
        #[test]
        fn zones_partition_the_plane(
            f in 1i64..50, c in 1i64..50, p in 1i64..50,
            t in -200i64..200, tau in -200i64..400,
        ) {
            let cfg = TemporalConfig::new(f, c, p).unwrap();
            let z = classify_zone(t, tau, &cfg);
            // exactly one of the defining predicates holds
            let preds = [
                tau <= t,
                t < tau && tau <= t + f,
                t + f < tau && tau <= t + f + c,
                t + f + c < tau && tau <= t + f + c + p,
                tau > t + f + c + p,
            ];
            prop_assert_eq!(preds.iter().filter(|&&b| b).count(), 1);
            let idx = preds.iter().position(|&b| b).unwrap();
            let expected = [Zone::History, Zone::Frozen, Zone::Critical, Zone::Planning, Zone::Intention][idx];
            prop_assert_eq!(z, expected);
        }

        #[test]
        fn zones_age_monotonically(
            f in 1i64..30, c in 1i64..30, p in 1i64..30, tau in 0i64..200,
        ) {
            let cfg = TemporalConfig::new(f, c, p).unwrap();
            let mut last = rank(classify_zone(tau - 200, tau, &cfg));
            for t in (tau - 199)..=(tau + 5) {
                let r = rank(classify_zone(t, tau, &cfg));
                prop_assert!(r >= last && r - last <= 1, "skipped or reversed at t={}", t);
                last = r;
            }
            prop_assert_eq!(last, rank(Zone::History));
        }

        #[test]
        fn submission_matches_zone(
            f in 1i64..50, c in 1i64..50, p in 1i64..50,
            t in -100i64..100, tau in -100i64..300,
        ) {
            let cfg = TemporalConfig::new(f, c, p).unwrap();
            let zone = classify_zone(t, tau, &cfg);
            let on_critical_planning_edge = tau == t + f + c;
            let expected = matches!(zone, Zone::Planning | Zone::Intention) || on_critical_planning_edge;
            prop_assert_eq!(is_submittable(t, tau, &cfg), expected);
        }

        #[test]
        fn deadlines_sit_on_the_zone_boundaries(
            f in 1i64..50, c in 1i64..50, p in 1i64..50, extra in 0i64..100,
        ) {
            let cfg = TemporalConfig::new(f, c, p).unwrap();
            let tau = f + c + p + extra;
            let d = deadlines_for(tau, &cfg).unwrap();
            prop_assert!(d.start_planning <= d.planning_start_deadline);
            prop_assert!(d.planning_start_deadline < d.planning_finish_deadline);
            prop_assert!(d.planning_finish_deadline < d.execution);
            prop_assert_eq!(tau, d.start_planning + f + c + p);
            prop_assert_eq!(tau, d.planning_start_deadline + f + c);
            prop_assert_eq!(tau, d.planning_finish_deadline + f);
            prop_assert!(deadlines_for(f + c + p - 1, &cfg).is_err());
        }
    }
}
