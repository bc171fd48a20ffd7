use std::fmt::Write as _;

use crate::temporal::TemporalConfig;
use crate::traffic::{GapAcceptance, KraussParams, RoadGeometry, SimulationConfig, Strategy};

use super::HarnessError;

/// One experiment: road, vehicles, timing, demand and strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub geometry: RoadGeometry,
    pub krauss: KraussParams,
    pub temporal: TemporalConfig,
    /// veh/h
    pub demand_main: f64,
    /// veh/h
    pub demand_ramp: f64,
    /// ticks
    pub duration: i64,
    pub seed: u64,
    pub strategy: Strategy,
    pub additional_space: f64,
    pub cell_length: f64,
    pub forced_merge: bool,
    pub dt: f64,
    pub vehicle_length: f64,
    pub gap_lead_min: f64,
    pub gap_lag_min: f64,
    pub merge_zone: f64,
    pub main_entry_speed: f64,
    pub ramp_entry_speed: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let sim = SimulationConfig::default();
        Self {
            geometry: sim.geometry,
            krauss: sim.krauss,
            temporal: sim.temporal,
            demand_main: 1200.0,
            demand_ramp: 600.0,
            duration: 18_000,
            seed: 1,
            strategy: Strategy::Preemptive,
            additional_space: sim.additional_space,
            cell_length: sim.cell_length,
            forced_merge: sim.gap.forced_merge,
            dt: sim.dt,
            vehicle_length: sim.vehicle_length,
            gap_lead_min: sim.gap.lead_min,
            gap_lag_min: sim.gap.lag_min,
            merge_zone: sim.gap.merge_zone,
            main_entry_speed: sim.main_entry_speed,
            ramp_entry_speed: sim.ramp_entry_speed,
        }
    }
}

/// Every settable key, in the order they are written back out.
pub const CONFIG_KEYS: &[&str] = &[
    "mainline_length",
    "ramp_length",
    "merge_point",
    "detection_boundary",
    "v_max",
    "a_accel",
    "b_decel",
    "reaction_time",
    "sigma",
    "min_gap",
    "t_frozen",
    "t_critical",
    "t_planning",
    "demand_main",
    "demand_ramp",
    "duration",
    "seed",
    "strategy",
    "additional_space",
    "cell_length",
    "forced_merge",
    "dt",
    "vehicle_length",
    "gap_lead_min",
    "gap_lag_min",
    "merge_zone",
    "main_entry_speed",
    "ramp_entry_speed",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
    value
        .trim()
        .parse()
        .map_err(|_| HarnessError::Config(format!("cannot parse `{value}` for `{key}`")))
}

impl ScenarioConfig {
    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let t = self.temporal;
        match key {
            "mainline_length" => self.geometry.mainline_length = parse(key, value)?,
            "ramp_length" => self.geometry.ramp_length = parse(key, value)?,
            "merge_point" => self.geometry.merge_point = parse(key, value)?,
            "detection_boundary" => self.geometry.detection_boundary = parse(key, value)?,
            "v_max" => self.krauss.v_max = parse(key, value)?,
            "a_accel" => self.krauss.a_accel = parse(key, value)?,
            "b_decel" => self.krauss.b_decel = parse(key, value)?,
            "reaction_time" => self.krauss.reaction_time = parse(key, value)?,
            "sigma" => self.krauss.sigma = parse(key, value)?,
            "min_gap" => self.krauss.min_gap = parse(key, value)?,
            "t_frozen" => self.temporal = temporal(parse(key, value)?, t.critical(), t.planning())?,
            "t_critical" => self.temporal = temporal(t.frozen(), parse(key, value)?, t.planning())?,
            "t_planning" => self.temporal = temporal(t.frozen(), t.critical(), parse(key, value)?)?,
            "demand_main" => self.demand_main = parse(key, value)?,
            "demand_ramp" => self.demand_ramp = parse(key, value)?,
            "duration" => self.duration = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "strategy" => self.strategy = value.trim().parse().map_err(HarnessError::Config)?,
            "additional_space" => self.additional_space = parse(key, value)?,
            "cell_length" => self.cell_length = parse(key, value)?,
            "forced_merge" => self.forced_merge = parse(key, value)?,
            "dt" => self.dt = parse(key, value)?,
            "vehicle_length" => self.vehicle_length = parse(key, value)?,
            "gap_lead_min" => self.gap_lead_min = parse(key, value)?,
            "gap_lag_min" => self.gap_lag_min = parse(key, value)?,
            "merge_zone" => self.merge_zone = parse(key, value)?,
            "main_entry_speed" => self.main_entry_speed = parse(key, value)?,
            "ramp_entry_speed" => self.ramp_entry_speed = parse(key, value)?,
            other => return Err(HarnessError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), HarnessError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("line {}: expected `key = value`", n + 1))
            })?;
            self.set(key.trim(), value)
                .map_err(|e| HarnessError::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// The config as a file `apply_text` reads back unchanged.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in CONFIG_KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key));
        }
        out
    }

    fn get(&self, key: &str) -> String {
        let t = &self.temporal;
        match key {
            "mainline_length" => self.geometry.mainline_length.to_string(),
            "ramp_length" => self.geometry.ramp_length.to_string(),
            "merge_point" => self.geometry.merge_point.to_string(),
            "detection_boundary" => self.geometry.detection_boundary.to_string(),
            "v_max" => self.krauss.v_max.to_string(),
            "a_accel" => self.krauss.a_accel.to_string(),
            "b_decel" => self.krauss.b_decel.to_string(),
            "reaction_time" => self.krauss.reaction_time.to_string(),
            "sigma" => self.krauss.sigma.to_string(),
            "min_gap" => self.krauss.min_gap.to_string(),
            "t_frozen" => t.frozen().to_string(),
            "t_critical" => t.critical().to_string(),
            "t_planning" => t.planning().to_string(),
            "demand_main" => self.demand_main.to_string(),
            "demand_ramp" => self.demand_ramp.to_string(),
            "duration" => self.duration.to_string(),
            "seed" => self.seed.to_string(),
            "strategy" => self.strategy.to_string(),
            "additional_space" => self.additional_space.to_string(),
            "cell_length" => self.cell_length.to_string(),
            "forced_merge" => self.forced_merge.to_string(),
            "dt" => self.dt.to_string(),
            "vehicle_length" => self.vehicle_length.to_string(),
            "gap_lead_min" => self.gap_lead_min.to_string(),
            "gap_lag_min" => self.gap_lag_min.to_string(),
            "merge_zone" => self.merge_zone.to_string(),
            "main_entry_speed" => self.main_entry_speed.to_string(),
            "ramp_entry_speed" => self.ramp_entry_speed.to_string(),
            _ => unreachable!("every key in CONFIG_KEYS is handled"),
        }
    }

    pub fn simulation(&self) -> SimulationConfig {
        SimulationConfig {
            geometry: self.geometry,
            krauss: self.krauss,
            gap: GapAcceptance {
                lead_min: self.gap_lead_min,
                lag_min: self.gap_lag_min,
                forced_merge: self.forced_merge,
                merge_zone: self.merge_zone,
            },
            temporal: self.temporal,
            dt: self.dt,
            cell_length: self.cell_length,
            additional_space: self.additional_space,
            vehicle_length: self.vehicle_length,
            main_entry_speed: self.main_entry_speed,
            ramp_entry_speed: self.ramp_entry_speed,
            strategy: self.strategy,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        for (name, v) in [
            ("demand_main", self.demand_main),
            ("demand_ramp", self.demand_ramp),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(HarnessError::Config(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if self.duration <= 0 {
            return Err(HarnessError::Config(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        self.simulation()
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn with_strategy(&self, strategy: Strategy) -> Self {
        Self {
            strategy,
            ..self.clone()
        }
    }

    /// Same main/ramp split, scaled to a combined demand.
    pub fn with_total_demand(&self, total: f64) -> Self {
        let sum = self.demand_main + self.demand_ramp;
        let main_share = if sum > 0.0 {
            self.demand_main / sum
        } else {
            0.5
        };
        Self {
            demand_main: total * main_share,
            demand_ramp: total * (1.0 - main_share),
            ..self.clone()
        }
    }

    /// Ticks discarded before metrics are collected.
    pub fn warmup(&self) -> i64 {
        self.duration / 10
    }
}

fn temporal(frozen: i64, critical: i64, planning: i64) -> Result<TemporalConfig, HarnessError> {
    TemporalConfig::new(frozen, critical, planning).map_err(|e| HarnessError::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = ScenarioConfig::default();
        cfg.set("demand_ramp", "750.5").unwrap();
        cfg.set("strategy", "baseline").unwrap();
        cfg.set("t_critical", "45").unwrap();
        cfg.set("forced_merge", "false").unwrap();
        let back = ScenarioConfig::from_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn comments_and_blank_lines() {
        let cfg = ScenarioConfig::from_text("# demo\n\nseed = 9  # trailing\n demand_main=100\n")
            .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.demand_main, 100.0);
    }

    #[test]
    fn errors_name_the_line() {
        let err = ScenarioConfig::from_text("seed = 1\nbogus = 2\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(ScenarioConfig::from_text("seed 1").is_err());
        assert!(ScenarioConfig::from_text("sigma = lots").is_err());
        assert!(ScenarioConfig::from_text("t_frozen = 0").is_err());
    }

    #[test]
    fn validation() {
        assert!(ScenarioConfig::default().validate().is_ok());
        let mut c = ScenarioConfig::default();
        c.demand_main = -1.0;
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::default();
        c.duration = 0;
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::default();
        c.geometry.detection_boundary = 900.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn demand_split_is_preserved() {
        let c = ScenarioConfig::default().with_total_demand(3000.0);
        assert!((c.demand_main - 2000.0).abs() < 1e-9);
        assert!((c.demand_ramp - 1000.0).abs() < 1e-9);
    }
}
