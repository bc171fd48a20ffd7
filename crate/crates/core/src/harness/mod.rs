//! Scenario configuration, demand, runs, metrics and file outputs.

use thiserror::Error;

mod config;
mod demand;
mod report;
mod run;
mod validate;

pub use config::{ScenarioConfig, CONFIG_KEYS};
pub use demand::{generate_demand, MAINLINE_STREAM, RAMP_STREAM};
pub use report::{
    capacity_json, comparison_json, events_csv, metrics_json, write_comparison, write_run,
    EVENTS_HEADER,
};
pub use run::{
    arrivals, compare, free_flow_ticks, measure_capacity, min_headway, offered_rate, run_scenario,
    run_scenario_with, vehicle_delay, CapacityPoint, CapacityReport, ComparisonResult,
    MetricsReport, RunOptions, RunOutput, VehicleRecord, STABILITY_FRACTION, TRAJECTORY_HEADER,
};
pub use validate::{run_validation, SuiteResult, VALIDATE_MAX_DURATION};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
