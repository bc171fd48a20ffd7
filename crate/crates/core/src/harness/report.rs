use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::traffic::Event;

use super::{
    CapacityReport, ComparisonResult, HarnessError, MetricsReport, RunOutput, TRAJECTORY_HEADER,
};

pub const EVENTS_HEADER: &str = "tick,event,vehicle_id,detail";

fn num(x: f64) -> String {
    format!("{x:.6}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(|| "\"not-applicable\"".to_string(), num)
}

fn metrics_fields(m: &MetricsReport, indent: &str) -> String {
    let fields = [
        ("mean_delay", num(m.mean_delay)),
        ("throughput", num(m.throughput)),
        ("collisions", m.collisions.to_string()),
        ("vehicles_completed", m.vehicles_completed.to_string()),
        ("protocol_failures", m.protocol_failures.to_string()),
        ("vehicles_injected", m.vehicles_injected.to_string()),
    ];
    let body: Vec<String> = fields
        .iter()
        .map(|(k, v)| format!("{indent}  \"{k}\": {v}"))
        .collect();
    format!("{{\n{}\n{indent}}}", body.join(",\n"))
}

pub fn metrics_json(m: &MetricsReport) -> String {
    format!("{}\n", metrics_fields(m, ""))
}

pub fn comparison_json(c: &ComparisonResult) -> String {
    format!(
        "{{\n  \"baseline\": {},\n  \"preemptive\": {},\n  \"delay_reduction\": {},\n  \"capacity_ratio\": {}\n}}\n",
        metrics_fields(&c.baseline, "  "),
        metrics_fields(&c.preemptive, "  "),
        opt_num(c.delay_reduction),
        opt_num(c.capacity_ratio),
    )
}

fn capacity_fields(r: &CapacityReport) -> String {
    let points: Vec<String> = r
        .points
        .iter()
        .map(|p| {
            format!(
                "      {{ \"demand\": {}, \"offered\": {}, \"throughput\": {}, \"stable\": {} }}",
                num(p.demand),
                num(p.offered),
                num(p.throughput),
                p.stable
            )
        })
        .collect();
    format!(
        "{{\n    \"capacity\": {},\n    \"points\": [\n{}\n    ]\n  }}",
        opt_num(r.capacity),
        points.join(",\n")
    )
}

pub fn capacity_json(baseline: &CapacityReport, preemptive: &CapacityReport) -> String {
    let ratio = match (baseline.capacity, preemptive.capacity) {
        (Some(b), Some(p)) if b > 0.0 => Some(p / b),
        _ => None,
    };
    format!(
        "{{\n  \"baseline\": {},\n  \"preemptive\": {},\n  \"capacity_ratio\": {}\n}}\n",
        capacity_fields(baseline),
        capacity_fields(preemptive),
        opt_num(ratio)
    )
}

/// Quotes a field if it holds a delimiter, quote or line break.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn events_csv(events: &[Event]) -> String {
    let mut out = String::from(EVENTS_HEADER);
    out.push('\n');
    for e in events {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            e.tick,
            e.kind,
            e.vehicle,
            csv_field(&e.detail)
        );
    }
    out
}

/// Writes `metrics.json`, `events.csv` and, if recorded, `trajectories.csv`.
pub fn write_run(dir: &Path, run: &RunOutput) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("metrics.json"), metrics_json(&run.metrics))?;
    fs::write(dir.join("events.csv"), events_csv(&run.events))?;
    let traj = run
        .trajectories
        .clone()
        .unwrap_or_else(|| format!("{TRAJECTORY_HEADER}\n"));
    fs::write(dir.join("trajectories.csv"), traj)?;
    Ok(())
}

/// `dir/baseline/`, `dir/preemptive/`, and the combined `dir/metrics.json`.
pub fn write_comparison(
    dir: &Path,
    result: &ComparisonResult,
    baseline: &RunOutput,
    preemptive: &RunOutput,
) -> Result<(), HarnessError> {
    write_run(&dir.join("baseline"), baseline)?;
    write_run(&dir.join("preemptive"), preemptive)?;
    fs::write(dir.join("metrics.json"), comparison_json(result))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coordination::EntityId;
    use crate::traffic::{EventKind, Origin, VehicleTag};

    fn report(delay: f64) -> MetricsReport {
        MetricsReport {
            mean_delay: delay,
            throughput: 1234.5,
            collisions: 0,
            vehicles_completed: 10,
            protocol_failures: 0,
            vehicles_injected: 12,
        }
    }

    #[test]
    fn metrics_field_order_and_precision() {
        let s = metrics_json(&report(1.0 / 3.0));
        let keys: Vec<usize> = [
            "mean_delay",
            "throughput",
            "collisions",
            "vehicles_completed",
            "protocol_failures",
        ]
        .iter()
        .map(|k| s.find(k).unwrap())
        .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        assert!(s.contains("\"mean_delay\": 0.333333,"));
        assert!(s.contains("\"throughput\": 1234.500000,"));
        assert!(s.ends_with("}\n"));
    }

    #[test]
    fn undefined_reduction_is_not_applicable() {
        let c = ComparisonResult::from_reports(report(0.0), report(0.0));
        let s = comparison_json(&c);
        assert!(s.contains("\"delay_reduction\": \"not-applicable\""));
        let c = ComparisonResult::from_reports(report(10.0), report(1.0));
        assert!(comparison_json(&c).contains("\"delay_reduction\": 0.900000"));
    }

    #[test]
    fn event_details_are_escaped() {
        let e = Event {
            tick: 3,
            kind: EventKind::ProtocolFailure,
            vehicle: VehicleTag {
                origin: Origin::Mainline,
                id: EntityId(4),
            },
            detail: "a, \"b\"".into(),
        };
        assert_eq!(
            events_csv(&[e]),
            "tick,event,vehicle_id,detail\n3,protocol_failure,m4,\"a, \"\"b\"\"\"\n"
        );
    }
}
