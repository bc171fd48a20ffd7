//! Baseline vs preemptive on the same arrivals, at a demand where the baseline
//! ramp backs up. Pass an output directory to also write the report files.

use preempt::harness::{compare, write_comparison, RunOptions, ScenarioConfig};

fn main() {
    let cfg = ScenarioConfig::default().with_total_demand(3000.0);
    let opts = RunOptions {
        record_trajectories: std::env::args().nth(1).is_some(),
        ..RunOptions::default()
    };
    let (result, baseline, preemptive) = compare(&cfg, &opts).expect("default config is valid");

    for (name, run) in [("baseline", &baseline), ("preemptive", &preemptive)] {
        let m = run.metrics;
        println!(
            "{name:<10} delay {:>7.3} s  throughput {:>7.1} veh/h  collisions {:>3}  ramp queue {:>4.1}% of the time",
            m.mean_delay,
            m.throughput,
            m.collisions,
            100.0 * run.ramp_end_queue_share
        );
    }
    if let Some(r) = result.delay_reduction {
        println!("delay reduction {:.1}%", 100.0 * r);
    }

    if let Some(dir) = std::env::args().nth(1) {
        write_comparison(dir.as_ref(), &result, &baseline, &preemptive)
            .expect("writable directory");
        println!("wrote {dir}/metrics.json, {dir}/baseline/ and {dir}/preemptive/");
    }
}
