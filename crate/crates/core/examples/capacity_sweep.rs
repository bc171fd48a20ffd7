//! Throughput against combined demand for both strategies, 30 min per point.

use preempt::harness::{measure_capacity, ScenarioConfig};
use preempt::traffic::Strategy;

fn main() {
    let cfg = ScenarioConfig {
        duration: 18_000,
        ..ScenarioConfig::default()
    };
    let grid: Vec<f64> = (2..=14).map(|k| 300.0 * k as f64).collect();

    let b = measure_capacity(&cfg.with_strategy(Strategy::Baseline), &grid).expect("valid grid");
    let p = measure_capacity(&cfg.with_strategy(Strategy::Preemptive), &grid).expect("valid grid");

    println!(
        "{:>8} {:>8} {:>10} {:>10}",
        "demand", "offered", "baseline", "preemptive"
    );
    for (x, y) in b.points.iter().zip(&p.points) {
        let mark = |s: bool| if s { ' ' } else { '*' };
        println!(
            "{:>8.0} {:>8.1} {:>9.1}{} {:>9.1}{}",
            x.demand,
            x.offered,
            x.throughput,
            mark(x.stable),
            y.throughput,
            mark(y.stable)
        );
    }
    println!("* below 95% of offered demand");
    match (b.capacity, p.capacity) {
        (Some(cb), Some(cp)) => println!("capacity {cb:.0} -> {cp:.0} veh/h ({:.2}x)", cp / cb),
        _ => println!("capacity undefined on this grid"),
    }
}
