//! Steps the merge simulation by hand for two minutes of light traffic and
//! prints the event log.

use preempt::harness::{arrivals, ScenarioConfig};
use preempt::traffic::{EventKind, Simulation, Strategy};

fn main() {
    let strategy: Strategy = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("baseline or preemptive"))
        .unwrap_or(Strategy::Preemptive);
    let mut cfg = ScenarioConfig::default().with_strategy(strategy);
    cfg.duration = 1200;

    let mut sim = Simulation::new(cfg.simulation(), cfg.seed).expect("default config is valid");
    for (tick, origin) in arrivals(&cfg) {
        sim.schedule_arrival(origin, tick.max(1));
    }

    let mut merged = 0;
    for _ in 0..cfg.duration {
        for e in sim.advance_tick() {
            if e.kind == EventKind::Merged {
                merged += 1;
            }
            if e.kind != EventKind::Crossed {
                println!(
                    "{:>5} {:<16} {:<5} {}",
                    e.tick,
                    e.kind.as_str(),
                    e.vehicle,
                    e.detail
                );
            }
        }
    }
    println!(
        "{strategy}: {merged} merges, {} collisions, {} protocol failures, {} vehicles on the road",
        sim.collisions(),
        sim.protocol_failures(),
        sim.vehicles().count()
    );
}
