//! A 45 m road split between three managers. An intention crossing domain
//! borders is approved piecewise; the entity then moves between managers.

use preempt::{
    EntityId, Intention, Jurisdiction, LaneId, Layout, ManagerId, ResourceId, Task, TemporalConfig,
};

fn main() {
    let cfg = TemporalConfig::new(3, 2, 5).expect("positive widths");
    let layout = Layout::uniform(0.0, 45.0, 3).expect("non-empty road");
    let mut road = Jurisdiction::new(layout, 5.0, cfg).expect("positive cell length");

    let car = EntityId(7);
    let home = road.register(car, 2.0).expect("on the road");
    println!("{car} registered with {home}");

    // one 5 m cell every 4 ticks, from cell 0 to cell 8
    let tasks: Vec<Task> = (0..9)
        .map(|c| Task::with_duration(car, ResourceId::new(LaneId(0), c), 20 + 4 * c, 4))
        .collect();
    let intention = Intention::new(car, tasks, 0).expect("well-formed");
    let approvals = road.submit(&intention, 0).expect("empty road");
    for a in &approvals {
        for n in &a.notifications {
            println!(
                "{} approved {} tasks for {}",
                n.manager,
                n.approved.len(),
                n.entity
            );
        }
    }

    let mut at = home;
    for next in [ManagerId(at.0 + 1), ManagerId(at.0 + 2)] {
        let pending: Vec<Task> = road
            .managers()
            .flat_map(|m| m.schedule().tasks_of(car).to_vec())
            .collect();
        let ack = road.handover(car, at, next, &pending).expect("neighbors");
        println!(
            "handover {} -> {}: {} tasks re-homed",
            ack.from,
            ack.to,
            ack.transferred.len()
        );
        at = next;
    }
    for m in road.managers() {
        println!("{} holds {} tasks", m.id(), m.schedule().len());
    }
}
