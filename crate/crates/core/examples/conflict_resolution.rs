//! One manager, three entities competing for two cells. Later submitters are
//! pushed back; earlier approvals never move.

use preempt::{
    Entity, EntityId, Intention, LaneId, Manager, ManagerId, ResourceId, Task, TemporalConfig,
};

fn main() {
    let cfg = TemporalConfig::new(3, 2, 5).expect("positive widths");
    let mut manager = Manager::new(ManagerId(1), cfg);
    let cell = |c| ResourceId::new(LaneId(0), c);

    let mut entities: Vec<Entity> = (1..=3).map(|i| Entity::new(EntityId(i))).collect();
    for e in &entities {
        manager.register(e.id());
    }

    let plans = [
        vec![Task::with_duration(EntityId(1), cell(0), 40, 10)],
        vec![
            Task::with_duration(EntityId(2), cell(0), 45, 10),
            Task::with_duration(EntityId(2), cell(1), 56, 4),
        ],
        vec![Task::with_duration(EntityId(3), cell(1), 58, 6)],
    ];

    let now = 10;
    let mut mail = Vec::new();
    for (i, tasks) in plans.into_iter().enumerate() {
        let id = entities[i].id();
        let intention = entities[i]
            .submit(tasks, now, &cfg)
            .expect("far enough ahead");
        match manager.try_approve(&intention, now) {
            Ok(approval) => {
                for d in &approval.outcome.deltas {
                    println!(
                        "{id}: {} -> {} (shift {})",
                        d.original,
                        d.approved,
                        d.shift()
                    );
                }
                mail.extend(approval.notifications);
            }
            Err(r) => println!("{id}: rejected, {r}"),
        }
    }

    for note in mail {
        let to = note.entity;
        if let Some(e) = entities.iter_mut().find(|e| e.id() == to) {
            e.deliver(note);
        }
    }
    for e in &mut entities {
        e.sync();
        let plan: Vec<String> = e.approved().iter().map(ToString::to_string).collect();
        println!("{} follows {}", e.id(), plan.join(", "));
        if let Some(t) = e.find_action(52) {
            println!("  at tick 52 it is doing {t}");
        }
    }

    // tick 12 is already inside the critical zone
    let late = Task::with_duration(EntityId(1), cell(2), 12, 2);
    let intention = Intention::new(EntityId(1), vec![late], now).expect("well-formed");
    if let Err(r) = manager.try_approve(&intention, now) {
        println!("late submission rejected: {r}");
    }
}
