//! Zones and planning deadlines on a 1 s clock with 10/3/17 s zone widths.

use preempt::{classify_zone, deadlines_for, is_submittable, TemporalConfig};

fn main() {
    let cfg = TemporalConfig::new(10, 3, 17).expect("positive widths");
    let action = 40;

    for now in [0, 5, 10, 20, 27, 30, 35, 40, 45] {
        println!(
            "t={now:>2}: task at {action} is {:<9} submittable={}",
            classify_zone(now, action, &cfg).to_string(),
            is_submittable(now, action, &cfg)
        );
    }

    let d = deadlines_for(action, &cfg).expect("far enough out");
    println!(
        "deadlines for {action}: start planning {}, planning must have started {}, planning done {}, execute {}",
        d.start_planning, d.planning_start_deadline, d.planning_finish_deadline, d.execution
    );
}
