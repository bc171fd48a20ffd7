//! Two vehicles heading for the merge point at about the same time. The first
//! keeps its free-flow profile; the second is stretched to cross one headway later.

use preempt::traffic::{
    compose_trajectory, KraussParams, MergeCoordinator, Origin, RoadGeometry, VehicleState,
};
use preempt::{EntityId, TemporalConfig};

fn main() {
    let geometry = RoadGeometry::default();
    let params = KraussParams::default();
    let dt = 0.1;
    let mut coordinator =
        MergeCoordinator::new(geometry, params, TemporalConfig::default(), dt, 5.0, 2.0);

    let main = VehicleState::new(EntityId(1), Origin::Mainline, 364.0, 33.3, 5.0, 0);
    let ramp = VehicleState::new(
        EntityId(2),
        Origin::Ramp,
        geometry.ramp_start(),
        20.0,
        5.0,
        0,
    );

    for v in [&ramp, &main] {
        let free = compose_trajectory(v, 0, &geometry, &params, dt);
        let wanted = free
            .crossing(geometry.merge_point)
            .expect("reaches the merge point")
            .tick;
        match coordinator.check_new_vehicle(v, 0) {
            Ok(tr) => {
                let at = tr
                    .crossing(geometry.merge_point)
                    .expect("reaches the merge point");
                println!(
                    "{}: wanted tick {wanted}, scheduled tick {} at {:.2} m/s, exits at {}",
                    v.tag(),
                    at.tick,
                    at.speed,
                    tr.end_tick()
                );
                tr.check_kinematics(&params, dt, 1e-6).expect("drivable");
            }
            Err(e) => println!("{}: {e}", v.tag()),
        }
    }

    let list = coordinator.merge_list();
    println!(
        "merge order: {:?}",
        list.entries()
            .iter()
            .map(|e| (e.vehicle, e.crossing_tick))
            .collect::<Vec<_>>()
    );
    println!(
        "cell claims held by the manager: {}",
        coordinator.schedule().len()
    );
}
