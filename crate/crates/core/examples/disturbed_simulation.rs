//! Closed-loop simulation of the lateral model with random perturbations
//! of the state measurement and the system matrices.

use flexwing_rl::harness::presets::Subsystem;
use flexwing_rl::plant::{simulate, DisturbanceSpec, LinearFeedback};
use flexwing_rl::riccati::dare_solve;

fn main() -> flexwing_rl::Result<()> {
    let p = Subsystem::Lateral.preset();
    let gain = dare_solve(&p.model, &p.cost, 1e-12, 200_000)?.gain;
    for seed in 0..5 {
        let spec = DisturbanceSpec::new(0.2, 0.5, seed)?;
        let traj = simulate(
            &p.model,
            &mut LinearFeedback(gain.clone()),
            &p.cost,
            &p.z0,
            2000,
            0.01,
            Some(&spec),
        )?;
        println!(
            "seed {seed}: settling {:>6} s, cost {:.2}, final |Z| {:.2e}",
            traj.settling_time(0.01).map_or("-".into(), |t| format!("{t:.2}")),
            traj.total_cost(),
            traj.final_state.norm()
        );
    }
    Ok(())
}
