//! Open- and closed-loop poles of both subsystems under the published actor weights.

use flexwing_rl::harness::presets::{self, Subsystem};
use flexwing_rl::spectral::{closed_loop_poles, open_loop_poles, Feedback};

fn main() -> flexwing_rl::Result<()> {
    for sub in Subsystem::ALL {
        let preset = sub.preset();
        let open = open_loop_poles(&preset.model)?;
        let wa = presets::final_actor(sub);
        let closed = closed_loop_poles(&preset.model, Feedback::Actor(&wa))?;
        println!("{sub}");
        println!("  open loop   {}", open.polar_summary().join(", "));
        println!("  closed loop {}", closed.polar_summary().join(", "));
        println!(
            "  spectral radius {:.4} -> {:.4}",
            open.spectral_radius, closed.spectral_radius
        );
    }
    Ok(())
}
