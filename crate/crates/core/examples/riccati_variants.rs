//! Standard and literal recursion variants next to the DARE gain.

use flexwing_rl::harness::presets::Subsystem;
use flexwing_rl::riccati::{dare_solve, riccati_solve, RiccatiVariant};
use flexwing_rl::spectral::{closed_loop_poles, Feedback};

fn main() -> flexwing_rl::Result<()> {
    for sub in Subsystem::ALL {
        let p = sub.preset();
        let dare = dare_solve(&p.model, &p.cost, 1e-12, 200_000)?;
        println!("{sub}: dare K = {:.6?}", dare.gain.as_slice());
        for variant in [RiccatiVariant::Standard, RiccatiVariant::Literal] {
            let sol = riccati_solve(&p.model, &p.cost, variant, 1e-12, 200_000)?;
            let poles = closed_loop_poles(&p.model, Feedback::Gain(&sol.gain))?;
            println!(
                "  {variant:<14} {} iterations, max |K - K_dare| = {:.2e}, radius {:.4}",
                sol.iterations,
                (&sol.gain - &dare.gain).amax(),
                poles.spectral_radius
            );
        }
    }
    Ok(())
}
