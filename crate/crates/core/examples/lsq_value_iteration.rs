//! Model-free value iteration: the Q-kernel is fitted by least squares on
//! random transitions instead of being computed from `A` and `B`.

use flexwing_rl::harness::presets::Subsystem;
use flexwing_rl::qkernel::{collect_random_transitions, parameter_count, vi_solve, Evaluator, ViConfig};
use flexwing_rl::riccati::RiccatiVariant;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> flexwing_rl::Result<()> {
    let p = Subsystem::Longitudinal.preset();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let count = 4 * parameter_count(p.model.n() + p.model.m());
    // The plant is only used as a black box that maps (Z, u) to Z'.
    let samples = collect_random_transitions(&mut p.model.clone(), &p.cost, count, 1.0, &mut rng)?;

    let config = ViConfig {
        tol: 1e-10,
        ..ViConfig::default()
    };
    let lsq = vi_solve(Evaluator::LeastSquares { samples }, &p.cost, &config)?;
    let exact = vi_solve(
        Evaluator::Exact {
            model: &p.model,
            variant: RiccatiVariant::Standard,
        },
        &p.cost,
        &ViConfig::default(),
    )?;
    println!("{count} transitions, {} iterations", lsq.iterations);
    println!("least squares K = {:.6?}", lsq.gain.as_slice());
    println!("exact         K = {:.6?}", exact.gain.as_slice());
    println!("max difference  = {:.2e}", (&lsq.gain - &exact.gain).amax());
    Ok(())
}
