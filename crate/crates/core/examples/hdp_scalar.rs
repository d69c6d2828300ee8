//! HDP value iteration on the scalar plant `x' = x + u` with unit weights.
//! The gain converges to `(√5 − 1) / 2`.

use flexwing_rl::hdp::{hdp_policy, hdp_solve, hdp_value_update, StateValueKernel};
use flexwing_rl::plant::{CostWeights, PlantModel};
use flexwing_rl::Matrix;

fn main() -> flexwing_rl::Result<()> {
    let model = PlantModel::new(Matrix::from_element(1, 1, 1.0), Matrix::from_element(1, 1, 1.0))?;
    let cost = CostWeights::diagonal(&[1.0], &[1.0]);

    let mut kernel = StateValueKernel::zeros(1);
    for _ in 0..6 {
        let gain = hdp_policy(&model, &cost, &kernel)?;
        kernel = hdp_value_update(&model, &cost, &kernel, &gain)?;
        println!(
            "iteration {:>2}: P = {:.6}, K = {:.6}",
            kernel.iteration,
            kernel.p[(0, 0)],
            gain[(0, 0)]
        );
    }

    let solution = hdp_solve(&model, &cost, 1e-12, 10_000)?;
    println!(
        "converged after {} iterations: K = {:.9} (closed form {:.9})",
        solution.iterations,
        solution.gain[(0, 0)],
        (5f64.sqrt() - 1.0) / 2.0
    );
    Ok(())
}
