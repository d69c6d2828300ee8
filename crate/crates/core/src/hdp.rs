//! Model-based HDP value iteration on a quadratic state value `S(Z) = ½ ZᵀPZ`.

use crate::error::{Error, Result};
use crate::linalg::{check_shape, frobenius_diff, inverse, symmetrize, Matrix};
use crate::plant::{CostWeights, PlantModel};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 200_000;

/// Kernel `P` of the state value together with its iteration index.
#[derive(Debug, Clone, PartialEq)]
pub struct StateValueKernel {
    pub p: Matrix,
    pub iteration: usize,
}

impl StateValueKernel {
    pub fn zeros(n: usize) -> Self {
        Self {
            p: Matrix::zeros(n, n),
            iteration: 0,
        }
    }
}

/// Converged HDP result.
#[derive(Debug, Clone)]
pub struct HdpSolution {
    pub kernel: StateValueKernel,
    /// Gain of `u = −K Z`.
    pub gain: Matrix,
    pub iterations: usize,
    pub residual: f64,
}

fn check_problem(model: &PlantModel, cost: &CostWeights, p: &Matrix) -> Result<()> {
    cost.check_against(model)?;
    check_shape(p, model.n(), model.n(), "P")
}

/// Greedy gain `K = (R + BᵀPB)⁻¹ BᵀPA`.
pub fn hdp_policy(model: &PlantModel, cost: &CostWeights, p: &StateValueKernel) -> Result<Matrix> {
    check_problem(model, cost, &p.p)?;
    let (a, b) = (model.a(), model.b());
    let bt_p = b.transpose() * &p.p;
    let inv = inverse(&(&cost.r + &bt_p * b), "R + BᵀPB")?;
    Ok(inv * bt_p * a)
}

/// `P' = Q + KᵀRK + (A − BK)ᵀ P (A − BK)`, symmetrized.
pub fn hdp_value_update(
    model: &PlantModel,
    cost: &CostWeights,
    p: &StateValueKernel,
    gain: &Matrix,
) -> Result<StateValueKernel> {
    check_problem(model, cost, &p.p)?;
    check_shape(gain, model.m(), model.n(), "K")?;
    let closed = model.a() - model.b() * gain;
    let next = &cost.q + gain.transpose() * &cost.r * gain + closed.transpose() * &p.p * &closed;
    Ok(StateValueKernel {
        p: symmetrize(&next),
        iteration: p.iteration + 1,
    })
}

/// Alternates policy and value updates from `P = 0` until the Frobenius
/// change drops below `tol`.
pub fn hdp_solve(model: &PlantModel, cost: &CostWeights, tol: f64, max_iter: usize) -> Result<HdpSolution> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let mut kernel = StateValueKernel::zeros(model.n());
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let gain = hdp_policy(model, cost, &kernel)?;
        let next = hdp_value_update(model, cost, &kernel, &gain)?;
        residual = frobenius_diff(&next.p, &kernel.p);
        kernel = next;
        if residual < tol {
            let gain = hdp_policy(model, cost, &kernel)?;
            return Ok(HdpSolution {
                iterations: kernel.iteration,
                kernel,
                gain,
                residual,
            });
        }
    }
    Err(Error::NonConvergence {
        solver: "hdp_solve",
        iterations: max_iter,
        residual,
    })
}
