//! Riccati recursion over the joint state-control kernel `Ψ` and an
//! independent DARE fixed-point solver used as an oracle.
//!
//! For a kernel with blocks `(Ψ_ZZ, Ψ_Zu, Ψ_uZ, Ψ_uu)` the recursion uses the
//! gain `Ψ̂ = Ψ_uu⁻¹ Ψ_uZ` and the Schur complement
//! `Ψ̃ = Ψ_ZZ − Ψ_Zu Ψ_uu⁻¹ Ψ_uZ`, and produces
//!
//! ```text
//! standard:       [ Q + AᵀΨ̃A      AᵀΨ̃B     ]
//!                 [ BᵀΨ̃A          R + BᵀΨ̃B ]
//!
//! literal:        [ Q + Ψ̂ᵀRΨ̂ + AᵀΨ̃A   AᵀΨ̃B ]
//!                 [ BᵀΨ̃A               BᵀΨ̃B ]
//! ```

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{
    check_shape, frobenius_diff, inverse, join_blocks, min_sym_eigenvalue, split_blocks, symmetrize, Matrix,
};
use crate::plant::{CostWeights, PlantModel};
use crate::spectral::{eigenvalues, PoleSet};

/// Scale of the `ε·I` starting kernel.
pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiccatiVariant {
    /// Classical action-value kernel; its fixed point is the LQR solution.
    #[default]
    Standard,
    /// `Ψ̂ᵀRΨ̂` in the state block and no `R` in the control block.
    Literal,
}

impl fmt::Display for RiccatiVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RiccatiVariant::Standard => "standard",
            RiccatiVariant::Literal => "literal",
        })
    }
}

impl FromStr for RiccatiVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(RiccatiVariant::Standard),
            "literal" => Ok(RiccatiVariant::Literal),
            other => Err(Error::Config(format!("unknown riccati variant `{other}`"))),
        }
    }
}

/// Joint kernel `Ψ` of size `(n+m)×(n+m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiKernel {
    pub psi: Matrix,
    pub n: usize,
    pub iteration: usize,
}

impl RiccatiKernel {
    pub fn new(psi: Matrix, n: usize) -> Result<Self> {
        if psi.nrows() != psi.ncols() || psi.nrows() <= n {
            return Err(Error::dim(
                "Ψ",
                format!("square with more than {n} rows"),
                format!("{}x{}", psi.nrows(), psi.ncols()),
            ));
        }
        Ok(Self { psi, n, iteration: 0 })
    }

    /// `ε·I` of size `(n+m)`.
    pub fn scaled_identity(n: usize, m: usize, epsilon: f64) -> Self {
        Self {
            psi: Matrix::identity(n + m, n + m) * epsilon,
            n,
            iteration: 0,
        }
    }

    pub fn m(&self) -> usize {
        self.psi.nrows() - self.n
    }

    pub fn blocks(&self) -> (Matrix, Matrix, Matrix, Matrix) {
        split_blocks(&self.psi, self.n)
    }

    /// `Ψ̂ = Ψ_uu⁻¹ Ψ_uZ`; fails when `Ψ_uu` is not positive definite.
    pub fn gain(&self) -> Result<Matrix> {
        let (_, _, uz, uu) = self.blocks();
        Ok(control_block_inverse(&uu)? * uz)
    }

    /// Schur complement `Ψ̃ = Ψ_ZZ − Ψ_Zu Ψ_uu⁻¹ Ψ_uZ`.
    pub fn effective_state_kernel(&self) -> Result<Matrix> {
        let (zz, zu, uz, uu) = self.blocks();
        Ok(symmetrize(&(zz - zu * control_block_inverse(&uu)? * uz)))
    }
}

pub(crate) fn control_block_inverse(uu: &Matrix) -> Result<Matrix> {
    let min_eigenvalue = min_sym_eigenvalue(uu);
    if !(min_eigenvalue > 0.0) {
        return Err(Error::KernelDegenerate { min_eigenvalue });
    }
    inverse(uu, "control block").map_err(|_| Error::KernelDegenerate { min_eigenvalue })
}

/// One application of the kernel recursion.
pub fn recursion_step(
    model: &PlantModel,
    cost: &CostWeights,
    kernel: &RiccatiKernel,
    variant: RiccatiVariant,
) -> Result<RiccatiKernel> {
    cost.check_against(model)?;
    let (n, m) = (model.n(), model.m());
    check_shape(&kernel.psi, n + m, n + m, "Ψ")?;
    let (a, b) = (model.a(), model.b());
    let hat = kernel.gain()?;
    let tilde = kernel.effective_state_kernel()?;

    let at_tilde = a.transpose() * &tilde;
    let zu = &at_tilde * b;
    let uz = zu.transpose();
    let (zz, uu) = match variant {
        RiccatiVariant::Standard => (&cost.q + &at_tilde * a, &cost.r + b.transpose() * &tilde * b),
        RiccatiVariant::Literal => (
            &cost.q + hat.transpose() * &cost.r * &hat + &at_tilde * a,
            b.transpose() * &tilde * b,
        ),
    };
    Ok(RiccatiKernel {
        psi: symmetrize(&join_blocks(&zz, &zu, &uz, &uu)),
        n,
        iteration: kernel.iteration + 1,
    })
}

#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub kernel: RiccatiKernel,
    /// `Ψ̂` at the fixed point; the policy is `u = −Ψ̂ Z`.
    pub gain: Matrix,
    pub iterations: usize,
    pub residual: f64,
}

/// Iterates [`recursion_step`] from `ε·I` until the Frobenius change is below `tol`.
pub fn riccati_solve(
    model: &PlantModel,
    cost: &CostWeights,
    variant: RiccatiVariant,
    tol: f64,
    max_iter: usize,
) -> Result<RiccatiSolution> {
    let start = RiccatiKernel::scaled_identity(model.n(), model.m(), DEFAULT_EPSILON);
    riccati_solve_from(model, cost, start, variant, tol, max_iter)
}

pub fn riccati_solve_from(
    model: &PlantModel,
    cost: &CostWeights,
    start: RiccatiKernel,
    variant: RiccatiVariant,
    tol: f64,
    max_iter: usize,
) -> Result<RiccatiSolution> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let mut kernel = start;
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let next = recursion_step(model, cost, &kernel, variant)?;
        residual = frobenius_diff(&next.psi, &kernel.psi);
        kernel = next;
        if residual < tol {
            return Ok(RiccatiSolution {
                gain: kernel.gain()?,
                iterations: kernel.iteration,
                kernel,
                residual,
            });
        }
    }
    Err(Error::NonConvergence {
        solver: "riccati_solve",
        iterations: max_iter,
        residual,
    })
}

/// Solution of the discrete algebraic Riccati equation.
#[derive(Debug, Clone)]
pub struct DareSolution {
    pub p: Matrix,
    /// LQR gain `K = (R + BᵀPB)⁻¹ BᵀPA`.
    pub gain: Matrix,
    pub iterations: usize,
    pub closed_loop: PoleSet,
}

/// Fixed-point iteration `P ← Q + AᵀPA − AᵀPB (R + BᵀPB)⁻¹ BᵀPA` from
/// `P = Q`. Fails if the resulting closed loop `A − BK` is not stable.
pub fn dare_solve(model: &PlantModel, cost: &CostWeights, tol: f64, max_iter: usize) -> Result<DareSolution> {
    cost.check_against(model)?;
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let (a, b) = (model.a(), model.b());
    let (at, bt) = (a.transpose(), b.transpose());

    let lqr_gain = |p: &Matrix| -> Result<Matrix> {
        let lhs = &cost.r + &bt * p * b;
        lhs.lu().solve(&(&bt * p * a)).ok_or_else(|| Error::Singular {
            context: "R + BᵀPB".into(),
            condition: f64::INFINITY,
        })
    };

    let mut p = cost.q.clone();
    let mut residual = f64::INFINITY;
    for iteration in 1..=max_iter {
        let k = lqr_gain(&p)?;
        let next = &cost.q + &at * &p * a - &at * &p * b * &k;
        let next = (&next + next.transpose()) * 0.5;
        residual = (&next - &p).norm();
        p = next;
        if residual < tol {
            let gain = lqr_gain(&p)?;
            let closed_loop = eigenvalues(&(a - b * &gain))?;
            if !closed_loop.stable {
                return Err(Error::NonConvergence {
                    solver: "dare_solve (closed loop not stabilized)",
                    iterations: iteration,
                    residual: closed_loop.spectral_radius,
                });
            }
            return Ok(DareSolution {
                p,
                gain,
                iterations: iteration,
                closed_loop,
            });
        }
    }
    Err(Error::NonConvergence {
        solver: "dare_solve",
        iterations: max_iter,
        residual,
    })
}

/// Action-value kernel induced by a state kernel `P`:
/// `[Q + AᵀPA, AᵀPB; BᵀPA, R + BᵀPB]`.
pub fn action_value_kernel(model: &PlantModel, cost: &CostWeights, p: &Matrix) -> Result<Matrix> {
    cost.check_against(model)?;
    check_shape(p, model.n(), model.n(), "P")?;
    let (a, b) = (model.a(), model.b());
    let zu = a.transpose() * p * b;
    Ok(join_blocks(
        &(&cost.q + a.transpose() * p * a),
        &zu,
        &zu.transpose(),
        &(&cost.r + b.transpose() * p * b),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN: f64 = 1.618_033_988_749_895;

    fn scalar(a: f64, b: f64) -> (PlantModel, CostWeights) {
        (
            PlantModel::new(Matrix::from_element(1, 1, a), Matrix::from_element(1, 1, b)).unwrap(),
            CostWeights::diagonal(&[1.0], &[1.0]),
        )
    }

    #[test]
    fn deadbeat_plant_one_step() {
        let model = PlantModel::new(Matrix::zeros(2, 2), Matrix::zeros(2, 1)).unwrap();
        let cost = CostWeights::diagonal(&[3.0, 4.0], &[0.5]);
        let start = RiccatiKernel::scaled_identity(2, 1, 1e-3);

        let literal = recursion_step(&model, &cost, &start, RiccatiVariant::Literal).unwrap();
        let mut expected = Matrix::zeros(3, 3);
        expected[(0, 0)] = 3.0;
        expected[(1, 1)] = 4.0;
        assert_eq!(literal.psi, expected);

        let standard = recursion_step(&model, &cost, &start, RiccatiVariant::Standard).unwrap();
        expected[(2, 2)] = 0.5;
        assert_eq!(standard.psi, expected);

        // With B ≠ 0 the control block picks up Bᵀ(εI)B.
        let model = PlantModel::new(Matrix::zeros(2, 2), Matrix::from_column_slice(2, 1, &[1.0, 2.0])).unwrap();
        let literal = recursion_step(&model, &cost, &start, RiccatiVariant::Literal).unwrap();
        assert!((literal.psi[(2, 2)] - 5e-3).abs() < 1e-15);
        assert_eq!(literal.psi.view((0, 0), (2, 2)), cost.q.view((0, 0), (2, 2)));
    }

    #[test]
    fn scalar_standard_fixed_point() {
        let (model, cost) = scalar(1.0, 1.0);
        let sol = riccati_solve(&model, &cost, RiccatiVariant::Standard, 1e-13, 10_000).unwrap();
        assert!((sol.kernel.effective_state_kernel().unwrap()[(0, 0)] - GOLDEN).abs() < 1e-10);
        assert!((sol.gain[(0, 0)] - GOLDEN / (1.0 + GOLDEN)).abs() < 1e-10);
    }

    #[test]
    fn scalar_literal_differs_from_lqr() {
        let (model, cost) = scalar(1.0, 1.0);
        let sol = riccati_solve(&model, &cost, RiccatiVariant::Literal, 1e-13, 10_000).unwrap();
        assert!((sol.gain[(0, 0)] - 1.0).abs() < 1e-9);
        assert!((sol.kernel.effective_state_kernel().unwrap()[(0, 0)] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn dare_scalar_cases() {
        let (model, cost) = scalar(1.0, 1.0);
        let sol = dare_solve(&model, &cost, 1e-13, 10_000).unwrap();
        assert!((sol.p[(0, 0)] - GOLDEN).abs() < 1e-10);

        let (model, cost) = scalar(0.5, 0.0);
        let sol = dare_solve(&model, &cost, 1e-13, 10_000).unwrap();
        assert!((sol.p[(0, 0)] - 4.0 / 3.0).abs() < 1e-12);

        let (model, cost) = scalar(0.0, 1.0);
        let sol = dare_solve(&model, &cost, 1e-13, 10).unwrap();
        assert_eq!(sol.p[(0, 0)], 1.0);
        assert_eq!(sol.iterations, 1);
    }

    #[test]
    fn dare_rejects_unstabilizable_plant() {
        let (model, cost) = scalar(1.5, 0.0);
        assert!(dare_solve(&model, &cost, 1e-10, 100_000).is_err());
    }

    #[test]
    fn degenerate_control_block() {
        let kernel = RiccatiKernel::new(Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]), 1).unwrap();
        assert!(matches!(kernel.gain(), Err(Error::KernelDegenerate { .. })));
    }

    #[test]
    fn variant_parsing_round_trips() {
        for v in [RiccatiVariant::Standard, RiccatiVariant::Literal] {
            assert_eq!(v.to_string().parse::<RiccatiVariant>().unwrap(), v);
        }
        assert!("other".parse::<RiccatiVariant>().is_err());
    }

    #[test]
    fn action_value_kernel_policy_is_lqr_gain() {
        let (model, cost) = scalar(1.0, 1.0);
        let dare = dare_solve(&model, &cost, 1e-13, 10_000).unwrap();
        let kernel = RiccatiKernel::new(action_value_kernel(&model, &cost, &dare.p).unwrap(), 1).unwrap();
        assert!((kernel.gain().unwrap() - &dare.gain).amax() < 1e-12);
    }
}
