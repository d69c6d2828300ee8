//! Value iteration on the action-dependent quadratic kernel
//! `S(Z, u) = ½ χᵀ M χ` with `χ = (Z; u)`.
//!
//! Policies come from the kernel alone (`u = −M_uu⁻¹ M_uZ Z`). The kernel
//! update is either the exact recursion from [`crate::riccati`] or a batch
//! least-squares fit over recorded transitions, which never touches `A` or `B`.

use nalgebra::SVD;
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::linalg::{check_len, frobenius_diff, half_quadratic, split_blocks, stack, symmetrize, Matrix, Vector};
use crate::plant::{CostWeights, PlantModel, StateVector};
use crate::riccati::{control_block_inverse, recursion_step, RiccatiKernel, RiccatiVariant};

/// Action-value kernel `M` with its iteration index.
#[derive(Debug, Clone, PartialEq)]
pub struct QKernel {
    pub m: Matrix,
    pub n: usize,
    pub iteration: usize,
}

impl QKernel {
    /// Wraps a symmetric `(n+m)×(n+m)` matrix.
    pub fn new(m: Matrix, n: usize) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() <= n {
            return Err(Error::dim(
                "M",
                format!("square with more than {n} rows"),
                format!("{}x{}", m.nrows(), m.ncols()),
            ));
        }
        Ok(Self {
            m: symmetrize(&m),
            n,
            iteration: 0,
        })
    }

    pub fn scaled_identity(n: usize, controls: usize, epsilon: f64) -> Self {
        Self {
            m: Matrix::identity(n + controls, n + controls) * epsilon,
            n,
            iteration: 0,
        }
    }

    pub fn controls(&self) -> usize {
        self.m.nrows() - self.n
    }

    /// `(M_ZZ, M_Zu, M_uZ, M_uu)`.
    pub fn blocks(&self) -> (Matrix, Matrix, Matrix, Matrix) {
        split_blocks(&self.m, self.n)
    }

    /// `½ χᵀ M χ`.
    pub fn value(&self, z: &Vector, u: &Vector) -> f64 {
        half_quadratic(&self.m, &stack(z, u))
    }

    /// `M_ZZ − M_Zu M_uu⁻¹ M_uZ`.
    pub fn schur_complement(&self) -> Result<Matrix> {
        let (zz, zu, uz, uu) = self.blocks();
        Ok(symmetrize(&(zz - zu * control_block_inverse(&uu)? * uz)))
    }
}

/// One observed transition `(Z_k, u_k, U_k, Z_{k+1}, u_{k+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSample {
    pub z: Vector,
    pub u: Vector,
    pub utility: f64,
    pub z_next: Vector,
    pub u_next: Vector,
}

/// Greedy gain `K = M_uu⁻¹ M_uZ` of the policy `u = −K Z`.
pub fn extract_policy(kernel: &QKernel) -> Result<Matrix> {
    let (_, _, uz, uu) = kernel.blocks();
    Ok(control_block_inverse(&uu)? * uz)
}

/// Exact kernel update through the Riccati recursion.
pub fn exact_kernel_update(
    model: &PlantModel,
    cost: &CostWeights,
    kernel: &QKernel,
    variant: RiccatiVariant,
) -> Result<QKernel> {
    let psi = RiccatiKernel {
        psi: kernel.m.clone(),
        n: kernel.n,
        iteration: kernel.iteration,
    };
    let next = recursion_step(model, cost, &psi, variant)?;
    Ok(QKernel {
        m: next.psi,
        n: kernel.n,
        iteration: next.iteration,
    })
}

/// Number of free entries of a symmetric `d×d` kernel.
pub fn parameter_count(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Regressor for `½ χᵀ M χ` over the upper-triangular entries of `M`.
fn quadratic_features(chi: &Vector) -> Vec<f64> {
    let d = chi.len();
    let mut out = Vec::with_capacity(parameter_count(d));
    for i in 0..d {
        out.push(0.5 * chi[i] * chi[i]);
        for j in i + 1..d {
            out.push(chi[i] * chi[j]);
        }
    }
    out
}

fn kernel_from_parameters(theta: &Vector, d: usize) -> Matrix {
    let mut m = Matrix::zeros(d, d);
    let mut idx = 0;
    for i in 0..d {
        m[(i, i)] = theta[idx];
        idx += 1;
        for j in i + 1..d {
            m[(i, j)] = theta[idx];
            m[(j, i)] = theta[idx];
            idx += 1;
        }
    }
    m
}

/// Least-squares fitter whose regression matrix depends only on the sampled
/// `χ_k`, so its factorization is reused across iterations.
pub struct LsqFitter {
    svd: SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
    dim: usize,
}

impl LsqFitter {
    pub fn new(samples: &[TransitionSample]) -> Result<Self> {
        let first = samples.first().ok_or(Error::Excitation { rank: 0, required: 1 })?;
        let (n, dim) = (first.z.len(), first.z.len() + first.u.len());
        let params = parameter_count(dim);
        let mut phi = Matrix::zeros(samples.len(), params);
        for (row, s) in samples.iter().enumerate() {
            check_len(&s.z, n, "sample Z")?;
            check_len(&s.u, dim - n, "sample u")?;
            for (col, f) in quadratic_features(&stack(&s.z, &s.u)).into_iter().enumerate() {
                phi[(row, col)] = f;
            }
        }
        let svd = phi.svd(true, true);
        let largest = svd.singular_values.max();
        let rank = svd
            .singular_values
            .iter()
            .filter(|&&s| s > largest * 1e-10 && s > 0.0)
            .count();
        if rank < params {
            return Err(Error::Excitation { rank, required: params });
        }
        Ok(Self { svd, n, dim })
    }

    /// Solves `½ χ_kᵀ M' χ_k = U_k + ½ χ_{k+1}ᵀ M χ_{k+1}` for `M'`.
    pub fn fit(&self, samples: &[TransitionSample], kernel: &QKernel) -> Result<QKernel> {
        let rhs = Vector::from_iterator(
            samples.len(),
            samples.iter().map(|s| s.utility + kernel.value(&s.z_next, &s.u_next)),
        );
        let theta = self
            .svd
            .solve(&rhs, 0.0)
            .map_err(|msg| Error::Config(format!("least-squares solve failed: {msg}")))?;
        Ok(QKernel {
            m: kernel_from_parameters(&theta, self.dim),
            n: self.n,
            iteration: kernel.iteration + 1,
        })
    }
}

/// One least-squares kernel update from a batch of transitions.
pub fn lsq_kernel_fit(samples: &[TransitionSample], kernel: &QKernel) -> Result<QKernel> {
    LsqFitter::new(samples)?.fit(samples, kernel)
}

/// Re-labels each sample's next control with the policy `u = −K Z`.
pub fn relabel_next_controls(samples: &mut [TransitionSample], gain: &Matrix) {
    for s in samples.iter_mut() {
        s.u_next = -(gain * &s.z_next);
    }
}

/// Black-box transition oracle used to gather data.
pub trait TransitionSource {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn transition(&mut self, z: &Vector, u: &Vector) -> Result<Vector>;
}

impl TransitionSource for PlantModel {
    fn state_dim(&self) -> usize {
        self.n()
    }

    fn control_dim(&self) -> usize {
        self.m()
    }

    fn transition(&mut self, z: &Vector, u: &Vector) -> Result<Vector> {
        Ok(self.step(&StateVector::new(z.clone()), u)?.z)
    }
}

/// Draws `count` transitions from states and controls uniform in
/// `[−amplitude, amplitude]`. The next control is left at zero.
pub fn collect_random_transitions<S: TransitionSource + ?Sized, R: Rng + ?Sized>(
    source: &mut S,
    cost: &CostWeights,
    count: usize,
    amplitude: f64,
    rng: &mut R,
) -> Result<Vec<TransitionSample>> {
    let dist = Uniform::new_inclusive(-amplitude, amplitude)
        .map_err(|e| Error::Config(format!("bad excitation amplitude {amplitude}: {e}")))?;
    let (n, m) = (source.state_dim(), source.control_dim());
    (0..count)
        .map(|_| {
            let z = Vector::from_iterator(n, (0..n).map(|_| dist.sample(rng)));
            let u = Vector::from_iterator(m, (0..m).map(|_| dist.sample(rng)));
            let z_next = source.transition(&z, &u)?;
            Ok(TransitionSample {
                utility: cost.utility(&z, &u),
                z,
                u,
                z_next,
                u_next: Vector::zeros(m),
            })
        })
        .collect()
}

/// Kernel evaluation step used by [`vi_solve`].
pub enum Evaluator<'a> {
    /// Riccati recursion with full model knowledge.
    Exact {
        model: &'a PlantModel,
        variant: RiccatiVariant,
    },
    /// Least-squares fit over a fixed batch of transitions.
    LeastSquares { samples: Vec<TransitionSample> },
}

#[derive(Debug, Clone, Copy)]
pub struct ViConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Scale of the `ε·I` starting kernel.
    pub initial_scale: f64,
}

impl Default for ViConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 200_000,
            initial_scale: 1e-3,
        }
    }
}

/// State of one completed iteration, handed to observers.
pub struct ViIterate<'a> {
    pub kernel: &'a QKernel,
    pub gain: &'a Matrix,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct ViSolution {
    pub kernel: QKernel,
    pub gain: Matrix,
    pub iterations: usize,
    /// `‖M_{ℓ+1} − M_ℓ‖_F` per iteration.
    pub history: Vec<f64>,
}

pub fn vi_solve(evaluator: Evaluator<'_>, cost: &CostWeights, config: &ViConfig) -> Result<ViSolution> {
    vi_solve_with(evaluator, cost, config, |_| {})
}

/// Value iteration with a per-iteration observer.
pub fn vi_solve_with(
    evaluator: Evaluator<'_>,
    cost: &CostWeights,
    config: &ViConfig,
    mut observe: impl FnMut(&ViIterate<'_>),
) -> Result<ViSolution> {
    if !(config.tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {}", config.tol)));
    }
    let (n, m) = (cost.q.nrows(), cost.r.nrows());
    let mut kernel = QKernel::scaled_identity(n, m, config.initial_scale);

    let (mut samples, fitter) = match &evaluator {
        Evaluator::Exact { .. } => (Vec::new(), None),
        Evaluator::LeastSquares { samples } => {
            let fitter = LsqFitter::new(samples)?;
            (samples.clone(), Some(fitter))
        }
    };

    let mut history = Vec::new();
    for _ in 0..config.max_iter {
        let next = match (&evaluator, &fitter) {
            (Evaluator::Exact { model, variant }, _) => exact_kernel_update(model, cost, &kernel, *variant)?,
            (Evaluator::LeastSquares { .. }, Some(fitter)) => {
                relabel_next_controls(&mut samples, &extract_policy(&kernel)?);
                fitter.fit(&samples, &kernel)?
            }
            (Evaluator::LeastSquares { .. }, None) => unreachable!("fitter built above"),
        };
        let residual = frobenius_diff(&next.m, &kernel.m);
        history.push(residual);
        kernel = next;
        let gain = extract_policy(&kernel)?;
        observe(&ViIterate {
            kernel: &kernel,
            gain: &gain,
            residual,
        });
        if residual < config.tol {
            return Ok(ViSolution {
                iterations: kernel.iteration,
                kernel,
                gain,
                history,
            });
        }
    }
    Err(Error::NonConvergence {
        solver: "vi_solve",
        iterations: config.max_iter,
        residual: history.last().copied().unwrap_or(f64::INFINITY),
    })
}

/// Mean `|½χᵀMχ − U − ½χ'ᵀMχ'|` over the given `(Z, u)` pairs, where `χ'`
/// uses the next state from `model` and the kernel's own policy.
pub fn bellman_residual(
    model: &PlantModel,
    cost: &CostWeights,
    kernel: &QKernel,
    points: &[(Vector, Vector)],
) -> Result<f64> {
    let gain = extract_policy(kernel)?;
    let mut total = 0.0;
    for (z, u) in points {
        let z_next = model.step(&StateVector::new(z.clone()), u)?.z;
        let u_next = -(&gain * &z_next);
        total += (kernel.value(z, u) - cost.utility(z, u) - kernel.value(&z_next, &u_next)).abs();
    }
    Ok(total / points.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar() -> (PlantModel, CostWeights) {
        (
            PlantModel::new(Matrix::from_element(1, 1, 1.0), Matrix::from_element(1, 1, 1.0)).unwrap(),
            CostWeights::diagonal(&[1.0], &[1.0]),
        )
    }

    #[test]
    fn policy_from_blocks() {
        let k = QKernel::new(Matrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 7.0]), 1).unwrap();
        assert_eq!(extract_policy(&k).unwrap()[(0, 0)], 0.0);
        let k = QKernel::new(Matrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]), 1).unwrap();
        assert_eq!(extract_policy(&k).unwrap()[(0, 0)], 0.5);
        let k = QKernel::new(Matrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, -2.0]), 1).unwrap();
        assert!(matches!(extract_policy(&k), Err(Error::KernelDegenerate { .. })));
    }

    #[test]
    fn feature_round_trip() {
        let m = Matrix::from_row_slice(3, 3, &[2.0, 0.3, -1.0, 0.3, 1.5, 0.7, -1.0, 0.7, 4.0]);
        let chi = Vector::from_vec(vec![0.4, -1.2, 0.9]);
        let mut theta = Vec::new();
        for i in 0..3 {
            for j in i..3 {
                theta.push(m[(i, j)]);
            }
        }
        let dot: f64 = quadratic_features(&chi).iter().zip(&theta).map(|(f, t)| f * t).sum();
        assert!((dot - half_quadratic(&m, &chi)).abs() < 1e-14);
        assert_eq!(kernel_from_parameters(&Vector::from_vec(theta), 3), m);
    }

    #[test]
    fn fit_recovers_known_quadratic() {
        let target = Matrix::from_row_slice(3, 3, &[2.0, 0.3, -1.0, 0.3, 1.5, 0.7, -1.0, 0.7, 4.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<TransitionSample> = (0..20)
            .map(|_| {
                let z = Vector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
                let u = Vector::from_fn(1, |_, _| rng.random_range(-1.0..1.0));
                TransitionSample {
                    utility: half_quadratic(&target, &stack(&z, &u)),
                    z,
                    u,
                    z_next: Vector::zeros(2),
                    u_next: Vector::zeros(1),
                }
            })
            .collect();
        let fitted = lsq_kernel_fit(&samples, &QKernel::scaled_identity(2, 1, 0.0)).unwrap();
        assert!((fitted.m - target).amax() < 1e-8);
    }

    #[test]
    fn first_fit_from_zero_kernel_is_cost() {
        let (mut model, cost) = scalar();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let samples = collect_random_transitions(&mut model, &cost, 8, 1.0, &mut rng).unwrap();
        let fitted = lsq_kernel_fit(&samples, &QKernel::scaled_identity(1, 1, 0.0)).unwrap();
        assert!((fitted.m - Matrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn too_few_samples_is_an_excitation_error() {
        let (mut model, cost) = scalar();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let samples = collect_random_transitions(&mut model, &cost, 2, 1.0, &mut rng).unwrap();
        assert!(matches!(
            lsq_kernel_fit(&samples, &QKernel::scaled_identity(1, 1, 1.0)),
            Err(Error::Excitation { rank: 2, required: 3 })
        ));
        let mut zero_u = samples.clone();
        zero_u.extend(samples.iter().cloned());
        for s in zero_u.iter_mut() {
            s.u[0] = 0.0;
        }
        assert!(matches!(
            lsq_kernel_fit(&zero_u, &QKernel::scaled_identity(1, 1, 1.0)),
            Err(Error::Excitation { .. })
        ));
    }

    #[test]
    fn exact_vi_on_scalar_plant() {
        let (model, cost) = scalar();
        let evaluator = Evaluator::Exact {
            model: &model,
            variant: RiccatiVariant::Standard,
        };
        let sol = vi_solve(evaluator, &cost, &ViConfig::default()).unwrap();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((sol.gain[(0, 0)] - golden / (1.0 + golden)).abs() < 1e-10);
        assert_eq!(sol.history.len(), sol.iterations);
    }

    #[test]
    fn lsq_vi_matches_exact_on_scalar_plant() {
        let (mut model, cost) = scalar();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples = collect_random_transitions(&mut model, &cost, 12, 1.0, &mut rng).unwrap();
        let config = ViConfig {
            tol: 1e-11,
            ..ViConfig::default()
        };
        let sol = vi_solve(Evaluator::LeastSquares { samples }, &cost, &config).unwrap();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((sol.gain[(0, 0)] - golden / (1.0 + golden)).abs() < 1e-8);
    }

    #[test]
    fn deadbeat_plant_converges_immediately() {
        let model = PlantModel::new(Matrix::zeros(2, 2), Matrix::from_column_slice(2, 1, &[1.0, 1.0])).unwrap();
        let cost = CostWeights::diagonal(&[1.0, 2.0], &[1.0]);
        let evaluator = Evaluator::Exact {
            model: &model,
            variant: RiccatiVariant::Standard,
        };
        let sol = vi_solve(evaluator, &cost, &ViConfig::default()).unwrap();
        assert!(sol.iterations <= 3);
        assert_eq!(sol.gain, Matrix::zeros(1, 2));
    }

    #[test]
    fn fixed_point_has_zero_bellman_residual() {
        let (model, cost) = scalar();
        let evaluator = Evaluator::Exact {
            model: &model,
            variant: RiccatiVariant::Standard,
        };
        let sol = vi_solve(evaluator, &cost, &ViConfig::default()).unwrap();
        let points: Vec<_> = (0..10)
            .map(|i| {
                (
                    Vector::from_element(1, i as f64 * 0.3 - 1.0),
                    Vector::from_element(1, 0.5 - i as f64 * 0.1),
                )
            })
            .collect();
        assert!(bellman_residual(&model, &cost, &sol.kernel, &points).unwrap() < 1e-10);
    }
}
