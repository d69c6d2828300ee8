//! Online actor-critic learner.
//!
//! The actor is linear, `û = W_aᵀ Z`, and the critic is quadratic in
//! `χ = (Z; u)`, `Ŝ = ½ χᵀ W_c χ`. Both are trained by gradient steps on
//! their targets while the controller drives the plant. The learner only
//! sees observed states, controls and utilities; the plant and the optional
//! Riccati assist gain are handled by the training loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_len, check_shape, half_quadratic, split_blocks, stack, symmetrize, Matrix, Vector};
use crate::plant::{
    guard_finite, CostWeights, DisturbanceRealization, DisturbanceSpec, PlantModel, Sample, StateVector, Trajectory,
};
use crate::riccati::control_block_inverse;
use crate::spectral::{closed_loop_poles, Feedback, PoleSet};

/// Actor and critic weights with their learning rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCriticWeights {
    /// `n×m`.
    pub wa: Matrix,
    /// `(n+m)×(n+m)`, kept symmetric.
    pub wc: Matrix,
    pub eta_a: f64,
    pub eta_c: f64,
}

impl ActorCriticWeights {
    pub fn new(wa: Matrix, wc: Matrix, eta_a: f64, eta_c: f64) -> Result<Self> {
        for (name, eta) in [("eta_a", eta_a), ("eta_c", eta_c)] {
            if !(eta > 0.0 && eta < 1.0) {
                return Err(Error::Config(format!(
                    "{name} must lie strictly between 0 and 1, got {eta}"
                )));
            }
        }
        Self::frozen(wa, wc).map(|w| Self { eta_a, eta_c, ..w })
    }

    /// Weights with zero learning rates; training leaves them unchanged.
    pub fn frozen(wa: Matrix, wc: Matrix) -> Result<Self> {
        let d = wa.nrows() + wa.ncols();
        check_shape(&wc, d, d, "W_c")?;
        Ok(Self {
            wa,
            wc: symmetrize(&wc),
            eta_a: 0.0,
            eta_c: 0.0,
        })
    }

    pub fn n(&self) -> usize {
        self.wa.nrows()
    }

    pub fn m(&self) -> usize {
        self.wa.ncols()
    }
}

/// `û = W_aᵀ Z`.
pub fn actor_eval(wa: &Matrix, z: &Vector) -> Result<Vector> {
    check_len(z, wa.nrows(), "Z")?;
    Ok(wa.tr_mul(z))
}

/// `Ŝ = ½ χᵀ W_c χ` with `χ = (Z; u)`.
pub fn critic_eval(wc: &Matrix, z: &Vector, u: &Vector) -> Result<f64> {
    check_shape(wc, z.len() + u.len(), z.len() + u.len(), "W_c")?;
    Ok(half_quadratic(wc, &stack(z, u)))
}

/// Greedy control of the critic, `−W_c,uu⁻¹ W_c,uZ Z`.
pub fn actor_target(wc: &Matrix, z: &Vector) -> Result<Vector> {
    let n = z.len();
    if wc.nrows() <= n || wc.ncols() != wc.nrows() {
        return Err(Error::dim(
            "W_c",
            format!("square with more than {n} rows"),
            format!("{}x{}", wc.nrows(), wc.ncols()),
        ));
    }
    let (_, _, uz, uu) = split_blocks(wc, n);
    Ok(-(control_block_inverse(&uu)? * uz * z))
}

/// `W_a' = W_a − η Z (û − u_target)ᵀ`.
pub fn actor_update(wa: &Matrix, eta: f64, u_hat: &Vector, u_target: &Vector, z: &Vector) -> Result<Matrix> {
    check_len(z, wa.nrows(), "Z")?;
    check_len(u_hat, wa.ncols(), "u_hat")?;
    check_len(u_target, wa.ncols(), "u_target")?;
    Ok(wa - z * (u_hat - u_target).transpose() * eta)
}

/// `U(Z_k, û_k) + Ŝ(Z_{k+1}, û_{k+1})`.
pub fn critic_target(
    cost: &CostWeights,
    z: &Vector,
    u: &Vector,
    wc: &Matrix,
    z_next: &Vector,
    u_next: &Vector,
) -> Result<f64> {
    Ok(cost.utility(z, u) + critic_eval(wc, z_next, u_next)?)
}

/// `W_c' = W_c − η (Ŝ − S_target) χ χᵀ`, symmetrized.
pub fn critic_update(wc: &Matrix, eta: f64, s_hat: f64, s_target: f64, chi: &Vector) -> Result<Matrix> {
    check_shape(wc, chi.len(), chi.len(), "W_c")?;
    Ok(symmetrize(&(wc - chi * chi.transpose() * (eta * (s_hat - s_target)))))
}

/// What the loop does once the critic has settled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OnConvergence {
    /// Stop learning and probing, keep simulating to the horizon.
    #[default]
    Freeze,
    /// End the run.
    Stop,
    /// Keep learning regardless.
    Continue,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub steps: usize,
    pub dt: f64,
    /// Half-width of the uniform probing noise added to the actor output.
    pub probe_amplitude: f64,
    pub disturbance: Option<DisturbanceSpec>,
    /// Riccati assist `u^R = −K Z`, computed outside the learner.
    pub riccati_gain: Option<Matrix>,
    /// Scale applied to the assist before saturation.
    pub riccati_weight: f64,
    /// Normalizes each gradient step so its effective rate never exceeds one:
    /// the critic rate is divided by `max(1, η_c ½‖χ‖⁴)` and the actor rate by
    /// `max(1, η_a ‖Z‖²)`.
    pub step_guard: bool,
    pub convergence_window: usize,
    pub convergence_tol: f64,
    pub on_convergence: OnConvergence,
    /// Seed of the probing-noise stream.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 6000,
            dt: 0.01,
            probe_amplitude: 0.01,
            disturbance: None,
            riccati_gain: None,
            riccati_weight: 1.0,
            step_guard: true,
            convergence_window: 100,
            convergence_tol: 1e-7,
            on_convergence: OnConvergence::Freeze,
            seed: 0,
        }
    }
}

/// Weights after step `k` (`k = 0` holds the initial weights).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSnapshot {
    pub k: usize,
    pub wa: Matrix,
    pub wc: Matrix,
}

/// Applied control split into its two parts.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSplit {
    pub riccati: Vector,
    pub model_free: Vector,
}

#[derive(Debug, Clone)]
pub struct TrainingReport {
    /// Step at which the critic-change window first fell below tolerance.
    pub converged_at: Option<usize>,
    /// 1 % settling time of `‖Z‖₂`.
    pub settling_time: Option<f64>,
    pub final_poles: PoleSet,
    /// Steps at which some applied control channel sat on its bound.
    pub saturation_events: usize,
    pub skipped_actor_updates: usize,
    /// `|Ŝ − S_target|` for every critic update.
    pub critic_errors: Vec<f64>,
    /// Largest per-entry weight change over the final 5 % of steps.
    pub tail_weight_change: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub weights: Vec<WeightSnapshot>,
    pub trajectory: Trajectory,
    pub controls: Vec<ControlSplit>,
    pub final_weights: ActorCriticWeights,
    pub report: TrainingReport,
}

/// Runs the learner online against `model` from `z0`.
///
/// Each step observes `Z_k` (plus `ΔZ_k` when disturbed), applies
/// `sat(û_k + probe)` together with the optional saturated Riccati assist,
/// and then, from the observed transition to `Z_{k+1}`, moves the actor toward
/// the critic's greedy control and the critic toward its bootstrap target.
pub fn train_online(
    model: &PlantModel,
    cost: &CostWeights,
    weights: &ActorCriticWeights,
    z0: &Vector,
    config: &TrainConfig,
) -> Result<TrainingRun> {
    if config.steps == 0 {
        return Err(Error::Config("training needs at least one step".into()));
    }
    cost.check_against(model)?;
    check_len(z0, model.n(), "Z0")?;
    check_shape(&weights.wa, model.n(), model.m(), "W_a")?;
    if let Some(k) = &config.riccati_gain {
        check_shape(k, model.m(), model.n(), "riccati gain")?;
    }
    if let Some(spec) = &config.disturbance {
        spec.validate()?;
    }

    let mut w = weights.clone();
    let mut probe_rng = ChaCha8Rng::seed_from_u64(config.seed);
    probe_rng.set_stream(1);
    let mut dist_rng = config.disturbance.as_ref().map(DisturbanceSpec::rng);
    let zero_u = Vector::zeros(model.m());

    let mut state = StateVector::new(z0.clone());
    let mut samples = Vec::with_capacity(config.steps);
    let mut log = config.disturbance.as_ref().map(|_| Vec::with_capacity(config.steps));
    let mut controls = Vec::with_capacity(config.steps);
    let mut snapshots = vec![WeightSnapshot {
        k: 0,
        wa: w.wa.clone(),
        wc: w.wc.clone(),
    }];
    let mut critic_changes: Vec<f64> = Vec::new();
    let mut critic_errors = Vec::new();
    let mut converged_at = None;
    let mut learning = true;
    let mut probe = config.probe_amplitude;
    let mut saturation_events = 0;
    let mut skipped = 0;

    for k in 0..config.steps {
        let realization = match (&config.disturbance, dist_rng.as_mut()) {
            (Some(spec), Some(rng)) => Some(DisturbanceRealization::draw(model, &state.z, spec, rng)),
            _ => None,
        };
        let observed = match &realization {
            Some(d) => &state.z + &d.delta_z,
            None => state.z.clone(),
        };

        let u_hat = actor_eval(&w.wa, &observed)?;
        let noise = Vector::from_fn(model.m(), |_, _| {
            if probe > 0.0 {
                probe_rng.random_range(-probe..=probe)
            } else {
                0.0
            }
        });
        let u_mf = model.saturate(&(&u_hat + noise));
        let u_r = match &config.riccati_gain {
            Some(gain) => model.saturate(&(-(gain * &observed) * config.riccati_weight)),
            None => zero_u.clone(),
        };
        if let Some(bound) = model.control_bound() {
            let touches = |u: &Vector| u.iter().zip(bound.iter()).any(|(x, b)| x.abs() >= b - 1e-12);
            if touches(&u_mf) || touches(&u_r) {
                saturation_events += 1;
            }
        }

        let next = match (&realization, &config.disturbance) {
            (Some(d), Some(spec)) => model.apply_disturbance(&state, &u_r, &u_mf, d, spec.input_form)?,
            _ => model.step(&state, &(&u_r + &u_mf))?,
        };
        guard_finite(&next.z, k + 1)?;

        if learning {
            // Both targets use the weights from before this step's updates.
            let chi = stack(&observed, &u_hat);
            let s_hat = half_quadratic(&w.wc, &chi);
            let u_next = actor_eval(&w.wa, &next.z)?;
            let s_target = critic_target(cost, &observed, &u_hat, &w.wc, &next.z, &u_next)?;

            match actor_target(&w.wc, &observed) {
                Ok(target) => {
                    let mut eta = w.eta_a;
                    if config.step_guard {
                        eta /= (eta * observed.norm_squared()).max(1.0);
                    }
                    w.wa = actor_update(&w.wa, eta, &u_hat, &target, &observed)?;
                }
                Err(Error::KernelDegenerate { .. }) => skipped += 1,
                Err(e) => return Err(e),
            }

            let mut eta = w.eta_c;
            if config.step_guard {
                eta /= (eta * 0.5 * chi.norm_squared().powi(2)).max(1.0);
            }
            w.wc = critic_update(&w.wc, eta, s_hat, s_target, &chi)?;
            critic_errors.push((s_hat - s_target).abs());
            critic_changes.push((half_quadratic(&w.wc, &chi) - s_hat).abs());
        }

        let applied = &u_r + &u_mf;
        samples.push(Sample {
            k,
            utility: cost.utility(&state.z, &applied),
            z: std::mem::replace(&mut state.z, next.z),
            u: applied,
        });
        state.k = next.k;
        controls.push(ControlSplit {
            riccati: u_r,
            model_free: u_mf,
        });
        if let (Some(log), Some(d)) = (log.as_mut(), realization) {
            log.push(d);
        }
        snapshots.push(WeightSnapshot {
            k: k + 1,
            wa: w.wa.clone(),
            wc: w.wc.clone(),
        });

        let window = config.convergence_window;
        if learning && converged_at.is_none() && window > 0 && critic_changes.len() >= window {
            let mean = critic_changes[critic_changes.len() - window..].iter().sum::<f64>() / window as f64;
            if mean < config.convergence_tol {
                converged_at = Some(k);
                match config.on_convergence {
                    OnConvergence::Freeze => {
                        learning = false;
                        probe = 0.0;
                    }
                    OnConvergence::Stop => break,
                    OnConvergence::Continue => {}
                }
            }
        }
    }

    let trajectory = Trajectory {
        samples,
        final_state: state.z,
        dt: config.dt,
        disturbance_log: log,
    };
    let tail_start = snapshots.len() - (snapshots.len() / 20).max(1) - 1;
    let tail_weight_change = snapshots[tail_start..]
        .windows(2)
        .map(|p| (&p[1].wa - &p[0].wa).amax().max((&p[1].wc - &p[0].wc).amax()))
        .fold(0.0, f64::max);
    let report = TrainingReport {
        converged_at,
        settling_time: trajectory.settling_time(0.01),
        final_poles: closed_loop_poles(model, Feedback::Actor(&w.wa))?,
        saturation_events,
        skipped_actor_updates: skipped,
        critic_errors,
        tail_weight_change,
    };
    Ok(TrainingRun {
        weights: snapshots,
        trajectory,
        controls,
        final_weights: w,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn actor_examples() {
        let wa = Matrix::from_column_slice(4, 1, &[0.0317, 0.0014, -2.4171, -3.0740]);
        assert_eq!(actor_eval(&wa, &v(&[0.0, 0.0, 1.0, 0.0])).unwrap()[0], -2.4171);
        assert_eq!(
            actor_eval(&Matrix::zeros(4, 1), &v(&[1.0, 2.0, 3.0, 4.0])).unwrap()[0],
            0.0
        );
        assert!(actor_eval(&wa, &v(&[1.0])).is_err());
    }

    #[test]
    fn critic_examples() {
        let wc = Matrix::identity(5, 5) * 10.0;
        assert_eq!(critic_eval(&wc, &v(&[1.0, 0.0, 0.0, 0.0]), &v(&[0.0])).unwrap(), 5.0);
        assert_eq!(
            critic_eval(&Matrix::zeros(5, 5), &v(&[1.0, 2.0, 3.0, 4.0]), &v(&[5.0])).unwrap(),
            0.0
        );
    }

    #[test]
    fn actor_target_example() {
        let mut wc = Matrix::identity(5, 5);
        wc[(4, 4)] = 2.0;
        wc[(4, 0)] = 1.0;
        wc[(0, 4)] = 1.0;
        assert_eq!(actor_target(&wc, &v(&[1.0, 0.0, 0.0, 0.0])).unwrap()[0], -0.5);
        wc[(4, 4)] = -1.0;
        assert!(matches!(
            actor_target(&wc, &v(&[1.0, 0.0, 0.0, 0.0])),
            Err(Error::KernelDegenerate { .. })
        ));
    }

    #[test]
    fn update_laws_by_hand() {
        let wa = Matrix::from_element(1, 1, 1.0);
        let next = actor_update(&wa, 0.1, &v(&[2.0]), &v(&[1.0]), &v(&[2.0])).unwrap();
        assert!((next[(0, 0)] - 0.8).abs() < 1e-15);
        assert_eq!(actor_update(&wa, 0.1, &v(&[2.0]), &v(&[2.0]), &v(&[2.0])).unwrap(), wa);

        let wc = Matrix::from_element(1, 1, 10.0);
        let next = critic_update(&wc, 0.001, 5.0, 4.0, &v(&[1.0])).unwrap();
        assert!((next[(0, 0)] - 9.999).abs() < 1e-15);
        assert_eq!(critic_update(&wc, 0.001, 4.0, 4.0, &v(&[1.0])).unwrap(), wc);
    }

    #[test]
    fn critic_target_edge_cases() {
        let cost = CostWeights::diagonal(&[2.0], &[4.0]);
        let wc = Matrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 5.0]);
        let (z, u) = (v(&[1.0]), v(&[0.5]));
        assert_eq!(critic_target(&cost, &z, &u, &wc, &v(&[0.0]), &v(&[0.0])).unwrap(), 1.5);
        let next = critic_eval(&wc, &z, &u).unwrap();
        assert_eq!(critic_target(&cost, &v(&[0.0]), &v(&[0.0]), &wc, &z, &u).unwrap(), next);
    }

    #[test]
    fn learning_rates_are_validated() {
        let wa = Matrix::zeros(2, 1);
        let wc = Matrix::identity(3, 3);
        assert!(ActorCriticWeights::new(wa.clone(), wc.clone(), 0.001, 0.001).is_ok());
        assert!(ActorCriticWeights::new(wa.clone(), wc.clone(), 0.0, 0.001).is_err());
        assert!(ActorCriticWeights::new(wa.clone(), wc.clone(), 0.5, 1.0).is_err());
        assert!(ActorCriticWeights::new(wa, Matrix::identity(2, 2), 0.1, 0.1).is_err());
    }

    #[test]
    fn frozen_weights_reproduce_plain_simulation() {
        let model = PlantModel::new(
            Matrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 0.95]),
            Matrix::from_column_slice(2, 1, &[0.0, 0.1]),
        )
        .unwrap();
        let cost = CostWeights::diagonal(&[1.0, 1.0], &[1.0]);
        let wa = Matrix::from_column_slice(2, 1, &[-0.5, -1.0]);
        let weights = ActorCriticWeights::frozen(wa.clone(), Matrix::identity(3, 3)).unwrap();
        let z0 = v(&[1.0, -1.0]);
        let config = TrainConfig {
            steps: 50,
            probe_amplitude: 0.0,
            ..TrainConfig::default()
        };
        let run = train_online(&model, &cost, &weights, &z0, &config).unwrap();
        assert_eq!(run.final_weights.wa, wa);
        let mut actor = |_k: usize, z: &Vector| wa.tr_mul(z);
        let plain = crate::plant::simulate(&model, &mut actor, &cost, &z0, 50, 0.01, None).unwrap();
        assert_eq!(run.trajectory, plain);
    }
}
