//! Discrete-time linear plant `Z_{k+1} = A Z_k + B u_k`, control saturation,
//! the randomly perturbed transition used for robustness runs, and a
//! closed-loop simulator that records trajectories.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_len, check_shape, check_square, half_quadratic, Matrix, Vector};

/// Simulation aborts once any state entry exceeds this magnitude.
pub const DIVERGENCE_LIMIT: f64 = 1e9;

/// Discrete-time linear plant with optional per-channel control bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    a: Matrix,
    b: Matrix,
    state_labels: Vec<String>,
    control_labels: Vec<String>,
    control_bound: Option<Vector>,
}

impl PlantModel {
    pub fn new(a: Matrix, b: Matrix) -> Result<Self> {
        check_square(&a, "A")?;
        if b.nrows() != a.nrows() {
            return Err(Error::dim(
                "B",
                format!("{} rows", a.nrows()),
                format!("{} rows", b.nrows()),
            ));
        }
        if b.ncols() == 0 {
            return Err(Error::dim("B", "at least one column", 0));
        }
        let state_labels = (1..=a.nrows()).map(|i| format!("Z_{i}")).collect();
        let control_labels = (1..=b.ncols()).map(|i| format!("u_{i}")).collect();
        Ok(Self {
            a,
            b,
            state_labels,
            control_labels,
            control_bound: None,
        })
    }

    pub fn with_labels(mut self, states: &[&str], controls: &[&str]) -> Result<Self> {
        if states.len() != self.n() {
            return Err(Error::dim("state_labels", self.n(), states.len()));
        }
        if controls.len() != self.m() {
            return Err(Error::dim("control_labels", self.m(), controls.len()));
        }
        self.state_labels = states.iter().map(|s| s.to_string()).collect();
        self.control_labels = controls.iter().map(|s| s.to_string()).collect();
        Ok(self)
    }

    /// Symmetric bound `|u_i| <= bound_i`; every channel must be strictly positive.
    pub fn with_control_bound(mut self, bound: Vector) -> Result<Self> {
        check_len(&bound, self.m(), "control_bound")?;
        if bound.iter().any(|&b| !(b > 0.0)) {
            return Err(Error::Config(
                "control bound must be strictly positive in every channel".into(),
            ));
        }
        self.control_bound = Some(bound);
        Ok(self)
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Control dimension.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn state_labels(&self) -> &[String] {
        &self.state_labels
    }

    pub fn control_labels(&self) -> &[String] {
        &self.control_labels
    }

    pub fn control_bound(&self) -> Option<&Vector> {
        self.control_bound.as_ref()
    }

    /// Clamps `u` to the plant's bound, or returns it unchanged when unbounded.
    pub fn saturate(&self, u: &Vector) -> Vector {
        match &self.control_bound {
            Some(bound) => saturate(u, bound),
            None => u.clone(),
        }
    }

    /// Nominal transition `Z' = A Z + B u`.
    pub fn step(&self, z: &StateVector, u: &Vector) -> Result<StateVector> {
        check_len(&z.z, self.n(), "Z")?;
        check_len(u, self.m(), "u")?;
        Ok(StateVector {
            z: &self.a * &z.z + &self.b * u,
            k: z.k + 1,
        })
    }

    /// Perturbed transition `Z' = (A+ΔA)(Z+ΔZ) + B u^R + ΔB u^MF`, drawing a
    /// fresh realization from `rng`. With [`InputForm::Additive`] the last
    /// term becomes `(B+ΔB) u^MF`.
    pub fn disturbed_step<R: Rng + ?Sized>(
        &self,
        z: &StateVector,
        u_riccati: &Vector,
        u_modelfree: &Vector,
        spec: &DisturbanceSpec,
        rng: &mut R,
    ) -> Result<(StateVector, DisturbanceRealization)> {
        check_len(&z.z, self.n(), "Z")?;
        let realization = DisturbanceRealization::draw(self, &z.z, spec, rng);
        let next = self.apply_disturbance(z, u_riccati, u_modelfree, &realization, spec.input_form)?;
        Ok((next, realization))
    }

    /// Deterministic half of [`PlantModel::disturbed_step`] for an already
    /// drawn realization.
    pub fn apply_disturbance(
        &self,
        z: &StateVector,
        u_riccati: &Vector,
        u_modelfree: &Vector,
        d: &DisturbanceRealization,
        form: InputForm,
    ) -> Result<StateVector> {
        check_len(&z.z, self.n(), "Z")?;
        check_len(u_riccati, self.m(), "u_riccati")?;
        check_len(u_modelfree, self.m(), "u_modelfree")?;
        check_shape(&d.delta_a, self.n(), self.n(), "delta_A")?;
        check_shape(&d.delta_b, self.n(), self.m(), "delta_B")?;
        check_len(&d.delta_z, self.n(), "delta_Z")?;

        let a_k = &self.a + &d.delta_a;
        let measured = &z.z + &d.delta_z;
        let modelfree_gain = match form {
            InputForm::Literal => d.delta_b.clone(),
            InputForm::Additive => &self.b + &d.delta_b,
        };
        Ok(StateVector {
            z: a_k * measured + &self.b * u_riccati + modelfree_gain * u_modelfree,
            k: z.k + 1,
        })
    }
}

/// Per-channel symmetric clamp to `[-bound, bound]`.
pub fn saturate(u: &Vector, bound: &Vector) -> Vector {
    u.zip_map(bound, |x, b| x.clamp(-b, b))
}

/// Plant state tagged with its time index.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub z: Vector,
    pub k: usize,
}

impl StateVector {
    pub fn new(z: Vector) -> Self {
        Self { z, k: 0 }
    }

    pub fn from_slice(z: &[f64]) -> Self {
        Self::new(Vector::from_column_slice(z))
    }
}

/// Weights `(Q, R)` of the utility `U = ½(ZᵀQZ + uᵀRu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    pub q: Matrix,
    pub r: Matrix,
}

impl CostWeights {
    pub fn new(q: Matrix, r: Matrix) -> Result<Self> {
        check_square(&q, "Q")?;
        check_square(&r, "R")?;
        Ok(Self { q, r })
    }

    /// Diagonal `Q` and `R` from their diagonals.
    pub fn diagonal(q: &[f64], r: &[f64]) -> Self {
        Self {
            q: Matrix::from_diagonal(&Vector::from_column_slice(q)),
            r: Matrix::from_diagonal(&Vector::from_column_slice(r)),
        }
    }

    pub fn check_against(&self, model: &PlantModel) -> Result<()> {
        check_shape(&self.q, model.n(), model.n(), "Q")?;
        check_shape(&self.r, model.m(), model.m(), "R")
    }

    pub fn utility(&self, z: &Vector, u: &Vector) -> f64 {
        half_quadratic(&self.q, z) + half_quadratic(&self.r, u)
    }
}

/// How the model-free control enters the perturbed transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputForm {
    /// `ΔB u^MF`: the model-free control acts only through the perturbation.
    #[default]
    Literal,
    /// `(B + ΔB) u^MF`.
    Additive,
}

impl std::fmt::Display for InputForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InputForm::Literal => "literal",
            InputForm::Additive => "additive",
        })
    }
}

impl std::str::FromStr for InputForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(InputForm::Literal),
            "additive" => Ok(InputForm::Additive),
            other => Err(Error::Config(format!("unknown input form `{other}`"))),
        }
    }
}

/// Entrywise random perturbation levels for `ΔZ` and `(ΔA, ΔB)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSpec {
    pub state_scale: f64,
    pub dynamics_scale: f64,
    pub seed: u64,
    pub input_form: InputForm,
}

impl DisturbanceSpec {
    pub fn new(state_scale: f64, dynamics_scale: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            state_scale,
            dynamics_scale,
            seed,
            input_form: InputForm::Literal,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_input_form(mut self, form: InputForm) -> Self {
        self.input_form = form;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, s) in [
            ("state_scale", self.state_scale),
            ("dynamics_scale", self.dynamics_scale),
        ] {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {s}")));
            }
        }
        Ok(())
    }

    /// Fresh generator for this spec's seed.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// One step's `(ΔA_k, ΔB_k, ΔZ_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceRealization {
    pub delta_a: Matrix,
    pub delta_b: Matrix,
    pub delta_z: Vector,
}

impl DisturbanceRealization {
    /// Draws `ΔA` row-major, then `ΔB` row-major, then `ΔZ`; each entry is
    /// `scale × nominal entry × N(0, 1)`.
    pub fn draw<R: Rng + ?Sized>(model: &PlantModel, z: &Vector, spec: &DisturbanceSpec, rng: &mut R) -> Self {
        let scaled = |m: &Matrix, scale: f64, rng: &mut R| {
            let mut out = DMatrix::zeros(m.nrows(), m.ncols());
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    let draw: f64 = rng.sample(StandardNormal);
                    out[(i, j)] = scale * m[(i, j)] * draw;
                }
            }
            out
        };
        let delta_a = scaled(model.a(), spec.dynamics_scale, rng);
        let delta_b = scaled(model.b(), spec.dynamics_scale, rng);
        let delta_z = z.map(|zi| {
            let draw: f64 = rng.sample(StandardNormal);
            spec.state_scale * zi * draw
        });
        Self {
            delta_a,
            delta_b,
            delta_z,
        }
    }
}

/// One recorded step: state, applied control and its utility.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub k: usize,
    pub z: Vector,
    pub u: Vector,
    pub utility: f64,
}

/// Time-indexed closed-loop record.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub final_state: Vector,
    pub dt: f64,
    pub disturbance_log: Option<Vec<DisturbanceRealization>>,
}

impl Trajectory {
    pub fn total_cost(&self) -> f64 {
        self.samples.iter().map(|s| s.utility).sum()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// State norms `‖Z_k‖₂` for `k = 0..=steps` (the final state included).
    pub fn state_norms(&self) -> Vec<f64> {
        self.samples
            .iter()
            .map(|s| s.z.norm())
            .chain(std::iter::once(self.final_state.norm()))
            .collect()
    }

    /// First time after which `‖Z‖₂` stays below `fraction · ‖Z_0‖₂` for the
    /// rest of the record; `None` if the last state is still above it.
    pub fn settling_time(&self, fraction: f64) -> Option<f64> {
        settling_time(&self.state_norms(), self.dt, fraction)
    }
}

/// Settling time of a norm sequence sampled every `dt` seconds, measured
/// relative to the first entry.
pub fn settling_time(norms: &[f64], dt: f64, fraction: f64) -> Option<f64> {
    let threshold = fraction * norms.first()?;
    if threshold <= 0.0 {
        return Some(0.0);
    }
    match norms.iter().rposition(|&n| n >= threshold) {
        None => Some(0.0),
        Some(last) if last + 1 == norms.len() => None,
        Some(last) => Some((last + 1) as f64 * dt),
    }
}

/// State feedback evaluated on the (possibly noisy) observed state.
pub trait Controller {
    fn control(&mut self, k: usize, observed: &Vector) -> Vector;
}

impl<F: FnMut(usize, &Vector) -> Vector> Controller for F {
    fn control(&mut self, k: usize, observed: &Vector) -> Vector {
        self(k, observed)
    }
}

/// `u = −K Z`.
#[derive(Debug, Clone)]
pub struct LinearFeedback(pub Matrix);

impl Controller for LinearFeedback {
    fn control(&mut self, _k: usize, observed: &Vector) -> Vector {
        -(&self.0 * observed)
    }
}

pub(crate) fn guard_finite(z: &Vector, step: usize) -> Result<()> {
    let max_abs = z.iter().fold(
        0.0_f64,
        |acc, x| if x.is_nan() { f64::INFINITY } else { acc.max(x.abs()) },
    );
    if max_abs > DIVERGENCE_LIMIT {
        return Err(Error::NonFinite { step, max_abs });
    }
    Ok(())
}

/// Runs `steps` closed-loop transitions from `z0`. The controller's output is
/// saturated and applied through `B`; with a disturbance spec each step uses
/// the perturbed transition and the controller observes `Z + ΔZ`.
pub fn simulate<C: Controller + ?Sized>(
    model: &PlantModel,
    controller: &mut C,
    cost: &CostWeights,
    z0: &Vector,
    steps: usize,
    dt: f64,
    spec: Option<&DisturbanceSpec>,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::Config("simulate needs at least one step".into()));
    }
    cost.check_against(model)?;
    check_len(z0, model.n(), "Z0")?;
    if let Some(spec) = spec {
        spec.validate()?;
    }

    let zero_u = Vector::zeros(model.m());
    let mut rng = spec.map(DisturbanceSpec::rng);
    let mut log = spec.map(|_| Vec::with_capacity(steps));
    let mut samples = Vec::with_capacity(steps);
    let mut state = StateVector::new(z0.clone());

    for k in 0..steps {
        let realization = match (spec, rng.as_mut()) {
            (Some(spec), Some(rng)) => Some(DisturbanceRealization::draw(model, &state.z, spec, rng)),
            _ => None,
        };
        let observed = match &realization {
            Some(d) => &state.z + &d.delta_z,
            None => state.z.clone(),
        };
        let raw = controller.control(k, &observed);
        check_len(&raw, model.m(), "controller output")?;
        let u = model.saturate(&raw);
        let next = match (&realization, spec) {
            (Some(d), Some(spec)) => model.apply_disturbance(&state, &u, &zero_u, d, spec.input_form)?,
            _ => model.step(&state, &u)?,
        };
        guard_finite(&next.z, k + 1)?;
        samples.push(Sample {
            k,
            utility: cost.utility(&state.z, &u),
            z: std::mem::replace(&mut state.z, next.z.clone()),
            u,
        });
        state.k = next.k;
        if let (Some(log), Some(d)) = (log.as_mut(), realization) {
            log.push(d);
        }
    }

    Ok(Trajectory {
        samples,
        final_state: state.z,
        dt,
        disturbance_log: log,
    })
}
