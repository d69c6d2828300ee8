//! TOML experiment configuration.
//!
//! ```toml
//! name = "lon_actor_critic"
//! plant = "longitudinal"        # longitudinal | lateral | custom
//! mode = "actor-critic"
//! steps = 6000
//! seeds = [0]
//!
//! # custom plants and overrides use nested bracket lists
//! # a = [[1.0, 0.01], [0.0, 0.99]]
//! # b = [[0.0], [0.01]]
//! # q = [1.0, 1.0]               # diagonal, or a full matrix
//!
//! [disturbance]
//! state_scale = 0.2
//! dynamics_scale = 0.5
//! input_form = "literal"        # literal | additive
//! ```
//!
//! Omitted keys take the published defaults of the selected preset.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::actor_critic::{ActorCriticWeights, OnConvergence, TrainConfig};
use crate::error::{Error, Result};
use crate::harness::presets::{self, Subsystem};
use crate::linalg::{Matrix, Vector};
use crate::plant::{CostWeights, DisturbanceSpec, InputForm, PlantModel};
use crate::riccati::RiccatiVariant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantSelection {
    Longitudinal,
    Lateral,
    Custom,
}

/// Controller driving an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerMode {
    /// Fixed gain from model-based HDP.
    Hdp,
    /// Fixed gain from kernel value iteration with the exact evaluator.
    ModelfreeExact,
    /// Fixed gain from kernel value iteration on sampled transitions.
    ModelfreeLsq,
    /// Online actor-critic learning.
    ActorCritic,
    /// Fixed gain from the kernel Riccati recursion.
    Riccati,
    /// Fixed gain from the DARE fixed-point solver.
    Dare,
    /// Online actor-critic plus a fixed DARE assist.
    Combined,
}

impl ControllerMode {
    pub fn is_learning(self) -> bool {
        matches!(self, ControllerMode::ActorCritic | ControllerMode::Combined)
    }
}

impl fmt::Display for ControllerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControllerMode::Hdp => "hdp",
            ControllerMode::ModelfreeExact => "modelfree-exact",
            ControllerMode::ModelfreeLsq => "modelfree-lsq",
            ControllerMode::ActorCritic => "actor-critic",
            ControllerMode::Riccati => "riccati",
            ControllerMode::Dare => "dare",
            ControllerMode::Combined => "combined",
        })
    }
}

impl FromStr for ControllerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "hdp" => ControllerMode::Hdp,
            "modelfree-exact" => ControllerMode::ModelfreeExact,
            "modelfree-lsq" => ControllerMode::ModelfreeLsq,
            "actor-critic" => ControllerMode::ActorCritic,
            "riccati" => ControllerMode::Riccati,
            "dare" => ControllerMode::Dare,
            "combined" => ControllerMode::Combined,
            other => return Err(Error::Config(format!("unknown controller mode `{other}`"))),
        })
    }
}

/// Matrix literal: a flat list is a diagonal, a nested list is row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixLiteral {
    Diagonal(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

impl MatrixLiteral {
    pub fn to_matrix(&self, name: &str) -> Result<Matrix> {
        match self {
            MatrixLiteral::Diagonal(d) => Ok(Matrix::from_diagonal(&Vector::from_column_slice(d))),
            MatrixLiteral::Rows(rows) => rows_to_matrix(rows, name),
        }
    }

    pub fn from_matrix(m: &Matrix) -> Self {
        MatrixLiteral::Rows(m.row_iter().map(|r| r.iter().copied().collect()).collect())
    }
}

pub fn rows_to_matrix(rows: &[Vec<f64>], name: &str) -> Result<Matrix> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(Error::Config(format!("`{name}` is empty")));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(Error::Config(format!(
            "`{name}` row {} has {} entries, expected {ncols}",
            bad + 1,
            rows[bad].len()
        )));
    }
    Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceConfig {
    pub state_scale: f64,
    pub dynamics_scale: f64,
    #[serde(default)]
    pub input_form: InputForm,
}

impl Default for DisturbanceConfig {
    fn default() -> Self {
        Self {
            state_scale: 0.2,
            dynamics_scale: 0.5,
            input_form: InputForm::Literal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub plant: PlantSelection,
    pub a: Option<Vec<Vec<f64>>>,
    pub b: Option<Vec<Vec<f64>>>,
    pub q: Option<MatrixLiteral>,
    pub r: Option<MatrixLiteral>,
    pub z0: Option<Vec<f64>>,
    /// Initial actor weights, column-major `n×m`.
    pub actor0: Option<Vec<f64>>,
    pub critic0_scale: f64,
    pub eta_actor: f64,
    pub eta_critic: f64,
    pub dt: f64,
    pub steps: usize,
    pub control_bound: f64,
    pub mode: ControllerMode,
    pub variant: RiccatiVariant,
    pub probe_amplitude: f64,
    pub step_guard: bool,
    pub riccati_weight: f64,
    pub convergence_window: usize,
    pub convergence_tol: f64,
    pub on_convergence: OnConvergence,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    /// Transitions for the least-squares evaluator; 0 picks four times the
    /// number of free kernel parameters.
    pub lsq_samples: usize,
    pub lsq_amplitude: f64,
    /// Closed-loop poles are recorded every this many steps of a learning run.
    pub snapshot_every: usize,
    pub seeds: Vec<u64>,
    pub output_dir: Option<String>,
    pub disturbance: Option<DisturbanceConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            plant: PlantSelection::Longitudinal,
            a: None,
            b: None,
            q: None,
            r: None,
            z0: None,
            actor0: None,
            critic0_scale: presets::CRITIC_INIT_SCALE,
            eta_actor: presets::LEARNING_RATE,
            eta_critic: presets::LEARNING_RATE,
            dt: presets::SAMPLING_PERIOD,
            steps: 6000,
            control_bound: presets::CONTROL_BOUND,
            mode: ControllerMode::ActorCritic,
            variant: RiccatiVariant::Standard,
            probe_amplitude: 0.01,
            step_guard: true,
            riccati_weight: 1.0,
            convergence_window: 100,
            convergence_tol: 1e-7,
            on_convergence: OnConvergence::Freeze,
            solver_tol: 1e-12,
            solver_max_iter: 200_000,
            lsq_samples: 0,
            lsq_amplitude: 1.0,
            snapshot_every: 100,
            seeds: vec![0],
            output_dir: None,
            disturbance: None,
        }
    }
}

/// Config with every matrix materialized and checked.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub model: PlantModel,
    pub cost: CostWeights,
    pub z0: Vector,
    pub weights: ActorCriticWeights,
}

impl ExperimentConfig {
    /// Published setup for one subsystem.
    pub fn preset(subsystem: Subsystem) -> Self {
        Self {
            name: subsystem.short_name().into(),
            plant: match subsystem {
                Subsystem::Longitudinal => PlantSelection::Longitudinal,
                Subsystem::Lateral => PlantSelection::Lateral,
            },
            steps: match subsystem {
                Subsystem::Longitudinal => 6000,
                Subsystem::Lateral => 8000,
            },
            ..Self::default()
        }
    }

    /// Same experiment with every preset matrix written out explicitly.
    pub fn expanded(&self) -> Result<Self> {
        let resolved = self.resolve()?;
        Ok(Self {
            plant: PlantSelection::Custom,
            a: Some(matrix_rows(resolved.model.a())),
            b: Some(matrix_rows(resolved.model.b())),
            q: Some(MatrixLiteral::from_matrix(&resolved.cost.q)),
            r: Some(MatrixLiteral::from_matrix(&resolved.cost.r)),
            z0: Some(resolved.z0.iter().copied().collect()),
            actor0: Some(resolved.weights.wa.iter().copied().collect()),
            ..self.clone()
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.resolve()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config is always serializable");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn disturbance_spec(&self, seed: u64) -> Result<Option<DisturbanceSpec>> {
        self.disturbance
            .as_ref()
            .map(|d| {
                DisturbanceSpec::new(d.state_scale, d.dynamics_scale, seed).map(|s| s.with_input_form(d.input_form))
            })
            .transpose()
    }

    pub fn train_config(&self, seed: u64) -> Result<TrainConfig> {
        Ok(TrainConfig {
            steps: self.steps,
            dt: self.dt,
            probe_amplitude: self.probe_amplitude,
            disturbance: self.disturbance_spec(seed)?,
            riccati_gain: None,
            riccati_weight: self.riccati_weight,
            step_guard: self.step_guard,
            convergence_window: self.convergence_window,
            convergence_tol: self.convergence_tol,
            on_convergence: self.on_convergence,
            seed,
        })
    }

    /// Builds the plant, cost, initial state and weights, checking that all
    /// dimensions agree.
    pub fn resolve(&self) -> Result<ResolvedExperiment> {
        self.validate_scalars()?;
        let preset = match self.plant {
            PlantSelection::Longitudinal => Some(presets::longitudinal()),
            PlantSelection::Lateral => Some(presets::lateral()),
            PlantSelection::Custom => None,
        };

        let (a, b) = match (&self.a, &self.b, &preset) {
            (Some(a), Some(b), _) => (rows_to_matrix(a, "a")?, rows_to_matrix(b, "b")?),
            (None, None, Some(p)) => (p.model.a().clone(), p.model.b().clone()),
            (_, _, None) => return Err(Error::Config("custom plant needs both `a` and `b`".into())),
            _ => return Err(Error::Config("`a` and `b` must be overridden together".into())),
        };
        let mut model = PlantModel::new(a, b)?;
        if let Some(p) = &preset {
            if model.n() == p.model.n() && model.m() == p.model.m() {
                let states: Vec<&str> = p.model.state_labels().iter().map(String::as_str).collect();
                let controls: Vec<&str> = p.model.control_labels().iter().map(String::as_str).collect();
                model = model.with_labels(&states, &controls)?;
            }
        }
        let m = model.m();
        let model = model.with_control_bound(Vector::from_element(m, self.control_bound))?;
        let (n, m) = (model.n(), model.m());

        let q = match (&self.q, &preset) {
            (Some(q), _) => q.to_matrix("q")?,
            (None, Some(p)) => p.cost.q.clone(),
            (None, None) => return Err(Error::Config("custom plant needs `q`".into())),
        };
        let r = match (&self.r, &preset) {
            (Some(r), _) => r.to_matrix("r")?,
            (None, Some(p)) => p.cost.r.clone(),
            (None, None) => return Err(Error::Config("custom plant needs `r`".into())),
        };
        let cost = CostWeights::new(q, r)?;
        cost.check_against(&model)?;

        let z0 = match (&self.z0, &preset) {
            (Some(z), _) => Vector::from_column_slice(z),
            (None, Some(p)) => p.z0.clone(),
            (None, None) => return Err(Error::Config("custom plant needs `z0`".into())),
        };
        if z0.len() != n {
            return Err(Error::dim("z0", n, z0.len()));
        }
        let wa = match (&self.actor0, &preset) {
            (Some(w), _) if w.len() == n * m => Matrix::from_column_slice(n, m, w),
            (Some(w), _) => return Err(Error::dim("actor0", n * m, w.len())),
            (None, Some(p)) if p.actor0.shape() == (n, m) => p.actor0.clone(),
            (None, _) => Matrix::zeros(n, m),
        };
        let wc = Matrix::identity(n + m, n + m) * self.critic0_scale;
        let weights = ActorCriticWeights::new(wa, wc, self.eta_actor, self.eta_critic)?;
        Ok(ResolvedExperiment {
            model,
            cost,
            z0,
            weights,
        })
    }

    fn validate_scalars(&self) -> Result<()> {
        let positive = [
            ("dt", self.dt),
            ("control_bound", self.control_bound),
            ("solver_tol", self.solver_tol),
            ("lsq_amplitude", self.lsq_amplitude),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!("`{name}` must be positive, got {value}")));
            }
        }
        if self.steps == 0 {
            return Err(Error::Config("`steps` must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("`seeds` must list at least one seed".into()));
        }
        if self.probe_amplitude < 0.0 {
            return Err(Error::Config("`probe_amplitude` must be non-negative".into()));
        }
        if let Some(d) = &self.disturbance {
            DisturbanceSpec::new(d.state_scale, d.dynamics_scale, 0)?;
        }
        Ok(())
    }
}

fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
