//! Built-in flexible-wing models, cost weights and initial conditions.
//!
//! Matrices are the discrete-time models at a 10.8 m/s trim with a 0.01 s
//! sampling period. Longitudinal states are `(ν_A, ν_N, θ̇, θ)` driven by the
//! control-bar pitch `α`; lateral states are `(ν_L, φ̇, ψ̇, φ, ψ)` driven by
//! the control-bar roll `β`.

use std::f64::consts::FRAC_PI_3;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::plant::{CostWeights, PlantModel};

pub const SAMPLING_PERIOD: f64 = 0.01;
pub const LEARNING_RATE: f64 = 0.001;
pub const CRITIC_INIT_SCALE: f64 = 10.0;
pub const CONTROL_BOUND: f64 = FRAC_PI_3;

#[rustfmt::skip]
const A_LON: [f64; 16] = [
    0.9982,  0.0065, 0.0012, -0.0971,
   -0.0139,  0.9774, 0.1055,  0.0136,
    0.0027, -0.0043, 0.9858, -0.0002,
    0.0,     0.0,    0.0099,  1.0,
];
const B_LON: [f64; 4] = [0.0, 0.0040, 0.0741, 0.0004];
const Q_LON: [f64; 4] = [0.0006, 0.04, 1.0, 1.0];
const Z0_LON: [f64; 4] = [28.0, -1.0, -0.6, 1.0];
const WA0_LON: [f64; 4] = [0.0317, 0.0014, -2.4171, -3.0740];

#[rustfmt::skip]
const A_LAT: [f64; 25] = [
    0.9977, -0.0028, -0.1069,  0.0971, -0.0131,
   -0.0131,  0.8092,  0.0677, -0.0007,  0.0001,
    0.0026,  0.0332,  0.9802,  0.0001,  0.0,
   -0.0001,  0.0090,  0.0004,  1.0,     0.0,
    0.0,     0.0002,  0.0099,  0.0,     1.0,
];
const B_LAT: [f64; 5] = [-0.0003, 0.0327, 0.0049, 0.0002, 0.0];
const Q_LAT: [f64; 5] = [0.0006, 0.25, 0.25, 1.0, 1.0];
const Z0_LAT: [f64; 5] = [10.0, 0.9, 0.9, 1.0, -0.5];
const WA0_LAT: [f64; 5] = [0.0404, -0.6407, -2.2064, -1.8473, -1.8872];

const R_BOTH: f64 = 0.9803;

/// Published learned actor weights for the nominal runs.
pub const FINAL_WA_LON: [f64; 4] = [0.5229, -0.9582, -2.6512, -2.5554];
pub const FINAL_WA_LAT: [f64; 5] = [0.0120, -0.9219, -2.4250, -0.9458, -1.1173];

/// Published learned actor weights for the disturbed runs.
pub const DISTURBED_WA_LON: [f64; 4] = [0.1961, -0.0554, -2.4252, -3.0799];
pub const DISTURBED_WA_LAT: [f64; 5] = [-0.0038, -0.6563, -2.3076, -1.9291, -2.0037];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subsystem {
    Longitudinal,
    Lateral,
}

impl Subsystem {
    pub const ALL: [Subsystem; 2] = [Subsystem::Longitudinal, Subsystem::Lateral];

    pub fn short_name(self) -> &'static str {
        match self {
            Subsystem::Longitudinal => "lon",
            Subsystem::Lateral => "lat",
        }
    }

    pub fn preset(self) -> Preset {
        match self {
            Subsystem::Longitudinal => longitudinal(),
            Subsystem::Lateral => lateral(),
        }
    }
}

impl fmt::Display for Subsystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subsystem::Longitudinal => "longitudinal",
            Subsystem::Lateral => "lateral",
        })
    }
}

impl FromStr for Subsystem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "longitudinal" | "lon" => Ok(Subsystem::Longitudinal),
            "lateral" | "lat" => Ok(Subsystem::Lateral),
            other => Err(Error::Config(format!("unknown subsystem `{other}`"))),
        }
    }
}

/// Everything needed to run one subsystem with its published settings.
#[derive(Debug, Clone)]
pub struct Preset {
    pub subsystem: Subsystem,
    pub model: PlantModel,
    pub cost: CostWeights,
    pub z0: Vector,
    /// Initial actor weights `W_a` (`n×1`).
    pub actor0: Matrix,
}

impl Preset {
    /// Initial critic `10·I` of size `n+1`.
    pub fn critic0(&self) -> Matrix {
        let d = self.model.n() + self.model.m();
        Matrix::identity(d, d) * CRITIC_INIT_SCALE
    }
}

#[allow(clippy::too_many_arguments)]
fn build(
    subsystem: Subsystem,
    a: &[f64],
    b: &[f64],
    q: &[f64],
    z0: &[f64],
    wa0: &[f64],
    states: &[&str],
    control: &str,
) -> Preset {
    let n = b.len();
    let model = PlantModel::new(Matrix::from_row_slice(n, n, a), Matrix::from_column_slice(n, 1, b))
        .and_then(|m| m.with_labels(states, &[control]))
        .and_then(|m| m.with_control_bound(Vector::from_element(1, CONTROL_BOUND)))
        .expect("preset matrices are well formed");
    Preset {
        subsystem,
        model,
        cost: CostWeights::diagonal(q, &[R_BOTH]),
        z0: Vector::from_column_slice(z0),
        actor0: Matrix::from_column_slice(n, 1, wa0),
    }
}

pub fn longitudinal() -> Preset {
    build(
        Subsystem::Longitudinal,
        &A_LON,
        &B_LON,
        &Q_LON,
        &Z0_LON,
        &WA0_LON,
        &["nu_A", "nu_N", "theta_dot", "theta"],
        "alpha",
    )
}

pub fn lateral() -> Preset {
    build(
        Subsystem::Lateral,
        &A_LAT,
        &B_LAT,
        &Q_LAT,
        &Z0_LAT,
        &WA0_LAT,
        &["nu_L", "phi_dot", "psi_dot", "phi", "psi"],
        "beta",
    )
}

/// Published nominal-run actor weights as an `n×1` matrix.
pub fn final_actor(subsystem: Subsystem) -> Matrix {
    match subsystem {
        Subsystem::Longitudinal => Matrix::from_column_slice(4, 1, &FINAL_WA_LON),
        Subsystem::Lateral => Matrix::from_column_slice(5, 1, &FINAL_WA_LAT),
    }
}

/// Published disturbed-run actor weights as an `n×1` matrix.
pub fn disturbed_actor(subsystem: Subsystem) -> Matrix {
    match subsystem {
        Subsystem::Longitudinal => Matrix::from_column_slice(4, 1, &DISTURBED_WA_LON),
        Subsystem::Lateral => Matrix::from_column_slice(5, 1, &DISTURBED_WA_LAT),
    }
}
