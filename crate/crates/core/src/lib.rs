//! Model-free value-iteration control for discrete-time linear plants.
//!
//! The crate covers model-based HDP value iteration ([`hdp`]), action-value
//! kernel iteration ([`qkernel`]), the Riccati kernel recursion and a DARE
//! oracle ([`riccati`]), an online actor-critic learner ([`actor_critic`]),
//! pole analysis ([`spectral`]) and an experiment harness ([`harness`]) with
//! presets for the longitudinal and lateral flexible-wing models.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actor_critic;
pub mod error;
pub mod harness;
pub mod hdp;
pub mod linalg;
pub mod plant;
pub mod qkernel;
pub mod riccati;
pub mod spectral;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
