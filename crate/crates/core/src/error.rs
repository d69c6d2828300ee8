use thiserror::Error;

/// Errors produced by the solvers, simulators and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in `{operand}`: expected {expected}, found {found}")]
    Dimension {
        operand: String,
        expected: String,
        found: String,
    },

    #[error("singular matrix in {context} (condition estimate {condition:.3e})")]
    Singular { context: String, condition: f64 },

    #[error("degenerate kernel: control block not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    KernelDegenerate { min_eigenvalue: f64 },

    #[error("{solver} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("insufficient excitation: regression rank {rank} < {required} free parameters")]
    Excitation { rank: usize, required: usize },

    #[error("state diverged at step {step}: |Z| reached {max_abs:.3e}")]
    NonFinite { step: usize, max_abs: f64 },

    #[error("eigenvalue iteration failed for a {n}x{n} matrix")]
    Eigen { n: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dim(operand: impl Into<String>, expected: impl ToString, found: impl ToString) -> Self {
        Error::Dimension {
            operand: operand.into(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// True for failures caused by bad input files or options rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Dimension { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
