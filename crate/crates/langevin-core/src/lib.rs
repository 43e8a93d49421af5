//! Sampling as optimization over the space of probability measures.
//!
//! Langevin-type samplers (plain, stochastic subgradient, stochastic proximal
//! gradient) for log-concave targets `π ∝ exp(−U)`, together with the exact
//! Gaussian laws of the plain chain, closed-form Wasserstein/KL divergences,
//! evaluators for the non-asymptotic KL and W₂ bounds that govern these
//! chains, and a benchmark harness for Bayesian logistic regression.
//!
//! The crate is organized by role:
//!
//! * [`model`] — potentials `U = U₁ + U₂` and their constants (m, L, M₂, …)
//! * [`oracles`] — minibatch (sub)gradient estimators and their variance
//! * [`schedules`] — step-size/weight plans and admissibility predicates
//! * [`samplers`] — the chains themselves plus a prox-MALA reference
//! * [`analytics`] — exact Gaussian laws, W₂, KL, free energy, 1-D empirical W₂
//! * [`bounds`] — theorem right-hand sides and (γ_ε, n_ε) tuning rules
//! * [`harness`] — datasets, experiment grids, reference caching, reports

pub mod analytics;
pub mod bounds;
pub mod harness;
pub mod model;
pub mod oracles;
pub mod samplers;
pub mod schedules;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("step size {gamma} outside the valid range (0, {max}]")]
    StepSize { gamma: f64, max: f64 },

    #[error("missing constant `{0}` for this rule")]
    MissingConstant(&'static str),

    #[error("matrix is not symmetric positive semi-definite: {0}")]
    NotPsd(String),

    #[error("non-finite {what} at iteration {at}")]
    NonFinite { what: &'static str, at: usize },

    #[error("subset enumeration too large: C({n},{k}) exceeds {cap}")]
    Enumeration { n: usize, k: usize, cap: u64 },

    #[error("acceptance tuning failed: {0}")]
    Tuning(String),

    #[error("dataset: {0}")]
    Data(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
