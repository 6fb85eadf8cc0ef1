//! Minimum-divergence estimation.
//!
//! Power divergences (α, β, γ, dual-γ, log-γ, GM, HM) and the robust
//! estimators built on them for generalized linear models, Poisson point
//! processes, Boltzmann machines, boosting, query-by-committee and
//! similarity analysis.

pub mod active;
pub mod boltzmann;
pub mod boosting;
pub mod divergence;
pub mod error;
pub mod glm;
pub mod optim;
pub mod ppp;
pub mod similarity;
pub mod simlab;

pub use divergence::{DivergenceKind, FinitePmf};
pub use error::{Error, Result};
