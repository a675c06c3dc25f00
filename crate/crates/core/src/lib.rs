//! Last-exit times of stationary Gaussian processes across a slowly
//! vanishing moving boundary `ε·f(t)`.
//!
//! The crate is organised bottom-up:
//!
//! - [`covariance`]: stationary covariance models and the local (Pickands)
//!   and mixing (Berman) certifications every other module relies on.
//! - [`boundary`]: boundary functions `f`, their inverse, and the growth-rate
//!   and regularity exponents `λ`, `β`, `β̃`.
//! - [`normalize`]: the normalising constants `γ`, `τ₀`, `A_ε`, `B_ε`, `c` and
//!   numerical verifiers for the intermediate asymptotic statements.
//! - [`simulate`]: exact circulant-embedding sampling, last-exit extraction
//!   and reproducible batch studies.
//! - [`stats`]: the Gumbel target law, Kolmogorov–Smirnov distance and the
//!   high-level tail asymptotic used as a Monte Carlo comparator.
//!
//! Drifts are carried as [`Drift`] (stored as `ln ε`) so that the asymptotic
//! verifiers can walk ε far below the smallest positive `f64`.

// `!(x > 0.0)` is used throughout on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod covariance;
mod drift;
mod error;
pub mod exec;
pub mod normalize;
pub mod simulate;
pub mod stats;

pub use boundary::Boundary;
pub use covariance::CovarianceModel;
pub use drift::Drift;
pub use error::{Error, ErrorCategory, Result};
pub use exec::Execution;
pub use normalize::NormalizingConstants;
pub use stats::GumbelLaw;

/// Version string embedded in every artifact this crate writes.
pub const ARTIFACT_VERSION: &str = concat!("gumbel-exit ", env!("CARGO_PKG_VERSION"));
