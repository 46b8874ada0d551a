//! f-DP accounting and auditing for normalized noisy-gradient mechanisms.
//!
//! - [`curves`]: trade-off functions, Monte Carlo products, mixture envelopes
//!   and the CLT envelope.
//! - [`mechanisms`]: SGM, EASGM, ASGM and FEASGM.
//! - [`guarantees`]: upper bounds, per-pair guarantees and multi-round bounds.
//! - [`auditing`]: challenge trials and empirical `(ε, δ)` lower bounds.

pub mod auditing;
pub mod curves;
pub mod error;
pub mod guarantees;
pub mod mechanisms;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
