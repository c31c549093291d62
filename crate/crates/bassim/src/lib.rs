//! Simulator for communication-constrained distributed nonparametric
//! estimation.
//!
//! `m` machines each hold `n` observations from one of five statistical
//! models. Every machine estimates a block of Haar wavelet coefficients of
//! the unknown function, encodes each estimate into a fixed-width codeword
//! under a hard per-machine bit budget `B`, and a central machine averages
//! the decoded blocks into a function estimate. The achievable accuracy is
//! governed by the bit-adjusted sample size computed in [`bass`], and the
//! [`harness`] reproduces the predicted error rates by Monte-Carlo sweeps.
//!
//! Module map:
//! - [`wavelets`]: Haar basis, coefficient tables, Besov norms, test functions.
//! - [`bass`]: bit-adjusted sample size, rate, block size, max resolution.
//! - [`codec`]: fixed-width finite-bit encoding with exact width accounting.
//! - [`models`]: the five data models and their local coefficient estimators.
//! - [`protocol`]: block assignment, per-machine messages, central aggregation.
//! - [`analytic_bounds`]: executable oracles for the scalar inequalities.
//! - [`harness`]: CLI-facing sweeps, CSV artifacts, SVG charts.

pub mod analytic_bounds;
pub mod bass;
pub mod codec;
pub mod harness;
pub mod models;
pub mod protocol;
pub mod rng;
pub mod wavelets;

pub use bass::{bass_general, bass_symmetric, minimax_rate, BassResult, NetworkConfig, Regime};
pub use models::{ModelKind, ModelSpec};
pub use protocol::{estimate, ExperimentResult};
pub use wavelets::{CoeffIndex, CoefficientTable};
