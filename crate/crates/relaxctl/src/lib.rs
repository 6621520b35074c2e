//! Numerical certificates for the relaxed (sliding-regime) maximum
//! principle in optimal control.
//!
//! The library works with endpoint-constrained problems
//! `f0(x(t0), x(t1)) -> min`, `ẋ = φ(t, x, u)`, `u ∈ U`, and their relaxed
//! counterparts where the velocity is a pointwise convex combination
//! `Σ α_i(t) φ(t, x, u_i(t))` over vertex controls. It provides:
//!
//! - [`problem`]: problem data, control sets, derivative validation, and the
//!   built-in example families;
//! - [`ode`]: fixed-step RK4 for the state, relaxed-state, and backward
//!   adjoint systems on uniform grids;
//! - [`relaxed`]: sliding-regime controls and simplex-constrained
//!   decomposition of velocities (and Lagrangian values) over vertices;
//! - [`certificate`]: multiplier solving for the stationarity,
//!   transversality, slackness, and maximum conditions, plus the normality
//!   decision that licenses approximating sequences;
//! - [`chattering`]: constructive approximation of sliding regimes by
//!   rapidly switching ordinary controls, including the exact broken-line
//!   construction for the tracking family, with convergence reports;
//! - [`calcvar`]: generalized Euler/Weierstrass/Legendre checks and the
//!   linearity falsifier for variational problems;
//! - [`cli`], [`config`], [`report`]: the JSON-config batch driver behind
//!   the `relaxctl` binary.

pub mod calcvar;
pub mod certificate;
pub mod chattering;
pub mod cli;
pub mod config;
pub mod error;
pub mod ode;
pub mod problem;
pub mod registry;
pub mod relaxed;
pub mod report;

pub use error::{Error, Result};
