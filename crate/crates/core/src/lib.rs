//! Pricing, calibration and hedge-effectiveness engine for index-based
//! longevity derivatives under a two-factor Gaussian mortality intensity.
//!
//! The intensity of a cohort aged `x` at time 0 is `mu(t) = Y1(t) + Y2(t)`
//! where both factors are correlated Ornstein–Uhlenbeck-type processes:
//!
//! ```text
//! dY1 = alpha1 * Y1 dt + sigma1 dW1
//! dY2 = (alpha * x + beta) * Y2 dt + sigma * exp(gamma * x) dW2,   dW1 dW2 = rho dt
//! ```
//!
//! The integrated intensity is Gaussian, which gives closed forms for
//! survival probabilities, S-forwards, caplets and annuities. The [`sim`]
//! module provides exact-transition Monte Carlo used both as an oracle for
//! the closed forms and to drive the annuity-portfolio experiments in
//! [`hedge`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod error;
pub mod hedge;
pub mod io;
pub mod math;
pub mod model;
pub mod optim;
pub mod par;
pub mod price;
pub mod sim;

pub use error::{Error, Result};
pub use model::{CohortState, GaussianIntegralMoments, MarketParams, Measure, ModelParams};
pub use par::Execution;
