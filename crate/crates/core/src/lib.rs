//! SABR smile analytics in the normal (Bachelier) convention.
//!
//! * [`smile`]: backbone, distance function and the normal implied-vol expansion.
//! * [`bachelier`]: normal-model prices and analytic partials.
//! * [`greeks`]: the SABR greek set under both risk decompositions, including
//!   the correlation-adjusted (Bartlett) delta.
//! * [`calibration`]: fixed-beta smile fitting.
//! * [`mc`]: simulation, hedging backtests, beta sweeps and the
//!   vol/forward regression experiment.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bachelier;
pub mod calibration;
pub mod error;
pub mod greeks;
pub mod mc;
pub mod model;
pub mod simplex;
pub mod smile;

pub use error::{Result, SabrError};
pub use model::{OptionKind, OptionSpec, SabrParams};
