//! Monte Carlo experiments on simulated SABR paths.
//!
//! Every path draws from its own ChaCha stream selected by the path index, so
//! results do not depend on how rayon schedules the work.

mod hedge;
mod pricing;
mod regress;
mod sim;
mod sweep;

pub use hedge::{
    bootstrap_std_error, fit_hedger, hedge_backtest, hedge_compare, HedgeComparison, HedgeExperiment, HedgeStats,
    HedgeStrategy, Recalibration,
};
pub use pricing::{mc_smile, McQuote};
pub use regress::{regression_experiment, RegressionResult, MIN_OBSERVATIONS};
pub use sim::{simulate, PathSet, SimConfig, STEPS_PER_YEAR};
pub use sweep::{beta_sweep, beta_sweep_shifted, BetaFit, BetaSweep, SweepRow};
