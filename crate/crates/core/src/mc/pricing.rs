use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sim::{check_start, mean_and_se, PathWalker, SimConfig};
use crate::bachelier;
use crate::error::{Result, SabrError};
use crate::model::{OptionKind, SabrParams};

/// Monte Carlo price of one out-of-the-money option and its normal vol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McQuote {
    pub strike: f64,
    pub kind: OptionKind,
    pub price: f64,
    pub price_std_error: f64,
    pub implied_vol: f64,
    /// Price standard error divided by the Bachelier vega.
    pub vol_std_error: f64,
}

/// Prices out-of-the-money options (puts below `f0`, calls at and above) on
/// one set of paths ending at `config.horizon`, and inverts each price to a
/// normal implied vol.
pub fn mc_smile(params: &SabrParams, f0: f64, strikes: &[f64], config: &SimConfig) -> Result<Vec<McQuote>> {
    config.validate()?;
    check_start(params, f0)?;
    let dt = config.dt();
    let terminal: Vec<f64> = (0..config.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut w = PathWalker::new(params, f0, dt, config.seed, i as u64);
            for _ in 0..config.n_steps {
                w.step();
            }
            w.forward
        })
        .collect();

    let tau = config.horizon;
    strikes
        .iter()
        .map(|&k| {
            let kind = if k < f0 { OptionKind::Put } else { OptionKind::Call };
            let payoffs: Vec<f64> = terminal.iter().map(|&f| kind.payoff(f, k)).collect();
            let (price, se) = mean_and_se(&payoffs);
            let iv = bachelier::implied_vol(price, tau, f0, k, kind)
                .map_err(|e| SabrError::Domain(format!("Monte Carlo price at strike {k} has no implied vol: {e}")))?;
            let vega = tau.sqrt() * bachelier::norm_pdf((f0 - k) / (iv * tau.sqrt()));
            Ok(McQuote {
                strike: k,
                kind,
                price,
                price_std_error: se,
                implied_vol: iv,
                vol_std_error: se / vega,
            })
        })
        .collect()
}
