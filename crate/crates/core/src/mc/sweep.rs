use serde::{Deserialize, Serialize};

use crate::calibration::{self, CalibrationResult, SmileQuotes};
use crate::error::{Result, SabrError};
use crate::greeks;
use crate::model::OptionSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    pub strike: f64,
    pub delta_classic: f64,
    pub delta_bartlett: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaFit {
    pub beta: f64,
    pub calibration: CalibrationResult,
}

/// Delta curves of call options for several fixed-beta fits of one smile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSweep {
    pub fits: Vec<BetaFit>,
    /// Long format: one row per `(beta, strike)`, betas in input order.
    pub rows: Vec<SweepRow>,
}

impl BetaSweep {
    /// Largest minus smallest delta across betas at each strike, as
    /// `(strike, classic_spread, bartlett_spread)`.
    pub fn spreads(&self) -> Vec<(f64, f64, f64)> {
        let n = self.fits.len();
        if n == 0 {
            return Vec::new();
        }
        let per_beta = self.rows.len() / n;
        (0..per_beta)
            .map(|j| {
                let col = || (0..n).map(|b| self.rows[b * per_beta + j]);
                let range = |xs: Vec<f64>| {
                    xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                        - xs.iter().cloned().fold(f64::INFINITY, f64::min)
                };
                (
                    self.rows[j].strike,
                    range(col().map(|r| r.delta_classic).collect()),
                    range(col().map(|r| r.delta_bartlett).collect()),
                )
            })
            .collect()
    }
}

/// Calibrates `reference` at each beta (zero shift) and evaluates classic
/// and Bartlett call deltas on `strikes`.
pub fn beta_sweep(reference: &SmileQuotes, betas: &[f64], strikes: &[f64]) -> Result<BetaSweep> {
    beta_sweep_shifted(reference, betas, strikes, 0.0)
}

pub fn beta_sweep_shifted(reference: &SmileQuotes, betas: &[f64], strikes: &[f64], shift: f64) -> Result<BetaSweep> {
    if betas.is_empty() || strikes.is_empty() {
        return Err(SabrError::Config(
            "beta sweep needs at least one beta and one strike".into(),
        ));
    }
    let mut fits = Vec::with_capacity(betas.len());
    let mut rows = Vec::with_capacity(betas.len() * strikes.len());
    for &beta in betas {
        let fit = calibration::calibrate(reference, beta, shift, None)?;
        for &k in strikes {
            let spec = OptionSpec::call(k, reference.expiry())?;
            let d = greeks::deltas(reference.forward(), &spec, &fit.params)?;
            rows.push(SweepRow {
                beta,
                strike: k,
                delta_classic: d.classic,
                delta_bartlett: d.bartlett,
            });
        }
        fits.push(BetaFit { beta, calibration: fit });
    }
    Ok(BetaSweep { fits, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::strike_ladder;
    use crate::model::SabrParams;
    use crate::smile;

    #[test]
    fn matching_beta_reproduces_truth_deltas() {
        let truth = SabrParams::new(0.05, 0.3, 0.5, -0.3).unwrap();
        let atm = smile::atm_vol(0.03, &truth).unwrap();
        let q = SmileQuotes::from_model(1.0, 0.03, &strike_ladder(0.03, 2.0 * atm, 9), &truth).unwrap();
        let sweep = beta_sweep(&q, &[0.5], &[0.025, 0.03, 0.035]).unwrap();
        for row in &sweep.rows {
            let want = greeks::deltas(0.03, &OptionSpec::call(row.strike, 1.0).unwrap(), &truth).unwrap();
            assert!((row.delta_classic - want.classic).abs() < 1e-7);
            assert!((row.delta_bartlett - want.bartlett).abs() < 1e-7);
        }
    }
}
