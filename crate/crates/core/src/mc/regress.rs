use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sim::{check_start, PathWalker, SimConfig};
use crate::error::{Result, SabrError};
use crate::model::SabrParams;
use crate::smile::backbone_at;

pub const MIN_OBSERVATIONS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_observations: usize,
    pub slope_std_error: f64,
}

/// OLS of `y` on `x` with intercept.
pub(crate) fn ols(x: &[f64], y: &[f64]) -> Result<RegressionResult> {
    let n = x.len();
    if n < MIN_OBSERVATIONS {
        return Err(SabrError::InsufficientData {
            needed: MIN_OBSERVATIONS,
            got: n,
        });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if !(sxx > 0.0) {
        return Err(SabrError::Degenerate("regressor has zero variance".into()));
    }
    let slope = sxy / sxx;
    let ssr = (syy - slope * sxy).max(0.0);
    let r_squared = if syy > 0.0 {
        (1.0 - ssr / syy).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(RegressionResult {
        slope,
        intercept: my - slope * mx,
        r_squared,
        n_observations: n,
        slope_std_error: (ssr / (nf - 2.0) / sxx).sqrt(),
    })
}

/// Regresses vol increments `d sigma` on `rho_r alpha / C(F_t) dF` over
/// non-overlapping windows of `window` steps, pooled across all paths.
///
/// `regressor_rho` defaults to the model's `rho`. With the model's own value
/// the population slope is one and `R^2` is close to `rho^2`.
pub fn regression_experiment(
    params: &SabrParams,
    f0: f64,
    config: &SimConfig,
    window: usize,
    regressor_rho: Option<f64>,
) -> Result<RegressionResult> {
    config.validate()?;
    check_start(params, f0)?;
    if window == 0 || window > config.n_steps {
        return Err(SabrError::Config(format!(
            "window must be in 1..={}, got {window}",
            config.n_steps
        )));
    }
    let rho_r = regressor_rho.unwrap_or(params.rho());
    if rho_r == 0.0 || params.alpha() == 0.0 {
        return Err(SabrError::Degenerate(
            "regressor rho * alpha is zero; pass a nonzero regressor rho".into(),
        ));
    }
    let dt = config.dt();
    let windows = config.n_steps / window;
    let coef = rho_r * params.alpha();
    let (beta, shift) = (params.beta(), params.shift());

    let per_path: Vec<Vec<(f64, f64)>> = (0..config.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut w = PathWalker::new(params, f0, dt, config.seed, i as u64);
            let mut obs = Vec::with_capacity(windows);
            for _ in 0..windows {
                if w.absorbed {
                    break;
                }
                let (f, s) = (w.forward, w.sigma);
                for _ in 0..window {
                    w.step();
                }
                if w.absorbed {
                    break;
                }
                let x = coef / backbone_at(f + shift, beta).value * (w.forward - f);
                obs.push((x, w.sigma - s));
            }
            obs
        })
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = per_path.into_iter().flatten().unzip();
    ols(&x, &y)
}
