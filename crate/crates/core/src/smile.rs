//! SABR backbone and the normal implied-volatility expansion.
//!
//! The smile is evaluated as
//!
//! ```text
//! sigma_imp = alpha (F - K) / D(zeta) * (1 + Gamma * eps),   eps = alpha^2 tau
//! ```
//!
//! with `zeta = alpha / sigma * int_K^F dx / C(x)`. Internally the prefactor is
//! rewritten as `sigma * q(F, K) * zeta / D(zeta)`, where `q` is the harmonic
//! mean of the backbone over `[K, F]`. Both factors are smooth through `K = F`
//! and `alpha = 0`, so no branch is needed for the at-the-money limit itself.
//! All arithmetic runs in shifted coordinates `f = F + shift`, `k = K + shift`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SabrError};
use crate::model::SabrParams;

/// Below this `|zeta|` the distance function uses `zeta (1 + rho zeta / 2)`.
pub const ZETA_SERIES_THRESHOLD: f64 = 1e-6;

/// Below this `1 - beta` the CEV integral uses the logarithmic form.
pub const BETA_LOG_THRESHOLD: f64 = 1e-6;

/// Choice of the expansion point `F_mid` in the Gamma correction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Midpoint {
    #[default]
    Arithmetic,
    Geometric,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmileConfig {
    pub midpoint: Midpoint,
}

/// Which closed form evaluates `int_K^F dx / C(x)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CevBranch {
    /// Power form unless `1 - beta` is below [`BETA_LOG_THRESHOLD`].
    #[default]
    Auto,
    Power,
    Log,
}

/// Backbone value and its first two derivatives at one forward level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backbone {
    pub value: f64,
    pub first: f64,
    pub second: f64,
}

/// Every intermediate quantity of one smile evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmilePoint {
    pub zeta: f64,
    pub i_of_zeta: f64,
    pub distance: f64,
    /// `None` when `alpha = 0` and the backbone terms make Gamma undefined.
    pub gamma_corr: Option<f64>,
    pub implied_vol: f64,
    pub epsilon: f64,
}

fn shifted(x: f64, params: &SabrParams, name: &str) -> Result<f64> {
    let s = x + params.shift();
    if !(s > 0.0) || !s.is_finite() {
        return Err(SabrError::Domain(format!("{name} + shift must be > 0, got {s}")));
    }
    Ok(s)
}

/// `C(F) = (F + shift)^beta`.
pub fn backbone(forward: f64, params: &SabrParams) -> Result<f64> {
    let f = shifted(forward, params, "forward")?;
    Ok(f.powf(params.beta()))
}

/// `C`, `C'` and `C''` at `forward`.
pub fn backbone_derivatives(forward: f64, params: &SabrParams) -> Result<Backbone> {
    let f = shifted(forward, params, "forward")?;
    Ok(backbone_at(f, params.beta()))
}

pub(crate) fn backbone_at(f: f64, beta: f64) -> Backbone {
    let value = f.powf(beta);
    Backbone {
        value,
        first: beta * value / f,
        second: beta * (beta - 1.0) * value / (f * f),
    }
}

/// `int_k^f dx / x^beta` for positive shifted arguments.
///
/// Written as `k^(1-beta) * expm1((1-beta) u) / (1-beta)` with `u = ln(f/k)`,
/// which keeps full relative precision when `f` is close to `k` or `beta` is
/// close to one.
pub(crate) fn cev_integral(f: f64, k: f64, beta: f64, branch: CevBranch) -> f64 {
    let u = ((f - k) / k).ln_1p();
    let a = 1.0 - beta;
    let use_log = match branch {
        CevBranch::Auto => a < BETA_LOG_THRESHOLD,
        CevBranch::Power => a == 0.0,
        CevBranch::Log => true,
    };
    if use_log {
        // expm1(x)/a = u (1 + x/2 + x^2/6 + x^3/24 + ...), x = a u
        let x = a * u;
        k.powf(a) * u * (1.0 + x / 2.0 * (1.0 + x / 3.0 * (1.0 + x / 4.0)))
    } else {
        k.powf(a) * (a * u).exp_m1() / a
    }
}

/// Harmonic mean of the backbone over `[k, f]`: `(f - k) / int_k^f dx/C(x)`.
pub(crate) fn mean_backbone(f: f64, k: f64, beta: f64) -> f64 {
    if f == k {
        return f.powf(beta);
    }
    (f - k) / cev_integral(f, k, beta, CevBranch::Auto)
}

/// `zeta = alpha / sigma * int_K^F dx / C(x)`.
pub fn zeta(forward: f64, strike: f64, params: &SabrParams) -> Result<f64> {
    zeta_with_branch(forward, strike, params, CevBranch::Auto)
}

pub fn zeta_with_branch(forward: f64, strike: f64, params: &SabrParams, branch: CevBranch) -> Result<f64> {
    let f = shifted(forward, params, "forward")?;
    let k = shifted(strike, params, "strike")?;
    Ok(params.alpha() / params.sigma() * cev_integral(f, k, params.beta(), branch))
}

/// `I(zeta) = sqrt(1 - 2 rho zeta + zeta^2)`.
pub fn i_func(zeta: f64, rho: f64) -> f64 {
    let d = zeta - rho;
    (d * d + (1.0 - rho) * (1.0 + rho)).sqrt()
}

/// `D(zeta) = log((I(zeta) + zeta - rho) / (1 - rho))`.
pub fn distance(zeta: f64, rho: f64) -> f64 {
    if zeta.abs() < ZETA_SERIES_THRESHOLD {
        distance_series(zeta, rho)
    } else {
        distance_exact(zeta, rho)
    }
}

pub fn distance_series(zeta: f64, rho: f64) -> f64 {
    zeta * (1.0 + 0.5 * rho * zeta)
}

/// Closed form, arranged around `log1p` so it stays accurate for small `zeta`.
/// Negative `zeta` uses the reciprocal identity
/// `(I + zeta - rho)(I - zeta + rho) = 1 - rho^2`.
pub fn distance_exact(zeta: f64, rho: f64) -> f64 {
    let i = i_func(zeta, rho);
    let i_minus_one = zeta * (zeta - 2.0 * rho) / (i + 1.0);
    if zeta >= 0.0 {
        ((i_minus_one + zeta) / (1.0 - rho)).ln_1p()
    } else {
        -((i_minus_one - zeta) / (1.0 + rho)).ln_1p()
    }
}

/// `zeta / D(zeta)`, equal to one at `zeta = 0`.
pub(crate) fn zeta_over_distance(zeta: f64, rho: f64) -> f64 {
    if zeta.abs() < ZETA_SERIES_THRESHOLD {
        1.0 / (1.0 + 0.5 * rho * zeta)
    } else {
        zeta / distance_exact(zeta, rho)
    }
}

fn midpoint_shifted(f: f64, k: f64, cfg: &SmileConfig) -> f64 {
    match cfg.midpoint {
        Midpoint::Arithmetic => 0.5 * (f + k),
        Midpoint::Geometric => (f * k).sqrt(),
    }
}

/// `Gamma * eps` in the polynomial form that has no division by `alpha`.
///
/// At `alpha = 0` the correction is taken to be zero.
pub(crate) fn gamma_eps(m: f64, params: &SabrParams, tau: f64) -> f64 {
    let alpha = params.alpha();
    if alpha == 0.0 {
        return 0.0;
    }
    let (beta, rho) = (params.beta(), params.rho());
    let g1 = beta / m;
    let g2 = beta * (beta - 1.0) / (m * m);
    let x = params.sigma() * m.powf(beta);
    ((2.0 * g2 - g1 * g1) / 24.0 * x * x + rho * g1 / 4.0 * x * alpha + (2.0 - 3.0 * rho * rho) / 24.0 * alpha * alpha)
        * tau
}

/// The first-order correction `Gamma` at the arithmetic midpoint.
pub fn gamma_correction(forward: f64, strike: f64, params: &SabrParams) -> Result<f64> {
    gamma_correction_with(forward, strike, params, &SmileConfig::default())
}

pub fn gamma_correction_with(forward: f64, strike: f64, params: &SabrParams, cfg: &SmileConfig) -> Result<f64> {
    let f = shifted(forward, params, "forward")?;
    let k = shifted(strike, params, "strike")?;
    let m = midpoint_shifted(f, k, cfg);
    let (alpha, beta, rho) = (params.alpha(), params.beta(), params.rho());
    let third = (2.0 - 3.0 * rho * rho) / 24.0;
    if alpha == 0.0 {
        if beta == 0.0 {
            return Ok(third);
        }
        return Err(SabrError::Degenerate(
            "Gamma correction requires alpha > 0 when beta > 0".into(),
        ));
    }
    let g1 = beta / m;
    let g2 = beta * (beta - 1.0) / (m * m);
    let x = params.sigma() * m.powf(beta) / alpha;
    Ok((2.0 * g2 - g1 * g1) / 24.0 * x * x + rho * g1 / 4.0 * x + third)
}

/// Normal implied volatility of the SABR expansion.
pub fn implied_normal_vol(tau: f64, forward: f64, strike: f64, params: &SabrParams) -> Result<f64> {
    implied_normal_vol_with(tau, forward, strike, params, &SmileConfig::default())
}

pub fn implied_normal_vol_with(
    tau: f64,
    forward: f64,
    strike: f64,
    params: &SabrParams,
    cfg: &SmileConfig,
) -> Result<f64> {
    check_tau(tau)?;
    let f = shifted(forward, params, "forward")?;
    let k = shifted(strike, params, "strike")?;
    Ok(vol_shifted(tau, f, k, params, cfg))
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(SabrError::InvalidParameter {
            name: "expiry",
            reason: format!("must be > 0, got {tau}"),
        });
    }
    Ok(())
}

/// Hot path used by greeks and simulation; arguments already validated.
pub(crate) fn vol_shifted(tau: f64, f: f64, k: f64, params: &SabrParams, cfg: &SmileConfig) -> f64 {
    let beta = params.beta();
    let q = mean_backbone(f, k, beta);
    let z = if f == k {
        0.0
    } else {
        params.alpha() / params.sigma() * cev_integral(f, k, beta, CevBranch::Auto)
    };
    let m = midpoint_shifted(f, k, cfg);
    params.sigma() * q * zeta_over_distance(z, params.rho()) * (1.0 + gamma_eps(m, params, tau))
}

/// Leading-order (`eps = 0`) part of the smile: `alpha (F - K) / D(zeta)`.
pub(crate) fn vol0_shifted(f: f64, k: f64, params: &SabrParams) -> (f64, f64) {
    let beta = params.beta();
    let q = mean_backbone(f, k, beta);
    let z = if f == k {
        0.0
    } else {
        params.alpha() / params.sigma() * cev_integral(f, k, beta, CevBranch::Auto)
    };
    (params.sigma() * q * zeta_over_distance(z, params.rho()), z)
}

/// Full smile evaluation with every intermediate quantity.
pub fn smile_point(tau: f64, forward: f64, strike: f64, params: &SabrParams) -> Result<SmilePoint> {
    smile_point_with(tau, forward, strike, params, &SmileConfig::default())
}

pub fn smile_point_with(
    tau: f64,
    forward: f64,
    strike: f64,
    params: &SabrParams,
    cfg: &SmileConfig,
) -> Result<SmilePoint> {
    check_tau(tau)?;
    let f = shifted(forward, params, "forward")?;
    let k = shifted(strike, params, "strike")?;
    let epsilon = params.epsilon(tau);
    if epsilon > 1.0 {
        warn!("expansion parameter alpha^2 tau = {epsilon:.3} is not small");
    }
    let z = if f == k {
        0.0
    } else {
        params.alpha() / params.sigma() * cev_integral(f, k, params.beta(), CevBranch::Auto)
    };
    Ok(SmilePoint {
        zeta: z,
        i_of_zeta: i_func(z, params.rho()),
        distance: distance(z, params.rho()),
        gamma_corr: gamma_correction_with(forward, strike, params, cfg).ok(),
        implied_vol: vol_shifted(tau, f, k, params, cfg),
        epsilon,
    })
}

/// Leading-order at-the-money vol `sigma C(F)`; the full value is
/// `implied_normal_vol` at `K = F`.
pub fn atm_vol(forward: f64, params: &SabrParams) -> Result<f64> {
    Ok(params.sigma() * backbone(forward, params)?)
}

/// Backbone slope `sigma C'(F)`: the rate at which the leading-order
/// at-the-money vol moves with the forward.
pub fn atm_skew(forward: f64, params: &SabrParams) -> Result<f64> {
    Ok(params.sigma() * backbone_derivatives(forward, params)?.first)
}

/// Leading-order strike slope of the smile at the money,
/// `d sigma_imp / dK |_{K=F} = (sigma C'(F) + rho alpha) / 2`.
///
/// This is the market-observable skew that the modified delta reproduces.
pub fn strike_skew(forward: f64, params: &SabrParams) -> Result<f64> {
    Ok(0.5 * (atm_skew(forward, params)? + params.rho() * params.alpha()))
}
