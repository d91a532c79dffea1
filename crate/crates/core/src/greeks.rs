//! SABR greeks composed from the smile and the Bachelier partials.
//!
//! The option value is `P = B(tau, F, K, sigma_imp(tau, F, K, sigma))`. Greeks
//! are chain-rule compositions of the Bachelier partials with the partials of
//! `sigma_imp`, which come either from central finite differences of the full
//! smile formula or from the leading-order (`eps = 0`) closed forms.
//!
//! Two deltas are reported. The classic delta holds `sigma` fixed. The
//! modified (Bartlett) delta adds the average co-movement of `sigma` with the
//! forward, `d sigma = rho alpha / C(F) dF + d sigma_perp`, so that
//!
//! ```text
//! delta_bartlett - delta_classic = vega * rho * alpha / C(F)
//! ```

use serde::{Deserialize, Serialize};

use crate::bachelier::{self, BsGreeks};
use crate::error::{Result, SabrError};
use crate::model::{OptionSpec, SabrParams};
use crate::smile::{self, backbone_at, i_func, SmileConfig};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SensitivityMode {
    #[serde(rename = "analytic")]
    AnalyticLeadingOrder,
    #[default]
    #[serde(rename = "fd")]
    FiniteDifference,
}

impl std::str::FromStr for SensitivityMode {
    type Err = SabrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Self::AnalyticLeadingOrder),
            "fd" => Ok(Self::FiniteDifference),
            other => Err(SabrError::InvalidParameter {
                name: "mode",
                reason: format!("expected analytic or fd, got {other:?}"),
            }),
        }
    }
}

/// Partials of the implied normal vol. Second-order fields are `None` in
/// analytic mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolSensitivities {
    pub implied_vol: f64,
    pub dvol_df: f64,
    pub dvol_dsigma: f64,
    pub dvol_dtau: f64,
    pub d2vol_df2: Option<f64>,
    pub d2vol_dfdsigma: Option<f64>,
    pub d2vol_dsigma2: Option<f64>,
    pub mode: SensitivityMode,
}

impl VolSensitivities {
    /// `(d2/dF2, d2/dF dsigma, d2/dsigma2)`.
    pub fn second_order(&self) -> Result<(f64, f64, f64)> {
        match (self.d2vol_df2, self.d2vol_dfdsigma, self.d2vol_dsigma2) {
            (Some(a), Some(b), Some(c)) => Ok((a, b, c)),
            _ => Err(SabrError::Unavailable("second-order vol sensitivity")),
        }
    }
}

/// First- and second-order SABR greeks of one option.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreekReport {
    pub price: f64,
    pub implied_vol: f64,
    pub delta_classic: f64,
    pub delta_bartlett: f64,
    pub vega: f64,
    pub vega_modified: f64,
    pub theta: f64,
    /// Second derivative of the option value in the forward (the SABR gamma).
    pub gamma: Option<f64>,
    pub vanna: Option<f64>,
    pub volga: Option<f64>,
    pub mode: SensitivityMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaKind {
    Classic,
    Bartlett,
}

/// The three hedge ratios used in backtests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deltas {
    pub implied_vol: f64,
    pub classic: f64,
    pub bartlett: f64,
    /// `dB/dF` with the implied vol held fixed.
    pub bachelier: f64,
}

struct Steps {
    forward: f64,
    sigma: f64,
    tau: f64,
}

fn fd_steps(f_shifted: f64, params: &SabrParams, tau: f64) -> Steps {
    Steps {
        forward: (1e-4 * f_shifted.abs()).max(1e-7),
        sigma: (1e-4 * params.sigma()).max(1e-9),
        tau: 1e-4 * tau,
    }
}

fn validated(forward: f64, spec: &OptionSpec, params: &SabrParams) -> Result<(f64, f64)> {
    spec.validate_with(params)?;
    let f = forward + params.shift();
    if !(f > 0.0) {
        return Err(SabrError::Domain(format!("forward + shift must be > 0, got {f}")));
    }
    Ok((f, spec.strike + params.shift()))
}

/// Partials of `sigma_imp` at (`forward`, `spec.strike`, `spec.expiry`).
pub fn vol_sensitivities(
    forward: f64,
    spec: &OptionSpec,
    params: &SabrParams,
    mode: SensitivityMode,
) -> Result<VolSensitivities> {
    let (f, k) = validated(forward, spec, params)?;
    Ok(match mode {
        SensitivityMode::FiniteDifference => fd_sensitivities(spec.expiry, f, k, params, true),
        SensitivityMode::AnalyticLeadingOrder => analytic_sensitivities(spec.expiry, f, k, params),
    })
}

fn fd_sensitivities(tau: f64, f: f64, k: f64, params: &SabrParams, second: bool) -> VolSensitivities {
    let cfg = SmileConfig::default();
    let h = fd_steps(f, params, tau);
    let sigma = params.sigma();
    let vol = |df: f64, ds: f64| {
        let p = params.bumped_sigma(sigma + ds);
        smile::vol_shifted(tau, f + df, k, &p, &cfg)
    };
    let v0 = vol(0.0, 0.0);

    let (hf, hs) = (h.forward, h.sigma);
    let [f_m2, f_m1, f_p1, f_p2] = [-2.0, -1.0, 1.0, 2.0].map(|i| vol(i * hf, 0.0));
    let [s_m2, s_m1, s_p1, s_p2] = [-2.0, -1.0, 1.0, 2.0].map(|i| vol(0.0, i * hs));

    let first = |m2: f64, m1: f64, p1: f64, p2: f64, step: f64| (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * step);
    let second_diff = |m2: f64, m1: f64, p1: f64, p2: f64, step: f64| {
        (-m2 + 16.0 * m1 - 30.0 * v0 + 16.0 * p1 - p2) / (12.0 * step * step)
    };

    // sigma_imp is affine in tau, so a two-point difference is exact.
    let ht = h.tau.min(0.5 * tau);
    let dvol_dtau = {
        let up = smile::vol_shifted(tau + ht, f, k, params, &cfg);
        let dn = smile::vol_shifted(tau - ht, f, k, params, &cfg);
        (up - dn) / (2.0 * ht)
    };

    let (d2f, d2fs, d2s) = if second {
        let cross = |i: f64| vol(i * hf, i * hs) - vol(i * hf, -i * hs) - vol(-i * hf, i * hs) + vol(-i * hf, -i * hs);
        let fs = (16.0 * cross(1.0) - cross(2.0)) / (48.0 * hf * hs);
        (
            Some(second_diff(f_m2, f_m1, f_p1, f_p2, hf)),
            Some(fs),
            Some(second_diff(s_m2, s_m1, s_p1, s_p2, hs)),
        )
    } else {
        (None, None, None)
    };

    VolSensitivities {
        implied_vol: v0,
        dvol_df: first(f_m2, f_m1, f_p1, f_p2, hf),
        dvol_dsigma: first(s_m2, s_m1, s_p1, s_p2, hs),
        dvol_dtau,
        d2vol_df2: d2f,
        d2vol_dfdsigma: d2fs,
        d2vol_dsigma2: d2s,
        mode: SensitivityMode::FiniteDifference,
    }
}

/// `g(zeta) = zeta / D(zeta)` and `g'(zeta)`.
fn ratio_and_slope(z: f64, rho: f64) -> (f64, f64) {
    if z.abs() < 1e-4 {
        let c2 = (2.0 - 3.0 * rho * rho) / 12.0;
        let c3 = 5.0 * rho / 24.0 - rho * rho * rho / 4.0;
        let g = 1.0 + z * (-0.5 * rho + z * (c2 + z * c3));
        let dg = -0.5 * rho + z * (2.0 * c2 + 3.0 * c3 * z);
        (g, dg)
    } else {
        let d = smile::distance_exact(z, rho);
        let g = z / d;
        (g, (1.0 - g / i_func(z, rho)) / d)
    }
}

/// Exact derivatives of the leading-order smile `alpha (F - K) / D(zeta)`.
fn analytic_sensitivities(tau: f64, f: f64, k: f64, params: &SabrParams) -> VolSensitivities {
    let (sigma, alpha, beta, rho) = (params.sigma(), params.alpha(), params.beta(), params.rho());
    let (vol0, z) = smile::vol0_shifted(f, k, params);
    let c = backbone_at(f, beta);
    let q = smile::mean_backbone(f, k, beta);
    let (g, dg) = ratio_and_slope(z, rho);
    let e = f - k;

    // d/dF [sigma q(F,K) g(zeta)], zeta_F = alpha / (sigma C(F)).
    let dvol_df = if e.abs() < 1e-5 * f {
        let b = -c.first * c.first / (12.0 * c.value * c.value) + c.second / (6.0 * c.value);
        let dq = q * (c.first / (2.0 * c.value) - b * e);
        sigma * (dq * g + q * dg * alpha / (sigma * c.value))
    } else {
        sigma * q / e * g * (1.0 - q * g / (c.value * i_func(z, rho)))
    };
    let dvol_dsigma = vol0 / sigma * g / i_func(z, rho);

    let m = 0.5 * (f + k);
    let dvol_dtau = vol0 * smile::gamma_eps(m, params, 1.0);

    VolSensitivities {
        implied_vol: vol0 * (1.0 + smile::gamma_eps(m, params, tau)),
        dvol_df,
        dvol_dsigma,
        dvol_dtau,
        d2vol_df2: None,
        d2vol_dfdsigma: None,
        d2vol_dsigma2: None,
        mode: SensitivityMode::AnalyticLeadingOrder,
    }
}

fn bs_at(forward: f64, spec: &OptionSpec, vol: f64) -> BsGreeks {
    bachelier::greeks_unchecked(spec.expiry, forward, spec.strike, vol, spec.kind)
}

/// Full greek report. Requires `alpha > 0` for the modified vega.
pub fn greeks(forward: f64, spec: &OptionSpec, params: &SabrParams, mode: SensitivityMode) -> Result<GreekReport> {
    if params.alpha() == 0.0 {
        return Err(SabrError::Degenerate(
            "modified vega divides by alpha; alpha must be > 0".into(),
        ));
    }
    let s = vol_sensitivities(forward, spec, params, mode)?;
    let b = bs_at(forward, spec, s.implied_vol);
    let c = backbone_at(forward + params.shift(), params.beta()).value;
    Ok(compose(&b, &s, params, c))
}

fn compose(b: &BsGreeks, s: &VolSensitivities, params: &SabrParams, c: f64) -> GreekReport {
    let (alpha, rho) = (params.alpha(), params.rho());
    let delta_classic = b.d_forward + b.d_vol * s.dvol_df;
    let vega = b.d_vol * s.dvol_dsigma;

    let (gamma, vanna, volga) = match s.second_order() {
        Ok((vff, vfs, vss)) => {
            let (vf, vs) = (s.dvol_df, s.dvol_dsigma);
            (
                Some(b.d2_forward + 2.0 * b.d2_forward_vol * vf + b.d2_vol * vf * vf + b.d_vol * vff),
                Some(b.d2_forward_vol * vs + b.d2_vol * vf * vs + b.d_vol * vfs),
                Some(b.d2_vol * vs * vs + b.d_vol * vss),
            )
        }
        Err(_) => (None, None, None),
    };

    GreekReport {
        price: b.price,
        implied_vol: s.implied_vol,
        delta_classic,
        delta_bartlett: delta_classic + vega * rho * alpha / c,
        vega,
        vega_modified: vega + delta_classic * rho * c / alpha,
        theta: b.d_tau + b.d_vol * s.dvol_dtau,
        gamma,
        vanna,
        volga,
        mode: s.mode,
    }
}

/// Classic, Bartlett and plain Bachelier deltas from first-order
/// finite-difference sensitivities. Valid for `alpha = 0`.
pub fn deltas(forward: f64, spec: &OptionSpec, params: &SabrParams) -> Result<Deltas> {
    let (f, k) = validated(forward, spec, params)?;
    Ok(deltas_unchecked(forward, f, k, spec, params))
}

pub(crate) fn deltas_unchecked(forward: f64, f: f64, k: f64, spec: &OptionSpec, params: &SabrParams) -> Deltas {
    let s = fd_sensitivities(spec.expiry, f, k, params, false);
    let b = bs_at(forward, spec, s.implied_vol);
    let c = backbone_at(f, params.beta()).value;
    let classic = b.d_forward + b.d_vol * s.dvol_df;
    let vega = b.d_vol * s.dvol_dsigma;
    Deltas {
        implied_vol: s.implied_vol,
        classic,
        bartlett: classic + vega * params.rho() * params.alpha() / c,
        bachelier: b.d_forward,
    }
}

/// Model-light delta approximations valid to first order in `F - K`:
///
/// * Bartlett: `dB/dF + dB/dsigma * eta`
/// * classic:  `dB/dF + dB/dsigma * (eta - rho alpha)`
///
/// where `eta` is the at-the-money strike slope of the smile
/// ([`smile::strike_skew`]) and the Bachelier partials are taken at the
/// strike's implied vol.
pub fn asymptotic_delta(forward: f64, spec: &OptionSpec, params: &SabrParams, which: DeltaKind) -> Result<f64> {
    let (f, k) = validated(forward, spec, params)?;
    let vol = smile::vol_shifted(spec.expiry, f, k, params, &SmileConfig::default());
    let b = bs_at(forward, spec, vol);
    let eta = smile::strike_skew(forward, params)?;
    Ok(match which {
        DeltaKind::Bartlett => b.d_forward + b.d_vol * eta,
        DeltaKind::Classic => b.d_forward + b.d_vol * (eta - params.rho() * params.alpha()),
    })
}

/// Risk-factor moves for one of the two decompositions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decomposition", rename_all = "snake_case")]
pub enum RiskFactors {
    /// `dF` and the part of `d sigma` uncorrelated with it.
    Orthogonal { dt: f64, d_forward: f64, d_sigma_perp: f64 },
    /// `d sigma` and the part of `dF` uncorrelated with it.
    Alternative { dt: f64, d_forward_perp: f64, d_sigma: f64 },
}

/// Weight of the vanna term in the `dt` bracket.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftConvention {
    /// `2 rho alpha C(F) Vanna`, the Ito drift of `dF d sigma`.
    #[default]
    ItoConsistent,
    /// `2 C(F) Vanna`, without the correlation factor.
    AsDisplayed,
}

/// `d sigma_perp = d sigma - rho alpha / C(F) dF`.
pub fn sigma_perp(d_forward: f64, d_sigma: f64, forward: f64, params: &SabrParams) -> Result<f64> {
    let c = smile::backbone(forward, params)?;
    Ok(d_sigma - params.rho() * params.alpha() / c * d_forward)
}

/// `dF_perp = dF - rho C(F) / alpha d sigma`.
pub fn forward_perp(d_forward: f64, d_sigma: f64, forward: f64, params: &SabrParams) -> Result<f64> {
    if params.alpha() == 0.0 {
        return Err(SabrError::Degenerate("forward projection divides by alpha".into()));
    }
    let c = smile::backbone(forward, params)?;
    Ok(d_forward - params.rho() * c / params.alpha() * d_sigma)
}

/// Predicted option value change over one step.
pub fn predict_pnl(
    report: &GreekReport,
    params: &SabrParams,
    forward: f64,
    factors: RiskFactors,
    convention: DriftConvention,
) -> Result<f64> {
    let (gamma, vanna, volga) = match (report.gamma, report.vanna, report.volga) {
        (Some(g), Some(va), Some(vo)) => (g, va, vo),
        _ => return Err(SabrError::Unavailable("second-order greeks")),
    };
    let c = smile::backbone(forward, params)?;
    let (sigma, alpha) = (params.sigma(), params.alpha());
    let vanna_weight = match convention {
        DriftConvention::ItoConsistent => 2.0 * params.rho() * alpha * c,
        DriftConvention::AsDisplayed => 2.0 * c,
    };
    let drift = -report.theta + 0.5 * sigma * sigma * (c * c * gamma + vanna_weight * vanna + alpha * alpha * volga);
    match factors {
        RiskFactors::Orthogonal {
            dt,
            d_forward,
            d_sigma_perp,
        } => {
            check_dt(dt)?;
            Ok(drift * dt + report.delta_bartlett * d_forward + report.vega * d_sigma_perp)
        }
        RiskFactors::Alternative {
            dt,
            d_forward_perp,
            d_sigma,
        } => {
            check_dt(dt)?;
            Ok(drift * dt + report.delta_classic * d_forward_perp + report.vega_modified * d_sigma)
        }
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt >= 0.0) {
        return Err(SabrError::InvalidParameter {
            name: "dt",
            reason: format!("must be >= 0, got {dt}"),
        });
    }
    Ok(())
}

#[cfg(test)]
// Golden values are quoted at full oracle precision.
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn base() -> SabrParams {
        SabrParams::new(0.05, 0.3, 0.5, -0.3).unwrap()
    }

    #[test]
    fn analytic_sensitivities_match_high_precision_derivatives() {
        // exact derivatives of the eps = 0 smile, from the mpmath oracle
        let cases = [
            (0.025, 0.13080549665425835, 0.16499260989379213),
            (0.0299999, 0.11716908329301568, 0.17320493641890051),
            (0.035, 0.1011972456317221, 0.17934211029394211),
        ];
        for (k, dfw, dsg) in cases {
            let spec = OptionSpec::call(k, 1.0).unwrap();
            let s = vol_sensitivities(0.03, &spec, &base(), SensitivityMode::AnalyticLeadingOrder).unwrap();
            assert_relative_eq!(s.dvol_df, dfw, max_relative = 1e-9);
            assert_relative_eq!(s.dvol_dsigma, dsg, max_relative = 1e-12);
        }
    }

    #[test]
    fn analytic_atm_limits() {
        let p = base();
        let spec = OptionSpec::call(0.03, 1.0).unwrap();
        let s = vol_sensitivities(0.03, &spec, &p, SensitivityMode::AnalyticLeadingOrder).unwrap();
        assert_relative_eq!(s.dvol_dsigma, 0.03f64.sqrt(), max_relative = 1e-14);
        let want = 0.5 * (smile::atm_skew(0.03, &p).unwrap() - p.rho() * p.alpha());
        assert_relative_eq!(s.dvol_df, want, max_relative = 1e-14);
        assert!(s.second_order().is_err());

        // alpha -> 0: only the backbone part of the skew survives
        let p0 = SabrParams::new(0.05, 0.0, 0.5, -0.3).unwrap();
        let s0 = vol_sensitivities(0.03, &spec, &p0, SensitivityMode::AnalyticLeadingOrder).unwrap();
        assert_relative_eq!(
            s0.dvol_df,
            0.5 * smile::atm_skew(0.03, &p0).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn analytic_branches_join_smoothly() {
        let p = base();
        let f = 0.03;
        let cut = 1e-5 * f;
        let at = |k: f64| {
            let spec = OptionSpec::call(k, 1.0).unwrap();
            vol_sensitivities(f, &spec, &p, SensitivityMode::AnalyticLeadingOrder)
                .unwrap()
                .dvol_df
        };
        let inside = at(f - cut * (1.0 - 1e-9));
        let outside = at(f - cut * (1.0 + 1e-9));
        assert_relative_eq!(inside, outside, max_relative = 1e-9);
    }

    #[test]
    fn fd_and_analytic_agree_to_order_eps() {
        let spec = OptionSpec::call(0.025, 1.0).unwrap();
        let mut ratios = Vec::new();
        for alpha in [0.2, 0.1, 0.05] {
            let p = SabrParams::new(0.05, alpha, 0.0, -0.3).unwrap();
            let fd = vol_sensitivities(0.03, &spec, &p, SensitivityMode::FiniteDifference).unwrap();
            let an = vol_sensitivities(0.03, &spec, &p, SensitivityMode::AnalyticLeadingOrder).unwrap();
            ratios.push((fd.dvol_df - an.dvol_df).abs() / p.epsilon(1.0));
        }
        // |difference| / eps stays bounded as eps shrinks
        assert!(ratios.iter().all(|r| *r < 0.05), "{ratios:?}");
    }

    #[test]
    fn rho_zero_deltas_coincide() {
        let p = SabrParams::new(0.05, 0.3, 0.5, 0.0).unwrap();
        let spec = OptionSpec::call(0.028, 1.0).unwrap();
        let g = greeks(0.03, &spec, &p, SensitivityMode::FiniteDifference).unwrap();
        assert_eq!(g.delta_bartlett, g.delta_classic);
        for which in [DeltaKind::Classic, DeltaKind::Bartlett] {
            assert_eq!(
                asymptotic_delta(0.03, &spec, &p, which).unwrap(),
                asymptotic_delta(0.03, &spec, &p, DeltaKind::Bartlett).unwrap()
            );
        }
    }

    #[test]
    fn decomposition_identity_holds_exactly() {
        let p = base();
        for k in [0.02, 0.03, 0.04] {
            let spec = OptionSpec::put(k, 2.0).unwrap();
            let g = greeks(0.03, &spec, &p, SensitivityMode::FiniteDifference).unwrap();
            let c = smile::backbone(0.03, &p).unwrap();
            assert_relative_eq!(
                g.delta_bartlett - g.delta_classic,
                g.vega * p.rho() * p.alpha() / c,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn normal_backbone_atm_classic_delta_is_bachelier_delta_at_leading_order() {
        let p = SabrParams::new(0.01, 1e-6, 0.0, 0.0).unwrap();
        let spec = OptionSpec::call(0.03, 1.0).unwrap();
        let g = greeks(0.03, &spec, &p, SensitivityMode::AnalyticLeadingOrder).unwrap();
        assert_relative_eq!(g.delta_classic, 0.5, max_relative = 1e-9);
    }

    #[test]
    fn analytic_mode_has_no_second_order() {
        let spec = OptionSpec::call(0.03, 1.0).unwrap();
        let g = greeks(0.03, &spec, &base(), SensitivityMode::AnalyticLeadingOrder).unwrap();
        assert!(g.gamma.is_none());
        let moves = RiskFactors::Orthogonal {
            dt: 0.0,
            d_forward: 0.0,
            d_sigma_perp: 0.0,
        };
        assert!(matches!(
            predict_pnl(&g, &base(), 0.03, moves, DriftConvention::default()),
            Err(SabrError::Unavailable(_))
        ));
    }

    #[test]
    fn alpha_zero_is_degenerate_for_full_report_only() {
        let p = SabrParams::new(0.05, 0.0, 0.5, -0.3).unwrap();
        let spec = OptionSpec::call(0.03, 1.0).unwrap();
        assert!(matches!(
            greeks(0.03, &spec, &p, SensitivityMode::FiniteDifference),
            Err(SabrError::Degenerate(_))
        ));
        let d = deltas(0.03, &spec, &p).unwrap();
        assert_eq!(d.classic, d.bartlett);
    }

    #[test]
    fn zero_move_predicts_zero_and_is_linear_without_dt() {
        let p = base();
        let spec = OptionSpec::call(0.031, 1.0).unwrap();
        let g = greeks(0.03, &spec, &p, SensitivityMode::FiniteDifference).unwrap();
        let conv = DriftConvention::default();
        let zero = RiskFactors::Orthogonal {
            dt: 0.0,
            d_forward: 0.0,
            d_sigma_perp: 0.0,
        };
        assert_eq!(predict_pnl(&g, &p, 0.03, zero, conv).unwrap(), 0.0);
        let mv = RiskFactors::Orthogonal {
            dt: 0.0,
            d_forward: 1e-4,
            d_sigma_perp: -2e-3,
        };
        let want = g.delta_bartlett * 1e-4 + g.vega * -2e-3;
        assert_eq!(predict_pnl(&g, &p, 0.03, mv, conv).unwrap(), want);
        let neg = RiskFactors::Orthogonal {
            dt: -1.0,
            d_forward: 0.0,
            d_sigma_perp: 0.0,
        };
        assert!(predict_pnl(&g, &p, 0.03, neg, conv).is_err());
    }

    #[test]
    fn projections_recombine() {
        let p = base();
        let (df, ds) = (3e-4, -4e-3);
        let perp = sigma_perp(df, ds, 0.03, &p).unwrap();
        let c = smile::backbone(0.03, &p).unwrap();
        assert_relative_eq!(perp + p.rho() * p.alpha() / c * df, ds, max_relative = 1e-15);
        let fperp = forward_perp(df, ds, 0.03, &p).unwrap();
        assert_relative_eq!(fperp + p.rho() * c / p.alpha() * ds, df, max_relative = 1e-14);
    }
}
