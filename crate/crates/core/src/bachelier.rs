//! Normal-model (Bachelier) pricing with zero rates and unit notional.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SabrError};
use crate::model::OptionKind;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Beyond this `|d|` the time value comes from the asymptotic tail series.
const TAIL_CUTOFF: f64 = 8.0;

/// Standard normal cumulative distribution via `erfc`.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BachelierInputs {
    pub tau: f64,
    pub forward: f64,
    pub strike: f64,
    pub vol: f64,
    pub kind: OptionKind,
}

/// Price and analytic partials of the Bachelier formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsGreeks {
    pub price: f64,
    #[serde(rename = "dB_dF")]
    pub d_forward: f64,
    #[serde(rename = "dB_dsigma")]
    pub d_vol: f64,
    #[serde(rename = "dB_dtau")]
    pub d_tau: f64,
    #[serde(rename = "d2B_dF2")]
    pub d2_forward: f64,
    #[serde(rename = "d2B_dFdsigma")]
    pub d2_forward_vol: f64,
    #[serde(rename = "d2B_dsigma2")]
    pub d2_vol: f64,
}

impl BachelierInputs {
    pub fn new(tau: f64, forward: f64, strike: f64, vol: f64, kind: OptionKind) -> Result<Self> {
        let inputs = Self {
            tau,
            forward,
            strike,
            vol,
            kind,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(invalid("tau", format!("must be > 0, got {}", self.tau)));
        }
        if !(self.vol.is_finite() && self.vol > 0.0) {
            return Err(invalid("vol", format!("must be > 0, got {}", self.vol)));
        }
        if !(self.forward.is_finite() && self.strike.is_finite()) {
            return Err(invalid("forward", "forward and strike must be finite"));
        }
        Ok(())
    }

    /// `d+ = (F - K) / (vol sqrt(tau))`.
    pub fn d_plus(&self) -> f64 {
        (self.forward - self.strike) / (self.vol * self.tau.sqrt())
    }
}

/// `phi(d) - |d| N(-|d|)`: the time value per unit of `vol sqrt(tau)`.
fn time_value_factor(d: f64) -> f64 {
    let a = d.abs();
    if a <= TAIL_CUTOFF {
        norm_pdf(a) - a * norm_cdf(-a)
    } else {
        // phi(a)/a^2 * sum_n (-1)^n (2n+1)!! / a^(2n), truncated where the
        // relative remainder is below 1e-7 at the cutoff
        let r = 1.0 / (a * a);
        let mut term = 1.0;
        let mut sum = 1.0;
        for n in 1..=8 {
            term *= -((2 * n + 1) as f64) * r;
            sum += term;
        }
        norm_pdf(a) * r * sum
    }
}

pub(crate) fn price_unchecked(tau: f64, forward: f64, strike: f64, vol: f64, kind: OptionKind) -> f64 {
    let s = vol * tau.sqrt();
    let d = (forward - strike) / s;
    kind.payoff(forward, strike) + s * time_value_factor(d)
}

pub fn price(inputs: &BachelierInputs) -> Result<f64> {
    inputs.validate()?;
    Ok(price_unchecked(
        inputs.tau,
        inputs.forward,
        inputs.strike,
        inputs.vol,
        inputs.kind,
    ))
}

pub(crate) fn greeks_unchecked(tau: f64, forward: f64, strike: f64, vol: f64, kind: OptionKind) -> BsGreeks {
    let sqrt_tau = tau.sqrt();
    let s = vol * sqrt_tau;
    let d = (forward - strike) / s;
    let pdf = norm_pdf(d);
    let d_forward = match kind {
        OptionKind::Call => norm_cdf(d),
        OptionKind::Put => -norm_cdf(-d),
    };
    BsGreeks {
        price: kind.payoff(forward, strike) + s * time_value_factor(d),
        d_forward,
        d_vol: sqrt_tau * pdf,
        d_tau: vol * pdf / (2.0 * sqrt_tau),
        d2_forward: pdf / s,
        d2_forward_vol: -d * pdf / vol,
        d2_vol: sqrt_tau * d * d * pdf / vol,
    }
}

pub fn greeks(inputs: &BachelierInputs) -> Result<BsGreeks> {
    inputs.validate()?;
    Ok(greeks_unchecked(
        inputs.tau,
        inputs.forward,
        inputs.strike,
        inputs.vol,
        inputs.kind,
    ))
}

/// Normal vol that reproduces `price`, by safeguarded Newton iteration.
pub fn implied_vol(price: f64, tau: f64, forward: f64, strike: f64, kind: OptionKind) -> Result<f64> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(invalid("tau", format!("must be > 0, got {tau}")));
    }
    let intrinsic = kind.payoff(forward, strike);
    let target = price - intrinsic;
    if !(target > 0.0) || !price.is_finite() {
        return Err(SabrError::Domain(format!(
            "price {price} has no time value over intrinsic {intrinsic}"
        )));
    }
    let sqrt_tau = tau.sqrt();
    let tv = |vol: f64| {
        let s = vol * sqrt_tau;
        s * time_value_factor((forward - strike) / s)
    };
    // At the money tv = vol sqrt(tau) phi(0); start there and bracket.
    let mut lo = 0.0;
    let mut hi = (target / (sqrt_tau * INV_SQRT_2PI)).max(1e-300);
    while tv(hi) < target {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(SabrError::Domain("implied vol bracket overflow".into()));
        }
    }
    let mut vol = hi;
    for _ in 0..200 {
        let err = tv(vol) - target;
        if err > 0.0 {
            hi = vol;
        } else {
            lo = vol;
        }
        if err.abs() <= 4.0 * f64::EPSILON * target || hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(vol);
        }
        let vega = sqrt_tau * norm_pdf((forward - strike) / (vol * sqrt_tau));
        let newton = vol - err / vega;
        vol = if vega > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(vol)
}
