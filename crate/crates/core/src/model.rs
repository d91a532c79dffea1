//! Model parameters and contract terms shared by every module.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SabrError};

/// SABR state and parameters: initial volatility `sigma`, vol-of-vol `alpha`,
/// CEV exponent `beta`, correlation `rho`, and the backbone shift `shift`
/// (so that `C(F) = (F + shift)^beta`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct SabrParams {
    sigma: f64,
    alpha: f64,
    beta: f64,
    rho: f64,
    shift: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawParams {
    sigma: f64,
    alpha: f64,
    beta: f64,
    rho: f64,
    #[serde(default)]
    shift: f64,
}

impl TryFrom<RawParams> for SabrParams {
    type Error = SabrError;

    fn try_from(raw: RawParams) -> Result<Self> {
        SabrParams::with_shift(raw.sigma, raw.alpha, raw.beta, raw.rho, raw.shift)
    }
}

impl From<SabrParams> for RawParams {
    fn from(p: SabrParams) -> Self {
        RawParams {
            sigma: p.sigma,
            alpha: p.alpha,
            beta: p.beta,
            rho: p.rho,
            shift: p.shift,
        }
    }
}

impl SabrParams {
    pub fn new(sigma: f64, alpha: f64, beta: f64, rho: f64) -> Result<Self> {
        Self::with_shift(sigma, alpha, beta, rho, 0.0)
    }

    pub fn with_shift(sigma: f64, alpha: f64, beta: f64, rho: f64, shift: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(invalid("sigma", format!("must be > 0, got {sigma}")));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(invalid("alpha", format!("must be >= 0, got {alpha}")));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(invalid("beta", format!("must be in [0, 1], got {beta}")));
        }
        if !(rho > -1.0 && rho < 1.0) {
            return Err(invalid("rho", format!("must be in (-1, 1), got {rho}")));
        }
        if !(shift.is_finite() && shift >= 0.0) {
            return Err(invalid("shift", format!("must be >= 0, got {shift}")));
        }
        Ok(Self {
            sigma,
            alpha,
            beta,
            rho,
            shift,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Same parameters with a different instantaneous volatility.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::with_shift(sigma, self.alpha, self.beta, self.rho, self.shift)
    }

    /// `epsilon = alpha^2 * tau`, the expansion parameter of the smile formula.
    pub fn epsilon(&self, tau: f64) -> f64 {
        self.alpha * self.alpha * tau
    }

    // Bumped copy for finite differences; caller keeps sigma positive.
    pub(crate) fn bumped_sigma(&self, sigma: f64) -> Self {
        debug_assert!(sigma > 0.0);
        Self { sigma, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

impl OptionKind {
    pub fn payoff(self, forward: f64, strike: f64) -> f64 {
        match self {
            OptionKind::Call => (forward - strike).max(0.0),
            OptionKind::Put => (strike - forward).max(0.0),
        }
    }
}

impl std::str::FromStr for OptionKind {
    type Err = SabrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "call" | "c" => Ok(OptionKind::Call),
            "put" | "p" => Ok(OptionKind::Put),
            other => Err(invalid("kind", format!("expected call or put, got {other:?}"))),
        }
    }
}

/// European option terms: strike, time to expiry in years, call or put.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    pub strike: f64,
    pub expiry: f64,
    pub kind: OptionKind,
}

impl OptionSpec {
    pub fn new(strike: f64, expiry: f64, kind: OptionKind) -> Result<Self> {
        let spec = Self { strike, expiry, kind };
        spec.validate()?;
        Ok(spec)
    }

    pub fn call(strike: f64, expiry: f64) -> Result<Self> {
        Self::new(strike, expiry, OptionKind::Call)
    }

    pub fn put(strike: f64, expiry: f64) -> Result<Self> {
        Self::new(strike, expiry, OptionKind::Put)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.strike.is_finite() {
            return Err(invalid("strike", format!("must be finite, got {}", self.strike)));
        }
        if !(self.expiry.is_finite() && self.expiry > 0.0) {
            return Err(invalid("expiry", format!("must be > 0, got {}", self.expiry)));
        }
        Ok(())
    }

    /// Checks the strike against the backbone shift of `params`.
    pub fn validate_with(&self, params: &SabrParams) -> Result<()> {
        self.validate()?;
        if self.strike + params.shift() <= 0.0 {
            return Err(SabrError::Domain(format!(
                "strike + shift must be > 0, got {}",
                self.strike + params.shift()
            )));
        }
        Ok(())
    }
}
