//! Fixed-beta calibration of `(sigma, alpha, rho)` to a strike ladder of
//! normal implied vols.
//!
//! The search runs in the unconstrained coordinates
//! `(ln sigma, ln alpha, atanh rho)`, so every trial point is a valid
//! parameter set, and is restarted from five deterministic offsets around
//! [`initial_guess`].

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bachelier;
use crate::error::{Result, SabrError};
use crate::model::SabrParams;
use crate::simplex::NelderMead;
use crate::smile::{self, SmileConfig};

/// Fitted alpha below this is reported with `rho = 0`.
pub const ALPHA_IDENTIFIABLE: f64 = 1e-6;

const RHO_LIMIT: f64 = 1.0 - 1e-12;

/// Offsets in `(ln sigma, ln alpha, atanh rho)` for the multi-start legs.
const START_OFFSETS: [[f64; 3]; 5] = [
    [0.0, 0.0, 0.0],
    [0.2, -0.2, 0.2],
    [-0.2, 0.2, -0.2],
    [0.2, 0.2, -0.2],
    [-0.2, -0.2, 0.2],
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuotePoint {
    pub strike: f64,
    pub normal_vol: f64,
}

/// Normal implied vols for one expiry, sorted by strike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmileQuotes {
    expiry: f64,
    forward: f64,
    points: Vec<QuotePoint>,
}

impl SmileQuotes {
    /// Sorts `points` by strike. Needs at least three distinct strikes and
    /// positive vols.
    pub fn new(expiry: f64, forward: f64, mut points: Vec<QuotePoint>) -> Result<Self> {
        if !(expiry.is_finite() && expiry > 0.0) {
            return Err(SabrError::InvalidQuotes(format!("expiry must be > 0, got {expiry}")));
        }
        if !forward.is_finite() {
            return Err(SabrError::InvalidQuotes("forward must be finite".into()));
        }
        if points.len() < 3 {
            return Err(SabrError::InvalidQuotes(format!(
                "need at least 3 quotes, got {}",
                points.len()
            )));
        }
        for p in &points {
            if !p.strike.is_finite() {
                return Err(SabrError::InvalidQuotes(format!("strike {} is not finite", p.strike)));
            }
            if !(p.normal_vol.is_finite() && p.normal_vol > 0.0) {
                return Err(SabrError::InvalidQuotes(format!(
                    "vol at strike {} must be > 0, got {}",
                    p.strike, p.normal_vol
                )));
            }
        }
        points.sort_by(|a, b| a.strike.total_cmp(&b.strike));
        if let Some(w) = points.windows(2).find(|w| w[0].strike == w[1].strike) {
            return Err(SabrError::InvalidQuotes(format!("duplicate strike {}", w[0].strike)));
        }
        Ok(Self {
            expiry,
            forward,
            points,
        })
    }

    /// Quotes generated by the smile formula itself.
    pub fn from_model(expiry: f64, forward: f64, strikes: &[f64], params: &SabrParams) -> Result<Self> {
        let points = strikes
            .iter()
            .map(|&k| {
                Ok(QuotePoint {
                    strike: k,
                    normal_vol: smile::implied_normal_vol(expiry, forward, k, params)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(expiry, forward, points)
    }

    pub fn expiry(&self) -> f64 {
        self.expiry
    }

    pub fn forward(&self) -> f64 {
        self.forward
    }

    pub fn points(&self) -> &[QuotePoint] {
        &self.points
    }

    /// Vol at the forward by linear interpolation, flat beyond the ladder.
    pub fn atm_vol(&self) -> f64 {
        let pts = &self.points;
        let f = self.forward;
        if f <= pts[0].strike {
            return pts[0].normal_vol;
        }
        if f >= pts[pts.len() - 1].strike {
            return pts[pts.len() - 1].normal_vol;
        }
        let i = pts.partition_point(|p| p.strike <= f);
        let (a, b) = (pts[i - 1], pts[i]);
        let w = (f - a.strike) / (b.strike - a.strike);
        a.normal_vol + w * (b.normal_vol - a.normal_vol)
    }

    fn check_shift(&self, shift: f64) -> Result<()> {
        if !(self.forward + shift > 0.0) {
            return Err(SabrError::InvalidQuotes(format!(
                "forward + shift must be > 0, got {}",
                self.forward + shift
            )));
        }
        if let Some(p) = self.points.iter().find(|p| !(p.strike + shift > 0.0)) {
            return Err(SabrError::InvalidQuotes(format!(
                "strike + shift must be > 0, got {}",
                p.strike + shift
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    #[default]
    Uniform,
    /// Weights proportional to the Bachelier vega at the quoted vol.
    Vega,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub weighting: Weighting,
    /// Starting point; [`initial_guess`] when absent.
    pub init: Option<SabrParams>,
    /// Number of multi-start legs, at most five.
    pub starts: usize,
    pub max_evals: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            weighting: Weighting::Uniform,
            init: None,
            starts: START_OFFSETS.len(),
            max_evals: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub strike: f64,
    pub market_vol: f64,
    pub model_vol: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub params: SabrParams,
    /// Root-mean-square vol error, unweighted.
    pub rmse: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Fitted alpha fell below [`ALPHA_IDENTIFIABLE`]; rho is then reported as 0.
    pub non_identifiable: bool,
    pub residuals: Vec<Residual>,
}

/// Heuristic starting point read off the quoted smile.
///
/// `sigma` matches the interpolated at-the-money vol, the least-squares
/// slope fixes `rho alpha` through the at-the-money strike skew
/// `(sigma C' + rho alpha) / 2`, and the curvature fixes `alpha`.
pub fn initial_guess(quotes: &SmileQuotes, beta: f64, shift: f64) -> SabrParams {
    let f = quotes.forward + shift;
    let c = if f > 0.0 {
        smile::backbone_at(f, beta)
    } else {
        smile::backbone_at(1.0, 0.0)
    };
    let atm = quotes.atm_vol();
    let sigma = (atm / c.value).max(f64::MIN_POSITIVE);

    let (slope, curvature) = quadratic_fit(quotes);
    let rho_alpha = 2.0 * slope - sigma * c.first;
    let alpha_sq = 6.0 * atm * curvature + 1.5 * rho_alpha * rho_alpha;
    let alpha = if alpha_sq.is_finite() && alpha_sq > 0.0 {
        alpha_sq.sqrt().clamp(0.05, 2.0)
    } else {
        0.05
    };
    let rho = (rho_alpha / alpha).clamp(-0.9, 0.9);
    let rho = if rho.is_finite() { rho } else { 0.0 };
    let beta = beta.clamp(0.0, 1.0);
    SabrParams::with_shift(sigma, alpha, beta, rho, shift.max(0.0))
        .unwrap_or_else(|_| SabrParams::with_shift(1e-2, 0.05, beta, 0.0, 0.0).expect("valid fallback"))
}

/// Least-squares `vol = a + s x + c x^2` in `x = K - F`; returns `(s, c)`.
fn quadratic_fit(quotes: &SmileQuotes) -> (f64, f64) {
    let f = quotes.forward;
    let scale = quotes
        .points
        .iter()
        .map(|p| (p.strike - f).abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    // normal equations in scaled x
    let mut m = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for p in &quotes.points {
        let x = (p.strike - f) / scale;
        let basis = [1.0, x, x * x];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += basis[i] * basis[j];
            }
            r[i] += basis[i] * p.normal_vol;
        }
    }
    match solve3(m, r) {
        Some(c) => (c[1] / scale, c[2] / (scale * scale)),
        None => (0.0, 0.0),
    }
}

fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..3 {
            let pivot = m[col];
            let factor = m[row][col] / pivot[col];
            for (v, p) in m[row].iter_mut().zip(pivot).skip(col) {
                *v -= factor * p;
            }
            r[row] -= factor * r[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|j| m[row][j] * x[j]).sum();
        x[row] = (r[row] - tail) / m[row][row];
    }
    Some(x)
}

fn to_params(x: &[f64], beta: f64, shift: f64) -> Result<SabrParams> {
    let rho = x[2].tanh().clamp(-RHO_LIMIT, RHO_LIMIT);
    SabrParams::with_shift(x[0].exp(), x[1].exp(), beta, rho, shift)
}

fn to_coords(p: &SabrParams) -> [f64; 3] {
    [
        p.sigma().ln(),
        p.alpha().max(1e-300).ln(),
        p.rho().clamp(-RHO_LIMIT, RHO_LIMIT).atanh(),
    ]
}

/// The multi-start points: `seed` itself, then fixed offsets of +-0.2 in
/// `(ln sigma, ln alpha, atanh rho)`. At most five.
pub fn start_points(seed: &SabrParams, count: usize) -> Vec<SabrParams> {
    let base = to_coords(seed);
    START_OFFSETS[..count.clamp(1, START_OFFSETS.len())]
        .iter()
        .map(|off| {
            let x = [base[0] + off[0], base[1] + off[1], base[2] + off[2]];
            to_params(&x, seed.beta(), seed.shift()).expect("offsets keep parameters valid")
        })
        .collect()
}

struct Objective<'a> {
    quotes: &'a SmileQuotes,
    weights: Vec<f64>,
    scale: f64,
    beta: f64,
    shift: f64,
}

impl<'a> Objective<'a> {
    fn new(quotes: &'a SmileQuotes, beta: f64, shift: f64, weighting: Weighting) -> Self {
        let tau = quotes.expiry;
        let weights = match weighting {
            Weighting::Uniform => vec![1.0; quotes.points.len()],
            Weighting::Vega => {
                let vegas: Vec<f64> = quotes
                    .points
                    .iter()
                    .map(|p| {
                        let d = (quotes.forward - p.strike) / (p.normal_vol * tau.sqrt());
                        tau.sqrt() * bachelier::norm_pdf(d)
                    })
                    .collect();
                let top = vegas.iter().cloned().fold(0.0, f64::max);
                vegas.iter().map(|v| v / top).collect()
            }
        };
        Self {
            quotes,
            weights,
            scale: 1e-4 * quotes.atm_vol(),
            beta,
            shift,
        }
    }

    /// Weighted sum of squared vol errors, measured in units of
    /// `1e-4 * atm_vol` so that the simplex tolerance sits well below the
    /// precision the smile formula can resolve.
    fn value(&self, p: &SabrParams) -> f64 {
        let cfg = SmileConfig::default();
        let f = self.quotes.forward + p.shift();
        self.quotes
            .points
            .iter()
            .zip(&self.weights)
            .map(|(q, w)| {
                let v = smile::vol_shifted(self.quotes.expiry, f, q.strike + p.shift(), p, &cfg);
                let e = (v - q.normal_vol) / self.scale;
                w * e * e
            })
            .sum()
    }

    fn at(&self, x: &[f64]) -> f64 {
        match to_params(x, self.beta, self.shift) {
            Ok(p) => self.value(&p),
            Err(_) => f64::INFINITY,
        }
    }
}

struct Leg {
    params: SabrParams,
    value: f64,
    iterations: usize,
    evaluations: usize,
    converged: bool,
}

fn run_leg(obj: &Objective, start: [f64; 3], max_evals: usize) -> Leg {
    let nm = NelderMead {
        max_evals,
        ..NelderMead::default()
    };
    let m = nm.minimize(|x| obj.at(x), &start);
    let params = to_params(&m.x, obj.beta, obj.shift).expect("simplex only keeps finite points");
    Leg {
        params,
        value: m.value,
        iterations: m.iterations,
        evaluations: m.evaluations,
        converged: m.converged,
    }
}

fn check_inputs(quotes: &SmileQuotes, beta: f64, shift: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(SabrError::InvalidParameter {
            name: "beta",
            reason: format!("must be in [0, 1], got {beta}"),
        });
    }
    if !(shift.is_finite() && shift >= 0.0) {
        return Err(SabrError::InvalidParameter {
            name: "shift",
            reason: format!("must be >= 0, got {shift}"),
        });
    }
    quotes.check_shift(shift)
}

/// Multi-start calibration with default options and an optional seed point.
pub fn calibrate(quotes: &SmileQuotes, beta: f64, shift: f64, init: Option<SabrParams>) -> Result<CalibrationResult> {
    calibrate_with(
        quotes,
        beta,
        shift,
        &CalibrationOptions {
            init,
            ..CalibrationOptions::default()
        },
    )
}

pub fn calibrate_with(
    quotes: &SmileQuotes,
    beta: f64,
    shift: f64,
    options: &CalibrationOptions,
) -> Result<CalibrationResult> {
    check_inputs(quotes, beta, shift)?;
    let obj = Objective::new(quotes, beta, shift, options.weighting);
    let seed = match options.init {
        Some(p) => SabrParams::with_shift(p.sigma(), p.alpha().max(1e-8), beta, p.rho(), shift)?,
        None => initial_guess(quotes, beta, shift),
    };
    let legs: Vec<Leg> = start_points(&seed, options.starts)
        .par_iter()
        .map(|p| run_leg(&obj, to_coords(p), options.max_evals))
        .collect();

    // fixed-order reduction: lowest objective, then lowest alpha
    let best = legs
        .iter()
        .min_by(|a, b| {
            a.value
                .total_cmp(&b.value)
                .then(a.params.alpha().total_cmp(&b.params.alpha()))
        })
        .expect("at least one leg");
    for (i, leg) in legs.iter().enumerate() {
        debug!(
            "calibration leg {i}: objective {:.3e}, {} evals, converged {}",
            leg.value, leg.evaluations, leg.converged
        );
    }

    // the unperturbed leg starts at the seed, so the result is never worse
    let fitted = prefer_flat_limit(&obj, best.params, best.value);
    let mut result = finish(quotes, fitted, legs.iter().map(|l| l.iterations).sum(), best.converged);
    result.evaluations = legs.iter().map(|l| l.evaluations).sum();
    Ok(result)
}

/// Single-start calibration from `start`.
pub fn calibrate_from(
    quotes: &SmileQuotes,
    start: &SabrParams,
    options: &CalibrationOptions,
) -> Result<CalibrationResult> {
    let (beta, shift) = (start.beta(), start.shift());
    check_inputs(quotes, beta, shift)?;
    let obj = Objective::new(quotes, beta, shift, options.weighting);
    let leg = run_leg(&obj, to_coords(start), options.max_evals);
    let fitted = prefer_flat_limit(&obj, leg.params, leg.value);
    let mut result = finish(quotes, fitted, leg.iterations, leg.converged);
    result.evaluations = leg.evaluations;
    Ok(result)
}

/// `alpha = 0` lies at infinity in the search coordinates; compare the fit
/// against that boundary point explicitly. There the smile is
/// `sigma * q(F, K)`, linear in `sigma`, so the best `sigma` is closed form.
fn prefer_flat_limit(obj: &Objective, fitted: SabrParams, value: f64) -> SabrParams {
    let f = obj.quotes.forward + obj.shift;
    let (mut num, mut den) = (0.0, 0.0);
    for (p, w) in obj.quotes.points.iter().zip(&obj.weights) {
        let q = smile::mean_backbone(f, p.strike + obj.shift, obj.beta);
        num += w * q * p.normal_vol;
        den += w * q * q;
    }
    match SabrParams::with_shift(num / den, 0.0, fitted.beta(), 0.0, fitted.shift()) {
        Ok(flat) if obj.value(&flat) <= value => flat,
        _ => fitted,
    }
}

fn finish(quotes: &SmileQuotes, fitted: SabrParams, iterations: usize, converged: bool) -> CalibrationResult {
    let cfg = SmileConfig::default();
    let f = quotes.forward + fitted.shift();
    let residuals: Vec<Residual> = quotes
        .points
        .iter()
        .map(|q| {
            let model_vol = smile::vol_shifted(quotes.expiry, f, q.strike + fitted.shift(), &fitted, &cfg);
            Residual {
                strike: q.strike,
                market_vol: q.normal_vol,
                model_vol,
                residual: model_vol - q.normal_vol,
            }
        })
        .collect();
    let rmse = (residuals.iter().map(|r| r.residual * r.residual).sum::<f64>() / residuals.len() as f64).sqrt();

    let non_identifiable = fitted.alpha() < ALPHA_IDENTIFIABLE;
    let params = if non_identifiable {
        SabrParams::with_shift(fitted.sigma(), fitted.alpha(), fitted.beta(), 0.0, fitted.shift())
            .expect("rho = 0 is valid")
    } else {
        fitted
    };
    CalibrationResult {
        params,
        rmse,
        iterations,
        evaluations: 0,
        converged,
        non_identifiable,
        residuals,
    }
}

/// `count` evenly spaced strikes over `[forward - half_width, forward + half_width]`.
pub fn strike_ladder(forward: f64, half_width: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![forward];
    }
    (0..count)
        .map(|i| forward - half_width + 2.0 * half_width * i as f64 / (count - 1) as f64)
        .collect()
}
