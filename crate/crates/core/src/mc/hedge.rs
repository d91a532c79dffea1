use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sim::{check_start, PathWalker, SimConfig};
use crate::bachelier;
use crate::calibration::{self, strike_ladder, CalibrationResult, SmileQuotes};
use crate::error::{Result, SabrError};
use crate::greeks::deltas_unchecked;
use crate::model::{OptionKind, OptionSpec, SabrParams};
use crate::smile::{self, backbone_at, SmileConfig};

const BOOTSTRAP_RESAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HedgeStrategy {
    Classic,
    Bartlett,
    /// `dB/dF` at the hedger's implied vol, with no smile adjustment.
    Bachelier,
}

impl HedgeStrategy {
    pub const ALL: [HedgeStrategy; 3] = [Self::Classic, Self::Bartlett, Self::Bachelier];

    pub fn label(self) -> &'static str {
        match self {
            Self::Classic => "classic",
            Self::Bartlett => "bartlett",
            Self::Bachelier => "bachelier",
        }
    }
}

impl std::str::FromStr for HedgeStrategy {
    type Err = SabrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classic" => Ok(Self::Classic),
            "bartlett" => Ok(Self::Bartlett),
            "bachelier" => Ok(Self::Bachelier),
            other => Err(SabrError::InvalidParameter {
                name: "strategy",
                reason: format!("expected classic, bartlett or bachelier, got {other:?}"),
            }),
        }
    }
}

/// How the hedger turns the observed model state into its own `sigma`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recalibration {
    /// Match the leading-order at-the-money vol:
    /// `sigma_hedger = sigma_t * C_true(F_t) / C_hedger(F_t)`.
    #[default]
    AtmMatch,
    /// Scale the hedger's initial `sigma` by `sigma_t / sigma_0`, ignoring
    /// the forward.
    SigmaRatio,
}

/// One short option hedged with forwards under possibly misspecified
/// hedger parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HedgeExperiment {
    pub forward: f64,
    pub option: OptionSpec,
    pub true_params: SabrParams,
    pub hedger_params: SabrParams,
    /// Simulation steps between hedge adjustments.
    pub rebalance_steps: usize,
    #[serde(default)]
    pub recalibration: Recalibration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeStats {
    pub strategy: HedgeStrategy,
    pub mean: f64,
    pub std: f64,
    /// Mean absolute terminal P&L.
    pub mae: f64,
    /// Bootstrap standard error of `std`.
    pub std_error_of_std: f64,
    pub n_paths: usize,
    pub rebalance_steps: usize,
}

/// Per-strategy statistics and terminal P&L, all on the same paths.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgeComparison {
    pub stats: Vec<HedgeStats>,
    /// `pnls[strategy][path]`, in the order of `stats`.
    pub pnls: Vec<Vec<f64>>,
}

impl HedgeComparison {
    pub fn get(&self, strategy: HedgeStrategy) -> Option<&HedgeStats> {
        self.stats.iter().find(|s| s.strategy == strategy)
    }

    /// Paired bootstrap standard error of `std(a) - std(b)`, resampling the
    /// common paths jointly.
    pub fn std_gap_error(&self, a: HedgeStrategy, b: HedgeStrategy, seed: u64) -> Option<f64> {
        let ia = self.stats.iter().position(|s| s.strategy == a)?;
        let ib = self.stats.iter().position(|s| s.strategy == b)?;
        let (xa, xb) = (&self.pnls[ia], &self.pnls[ib]);
        Some(bootstrap(xa.len(), BOOTSTRAP_RESAMPLES, seed, |idx| {
            std_of(idx.iter().map(|&i| xa[i])) - std_of(idx.iter().map(|&i| xb[i]))
        }))
    }
}

fn std_of(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    (xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt()
}

// Standard deviation over resamples of `stat`, each resample drawn from its
// own ChaCha stream.
fn bootstrap(n: usize, resamples: usize, seed: u64, stat: impl Fn(&[usize]) -> f64 + Sync) -> f64 {
    let values: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            stat(&idx)
        })
        .collect();
    std_of(values.iter().copied())
}

/// Bootstrap standard error of the sample standard deviation of `xs`.
pub fn bootstrap_std_error(xs: &[f64], resamples: usize, seed: u64) -> f64 {
    bootstrap(xs.len(), resamples, seed, |idx| std_of(idx.iter().map(|&i| xs[i])))
}

/// Fits hedger parameters with CEV exponent `beta` to the smile that
/// `true_params` generates at inception (nine strikes over
/// `+-2 sigma_ATM sqrt(tau)`).
pub fn fit_hedger(
    true_params: &SabrParams,
    forward: f64,
    expiry: f64,
    beta: f64,
    shift: f64,
) -> Result<CalibrationResult> {
    let atm = smile::atm_vol(forward, true_params)?;
    let strikes = strike_ladder(forward, 2.0 * atm * expiry.sqrt(), 9);
    let quotes = SmileQuotes::from_model(expiry, forward, &strikes, true_params)?;
    calibration::calibrate(&quotes, beta, shift, None)
}

struct Hedger {
    params: SabrParams,
    true_params: SabrParams,
    recalibration: Recalibration,
}

impl Hedger {
    fn params_at(&self, forward: f64, sigma_t: f64) -> Option<SabrParams> {
        let ft = forward + self.true_params.shift();
        let fh = forward + self.params.shift();
        if !(ft > 0.0 && fh > 0.0) {
            return None;
        }
        let sigma = match self.recalibration {
            Recalibration::AtmMatch => {
                sigma_t * backbone_at(ft, self.true_params.beta()).value / backbone_at(fh, self.params.beta()).value
            }
            Recalibration::SigmaRatio => self.params.sigma() * sigma_t / self.true_params.sigma(),
        };
        (sigma.is_finite() && sigma > 0.0).then(|| self.params.bumped_sigma(sigma))
    }
}

fn steps_to_expiry(option: &OptionSpec, config: &SimConfig) -> Result<usize> {
    let dt = config.dt();
    let n = (option.expiry / dt).round();
    if option.expiry > config.horizon * (1.0 + 1e-12) {
        return Err(SabrError::Config(format!(
            "option expiry {} exceeds simulation horizon {}",
            option.expiry, config.horizon
        )));
    }
    if n < 1.0 || (n * dt - option.expiry).abs() > 1e-9 * option.expiry.max(1.0) {
        return Err(SabrError::Config(format!(
            "option expiry {} is not on the simulation grid (dt = {dt})",
            option.expiry
        )));
    }
    Ok(n as usize)
}

/// Runs every strategy in `strategies` on one set of paths.
///
/// The hedger sells the option at its own model price, then holds the
/// strategy delta in forwards, adjusted every `rebalance_steps` steps.
/// Terminal P&L is `premium + sum delta_i (F_{i+1} - F_i) - payoff`.
pub fn hedge_compare(
    exp: &HedgeExperiment,
    strategies: &[HedgeStrategy],
    config: &SimConfig,
) -> Result<HedgeComparison> {
    config.validate()?;
    exp.option.validate_with(&exp.true_params)?;
    check_start(&exp.true_params, exp.forward)?;
    if exp.rebalance_steps == 0 {
        return Err(SabrError::Config("rebalance_steps must be >= 1".into()));
    }
    if strategies.is_empty() {
        return Err(SabrError::Config("no hedge strategy selected".into()));
    }
    let n_exp = steps_to_expiry(&exp.option, config)?;
    let dt = config.dt();
    let hedger = Hedger {
        params: exp.hedger_params,
        true_params: exp.true_params,
        recalibration: exp.recalibration,
    };
    let opt = exp.option;
    let cfg = SmileConfig::default();

    let p0 = hedger
        .params_at(exp.forward, exp.true_params.sigma())
        .ok_or_else(|| SabrError::Domain("hedger cannot price the option at inception".into()))?;
    let vol0 = smile::implied_normal_vol_with(opt.expiry, exp.forward, opt.strike, &p0, &cfg)?;
    let premium = bachelier::price_unchecked(opt.expiry, exp.forward, opt.strike, vol0, opt.kind);

    let per_path: Vec<Vec<f64>> = (0..config.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut w = PathWalker::new(&exp.true_params, exp.forward, dt, config.seed, i as u64);
            let mut gains = vec![0.0; strategies.len()];
            let mut position = vec![0.0; strategies.len()];
            for step in 0..n_exp {
                if step % exp.rebalance_steps == 0 {
                    let tau = opt.expiry - step as f64 * dt;
                    hedge_ratios(&hedger, &w, &opt, tau, strategies, &mut position);
                }
                let before = w.forward;
                w.step();
                let df = w.forward - before;
                for (g, d) in gains.iter_mut().zip(&position) {
                    *g += d * df;
                }
            }
            let payoff = opt.kind.payoff(w.forward, opt.strike);
            gains.iter().map(|g| premium + g - payoff).collect()
        })
        .collect();

    let mut pnls = vec![Vec::with_capacity(config.n_paths); strategies.len()];
    for path in per_path {
        for (s, v) in pnls.iter_mut().zip(path) {
            s.push(v);
        }
    }
    let stats = strategies
        .iter()
        .zip(&pnls)
        .map(|(&strategy, xs)| {
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            HedgeStats {
                strategy,
                mean,
                std: std_of(xs.iter().copied()),
                mae: xs.iter().map(|x| x.abs()).sum::<f64>() / n,
                std_error_of_std: bootstrap_std_error(xs, BOOTSTRAP_RESAMPLES, config.seed ^ 0x5eed),
                n_paths: xs.len(),
                rebalance_steps: exp.rebalance_steps,
            }
        })
        .collect();
    Ok(HedgeComparison { stats, pnls })
}

fn hedge_ratios(
    hedger: &Hedger,
    w: &PathWalker,
    opt: &OptionSpec,
    tau: f64,
    strategies: &[HedgeStrategy],
    out: &mut [f64],
) {
    let params = if w.absorbed {
        None
    } else {
        hedger.params_at(w.forward, w.sigma)
    };
    let k = opt.strike + hedger.params.shift();
    let Some(params) = params.filter(|_| k > 0.0) else {
        // frozen or outside the hedger's domain: hold the payoff slope
        let slope = match (opt.kind, w.forward > opt.strike) {
            (OptionKind::Call, true) => 1.0,
            (OptionKind::Put, false) => -1.0,
            _ => 0.0,
        };
        out.iter_mut().for_each(|d| *d = slope);
        return;
    };
    let spec = OptionSpec {
        strike: opt.strike,
        expiry: tau,
        kind: opt.kind,
    };
    let d = deltas_unchecked(w.forward, w.forward + params.shift(), k, &spec, &params);
    for (slot, s) in out.iter_mut().zip(strategies) {
        *slot = match s {
            HedgeStrategy::Classic => d.classic,
            HedgeStrategy::Bartlett => d.bartlett,
            HedgeStrategy::Bachelier => d.bachelier,
        };
    }
}

/// Statistics of a single strategy.
pub fn hedge_backtest(exp: &HedgeExperiment, strategy: HedgeStrategy, config: &SimConfig) -> Result<HedgeStats> {
    let mut cmp = hedge_compare(exp, &[strategy], config)?;
    Ok(cmp.stats.remove(0))
}
