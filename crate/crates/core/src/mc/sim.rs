use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SabrError};
use crate::model::SabrParams;

pub const STEPS_PER_YEAR: f64 = 252.0;

/// Path count, time grid and seed. `sigma` steps are exact lognormal, the
/// forward is Euler with absorption at `-shift`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub horizon: f64,
    pub seed: u64,
}

impl SimConfig {
    /// Daily steps over `horizon` years.
    pub fn daily(n_paths: usize, horizon: f64, seed: u64) -> Self {
        Self {
            n_paths,
            n_steps: (horizon * STEPS_PER_YEAR).round().max(1.0) as usize,
            horizon,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(SabrError::Config("n_paths must be >= 1".into()));
        }
        if self.n_steps == 0 {
            return Err(SabrError::Config("n_steps must be >= 1".into()));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(SabrError::Config(format!("horizon must be > 0, got {}", self.horizon)));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }
}

/// Simulated `(F, sigma)` paths on a shared time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub times: Vec<f64>,
    /// `forwards[path][step]`, `n_steps + 1` values per path.
    pub forwards: Vec<Vec<f64>>,
    pub sigmas: Vec<Vec<f64>>,
    /// The forward reached `-shift` and stayed there.
    pub absorbed: Vec<bool>,
}

impl PathSet {
    pub fn n_paths(&self) -> usize {
        self.forwards.len()
    }

    pub fn terminal_forwards(&self) -> impl Iterator<Item = f64> + '_ {
        self.forwards.iter().map(|p| *p.last().expect("non-empty path"))
    }
}

/// One path advanced step by step.
pub(crate) struct PathWalker {
    rng: ChaCha8Rng,
    pub forward: f64,
    pub sigma: f64,
    pub absorbed: bool,
    sqrt_dt: f64,
    alpha: f64,
    beta: f64,
    rho: f64,
    rho_perp: f64,
    shift: f64,
    sigma_drift: f64,
}

impl PathWalker {
    pub fn new(params: &SabrParams, f0: f64, dt: f64, seed: u64, path: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path);
        let (alpha, rho) = (params.alpha(), params.rho());
        Self {
            rng,
            forward: f0,
            sigma: params.sigma(),
            absorbed: false,
            sqrt_dt: dt.sqrt(),
            alpha,
            beta: params.beta(),
            rho,
            rho_perp: (1.0 - rho * rho).sqrt(),
            shift: params.shift(),
            sigma_drift: -0.5 * alpha * alpha * dt,
        }
    }

    /// Advances one step; returns the Brownian increments `(dW, dZ)`.
    pub fn step(&mut self) -> (f64, f64) {
        let z1: f64 = self.rng.sample(StandardNormal);
        let z2: f64 = self.rng.sample(StandardNormal);
        let dw = self.sqrt_dt * z1;
        let dz = self.sqrt_dt * (self.rho * z1 + self.rho_perp * z2);
        if !self.absorbed {
            let x = self.forward + self.shift;
            let next = self.forward + self.sigma * x.powf(self.beta) * dw;
            if self.beta > 0.0 && next + self.shift <= 0.0 {
                self.forward = -self.shift;
                self.absorbed = true;
            } else {
                self.forward = next;
            }
        }
        self.sigma *= (self.alpha * dz + self.sigma_drift).exp();
        (dw, dz)
    }
}

pub(crate) fn check_start(params: &SabrParams, f0: f64) -> Result<()> {
    if !(f0.is_finite() && f0 + params.shift() > 0.0) {
        return Err(SabrError::Domain(format!(
            "initial forward + shift must be > 0, got {}",
            f0 + params.shift()
        )));
    }
    Ok(())
}

/// Simulates `config.n_paths` paths from `f0`.
pub fn simulate(params: &SabrParams, f0: f64, config: &SimConfig) -> Result<PathSet> {
    config.validate()?;
    check_start(params, f0)?;
    let dt = config.dt();
    let n = config.n_steps;
    let paths: Vec<(Vec<f64>, Vec<f64>, bool)> = (0..config.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut w = PathWalker::new(params, f0, dt, config.seed, i as u64);
            let mut fs = Vec::with_capacity(n + 1);
            let mut ss = Vec::with_capacity(n + 1);
            fs.push(w.forward);
            ss.push(w.sigma);
            for _ in 0..n {
                w.step();
                fs.push(w.forward);
                ss.push(w.sigma);
            }
            (fs, ss, w.absorbed)
        })
        .collect();
    let mut set = PathSet {
        times: (0..=n).map(|i| i as f64 * dt).collect(),
        forwards: Vec::with_capacity(paths.len()),
        sigmas: Vec::with_capacity(paths.len()),
        absorbed: Vec::with_capacity(paths.len()),
    };
    for (f, s, a) in paths {
        set.forwards.push(f);
        set.sigmas.push(s);
        set.absorbed.push(a);
    }
    Ok(set)
}

/// Mean and standard error of a sample, summed in index order.
pub(crate) fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}
