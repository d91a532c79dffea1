//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sabr_lab::bachelier::{self, BachelierInputs};
use sabr_lab::calibration::{self, strike_ladder, CalibrationOptions, SmileQuotes};
use sabr_lab::greeks::{self, DeltaKind, DriftConvention, RiskFactors, SensitivityMode};
use sabr_lab::mc::{self, HedgeExperiment, HedgeStrategy, Recalibration, SimConfig};
use sabr_lab::smile::{self, CevBranch};
use sabr_lab::{OptionKind, OptionSpec, SabrParams};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Least-squares slope of `ln y` against `ln x`.
fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn reference() -> SabrParams {
    SabrParams::new(0.05, 0.3, 0.5, -0.3).unwrap()
}

fn atm_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let shift = if rng.random_bool(0.3) {
            rng.random_range(0.0..0.03)
        } else {
            0.0
        };
        let p = SabrParams::with_shift(
            rng.random_range(0.005..1.0),
            rng.random_range(0.01..1.5),
            rng.random_range(0.0..=1.0),
            rng.random_range(-0.95..0.95),
            shift,
        )
        .unwrap();
        let f = rng.random_range(-0.5 * shift + 0.001..0.1);
        let tau = rng.random_range(0.05..10.0);
        let vol = smile::implied_normal_vol(tau, f, f, &p).unwrap();
        let gamma = smile::gamma_correction(f, f, &p).unwrap();
        let want = p.sigma() * smile::backbone(f, &p).unwrap() * (1.0 + gamma * p.epsilon(tau));
        worst = worst.max(rel(vol, want));
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-12 && elapsed < Duration::from_secs(1),
        format!("max rel err {worst:.2e} over 100 sets, {elapsed:.2?}"),
    )
}

fn skew_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for &(beta, f) in &[(0.3, 0.03), (0.5, 0.03), (0.7, 0.05), (1.0, 0.02), (0.5, 0.004)] {
        let sigma = 0.01 / f64::powf(f, beta);
        let p = SabrParams::new(sigma, 0.0, beta, -0.4).unwrap();
        let h = 1e-4 * f;
        let atm = |x: f64| smile::implied_normal_vol(1.0, x, x, &p).unwrap();
        let fd = (8.0 * (atm(f + h) - atm(f - h)) - (atm(f + 2.0 * h) - atm(f - 2.0 * h))) / (12.0 * h);
        let want = beta * sigma * f.powf(beta - 1.0);
        worst = worst.max(rel(fd, want));
    }
    check(
        worst <= 1e-6,
        format!("max rel err {worst:.2e} (alpha = 0, slope along K = F)"),
    )
}

fn branch_continuity() -> Outcome {
    let t = smile::ZETA_SERIES_THRESHOLD;
    let mut d_worst: f64 = 0.0;
    for rho in [-0.9, -0.3, 0.0, 0.5, 0.95] {
        for z in [t, -t, t * (1.0 - 1e-9), -t * (1.0 + 1e-9)] {
            d_worst = d_worst.max(rel(smile::distance_exact(z, rho), smile::distance_series(z, rho)));
        }
    }
    let p = SabrParams::new(0.2, 0.4, 1.0 - 1e-8, 0.1).unwrap();
    let mut z_worst: f64 = 0.0;
    for &(f, k) in &[(0.03, 0.01), (0.03, 0.029), (0.03, 0.06), (0.5, 0.02)] {
        let pw = smile::zeta_with_branch(f, k, &p, CevBranch::Power).unwrap();
        let lg = smile::zeta_with_branch(f, k, &p, CevBranch::Log).unwrap();
        z_worst = z_worst.max(rel(pw, lg));
    }
    check(
        d_worst <= 1e-12 && z_worst <= 1e-10,
        format!("D(zeta) exact vs series {d_worst:.2e}; zeta power vs log {z_worst:.2e}"),
    )
}

fn bachelier_correctness() -> Outcome {
    let mut parity: f64 = 0.0;
    let mut greek_err: f64 = 0.0;
    for &(f, vol, tau) in &[(0.03, 0.0087, 1.0), (-0.004, 0.006, 5.0), (0.05, 0.012, 0.25)] {
        let s = vol * f64::sqrt(tau);
        for i in -12..=12 {
            let d = 0.5 * i as f64;
            let k = f - d * s;
            let call = bachelier::price(&BachelierInputs::new(tau, f, k, vol, OptionKind::Call).unwrap()).unwrap();
            let put = bachelier::price(&BachelierInputs::new(tau, f, k, vol, OptionKind::Put).unwrap()).unwrap();
            parity = parity.max((call - put - (f - k)).abs());
            if i == 0 {
                continue;
            }
            // out-of-the-money side carries no intrinsic value to cancel
            let kind = if d > 0.0 { OptionKind::Put } else { OptionKind::Call };
            let px = |ff: f64, vv: f64, tt: f64| {
                bachelier::price(&BachelierInputs::new(tt, ff, k, vv, kind).unwrap()).unwrap()
            };
            let g = bachelier::greeks(&BachelierInputs::new(tau, f, k, vol, kind).unwrap()).unwrap();
            let (hf, hv, ht) = (1e-3 * s, 1e-3 * vol, 1e-3 * tau);
            let d1 = |fun: &dyn Fn(f64) -> f64, h: f64| {
                (8.0 * (fun(h) - fun(-h)) - (fun(2.0 * h) - fun(-2.0 * h))) / (12.0 * h)
            };
            let d2 = |fun: &dyn Fn(f64) -> f64, h: f64| {
                (-fun(2.0 * h) + 16.0 * fun(h) - 30.0 * fun(0.0) + 16.0 * fun(-h) - fun(-2.0 * h)) / (12.0 * h * h)
            };
            let fd = [
                d1(&|x| px(f + x, vol, tau), hf),
                d1(&|x| px(f, vol + x, tau), hv),
                d1(&|x| px(f, vol, tau + x), ht),
                d2(&|x| px(f + x, vol, tau), hf),
                d1(&|x| d1(&|y| px(f + y, vol + x, tau), hf), hv),
                d2(&|x| px(f, vol + x, tau), hv),
            ];
            let an = [g.d_forward, g.d_vol, g.d_tau, g.d2_forward, g.d2_forward_vol, g.d2_vol];
            for (a, b) in fd.iter().zip(an) {
                greek_err = greek_err.max(rel(*a, b));
            }
        }
    }
    check(
        parity <= 1e-14 && greek_err <= 1e-6,
        format!("parity {parity:.1e}; greeks vs finite differences max rel {greek_err:.2e} over |d+| <= 6"),
    )
}

fn delta_asymptotics() -> Outcome {
    // eps = alpha^2 tau = 0.01
    let p = SabrParams::new(0.05, 0.1, 0.5, -0.3).unwrap();
    let (f, tau): (f64, f64) = (0.03, 1.0);
    let atm = smile::atm_vol(f, &p).unwrap();
    let mut gaps = [Vec::new(), Vec::new()];
    let mut steps = Vec::new();
    for j in 0..8 {
        let dk = 0.5 * atm * f64::sqrt(tau) / f64::powi(2.0, j);
        let spec = OptionSpec::call(f - dk, tau).unwrap();
        let g = greeks::greeks(f, &spec, &p, SensitivityMode::AnalyticLeadingOrder).unwrap();
        let bart = greeks::asymptotic_delta(f, &spec, &p, DeltaKind::Bartlett).unwrap();
        let classic = greeks::asymptotic_delta(f, &spec, &p, DeltaKind::Classic).unwrap();
        gaps[0].push((g.delta_bartlett - bart).abs());
        gaps[1].push((g.delta_classic - classic).abs());
        steps.push(dk);
    }
    let ob = log_log_slope(&steps, &gaps[0]);
    let oc = log_log_slope(&steps, &gaps[1]);
    check(
        ob >= 0.9 && oc >= 0.9,
        format!("order in F-K: bartlett {ob:.3}, classic {oc:.3} (eps = 0.01)"),
    )
}

fn reference_quotes() -> SmileQuotes {
    let p = reference();
    let atm = smile::atm_vol(0.03, &p).unwrap();
    SmileQuotes::from_model(1.0, 0.03, &strike_ladder(0.03, 2.0 * atm, 9), &p).unwrap()
}

fn beta_insensitivity() -> Outcome {
    let start = Instant::now();
    let quotes = reference_quotes();
    let atm = smile::atm_vol(0.03, &reference()).unwrap();
    let strikes = strike_ladder(0.03, 0.5 * atm, 5);
    let sweep = match mc::beta_sweep(&quotes, &[0.0, 0.5, 1.0], &strikes) {
        Ok(s) => s,
        Err(e) => return Err(format!("sweep failed: {e}")),
    };
    let worst_rmse = sweep.fits.iter().map(|f| f.calibration.rmse).fold(0.0, f64::max);
    let min_ratio = sweep
        .spreads()
        .iter()
        .map(|&(_, classic, bartlett)| classic / bartlett)
        .fold(f64::INFINITY, f64::min);
    let elapsed = start.elapsed();
    check(
        worst_rmse < 0.02 * atm && min_ratio >= 5.0 && elapsed < Duration::from_secs(10),
        format!(
            "max rmse {:.2}% of ATM vol, min classic/bartlett spread ratio {min_ratio:.1}, {elapsed:.2?}",
            100.0 * worst_rmse / atm
        ),
    )
}

fn hedging_experiment() -> Outcome {
    let start = Instant::now();
    let truth = reference();
    let option = OptionSpec::call(0.03, 1.0).unwrap();
    let config = SimConfig::daily(10_000, 1.0, 20_240_601);
    let mut lines = Vec::new();
    let mut ok = true;
    for beta in [0.0, 1.0] {
        let hedger = match mc::fit_hedger(&truth, 0.03, 1.0, beta, 0.0) {
            Ok(fit) => fit.params,
            Err(e) => return Err(format!("hedger fit failed: {e}")),
        };
        let exp = HedgeExperiment {
            forward: 0.03,
            option,
            true_params: truth,
            hedger_params: hedger,
            rebalance_steps: 1,
            recalibration: Recalibration::AtmMatch,
        };
        let cmp = mc::hedge_compare(&exp, &[HedgeStrategy::Classic, HedgeStrategy::Bartlett], &config).unwrap();
        let (c, b) = (&cmp.stats[0], &cmp.stats[1]);
        let gap = c.std - b.std;
        let se = cmp
            .std_gap_error(HedgeStrategy::Classic, HedgeStrategy::Bartlett, 77)
            .unwrap();
        let se_indep = c.std_error_of_std.hypot(b.std_error_of_std);
        ok &= gap > 3.0 * se;
        lines.push(format!(
            "beta {beta}: std classic {:.3e}, bartlett {:.3e}, gap/se {:.1} (paired), {:.1} (independent)",
            c.std,
            b.std,
            gap / se,
            gap / se_indep
        ));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(60);
    check(ok, format!("{}; {elapsed:.2?}", lines.join("; ")))
}

fn mc_vs_expansion() -> Outcome {
    let start = Instant::now();
    // eps = 0.04
    let p = SabrParams::new(0.05, 0.2, 0.5, -0.3).unwrap();
    let (f, tau): (f64, f64) = (0.03, 1.0);
    let atm = smile::atm_vol(f, &p).unwrap();
    let strikes = strike_ladder(f, 1.5 * atm * tau.sqrt(), 7);
    let config = SimConfig::daily(200_000, tau, 8_675_309);
    let quotes = mc::mc_smile(&p, f, &strikes, &config).unwrap();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for q in &quotes {
        let model = smile::implied_normal_vol(tau, f, q.strike, &p).unwrap();
        let err = (q.implied_vol - model).abs();
        let tol = (3.0 * q.vol_std_error).max(1e-4);
        ok &= err <= tol;
        worst = worst.max(err / tol);
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(120);
    check(
        ok,
        format!(
            "max |mc - formula| / tolerance {worst:.2} over {} strikes, {elapsed:.2?}",
            quotes.len()
        ),
    )
}

fn regression() -> Outcome {
    let p = SabrParams::new(0.05, 0.3, 0.5, -0.3).unwrap();
    let config = SimConfig {
        n_paths: 1,
        n_steps: 2000,
        horizon: 2000.0 / 252.0,
        seed: 31_337,
    };
    let r = mc::regression_experiment(&p, 0.03, &config, 1, None).unwrap();
    let z = (r.slope - 1.0) / r.slope_std_error;
    check(
        z.abs() <= 3.0 && (r.r_squared - 0.09).abs() <= 0.05,
        format!(
            "slope {:.3} ({z:+.2} se), R^2 {:.3} vs rho^2 0.09, n = {}",
            r.slope, r.r_squared, r.n_observations
        ),
    )
}

fn calibration_round_trip() -> Outcome {
    let truth = reference();
    let quotes = reference_quotes();
    let seed = calibration::initial_guess(&quotes, 0.5, 0.0);
    let options = CalibrationOptions::default();
    let mut recovered = 0;
    let mut worst: f64 = 0.0;
    let mut deterministic = true;
    let starts = calibration::start_points(&seed, 5);
    for start in &starts {
        let a = calibration::calibrate_from(&quotes, start, &options).unwrap();
        let b = calibration::calibrate_from(&quotes, start, &options).unwrap();
        deterministic &= a == b;
        let err = [
            rel(a.params.sigma(), truth.sigma()),
            rel(a.params.alpha(), truth.alpha()),
            rel(a.params.rho(), truth.rho()),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        worst = worst.max(err);
        if err <= 1e-6 {
            recovered += 1;
        }
    }
    let full_a = calibration::calibrate(&quotes, 0.5, 0.0, None).unwrap();
    let full_b = calibration::calibrate(&quotes, 0.5, 0.0, None).unwrap();
    deterministic &= full_a == full_b;
    check(
        recovered == starts.len() && starts.len() == 5 && deterministic,
        format!("{recovered}/5 starts recovered, max rel err {worst:.2e}, deterministic {deterministic}"),
    )
}

fn decomposition_consistency() -> Outcome {
    let p = reference();
    let (f, tau): (f64, f64) = (0.03, 1.0);
    let atm = smile::atm_vol(f, &p).unwrap();
    let spec = OptionSpec::call(f + 0.5 * atm, tau).unwrap();
    let value = |t: f64, ff: f64, s: f64| {
        let q = p.with_sigma(s).unwrap();
        let sp = OptionSpec::call(spec.strike, t).unwrap();
        greeks::greeks(ff, &sp, &q, SensitivityMode::FiniteDifference)
            .unwrap()
            .price
    };
    let report = greeks::greeks(f, &spec, &p, SensitivityMode::FiniteDifference).unwrap();
    let (sigma, alpha, rho) = (p.sigma(), p.alpha(), p.rho());
    let c = smile::backbone(f, &p).unwrap();
    let rho_bar = (1.0 - rho * rho).sqrt();

    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for j in 4..=9 {
        let h = f64::powi(2.0, -j);
        // For each sign of the forward shock, average the two vol shocks
        // that reproduce the second moments of (dF, d sigma).
        let mut worst: f64 = 0.0;
        for a in [1.0, -1.0] {
            let mut e = 0.0;
            for b in [1.0, -1.0] {
                let df = sigma * c * h.sqrt() * a;
                let ds = alpha * sigma * h.sqrt() * (rho * a + rho_bar * b);
                let factors = RiskFactors::Orthogonal {
                    dt: h,
                    d_forward: df,
                    d_sigma_perp: greeks::sigma_perp(df, ds, f, &p).unwrap(),
                };
                let predicted = greeks::predict_pnl(&report, &p, f, factors, DriftConvention::ItoConsistent).unwrap();
                e += 0.5 * (value(tau - h, f + df, sigma + ds) - report.price - predicted);
            }
            worst = worst.max(e.abs());
        }
        hs.push(h);
        errs.push(worst);
    }
    let order = log_log_slope(&hs, &errs);
    check(
        order >= 1.4,
        format!(
            "repricing error order {order:.3} over h = 1/16 .. 1/512 (last error {:.2e})",
            errs[errs.len() - 1]
        ),
    )
}

type Criterion = fn() -> Outcome;

fn main() {
    let criteria: [(&str, Criterion); 11] = [
        ("1 ATM identity", atm_identity),
        ("2 skew identity", skew_identity),
        ("3 branch continuity", branch_continuity),
        ("4 Bachelier correctness", bachelier_correctness),
        ("5 delta asymptotics", delta_asymptotics),
        ("6 beta insensitivity", beta_insensitivity),
        ("7 hedging experiment", hedging_experiment),
        ("8 MC vs expansion", mc_vs_expansion),
        ("9 regression experiment", regression),
        ("10 calibration round trip", calibration_round_trip),
        ("11 risk decomposition", decomposition_consistency),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
