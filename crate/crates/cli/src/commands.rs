use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use sabr_lab::calibration::{self, CalibrationOptions, Weighting};
use sabr_lab::greeks::{self, GreekReport, SensitivityMode};
use sabr_lab::mc::{self, HedgeExperiment, HedgeStrategy, Recalibration, RegressionResult, SimConfig};
use sabr_lab::smile::{self, Midpoint, SmileConfig, SmilePoint};
use sabr_lab::{OptionKind, OptionSpec, SabrParams};

use crate::error::CliError;
use crate::io::{self, RunManifest};

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub rho: f64,
    /// Backbone shift: C(F) = (F + shift)^beta.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub shift: f64,
}

impl ModelArgs {
    fn params(&self) -> Result<SabrParams, CliError> {
        Ok(SabrParams::with_shift(
            self.sigma, self.alpha, self.beta, self.rho, self.shift,
        )?)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MidpointArg {
    Arithmetic,
    Geometric,
}

#[derive(Debug, Args, Serialize)]
pub struct VolArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub forward: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub strike: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub expiry: f64,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Expansion point of the Gamma correction.
    #[arg(long, value_enum, default_value = "arithmetic")]
    pub midpoint: MidpointArg,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Serialize)]
struct VolOutput<'a> {
    inputs: &'a VolArgs,
    smile: SmilePoint,
}

pub fn vol(args: &VolArgs) -> Result<(), CliError> {
    let params = args.model.params()?;
    let cfg = SmileConfig {
        midpoint: match args.midpoint {
            MidpointArg::Arithmetic => Midpoint::Arithmetic,
            MidpointArg::Geometric => Midpoint::Geometric,
        },
    };
    let point = smile::smile_point_with(args.expiry, args.forward, args.strike, &params, &cfg)?;
    if args.json {
        print_json(&VolOutput {
            inputs: args,
            smile: point,
        })
    } else {
        println!("implied_vol  {}", point.implied_vol);
        println!("zeta         {}", point.zeta);
        println!("I(zeta)      {}", point.i_of_zeta);
        println!("D(zeta)      {}", point.distance);
        match point.gamma_corr {
            Some(g) => println!("gamma        {g}"),
            None => println!("gamma        undefined (alpha = 0)"),
        }
        println!("epsilon      {}", point.epsilon);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KindArg {
    Call,
    Put,
}

impl From<KindArg> for OptionKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Call => OptionKind::Call,
            KindArg::Put => OptionKind::Put,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Analytic,
    Fd,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Args, Serialize)]
pub struct GreeksArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub forward: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub strike: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub expiry: f64,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "call")]
    pub kind: KindArg,
    /// Vol sensitivities from the leading-order closed forms or from finite
    /// differences of the full smile.
    #[arg(long, value_enum, default_value = "fd")]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value = "table")]
    pub format: FormatArg,
}

#[derive(Debug, Serialize)]
struct GreeksOutput<'a> {
    inputs: &'a GreeksArgs,
    greeks: GreekReport,
}

pub fn greeks(args: &GreeksArgs) -> Result<(), CliError> {
    let params = args.model.params()?;
    let spec = OptionSpec::new(args.strike, args.expiry, args.kind.into())?;
    let mode = match args.mode {
        ModeArg::Analytic => SensitivityMode::AnalyticLeadingOrder,
        ModeArg::Fd => SensitivityMode::FiniteDifference,
    };
    let report = greeks::greeks(args.forward, &spec, &params, mode)?;
    match args.format {
        FormatArg::Json => print_json(&GreeksOutput {
            inputs: args,
            greeks: report,
        }),
        FormatArg::Csv => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            w.serialize(GreekRow::from(&report))
                .and_then(|_| w.flush().map_err(csv::Error::from))
                .map_err(|e| CliError::Io(format!("cannot write CSV: {e}")))
        }
        FormatArg::Table => {
            for (name, value) in GreekRow::from(&report).fields() {
                match value {
                    Some(v) => println!("{name:<15}{v}"),
                    None => println!("{name:<15}n/a"),
                }
            }
            Ok(())
        }
    }
}

/// Flat record of a [`GreekReport`] for CSV and table output.
#[derive(Debug, Serialize)]
struct GreekRow {
    price: f64,
    implied_vol: f64,
    delta_classic: f64,
    delta_bartlett: f64,
    vega: f64,
    vega_modified: f64,
    theta: f64,
    gamma: Option<f64>,
    vanna: Option<f64>,
    volga: Option<f64>,
}

impl From<&GreekReport> for GreekRow {
    fn from(r: &GreekReport) -> Self {
        Self {
            price: r.price,
            implied_vol: r.implied_vol,
            delta_classic: r.delta_classic,
            delta_bartlett: r.delta_bartlett,
            vega: r.vega,
            vega_modified: r.vega_modified,
            theta: r.theta,
            gamma: r.gamma,
            vanna: r.vanna,
            volga: r.volga,
        }
    }
}

impl GreekRow {
    fn fields(&self) -> [(&'static str, Option<f64>); 10] {
        [
            ("price", Some(self.price)),
            ("implied_vol", Some(self.implied_vol)),
            ("delta_classic", Some(self.delta_classic)),
            ("delta_bartlett", Some(self.delta_bartlett)),
            ("vega", Some(self.vega)),
            ("vega_modified", Some(self.vega_modified)),
            ("theta", Some(self.theta)),
            ("gamma", self.gamma),
            ("vanna", self.vanna),
            ("volga", self.volga),
        ]
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightingArg {
    Uniform,
    Vega,
}

#[derive(Debug, Args, Serialize)]
pub struct QuotesArgs {
    /// CSV file with header `strike,normal_vol`.
    #[arg(long)]
    pub quotes: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub forward: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub expiry: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub shift: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub quotes: QuotesArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: f64,
    #[arg(long, value_enum, default_value = "uniform")]
    pub weighting: WeightingArg,
    /// Directory for calibration.json, residuals.csv and manifest.json.
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn calibrate(args: &CalibrateArgs) -> Result<(), CliError> {
    let quotes = io::read_quotes(&args.quotes.quotes, args.quotes.forward, args.quotes.expiry)?;
    let options = CalibrationOptions {
        weighting: match args.weighting {
            WeightingArg::Uniform => Weighting::Uniform,
            WeightingArg::Vega => Weighting::Vega,
        },
        ..CalibrationOptions::default()
    };
    let result = calibration::calibrate_with(&quotes, args.beta, args.quotes.shift, &options)?;

    io::ensure_dir(&args.out_dir)?;
    let mut manifest = RunManifest::new("calibrate", args, None)?;
    io::write_json(
        &io::output_path(&args.out_dir, "calibration.json", &mut manifest),
        &result,
    )?;
    io::write_csv(
        &io::output_path(&args.out_dir, "residuals.csv", &mut manifest),
        &result.residuals,
    )?;
    manifest.write(&args.out_dir)?;
    println!(
        "sigma {} alpha {} rho {} rmse {:.3e}",
        result.params.sigma(),
        result.params.alpha(),
        result.params.rho(),
        result.rmse
    );
    if !result.converged {
        return Err(CliError::NoConvergence(format!(
            "calibration stopped after {} evaluations without converging; best fit written",
            result.evaluations
        )));
    }
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct BetaSweepArgs {
    #[command(flatten)]
    pub quotes: QuotesArgs,
    /// Comma-separated betas, e.g. `0,0.5,1`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub betas: Vec<f64>,
    /// Strike grid: `lo:hi:n` for n evenly spaced strikes, or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    pub strikes: String,
    /// Directory for beta_sweep.csv, fits.json and manifest.json.
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn parse_strikes(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Validation(format!("invalid --strikes {spec:?}: expected lo:hi:n or a comma list"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = spec.split(':').collect();
    let strikes = match parts.as_slice() {
        [lo, hi, n] => {
            let (lo, hi) = (num(lo)?, num(hi)?);
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            if n < 2 || !(hi > lo) {
                return Err(bad());
            }
            let m = (n - 1) as f64;
            (0..n).map(|i| (lo * (m - i as f64) + hi * i as f64) / m).collect()
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(bad()),
    };
    if strikes.is_empty() || strikes.iter().any(|k| !k.is_finite()) {
        return Err(bad());
    }
    Ok(strikes)
}

pub fn beta_sweep(args: &BetaSweepArgs) -> Result<(), CliError> {
    let quotes = io::read_quotes(&args.quotes.quotes, args.quotes.forward, args.quotes.expiry)?;
    let strikes = parse_strikes(&args.strikes)?;
    let sweep = mc::beta_sweep_shifted(&quotes, &args.betas, &strikes, args.quotes.shift)?;

    io::ensure_dir(&args.out_dir)?;
    let mut manifest = RunManifest::new("beta-sweep", args, None)?;
    io::write_csv(
        &io::output_path(&args.out_dir, "beta_sweep.csv", &mut manifest),
        &sweep.rows,
    )?;
    io::write_json(&io::output_path(&args.out_dir, "fits.json", &mut manifest), &sweep.fits)?;
    manifest.write(&args.out_dir)?;
    if let Some(fit) = sweep.fits.iter().find(|f| !f.calibration.converged) {
        return Err(CliError::NoConvergence(format!(
            "calibration at beta {} did not converge; results written",
            fit.beta
        )));
    }
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct ConfigArgs {
    /// JSON experiment config (see the shipped schemas).
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for results and manifest.json.
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Hedger parameters given outright or fitted to the true smile at inception.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum HedgerSpec {
    Params {
        params: SabrParams,
    },
    Fitted {
        beta: f64,
        #[serde(default)]
        shift: f64,
    },
}

fn default_strategies() -> Vec<HedgeStrategy> {
    HedgeStrategy::ALL.to_vec()
}

fn default_rebalance() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HedgeConfig {
    pub forward: f64,
    pub option: OptionSpec,
    pub true_params: SabrParams,
    pub hedger: HedgerSpec,
    #[serde(default = "default_rebalance")]
    pub rebalance_steps: usize,
    #[serde(default)]
    pub recalibration: Recalibration,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<HedgeStrategy>,
    pub simulation: SimConfig,
}

#[derive(Debug, Serialize)]
struct HedgeEcho<'a> {
    args: &'a ConfigArgs,
    config: &'a HedgeConfig,
    hedger_params: SabrParams,
}

pub fn hedge(args: &ConfigArgs) -> Result<(), CliError> {
    let cfg: HedgeConfig = io::read_config(&args.config)?;
    cfg.option.validate()?;
    let hedger_params = match cfg.hedger {
        HedgerSpec::Params { params } => params,
        HedgerSpec::Fitted { beta, shift } => {
            let fit = mc::fit_hedger(&cfg.true_params, cfg.forward, cfg.option.expiry, beta, shift)?;
            if !fit.converged {
                return Err(CliError::NoConvergence(format!(
                    "hedger calibration at beta {beta} did not converge"
                )));
            }
            fit.params
        }
    };
    let exp = HedgeExperiment {
        forward: cfg.forward,
        option: cfg.option,
        true_params: cfg.true_params,
        hedger_params,
        rebalance_steps: cfg.rebalance_steps,
        recalibration: cfg.recalibration,
    };
    let cmp = mc::hedge_compare(&exp, &cfg.strategies, &cfg.simulation)?;

    io::ensure_dir(&args.out_dir)?;
    let echo = HedgeEcho {
        args,
        config: &cfg,
        hedger_params,
    };
    let mut manifest = RunManifest::new("hedge", &echo, Some(cfg.simulation.seed))?;
    io::write_csv(
        &io::output_path(&args.out_dir, "hedge_stats.csv", &mut manifest),
        &cmp.stats,
    )?;
    manifest.write(&args.out_dir)?;
    for s in &cmp.stats {
        println!(
            "{:<10} mean {:+.4e} std {:.4e} mae {:.4e}",
            s.strategy.label(),
            s.mean,
            s.std,
            s.mae
        );
    }
    Ok(())
}

fn default_window() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressConfig {
    pub params: SabrParams,
    pub forward: f64,
    pub simulation: SimConfig,
    /// Simulation steps per observation.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Correlation used to build the regressor; the model's rho if absent.
    #[serde(default)]
    pub regressor_rho: Option<f64>,
}

#[derive(Debug, Serialize)]
struct RegressEcho<'a> {
    args: &'a ConfigArgs,
    config: &'a RegressConfig,
}

pub fn regress(args: &ConfigArgs) -> Result<(), CliError> {
    let cfg: RegressConfig = io::read_config(&args.config)?;
    let result: RegressionResult =
        mc::regression_experiment(&cfg.params, cfg.forward, &cfg.simulation, cfg.window, cfg.regressor_rho)?;

    io::ensure_dir(&args.out_dir)?;
    let echo = RegressEcho { args, config: &cfg };
    let mut manifest = RunManifest::new("regress", &echo, Some(cfg.simulation.seed))?;
    io::write_json(
        &io::output_path(&args.out_dir, "regression.json", &mut manifest),
        &result,
    )?;
    manifest.write(&args.out_dir)?;
    print_json(&result)
}

fn print_json(value: &impl Serialize) -> Result<(), CliError> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Io(format!("cannot serialize output: {e}")))?;
    println!("{text}");
    Ok(())
}
