//! Command-line flags, the optional `key=value` config file, and the
//! validated [`RunConfig`] they resolve to.
//!
//! Precedence: command-line flag, then config file, then built-in default.
//! Config-file keys are the flag names without the leading `--`.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cvqkd::{ChannelParams, ProtocolParams, Scheme, DEFAULT_EPS_SM};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "cvqkd",
    version,
    about = "Key rates, secure distances and finite-size source-noise estimation for monitored-source CV-QKD"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one scheme at one parameter point.
    Keyrate(SharedArgs),
    /// Key rate against distance for one or more schemes.
    SweepDistance(SharedArgs),
    /// Passive-scheme key rate over a (T, d) grid plus per-T secure distances.
    #[command(name = "grid-T")]
    GridT(SharedArgs),
    /// Finite-size source-monitor estimate (analytic or simulated).
    FiniteSize(SharedArgs),
}

impl Command {
    pub fn args(&self) -> &SharedArgs {
        match self {
            Command::Keyrate(a)
            | Command::SweepDistance(a)
            | Command::GridT(a)
            | Command::FiniteSize(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FiniteSizeMode {
    Analytic,
    Simulate,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SharedArgs {
    /// EPR variance V = V_A + 1 (shot-noise units) [default: 40]
    #[arg(long = "V")]
    pub v: Option<f64>,
    /// Source-noise variance [default: 0.1]
    #[arg(long = "chi-s")]
    pub chi_s: Option<f64>,
    /// Channel excess noise, input-referred [default: 0.1]
    #[arg(long = "eps")]
    pub eps: Option<f64>,
    /// Reconciliation efficiency [default: 0.8]
    #[arg(long = "beta")]
    pub beta: Option<f64>,
    /// Active-switch sampling ratio [default: 0.5]
    #[arg(long = "r")]
    pub r: Option<f64>,
    /// Passive tap transmittance towards Bob [default: 0.5]
    #[arg(long = "T")]
    pub t: Option<f64>,
    /// Fiber attenuation, dB/km [default: 0.2]
    #[arg(long = "alpha")]
    pub alpha: Option<f64>,
    /// Distance, km [default: 0]
    #[arg(long = "d")]
    pub d: Option<f64>,
    /// Scheme(s): untrusted, active_switch, passive_bs (comma-separated or repeated)
    #[arg(long = "scheme", value_delimiter = ',')]
    pub scheme: Vec<String>,
    /// CSV output path (stdout if omitted)
    #[arg(long = "out")]
    pub out: Option<PathBuf>,
    /// key=value file supplying any of these flags
    #[arg(long = "config")]
    pub config: Option<PathBuf>,
    /// Monte Carlo seed [default: 1]
    #[arg(long = "seed")]
    pub seed: Option<String>,
    /// Monitor block length [default: 1e8]
    #[arg(long = "m")]
    pub m: Option<String>,
    /// Monitor failure probability [default: 1e-10]
    #[arg(long = "eps-sm")]
    pub eps_sm: Option<f64>,
    /// Coverage-diagnostic trials (simulate mode) [default: 0]
    #[arg(long = "trials")]
    pub trials: Option<String>,
    /// Distance grid start, km [default: 0]
    #[arg(long = "d-start")]
    pub d_start: Option<f64>,
    /// Distance grid end (inclusive), km [default: 40]
    #[arg(long = "d-stop")]
    pub d_stop: Option<f64>,
    /// Distance grid step, km [default: 0.5]
    #[arg(long = "d-step")]
    pub d_step: Option<f64>,
    /// Tap transmittance grid start [default: 0.01]
    #[arg(long = "T-start")]
    pub t_start: Option<f64>,
    /// Tap transmittance grid end (inclusive) [default: 0.99]
    #[arg(long = "T-stop")]
    pub t_stop: Option<f64>,
    /// Tap transmittance grid step [default: 0.01]
    #[arg(long = "T-step")]
    pub t_step: Option<f64>,
    /// finite-size mode [default: analytic]
    #[arg(long = "mode", value_enum)]
    pub mode: Option<FiniteSizeMode>,
    /// Estimated source-noise variance for analytic mode [default: --chi-s]
    #[arg(long = "sigma-hat2")]
    pub sigma_hat2: Option<f64>,
}

const CONFIG_KEYS: &[&str] = &[
    "V",
    "chi-s",
    "eps",
    "beta",
    "r",
    "T",
    "alpha",
    "d",
    "scheme",
    "out",
    "seed",
    "m",
    "eps-sm",
    "trials",
    "d-start",
    "d-stop",
    "d-step",
    "T-start",
    "T-stop",
    "T-step",
    "mode",
    "sigma-hat2",
];

/// Inclusive arithmetic grid `start, start + step, ..., <= stop`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridRange {
    fn new(name: &str, start: f64, stop: f64, step: f64) -> Result<Self, CliError> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(CliError::invalid(format!(
                "{name}-step = {step} must be > 0"
            )));
        }
        if !(start.is_finite() && stop.is_finite()) || stop < start {
            return Err(CliError::invalid(format!(
                "{name} range [{start}, {stop}] must satisfy start <= stop"
            )));
        }
        Ok(Self { start, stop, step })
    }

    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|k| self.start + k as f64 * self.step)
            .collect()
    }
}

/// Fully resolved and validated settings for one invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: ProtocolParams,
    /// Empty when no scheme was requested; commands apply their own default.
    pub schemes: Vec<Scheme>,
    pub d_range: GridRange,
    pub t_range: GridRange,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub m: u64,
    pub eps_sm: f64,
    pub trials: u64,
    pub mode: FiniteSizeMode,
    pub sigma_hat2: Option<f64>,
}

struct Layer {
    file: BTreeMap<String, String>,
}

impl Layer {
    fn load(path: Option<&PathBuf>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self {
                file: BTreeMap::new(),
            });
        };
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::invalid(format!("cannot read config {}: {e}", path.display()))
        })?;
        Ok(Self {
            file: parse_config(&text)?,
        })
    }

    fn f64(&self, cli: Option<f64>, key: &str, default: f64) -> Result<f64, CliError> {
        match (cli, self.file.get(key)) {
            (Some(v), _) => Ok(v),
            (None, Some(s)) => parse_f64(key, s),
            (None, None) => Ok(default),
        }
    }

    fn opt_f64(&self, cli: Option<f64>, key: &str) -> Result<Option<f64>, CliError> {
        match (cli, self.file.get(key)) {
            (Some(v), _) => Ok(Some(v)),
            (None, Some(s)) => parse_f64(key, s).map(Some),
            (None, None) => Ok(None),
        }
    }

    fn count(&self, cli: Option<&String>, key: &str, default: u64) -> Result<u64, CliError> {
        match cli.or(self.file.get(key)) {
            Some(s) => parse_count(key, s),
            None => Ok(default),
        }
    }
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped and
/// unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::invalid(format!("config line {}: expected key=value", lineno + 1))
        })?;
        let key = key.trim().trim_start_matches("--");
        if !CONFIG_KEYS.contains(&key) {
            return Err(CliError::invalid(format!(
                "config line {}: unknown key '{key}'",
                lineno + 1
            )));
        }
        map.insert(key.to_owned(), value.trim().to_owned());
    }
    Ok(map)
}

fn parse_f64(key: &str, s: &str) -> Result<f64, CliError> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::invalid(format!("{key}: '{s}' is not a finite number")))
}

/// Non-negative integer, also accepting integral scientific notation (`1e8`).
fn parse_count(key: &str, s: &str) -> Result<u64, CliError> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x <= u64::MAX as f64 => Ok(x as u64),
        _ => Err(CliError::invalid(format!(
            "{key}: '{s}' is not a non-negative integer"
        ))),
    }
}

impl RunConfig {
    pub fn resolve(args: &SharedArgs) -> Result<Self, CliError> {
        let layer = Layer::load(args.config.as_ref())?;
        let defaults = ProtocolParams::default();
        let channel = ChannelParams::new(
            layer.f64(args.d, "d", 0.0)?,
            layer.f64(args.alpha, "alpha", defaults.channel().alpha_db_per_km())?,
            layer.f64(args.eps, "eps", defaults.channel().epsilon())?,
        )?;
        let params = ProtocolParams::new(
            layer.f64(args.v, "V", defaults.v())?,
            layer.f64(args.chi_s, "chi-s", defaults.chi_s())?,
            layer.f64(args.beta, "beta", defaults.beta())?,
            layer.f64(args.r, "r", defaults.r())?,
            layer.f64(args.t, "T", defaults.t())?,
            channel,
        )?;

        let scheme_names: Vec<String> = if !args.scheme.is_empty() {
            args.scheme.clone()
        } else if let Some(s) = layer.file.get("scheme") {
            s.split(',').map(str::to_owned).collect()
        } else {
            Vec::new()
        };
        let mut schemes = Vec::new();
        for name in &scheme_names {
            let scheme: Scheme = name.parse().map_err(CliError::invalid)?;
            if !schemes.contains(&scheme) {
                schemes.push(scheme);
            }
        }

        let d_range = GridRange::new(
            "d",
            layer.f64(args.d_start, "d-start", 0.0)?,
            layer.f64(args.d_stop, "d-stop", 40.0)?,
            layer.f64(args.d_step, "d-step", 0.5)?,
        )?;
        if d_range.start < 0.0 {
            return Err(CliError::invalid(format!(
                "d-start = {} must be >= 0",
                d_range.start
            )));
        }
        let t_range = GridRange::new(
            "T",
            layer.f64(args.t_start, "T-start", 0.01)?,
            layer.f64(args.t_stop, "T-stop", 0.99)?,
            layer.f64(args.t_step, "T-step", 0.01)?,
        )?;

        let out = args
            .out
            .clone()
            .or_else(|| layer.file.get("out").map(PathBuf::from));
        let mode = match (args.mode, layer.file.get("mode")) {
            (Some(m), _) => m,
            (None, Some(s)) => FiniteSizeMode::from_str(s, false)
                .map_err(|_| CliError::invalid(format!("mode: '{s}' is not analytic|simulate")))?,
            (None, None) => FiniteSizeMode::Analytic,
        };
        let eps_sm = layer.f64(args.eps_sm, "eps-sm", DEFAULT_EPS_SM)?;
        if !(eps_sm > 0.0 && eps_sm < 0.5) {
            return Err(CliError::invalid(format!(
                "eps-sm = {eps_sm} violates 0 < eps_sm < 0.5"
            )));
        }

        Ok(Self {
            params,
            schemes,
            d_range,
            t_range,
            out,
            seed: layer.count(args.seed.as_ref(), "seed", 1)?,
            m: layer.count(args.m.as_ref(), "m", 100_000_000)?,
            eps_sm,
            trials: layer.count(args.trials.as_ref(), "trials", 0)?,
            mode,
            sigma_hat2: layer.opt_f64(args.sigma_hat2, "sigma-hat2")?,
        })
    }
}
