use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "popsearch",
    version,
    about = "Search for an atypical population: bounds, simulations and sweeps as CSV"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate every closed-form bound at one parameter point.
    Bounds(BoundsArgs),
    /// Run one Monte Carlo experiment.
    Simulate(SimulateArgs),
    /// Run one experiment per grid value of a parameter.
    Sweep(SweepArgs),
    /// Simulate and check the renewal and error-probability identities.
    Verify(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// gaussian:mu=<f>, coin:b=<f> or generic:<table file>
    #[arg(long, value_parser = parse_model)]
    pub model: ModelArg,
    #[arg(long)]
    pub pi: f64,
    #[arg(long)]
    pub delta: f64,
    /// Lower threshold: `model`, `cusum` or a value in (0, 1)
    #[arg(long, value_parser = parse_gamma_l)]
    pub gamma_l: Option<GammaLArg>,
    /// Use the zero-overshoot constants (coin pair only)
    #[arg(long)]
    pub exact_overshoot: bool,
    /// Write the CSV here instead of stdout
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProcedureKind {
    Ssprt,
    Seqthresh,
    Nonadaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    Mu,
    B,
    Pi,
    Delta,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, value_enum, default_value = "ssprt")]
    pub procedure: ProcedureKind,
    #[arg(long, default_value_t = 1e-3)]
    pub pi: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub delta: f64,
    /// S-SPRT lower threshold: `model`, `cusum` or a value in (0, 1)
    #[arg(long, value_parser = parse_gamma_l)]
    pub gamma_l: Option<GammaLArg>,
    /// S-SPRT on the coin pair: snap gamma_U to a whole number of steps
    #[arg(long)]
    pub exact_overshoot: bool,
    /// Sequential thresholding round count (default from pi)
    #[arg(long)]
    pub k_max: Option<u32>,
    /// Non-adaptive sample size (default: smallest meeting the target)
    #[arg(long)]
    pub n0: Option<u64>,
    /// Non-adaptive decision threshold on the summed log-likelihood ratio
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Per-trial sample limit (default 1e9)
    #[arg(long)]
    pub max_samples: Option<u64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = parse_model)]
    pub model: ModelArg,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Base model; optional when sweeping mu or b
    #[arg(long, value_parser = parse_model)]
    pub model: Option<ModelArg>,
    #[arg(long, value_enum)]
    pub axis: AxisArg,
    /// Comma-separated values or `lo:hi:n` (n evenly spaced points)
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    pub grid: Grid,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelArg {
    Gaussian(f64),
    Coin(f64),
    Generic(PathBuf),
}

impl ModelArg {
    pub fn label(&self) -> String {
        match self {
            ModelArg::Gaussian(mu) => format!("gaussian:mu={}", crate::fmt_sig9(*mu)),
            ModelArg::Coin(b) => format!("coin:b={}", crate::fmt_sig9(*b)),
            ModelArg::Generic(p) => format!("generic:{}", p.display()),
        }
    }
}

fn parse_param(rest: &str, key: &str) -> Result<f64, String> {
    let (k, v) = rest
        .split_once('=')
        .ok_or_else(|| format!("expected {key}=<value>, got {rest:?}"))?;
    if k.trim() != key {
        return Err(format!("expected parameter {key}, got {k:?}"));
    }
    v.trim()
        .parse()
        .map_err(|_| format!("{key}: not a number: {v:?}"))
}

pub fn parse_model(s: &str) -> Result<ModelArg, String> {
    let (kind, rest) = s
        .split_once(':')
        .ok_or_else(|| format!("expected gaussian:mu=<f>, coin:b=<f> or generic:<path>, got {s:?}"))?;
    match kind {
        "gaussian" => Ok(ModelArg::Gaussian(parse_param(rest, "mu")?)),
        "coin" => Ok(ModelArg::Coin(parse_param(rest, "b")?)),
        "generic" if !rest.is_empty() => Ok(ModelArg::Generic(PathBuf::from(rest))),
        _ => Err(format!("unknown model {kind:?}")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaLArg {
    Model,
    Cusum,
    Value(f64),
}

pub fn parse_gamma_l(s: &str) -> Result<GammaLArg, String> {
    match s {
        "model" => Ok(GammaLArg::Model),
        "cusum" => Ok(GammaLArg::Cusum),
        _ => {
            let v: f64 = s
                .parse()
                .map_err(|_| format!("expected model, cusum or a number, got {s:?}"))?;
            if v > 0.0 && v < 1.0 {
                Ok(GammaLArg::Value(v))
            } else {
                Err(format!("gamma_L must lie in (0, 1), got {v}"))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let num = |t: &str| -> Result<f64, String> {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("grid: not a number: {t:?}"))
    };
    let parts: Vec<&str> = s.split(':').collect();
    let values = match parts.as_slice() {
        [lo, hi, n] => {
            let (lo, hi) = (num(lo)?, num(hi)?);
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| format!("grid: bad point count {n:?}"))?;
            match n {
                0 => Vec::new(),
                1 => vec![lo],
                _ => (0..n)
                    .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                    .collect(),
            }
        }
        [list] => list
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(num)
            .collect::<Result<_, _>>()?,
        _ => return Err(format!("grid: expected a,b,c or lo:hi:n, got {s:?}")),
    };
    if values.is_empty() {
        return Err("grid is empty".into());
    }
    Ok(Grid(values))
}
