//! Command-line front end: every subcommand produces CSV.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 identity
//! check failed, 4 identity check inconclusive.

pub mod args;
pub mod records;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::Path;

use clap::Parser;
use popsearch::bounds::{BoundsReport, Overshoot};
use popsearch::models::PopulationModel;
use popsearch::montecarlo::{
    run_experiment_partial, run_point, split_seed, sweep, verify_identities, CheckStatus, ExperimentSpec, IdentityCheck,
    ProcedureSpec, SweepAxis,
};
use popsearch::procedures::{GammaLPolicy, ProcedureConfig};
use popsearch::{Model, MonteCarloSummary};

use args::{
    AxisArg, BoundsArgs, Cli, Command, ExperimentArgs, GammaLArg, ModelArg, ProcedureKind,
    SimulateArgs, SweepArgs,
};
use records::{to_csv, BoundsRecord, IdentityRecord, SimulateRecord, SweepRecord};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
    #[error("identity check failed")]
    VerificationFailed,
    #[error("identity check inconclusive")]
    Inconclusive,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::VerificationFailed => 3,
            CliError::Inconclusive => 4,
        }
    }
}

impl From<popsearch::Error> for CliError {
    fn from(e: popsearch::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(format!("csv: {e}"))
    }
}

/// `%.9g`: nine significant digits, trailing zeros dropped, exponent form
/// outside `[1e-4, 1e9)`.
pub fn fmt_sig9(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..9).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        trim(&format!("{:.*}", (8 - exp) as usize, x))
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn check_prior(pi: f64, delta: f64) -> Result<(), CliError> {
    if !(pi > 0.0 && pi <= 0.5) {
        return Err(usage(format!("--pi must lie in (0, 0.5], got {pi}")));
    }
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(usage(format!("--delta must lie in (0, 0.5], got {delta}")));
    }
    Ok(())
}

/// Reads a finite-alphabet table: two lines of whitespace-separated
/// probabilities, `P0` first.
pub fn load_table(path: &Path) -> Result<Model, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|l| {
            l.split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    match <[Vec<f64>; 2]>::try_from(rows) {
        Ok([p0, p1]) => Ok(PopulationModel::generic(p0, p1)?),
        Err(rows) => Err(CliError::Runtime(format!(
            "{}: expected 2 rows of probabilities, found {}",
            path.display(),
            rows.len()
        ))),
    }
}

fn build_model(m: &ModelArg) -> Result<Model, CliError> {
    match m {
        ModelArg::Gaussian(mu) => PopulationModel::gaussian(*mu).map_err(|e| usage(e.to_string())),
        ModelArg::Coin(b) => PopulationModel::coin(*b).map_err(|e| usage(e.to_string())),
        ModelArg::Generic(p) => load_table(p),
    }
}

fn gamma_policy(g: Option<GammaLArg>) -> GammaLPolicy<f64> {
    match g.unwrap_or(GammaLArg::Model) {
        GammaLArg::Model => GammaLPolicy::Model,
        GammaLArg::Cusum => GammaLPolicy::Cusum,
        GammaLArg::Value(v) => GammaLPolicy::Fixed(v),
    }
}

fn explicit_gamma(g: Option<GammaLArg>, model: &Model) -> Option<f64> {
    match g {
        None | Some(GammaLArg::Model) => None,
        Some(other) => gamma_policy(Some(other)).gamma_l(model).ok(),
    }
}

/// Rejects flags that belong to a different procedure.
fn procedure_spec(a: &ExperimentArgs) -> Result<ProcedureSpec<f64>, CliError> {
    let only = |flag: &str, given: bool, proc_name: &str| {
        if given {
            Err(usage(format!("{flag} only applies to --procedure {proc_name}")))
        } else {
            Ok(())
        }
    };
    if a.trials == 0 {
        return Err(usage("--trials must be >= 1"));
    }
    check_prior(a.pi, a.delta)?;
    match a.procedure {
        ProcedureKind::Ssprt => {
            only("--k-max", a.k_max.is_some(), "seqthresh")?;
            only("--n0", a.n0.is_some(), "nonadaptive")?;
            only("--tau", a.tau.is_some(), "nonadaptive")?;
            Ok(ProcedureSpec::Sprt {
                gamma_l: gamma_policy(a.gamma_l),
                exact_overshoot: a.exact_overshoot,
            })
        }
        ProcedureKind::Seqthresh => {
            only("--gamma-l", a.gamma_l.is_some(), "ssprt")?;
            only("--exact-overshoot", a.exact_overshoot, "ssprt")?;
            only("--n0", a.n0.is_some(), "nonadaptive")?;
            only("--tau", a.tau.is_some(), "nonadaptive")?;
            if a.k_max == Some(0) {
                return Err(usage("--k-max must be >= 1"));
            }
            Ok(ProcedureSpec::SeqThresh { k_max: a.k_max })
        }
        ProcedureKind::Nonadaptive => {
            only("--gamma-l", a.gamma_l.is_some(), "ssprt")?;
            only("--exact-overshoot", a.exact_overshoot, "ssprt")?;
            only("--k-max", a.k_max.is_some(), "seqthresh")?;
            if a.n0 == Some(0) {
                return Err(usage("--n0 must be >= 1"));
            }
            let tau = a.tau.unwrap_or(0.0);
            if tau.is_nan() {
                return Err(usage("--tau must not be NaN"));
            }
            Ok(ProcedureSpec::NonAdaptive { n0: a.n0, tau })
        }
    }
}

fn experiment(model: Model, a: &ExperimentArgs) -> Result<ExperimentSpec<f64>, CliError> {
    if a.max_samples == Some(0) {
        return Err(usage("--max-samples must be >= 1"));
    }
    Ok(ExperimentSpec {
        model,
        procedure: procedure_spec(a)?,
        pi: a.pi,
        delta: a.delta,
        trials: a.trials,
        master_seed: a.seed,
        collect_per_population: true,
        sample_cap: a.max_samples,
    })
}

fn describe(config: &ProcedureConfig<f64>) -> String {
    match config {
        ProcedureConfig::Sprt(c) => format!(
            "log_gamma_L={};log_gamma_U={}",
            fmt_sig9(c.log_lower()),
            fmt_sig9(c.log_upper())
        ),
        ProcedureConfig::SeqThresh(p) => format!("k_max={}", p.k_max()),
        ProcedureConfig::NonAdaptive(c) => format!("N0={};tau={}", c.n0(), fmt_sig9(c.tau())),
    }
}

pub fn cmd_bounds(a: &BoundsArgs) -> Result<String, CliError> {
    check_prior(a.pi, a.delta)?;
    let model = build_model(&a.model)?;
    let overshoot = if a.exact_overshoot {
        if model.coin_log_step().is_none() {
            return Err(usage("--exact-overshoot needs a coin model"));
        }
        Overshoot::Exact
    } else {
        Overshoot::Bounded
    };
    let r = BoundsReport::evaluate(a.pi, a.delta, &model, explicit_gamma(a.gamma_l, &model), overshoot)?;
    let row = BoundsRecord {
        model: a.model.label(),
        pi: r.pi,
        delta: r.delta,
        d01: r.d01,
        d10: r.d10,
        gamma_l: r.gamma_l,
        overshoot: match r.overshoot {
            Overshoot::Bounded => "bounded".into(),
            Overshoot::Exact => "exact".into(),
        },
        lb_any: r.lb_any,
        lb_any_simplified: r.lb_any_simplified,
        lb_rare_coeff: r.lb_rare_coeff,
        ub_ssprt: r.ub_ssprt,
        c1: r.c1,
        c1_prime: r.c1_prime,
        c2: r.c2,
        c2_prime: r.c2_prime,
        lb_nonadaptive: r.lb_nonadaptive,
        coin_ub: r.coin_ub,
        coin_c1_refined: r.coin_c1_refined,
        k_max: r.seq_thresh.k_max,
        alpha_seqthresh: r.seq_thresh.alpha,
        vacuous: r.vacuous().join(";"),
    };
    Ok(to_csv(&[row])?)
}

fn simulate_record(
    model: &ModelArg,
    spec: &ExperimentSpec<f64>,
    s: &MonteCarloSummary,
    r: &BoundsReport<f64>,
) -> Result<SimulateRecord, CliError> {
    let config = spec.procedure.resolve(&spec.model, spec.pi, spec.delta)?;
    let v = s.visits;
    Ok(SimulateRecord {
        model: model.label(),
        procedure: s.procedure.into(),
        config: describe(&config),
        pi: s.pi,
        delta: s.delta,
        trials: s.trials,
        seed: s.master_seed,
        mean_n: s.mean_n,
        stderr_n: s.stderr_n,
        pi_mean_n: s.pi_mean_n,
        errors: s.errors,
        pe_hat: s.pe_hat,
        pe_lo: s.pe_ci95.0,
        pe_hi: s.pe_ci95.1,
        alpha_hat: s.alpha_hat(),
        beta_hat: s.beta_hat(),
        mean_n1: s.mean_n1(),
        typical_visits: v.map(|v| v.typical_visits),
        atypical_visits: v.map(|v| v.atypical_visits),
        mean_n_typical: v.and_then(|v| v.mean_n_typical),
        stderr_n_typical: v.and_then(|v| v.stderr_n_typical),
        mean_n_atypical: v.and_then(|v| v.mean_n_atypical),
        lb_any: r.lb_any,
        lb_rare_coeff: r.lb_rare_coeff,
        ub_ssprt: r.ub_ssprt,
        c1: r.c1,
        lb_nonadaptive: r.lb_nonadaptive,
    })
}

/// Output of `simulate`.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    /// Empty when no trial completed.
    pub csv: String,
    pub secs: f64,
    /// Set when a trial failed; `csv` then covers the trials before it.
    pub failure: Option<String>,
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<Simulated, CliError> {
    let model = build_model(&a.model)?;
    let spec = experiment(model, &a.experiment)?;
    let (summary, failure) = match run_experiment_partial(&spec)? {
        Ok(s) => (Some(s), None),
        Err(f) => {
            let msg = match f.trial {
                0 => format!("trial 0: {}; no trial completed", f.error),
                n => format!("trial {n}: {}; summary of trials 0..{n} written", f.error),
            };
            (f.completed, Some(msg))
        }
    };
    let Some(summary) = summary else {
        return Ok(Simulated {
            csv: String::new(),
            secs: 0.0,
            failure,
        });
    };
    let (gamma_l, overshoot) = spec.procedure.bound_inputs(&spec.model);
    let report = BoundsReport::evaluate(spec.pi, spec.delta, &spec.model, gamma_l, overshoot)?;
    let row = simulate_record(&a.model, &spec, &summary, &report)?;
    Ok(Simulated {
        csv: to_csv(&[row])?,
        secs: summary.elapsed.as_secs_f64(),
        failure,
    })
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<String, CliError> {
    let axis = match a.axis {
        AxisArg::Mu => SweepAxis::Mu,
        AxisArg::B => SweepAxis::B,
        AxisArg::Pi => SweepAxis::Pi,
        AxisArg::Delta => SweepAxis::Delta,
    };
    let base_model = match (&a.model, axis) {
        (Some(m), _) => build_model(m)?,
        // replaced at every grid point
        (None, SweepAxis::Mu) => PopulationModel::gaussian(1.0)?,
        (None, SweepAxis::B) => PopulationModel::coin(0.25)?,
        (None, _) => return Err(usage("--model is required when sweeping pi or delta")),
    };
    let spec = experiment(base_model, &a.experiment)?;
    let points = sweep(axis, &a.grid.0, &spec)?;
    let rows: Vec<SweepRecord> = points
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let (pi, delta) = match axis {
                SweepAxis::Pi => (p.value, spec.delta),
                SweepAxis::Delta => (spec.pi, p.value),
                _ => (spec.pi, spec.delta),
            };
            let mut row = SweepRecord {
                axis: axis.name().into(),
                value: p.value,
                pi,
                delta,
                procedure: spec.procedure.name().into(),
                trials: spec.trials,
                seed: split_seed(spec.master_seed, j as u64),
                mean_n: None,
                stderr_n: None,
                pi_mean_n: None,
                pe_hat: None,
                pe_lo: None,
                pe_hi: None,
                alpha_hat: None,
                beta_hat: None,
                mean_n1: None,
                lb_any: None,
                lb_rare_coeff: None,
                ub_ssprt: None,
                c1: None,
                lb_nonadaptive: None,
                error: String::new(),
            };
            match &p.outcome {
                Ok((s, r)) => {
                    row.mean_n = Some(s.mean_n);
                    row.stderr_n = Some(s.stderr_n);
                    row.pi_mean_n = Some(s.pi_mean_n);
                    row.pe_hat = Some(s.pe_hat);
                    row.pe_lo = Some(s.pe_ci95.0);
                    row.pe_hi = Some(s.pe_ci95.1);
                    row.alpha_hat = s.alpha_hat();
                    row.beta_hat = s.beta_hat();
                    row.mean_n1 = s.mean_n1();
                    row.lb_any = Some(r.lb_any);
                    row.lb_rare_coeff = Some(r.lb_rare_coeff);
                    row.ub_ssprt = r.ub_ssprt;
                    row.c1 = r.c1;
                    row.lb_nonadaptive = Some(r.lb_nonadaptive);
                }
                Err(e) => row.error = e.to_string(),
            }
            row
        })
        .collect();
    Ok(to_csv(&rows)?)
}

fn identity_row(name: &str, c: &IdentityCheck, n_sigma: f64) -> IdentityRecord {
    IdentityRecord {
        identity: name.into(),
        observed: c.observed,
        predicted: c.predicted,
        residual: c.residual,
        stderr: c.stderr,
        n_sigma,
        status: match c.status {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::Inconclusive => "inconclusive",
        }
        .into(),
    }
}

/// Returns the CSV and the overall status.
pub fn cmd_verify(a: &SimulateArgs) -> Result<(String, CheckStatus), CliError> {
    let model = build_model(&a.model)?;
    let spec = experiment(model, &a.experiment)?;
    let (summary, _) = run_point(&spec)?;
    let report = verify_identities(&summary);
    let rows = [
        identity_row("renewal", &report.renewal, report.n_sigma),
        identity_row("error", &report.error, report.n_sigma),
    ];
    Ok((to_csv(&rows)?, report.status()))
}

fn emit(out: &mut dyn Write, path: Option<&Path>, csv: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, csv).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display()))),
        None => out
            .write_all(csv.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| CliError::Runtime(format!("stdout: {e}"))),
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Bounds(a) => emit(out, a.output.as_deref(), &cmd_bounds(a)?),
        Command::Simulate(a) => {
            let run = cmd_simulate(a)?;
            let _ = writeln!(err, "elapsed {:.3}s", run.secs);
            emit(out, a.experiment.output.as_deref(), &run.csv)?;
            match run.failure {
                None => Ok(()),
                Some(msg) => Err(CliError::Runtime(msg)),
            }
        }
        Command::Sweep(a) => emit(out, a.experiment.output.as_deref(), &cmd_sweep(a)?),
        Command::Verify(a) => {
            let (csv, status) = cmd_verify(a)?;
            emit(out, a.experiment.output.as_deref(), &csv)?;
            match status {
                CheckStatus::Pass => Ok(()),
                CheckStatus::Fail => Err(CliError::VerificationFailed),
                CheckStatus::Inconclusive => Err(CliError::Inconclusive),
            }
        }
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "popsearch: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_sig9(974.229_389_1), "974.229389");
        assert_eq!(fmt_sig9(1.0), "1");
        assert_eq!(fmt_sig9(0.0), "0");
        assert_eq!(fmt_sig9(-2.5), "-2.5");
        assert_eq!(fmt_sig9(1e-3), "0.001");
        assert_eq!(fmt_sig9(2f64.powi(-20)), "9.53674316e-07");
        assert_eq!(fmt_sig9(123_456_789.0), "123456789");
        assert_eq!(fmt_sig9(1_234_567_890.0), "1.23456789e+09");
        assert_eq!(fmt_sig9(999_999_999.6), "1e+09");
        assert_eq!(fmt_sig9(0.000_012_345), "1.2345e-05");
        assert_eq!(fmt_sig9(f64::INFINITY), "inf");
        assert_eq!(fmt_sig9(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn sig9_round_trips() {
        for x in [std::f64::consts::PI, 1e-300, 6.02e23, -0.1, 4861.3] {
            let s = fmt_sig9(x);
            let y: f64 = s.parse().unwrap();
            assert!(((y - x) / x).abs() < 5e-9, "{x} -> {s}");
            assert_eq!(fmt_sig9(y), s);
        }
    }

    #[test]
    fn model_and_grid_parsing() {
        use args::*;
        assert_eq!(parse_model("gaussian:mu=2").unwrap(), ModelArg::Gaussian(2.0));
        assert_eq!(parse_model("coin:b=0.25").unwrap(), ModelArg::Coin(0.25));
        assert!(parse_model("coin:mu=0.25").is_err());
        assert!(parse_model("poisson:l=1").is_err());
        assert!(parse_model("gaussian").is_err());
        assert_eq!(parse_grid("0.5,1,2").unwrap().0, vec![0.5, 1.0, 2.0]);
        let g = parse_grid("0.3:3.0:10").unwrap().0;
        assert_eq!(g.len(), 10);
        assert!((g[9] - 3.0).abs() < 1e-15 && (g[1] - 0.6).abs() < 1e-15);
        assert!(parse_grid("").is_err());
        assert!(parse_grid("1:2:0").is_err());
        assert_eq!(parse_gamma_l("0.5").unwrap(), GammaLArg::Value(0.5));
        assert!(parse_gamma_l("1.5").is_err());
    }
}
