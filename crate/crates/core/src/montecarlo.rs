//! Seeded, parallel Monte Carlo trials.
//!
//! Trial `i` of an experiment draws from `ChaCha8` seeded with the master seed
//! and switched to stream `i`, so streams never overlap and results do not
//! depend on how `rayon` schedules the work. Reductions use integer tallies
//! only; the summary is a pure function of `(spec, master_seed)`.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bounds::{BoundsReport, Overshoot};
use crate::error::{invalid, Error, Result};
use crate::models::{Label, PopulationModel};
use crate::procedures::{
    default_sprt_config, sprt_single, tune_nonadaptive, GammaLPolicy, NonAdaptiveConfig,
    ProcedureConfig, SeqThreshConfig, SimulatedPopulations, SprtConfig, TrialOutcome, SAMPLE_CAP,
};
use crate::special::clopper_pearson;
use crate::Scalar;

/// Independent random stream for one trial.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives the master seed of sweep point `index` (splitmix64 finaliser).
pub fn split_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A procedure whose thresholds are filled in from `(model, pi, delta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProcedureSpec<F> {
    Sprt {
        gamma_l: GammaLPolicy<F>,
        /// Coin pair only: snap `gamma_U` to a whole number of steps.
        exact_overshoot: bool,
    },
    SeqThresh {
        /// `None` takes the round count from the prior.
        k_max: Option<u32>,
    },
    NonAdaptive {
        /// `None` tunes the smallest `N0` meeting the error target exactly.
        n0: Option<u64>,
        tau: F,
    },
}

impl<F: Scalar> ProcedureSpec<F> {
    pub fn name(&self) -> &'static str {
        match self {
            ProcedureSpec::Sprt { .. } => "ssprt",
            ProcedureSpec::SeqThresh { .. } => "seqthresh",
            ProcedureSpec::NonAdaptive { .. } => "nonadaptive",
        }
    }

    pub fn resolve(
        &self,
        model: &PopulationModel<F>,
        pi: F,
        delta: F,
    ) -> Result<ProcedureConfig<F>> {
        match *self {
            ProcedureSpec::Sprt {
                gamma_l,
                exact_overshoot,
            } => {
                let mut cfg = default_sprt_config(pi, delta, model, gamma_l)?;
                if exact_overshoot {
                    cfg = cfg.with_exact_overshoot(model)?;
                }
                Ok(ProcedureConfig::Sprt(cfg))
            }
            ProcedureSpec::SeqThresh { k_max } => {
                let cfg = match k_max {
                    Some(k) => SeqThreshConfig::new(k)?,
                    None => SeqThreshConfig::from_prior(pi)?,
                };
                Ok(ProcedureConfig::SeqThresh(cfg.prepare(model)?))
            }
            ProcedureSpec::NonAdaptive { n0, tau } => {
                let cfg = match n0 {
                    Some(n) => NonAdaptiveConfig::new(n, tau)?,
                    None => tune_nonadaptive(model, pi, delta, tau)?,
                };
                Ok(ProcedureConfig::NonAdaptive(cfg))
            }
        }
    }

    /// `(gamma_L, overshoot mode)` to evaluate the S-SPRT bound with.
    /// Non-SPRT procedures are compared against the model's default rule.
    pub fn bound_inputs(&self, model: &PopulationModel<F>) -> (Option<F>, Overshoot) {
        match *self {
            ProcedureSpec::Sprt {
                gamma_l,
                exact_overshoot,
            } => {
                let mode = if exact_overshoot {
                    Overshoot::Exact
                } else {
                    Overshoot::Bounded
                };
                (gamma_l.gamma_l(model).ok(), mode)
            }
            _ => (None, Overshoot::Bounded),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec<F> {
    pub model: PopulationModel<F>,
    pub procedure: ProcedureSpec<F>,
    pub pi: F,
    /// Target error level; used to set thresholds.
    pub delta: F,
    pub trials: u64,
    pub master_seed: u64,
    /// Report per-population-visit statistics (`alpha_hat`, `beta_hat`,
    /// `mean_n1` and the per-label sample means).
    pub collect_per_population: bool,
    /// Per-trial sample limit; `None` uses [`SAMPLE_CAP`].
    pub sample_cap: Option<u64>,
}

/// Streaming per-trial counts; all integer so the reduction is exact.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    trials: u64,
    samples: u128,
    samples_sq: u128,
    errors: u64,
    typical_visits: u64,
    typical_samples: u128,
    typical_samples_sq: u128,
    false_alarms: u64,
    atypical_visits: u64,
    atypical_samples: u128,
    atypical_samples_sq: u128,
    misses: u64,
}

impl Tally {
    fn of(out: &TrialOutcome) -> Self {
        let mut t = Tally {
            trials: 1,
            samples: out.total_samples as u128,
            samples_sq: (out.total_samples as u128).pow(2),
            errors: out.is_error() as u64,
            ..Tally::default()
        };
        let last = out.visits.len() - 1;
        for (i, v) in out.visits.iter().enumerate() {
            let s = v.samples as u128;
            let returned = i == last;
            match v.label {
                Label::Typical => {
                    t.typical_visits += 1;
                    t.typical_samples += s;
                    t.typical_samples_sq += s * s;
                    t.false_alarms += returned as u64;
                }
                Label::Atypical => {
                    t.atypical_visits += 1;
                    t.atypical_samples += s;
                    t.atypical_samples_sq += s * s;
                    t.misses += !returned as u64;
                }
            }
        }
        t
    }

    fn merge(mut self, o: Self) -> Self {
        self.trials += o.trials;
        self.samples += o.samples;
        self.samples_sq += o.samples_sq;
        self.errors += o.errors;
        self.typical_visits += o.typical_visits;
        self.typical_samples += o.typical_samples;
        self.typical_samples_sq += o.typical_samples_sq;
        self.false_alarms += o.false_alarms;
        self.atypical_visits += o.atypical_visits;
        self.atypical_samples += o.atypical_samples;
        self.atypical_samples_sq += o.atypical_samples_sq;
        self.misses += o.misses;
        self
    }
}

/// Mean and standard error of the mean from integer moments.
fn moments(n: u64, sum: u128, sum_sq: u128) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum as f64 / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    // exact centred sum of squares: n*sum_sq - sum^2 >= 0
    let centred = (n as u128 * sum_sq).saturating_sub(sum * sum) as f64 / nf;
    let var = centred / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

/// Per-visit statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisitStats {
    pub typical_visits: u64,
    pub false_alarms: u64,
    pub atypical_visits: u64,
    pub misses: u64,
    /// `false_alarms / typical_visits`; absent without typical visits.
    pub alpha_hat: Option<f64>,
    /// `misses / atypical_visits`; absent without atypical visits.
    pub beta_hat: Option<f64>,
    /// Mean samples per visited population.
    pub mean_n1: f64,
    pub stderr_n1: f64,
    pub mean_n_typical: Option<f64>,
    pub stderr_n_typical: Option<f64>,
    pub mean_n_atypical: Option<f64>,
    pub stderr_n_atypical: Option<f64>,
}

impl VisitStats {
    fn from_tally(t: &Tally) -> Self {
        let ratio = |x: u64, n: u64| (n > 0).then(|| x as f64 / n as f64);
        let typical = (t.typical_visits > 0)
            .then(|| moments(t.typical_visits, t.typical_samples, t.typical_samples_sq));
        let atypical = (t.atypical_visits > 0)
            .then(|| moments(t.atypical_visits, t.atypical_samples, t.atypical_samples_sq));
        let (mean_n1, stderr_n1) = moments(
            t.typical_visits + t.atypical_visits,
            t.typical_samples + t.atypical_samples,
            t.typical_samples_sq + t.atypical_samples_sq,
        );
        VisitStats {
            typical_visits: t.typical_visits,
            false_alarms: t.false_alarms,
            atypical_visits: t.atypical_visits,
            misses: t.misses,
            alpha_hat: ratio(t.false_alarms, t.typical_visits),
            beta_hat: ratio(t.misses, t.atypical_visits),
            mean_n1,
            stderr_n1,
            mean_n_typical: typical.map(|m| m.0),
            stderr_n_typical: typical.map(|m| m.1),
            mean_n_atypical: atypical.map(|m| m.0),
            stderr_n_atypical: atypical.map(|m| m.1),
        }
    }
}

/// Aggregate of one experiment. Equality ignores `elapsed`.
#[derive(Debug, Clone)]
pub struct MonteCarloSummary {
    pub procedure: &'static str,
    pub trials: u64,
    pub master_seed: u64,
    pub pi: f64,
    pub delta: f64,
    pub mean_n: f64,
    pub stderr_n: f64,
    /// `pi * mean_n`.
    pub pi_mean_n: f64,
    pub errors: u64,
    pub pe_hat: f64,
    pub pe_ci95: (f64, f64),
    pub visits: Option<VisitStats>,
    pub elapsed: Duration,
}

impl PartialEq for MonteCarloSummary {
    fn eq(&self, o: &Self) -> bool {
        self.procedure == o.procedure
            && self.trials == o.trials
            && self.master_seed == o.master_seed
            && self.pi.to_bits() == o.pi.to_bits()
            && self.delta.to_bits() == o.delta.to_bits()
            && self.mean_n.to_bits() == o.mean_n.to_bits()
            && self.stderr_n.to_bits() == o.stderr_n.to_bits()
            && self.pi_mean_n.to_bits() == o.pi_mean_n.to_bits()
            && self.errors == o.errors
            && self.pe_hat.to_bits() == o.pe_hat.to_bits()
            && self.pe_ci95.0.to_bits() == o.pe_ci95.0.to_bits()
            && self.pe_ci95.1.to_bits() == o.pe_ci95.1.to_bits()
            && self.visits == o.visits
    }
}

impl MonteCarloSummary {
    pub fn alpha_hat(&self) -> Option<f64> {
        self.visits.and_then(|v| v.alpha_hat)
    }

    pub fn beta_hat(&self) -> Option<f64> {
        self.visits.and_then(|v| v.beta_hat)
    }

    pub fn mean_n1(&self) -> Option<f64> {
        self.visits.map(|v| v.mean_n1)
    }
}

/// 95% interval for a binomial proportion: normal approximation with
/// continuity correction, or Clopper-Pearson when either count is below 5.
pub fn proportion_ci95(successes: u64, n: u64) -> (f64, f64) {
    if successes < 5 || n - successes < 5 {
        return clopper_pearson(successes, n, 0.05);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let half = 1.959_963_984_540_054 * (p * (1.0 - p) / nf).sqrt() + 0.5 / nf;
    ((p - half).max(0.0), (p + half).min(1.0))
}

fn check_spec<F: Scalar>(spec: &ExperimentSpec<F>) -> Result<()> {
    if spec.trials == 0 {
        return Err(invalid("trials", "must be >= 1"));
    }
    if spec.sample_cap == Some(0) {
        return Err(invalid("sample_cap", "must be >= 1"));
    }
    if !(spec.pi > F::zero() && spec.pi <= F::lit(0.5)) {
        return Err(invalid("pi", format!("must lie in (0, 1/2], got {}", spec.pi)));
    }
    Ok(())
}

/// A trial that failed, and the trials before it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    /// Index of the lowest failing trial.
    pub trial: u64,
    pub error: Error,
    /// Summary of trials `0..trial`; `None` when the first trial failed.
    pub completed: Option<MonteCarloSummary>,
}

/// Runs `spec.trials` independent searches in parallel and summarises them.
///
/// A failing trial (e.g. hitting the sample cap) fails the experiment; the
/// error reported is that of the lowest failing trial index.
pub fn run_experiment<F: Scalar>(spec: &ExperimentSpec<F>) -> Result<MonteCarloSummary> {
    run_experiment_partial(spec)?.map_err(|f| f.error)
}

/// As [`run_experiment`], but a failing trial yields the summary of every
/// trial before it instead of only the error.
pub fn run_experiment_partial<F: Scalar>(
    spec: &ExperimentSpec<F>,
) -> Result<std::result::Result<MonteCarloSummary, TrialFailure>> {
    check_spec(spec)?;
    let start = Instant::now();
    let config = spec.procedure.resolve(&spec.model, spec.pi, spec.delta)?;
    let cap = spec.sample_cap.unwrap_or(SAMPLE_CAP);
    let pi = spec.pi.as_f64();
    let tallies: Vec<Result<Tally>> = (0..spec.trials)
        .into_par_iter()
        .map(|i| {
            let mut src =
                SimulatedPopulations::new(&spec.model, pi, trial_rng(spec.master_seed, i));
            config
                .run_capped(&spec.model, &mut src, cap)
                .map(|o| Tally::of(&o))
        })
        .collect();
    let mut total = Tally::default();
    let mut failure = None;
    for (i, t) in tallies.into_iter().enumerate() {
        match t {
            Ok(t) => total = total.merge(t),
            Err(e) => {
                failure = Some((i as u64, e));
                break;
            }
        }
    }
    let summary = (total.trials > 0).then(|| {
        let (mean_n, stderr_n) = moments(total.trials, total.samples, total.samples_sq);
        MonteCarloSummary {
            procedure: config.name(),
            trials: total.trials,
            master_seed: spec.master_seed,
            pi,
            delta: spec.delta.as_f64(),
            mean_n,
            stderr_n,
            pi_mean_n: pi * mean_n,
            errors: total.errors,
            pe_hat: total.errors as f64 / total.trials as f64,
            pe_ci95: proportion_ci95(total.errors, total.trials),
            visits: spec
                .collect_per_population
                .then(|| VisitStats::from_tally(&total)),
            elapsed: start.elapsed(),
        }
    });
    Ok(match failure {
        None => Ok(summary.expect("at least one trial")),
        Some((trial, error)) => Err(TrialFailure {
            trial,
            error,
            completed: summary,
        }),
    })
}

/// Outcome of repeated single-population SPRTs under one fixed hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleTestSummary {
    pub runs: u64,
    pub accepted: u64,
    pub mean_samples: f64,
    pub stderr_samples: f64,
}

impl SingleTestSummary {
    pub fn accept_rate(&self) -> f64 {
        self.accepted as f64 / self.runs as f64
    }

    /// Binomial standard error of `accept_rate`.
    pub fn accept_stderr(&self) -> f64 {
        let p = self.accept_rate();
        (p * (1.0 - p) / self.runs as f64).sqrt()
    }
}

/// Runs one SPRT per stream against populations that all carry `label`.
pub fn run_single_sprt<F: Scalar>(
    model: &PopulationModel<F>,
    config: &SprtConfig<F>,
    label: Label,
    runs: u64,
    master_seed: u64,
) -> Result<SingleTestSummary> {
    if runs == 0 {
        return Err(invalid("runs", "must be >= 1"));
    }
    let exits: Vec<Result<(bool, u64)>> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut src = SimulatedPopulations::fixed(model, label, trial_rng(master_seed, i));
            crate::procedures::PopulationSource::<F>::next_population(&mut src);
            sprt_single(model, config, &mut src).map(|e| (e.accepted, e.samples))
        })
        .collect();
    let (mut accepted, mut sum, mut sum_sq) = (0u64, 0u128, 0u128);
    for e in exits {
        let (a, s) = e?;
        accepted += a as u64;
        sum += s as u128;
        sum_sq += (s as u128).pow(2);
    }
    let (mean_samples, stderr_samples) = moments(runs, sum, sum_sq);
    Ok(SingleTestSummary {
        runs,
        accepted,
        mean_samples,
        stderr_samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Inconclusive,
}

/// One identity: observed value against the value predicted from the
/// per-visit estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    pub observed: f64,
    pub predicted: Option<f64>,
    pub residual: Option<f64>,
    /// Combined standard error of the residual.
    pub stderr: Option<f64>,
    pub status: CheckStatus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    /// `E[N] = E[N1] / (alpha (1-pi) + pi (1-beta))`.
    pub renewal: IdentityCheck,
    /// `P_e = alpha (1-pi) / (alpha (1-pi) + pi (1-beta))`.
    pub error: IdentityCheck,
    /// Residuals are compared against this many standard errors.
    pub n_sigma: f64,
}

impl IdentityReport {
    pub fn status(&self) -> CheckStatus {
        use CheckStatus::*;
        match (self.renewal.status, self.error.status) {
            (Fail, _) | (_, Fail) => Fail,
            (Pass, Pass) => Pass,
            _ => Inconclusive,
        }
    }
}

/// Variance of a proportion estimate, kept away from zero at the edges.
fn proportion_var(x: u64, n: u64) -> f64 {
    let p = (x as f64 + 0.5) / (n as f64 + 1.0);
    p * (1.0 - p) / n as f64
}

fn judge(observed: f64, predicted: f64, stderr: f64, n_sigma: f64) -> IdentityCheck {
    let residual = (observed - predicted).abs();
    let slack = 1e-12 * observed.abs().max(predicted.abs()).max(1.0);
    IdentityCheck {
        observed,
        predicted: Some(predicted),
        residual: Some(residual),
        stderr: Some(stderr),
        status: if residual <= n_sigma * stderr + slack {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
    }
}

fn inconclusive(observed: f64) -> IdentityCheck {
    IdentityCheck {
        observed,
        predicted: None,
        residual: None,
        stderr: None,
        status: CheckStatus::Inconclusive,
    }
}

/// Checks the renewal and error-probability identities at 4 combined
/// standard errors.
pub fn verify_identities(summary: &MonteCarloSummary) -> IdentityReport {
    const N_SIGMA: f64 = 4.0;
    let pi = summary.pi;
    let stats = match summary.visits {
        Some(v) if v.typical_visits > 0 && v.atypical_visits > 0 => v,
        _ => {
            return IdentityReport {
                renewal: inconclusive(summary.mean_n),
                error: inconclusive(summary.pe_hat),
                n_sigma: N_SIGMA,
            }
        }
    };
    let alpha = stats.alpha_hat.unwrap();
    let beta = stats.beta_hat.unwrap();
    let var_alpha = proportion_var(stats.false_alarms, stats.typical_visits);
    let var_beta = proportion_var(stats.misses, stats.atypical_visits);
    let find = alpha * (1.0 - pi);
    let confirm = pi * (1.0 - beta);
    let q = find + confirm;
    if q <= 0.0 {
        return IdentityReport {
            renewal: inconclusive(summary.mean_n),
            error: inconclusive(summary.pe_hat),
            n_sigma: N_SIGMA,
        };
    }
    let var_q = (1.0 - pi).powi(2) * var_alpha + pi * pi * var_beta;

    let m = stats.mean_n1;
    let pred_n = m / q;
    let var_pred_n = (stats.stderr_n1 / q).powi(2) + (m / (q * q)).powi(2) * var_q;
    let renewal = judge(
        summary.mean_n,
        pred_n,
        (summary.stderr_n.powi(2) + var_pred_n).sqrt(),
        N_SIGMA,
    );

    let pred_pe = find / q;
    let q4 = q.powi(4);
    let var_pred_pe = (confirm * confirm * (1.0 - pi).powi(2) * var_alpha
        + find * find * pi * pi * var_beta)
        / q4;
    let n = summary.trials as f64;
    let p_obs = summary.pe_hat;
    let var_obs = (pred_pe * (1.0 - pred_pe)).max(p_obs * (1.0 - p_obs)) / n;
    let error = judge(p_obs, pred_pe, (var_obs + var_pred_pe).sqrt(), N_SIGMA);

    IdentityReport {
        renewal,
        error,
        n_sigma: N_SIGMA,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Gaussian pair separation; replaces the model.
    Mu,
    /// Coin bias; replaces the model.
    B,
    Pi,
    Delta,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Mu => "mu",
            SweepAxis::B => "b",
            SweepAxis::Pi => "pi",
            SweepAxis::Delta => "delta",
        }
    }

    /// The experiment at grid value `value`.
    pub fn apply<F: Scalar>(&self, base: &ExperimentSpec<F>, value: F) -> Result<ExperimentSpec<F>> {
        let mut spec = base.clone();
        match self {
            SweepAxis::Mu => spec.model = PopulationModel::gaussian(value)?,
            SweepAxis::B => spec.model = PopulationModel::coin(value)?,
            SweepAxis::Pi => spec.pi = value,
            SweepAxis::Delta => spec.delta = value,
        }
        Ok(spec)
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mu" => Ok(SweepAxis::Mu),
            "b" => Ok(SweepAxis::B),
            "pi" => Ok(SweepAxis::Pi),
            "delta" => Ok(SweepAxis::Delta),
            _ => Err(invalid("axis", format!("expected mu, b, pi or delta, got {s:?}"))),
        }
    }
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint<F> {
    pub value: F,
    pub spec: Option<ExperimentSpec<F>>,
    pub outcome: Result<(MonteCarloSummary, BoundsReport<F>)>,
}

/// Runs one experiment per grid value. Point `j` uses master seed
/// `split_seed(base.master_seed, j)`. A failing point is recorded and the
/// sweep moves on.
pub fn sweep<F: Scalar>(
    axis: SweepAxis,
    grid: &[F],
    base: &ExperimentSpec<F>,
) -> Result<Vec<SweepPoint<F>>> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    check_spec(base)?;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(j, &value)| {
            let spec = axis.apply(base, value).map(|mut s| {
                s.master_seed = split_seed(base.master_seed, j as u64);
                s
            });
            match spec {
                Ok(spec) => {
                    let outcome = run_point(&spec);
                    SweepPoint {
                        value,
                        spec: Some(spec),
                        outcome,
                    }
                }
                Err(e) => SweepPoint {
                    value,
                    spec: None,
                    outcome: Err(e),
                },
            }
        })
        .collect())
}

/// Simulation plus the bounds at the same parameters.
pub fn run_point<F: Scalar>(
    spec: &ExperimentSpec<F>,
) -> Result<(MonteCarloSummary, BoundsReport<F>)> {
    let summary = run_experiment(spec)?;
    let (gamma_l, overshoot) = spec.procedure.bound_inputs(&spec.model);
    let report = BoundsReport::evaluate(spec.pi, spec.delta, &spec.model, gamma_l, overshoot)?;
    Ok((summary, report))
}
