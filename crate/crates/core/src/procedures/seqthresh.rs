use super::{PopulationSource, TrialLog, TrialOutcome};
use super::sprt::check_prior;
use crate::error::{invalid, Result};
use crate::models::PopulationModel;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeqThreshConfig {
    k_max: u32,
}

impl SeqThreshConfig {
    pub fn new(k_max: u32) -> Result<Self> {
        if k_max == 0 {
            return Err(invalid("k_max", "must be >= 1"));
        }
        Ok(Self { k_max })
    }

    /// Round count `ceil(2 log2((1 - pi) / pi))`, clamped to at least one.
    pub fn from_prior<F: Scalar>(pi: F) -> Result<Self> {
        Self::new(seq_thresh_params(pi)?.k_max)
    }

    pub fn k_max(&self) -> u32 {
        self.k_max
    }

    /// Computes the per-round thresholds for `model`.
    pub fn prepare<F: Scalar>(&self, model: &PopulationModel<F>) -> Result<SeqThreshPlan<F>> {
        let thresholds = (1..=self.k_max)
            .map(|k| model.round_threshold(k))
            .collect::<Result<Vec<_>>>()?;
        Ok(SeqThreshPlan {
            config: *self,
            thresholds,
        })
    }
}

/// Round count and the resulting per-population false-alarm rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeqThreshParams {
    pub k_max: u32,
    /// `(1/2)^k_max`.
    pub alpha: f64,
    /// The formula gave zero rounds and `k_max` was raised to one.
    pub clamped: bool,
}

pub fn seq_thresh_params<F: Scalar>(pi: F) -> Result<SeqThreshParams> {
    check_prior(pi)?;
    let pi = pi.as_f64();
    let raw = (2.0 * ((1.0 - pi) / pi).log2()).ceil();
    let clamped = raw < 1.0;
    let k_max = if clamped { 1 } else { raw as u32 };
    let alpha = 0.5_f64.powi(k_max as i32);
    debug_assert!(clamped || alpha <= (pi / (1.0 - pi)).powi(2) * (1.0 + 1e-12));
    Ok(SeqThreshParams {
        k_max,
        alpha,
        clamped,
    })
}

/// Configuration plus the thresholds `gamma_1..gamma_kmax` for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqThreshPlan<F> {
    config: SeqThreshConfig,
    thresholds: Vec<F>,
}

impl<F: Scalar> SeqThreshPlan<F> {
    pub fn k_max(&self) -> u32 {
        self.config.k_max
    }

    pub fn thresholds(&self) -> &[F] {
        &self.thresholds
    }

    /// Exact probability that a typical population survives every round.
    pub fn null_pass_probability(&self, model: &PopulationModel<F>) -> Result<f64> {
        (1..=self.k_max()).try_fold(1.0, |acc, k| Ok(acc * model.round_null_survival(k)?))
    }

    /// Exact expected samples spent on a typical population:
    /// `sum_k k * prod_{m<k} P0(T_m > gamma_m)`.
    pub fn expected_null_samples(&self, model: &PopulationModel<F>) -> Result<f64> {
        let mut reach = 1.0;
        let mut total = 0.0;
        for k in 1..=self.k_max() {
            total += k as f64 * reach;
            reach *= model.round_null_survival(k)?;
        }
        Ok(total)
    }
}

/// Sequential thresholding: round `k` draws `k` fresh samples of the current
/// population and abandons it when the round statistic is at most
/// `gamma_k`. A population surviving `k_max` rounds is returned.
pub fn run_seq_thresh<F: Scalar, S: PopulationSource<F>>(
    model: &PopulationModel<F>,
    plan: &SeqThreshPlan<F>,
    source: &mut S,
) -> Result<TrialOutcome> {
    run_seq_thresh_capped(model, plan, source, super::SAMPLE_CAP)
}

pub(crate) fn run_seq_thresh_capped<F: Scalar, S: PopulationSource<F>>(
    model: &PopulationModel<F>,
    plan: &SeqThreshPlan<F>,
    source: &mut S,
    cap: u64,
) -> Result<TrialOutcome> {
    let mut log = TrialLog::new(cap);
    let mut round = Vec::with_capacity(plan.k_max() as usize);
    loop {
        let label = source.next_population();
        let mut used = 0u64;
        let mut survived = true;
        for (k, &gamma) in (1..=plan.k_max() as u64).zip(&plan.thresholds) {
            if used + k > log.remaining() {
                return Err(log.overrun());
            }
            round.clear();
            round.extend((0..k).map(|_| source.observe()));
            used += k;
            if model.round_statistic(&round)? <= gamma {
                survived = false;
                break;
            }
        }
        if survived {
            return log.finish(label, used);
        }
        log.abandon(label, used)?;
    }
}
