use super::{LlrSum, PopulationSource, TrialLog, TrialOutcome, SAMPLE_CAP};
use crate::error::{invalid, Error, Result};
use crate::models::{ModelKind, PopulationModel};
use crate::Scalar;

/// Thresholds of the per-population SPRT, stored in the log domain.
///
/// A population is sampled while `log gamma_L < L < log gamma_U`; it is
/// abandoned once `L <= log gamma_L` and returned once `L >= log gamma_U`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SprtConfig<F> {
    log_lower: F,
    log_upper: F,
}

impl<F: Scalar> SprtConfig<F> {
    /// `gamma_l` in `[0, 1]` (1 is the CUSUM boundary case, 0 only makes
    /// sense for the deterministic coin) and finite `gamma_u > 1`.
    pub fn from_thresholds(gamma_l: F, gamma_u: F) -> Result<Self> {
        if !(gamma_l >= F::zero() && gamma_l <= F::one()) {
            return Err(invalid("gamma_L", format!("must lie in [0, 1], got {gamma_l}")));
        }
        Self::from_log_thresholds(gamma_l.ln(), gamma_u.ln())
    }

    pub fn from_log_thresholds(log_lower: F, log_upper: F) -> Result<Self> {
        if !(log_lower <= F::zero()) {
            return Err(invalid("gamma_L", "log threshold must be <= 0"));
        }
        if !(log_upper > F::zero() && log_upper.is_finite()) {
            return Err(invalid("gamma_U", "must be finite and > 1"));
        }
        Ok(Self {
            log_lower,
            log_upper,
        })
    }

    pub fn log_lower(&self) -> F {
        self.log_lower
    }

    pub fn log_upper(&self) -> F {
        self.log_upper
    }

    pub fn gamma_l(&self) -> F {
        self.log_lower.exp()
    }

    pub fn gamma_u(&self) -> F {
        self.log_upper.exp()
    }

    /// Raises `log gamma_U` to the next whole number of coin steps so that
    /// the walk lands on the upper boundary exactly. Only meaningful for the
    /// coin pair; the deterministic coin is returned unchanged.
    pub fn with_exact_overshoot(self, model: &PopulationModel<F>) -> Result<Self> {
        let step = model.coin_log_step().ok_or(Error::Unsupported {
            what: "exact-overshoot thresholds",
            model: model.name(),
        })?;
        if !step.is_finite() {
            return Ok(self);
        }
        let steps = (self.log_upper / step).ceil();
        Ok(Self {
            log_upper: steps * step,
            ..self
        })
    }
}

/// How the lower threshold `gamma_L` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaLPolicy<F> {
    /// Model rule: `1/mu` (mu > 1) or `1 - sqrt(mu)` (mu < 1) for the
    /// Gaussian pair, `(1-2b)/(1+2b)` for the coin pair.
    Model,
    /// `gamma_L = 1`: abandon as soon as the ratio is at most one.
    Cusum,
    Fixed(F),
}

impl<F: Scalar> GammaLPolicy<F> {
    /// Resolves to `log gamma_L`.
    pub fn log_gamma_l(&self, model: &PopulationModel<F>) -> Result<F> {
        match *self {
            GammaLPolicy::Cusum => Ok(F::zero()),
            GammaLPolicy::Fixed(g) => {
                if !(g > F::zero() && g < F::one()) {
                    return Err(invalid("gamma_L", format!("must lie in (0, 1), got {g}")));
                }
                Ok(g.ln())
            }
            GammaLPolicy::Model => match model.kind() {
                // exactly one coin step below zero
                ModelKind::CoinPair { .. } => Ok(-model.coin_log_step().unwrap()),
                _ => Ok(self.gamma_l(model)?.ln()),
            },
        }
    }

    /// Resolves to `gamma_L` itself.
    pub fn gamma_l(&self, model: &PopulationModel<F>) -> Result<F> {
        match *self {
            GammaLPolicy::Cusum => Ok(F::one()),
            GammaLPolicy::Fixed(_) => Ok(self.log_gamma_l(model)?.exp()),
            GammaLPolicy::Model => match model.kind() {
                ModelKind::GaussianPair { mu } => {
                    let mu = *mu;
                    if mu > F::one() {
                        Ok(mu.recip())
                    } else if mu < F::one() {
                        Ok(F::one() - mu.sqrt())
                    } else {
                        Err(invalid(
                            "gamma_L",
                            "the Gaussian rule covers mu > 1 and mu < 1 only; pass an explicit value at mu = 1",
                        ))
                    }
                }
                ModelKind::CoinPair { b } => {
                    let two_b = F::lit(2.0) * *b;
                    Ok((F::one() - two_b) / (F::one() + two_b))
                }
                ModelKind::Generic(_) => Err(Error::Unsupported {
                    what: "a default gamma_L rule",
                    model: "generic",
                }),
            },
        }
    }
}

/// `gamma_U = (1 - pi) / (pi delta)` with `gamma_L` from `policy`.
pub fn default_sprt_config<F: Scalar>(
    pi: F,
    delta: F,
    model: &PopulationModel<F>,
    policy: GammaLPolicy<F>,
) -> Result<SprtConfig<F>> {
    check_prior(pi)?;
    let half = F::lit(0.5);
    if !(delta > F::zero() && delta <= half) {
        return Err(invalid("delta", format!("must lie in (0, 1/2], got {delta}")));
    }
    let log_upper = (F::one() - pi).ln() - pi.ln() - delta.ln();
    SprtConfig::from_log_thresholds(policy.log_gamma_l(model)?, log_upper)
}

pub(crate) fn check_prior<F: Scalar>(pi: F) -> Result<()> {
    if !(pi > F::zero() && pi <= F::lit(0.5)) {
        return Err(invalid("pi", format!("must lie in (0, 1/2], got {pi}")));
    }
    Ok(())
}

/// Exit state of one per-population SPRT.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SprtExit<F> {
    /// Crossed the upper threshold.
    pub accepted: bool,
    pub samples: u64,
    /// Log-likelihood ratio at the stopping time.
    pub llr: F,
}

/// Runs the SPRT on the source's current population.
pub fn sprt_single<F: Scalar, S: PopulationSource<F>>(
    model: &PopulationModel<F>,
    config: &SprtConfig<F>,
    source: &mut S,
) -> Result<SprtExit<F>> {
    sprt_capped(model, config, source, SAMPLE_CAP, SAMPLE_CAP)
}

/// Stops with an error after `budget` samples; `cap` is the reported limit.
fn sprt_capped<F: Scalar, S: PopulationSource<F>>(
    model: &PopulationModel<F>,
    config: &SprtConfig<F>,
    source: &mut S,
    budget: u64,
    cap: u64,
) -> Result<SprtExit<F>> {
    let mut llr = LlrSum::start(model);
    let mut samples = 0u64;
    loop {
        if samples == budget {
            return Err(Error::NonTermination { cap });
        }
        llr.add(model, source.observe())?;
        samples += 1;
        if llr.at_or_below(config.log_lower) {
            return Ok(SprtExit {
                accepted: false,
                samples,
                llr: llr.value(),
            });
        }
        if llr.at_or_above(config.log_upper) {
            return Ok(SprtExit {
                accepted: true,
                samples,
                llr: llr.value(),
            });
        }
    }
}

/// Series of SPRTs: test populations in turn, abandon at the lower
/// threshold, return the first population that reaches the upper one.
pub fn run_sprt<F: Scalar, S: PopulationSource<F>>(
    model: &PopulationModel<F>,
    config: &SprtConfig<F>,
    source: &mut S,
) -> Result<TrialOutcome> {
    run_sprt_capped(model, config, source, SAMPLE_CAP)
}

pub(crate) fn run_sprt_capped<F: Scalar, S: PopulationSource<F>>(
    model: &PopulationModel<F>,
    config: &SprtConfig<F>,
    source: &mut S,
    cap: u64,
) -> Result<TrialOutcome> {
    let mut log = TrialLog::new(cap);
    loop {
        let label = source.next_population();
        let exit = sprt_capped(model, config, source, log.remaining(), cap)?;
        if exit.accepted {
            return log.finish(label, exit.samples);
        }
        log.abandon(label, exit.samples)?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Label;
    use crate::procedures::ScriptedPopulations;

    const H: f64 = 1.0;
    const T: f64 = 0.0;

    #[test]
    fn coin_tails_first_abandons_immediately() {
        let m = PopulationModel::<f64>::coin(0.3).unwrap();
        let cfg = default_sprt_config(1e-3, 1e-2, &m, GammaLPolicy::Model).unwrap();
        let mut src = ScriptedPopulations::new(vec![
            (Label::Typical, vec![T]),
            (Label::Typical, vec![H, T, T]),
            (Label::Atypical, vec![H; 64]),
        ]);
        let out = run_sprt(&m, &cfg, &mut src).unwrap();
        assert_eq!(out.per_population_samples().collect::<Vec<_>>()[..2], [1, 3]);
        assert_eq!(out.returned_index, 3);
        assert_eq!(out.returned_label, Label::Atypical);
    }

    #[test]
    fn deterministic_coin_terminates_on_first_heads() {
        let m = PopulationModel::<f64>::coin(0.5).unwrap();
        let cfg = default_sprt_config(1e-3, 1e-2, &m, GammaLPolicy::Model).unwrap();
        assert_eq!(cfg.log_lower(), f64::NEG_INFINITY);
        let mut src = ScriptedPopulations::new(vec![
            (Label::Typical, vec![T]),
            (Label::Atypical, vec![H]),
        ]);
        let out = run_sprt(&m, &cfg, &mut src).unwrap();
        assert_eq!(out.total_samples, 2);
        assert_eq!(out.visits[1].samples, 1);
        assert_eq!(out.returned_index, 2);
    }

    #[test]
    fn three_heads_hit_three_step_boundary() {
        let m = PopulationModel::<f64>::coin(0.25).unwrap();
        let cfg = SprtConfig::from_log_thresholds(-(3.0_f64.ln()), 3.0 * 3.0_f64.ln()).unwrap();
        let mut src = ScriptedPopulations::new(vec![(Label::Atypical, vec![H, H, H])]);
        let out = run_sprt(&m, &cfg, &mut src).unwrap();
        assert_eq!((out.returned_index, out.total_samples), (1, 3));
        // H T H H H: net +3 after five flips
        let mut src = ScriptedPopulations::new(vec![(Label::Atypical, vec![H, T, H, H, H])]);
        assert_eq!(run_sprt(&m, &cfg, &mut src).unwrap().total_samples, 5);
    }

    #[test]
    fn lower_tie_abandons() {
        // gamma_L = 1/3 given as a number still ties with one tails step
        let m = PopulationModel::<f64>::coin(0.25).unwrap();
        let cfg = SprtConfig::from_thresholds(1.0 / 3.0, 1e3).unwrap();
        let mut src = ScriptedPopulations::new(vec![
            (Label::Typical, vec![H, H, T, T, T]),
            (Label::Atypical, vec![H; 20]),
        ]);
        let out = run_sprt(&m, &cfg, &mut src).unwrap();
        assert_eq!(out.visits[0].samples, 5);
    }

    #[test]
    fn cusum_boundary_moves_on_ratio_one() {
        let m = PopulationModel::<f64>::coin(0.25).unwrap();
        let cfg = default_sprt_config(1e-3, 1e-2, &m, GammaLPolicy::Cusum).unwrap();
        assert_eq!(cfg.gamma_l(), 1.0);
        // H T returns the ratio to exactly one
        let mut src = ScriptedPopulations::new(vec![
            (Label::Typical, vec![H, T]),
            (Label::Atypical, vec![H; 20]),
        ]);
        let out = run_sprt(&m, &cfg, &mut src).unwrap();
        assert_eq!(out.visits[0].samples, 2);
    }

    #[test]
    fn default_thresholds() {
        let g = PopulationModel::<f64>::gaussian(4.0).unwrap();
        let cfg = default_sprt_config(1e-3, 1e-2, &g, GammaLPolicy::Model).unwrap();
        assert!((cfg.gamma_u() - 99_900.0).abs() < 1e-6);
        assert!((cfg.gamma_l() - 0.25).abs() < 1e-15);
        let c = PopulationModel::<f64>::coin(0.25).unwrap();
        let cfg = default_sprt_config(1e-3, 1e-2, &c, GammaLPolicy::Model).unwrap();
        assert!((cfg.gamma_l() - 1.0 / 3.0).abs() < 1e-15);
        let half = PopulationModel::<f64>::gaussian(0.25).unwrap();
        assert_eq!(GammaLPolicy::Model.gamma_l(&half).unwrap(), 0.5);
        let one = PopulationModel::<f64>::gaussian(1.0).unwrap();
        assert!(GammaLPolicy::Model.gamma_l(&one).is_err());
        assert!(default_sprt_config(0.0, 1e-2, &g, GammaLPolicy::Model).is_err());
        assert!(default_sprt_config(0.6, 1e-2, &g, GammaLPolicy::Model).is_err());
        assert!(default_sprt_config(1e-3, 0.0, &g, GammaLPolicy::Model).is_err());
        assert!(default_sprt_config(1e-3, 0.7, &g, GammaLPolicy::Model).is_err());
        assert!(default_sprt_config(1e-3, 1e-2, &g, GammaLPolicy::Fixed(1.0)).is_err());
    }

    #[test]
    fn exact_overshoot_snaps_upper() {
        let c = PopulationModel::<f64>::coin(0.25).unwrap();
        let cfg = default_sprt_config(1e-3, 1e-2, &c, GammaLPolicy::Model)
            .unwrap()
            .with_exact_overshoot(&c)
            .unwrap();
        let steps = cfg.log_upper() / 3.0_f64.ln();
        assert!((steps - steps.round()).abs() < 1e-12);
        assert_eq!(steps.round(), (99_900.0_f64.ln() / 3.0_f64.ln()).ceil());
        let g = PopulationModel::<f64>::gaussian(1.0).unwrap();
        assert!(cfg.with_exact_overshoot(&g).is_err());
    }
}
