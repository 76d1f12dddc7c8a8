use super::sprt::check_prior;
use super::{LlrSum, PopulationSource, TrialLog, TrialOutcome};
use crate::error::{invalid, Error, Result};
use crate::models::{ModelKind, PopulationModel};
use crate::special::{binomial_sf, normal_cdf, normal_sf};
use crate::Scalar;

/// Fixed sample size per population, declaring atypical when the summed
/// log-likelihood ratio reaches `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonAdaptiveConfig<F> {
    n0: u64,
    tau: F,
}

impl<F: Scalar> NonAdaptiveConfig<F> {
    pub fn new(n0: u64, tau: F) -> Result<Self> {
        if n0 == 0 {
            return Err(invalid("N0", "must be >= 1"));
        }
        if tau.is_nan() {
            return Err(invalid("tau", "must not be NaN"));
        }
        Ok(Self { n0, tau })
    }

    pub fn n0(&self) -> u64 {
        self.n0
    }

    pub fn tau(&self) -> F {
        self.tau
    }
}

pub fn run_nonadaptive<F: Scalar, S: PopulationSource<F>>(
    model: &PopulationModel<F>,
    config: &NonAdaptiveConfig<F>,
    source: &mut S,
) -> Result<TrialOutcome> {
    run_nonadaptive_capped(model, config, source, super::SAMPLE_CAP)
}

pub(crate) fn run_nonadaptive_capped<F: Scalar, S: PopulationSource<F>>(
    model: &PopulationModel<F>,
    config: &NonAdaptiveConfig<F>,
    source: &mut S,
    cap: u64,
) -> Result<TrialOutcome> {
    let mut log = TrialLog::new(cap);
    loop {
        let label = source.next_population();
        if config.n0 > log.remaining() {
            return Err(log.overrun());
        }
        let mut llr = LlrSum::start(model);
        for _ in 0..config.n0 {
            llr.add(model, source.observe())?;
        }
        if llr.at_or_above(config.tau) {
            return log.finish(label, config.n0);
        }
        log.abandon(label, config.n0)?;
    }
}

/// Exact `(alpha, beta)` of the fixed-size test: false alarm under `P0`,
/// miss under `P1`.
pub fn nonadaptive_error_rates<F: Scalar>(
    model: &PopulationModel<F>,
    config: &NonAdaptiveConfig<F>,
) -> Result<(f64, f64)> {
    let n = config.n0;
    let tau = config.tau.as_f64();
    match model.kind() {
        ModelKind::GaussianPair { mu } => {
            // S = 2 mu sum(y); sum(y) ~ N(-+ n mu, n)
            let mu = mu.as_f64();
            let nf = n as f64;
            let cut = tau / (2.0 * mu);
            let alpha = normal_sf((cut + nf * mu) / nf.sqrt());
            let beta = normal_cdf((cut - nf * mu) / nf.sqrt());
            Ok((alpha, beta))
        }
        ModelKind::CoinPair { b } => {
            let b = b.as_f64();
            let step = model.coin_log_step().unwrap().as_f64();
            if !step.is_finite() {
                // all tails vs all heads: S = -inf or +inf
                let alpha = if tau == f64::NEG_INFINITY { 1.0 } else { 0.0 };
                let beta = if tau == f64::INFINITY { 1.0 } else { 0.0 };
                return Ok((alpha, beta));
            }
            // S = (2h - n) step >= tau  <=>  h >= (tau/step + n) / 2
            let min_heads = ((tau / step - 1e-9 + n as f64) / 2.0).ceil();
            let c = if min_heads <= 0.0 {
                -1
            } else if min_heads > n as f64 {
                n as i64
            } else {
                min_heads as i64 - 1
            };
            let alpha = binomial_sf(n, c, 0.5 - b);
            let beta = 1.0 - binomial_sf(n, c, 0.5 + b);
            Ok((alpha, beta))
        }
        ModelKind::Generic(_) => Err(Error::Unsupported {
            what: "closed-form fixed-size error rates",
            model: "generic",
        }),
    }
}

/// Smallest `N0` whose exact error rates give
/// `alpha (1-pi) / (alpha (1-pi) + pi (1-beta)) <= delta / (1 + delta)`.
pub fn tune_nonadaptive<F: Scalar>(
    model: &PopulationModel<F>,
    pi: F,
    delta: F,
    tau: F,
) -> Result<NonAdaptiveConfig<F>> {
    check_prior(pi)?;
    if !(delta > F::zero() && delta <= F::lit(0.5)) {
        return Err(invalid("delta", format!("must lie in (0, 1/2], got {delta}")));
    }
    let (p, d) = (pi.as_f64(), delta.as_f64());
    let target = d / (1.0 + d);
    for n0 in 1..=1_000_000 {
        let cfg = NonAdaptiveConfig::new(n0, tau)?;
        let (alpha, beta) = nonadaptive_error_rates(model, &cfg)?;
        let found = alpha * (1.0 - p);
        let denom = found + p * (1.0 - beta);
        if denom > 0.0 && found / denom <= target {
            return Ok(cfg);
        }
    }
    Err(invalid("N0", "no sample size up to 1e6 reaches the error target"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Label;
    use crate::procedures::ScriptedPopulations;

    #[test]
    fn always_accept_returns_first_population() {
        let m = PopulationModel::<f64>::gaussian(1.0).unwrap();
        let cfg = NonAdaptiveConfig::new(1, f64::NEG_INFINITY).unwrap();
        let mut src = ScriptedPopulations::new(vec![(Label::Typical, vec![-3.0])]);
        let out = run_nonadaptive(&m, &cfg, &mut src).unwrap();
        assert_eq!((out.returned_index, out.total_samples), (1, 1));
        assert_eq!(nonadaptive_error_rates(&m, &cfg).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn fixed_size_decisions() {
        let m = PopulationModel::<f64>::gaussian(1.0).unwrap();
        let cfg = NonAdaptiveConfig::new(3, 0.0).unwrap();
        let mut src = ScriptedPopulations::new(vec![
            (Label::Typical, vec![1.0, -1.0, -0.5]),
            (Label::Atypical, vec![1.0, -1.0, 0.0]),
        ]);
        let out = run_nonadaptive(&m, &cfg, &mut src).unwrap();
        assert_eq!(out.returned_index, 2);
        assert_eq!(out.total_samples, 6);
    }

    #[test]
    fn gaussian_error_rates() {
        let m = PopulationModel::<f64>::gaussian(1.0).unwrap();
        let cfg = NonAdaptiveConfig::new(5, 0.0).unwrap();
        let (a, b) = nonadaptive_error_rates(&m, &cfg).unwrap();
        // Q(sqrt 5)
        assert!((a - 0.012_673_659_338_734_1).abs() < 1e-12, "{a}");
        assert!((a - 0.01267).abs() < 1e-5);
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn coin_error_rates_match_enumeration() {
        let b = 0.2;
        let m = PopulationModel::<f64>::coin(b).unwrap();
        let step = m.coin_log_step().unwrap();
        for n in 1..=9u32 {
            for tau in [0.0, step, -step, 2.5 * step, -1e9] {
                let cfg = NonAdaptiveConfig::new(n as u64, tau).unwrap();
                let (alpha, beta) = nonadaptive_error_rates(&m, &cfg).unwrap();
                let (mut a, mut bb) = (0.0, 0.0);
                for mask in 0u32..(1 << n) {
                    let h = mask.count_ones() as i32;
                    let s = (2 * h - n as i32) as f64 * step;
                    let p0 = (0.5 - b).powi(h) * (0.5 + b).powi(n as i32 - h);
                    let p1 = (0.5 + b).powi(h) * (0.5 - b).powi(n as i32 - h);
                    if s >= tau - 1e-12 {
                        a += p0;
                    } else {
                        bb += p1;
                    }
                }
                assert!((alpha - a).abs() < 1e-12 && (beta - bb).abs() < 1e-12, "n={n} tau={tau}");
            }
        }
    }

    #[test]
    fn tuning_reaches_target() {
        let m = PopulationModel::<f64>::gaussian(1.0).unwrap();
        let cfg = tune_nonadaptive(&m, 1e-3, 1e-2, 0.0).unwrap();
        assert_eq!(cfg.n0(), 19);
    }
}
