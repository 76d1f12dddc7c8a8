//! Closed-form bounds on the expected number of samples `E[N]`.
//!
//! Natural logarithms throughout; `log2` appears only in the round count of
//! sequential thresholding. Lower bounds that come out negative for extreme
//! inputs are returned as computed (they are vacuous, not wrong).

use crate::error::{invalid, Result};
use crate::models::{ModelKind, PopulationModel};
use crate::procedures::GammaLPolicy;
use crate::Scalar;

pub use crate::procedures::{seq_thresh_params, SeqThreshParams};

fn check_pi<F: Scalar>(pi: F) -> Result<()> {
    if !(pi > F::zero() && pi <= F::lit(0.5)) {
        return Err(invalid("pi", format!("must lie in (0, 1/2], got {pi}")));
    }
    Ok(())
}

fn check_delta<F: Scalar>(delta: F, allow_zero: bool) -> Result<()> {
    let ok_low = if allow_zero { delta >= F::zero() } else { delta > F::zero() };
    if !(ok_low && delta <= F::lit(0.5)) {
        let range = if allow_zero { "[0, 1/2]" } else { "(0, 1/2]" };
        return Err(invalid("delta", format!("must lie in {range}, got {delta}")));
    }
    Ok(())
}

fn check_divergence<F: Scalar>(name: &'static str, d: F) -> Result<()> {
    if !(d > F::zero()) {
        return Err(invalid(name, format!("divergence must be > 0, got {d}")));
    }
    Ok(())
}

/// `log(1 / (2 pi delta))`, `+inf` at `delta = 0`.
fn log_inv_2pi_delta<F: Scalar>(pi: F, delta: F) -> F {
    if delta == F::zero() {
        F::infinity()
    } else {
        -(F::lit(2.0) * pi * delta).ln()
    }
}

/// Lower bound on `E[N]` for any procedure with `P_e <= delta/(1+delta)`.
pub fn lb_any<F: Scalar>(pi: F, delta: F, d01: F, d10: F) -> Result<F> {
    check_pi(pi)?;
    check_delta(delta, true)?;
    check_divergence("D(P0||P1)", d01)?;
    check_divergence("D(P1||P0)", d10)?;
    let one = F::one();
    let shrink = (one - delta).powi(2) / (one + delta);
    let find = (one - pi) / pi * shrink * one.max(d01.recip());
    let ratio = if d10 == d01 { one } else { d10 / d01 };
    let confirm = if delta == F::zero() {
        F::infinity()
    } else {
        log_inv_2pi_delta(pi, delta) / d10 * ((one - delta * ratio) / (one + delta))
    };
    Ok(find + confirm - d10.recip())
}

/// Simplified lower bound for symmetric divergences `D01 = D10 = d`.
pub fn lb_any_simplified<F: Scalar>(pi: F, delta: F, d: F) -> Result<F> {
    check_pi(pi)?;
    check_delta(delta, true)?;
    check_divergence("D", d)?;
    let third = F::lit(1.0 / 3.0);
    let inner = (F::lit(12.0) * pi).recip() + third * log_inv_2pi_delta(pi, delta) - F::one();
    Ok(inner / d)
}

/// Leading coefficient of `pi E[N]` as `pi -> 0`:
/// `((1-delta)^2 / (1+delta)) max(1/D01, 1)`.
pub fn lb_rare_coeff<F: Scalar>(delta: F, d01: F) -> Result<F> {
    check_delta(delta, false)?;
    check_divergence("D(P0||P1)", d01)?;
    let one = F::one();
    Ok((one - delta).powi(2) / (one + delta) * d01.recip().max(one))
}

/// Lower bound for procedures that take a fixed number of samples per
/// population.
pub fn lb_nonadaptive<F: Scalar>(pi: F, delta: F, d10: F) -> Result<F> {
    check_pi(pi)?;
    check_delta(delta, true)?;
    check_divergence("D(P1||P0)", d10)?;
    Ok((log_inv_2pi_delta(pi, delta) - F::one()) / (pi * (F::one() + delta) * d10))
}

/// Which overshoot constants enter the S-SPRT upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Overshoot {
    /// Bounded overshoot: the model's `C1'`, `C2'`.
    #[default]
    Bounded,
    /// Coin pair with the lower threshold one step below zero and the
    /// upper threshold a whole number of steps: both overshoots vanish.
    Exact,
}

/// Upper bound `C1/pi + log(1/(pi delta))/D10 + C2` and its constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsprtBound<F> {
    pub bound: F,
    pub c1: F,
    pub c1_prime: F,
    pub c2: F,
    pub c2_prime: F,
}

/// Upper bound on `E[N]` for the series of SPRTs with
/// `gamma_U = (1-pi)/(pi delta)`.
///
/// `C1 = (C1' + log(1/gamma_L)) / ((1 - gamma_L) D01)` and `C2 = C2'/D10`.
/// For the coin pair the constants are evaluated in units of one
/// log-likelihood step, so the deterministic coin (`b = 1/2`, infinite
/// step, `gamma_L = 0`) gets its limiting value.
pub fn ub_ssprt<F: Scalar>(
    pi: F,
    delta: F,
    model: &PopulationModel<F>,
    gamma_l: F,
    overshoot: Overshoot,
) -> Result<SsprtBound<F>> {
    check_pi(pi)?;
    check_delta(delta, false)?;
    let one = F::one();
    let (d01, d10) = model.kl_divergences();
    let confirm_log = -(pi * delta).ln();

    if let ModelKind::CoinPair { b } = model.kind() {
        let b = *b;
        let step = model.coin_log_step().unwrap();
        let policy = GammaLPolicy::Model.gamma_l(model)?;
        let on_policy = if policy == F::zero() {
            gamma_l == F::zero()
        } else {
            ((gamma_l - policy) / policy).abs() <= F::lit(1e-12)
        };
        if !(on_policy || (gamma_l > F::zero() && gamma_l < one)) {
            return Err(invalid("gamma_L", format!("must lie in (0, 1), got {gamma_l}")));
        }
        let overshoot_steps = match overshoot {
            Overshoot::Bounded => one,
            Overshoot::Exact if on_policy => F::zero(),
            Overshoot::Exact => {
                return Err(invalid(
                    "gamma_L",
                    "exact overshoot needs gamma_L = (1-2b)/(1+2b)",
                ))
            }
        };
        let lower_steps = if on_policy {
            one
        } else if step.is_infinite() {
            F::zero()
        } else {
            -gamma_l.ln() / step
        };
        let two_b = F::lit(2.0) * b;
        let c1 = (overshoot_steps + lower_steps) / ((one - gamma_l) * two_b);
        let c2 = overshoot_steps / two_b;
        let c_prime = if overshoot_steps == F::zero() { F::zero() } else { step };
        return Ok(SsprtBound {
            bound: c1 / pi + confirm_log / d10 + c2,
            c1,
            c1_prime: c_prime,
            c2,
            c2_prime: c_prime,
        });
    }

    if !(gamma_l > F::zero() && gamma_l < one) {
        return Err(invalid("gamma_L", format!("must lie in (0, 1), got {gamma_l}")));
    }
    if overshoot == Overshoot::Exact {
        return Err(crate::Error::Unsupported {
            what: "exact-overshoot constants",
            model: model.name(),
        });
    }
    let (c1_prime, c2_prime) = model.overshoot_constants()?;
    let c1 = (c1_prime - gamma_l.ln()) / ((one - gamma_l) * d01);
    let c2 = c2_prime / d10;
    Ok(SsprtBound {
        bound: c1 / pi + confirm_log / d10 + c2,
        c1,
        c1_prime,
        c2,
        c2_prime,
    })
}

/// Biased-coin specialisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoinBounds<F> {
    /// `(1/(2b^2)) (1/pi + log(1/(pi delta)) + 1)`.
    pub ub: F,
    /// `(1+2b)/(8b^2)`, the leading constant with zero overshoot.
    pub c1_refined: F,
}

pub fn coin_bounds<F: Scalar>(pi: F, delta: F, b: F) -> Result<CoinBounds<F>> {
    check_pi(pi)?;
    check_delta(delta, false)?;
    if !(b > F::zero() && b <= F::lit(0.5)) {
        return Err(invalid("b", format!("must lie in (0, 1/2], got {b}")));
    }
    let one = F::one();
    let b2 = b * b;
    Ok(CoinBounds {
        ub: (pi.recip() - (pi * delta).ln() + one) / (F::lit(2.0) * b2),
        c1_refined: (one + F::lit(2.0) * b) / (F::lit(8.0) * b2),
    })
}

/// Every bound evaluated at one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport<F> {
    pub pi: F,
    pub delta: F,
    pub d01: F,
    pub d10: F,
    /// Lower threshold used for the S-SPRT constants, when one applies.
    pub gamma_l: Option<F>,
    pub overshoot: Overshoot,
    pub lb_any: F,
    /// Present when the divergences are equal.
    pub lb_any_simplified: Option<F>,
    pub lb_rare_coeff: F,
    pub ub_ssprt: Option<F>,
    pub c1: Option<F>,
    pub c1_prime: Option<F>,
    pub c2: Option<F>,
    pub c2_prime: Option<F>,
    pub lb_nonadaptive: F,
    pub coin_ub: Option<F>,
    pub coin_c1_refined: Option<F>,
    pub seq_thresh: SeqThreshParams,
}

impl<F: Scalar> BoundsReport<F> {
    /// `gamma_l = None` falls back to the model's default rule; S-SPRT
    /// fields stay empty when no valid lower threshold or overshoot
    /// constant exists.
    pub fn evaluate(
        pi: F,
        delta: F,
        model: &PopulationModel<F>,
        gamma_l: Option<F>,
        overshoot: Overshoot,
    ) -> Result<Self> {
        check_pi(pi)?;
        check_delta(delta, false)?;
        let (d01, d10) = model.kl_divergences();
        let gamma_l = gamma_l.or_else(|| GammaLPolicy::Model.gamma_l(model).ok());
        let ssprt = gamma_l.and_then(|g| ub_ssprt(pi, delta, model, g, overshoot).ok());
        let coin = match model.kind() {
            ModelKind::CoinPair { b } => Some(coin_bounds(pi, delta, *b)?),
            _ => None,
        };
        Ok(Self {
            pi,
            delta,
            d01,
            d10,
            gamma_l,
            overshoot,
            lb_any: lb_any(pi, delta, d01, d10)?,
            lb_any_simplified: if d01 == d10 {
                Some(lb_any_simplified(pi, delta, d01)?)
            } else {
                None
            },
            lb_rare_coeff: lb_rare_coeff(delta, d01)?,
            ub_ssprt: ssprt.map(|s| s.bound),
            c1: ssprt.map(|s| s.c1),
            c1_prime: ssprt.map(|s| s.c1_prime),
            c2: ssprt.map(|s| s.c2),
            c2_prime: ssprt.map(|s| s.c2_prime),
            lb_nonadaptive: lb_nonadaptive(pi, delta, d10)?,
            coin_ub: coin.map(|c| c.ub),
            coin_c1_refined: coin.map(|c| c.c1_refined),
            seq_thresh: seq_thresh_params(pi)?,
        })
    }

    /// Names of lower bounds that evaluated to a negative (vacuous) value.
    pub fn vacuous(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.lb_any < F::zero() {
            out.push("lb_any");
        }
        if self.lb_any_simplified.is_some_and(|v| v < F::zero()) {
            out.push("lb_any_simplified");
        }
        if self.lb_nonadaptive < F::zero() {
            out.push("lb_nonadaptive");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_errors() {
        assert!(lb_any(0.0, 0.1, 1.0, 1.0).is_err());
        assert!(lb_any(0.6, 0.1, 1.0, 1.0).is_err());
        assert!(lb_any(0.1, 0.6, 1.0, 1.0).is_err());
        assert!(lb_any(0.1, 0.1, 0.0, 1.0).is_err());
        assert!(lb_rare_coeff(0.0, 1.0).is_err());
        assert!(lb_nonadaptive(0.1, -0.1, 1.0).is_err());
        assert!(coin_bounds(0.1, 0.1, 0.0).is_err());
        let g = PopulationModel::<f64>::gaussian(1.0).unwrap();
        assert!(ub_ssprt(1e-3, 1e-2, &g, 1.0, Overshoot::Bounded).is_err());
        assert!(ub_ssprt(1e-3, 1e-2, &g, 0.5, Overshoot::Exact).is_err());
    }

    #[test]
    fn zero_delta_gives_infinite_confirmation() {
        assert_eq!(lb_any(1e-3, 0.0, 2.0, 2.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn boundary_first_term() {
        // pi = delta = 1/2: (1/1)*(1/4)/(3/2) * max(1, 1/D) = 1/6 max(1, 1/D)
        for d in [0.25, 1.0, 3.0] {
            let total = lb_any(0.5, 0.5, d, d).unwrap();
            // 2 pi delta = 1/2, so the confirmation term is log 2 / D * (1/2)/(3/2)
            let rest = 2.0_f64.ln() / d / 3.0 - 1.0 / d;
            assert!((total - rest - f64::max(1.0, 1.0 / d) / 6.0).abs() < 1e-14);
        }
    }

    #[test]
    fn vacuous_values_are_returned() {
        let v = lb_any_simplified(0.5, 0.5, 1.0).unwrap();
        assert!((v - (1.0 / 6.0 + 2.0_f64.ln() / 3.0 - 1.0)).abs() < 1e-15);
        assert!(v < 0.0);
        let n = lb_nonadaptive(0.5, 0.5, 1.0).unwrap();
        assert!(n < 0.0);
        let g = PopulationModel::<f64>::gaussian(1.0).unwrap();
        let r = BoundsReport::evaluate(0.5, 0.5, &g, Some(0.5), Overshoot::Bounded).unwrap();
        assert!(r.vacuous().contains(&"lb_nonadaptive"));
    }

    #[test]
    fn rare_coefficient_saturates() {
        assert_eq!(lb_rare_coeff(1e-2, 8.0).unwrap(), lb_rare_coeff(1e-2, 1.0).unwrap());
        assert!((lb_rare_coeff(1e-12_f64, 0.25).unwrap() - 4.0).abs() < 1e-10);
    }

    #[test]
    fn coin_policy_forms() {
        let c = PopulationModel::<f64>::coin(0.25).unwrap();
        let g = GammaLPolicy::Model.gamma_l(&c).unwrap();
        let bounded = ub_ssprt(1e-3, 1e-2, &c, g, Overshoot::Bounded).unwrap();
        // (1+2b)/(4b^2) and 1/(2b)
        assert!((bounded.c1 - 6.0).abs() < 1e-12);
        assert!((bounded.c2 - 2.0).abs() < 1e-12);
        let exact = ub_ssprt(1e-3, 1e-2, &c, g, Overshoot::Exact).unwrap();
        assert!((exact.c1 - 3.0).abs() < 1e-12);
        assert_eq!(exact.c2, 0.0);
        // off-policy gamma_L matches the general formula
        let off = ub_ssprt(1e-3, 1e-2, &c, 0.5, Overshoot::Bounded).unwrap();
        let (d, _) = c.kl_divergences();
        let general = (3.0_f64.ln() + 2.0_f64.ln()) / (0.5 * d);
        assert!((off.c1 - general).abs() < 1e-12);
        assert!(ub_ssprt(1e-3, 1e-2, &c, 0.5, Overshoot::Exact).is_err());
    }

    #[test]
    fn deterministic_coin_limits() {
        let c = PopulationModel::<f64>::coin(0.5).unwrap();
        let exact = ub_ssprt(1e-3, 1e-2, &c, 0.0, Overshoot::Exact).unwrap();
        assert_eq!(exact.c1, 1.0);
        assert_eq!(exact.bound, 1000.0);
        let r = BoundsReport::evaluate(1e-3, 1e-2, &c, None, Overshoot::Exact).unwrap();
        assert_eq!(r.coin_c1_refined, Some(1.0));
        assert_eq!(r.c1, Some(1.0));
        assert!(r.lb_any.is_finite() && r.lb_nonadaptive.is_finite());
    }

    #[test]
    fn generic_report_omits_ssprt() {
        let m = PopulationModel::<f64>::generic(vec![0.7, 0.3], vec![0.4, 0.6]).unwrap();
        let r = BoundsReport::evaluate(1e-3, 1e-2, &m, Some(0.5), Overshoot::Bounded).unwrap();
        assert!(r.ub_ssprt.is_none() && r.c1.is_none());
        assert!(r.lb_any_simplified.is_none());
        assert!(r.lb_any > 0.0);
    }

    #[test]
    fn f32_matches_f64() {
        let a = lb_any(1e-3_f32, 1e-2, 2.0, 2.0).unwrap();
        let b = lb_any(1e-3_f64, 1e-2, 2.0, 2.0).unwrap();
        assert!(((a as f64) - b).abs() / b < 1e-6);
        let g32 = PopulationModel::<f32>::gaussian(2.0).unwrap();
        let s = ub_ssprt(1e-3_f32, 1e-2, &g32, 0.5, Overshoot::Bounded).unwrap();
        assert!((s.c1 - 2.2285).abs() < 1e-3);
    }
}
