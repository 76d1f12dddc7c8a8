//! Two-hypothesis population models.
//!
//! Every model pairs a typical law `P0` with an atypical law `P1`. Observations
//! are carried as scalars: a real sample for the Gaussian pair, `1` (heads) or
//! `0` (tails) for the coin pair, and the symbol index for finite tables.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::special::{binomial_sf, normal_cdf};
use crate::Scalar;

/// Hidden label of a population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    /// Follows `P0`.
    Typical,
    /// Follows `P1`.
    Atypical,
}

impl Label {
    /// Draws a label that is atypical with probability `pi`.
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, pi: f64) -> Self {
        if rng.random::<f64>() < pi {
            Label::Atypical
        } else {
            Label::Typical
        }
    }

    pub fn is_atypical(self) -> bool {
        self == Label::Atypical
    }

    /// `0` for typical, `1` for atypical.
    pub fn bit(self) -> u8 {
        self as u8
    }
}

/// Probability tables over a finite alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteTables<F> {
    p0: Vec<F>,
    p1: Vec<F>,
    /// Per-symbol log-likelihood ratio; NaN off the common support.
    llr: Vec<F>,
}

impl<F: Scalar> FiniteTables<F> {
    pub fn p0(&self) -> &[F] {
        &self.p0
    }

    pub fn p1(&self) -> &[F] {
        &self.p1
    }

    /// Symbols with positive mass (under both laws).
    fn active(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.p0.len()).filter(move |&s| self.p0[s] > F::zero())
    }

    /// Sum of per-symbol log-likelihood ratios weighted by symbol counts.
    ///
    /// Both the procedure and the threshold enumeration go through this
    /// function, so equal count vectors give bit-identical statistics.
    fn canonical_sum(&self, counts: &[u64]) -> F {
        let mut acc = F::zero();
        for (s, &c) in counts.iter().enumerate() {
            if c > 0 {
                acc = acc + F::from_count(c) * self.llr[s];
            }
        }
        acc
    }

    fn symbol(&self, y: F) -> Result<usize> {
        let idx = y.to_usize().filter(|&i| F::from_usize(i) == Some(y));
        match idx {
            Some(i) if i < self.p0.len() && self.p0[i] > F::zero() => Ok(i),
            _ => Err(Error::InvalidObservation(y.as_f64())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind<F> {
    /// `P0 = N(-mu, 1)`, `P1 = N(mu, 1)`.
    GaussianPair { mu: F },
    /// Heads probability `1/2 - b` under `P0` and `1/2 + b` under `P1`.
    CoinPair { b: F },
    Generic(FiniteTables<F>),
}

/// Upper limit on the number of count vectors enumerated when computing
/// round thresholds for finite tables.
const MAX_OUTCOME_CLASSES: u64 = 2_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationModel<F> {
    kind: ModelKind<F>,
}

impl<F: Scalar> PopulationModel<F> {
    pub fn gaussian(mu: F) -> Result<Self> {
        if !(mu > F::zero() && mu.is_finite()) {
            return Err(invalid("mu", format!("must be finite and > 0, got {mu}")));
        }
        Ok(Self {
            kind: ModelKind::GaussianPair { mu },
        })
    }

    pub fn coin(b: F) -> Result<Self> {
        if !(b > F::zero() && b <= F::lit(0.5)) {
            return Err(invalid("b", format!("must lie in (0, 1/2], got {b}")));
        }
        Ok(Self {
            kind: ModelKind::CoinPair { b },
        })
    }

    /// Finite-alphabet model. Both tables must sum to one within `1e-12`
    /// (or a few ulps of `F`, whichever is larger) and share a support.
    pub fn generic(p0: Vec<F>, p1: Vec<F>) -> Result<Self> {
        if p0.len() != p1.len() {
            return Err(invalid("tables", "P0 and P1 tables differ in length"));
        }
        if p0.is_empty() {
            return Err(invalid("tables", "empty alphabet"));
        }
        let tol = F::lit(1e-12).max(F::lit(8.0) * F::epsilon() * F::from_usize(p0.len()).unwrap());
        for (name, table) in [("P0", &p0), ("P1", &p1)] {
            if table.iter().any(|&p| !(p >= F::zero() && p <= F::one())) {
                return Err(invalid("tables", format!("{name} has entries outside [0, 1]")));
            }
            let total = table.iter().fold(F::zero(), |a, &p| a + p);
            if (total - F::one()).abs() > tol {
                return Err(invalid("tables", format!("{name} sums to {total}, not 1")));
            }
        }
        if p0
            .iter()
            .zip(&p1)
            .any(|(&a, &b)| (a > F::zero()) != (b > F::zero()))
        {
            return Err(invalid("tables", "P0 and P1 supports differ"));
        }
        let llr = p0
            .iter()
            .zip(&p1)
            .map(|(&a, &b)| if a > F::zero() { b.ln() - a.ln() } else { F::nan() })
            .collect();
        Ok(Self {
            kind: ModelKind::Generic(FiniteTables { p0, p1, llr }),
        })
    }

    pub fn kind(&self) -> &ModelKind<F> {
        &self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::GaussianPair { .. } => "gaussian",
            ModelKind::CoinPair { .. } => "coin",
            ModelKind::Generic(_) => "generic",
        }
    }

    /// `log((1+2b)/(1-2b))` for the coin pair: the magnitude of every
    /// per-flip log-likelihood ratio. Infinite when `b = 1/2`.
    pub fn coin_log_step(&self) -> Option<F> {
        match self.kind {
            ModelKind::CoinPair { b } => {
                let two_b = F::lit(2.0) * b;
                Some(((F::one() + two_b) / (F::one() - two_b)).ln())
            }
            _ => None,
        }
    }

    /// Draws one observation from `P0` (typical) or `P1` (atypical).
    pub fn sample<R: Rng + ?Sized>(&self, label: Label, rng: &mut R) -> F {
        match &self.kind {
            ModelKind::GaussianPair { mu } => {
                let mean = if label.is_atypical() { *mu } else { -*mu };
                mean + F::standard_normal(rng)
            }
            ModelKind::CoinPair { b } => {
                let half = F::lit(0.5);
                let p = if label.is_atypical() { half + *b } else { half - *b };
                if rng.random::<f64>() < p.as_f64() {
                    F::one()
                } else {
                    F::zero()
                }
            }
            ModelKind::Generic(t) => {
                let table = if label.is_atypical() { &t.p1 } else { &t.p0 };
                let u = rng.random::<f64>();
                let mut cum = 0.0;
                let mut last = 0;
                for (s, p) in table.iter().enumerate() {
                    let p = p.as_f64();
                    if p > 0.0 {
                        cum += p;
                        last = s;
                        if u < cum {
                            return F::from_usize(s).unwrap();
                        }
                    }
                }
                F::from_usize(last).unwrap()
            }
        }
    }

    /// `log(P1(y) / P0(y))`, possibly infinite for the deterministic coin.
    pub fn log_lr(&self, y: F) -> Result<F> {
        match &self.kind {
            ModelKind::GaussianPair { mu } => Ok(F::lit(2.0) * *mu * y),
            ModelKind::CoinPair { .. } => {
                let step = self.coin_log_step().unwrap();
                match coin_face(y)? {
                    true => Ok(step),
                    false => Ok(-step),
                }
            }
            ModelKind::Generic(t) => Ok(t.llr[t.symbol(y)?]),
        }
    }

    /// `(D(P0||P1), D(P1||P0))` in nats.
    pub fn kl_divergences(&self) -> (F, F) {
        match &self.kind {
            ModelKind::GaussianPair { mu } => {
                let d = F::lit(2.0) * *mu * *mu;
                (d, d)
            }
            ModelKind::CoinPair { b } => {
                let d = F::lit(2.0) * *b * self.coin_log_step().unwrap();
                (d, d)
            }
            ModelKind::Generic(t) => {
                let (mut d01, mut d10) = (F::zero(), F::zero());
                for s in t.active() {
                    d01 = d01 - t.p0[s] * t.llr[s];
                    d10 = d10 + t.p1[s] * t.llr[s];
                }
                (d01, d10)
            }
        }
    }

    /// Per-observation contribution to the round statistic, for models whose
    /// statistic is a plain sum (Gaussian: the sample; coin: the heads
    /// indicator).
    fn additive_statistic(&self, y: F) -> Result<F> {
        match &self.kind {
            ModelKind::GaussianPair { .. } => Ok(y),
            ModelKind::CoinPair { .. } => Ok(if coin_face(y)? { F::one() } else { F::zero() }),
            ModelKind::Generic(_) => unreachable!("generic statistics are count based"),
        }
    }

    /// Sufficient statistic of one round of observations.
    ///
    /// Gaussian: sum of the samples. Coin: number of heads. Finite tables:
    /// summed log-likelihood ratio, formed from symbol counts.
    pub fn round_statistic(&self, ys: &[F]) -> Result<F> {
        match &self.kind {
            ModelKind::Generic(t) => {
                let mut counts = vec![0u64; t.p0.len()];
                for &y in ys {
                    counts[t.symbol(y)?] += 1;
                }
                Ok(t.canonical_sum(&counts))
            }
            _ => ys
                .iter()
                .try_fold(F::zero(), |acc, &y| Ok(acc + self.additive_statistic(y)?)),
        }
    }

    /// Threshold `gamma_k` for a round of `k` samples: the smallest value `c`
    /// with `P0(T_k > c) <= 1/2`.
    ///
    /// Gaussian: the median `-k mu`. Coin: smallest integer with binomial
    /// upper tail at most one half. Finite tables: exact enumeration of the
    /// statistic's law over count vectors.
    pub fn round_threshold(&self, k: u32) -> Result<F> {
        if k == 0 {
            return Err(invalid("k", "round size must be >= 1"));
        }
        match &self.kind {
            ModelKind::GaussianPair { mu } => Ok(-F::from_count(k as u64) * *mu),
            ModelKind::CoinPair { b } => {
                let p0 = 0.5 - b.as_f64();
                let k = k as u64;
                let c = (0..=k as i64)
                    .find(|&c| binomial_sf(k, c, p0) <= 0.5)
                    .expect("P(T > k) = 0");
                Ok(F::from_i64(c).unwrap())
            }
            ModelKind::Generic(t) => Ok(generic_round_law(t, k)?.0),
        }
    }

    /// `P0(T_k > gamma_k)`: the chance a typical population survives round `k`.
    pub fn round_null_survival(&self, k: u32) -> Result<f64> {
        let gamma = self.round_threshold(k)?;
        match &self.kind {
            ModelKind::GaussianPair { .. } => Ok(0.5),
            ModelKind::CoinPair { b } => {
                Ok(binomial_sf(k as u64, gamma.as_f64() as i64, 0.5 - b.as_f64()))
            }
            ModelKind::Generic(t) => Ok(generic_round_law(t, k)?.1),
        }
    }

    /// Overshoot bounds `(C1', C2')` of the log-likelihood ratio past a
    /// stopping boundary.
    ///
    /// Gaussian: `2 mu (mu + exp(-mu^2/2) / int_{-mu}^inf exp(-t^2/2) dt)`
    /// for both. Coin: one full step `log((1+2b)/(1-2b))` for both.
    pub fn overshoot_constants(&self) -> Result<(F, F)> {
        match &self.kind {
            ModelKind::GaussianPair { mu } => {
                let mu = *mu;
                let two = F::lit(2.0);
                let integral = (two * F::PI()).sqrt() * normal_cdf(mu);
                let c = two * mu * (mu + (-mu * mu / two).exp() / integral);
                Ok((c, c))
            }
            ModelKind::CoinPair { .. } => {
                let step = self.coin_log_step().unwrap();
                Ok((step, step))
            }
            ModelKind::Generic(_) => Err(Error::Unsupported {
                what: "overshoot constants",
                model: "generic",
            }),
        }
    }
}

pub(crate) fn coin_face<F: Scalar>(y: F) -> Result<bool> {
    if y == F::one() {
        Ok(true)
    } else if y == F::zero() {
        Ok(false)
    } else {
        Err(Error::InvalidObservation(y.as_f64()))
    }
}

/// Threshold and its upper-tail mass under `P0` for a round of `k` symbols.
fn generic_round_law<F: Scalar>(t: &FiniteTables<F>, k: u32) -> Result<(F, f64)> {
    let active: Vec<usize> = t.active().collect();
    let m = active.len() as u64;
    let k = k as u64;
    // number of count vectors is C(k + m - 1, m - 1)
    let classes = crate::special::ln_choose(k + m - 1, m - 1).exp();
    if classes > MAX_OUTCOME_CLASSES as f64 {
        return Err(Error::Unsupported {
            what: "round thresholds at this round size",
            model: "generic",
        });
    }
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=k).scan(0.0, |acc, i| {
            *acc += (i as f64).ln();
            Some(*acc)
        }))
        .collect();
    let ln_p0: Vec<f64> = t.p0.iter().map(|p| p.as_f64().ln()).collect();

    let mut law: Vec<(F, f64)> = Vec::new();
    let mut counts = vec![0u64; t.p0.len()];
    enumerate_counts(&active, 0, k, &mut counts, &mut |counts| {
        let mut lp = ln_fact[k as usize];
        for &s in &active {
            let c = counts[s];
            lp += c as f64 * ln_p0[s] - ln_fact[c as usize];
        }
        law.push((t.canonical_sum(counts), lp.exp()));
    });
    law.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite statistics"));

    let mut tail: f64 = law.iter().map(|(_, p)| p).sum();
    let mut i = 0;
    while i < law.len() {
        let value = law[i].0;
        while i < law.len() && law[i].0 == value {
            tail -= law[i].1;
            i += 1;
        }
        if tail <= 0.5 {
            return Ok((value, tail.max(0.0)));
        }
    }
    Ok((law.last().unwrap().0, 0.0))
}

fn enumerate_counts(
    active: &[usize],
    pos: usize,
    remaining: u64,
    counts: &mut [u64],
    visit: &mut impl FnMut(&[u64]),
) {
    let s = active[pos];
    if pos + 1 == active.len() {
        counts[s] = remaining;
        visit(counts);
        counts[s] = 0;
        return;
    }
    for c in 0..=remaining {
        counts[s] = c;
        enumerate_counts(active, pos + 1, remaining - c, counts, visit);
    }
    counts[s] = 0;
}
