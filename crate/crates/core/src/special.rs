//! Special functions: the Gaussian tail, and binomial tails through statrs.

use statrs::distribution::{Beta, Binomial, ContinuousCDF, Discrete, DiscreteCDF};

use crate::Scalar;

const MAX_TERMS: usize = 500;

/// Complementary error function.
///
/// Power series for `|x| < 2`, Lentz continued fraction beyond. Absolute
/// error is below `1e-14` in `f64` over the whole real line; the statrs
/// version is off by about `5e-11` near 1.
pub fn erfc<F: Scalar>(x: F) -> F {
    if x.is_nan() {
        return x;
    }
    let z = x.abs();
    let two = F::lit(2.0);
    let tail = if z < two {
        F::one() - erf_series(z)
    } else {
        erfc_continued_fraction(z)
    };
    if x < F::zero() {
        two - tail
    } else {
        tail
    }
}

fn erf_series<F: Scalar>(z: F) -> F {
    // erf(z) = 2/sqrt(pi) * sum (-1)^n z^(2n+1) / (n! (2n+1))
    let z2 = z * z;
    let mut power = z;
    let mut sum = z;
    for n in 1..MAX_TERMS {
        let nf = F::from_count(n as u64);
        power = -power * z2 / nf;
        let term = power / (F::lit(2.0) * nf + F::one());
        sum = sum + term;
        if term.abs() <= F::epsilon() * sum.abs() {
            break;
        }
    }
    sum * F::FRAC_2_SQRT_PI()
}

fn erfc_continued_fraction<F: Scalar>(z: F) -> F {
    if z > F::lit(27.0) {
        // exp(-z^2) underflows f64 well before this point
        return F::zero();
    }
    // erfc(z) = exp(-z^2) / sqrt(pi) / (z + (1/2)/(z + 1/(z + (3/2)/(z + ...))))
    let tiny = F::min_positive_value().sqrt();
    let mut f = z;
    let mut c = f;
    let mut d = F::zero();
    for n in 1..MAX_TERMS {
        let a = F::from_count(n as u64) * F::lit(0.5);
        d = z + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        d = d.recip();
        c = z + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        let delta = c * d;
        f = f * delta;
        if (delta - F::one()).abs() <= F::epsilon() {
            break;
        }
    }
    (-z * z).exp() / (f * F::PI().sqrt())
}

/// Standard normal upper tail `Q(x) = P(Z > x)`.
pub fn normal_sf<F: Scalar>(x: F) -> F {
    F::lit(0.5) * erfc(x * F::FRAC_1_SQRT_2())
}

/// Standard normal CDF.
pub fn normal_cdf<F: Scalar>(x: F) -> F {
    normal_sf(-x)
}

/// `ln C(n, k)`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    statrs::function::factorial::ln_binomial(n, k)
}

fn binomial(n: u64, p: f64) -> Binomial {
    Binomial::new(p.clamp(0.0, 1.0), n).expect("binomial parameters")
}

/// Binomial probability mass `P(X = k)` for `X ~ Bin(n, p)`.
pub fn binomial_pmf(n: u64, k: u64, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    binomial(n, p).pmf(k)
}

/// `P(X <= k)` for `X ~ Bin(n, p)`.
pub fn binomial_cdf(n: u64, k: u64, p: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    binomial(n, p).cdf(k)
}

/// `P(X > c)` for `X ~ Bin(n, p)`; `c < 0` gives 1.
pub fn binomial_sf(n: u64, c: i64, p: f64) -> f64 {
    if c < 0 {
        return 1.0;
    }
    let c = c as u64;
    if c >= n || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    binomial(n, p).sf(c)
}

/// Exact (Clopper-Pearson) two-sided interval for a binomial proportion at
/// confidence `1 - alpha`, from beta quantiles.
pub fn clopper_pearson(successes: u64, n: u64, alpha: f64) -> (f64, f64) {
    assert!(n > 0 && successes <= n);
    let (k, n) = (successes as f64, n as f64);
    let half = alpha / 2.0;
    let lo = if k == 0.0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0).expect("beta shape").inverse_cdf(half)
    };
    let hi = if k == n {
        1.0
    } else {
        Beta::new(k + 1.0, n - k).expect("beta shape").inverse_cdf(1.0 - half)
    };
    (lo, hi)
}
