//! Bound formulas against hand-evaluated reference numbers and independent
//! re-derivations.

use popsearch::bounds::{
    coin_bounds, lb_any, lb_any_simplified, lb_nonadaptive, lb_rare_coeff, seq_thresh_params,
    ub_ssprt, BoundsReport, Overshoot,
};
use popsearch::models::PopulationModel;
use popsearch::procedures::GammaLPolicy;
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Six significant digits.
fn assert_sig6(got: f64, want: f64) {
    assert!(rel(got, want) < 5e-7, "got {got}, want {want}");
}

/// Composite Simpson rule on `[a, b]`.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

/// `E[llr | llr > 0]` under `P1 = N(mu, 1)` with `llr = 2 mu y`, by quadrature.
fn gaussian_overshoot_oracle(mu: f64) -> f64 {
    let phi = |y: f64| (-(y - mu).powi(2) / 2.0).exp();
    let hi = mu + 40.0;
    let num = simpson(|y| 2.0 * mu * y * phi(y), 0.0, hi, 400_000);
    let den = simpson(phi, 0.0, hi, 400_000);
    num / den
}

#[test]
fn lb_any_reference_point() {
    // 0.999/0.001 * 0.9801/1.01 * 1 ; log(1/2e-5)/2 * (1 - 0.01)/1.01 ; -1/2
    let find = 999.0 * 0.9801 / 1.01;
    let confirm = (1.0_f64 / 2e-5).ln() / 2.0 * 0.99 / 1.01;
    let oracle = find + confirm - 0.5;
    assert!((find - 969.42).abs() < 1e-2);
    assert!((confirm - 5.30).abs() < 1e-2);
    let got = lb_any(1e-3, 1e-2, 2.0, 2.0).unwrap();
    assert_sig6(got, oracle);
    assert!((got - 974.2).abs() < 0.05);
}

#[test]
fn lb_any_simplified_reference_points() {
    let oracle = 0.5 * (1000.0 / 12.0 + (1.0_f64 / 2e-5).ln() / 3.0 - 1.0);
    let got = lb_any_simplified(1e-3, 1e-2, 2.0).unwrap();
    assert_sig6(got, oracle);
    assert!((got - 42.97).abs() < 5e-3);
    let vac: f64 = lb_any_simplified(0.5, 0.5, 1.0).unwrap();
    assert!((vac - (-0.602)).abs() < 1e-3);
}

#[test]
fn rare_coefficient_reference_point() {
    let got = lb_rare_coeff(1e-2, 8.0).unwrap();
    assert_sig6(got, 0.99 * 0.99 / 1.01);
    assert!((got - 0.9704).abs() < 1e-4);
}

#[test]
fn gaussian_overshoot_constant_matches_quadrature() {
    for mu in [0.3, 0.5, 1.0, 2.0, 3.0] {
        let (c1p, c2p) = PopulationModel::<f64>::gaussian(mu).unwrap().overshoot_constants().unwrap();
        let oracle = gaussian_overshoot_oracle(mu);
        assert!((c1p - oracle).abs() < 1e-10, "mu={mu}: {c1p} vs {oracle}");
        assert_eq!(c1p, c2p);
    }
}

#[test]
fn ub_ssprt_reference_point() {
    let g = PopulationModel::<f64>::gaussian(2.0).unwrap();
    let s = ub_ssprt(1e-3, 1e-2, &g, 0.5, Overshoot::Bounded).unwrap();
    let oracle = (gaussian_overshoot_oracle(2.0) + 2.0_f64.ln()) / (0.5 * 8.0);
    assert_sig6(s.c1, oracle);
    assert!((s.c1 - 2.2285).abs() < 1e-4);
    let bound = oracle / 1e-3 + (1.0_f64 / 1e-5).ln() / 8.0 + gaussian_overshoot_oracle(2.0) / 8.0;
    assert_sig6(s.bound, bound);
}

#[test]
fn large_separation_constant_tends_to_one() {
    let g = PopulationModel::<f64>::gaussian(100.0).unwrap();
    let gamma = GammaLPolicy::Model.gamma_l(&g).unwrap();
    assert_eq!(gamma, 0.01);
    let s = ub_ssprt(1e-3, 1e-2, &g, gamma, Overshoot::Bounded).unwrap();
    assert!((s.c1 - 1.0).abs() < 0.02, "{}", s.c1);
}

#[test]
fn coin_reference_points() {
    let c = coin_bounds(1e-3, 1e-2, 0.25).unwrap();
    assert_sig6(c.c1_refined, 3.0);
    assert_sig6(c.ub, 8.0 * (1000.0 + (1e5_f64).ln() + 1.0));
    assert!((c.ub - 8100.1).abs() < 0.01);
    assert_eq!(coin_bounds(1e-3, 1e-2, 0.5).unwrap().c1_refined, 1.0);
    let det = PopulationModel::<f64>::coin(0.5).unwrap();
    let exact = ub_ssprt(1e-3, 1e-2, &det, 0.0, Overshoot::Exact).unwrap();
    assert_eq!(exact.c1, 1.0);
}

#[test]
fn lb_nonadaptive_reference_point() {
    let oracle = ((1.0_f64 / 2e-5).ln() - 1.0) / (1e-3 * 1.01 * 2.0);
    let got = lb_nonadaptive(1e-3, 1e-2, 2.0).unwrap();
    assert_sig6(got, oracle);
    assert!((got - 4861.3).abs() < 0.05);
    assert!(lb_nonadaptive(0.5, 0.5, 1.0).unwrap() < 0.0);
}

#[test]
fn round_count_reference_points() {
    let p = seq_thresh_params::<f64>(1e-3).unwrap();
    assert_eq!(p.k_max, 20);
    assert!(p.alpha <= (1e-3_f64 / 0.999).powi(2));
    assert!(((1e-3_f64 / 0.999).powi(2) - 1.002e-6).abs() < 1e-9);
    assert_eq!(seq_thresh_params::<f64>(1e-2).unwrap().k_max, 14);
    let half = seq_thresh_params::<f64>(0.5).unwrap();
    assert_eq!((half.k_max, half.clamped), (1, true));
}

fn sandwich_models() -> Vec<PopulationModel<f64>> {
    let mut v: Vec<_> = [0.2, 0.5, 0.9, 1.5, 2.0, 3.0, 10.0]
        .iter()
        .map(|&m| PopulationModel::gaussian(m).unwrap())
        .collect();
    v.extend([0.05, 0.1, 0.25, 0.4, 0.5].iter().map(|&b| PopulationModel::coin(b).unwrap()));
    v
}

#[test]
fn sandwich_on_grid() {
    for m in sandwich_models() {
        let (d01, d10) = m.kl_divergences();
        let gamma = GammaLPolicy::Model.gamma_l(&m).unwrap();
        for pi in [1e-2, 1e-3, 1e-4, 1e-6] {
            for delta in [1e-1, 1e-2, 1e-4] {
                let lo = lb_any(pi, delta, d01, d10).unwrap();
                let hi = ub_ssprt(pi, delta, &m, gamma, Overshoot::Bounded).unwrap().bound;
                assert!(lo <= hi, "{m:?} pi={pi} delta={delta}: {lo} > {hi}");
            }
        }
    }
}

#[test]
fn scaled_bound_approaches_leading_constant() {
    for m in sandwich_models() {
        let gamma = GammaLPolicy::Model.gamma_l(&m).unwrap();
        let s = ub_ssprt(1e-6, 1e-2, &m, gamma, Overshoot::Bounded).unwrap();
        assert!(rel(1e-6 * s.bound, s.c1) < 0.01, "{m:?}");
    }
}

#[test]
fn coin_specialisation_is_weaker() {
    for i in 1..=50 {
        let b = i as f64 / 100.0;
        let m = PopulationModel::coin(b).unwrap();
        let gamma = (1.0 - 2.0 * b) / (1.0 + 2.0 * b);
        for pi in [1e-2, 1e-3, 1e-5] {
            let s = ub_ssprt(pi, 1e-2, &m, gamma, Overshoot::Bounded).unwrap();
            let c = coin_bounds(pi, 1e-2, b).unwrap();
            assert!(s.bound <= c.ub * (1.0 + 1e-12), "b={b} pi={pi}: {} > {}", s.bound, c.ub);
            let exact = ub_ssprt(pi, 1e-2, &m, gamma, Overshoot::Exact).unwrap();
            assert!(rel(exact.c1, c.c1_refined) < 1e-12, "b={b}");
        }
    }
}

#[test]
fn nonadaptive_gap_grows_like_log_inverse_prior() {
    let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&pi| lb_nonadaptive(pi, 1e-2, 2.0).unwrap() / lb_any(pi, 1e-2, 2.0, 2.0).unwrap())
        .collect();
    assert!(ratios[0] < ratios[1] && ratios[1] < ratios[2]);
    // ratio / log(1/pi) stays within a narrow band
    let scaled: Vec<f64> = ratios
        .iter()
        .zip([1e-2_f64, 1e-3, 1e-4])
        .map(|(r, pi)| r / (1.0 / pi).ln())
        .collect();
    for s in &scaled {
        assert!(rel(*s, scaled[2]) < 0.35, "{scaled:?}");
    }
}

#[test]
fn simplified_bound_decreases_in_divergence() {
    for pi in [1e-2, 1e-3, 1e-4] {
        for delta in [1e-1, 1e-2] {
            let vals: Vec<f64> = (1..=40)
                .map(|i| lb_any_simplified(pi, delta, i as f64 * 0.25).unwrap())
                .collect();
            assert!(vals.windows(2).all(|w| w[1] < w[0]));
        }
    }
}

#[test]
fn report_evaluates_every_field() {
    let g = PopulationModel::<f64>::gaussian(2.0).unwrap();
    let r = BoundsReport::evaluate(1e-3, 1e-2, &g, None, Overshoot::Bounded).unwrap();
    assert_eq!(r.gamma_l, Some(0.5));
    assert_eq!((r.d01, r.d10), (8.0, 8.0));
    assert!(r.lb_any <= r.ub_ssprt.unwrap());
    assert!(r.coin_ub.is_none());
    assert!(r.vacuous().is_empty());
    for v in [r.lb_any, r.lb_rare_coeff, r.lb_nonadaptive, r.c1.unwrap(), r.c2.unwrap()] {
        assert!(v.is_finite());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn general_lower_bound_dominates_simplified(
        lp in -6.0_f64..-0.302,
        ld in -8.0_f64..-0.302,
        d in 0.01_f64..50.0,
    ) {
        let (pi, delta) = (10f64.powf(lp), 10f64.powf(ld));
        let full = lb_any(pi, delta, d, d).unwrap();
        let simple = lb_any_simplified(pi, delta, d).unwrap();
        prop_assert!(full >= simple - 1e-9 * full.abs().max(1.0), "{} < {}", full, simple);
    }

    #[test]
    fn sandwich_holds_for_random_gaussians(
        lp in -6.0_f64..-2.0,
        ld in -6.0_f64..-1.0,
        mu in prop_oneof![0.05_f64..0.95, 1.05_f64..8.0],
    ) {
        let (pi, delta) = (10f64.powf(lp), 10f64.powf(ld));
        let m = PopulationModel::gaussian(mu).unwrap();
        let gamma = GammaLPolicy::Model.gamma_l(&m).unwrap();
        let (d01, d10) = m.kl_divergences();
        let lo = lb_any(pi, delta, d01, d10).unwrap();
        let hi = ub_ssprt(pi, delta, &m, gamma, Overshoot::Bounded).unwrap().bound;
        prop_assert!(lo <= hi);
    }

    #[test]
    fn bounds_are_deterministic(lp in -6.0_f64..-0.302, d in 0.1_f64..10.0) {
        let pi = 10f64.powf(lp);
        prop_assert_eq!(
            lb_any(pi, 1e-2, d, 2.0 * d).unwrap().to_bits(),
            lb_any(pi, 1e-2, d, 2.0 * d).unwrap().to_bits()
        );
    }
}
