use fracheat_core::semigroup::{compute_m, log_time_grid, semigroup_value, verify_origin_growth};
use fracheat_core::{admissible_params, make_initial_data, Error, StableKernel};
use proptest::prelude::*;
use statrs::function::gamma::gamma_li;

#[test]
fn heat_semigroup_matches_incomplete_gamma() {
    // For α = 2 and n = 1: w(0, t) = (4t)^{-β/2} π^{-1/2} γ((1-β)/2, R²/(4t)).
    let k = StableKernel::new(2.0, 1).unwrap();
    let beta = 0.4;
    let u0 = make_initial_data(beta, 2.0, 1, 1.0).unwrap();
    for t in [0.01f64, 0.3, 2.0] {
        let want = (4.0 * t).powf(-beta / 2.0) / std::f64::consts::PI.sqrt()
            * gamma_li((1.0 - beta) / 2.0, 1.0 / t);
        let got = semigroup_value(&k, &u0, t, 0.0).unwrap().value;
        assert!((got / want - 1.0).abs() < 1e-6, "t = {t}: {got} vs {want}");
    }
}

#[test]
fn origin_growth_certificate_on_small_times() {
    let k = StableKernel::new(1.5, 1).unwrap();
    let u0 = make_initial_data(0.5, 2.0, 1, 1.0).unwrap();
    let m = compute_m(&k, &u0, &log_time_grid(1e-3, 20)).unwrap();
    let rep = verify_origin_growth(&k, &u0, 0.5, m.m, 0.3, 1.4, &log_time_grid(1e-3, 12)).unwrap();
    assert!(rep.passed);
}

#[test]
fn m_requires_unit_time() {
    let k = StableKernel::new(1.5, 1).unwrap();
    let u0 = make_initial_data(0.5, 2.0, 1, 1.0).unwrap();
    assert!(matches!(
        compute_m(&k, &u0, &[0.5]),
        Err(Error::Parameter(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn admissible_exponents_satisfy_their_constraints(
        n in 1usize..=3,
        q in 1.0f64..3.0,
        alpha in 1.05f64..2.0,
        k_extra in 0.05f64..3.0,
    ) {
        let nf = n as f64;
        // k must exceed q (1 + α / n) for the window to be non-empty.
        let k = q * (1.0 + alpha / nf) + k_extra;
        let (beta, gamma) = admissible_params(n, q, alpha, k).unwrap();
        prop_assert!(beta > (nf + alpha) / k && beta < nf / q);
        prop_assert!(gamma * (k * beta - nf) > 1.0);
        prop_assert!(gamma > 0.0 && gamma * alpha < 1.0);
        let eps = k - (nf * gamma + 1.0) / (beta * gamma);
        prop_assert!(eps > 0.0);
    }

    #[test]
    fn value_is_positive_and_radially_non_increasing(t in 0.01f64..1.0, r in 0.0f64..3.0) {
        let k = StableKernel::new(1.5, 1).unwrap();
        let u0 = make_initial_data(0.5, 2.0, 1, 1.0).unwrap();
        let a = semigroup_value(&k, &u0, t, r).unwrap();
        let b = semigroup_value(&k, &u0, t, r + 0.25).unwrap();
        prop_assert!(b.value > 0.0);
        prop_assert!(b.value <= a.value + a.error + b.error);
    }

    #[test]
    fn larger_data_give_larger_values(t in 0.01f64..1.0, r in 0.0f64..2.0, cap in 1.0f64..50.0) {
        let k = StableKernel::new(1.5, 1).unwrap();
        let u0 = make_initial_data(0.5, 2.0, 1, 1.0).unwrap();
        let lo = semigroup_value(&k, &u0.truncated(cap).unwrap(), t, r).unwrap();
        let hi = semigroup_value(&k, &u0, t, r).unwrap();
        prop_assert!(lo.value <= hi.value + lo.error + hi.error);
    }
}
