use std::f64::consts::PI;

use fracheat_core::kernel::inversion::inversion_profile;
use fracheat_core::kernel::{verify_kernel_bounds, SampleSpec};
use fracheat_core::StableKernel;
use proptest::prelude::*;

fn poisson(r: f64) -> f64 {
    1.0 / (PI * (1.0 + r * r))
}

fn gauss(r: f64) -> f64 {
    (-r * r / 4.0).exp() / (4.0 * PI).sqrt()
}

#[test]
fn inversion_reproduces_closed_forms_on_a_grid() {
    for j in 0..=100 {
        let r = 0.5 * j as f64;
        let p = inversion_profile(1.0, 1, r).unwrap().value;
        assert!((p / poisson(r) - 1.0).abs() <= 1e-6, "poisson r = {r}");
        let g = inversion_profile(2.0, 1, r).unwrap().value;
        assert!((g / gauss(r) - 1.0).abs() <= 1e-6, "gauss r = {r}");
    }
}

#[test]
fn poisson_bound_constants_are_explicit() {
    // p (1 + r)^2 = (1 + r)^2 / (π (1 + r^2)) ranges over [1/π, 2/π].
    let k = StableKernel::new(1.0, 1).unwrap();
    let rep = verify_kernel_bounds(&k, &SampleSpec::default()).unwrap();
    assert!(rep.c3 >= 1.0 / PI * (1.0 - 1e-12));
    assert!(rep.c4 <= 2.0 / PI * (1.0 + 1e-12));
    assert!(rep.c4 / rep.c3 < 2.0 + 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn profile_is_positive_and_radially_decreasing(
        alpha in prop::sample::select(vec![1.0, 1.25, 1.5, 1.75, 2.0]),
        r in 0.0f64..40.0,
        dr in 1e-3f64..5.0,
    ) {
        let k = StableKernel::new(alpha, 1).unwrap();
        let a = k.profile(r);
        let b = k.profile(r + dr);
        prop_assert!(b > 0.0 || alpha == 2.0);
        prop_assert!(b <= a * (1.0 + 1e-9));
    }

    #[test]
    fn inside_and_outside_mass_add_to_one(
        alpha in prop::sample::select(vec![1.0, 1.5, 2.0]),
        dim in 1usize..=3,
        r in 1e-3f64..1e3,
    ) {
        let k = StableKernel::new(alpha, dim).unwrap();
        let total = k.radial_mass(r) + k.tail_mass(r);
        prop_assert!((total - 1.0).abs() < 1e-6, "{}", total);
    }

    #[test]
    fn density_is_self_similar(t in 1e-3f64..1e2, r in 0.0f64..10.0) {
        let k = StableKernel::new(1.5, 1).unwrap();
        let want = t.powf(-1.0 / 1.5) * k.profile(r * t.powf(-1.0 / 1.5));
        let got = k.density(t, r);
        prop_assert!((got - want).abs() <= 1e-14 * want);
    }
}
