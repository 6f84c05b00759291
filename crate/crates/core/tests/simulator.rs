use fracheat_core::blowup::{
    duhamel_residual, simulate, Grid, LatticeSemigroup, Linear, OsgoodReaction, Outcome, PowerLaw,
    Reaction, RunSpec, StepPlan,
};
use fracheat_core::osgood::OsgoodFamily;
use fracheat_core::{
    admissible_params, build_family, make_initial_data, simulate_truncated, StableKernel,
};
use proptest::prelude::*;

/// Classical RK4 on `u' = f(u)` with `f` from the family's own evaluator.
fn rk4(fam: &OsgoodFamily, mut u: f64, t: f64, steps: usize) -> f64 {
    let f = |s: f64| fam.eval_f(s).unwrap();
    let h = t / steps as f64;
    for _ in 0..steps {
        let k1 = f(u);
        let k2 = f(u + 0.5 * h * k1);
        let k3 = f(u + 0.5 * h * k2);
        let k4 = f(u + h * k3);
        u += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
    }
    u
}

fn canonical_family() -> OsgoodFamily {
    build_family(1.5, 3.0, 2.0, 8).unwrap()
}

#[test]
fn constant_datum_follows_the_scalar_ode() {
    let fam = canonical_family();
    let react = OsgoodReaction::new(&fam).unwrap();
    let g = Grid::new(4.0, 64).unwrap();
    for &(c, t) in &[(0.5, 0.4), (1.5, 0.2), (6.0, 0.05), (100.0, 0.01)] {
        let traj = simulate(g, 1.5, vec![c; 64], &react, &RunSpec::uniform(t, 16)).unwrap();
        let u = traj.last();
        let spread = u.iter().fold(0.0f64, |m, v| m.max((v - u[0]).abs()));
        assert!(spread <= 1e-12 * u[0], "not constant: {spread}");
        let want = rk4(&fam, c, t, 2_000_000);
        assert!(
            (u[0] - want).abs() <= 1e-6 * want,
            "{c}: {} vs {want}",
            u[0]
        );
    }
}

fn bump(g: &Grid) -> Vec<f64> {
    (0..g.points)
        .map(|j| {
            let x = g.x(j);
            (-x * x).exp()
        })
        .collect()
}

fn residual_at_end(steps: usize) -> f64 {
    let g = Grid::new(8.0, 1 << 10).unwrap();
    let react = PowerLaw::new(2.0).unwrap();
    let run = RunSpec {
        horizon: 0.2,
        plan: StepPlan::Uniform { steps },
        snapshot_every: 1,
        observe_radius: 1.0,
    };
    let traj = simulate(g, 1.5, bump(&g), &react, &run).unwrap();
    duhamel_residual(&traj, &react).unwrap().last().unwrap().l1
}

#[test]
fn duhamel_residual_converges_at_second_order() {
    // Strang splitting is exactly second order, so the observed order
    // approaches 2 from either side; 0.01 covers the O(h²) drift.
    let coarse = residual_at_end(16);
    let fine = residual_at_end(32);
    let order = (coarse / fine).log2();
    assert!(
        order >= 2.0 - 0.01,
        "observed order {order} ({coarse:e} -> {fine:e})"
    );
    assert!(fine < coarse);
}

#[test]
fn duhamel_residual_of_constant_datum_is_small() {
    let fam = canonical_family();
    let react = OsgoodReaction::new(&fam).unwrap();
    let g = Grid::new(4.0, 64).unwrap();
    let run = RunSpec {
        horizon: 0.2,
        plan: StepPlan::Uniform { steps: 400 },
        snapshot_every: 1,
        observe_radius: 1.0,
    };
    let traj = simulate(g, 1.5, vec![1.5; 64], &react, &run).unwrap();
    let r = duhamel_residual(&traj, &react).unwrap();
    assert!(r.iter().all(|x| x.relative < 1e-6), "{:?}", r.last());
}

#[test]
fn linear_residual_needs_three_snapshots() {
    let g = Grid::new(4.0, 64).unwrap();
    let traj = simulate(g, 1.5, vec![1.0; 64], &Linear, &RunSpec::uniform(0.1, 4)).unwrap();
    assert!(duhamel_residual(&traj, &Linear).is_err());
}

#[test]
fn power_law_contrast_blows_up_sooner_for_larger_caps() {
    let k = StableKernel::new(1.5, 1).unwrap();
    let (beta, _) = admissible_params(1, 1.0, 1.5, 3.0).unwrap();
    let u0 = make_initial_data(beta, 2.0, 1, 1.0).unwrap();
    let react = PowerLaw::new(3.0).unwrap();
    let run = RunSpec {
        horizon: 0.05,
        plan: StepPlan::Geometric {
            steps: 200,
            first: 1e-8,
        },
        snapshot_every: 0,
        observe_radius: 1.0,
    };
    let mut last = f64::INFINITY;
    for cap in [10.0, 100.0, 1000.0] {
        let g = Grid::resolving(&u0, cap, 1 << 12).unwrap();
        let traj = simulate_truncated(&k, &react, &u0, cap, g, &run).unwrap();
        let Outcome::BlowUp { time } = traj.outcome else {
            panic!("{cap}: {:?}", traj.outcome)
        };
        // The ODE from the cap blows up at 1/(2 cap²); diffusion can only delay it.
        assert!(time >= 0.5 / (cap * cap) * (1.0 - 1e-9));
        assert!(time < last);
        last = time;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn floor_mass_growth_and_comparison(lo in 1.0f64..20.0, ratio in 1.0f64..5.0) {
        let fam = canonical_family();
        let react = OsgoodReaction::new(&fam).unwrap();
        let k = StableKernel::new(1.5, 1).unwrap();
        let (beta, _) = admissible_params(1, 1.0, 1.5, 3.0).unwrap();
        let u0 = make_initial_data(beta, 2.0, 1, 1.0).unwrap();
        let hi = lo * ratio;
        let g = Grid::resolving(&u0, hi, 1 << 11).unwrap();
        let run = RunSpec::uniform(0.02, 10);
        let a = simulate_truncated(&k, &react, &u0, lo, g, &run).unwrap();
        let b = simulate_truncated(&k, &react, &u0, hi, g, &run).unwrap();
        let scale = b.final_diagnostic().max_u;
        let tol = 64.0 * f64::EPSILON * scale;
        for (x, y) in a.last().iter().zip(b.last()) {
            prop_assert!(*x <= *y + tol);
        }
        let floor = LatticeSemigroup::new(g, 1.5).unwrap().apply(b.initial(), 0.02);
        for (x, y) in b.last().iter().zip(&floor) {
            prop_assert!(*x >= *y - tol);
        }
        let m0 = b.diagnostics[0].global_mass;
        prop_assert!(b.diagnostics.iter().all(|d| d.global_mass >= m0 * (1.0 - 1e-12)));
        prop_assert!(react.eval(lo) <= react.eval(hi));
    }
}
