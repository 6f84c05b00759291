//! End-to-end acceptance checks, one PASS/FAIL line each.
//!
//! Failing checks are reported but do not fail the run unless
//! `ACCEPTANCE_STRICT=1` is set; errors inside a check always do.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use fracheat_core::blowup::divergence::divergence_series;
use fracheat_core::blowup::{
    duhamel_residual, simulate, Grid, LatticeSemigroup, Linear, OsgoodReaction, Outcome, PowerLaw,
    RunSpec, StepPlan,
};
use fracheat_core::kernel::inversion::inversion_profile;
use fracheat_core::kernel::{verify_kernel_bounds, SampleSpec};
use fracheat_core::osgood::{default_samples, verify_f_properties};
use fracheat_core::semigroup::{
    compute_m, log_time_grid, semigroup_value, verify_origin_growth, verify_prop_lower_bound,
    verify_scaling_inequality, PropSampleSpec,
};
use fracheat_core::{
    admissible_params, build_family, local_mass_divergence, make_initial_data, simulate_truncated,
    CertifiedConstants, ExperimentParams, OsgoodFamily, Result, StableKernel,
};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { passed, detail })
}

fn kernel_closed_forms() -> Result<Verdict> {
    let (mut ep, mut eg) = (0.0f64, 0.0f64);
    for j in 0..=1000 {
        let r = 0.05 * j as f64;
        let poisson = 1.0 / (PI * (1.0 + r * r));
        let gauss = (-r * r / 4.0).exp() / (4.0 * PI).sqrt();
        ep = ep.max((inversion_profile(1.0, 1, r)?.value / poisson - 1.0).abs());
        eg = eg.max((inversion_profile(2.0, 1, r)?.value / gauss - 1.0).abs());
    }
    verdict(
        ep <= 1e-6 && eg <= 1e-6,
        format!("max rel error Poisson {ep:.2e}, Gaussian {eg:.2e} on r in [0, 50]"),
    )
}

fn kernel_mass_and_semigroup() -> Result<Verdict> {
    let triples = [
        (0.3, 0.7, 0.0, 0.5),
        (1.0, 1.0, -1.0, 2.0),
        (0.05, 2.0, 3.0, 0.0),
    ];
    let mut worst_mass = 0.0f64;
    let mut worst_ck = 0.0f64;
    for alpha in [1.0, 1.5] {
        let k = StableKernel::new(alpha, 1)?;
        for t in [0.1, 1.0, 10.0] {
            worst_mass = worst_mass.max((k.numeric_mass(t)?.value - 1.0).abs());
        }
        for &(s, t, x, y) in &triples {
            let lhs = k.chapman_kolmogorov(s, t, x, y)?.value;
            let rhs = k.density(s + t, (x - y).abs());
            worst_ck = worst_ck.max((lhs / rhs - 1.0).abs());
        }
    }
    verdict(
        worst_mass <= 1e-4 && worst_ck <= 1e-4,
        format!("mass error {worst_mass:.2e}, Chapman-Kolmogorov error {worst_ck:.2e}"),
    )
}

fn kernel_bound_constants() -> Result<Verdict> {
    let mut parts = Vec::new();
    let mut ok = true;
    for alpha in [1.0, 1.5] {
        let rep = verify_kernel_bounds(&StableKernel::new(alpha, 1)?, &SampleSpec::default())?;
        let ratio = rep.c4 / rep.c3;
        ok &= rep.c3 > 0.0 && rep.c4.is_finite() && ratio <= 1e3;
        parts.push(format!(
            "alpha {alpha}: c3 {:.5}, c4 {:.5}, c4/c3 {ratio:.3}",
            rep.c3, rep.c4
        ));
    }
    verdict(ok, parts.join("; "))
}

fn log_uniform(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|j| (lo.ln() + (hi / lo).ln() * j as f64 / (count - 1) as f64).exp())
        .collect()
}

fn osgood_family_checks() -> Result<Verdict> {
    let mut ok = true;
    let mut parts = Vec::new();
    for (alpha, k, phi0) in [(1.5, 2.0, 2.0), (1.5, 3.0, 2.0)] {
        let fam = build_family(alpha, k, phi0, 64)?;
        let top = *fam.breakpoints().last().unwrap();
        let mut samples = log_uniform(1e-6, top, 10_000);
        samples.extend(default_samples(&fam, 4));
        let rep = verify_f_properties(&fam, &samples)?;
        let exact = fam.breakpoint_limits()?.iter().all(|(_, l, r)| l == r);
        ok &= rep.passed() && exact;
        let ladder = (0..64).all(|i| {
            let (a, b) = (fam.ln_phi(i).unwrap(), fam.ln_phi(i + 1).unwrap());
            b.is_finite() && (b - k * a).abs() <= 1e-12 * b.abs()
        });
        ok &= ladder;
        parts.push(format!(
            "k {k}: {} samples, checks {}, exact continuity {exact}, ladder to 64 {ladder}",
            rep.samples,
            if rep.passed() { "ok" } else { "violated" }
        ));
    }
    let sums = build_family(1.5, 2.0, 2.0, 64)?.osgood_partial_sums(64)?;
    ok &= sums[63] > 20.0;
    parts.push(format!("64-term partial sum {:.4}", sums[63]));
    verdict(ok, parts.join("; "))
}

fn level_bound_certificate() -> Result<Verdict> {
    let kernel = StableKernel::new(1.5, 1)?;
    let u0 = make_initial_data(0.5, 2.0, 1, 1.0)?;
    let gamma = 0.5;
    let bounds = verify_kernel_bounds(&kernel, &SampleSpec::default())?;
    let (c3, c4) = (bounds.c3, bounds.c4);
    let m = compute_m(&kernel, &u0, &log_time_grid(1e-3, 60))?.m;
    let times = log_time_grid(1e-3, 20);
    let scaling = verify_scaling_inequality(&kernel, &u0, gamma, &times, c3, c4)?;
    let level = verify_prop_lower_bound(
        &kernel,
        &u0,
        gamma,
        2.0,
        m,
        c3,
        c4,
        PropSampleSpec::default(),
    )?;
    let origin = verify_origin_growth(&kernel, &u0, gamma, m, c3, c4, &log_time_grid(1e-3, 60))?;
    verdict(
        scaling.passed && level.passed() && origin.passed,
        format!(
            "M {m:.5}; scaling min ratio {:.3}, level min ratio {:.3} (20x20 below t {:.2e}), \
             intermediate min ratio {:.3}, origin growth min ratio {:.3}",
            scaling.min_slack_ratio,
            level.level.min_slack_ratio,
            level.horizon,
            level.intermediate.min_slack_ratio,
            origin.min_slack_ratio
        ),
    )
}

struct Canonical {
    kernel: StableKernel,
    family: OsgoodFamily,
    u0: fracheat_core::InitialData,
    params: ExperimentParams,
}

fn canonical() -> Result<Canonical> {
    let kernel = StableKernel::new(1.5, 1)?;
    let (beta, gamma) = admissible_params(1, 1.0, 1.5, 3.0)?;
    let u0 = make_initial_data(beta, 2.0, 1, 1.0)?;
    let constants = CertifiedConstants::measure(
        &kernel,
        &u0,
        &SampleSpec::default(),
        &log_time_grid(1e-3, 60),
        2.0,
    )?;
    let params = ExperimentParams::new(1, 1.0, 1.5, 3.0, beta, gamma, constants, 2.0)?;
    let family = build_family(1.5, 3.0, 2.0, 12)?;
    Ok(Canonical {
        kernel,
        family,
        u0,
        params,
    })
}

fn divergence_certificate() -> Result<Verdict> {
    let c = canonical()?;
    let threshold = (0..=c.family.i_max())
        .find(|&i| {
            let l = c.family.ln_phi(i).unwrap();
            l >= c.params.constants.m.ln() && c.params.ln_horizon(l) <= 0.05f64.ln()
        })
        .unwrap();
    let indices: Vec<usize> = (threshold..threshold + 8).collect();
    let series = divergence_series(&c.kernel, &c.family, &c.u0, &c.params, &indices)?;
    let local = local_mass_divergence(&c.kernel, &c.family, &c.params, 0.05, &indices)?;
    let floor = 0.9 * c.params.epsilon;
    let ok = series.increasing
        && series.above_floor
        && series.fitted_slope >= floor
        && local.increasing
        && local.chain_dominates
        && local.fitted_slope >= floor;
    verdict(
        ok,
        format!(
            "rungs {}..={} (threshold {threshold}); functional slope {:.4}, increasing {}, \
             above floor {}; local-mass slope {:.6}, increasing {}, chain dominates {}; \
             0.9 eps = {floor:.6}",
            indices[0],
            indices[indices.len() - 1],
            series.fitted_slope,
            series.increasing,
            series.above_floor,
            local.fitted_slope,
            local.increasing,
            local.chain_dominates
        ),
    )
}

fn rk4<F: Fn(f64) -> f64>(f: F, mut u: f64, t: f64, steps: usize) -> f64 {
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

fn simulator_validation() -> Result<Verdict> {
    let kernel = StableKernel::new(1.5, 1)?;

    // Linear case against the quadrature semigroup at the origin.
    let u0 = make_initial_data(0.5, 2.0, 1, 1.0)?;
    let g = Grid::new(16.0, 1 << 15)?;
    let traj = simulate_truncated(&kernel, &Linear, &u0, 10.0, g, &RunSpec::uniform(0.05, 4))?;
    let want = semigroup_value(&kernel, &u0.truncated(10.0)?, 0.05, 0.0)?.value;
    let linear = (traj.last()[g.points / 2] / want - 1.0).abs();

    // Constant datum against an RK4 oracle on the family's own evaluator.
    let fam = build_family(1.5, 3.0, 2.0, 8)?;
    let react = OsgoodReaction::new(&fam)?;
    let small = Grid::new(4.0, 64)?;
    let mut ode = 0.0f64;
    for &(c, t) in &[(0.5, 0.4), (1.5, 0.2), (6.0, 0.05)] {
        let tr = simulate(small, 1.5, vec![c; 64], &react, &RunSpec::uniform(t, 16))?;
        let want = rk4(|s| fam.eval_f(s).unwrap(), c, t, 2_000_000);
        let spread = tr
            .last()
            .iter()
            .map(|v| (v / want - 1.0).abs())
            .fold(0.0, f64::max);
        ode = ode.max(spread);
    }

    // Residual order under step halving.
    let bump: Vec<f64> = (0..1024)
        .map(|j| {
            let x = -8.0 + 16.0 * j as f64 / 1024.0;
            (-x * x).exp()
        })
        .collect();
    let p2 = PowerLaw::new(2.0)?;
    let residual = |steps: usize| -> Result<f64> {
        let run = RunSpec {
            horizon: 0.2,
            plan: StepPlan::Uniform { steps },
            snapshot_every: 1,
            observe_radius: 1.0,
        };
        let tr = simulate(Grid::new(8.0, 1024)?, 1.5, bump.clone(), &p2, &run)?;
        Ok(duhamel_residual(&tr, &p2)?.last().unwrap().l1)
    };
    let order = (residual(16)? / residual(32)?).log2();

    // Comparison in N on the canonical data.
    let (beta, _) = admissible_params(1, 1.0, 1.5, 3.0)?;
    let sing = make_initial_data(beta, 2.0, 1, 1.0)?;
    let grid = Grid::resolving(&sing, 1000.0, 1 << 12)?;
    let run = RunSpec::uniform(0.02, 40);
    let mut prev: Option<Vec<f64>> = None;
    let mut comparison = true;
    for cap in [10.0, 100.0, 1000.0] {
        let tr = simulate_truncated(&kernel, &react, &sing, cap, grid, &run)?;
        let scale = tr.final_diagnostic().max_u;
        if let Some(p) = &prev {
            comparison &= p
                .iter()
                .zip(tr.last())
                .all(|(a, b)| *a <= *b + 64.0 * f64::EPSILON * scale);
        }
        let floor = LatticeSemigroup::new(grid, 1.5)?.apply(tr.initial(), 0.02);
        comparison &= tr
            .last()
            .iter()
            .zip(&floor)
            .all(|(a, b)| *a >= *b - 64.0 * f64::EPSILON * scale);
        prev = Some(tr.last().to_vec());
    }

    verdict(
        linear <= 1e-3 && ode <= 1e-6 && order >= 2.0 - 0.01 && comparison,
        format!(
            "linear rel error {linear:.2e}; constant-datum ODE rel error {ode:.2e}; \
             residual order {order:.4}; comparison and floor in N {comparison}"
        ),
    )
}

fn truncation_trend() -> Result<Verdict> {
    let kernel = StableKernel::new(1.5, 1)?;
    let (beta, _) = admissible_params(1, 1.0, 1.5, 3.0)?;
    let u0 = make_initial_data(beta, 2.0, 1, 1.0)?;
    let fam = build_family(1.5, 3.0, 2.0, 12)?;
    let react = OsgoodReaction::new(&fam)?;
    let run = RunSpec {
        horizon: 0.05,
        plan: StepPlan::Geometric {
            steps: 300,
            first: 1e-7,
        },
        snapshot_every: 0,
        observe_radius: 1.0,
    };
    let caps = [10.0, 100.0, 1000.0, 1e4];
    let mut mass = Vec::new();
    for &cap in &caps {
        let grid = Grid::resolving(&u0, cap, 1 << 14)?;
        let tr = simulate_truncated(&kernel, &react, &u0, cap, grid, &run)?;
        mass.push(match tr.outcome {
            Outcome::Completed => tr.final_diagnostic().local_mass,
            _ => f64::INFINITY,
        });
    }
    let increasing = mass.windows(2).all(|w| w[1] > w[0]);
    let inc: Vec<f64> = mass.windows(2).map(|w| w[1] - w[0]).collect();
    let last_ratio = inc[2] / inc[1];
    verdict(
        increasing && last_ratio >= 0.1,
        format!(
            "local L1 mass on B_1 at t 0.05: {}; strictly increasing {increasing}; \
             last/previous increment {last_ratio:.3e}",
            mass.iter()
                .map(|m| format!("{m:.6e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

type Criterion = (&'static str, Duration, fn() -> Result<Verdict>);

fn main() {
    let checks: [Criterion; 8] = [
        (
            "kernel closed forms",
            Duration::from_secs(10),
            kernel_closed_forms,
        ),
        (
            "kernel mass and semigroup",
            Duration::from_secs(30),
            kernel_mass_and_semigroup,
        ),
        (
            "kernel bound constants",
            Duration::from_secs(10),
            kernel_bound_constants,
        ),
        (
            "osgood family",
            Duration::from_secs(5),
            osgood_family_checks,
        ),
        (
            "level-bound certificate",
            Duration::from_secs(300),
            level_bound_certificate,
        ),
        (
            "divergence certificate",
            Duration::from_secs(600),
            divergence_certificate,
        ),
        (
            "simulator validation",
            Duration::from_secs(300),
            simulator_validation,
        ),
        (
            "truncation blow-up trend",
            Duration::from_secs(600),
            truncation_trend,
        ),
    ];
    let mut passed = 0;
    let mut errors = 0;
    for (j, (name, budget, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let in_time = took <= *budget;
        match result {
            Ok(o) => {
                let ok = o.passed && in_time;
                passed += ok as usize;
                println!(
                    "{} {}. {name}: {} [{:.1}s of {}s]",
                    if ok { "PASS" } else { "FAIL" },
                    j + 1,
                    o.detail,
                    took.as_secs_f64(),
                    budget.as_secs()
                );
            }
            Err(e) => {
                errors += 1;
                println!(
                    "FAIL {}. {name}: error {e} [{:.1}s]",
                    j + 1,
                    took.as_secs_f64()
                );
            }
        }
    }
    println!("{passed}/{} acceptance checks passed", checks.len());
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if errors > 0 || (strict && passed < checks.len()) {
        std::process::exit(1);
    }
}
