//! The numeric stages behind each command. Every stage appends its checks,
//! tables and report section to a [`Sink`] and hands its constants forward.

use fracheat_core::blowup::divergence::divergence_series;
use fracheat_core::blowup::{
    ball_floor, Grid, LatticeSemigroup, OsgoodReaction, Outcome, PowerLaw, Reaction, RunSpec,
    StepPlan,
};
use fracheat_core::kernel::inversion::{closed_form_profile, inversion_profile};
use fracheat_core::kernel::{log_space, verify_kernel_bounds, BoundReport, SampleSpec};
use fracheat_core::osgood::{default_samples, verify_f_properties};
use fracheat_core::semigroup::{
    apply_semigroup, compute_m, field_mass, log_time_grid, reconvolve_at_origin, semigroup_value,
    verify_origin_growth, verify_prop_lower_bound, verify_scaling_inequality, PropSampleSpec,
    SlackReport,
};
use fracheat_core::{
    build_family, local_mass_divergence, make_initial_data, simulate_truncated, CertifiedConstants,
    ExperimentParams, InitialData, OsgoodFamily, Result, StableKernel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{Config, Exponents, ReactionKind};
use crate::report::{num, num_from_ln, Check, Table};

/// Everything the stages emit, collected in order.
#[derive(Debug, Default)]
pub struct Sink {
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    pub stages: Map<String, Value>,
    pub constants: Map<String, Value>,
}

impl Sink {
    fn check(&mut self, stage: &str, name: &str, passed: bool, slack: f64, detail: String) {
        self.checks
            .push(Check::new(stage, name, passed, slack, detail));
    }

    fn constant(&mut self, name: &str, value: f64) {
        self.constants.insert(name.into(), json!(value));
    }

    fn slack_report(&mut self, stage: &str, r: &SlackReport) {
        self.check(
            stage,
            &r.name,
            r.passed,
            r.min_slack_ratio - 1.0,
            format!(
                "{} samples, min lhs/rhs {} at t = {}, r = {}",
                r.samples.len(),
                r.min_slack_ratio,
                r.worst_t,
                r.worst_r
            ),
        );
    }
}

pub struct KernelOut {
    pub kernel: StableKernel,
    pub c3: f64,
    pub c4: f64,
    pub c_tilde: f64,
}

fn sample_spec(cfg: &Config) -> SampleSpec {
    let k = &cfg.kernel;
    SampleSpec::log_spaced(k.times.clone(), k.r_min, k.r_max, k.radii)
}

fn record_bounds(sink: &mut Sink, b: &BoundReport, c_tilde: f64) {
    for (name, v) in [
        ("c1", b.c1),
        ("c2", b.c2),
        ("c3", b.c3),
        ("c4", b.c4),
        ("c_tilde", c_tilde),
    ] {
        sink.constant(name, v);
    }
}

/// Kernel and constants only, for commands that start downstream.
pub fn kernel_constants(cfg: &Config, sink: &mut Sink) -> Result<KernelOut> {
    let kernel = StableKernel::new(cfg.model.alpha, cfg.model.n)?;
    let bounds = verify_kernel_bounds(&kernel, &sample_spec(cfg))?;
    let c_tilde = ball_floor(&kernel, cfg.blowup.rho)?;
    record_bounds(sink, &bounds, c_tilde);
    Ok(KernelOut {
        c3: bounds.c3,
        c4: bounds.c4,
        kernel,
        c_tilde,
    })
}

pub fn kernel_stage(cfg: &Config, sink: &mut Sink) -> Result<KernelOut> {
    const S: &str = "kernel";
    let (alpha, dim) = (cfg.model.alpha, cfg.model.n);
    let kernel = StableKernel::new(alpha, dim)?;
    let spec = sample_spec(cfg);
    let bounds = verify_kernel_bounds(&kernel, &spec)?;

    let masses = cfg
        .kernel
        .mass_times
        .par_iter()
        .map(|&t| kernel.numeric_mass(t).map(|e| (t, e.value)))
        .collect::<Result<Vec<_>>>()?;
    let worst = masses
        .iter()
        .map(|(_, m)| (m - 1.0).abs())
        .fold(0.0, f64::max);
    sink.check(
        S,
        "normalization",
        worst <= 1e-4,
        1e-4 - worst,
        format!(
            "masses {}",
            masses
                .iter()
                .map(|(t, m)| format!("{m} at t = {t}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );

    let radii: Vec<f64> = match kernel.table() {
        Some(t) => t.nodes().map(|(r, _)| r).collect(),
        None => spec.radii.clone(),
    };
    let mut prev = kernel.profile(0.0);
    let mut drop = f64::INFINITY;
    for &r in &radii {
        let p = kernel.profile(r);
        drop = drop.min((prev - p) / prev);
        prev = p;
    }
    sink.check(
        S,
        "radial-monotonicity",
        drop >= 0.0,
        drop,
        format!(
            "{} tabulated radii, smallest relative decrease {drop:e}",
            radii.len()
        ),
    );

    let grid: Vec<f64> = (0..=1000).map(|j| 0.05 * j as f64).collect();
    let mut worst_closed = 0.0f64;
    for a in [1.0, 2.0] {
        let errs = grid
            .par_iter()
            .map(|&r| {
                let exact = closed_form_profile(a, dim, r).expect("closed form exists");
                Ok((inversion_profile(a, dim, r)?.value / exact - 1.0).abs())
            })
            .collect::<Result<Vec<f64>>>()?;
        worst_closed = errs.into_iter().fold(worst_closed, f64::max);
    }
    sink.check(
        S,
        "closed-form-agreement",
        worst_closed <= 1e-6,
        1e-6 - worst_closed,
        format!("alpha in {{1, 2}}, r in [0, 50]: max relative error {worst_closed:e}"),
    );

    if dim == 1 {
        let triples = [
            (0.3, 0.7, 0.0, 0.5),
            (1.0, 1.0, -1.0, 2.0),
            (0.05, 2.0, 3.0, 0.0),
        ];
        let errs = triples
            .par_iter()
            .map(|&(s, t, x, y)| {
                let lhs = kernel.chapman_kolmogorov(s, t, x, y)?.value;
                Ok((lhs / kernel.density(s + t, (x - y).abs()) - 1.0).abs())
            })
            .collect::<Result<Vec<f64>>>()?;
        let worst = errs.into_iter().fold(0.0, f64::max);
        sink.check(
            S,
            "chapman-kolmogorov",
            worst <= 1e-4,
            1e-4 - worst,
            format!("3 triples, max relative error {worst:e}"),
        );
    } else {
        sink.checks.push(Check::skip(
            S,
            "chapman-kolmogorov",
            "spot check implemented for n = 1",
        ));
    }

    let f = 2f64.powf(dim as f64 + alpha);
    let margins = [
        bounds.c3.ln() - bounds.c1.ln(),
        (bounds.c2 * f).ln() - bounds.c4.ln(),
        bounds.c1.ln() - (bounds.c3 / f).ln(),
        bounds.c4.ln() - bounds.c2.ln(),
    ];
    let slack = margins.into_iter().fold(f64::INFINITY, f64::min);
    sink.check(
        S,
        "envelope-equivalence",
        bounds.envelopes_consistent(),
        slack,
        format!(
            "(c1, c2) and (c3, c4) agree within 2^(n+alpha) = {f}; smallest log margin {slack:e}"
        ),
    );

    let ratio = bounds.c4 / bounds.c3;
    sink.check(
        S,
        "bound-constants",
        bounds.c3 > 0.0 && bounds.c4.is_finite() && ratio <= 1e3,
        1e3f64.ln() - ratio.ln(),
        format!(
            "c3 = {} at (t, r) = ({}, {}), c4 = {} at ({}, {}), c4/c3 = {ratio}; {}",
            bounds.c3,
            bounds.c3_at.t,
            bounds.c3_at.r,
            bounds.c4,
            bounds.c4_at.t,
            bounds.c4_at.r,
            bounds.sample_spec
        ),
    );

    let c_tilde = ball_floor(&kernel, cfg.blowup.rho)?;
    sink.check(
        S,
        "ball-mass-floor",
        c_tilde > 0.0,
        c_tilde,
        format!("inf of the mass of p over B_rho, rho = {}", cfg.blowup.rho),
    );
    record_bounds(sink, &bounds, c_tilde);

    let mut table = Table::new("kernel.csv", &["t", "r", "p", "envelope", "ratio"]);
    for s in &bounds.samples {
        table.push(vec![
            num(s.t),
            num(s.r),
            num(s.p),
            num(s.envelope),
            num(s.ratio()),
        ]);
    }
    sink.tables.push(table);
    sink.stages.insert(
        S.into(),
        json!({
            "bounds": bounds,
            "masses": masses,
            "table_nodes": radii.len(),
            "monotone_repairs": kernel.table().map_or(0, |t| t.monotone_repairs()),
        }),
    );
    Ok(KernelOut {
        c3: bounds.c3,
        c4: bounds.c4,
        kernel,
        c_tilde,
    })
}

pub fn osgood_stage(cfg: &Config, sink: &mut Sink) -> Result<OsgoodFamily> {
    const S: &str = "osgood";
    let (m, o) = (&cfg.model, &cfg.osgood);
    let fam = build_family(m.alpha, m.k, o.phi0, o.i_max)?;
    let top = *fam.breakpoints().last().expect("phi0 is a breakpoint");
    let lo = 1e-6f64.min(0.5 * top);
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let (la, lb) = (lo.ln(), top.ln());
    let mut samples: Vec<f64> = (0..o.samples)
        .map(|_| (la + rng.gen::<f64>() * (lb - la)).exp().min(top))
        .collect();
    samples.extend(default_samples(&fam, 4));
    let rep = verify_f_properties(&fam, &samples)?;
    for c in &rep.checks {
        sink.check(
            S,
            &c.name,
            c.passed,
            c.slack,
            format!(
                "{} samples on [0, {top:e}], worst at s = {}",
                rep.samples, c.worst_at
            ),
        );
    }

    let count = o.i_max.min(64);
    let sums = fam.osgood_partial_sums(count)?;
    let need = 20.0 * count as f64 / 64.0;
    let last = sums[count - 1];
    sink.check(
        S,
        "osgood-partial-sums",
        last > need,
        last - need,
        format!("{count}-term partial sum {last} against {need}"),
    );

    let integral = fam.reciprocal_integral(count, o.trapezoid_nodes)?;
    let dom = integral
        .iter()
        .zip(&sums)
        .map(|(i, s)| (i - s) / s)
        .fold(f64::INFINITY, f64::min);
    sink.check(
        S,
        "reciprocal-integral-dominates",
        dom >= 0.0,
        dom,
        format!(
            "trapezoid integral of 1/f over [1, phi_N] against the plateau sum, N = 1..={count}"
        ),
    );

    let ln_alpha = m.alpha.ln();
    let exact_ok = o.phi0.fract() == 0.0;
    let mut worst = 0.0f64;
    let mut exact_rungs = 0;
    for i in 1..=count {
        let (lp, lq) = (fam.ln_phi(i)?, fam.ln_phi(i - 1)?);
        let got = fam.ln_f_ln(lp - ln_alpha)?;
        let p = fam.phi(i).ok().filter(|p| exact_ok && *p <= 2f64.powi(53));
        let want = match p {
            Some(p) => {
                exact_rungs += 1;
                (p - fam.phi(i - 1)?).ln()
            }
            None => lp + (-(lq - lp).exp()).ln_1p(),
        };
        worst = worst.max((got - want).abs());
    }
    sink.check(
        S,
        "log-space-consistency",
        worst <= 1e-12,
        1e-12 - worst,
        format!(
            "f(phi_i / alpha) against phi_i - phi_(i-1), i = 1..={count} ({exact_rungs} in exact integer arithmetic): max log error {worst:e}"
        ),
    );

    let terms = fam.osgood_terms(count)?;
    let mut table = Table::new(
        "osgood.csv",
        &[
            "i",
            "log_phi_i",
            "term",
            "partial_sum",
            "reciprocal_integral",
        ],
    );
    for i in 1..=count {
        table.push(vec![
            i.to_string(),
            num(fam.ln_phi(i)?),
            num(terms[i - 1]),
            num(sums[i - 1]),
            num(integral[i - 1]),
        ]);
    }
    sink.tables.push(table);
    sink.stages.insert(
        S.into(),
        json!({
            "samples": rep.samples,
            "piece_slopes": rep.slopes.iter().take(count + 1).collect::<Vec<_>>(),
            "partial_sum": last,
        }),
    );
    Ok(fam)
}

pub struct SemigroupOut {
    pub u0: InitialData,
    pub x: Exponents,
    pub m: f64,
}

fn datum(cfg: &Config) -> Result<(InitialData, Exponents)> {
    let x = cfg.exponents().expect("validated exponents");
    let u0 = make_initial_data(x.beta, cfg.semigroup.radius, cfg.model.n, cfg.model.q)?;
    Ok((u0, x))
}

/// Datum and `M` only.
pub fn semigroup_constants(
    cfg: &Config,
    kernel: &StableKernel,
    sink: &mut Sink,
) -> Result<SemigroupOut> {
    let (u0, x) = datum(cfg)?;
    let s = &cfg.semigroup;
    let m = compute_m(kernel, &u0, &log_time_grid(s.t_min, s.t_count))?.m;
    record_exponents(sink, &x, m);
    Ok(SemigroupOut { u0, x, m })
}

fn record_exponents(sink: &mut Sink, x: &Exponents, m: f64) {
    sink.constant("beta", x.beta);
    sink.constant("gamma", x.gamma);
    sink.constant("epsilon", x.epsilon);
    sink.constant("m", m);
}

pub fn semigroup_stage(cfg: &Config, k: &KernelOut, sink: &mut Sink) -> Result<SemigroupOut> {
    const S: &str = "semigroup";
    let kernel = &k.kernel;
    let s = &cfg.semigroup;
    let (u0, x) = datum(cfg)?;
    let grid = log_time_grid(s.t_min, s.t_count);
    let mrep = compute_m(kernel, &u0, &grid)?;
    let m = mrep.m;

    let l1 = u0.l1_norm();
    let masses = s
        .mass_times
        .par_iter()
        .map(|&t| field_mass(kernel, &u0, t).map(|e| (t, e.value)))
        .collect::<Result<Vec<_>>>()?;
    let worst = masses
        .iter()
        .map(|(_, v)| (v / l1 - 1.0).abs())
        .fold(0.0, f64::max);
    sink.check(
        S,
        "mass-preservation",
        worst <= 1e-3,
        1e-3 - worst,
        format!(
            "|u0|_1 = {l1}, max relative drift {worst:e} over t in {:?}",
            s.mass_times
        ),
    );

    let mut radii = vec![0.0];
    radii.extend(log_space(1e-3 * u0.radius, 8.0 * u0.radius, 40));
    let mut rise = 0.0f64;
    for &t in &s.mass_times {
        let field = apply_semigroup(kernel, &u0, t, &radii)?;
        rise = rise.max(field.monotone_violation() / field.values[0]);
    }
    sink.check(
        S,
        "radial-monotonicity",
        rise == 0.0,
        -rise,
        format!(
            "{} radii at each mass time, largest rise beyond error bars {rise:e}",
            radii.len()
        ),
    );

    let cap = 10.0;
    let low = u0.truncated(cap)?;
    let pts: Vec<(f64, f64)> = s
        .mass_times
        .iter()
        .flat_map(|&t| [0.0, 0.5, 1.0, 2.0, 4.0].map(|r| (t, r)))
        .collect();
    let margin = pts
        .par_iter()
        .map(|&(t, r)| {
            let a = semigroup_value(kernel, &low, t, r)?;
            let b = semigroup_value(kernel, &u0, t, r)?;
            Ok((b.value + a.error + b.error - a.value) / b.value)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    sink.check(
        S,
        "comparison-monotonicity",
        margin >= 0.0,
        margin,
        format!("S(t)(u0 ^ {cap}) <= S(t) u0 at {} points", pts.len()),
    );

    let pairs = [(0.05, 0.05), (0.1, 0.4)];
    let errs = pairs
        .par_iter()
        .map(|&(t1, t2)| {
            let re = reconvolve_at_origin(kernel, &u0, t1, t2)?.value;
            let direct = semigroup_value(kernel, &u0, t1 + t2, 0.0)?.value;
            Ok((re / direct - 1.0).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    let worst = errs.into_iter().fold(0.0, f64::max);
    sink.check(
        S,
        "semigroup-property",
        worst <= 1e-3,
        1e-3 - worst,
        format!("w(0, t1 + t2) against re-convolution, (t1, t2) in {pairs:?}: max relative error {worst:e}"),
    );

    let origin = verify_origin_growth(kernel, &u0, x.gamma, m, k.c3, k.c4, &grid)?;
    sink.slack_report(S, &origin);
    record_exponents(sink, &x, m);

    let mut table = Table::new(
        "semigroup.csv",
        &["t", "w_at_r1", "w_at_origin_scaled", "origin_floor"],
    );
    for (j, &t) in mrep.times.iter().enumerate() {
        let o = &origin.samples[j];
        table.push(vec![num(t), num(mrep.values[j]), num(o.lhs), num(o.rhs)]);
    }
    sink.tables.push(table);
    sink.stages.insert(
        S.into(),
        json!({
            "exponents": x,
            "l1_norm": l1,
            "m": m,
            "m_error": mrep.error,
            "m_at": mrep.t_at,
            "masses": masses,
        }),
    );
    Ok(SemigroupOut { u0, x, m })
}

pub fn prop_stage(cfg: &Config, k: &KernelOut, sg: &SemigroupOut, sink: &mut Sink) -> Result<()> {
    const S: &str = "prop23";
    let s = &cfg.semigroup;
    let kernel = &k.kernel;
    let times = log_time_grid(s.t_min, s.level_times);
    let scaling = verify_scaling_inequality(kernel, &sg.u0, sg.x.gamma, &times, k.c3, k.c4)?;
    let spec = PropSampleSpec {
        times: s.level_times,
        radii: s.level_radii,
        decades: s.level_decades,
    };
    let prop = verify_prop_lower_bound(kernel, &sg.u0, sg.x.gamma, s.phi, sg.m, k.c3, k.c4, spec)?;
    sink.slack_report(S, &scaling);
    sink.slack_report(S, &prop.level);
    sink.slack_report(S, &prop.intermediate);

    let mut table = Table::new(
        "prop23.csv",
        &["bound", "t", "r", "lhs", "rhs", "tolerance"],
    );
    for r in [&scaling, &prop.level, &prop.intermediate] {
        for c in &r.samples {
            table.push(vec![
                r.name.clone(),
                num(c.t),
                num(c.r),
                num(c.lhs),
                num(c.rhs),
                num(c.tolerance),
            ]);
        }
    }
    sink.tables.push(table);
    sink.stages.insert(
        S.into(),
        json!({
            "phi": s.phi,
            "horizon": prop.horizon,
            "scaling_min_ratio": scaling.min_slack_ratio,
            "level_min_ratio": prop.level.min_slack_ratio,
            "intermediate_min_ratio": prop.intermediate.min_slack_ratio,
        }),
    );
    Ok(())
}

fn min_step(y: &[f64]) -> f64 {
    y.windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

pub fn blowup_stage(
    cfg: &Config,
    k: &KernelOut,
    fam: &OsgoodFamily,
    sg: &SemigroupOut,
    sink: &mut Sink,
) -> Result<()> {
    const S: &str = "blowup";
    let (m, b) = (&cfg.model, &cfg.blowup);
    let constants = CertifiedConstants {
        c3: k.c3,
        c4: k.c4,
        m: sg.m,
        c_tilde: k.c_tilde,
    };
    let params = ExperimentParams::new(
        m.n, m.q, m.alpha, m.k, sg.x.beta, sg.x.gamma, constants, b.rho,
    )?;
    let ln_t0 = b.t0.ln();
    let threshold = (0..=fam.i_max()).find(|&i| {
        let l = fam.ln_phi(i).unwrap();
        l >= constants.m.ln() && params.ln_horizon(l) <= ln_t0
    });
    let Some(first) = threshold.filter(|i| i + b.rungs <= fam.i_max()) else {
        sink.check(
            S,
            "threshold-index",
            false,
            f64::NAN,
            format!(
                "no ladder index i with phi_i >= M and horizon <= t0 leaves {} rungs below i_max = {}",
                b.rungs,
                fam.i_max()
            ),
        );
        return Ok(());
    };
    sink.check(
        S,
        "threshold-index",
        true,
        ln_t0 - params.ln_horizon(fam.ln_phi(first)?),
        format!("first index {first}: phi_i >= M and horizon <= t0"),
    );
    let indices: Vec<usize> = (first..first + b.rungs).collect();
    let series = divergence_series(&k.kernel, fam, &sg.u0, &params, &indices)?;
    let local = local_mass_divergence(&k.kernel, fam, &params, b.t0, &indices)?;
    let floor = 0.9 * params.epsilon;

    let ln_l: Vec<f64> = series.terms.iter().map(|t| t.ln_value).collect();
    sink.check(
        S,
        "functional-increasing",
        series.increasing,
        min_step(&ln_l),
        format!("log L_i over i = {first}..{}", first + b.rungs - 1),
    );
    let above = series
        .terms
        .iter()
        .map(|t| t.ln_value + (1.0 - t.rel_error).ln() - t.ln_floor)
        .fold(f64::INFINITY, f64::min);
    sink.check(
        S,
        "functional-above-floor",
        series.above_floor,
        above,
        "smallest log margin over the analytic floor".into(),
    );
    sink.check(
        S,
        "functional-growth-rate",
        series.fitted_slope >= floor,
        series.fitted_slope - floor,
        format!(
            "fitted slope {} against 0.9 epsilon = {floor}",
            series.fitted_slope
        ),
    );
    let ln_bound: Vec<f64> = local.terms.iter().map(|t| t.ln_bound).collect();
    sink.check(
        S,
        "local-mass-increasing",
        local.increasing,
        min_step(&ln_bound),
        format!("log local-mass bound on B_rho at t0 = {}", b.t0),
    );
    let chain = local
        .terms
        .iter()
        .map(|t| t.ln_chain - t.ln_bound)
        .fold(f64::INFINITY, f64::min);
    sink.check(
        S,
        "local-mass-chain-dominates",
        local.chain_dominates,
        chain,
        "integral chain against its closed-form bound, smallest log margin".into(),
    );
    sink.check(
        S,
        "local-mass-growth-rate",
        local.fitted_slope >= floor,
        local.fitted_slope - floor,
        format!(
            "fitted slope {} against 0.9 epsilon = {floor}",
            local.fitted_slope
        ),
    );
    let scale = ln_bound.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let tol = 1e-9 * scale;
    sink.check(
        S,
        "power-form-identity",
        local.identity_gap <= tol,
        tol - local.identity_gap,
        format!(
            "bound against c_bar phi_i^epsilon, largest log gap {:e}",
            local.identity_gap
        ),
    );

    let mut table = Table::new(
        "blowup.csv",
        &["i", "log_phi_i", "t_tilde_i", "log_bound", "fitted_slope"],
    );
    for t in &local.terms {
        table.push(vec![
            t.i.to_string(),
            num(t.ln_phi),
            num_from_ln(t.ln_horizon),
            num(t.ln_bound),
            num(local.fitted_slope),
        ]);
    }
    sink.tables.push(table);
    let mut table = Table::new(
        "functional.csv",
        &["i", "log_phi_i", "log_functional", "log_floor", "rel_error"],
    );
    for t in &series.terms {
        table.push(vec![
            t.i.to_string(),
            num(t.ln_phi),
            num(t.ln_value),
            num(t.ln_floor),
            num(t.rel_error),
        ]);
    }
    sink.tables.push(table);
    sink.stages.insert(
        S.into(),
        json!({
            "params": params,
            "threshold": first,
            "functional": series,
            "local_mass": local,
        }),
    );
    Ok(())
}

struct RunSummary {
    cap: f64,
    outcome: Outcome,
    last: fracheat_core::blowup::Diagnostic,
    floor_margin: f64,
    mass_margin: f64,
    points: usize,
    clamped: usize,
}

fn run_one(
    kernel: &StableKernel,
    reaction: &dyn Reaction,
    u0: &InitialData,
    cap: f64,
    cfg: &Config,
    run: &RunSpec,
) -> Result<RunSummary> {
    let grid = Grid::resolving(u0, cap, cfg.blowup.min_points)?;
    let traj = simulate_truncated(kernel, reaction, u0, cap, grid, run)?;
    let last = traj.final_diagnostic();
    let m0 = traj.diagnostics[0].global_mass;
    let mass_margin = traj
        .diagnostics
        .iter()
        .map(|d| (d.global_mass - m0) / m0 + 1e-12)
        .fold(f64::INFINITY, f64::min);
    let floor_margin = if traj.outcome == Outcome::Completed {
        let floor = LatticeSemigroup::new(grid, kernel.alpha())?.apply(traj.initial(), run.horizon);
        let scale = last.max_u;
        traj.last()
            .iter()
            .zip(&floor)
            .map(|(u, f)| (u - f) / scale + 64.0 * f64::EPSILON)
            .fold(f64::INFINITY, f64::min)
    } else {
        f64::INFINITY
    };
    Ok(RunSummary {
        cap,
        outcome: traj.outcome,
        last,
        floor_margin,
        mass_margin,
        points: grid.points,
        clamped: traj.clamped,
    })
}

fn outcome_label(o: &Outcome) -> (&'static str, f64) {
    match *o {
        Outcome::Completed => ("completed", f64::NAN),
        Outcome::BlowUp { time } => ("blow-up", time),
        Outcome::Overflow { time } => ("overflow", time),
    }
}

/// Severity score, increasing when the run is more singular: completed runs
/// by local mass, then runs that left `f64` by how early they did.
fn severity(r: &RunSummary) -> (u8, f64) {
    match r.outcome {
        Outcome::Completed => (0, r.last.local_mass),
        Outcome::BlowUp { time } | Outcome::Overflow { time } => (1, -time),
    }
}

fn strictly_more_severe(runs: &[RunSummary]) -> bool {
    runs.windows(2).all(|w| {
        let (a, b) = (severity(&w[0]), severity(&w[1]));
        a.0 < b.0 || (a.0 == b.0 && b.1 > a.1)
    })
}

pub fn simulate_stage(cfg: &Config, sink: &mut Sink) -> Result<()> {
    const S: &str = "simulate";
    let (m, b) = (&cfg.model, &cfg.blowup);
    let kernel = StableKernel::new(m.alpha, 1)?;
    let (u0, x) = datum(cfg)?;
    let fam = build_family(m.alpha, m.k, cfg.osgood.phi0, cfg.osgood.i_max)?;
    let osgood = OsgoodReaction::new(&fam)?;
    let power = PowerLaw::new(m.k)?;
    let main: &dyn Reaction = match b.reaction {
        ReactionKind::Osgood => &osgood,
        ReactionKind::Power => &power,
    };
    let run = RunSpec {
        horizon: b.t0,
        plan: StepPlan::Geometric {
            steps: b.steps,
            first: b.first_step,
        },
        snapshot_every: 0,
        observe_radius: b.observe_radius,
    };
    let runs = b
        .n_list
        .par_iter()
        .map(|&cap| run_one(&kernel, main, &u0, cap, cfg, &run))
        .collect::<Result<Vec<_>>>()?;

    let floor = runs
        .iter()
        .map(|r| r.floor_margin)
        .fold(f64::INFINITY, f64::min);
    sink.check(
        S,
        "duhamel-floor",
        floor >= 0.0,
        floor,
        "u(t0) >= S(t0)(u0 ^ N) on the grid, margin relative to max u".into(),
    );
    let mass = runs
        .iter()
        .map(|r| r.mass_margin)
        .fold(f64::INFINITY, f64::min);
    sink.check(
        S,
        "mass-growth",
        mass >= 0.0,
        mass,
        "|u(t)|_1 >= |u0 ^ N|_1 at every step, relative margin".into(),
    );

    let local: Vec<f64> = runs
        .iter()
        .map(|r| match r.outcome {
            Outcome::Completed => r.last.local_mass,
            _ => f64::INFINITY,
        })
        .collect();
    let listing = local.iter().map(|v| num(*v)).collect::<Vec<_>>().join(", ");
    let increasing = local.windows(2).all(|w| w[1] > w[0]);
    let step = local
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0])
        .fold(f64::INFINITY, f64::min);
    sink.check(
        S,
        "truncation-monotone",
        increasing,
        step,
        format!(
            "local L1 mass on B_{} at t0 = {}: {listing}",
            b.observe_radius, b.t0
        ),
    );
    if local.len() >= 3 {
        let n = local.len();
        let (d1, d0) = (local[n - 1] - local[n - 2], local[n - 2] - local[n - 3]);
        let ratio = if local[n - 1].is_infinite() {
            f64::INFINITY
        } else {
            d1 / d0
        };
        sink.check(
            S,
            "truncation-non-saturating",
            ratio >= 0.1,
            ratio - 0.1,
            format!("last increment / previous increment = {ratio:e}"),
        );
    } else {
        sink.checks.push(Check::skip(
            S,
            "truncation-non-saturating",
            "needs at least three truncation levels",
        ));
    }

    let mut table = Table::new(
        "simulate.csv",
        &["N", "t", "local_L1_mass", "global_L1_mass", "max_u"],
    );
    for r in &runs {
        table.push(vec![
            num(r.cap),
            num(r.last.t),
            num(r.last.local_mass),
            num(r.last.global_mass),
            num(r.last.max_u),
        ]);
    }
    sink.tables.push(table);
    let describe = |runs: &[RunSummary]| -> Vec<Value> {
        runs.iter()
            .map(|r| {
                let (label, time) = outcome_label(&r.outcome);
                json!({
                    "N": r.cap,
                    "outcome": label,
                    "time": time,
                    "points": r.points,
                    "clamped": r.clamped,
                    "final": r.last,
                })
            })
            .collect()
    };
    let mut section = json!({
        "exponents": x,
        "reaction": main.name(),
        "runs": describe(&runs),
    });

    if b.contrast && b.reaction == ReactionKind::Osgood {
        let contrast = b
            .n_list
            .par_iter()
            .map(|&cap| run_one(&kernel, &power, &u0, cap, cfg, &run))
            .collect::<Result<Vec<_>>>()?;
        let ok = strictly_more_severe(&contrast);
        sink.check(
            S,
            "contrast-trend",
            ok,
            f64::NAN,
            format!(
                "power law u^{}: outcomes {}",
                m.k,
                contrast
                    .iter()
                    .map(|r| {
                        let (label, time) = outcome_label(&r.outcome);
                        match r.outcome {
                            Outcome::Completed => {
                                format!("N = {}: local mass {}", r.cap, num(r.last.local_mass))
                            }
                            _ => format!("N = {}: {label} at t = {}", r.cap, num(time)),
                        }
                    })
                    .collect::<Vec<_>>()
                    .join("; ")
            ),
        );
        let mut table = Table::new(
            "contrast.csv",
            &[
                "N",
                "outcome",
                "time",
                "local_L1_mass",
                "global_L1_mass",
                "max_u",
            ],
        );
        for r in &contrast {
            let (label, time) = outcome_label(&r.outcome);
            table.push(vec![
                num(r.cap),
                label.into(),
                num(time),
                num(r.last.local_mass),
                num(r.last.global_mass),
                num(r.last.max_u),
            ]);
        }
        sink.tables.push(table);
        section["contrast"] = Value::Array(describe(&contrast));
    }
    sink.stages.insert(S.into(), section);
    Ok(())
}
