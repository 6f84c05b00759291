//! Periodic pseudo-spectral simulator for `u_t = -(-Δ)^{α/2} u + f(u)` in one
//! space dimension.
//!
//! The linear part uses the lattice symbol `|2 sin(ω dx/2)/dx|^α`, the
//! fractional power of the periodic second-difference Laplacian. Its heat
//! semigroup is positivity preserving, so together with the exact reaction
//! flow every Strang step is order preserving.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use super::reaction::{Flow, Reaction};
use crate::error::{param, Error, Result};
use crate::kernel::StableKernel;
use crate::semigroup::InitialData;

/// Uniform periodic grid `x_j = -L + j dx`, `dx = 2L / M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub half_width: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(param(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        if points < 8 || !points.is_multiple_of(2) {
            return Err(param(format!(
                "need an even point count >= 8, got {points}"
            )));
        }
        Ok(Self { half_width, points })
    }

    /// Box `[-8R, 8R]` with the smallest power-of-two count, at least
    /// `min_points`, whose spacing resolves the truncation plateau of `u₀ ∧ N`.
    pub fn resolving(u0: &InitialData, cap: f64, min_points: usize) -> Result<Self> {
        let half_width = 8.0 * u0.radius;
        let plateau = u0.truncated(cap)?.cap_radius().unwrap_or(u0.radius);
        let mut points = min_points.max(8).next_power_of_two();
        while 2.0 * half_width / points as f64 > plateau {
            points *= 2;
            if points > 1 << 26 {
                return Err(Error::Resolution(format!(
                    "plateau radius {plateau:e} needs more than 2^26 points"
                )));
            }
        }
        Self::new(half_width, points)
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    /// `Σ u_j dx`.
    pub fn integral(&self, u: &[f64]) -> f64 {
        u.iter().sum::<f64>() * self.dx()
    }

    /// `Σ |u_j| dx`.
    pub fn l1(&self, u: &[f64]) -> f64 {
        u.iter().map(|v| v.abs()).sum::<f64>() * self.dx()
    }

    /// Integral over `[-ρ, ρ]`, counting partially covered cells by overlap.
    pub fn local_integral(&self, u: &[f64], rho: f64) -> f64 {
        let dx = self.dx();
        u.iter()
            .enumerate()
            .map(|(j, v)| {
                let x = self.x(j);
                let overlap = ((x + 0.5 * dx).min(rho) - (x - 0.5 * dx).max(-rho)).max(0.0);
                v * overlap
            })
            .sum()
    }

    /// Cell averages of `u₀ ∧ cap` (untruncated when `cap` is `None`).
    pub fn cell_averages(&self, u0: &InitialData, cap: Option<f64>) -> Result<Vec<f64>> {
        if u0.dim != 1 {
            return Err(Error::Unsupported(format!(
                "simulation is one-dimensional, datum has n = {}",
                u0.dim
            )));
        }
        if u0.radius >= self.half_width {
            return Err(param("datum support must lie inside the box"));
        }
        let d = match cap {
            Some(c) => u0.truncated(c)?,
            None => *u0,
        };
        let b = d.beta;
        let rc = d.cap_radius().unwrap_or(0.0);
        let top = d.cap.unwrap_or(0.0);
        // ∫_0^x (s^{-β} ∧ N) χ_R ds for x ≥ 0.
        let prim = |x: f64| -> f64 {
            let x = x.min(d.radius);
            if x <= rc {
                top * x
            } else {
                top * rc + (x.powf(1.0 - b) - rc.powf(1.0 - b)) / (1.0 - b)
            }
        };
        let signed = |x: f64| if x < 0.0 { -prim(-x) } else { prim(x) };
        let dx = self.dx();
        Ok((0..self.points)
            .map(|j| {
                let x = self.x(j);
                (signed(x + 0.5 * dx) - signed(x - 0.5 * dx)) / dx
            })
            .collect())
    }
}

/// Time-step schedule on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StepPlan {
    Uniform {
        steps: usize,
    },
    /// Steps growing by a constant factor from `first`.
    Geometric {
        steps: usize,
        first: f64,
    },
}

impl StepPlan {
    pub fn steps(&self) -> usize {
        match *self {
            StepPlan::Uniform { steps } | StepPlan::Geometric { steps, .. } => steps,
        }
    }

    /// Step end times; the last equals `horizon` exactly.
    pub fn times(&self, horizon: f64) -> Result<Vec<f64>> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(param(format!("horizon must be positive, got {horizon}")));
        }
        let n = self.steps();
        if n == 0 {
            return Err(param("need at least one step"));
        }
        let mut t = match *self {
            StepPlan::Uniform { .. } => (1..=n).map(|j| horizon * j as f64 / n as f64).collect(),
            StepPlan::Geometric { first, .. } => {
                if !(first > 0.0) || first * n as f64 > horizon {
                    return Err(param(format!(
                        "first step {first:e} incompatible with {n} steps to {horizon}"
                    )));
                }
                let ratio = geometric_ratio(first / horizon, n);
                let mut acc = 0.0;
                let mut h = first;
                (0..n)
                    .map(|_| {
                        acc += h;
                        h *= ratio;
                        acc
                    })
                    .collect::<Vec<_>>()
            }
        };
        *t.last_mut().unwrap() = horizon;
        Ok(t)
    }
}

/// `ρ ≥ 1` with `a (ρ^n - 1)/(ρ - 1) = 1`.
fn geometric_ratio(a: f64, n: usize) -> f64 {
    let total = |r: f64| {
        if r == 1.0 {
            a * n as f64
        } else {
            a * (r.powi(n as i32) - 1.0) / (r - 1.0)
        }
    };
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    while total(hi) < 1.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// What the run controls besides the grid and the datum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunSpec {
    pub horizon: f64,
    pub plan: StepPlan,
    /// Store a snapshot every this many steps (0: initial and final only).
    pub snapshot_every: usize,
    /// Radius of the observation ball for local mass.
    pub observe_radius: f64,
}

impl RunSpec {
    pub fn uniform(horizon: f64, steps: usize) -> Self {
        Self {
            horizon,
            plan: StepPlan::Uniform { steps },
            snapshot_every: 0,
            observe_radius: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Outcome {
    Completed,
    /// A reaction substep left every bounded set; `time` estimates when.
    BlowUp {
        time: f64,
    },
    /// The state exceeded the reaction's ceiling at `time`.
    Overflow {
        time: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostic {
    pub t: f64,
    pub local_mass: f64,
    pub global_mass: f64,
    pub max_u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub grid: Grid,
    pub alpha: f64,
    pub cap: Option<f64>,
    pub reaction: String,
    pub snapshot_times: Vec<f64>,
    #[serde(skip)]
    pub snapshots: Vec<Vec<f64>>,
    pub diagnostics: Vec<Diagnostic>,
    pub outcome: Outcome,
    /// Cells clamped to zero and the most negative value seen before clamping.
    pub clamped: usize,
    pub most_negative: f64,
}

impl Trajectory {
    pub fn overflow(&self) -> bool {
        matches!(self.outcome, Outcome::Overflow { .. })
    }

    pub fn initial(&self) -> &[f64] {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &[f64] {
        self.snapshots.last().unwrap()
    }

    pub fn final_diagnostic(&self) -> Diagnostic {
        *self.diagnostics.last().unwrap()
    }
}

/// Spectral application of the lattice heat semigroup.
pub struct LatticeSemigroup {
    grid: Grid,
    alpha: f64,
    symbol: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl LatticeSemigroup {
    pub fn new(grid: Grid, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(param(format!("alpha must lie in (0, 2], got {alpha}")));
        }
        let m = grid.points;
        let dx = grid.dx();
        let symbol = (0..m)
            .map(|j| {
                let w = std::f64::consts::PI * j as f64 / m as f64;
                (2.0 * w.sin() / dx).abs().powf(alpha)
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            grid,
            alpha,
            symbol,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn transform(&self, u: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = u.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Back to physical space; `spectrum` is consumed as scratch.
    pub fn synthesize(&self, mut spectrum: Vec<Complex<f64>>) -> Vec<f64> {
        self.inverse.process(&mut spectrum);
        let scale = 1.0 / self.grid.points as f64;
        spectrum.iter().map(|c| c.re * scale).collect()
    }

    /// Multiply a spectrum by `exp(-t σ)`.
    pub fn damp(&self, spectrum: &mut [Complex<f64>], t: f64) {
        spectrum
            .par_iter_mut()
            .zip(self.symbol.par_iter())
            .for_each(|(c, s)| *c *= (-t * s).exp());
    }

    pub fn apply(&self, u: &[f64], t: f64) -> Vec<f64> {
        let mut spec = self.transform(u);
        self.damp(&mut spec, t);
        self.synthesize(spec)
    }

    fn apply_in_place(&self, u: &mut [f64], t: f64, buf: &mut Vec<Complex<f64>>) {
        buf.clear();
        buf.extend(u.iter().map(|&v| Complex::new(v, 0.0)));
        self.forward.process(buf);
        let scale = 1.0 / self.grid.points as f64;
        buf.par_iter_mut()
            .zip(self.symbol.par_iter())
            .for_each(|(c, s)| *c *= (-t * s).exp() * scale);
        self.inverse.process(buf);
        u.par_iter_mut()
            .zip(buf.par_iter())
            .for_each(|(v, c)| *v = c.re);
    }
}

fn diagnose(grid: &Grid, u: &[f64], t: f64, rho: f64) -> Diagnostic {
    Diagnostic {
        t,
        local_mass: grid.local_integral(u, rho),
        global_mass: grid.integral(u),
        max_u: u.iter().cloned().fold(0.0, f64::max),
    }
}

/// Flow every cell by `h`; returns the earliest blow-up delay if any.
fn react<R: Reaction + ?Sized>(reaction: &R, u: &mut [f64], h: f64) -> Option<f64> {
    u.par_iter_mut()
        .map(|v| match reaction.flow(*v, h) {
            Flow::Value(w) => {
                *v = w;
                None
            }
            Flow::BlowUp { after } => {
                *v = f64::INFINITY;
                Some(after)
            }
        })
        .reduce(
            || None,
            |a, b| match (a, b) {
                (Some(x), Some(y)) => Some(x.min(y)),
                (x, None) => x,
                (None, y) => y,
            },
        )
}

/// Strang splitting from grid data `initial`.
pub fn simulate<R: Reaction + ?Sized>(
    grid: Grid,
    alpha: f64,
    initial: Vec<f64>,
    reaction: &R,
    run: &RunSpec,
) -> Result<Trajectory> {
    if initial.len() != grid.points {
        return Err(param(format!(
            "datum has {} values for {} grid points",
            initial.len(),
            grid.points
        )));
    }
    if initial.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(param("datum must be finite and non-negative"));
    }
    let times = run.plan.times(run.horizon)?;
    let semigroup = LatticeSemigroup::new(grid, alpha)?;
    let rho = run.observe_radius;
    let ceiling = reaction.ceiling();

    let mut u = initial;
    let mut buf = Vec::with_capacity(grid.points);
    let mut traj = Trajectory {
        grid,
        alpha,
        cap: None,
        reaction: reaction.name().to_string(),
        snapshot_times: vec![0.0],
        snapshots: vec![u.clone()],
        diagnostics: vec![diagnose(&grid, &u, 0.0, rho)],
        outcome: Outcome::Completed,
        clamped: 0,
        most_negative: 0.0,
    };
    let mut t = 0.0;
    for (step, &t_next) in times.iter().enumerate() {
        let h = t_next - t;
        if let Some(after) = react(reaction, &mut u, 0.5 * h) {
            traj.outcome = Outcome::BlowUp { time: t + after };
            break;
        }
        semigroup.apply_in_place(&mut u, h, &mut buf);
        let (count, low) = u
            .par_iter_mut()
            .map(|v| {
                if *v < 0.0 {
                    let was = *v;
                    *v = 0.0;
                    (1usize, was)
                } else {
                    (0, 0.0)
                }
            })
            .reduce(|| (0, 0.0), |a, b| (a.0 + b.0, a.1.min(b.1)));
        traj.clamped += count;
        traj.most_negative = traj.most_negative.min(low);
        if let Some(after) = react(reaction, &mut u, 0.5 * h) {
            traj.outcome = Outcome::BlowUp {
                time: t + 0.5 * h + after,
            };
            break;
        }
        t = t_next;
        let d = diagnose(&grid, &u, t, rho);
        traj.diagnostics.push(d);
        if !(d.max_u <= ceiling) {
            traj.outcome = Outcome::Overflow { time: t };
            traj.snapshot_times.push(t);
            traj.snapshots.push(u.clone());
            break;
        }
        let last = step + 1 == times.len();
        if last || (run.snapshot_every > 0 && (step + 1) % run.snapshot_every == 0) {
            traj.snapshot_times.push(t);
            traj.snapshots.push(u.clone());
        }
    }
    Ok(traj)
}

/// Simulate from the cell averages of `u₀ ∧ cap`.
///
/// Fails with a resolution error when the truncation plateau is narrower
/// than one cell.
pub fn simulate_truncated<R: Reaction + ?Sized>(
    kernel: &StableKernel,
    reaction: &R,
    u0: &InitialData,
    cap: f64,
    grid: Grid,
    run: &RunSpec,
) -> Result<Trajectory> {
    if kernel.dim() != 1 {
        return Err(Error::Unsupported(format!(
            "simulation is one-dimensional, kernel has n = {}",
            kernel.dim()
        )));
    }
    let plateau = u0.truncated(cap)?.cap_radius().unwrap_or(u0.radius);
    if plateau < grid.dx() {
        return Err(Error::Resolution(format!(
            "plateau radius {plateau:e} below grid spacing {:e}",
            grid.dx()
        )));
    }
    let initial = grid.cell_averages(u0, Some(cap))?;
    let mut traj = simulate(grid, kernel.alpha(), initial, reaction, run)?;
    traj.cap = Some(cap);
    Ok(traj)
}

/// Weights of a composite Newton–Cotes rule on `j + 1` equispaced nodes:
/// Simpson, with a closing 3/8 panel when `j` is odd.
fn newton_cotes(j: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; j + 1];
    let simpson_end = if j.is_multiple_of(2) { j } else { j - 3 };
    for a in (0..simpson_end).step_by(2) {
        w[a] += h / 3.0;
        w[a + 1] += 4.0 * h / 3.0;
        w[a + 2] += h / 3.0;
    }
    if j % 2 == 1 {
        let a = simpson_end;
        for (o, c) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
            w[a + o] += 3.0 * h / 8.0 * c;
        }
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    pub t: f64,
    /// `‖u(t) - S(t)u₀ - ∫₀ᵗ S(t-s) f(u(s)) ds‖₁`.
    pub l1: f64,
    /// The same, relative to `‖u(t)‖₁`.
    pub relative: f64,
}

/// Duhamel residual at every stored snapshot from the third on.
///
/// Snapshots must be equispaced in time; the time integral is composite
/// Simpson over them and the semigroup is the simulator's own.
pub fn duhamel_residual<R: Reaction + ?Sized>(
    trajectory: &Trajectory,
    reaction: &R,
) -> Result<Vec<Residual>> {
    let times = &trajectory.snapshot_times;
    if times.len() < 3 {
        return Err(param(format!(
            "need at least 3 snapshots, got {}",
            times.len()
        )));
    }
    if trajectory.overflow() || !matches!(trajectory.outcome, Outcome::Completed) {
        return Err(param("trajectory did not complete"));
    }
    let dt = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt {
            return Err(param("snapshots must be equispaced in time"));
        }
    }
    let grid = trajectory.grid;
    let sg = LatticeSemigroup::new(grid, trajectory.alpha)?;
    let forcing: Vec<Vec<Complex<f64>>> = trajectory
        .snapshots
        .iter()
        .map(|u| {
            let fu: Vec<f64> = u.iter().map(|&v| reaction.eval(v)).collect();
            sg.transform(&fu)
        })
        .collect();
    let u0_hat = sg.transform(trajectory.initial());
    (2..times.len())
        .map(|j| {
            let t = times[j];
            let weights = newton_cotes(j, dt);
            let mut acc = u0_hat.clone();
            sg.damp(&mut acc, t);
            for (l, w) in weights.iter().enumerate() {
                let lag = t - times[l];
                acc.par_iter_mut()
                    .zip(forcing[l].par_iter())
                    .zip(sg.symbol.par_iter())
                    .for_each(|((a, f), s)| *a += f * (w * (-lag * s).exp()));
            }
            let rhs = sg.synthesize(acc);
            let u = &trajectory.snapshots[j];
            let diff: Vec<f64> = u.iter().zip(&rhs).map(|(a, b)| a - b).collect();
            let l1 = grid.l1(&diff);
            Ok(Residual {
                t,
                l1,
                relative: l1 / grid.l1(u),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::reaction::{Linear, OsgoodReaction, PowerLaw};
    use super::*;
    use crate::osgood::build_family;
    use crate::semigroup::{make_initial_data, semigroup_value};

    #[test]
    fn geometric_plan_hits_horizon() {
        let t = StepPlan::Geometric {
            steps: 50,
            first: 1e-6,
        }
        .times(0.05)
        .unwrap();
        assert_eq!(t.len(), 50);
        assert_eq!(*t.last().unwrap(), 0.05);
        assert!((t[0] - 1e-6).abs() < 1e-18);
        let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(h.windows(2).all(|w| w[1] > w[0]));
        assert!((t[48] - t[47]) / (t[47] - t[46]) > 1.0);
    }

    #[test]
    fn cell_averages_conserve_mass() {
        let u0 = make_initial_data(11.0 / 12.0, 2.0, 1, 1.0).unwrap();
        let g = Grid::new(16.0, 1 << 12).unwrap();
        let v = g.cell_averages(&u0, Some(50.0)).unwrap();
        let exact = u0.truncated(50.0).unwrap().l1_norm();
        assert!((g.integral(&v) - exact).abs() < 1e-12 * exact);
        assert_eq!(v[g.points / 2], 50.0);
    }

    #[test]
    fn resolution_rule() {
        let u0 = make_initial_data(11.0 / 12.0, 2.0, 1, 1.0).unwrap();
        let g = Grid::resolving(&u0, 1e4, 1 << 12).unwrap();
        assert_eq!(g.points, 1 << 20);
        let k = StableKernel::new(1.5, 1).unwrap();
        let coarse = Grid::new(16.0, 1 << 14).unwrap();
        let run = RunSpec::uniform(0.01, 2);
        assert!(matches!(
            simulate_truncated(&k, &Linear, &u0, 1e4, coarse, &run),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn linear_case_matches_quadrature_semigroup() {
        let k = StableKernel::new(1.5, 1).unwrap();
        let u0 = make_initial_data(0.5, 2.0, 1, 1.0).unwrap();
        let cap = 10.0;
        let g = Grid::new(16.0, 1 << 15).unwrap();
        let t = 0.05;
        let traj = simulate_truncated(&k, &Linear, &u0, cap, g, &RunSpec::uniform(t, 4)).unwrap();
        let got = traj.last()[g.points / 2];
        let want = semigroup_value(&k, &u0.truncated(cap).unwrap(), t, 0.0)
            .unwrap()
            .value;
        assert!((got - want).abs() < 1e-3 * want, "{got} vs {want}");
    }

    #[test]
    fn linear_residual_is_rounding() {
        let u0 = make_initial_data(0.5, 2.0, 1, 1.0).unwrap();
        let g = Grid::new(16.0, 1 << 10).unwrap();
        let init = g.cell_averages(&u0, Some(20.0)).unwrap();
        let mut run = RunSpec::uniform(0.1, 8);
        run.snapshot_every = 1;
        let traj = simulate(g, 1.5, init, &Linear, &run).unwrap();
        let mass = g.l1(traj.initial());
        for r in duhamel_residual(&traj, &Linear).unwrap() {
            assert!(r.l1 <= 1e-6 * mass, "{r:?}");
        }
    }

    #[test]
    fn comparison_and_floor() {
        let fam = build_family(1.5, 3.0, 2.0, 6).unwrap();
        let react = OsgoodReaction::new(&fam).unwrap();
        let k = StableKernel::new(1.5, 1).unwrap();
        let u0 = make_initial_data(11.0 / 12.0, 2.0, 1, 1.0).unwrap();
        let g = Grid::new(16.0, 1 << 12).unwrap();
        let run = RunSpec::uniform(0.02, 20);
        let lo = simulate_truncated(&k, &react, &u0, 5.0, g, &run).unwrap();
        let hi = simulate_truncated(&k, &react, &u0, 50.0, g, &run).unwrap();
        let scale = hi.final_diagnostic().max_u;
        for (a, b) in lo.last().iter().zip(hi.last()) {
            assert!(*a <= *b + 64.0 * f64::EPSILON * scale);
        }
        let sg = LatticeSemigroup::new(g, 1.5).unwrap();
        let floor = sg.apply(hi.initial(), 0.02);
        for (a, b) in hi.last().iter().zip(&floor) {
            assert!(*a >= *b - 64.0 * f64::EPSILON * scale);
        }
        let m0 = hi.diagnostics[0].global_mass;
        assert!(hi
            .diagnostics
            .iter()
            .all(|d| d.global_mass >= m0 * (1.0 - 1e-12)));
    }

    #[test]
    fn power_law_reports_blow_up() {
        let g = Grid::new(4.0, 64).unwrap();
        let run = RunSpec::uniform(1.0, 10);
        let traj = simulate(g, 1.5, vec![2.0; 64], &PowerLaw::new(3.0).unwrap(), &run).unwrap();
        let Outcome::BlowUp { time } = traj.outcome else {
            panic!("{:?}", traj.outcome)
        };
        assert!((time - 0.125).abs() < 1e-12);
    }
}
