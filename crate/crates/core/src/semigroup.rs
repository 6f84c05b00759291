//! Linear evolution `w(t) = S_α(t) u₀` of the radial singular datum
//! `u₀ = |x|^{-β} χ_{|x| ≤ R}`, optionally truncated at height `N`, and the
//! lower bounds it satisfies.
//!
//! With `x = t^{1/α} ξ` and `y = t^{1/α} z`,
//!
//! ```text
//! w(x, t) = t^{-β/α} W(ξ; R'),   W(ξ; R') = ∫_{|z| ≤ R'} min(|z|^{-β}, N') P(|ξ - z|) dz
//! ```
//!
//! with `R' = R t^{-1/α}` and `N' = N t^{β/α}`, so every quadrature runs on
//! O(1) quantities whatever the time scale.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::kernel::StableKernel;
use crate::quadrature::{Adaptive, Estimate, GaussLegendre};
use crate::special::{unit_ball_volume, unit_sphere_area};

/// Per-point quadrature settings for the scaled convolution.
const OUTER: Adaptive = Adaptive {
    abs_tol: 0.0,
    rel_tol: 1e-9,
    max_segments: 4000,
};

/// Largest scaled support radius carried explicitly; beyond it the datum's
/// tail is already below double precision.
const R_SCALED_MAX: f64 = 1e300;

/// Outer cutoff of the convolution in units of `max(ξ, 1)`.
const FAR_FACTOR: f64 = 1e8;

/// Ratio of certification slack to propagated quadrature error.
pub const SLACK_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitialData {
    pub beta: f64,
    pub radius: f64,
    pub dim: usize,
    pub q: f64,
    /// `‖u₀‖_{L^q}` of the (possibly truncated) datum.
    pub lq_norm: f64,
    /// Truncation height `N` for `u₀ ∧ N`.
    pub cap: Option<f64>,
}

pub fn make_initial_data(beta: f64, radius: f64, dim: usize, q: f64) -> Result<InitialData> {
    if !(1..=3).contains(&dim) {
        return Err(param(format!("dimension must be 1, 2 or 3, got {dim}")));
    }
    let n = dim as f64;
    if !(beta > 0.0 && beta < n) {
        return Err(param(format!("beta must lie in (0, {n}), got {beta}")));
    }
    if !(radius > 1.0) || !radius.is_finite() {
        return Err(param(format!("support radius must exceed 1, got {radius}")));
    }
    if !(q >= 1.0) || !q.is_finite() {
        return Err(param(format!("q must be at least 1, got {q}")));
    }
    if beta * q >= n {
        return Err(Error::Admissibility(format!(
            "datum is not in L^q: beta * q = {} >= n = {n}",
            beta * q
        )));
    }
    let mut d = InitialData {
        beta,
        radius,
        dim,
        q,
        lq_norm: 0.0,
        cap: None,
    };
    d.lq_norm = d.lp_norm(q);
    Ok(d)
}

impl InitialData {
    /// `u₀ ∧ cap`.
    pub fn truncated(&self, cap: f64) -> Result<Self> {
        if !(cap > 0.0) || !cap.is_finite() {
            return Err(param(format!(
                "truncation level must be positive, got {cap}"
            )));
        }
        let mut d = *self;
        d.cap = Some(cap);
        d.lq_norm = d.lp_norm(d.q);
        Ok(d)
    }

    /// Value at radius `r` (`+∞` at the origin when untruncated).
    pub fn value(&self, r: f64) -> f64 {
        let r = r.abs();
        if r > self.radius {
            return 0.0;
        }
        let v = r.powf(-self.beta);
        match self.cap {
            Some(c) => v.min(c),
            None => v,
        }
    }

    /// Radius inside which the truncation is active.
    pub fn cap_radius(&self) -> Option<f64> {
        self.cap.map(|c| c.powf(-1.0 / self.beta).min(self.radius))
    }

    /// `‖u₀‖_{L^p}` in closed form.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let n = self.dim as f64;
        let area = unit_sphere_area(self.dim);
        let e = n - self.beta * p;
        let rc = self.cap_radius().unwrap_or(0.0);
        let core = match self.cap {
            Some(c) => unit_ball_volume(self.dim) * rc.powf(n) * c.powf(p),
            None => 0.0,
        };
        (core + area * (self.radius.powf(e) - rc.powf(e)) / e).powf(1.0 / p)
    }

    pub fn l1_norm(&self) -> f64 {
        self.lp_norm(1.0)
    }
}

/// `w(·, t)` sampled at increasing radii.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialField {
    pub t: f64,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Error bound at each radius (quadrature plus profile accuracy).
    pub errors: Vec<f64>,
    /// Largest entry of `errors`.
    pub quad_error: f64,
}

impl RadialField {
    /// Largest increase `w(r_{j+1}) - w(r_j)` beyond the combined error bars
    /// (zero when the field is non-increasing within tolerance).
    pub fn monotone_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 1..self.values.len() {
            let rise = self.values[j] - self.values[j - 1] - self.errors[j] - self.errors[j - 1];
            worst = worst.max(rise);
        }
        worst
    }
}

fn check_pair(kernel: &StableKernel, u0: &InitialData) -> Result<()> {
    if kernel.dim() != u0.dim {
        return Err(param(format!(
            "kernel dimension {} does not match datum dimension {}",
            kernel.dim(),
            u0.dim
        )));
    }
    Ok(())
}

thread_local! {
    static ANGULAR_RULE: GaussLegendre = GaussLegendre::new(32);
}

fn panels<F: Fn(f64) -> f64>(f: F, pts: &[f64]) -> f64 {
    ANGULAR_RULE.with(|gl| {
        pts.windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| gl.integrate(&f, w[0], w[1]))
            .sum()
    })
}

/// Spherical integral `∫_{S^{n-1}} P(|ξ e₁ - z ω|) dω` of the unit-time profile,
/// by fixed 32-point Gauss panels graded toward the peak.
fn angular_profile(kernel: &StableKernel, xi: f64, z: f64) -> f64 {
    angular_profile_offset(kernel, xi, z, z - xi)
}

/// [`angular_profile`] with the offset `d = z - ξ` supplied exactly.
fn angular_profile_offset(kernel: &StableKernel, xi: f64, z: f64, d: f64) -> f64 {
    use std::f64::consts::PI;
    match kernel.dim() {
        1 => kernel.profile(d.abs()) + kernel.profile(xi + z),
        2 => {
            if xi == 0.0 || z == 0.0 {
                return 2.0 * PI * kernel.profile(xi + z);
            }
            let diff = d * d;
            let g = |theta: f64| {
                let s = (0.5 * theta).sin();
                kernel.profile((diff + 4.0 * xi * z * s * s).sqrt())
            };
            // The integrand peaks at θ = 0 with width ~ 1/sqrt(ξ z).
            let knee = (2.0 / (xi * z).sqrt()).min(PI);
            2.0 * panels(g, &[0.0, 0.25 * knee, knee, PI.min(4.0 * knee), PI])
        }
        _ => {
            // 2π/(ξ z) ∫_{|ξ-z|}^{ξ+z} σ P(σ) dσ
            let prod = xi * z;
            if prod == 0.0 {
                return 4.0 * PI * kernel.profile(xi + z);
            }
            // σ = |ξ - z| + τ with τ ∈ [0, 2 min(ξ, z)], exact even when ξ ≫ z.
            let lo = d.abs();
            let g = |tau: f64| {
                let sigma = lo + tau;
                sigma * kernel.profile(sigma)
            };
            let span = 2.0 * xi.min(z);
            let mut pts = vec![0.0];
            let mut width = 1.0;
            while width < span && pts.len() < 10 {
                pts.push(width);
                width *= 4.0;
            }
            pts.push(span);
            2.0 * PI * panels(g, &pts) / prod
        }
    }
}

/// Scaled convolution `W(ξ; R')` at `ln t`, so that
/// `w(t^{1/α} ξ, t) = t^{-β/α} W`.
pub fn scaled_convolution(
    kernel: &StableKernel,
    u0: &InitialData,
    ln_t: f64,
    xi: f64,
) -> Result<Estimate> {
    check_pair(kernel, u0)?;
    if !(xi >= 0.0) || !xi.is_finite() || !ln_t.is_finite() {
        return Err(param(format!(
            "bad scaled point (xi = {xi}, ln t = {ln_t})"
        )));
    }
    let alpha = kernel.alpha();
    let beta = u0.beta;
    let n = u0.dim as f64;
    let r_s = (u0.radius.ln() - ln_t / alpha).exp().min(R_SCALED_MAX);
    let cap_s = u0.cap.map(|c| (c.ln() + beta * ln_t / alpha).exp());
    // Scaled radius below which the truncation is active.
    let z_cap = cap_s.map(|c| c.powf(-1.0 / beta)).unwrap_or(0.0);
    let density = |z: f64| match cap_s {
        Some(c) if z <= z_cap => c,
        _ => z.powf(-beta),
    };

    // Inner piece [0, a]: z = a u^m removes the |z|^{-β} z^{n-1} singularity.
    let a = r_s.min(1.0);
    let m = 2.0 / (1.0 - beta / n);
    let inner = |u: f64| {
        let z = a * u.powf(m);
        if z == 0.0 {
            return 0.0;
        }
        density(z) * z.powf(n - 1.0) * angular_profile(kernel, xi, z) * a * m * u.powf(m - 1.0)
    };
    let mut pts = vec![0.0];
    for z in [z_cap, xi] {
        if z > 0.0 && z < a {
            pts.push((z / a).powf(1.0 / m));
        }
    }
    pts.push(1.0);
    pts.sort_by(f64::total_cmp);
    let (mut total, _) = OUTER.run(&inner, &pts);

    // Outer piece [a, R'] in the log variable, except for a window around
    // z = ξ where the kernel peak is too narrow for ln z once ξ is large.
    if r_s > a {
        let (w_lo, w_hi) = if xi > 8.0 {
            ((0.5 * xi).max(a), (1.5 * xi).min(r_s))
        } else {
            (r_s, r_s)
        };
        if w_hi > w_lo {
            // Offset variable y = z - ξ keeps the peak resolved in absolute terms.
            let window = |y: f64| {
                let z = xi + y;
                density(z) * z.powf(n - 1.0) * angular_profile_offset(kernel, xi, z, y)
            };
            let (y_lo, y_hi) = (w_lo - xi, w_hi - xi);
            let mut pts = vec![y_lo, y_hi, 0.0, z_cap - xi];
            let mut d = 1.0;
            while d < 0.5 * xi {
                pts.extend([-d, d]);
                d *= 2.0;
            }
            pts.retain(|&y| y >= y_lo && y <= y_hi);
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            total += OUTER.run(&window, &pts).0;
        }
        let outer = |v: f64| {
            let z = v.exp();
            if z > w_lo && z < w_hi {
                return 0.0;
            }
            density(z) * z.powf(n) * angular_profile(kernel, xi, z)
        };
        // Beyond `far` the integrand is below z^{-1-β-α}; its integral is
        // booked as error only, which keeps the value a lower bound.
        let far = r_s.min(FAR_FACTOR * xi.max(1.0));
        if far < r_s {
            total.error +=
                far.powf(n) * density(far) * angular_profile(kernel, xi, far) / (beta + alpha);
        }
        let (lo, hi) = (a.ln(), far.ln());
        let mut pts = vec![lo, hi];
        for z in [z_cap, xi, xi - 2.0, xi + 2.0, 2.0 * xi, w_lo, w_hi] {
            if z > a && z < far {
                pts.push(z.ln());
            }
        }
        // Extra panels for very long ranges.
        let span = hi - lo;
        if span > 8.0 {
            let k = (span / 8.0).ceil() as usize;
            pts.extend((1..k).map(|j| lo + span * j as f64 / k as f64));
        }
        pts.sort_by(f64::total_cmp);
        total += OUTER.run(&outer, &pts).0;
    }
    // Pieces are judged against the whole, not one by one.
    if !(total.error <= 10.0 * OUTER.rel_tol * total.value.abs()) {
        return Err(Error::Accuracy {
            what: "scaled convolution".into(),
            achieved: total.error / total.value.abs(),
            requested: OUTER.rel_tol,
        });
    }
    total.error += kernel.profile_tolerance() * total.value.abs();
    Ok(total)
}

/// `w(r, t)` for `t = exp(ln_t)`; usable far below the smallest positive `f64` time.
pub fn semigroup_value_ln_time(
    kernel: &StableKernel,
    u0: &InitialData,
    ln_t: f64,
    r: f64,
) -> Result<Estimate> {
    if !(r >= 0.0) {
        return Err(param(format!("radius must be non-negative, got {r}")));
    }
    let alpha = kernel.alpha();
    let xi = r * (-ln_t / alpha).exp();
    if !xi.is_finite() {
        return Err(Error::Overflow {
            ln_value: r.ln() - ln_t / alpha,
        });
    }
    let w = scaled_convolution(kernel, u0, ln_t, xi)?;
    Ok(w * (-u0.beta * ln_t / alpha).exp())
}

/// `w(r, t) = (S_α(t) u₀)(r)`.
pub fn semigroup_value(
    kernel: &StableKernel,
    u0: &InitialData,
    t: f64,
    r: f64,
) -> Result<Estimate> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(param(format!("time must be positive, got {t}")));
    }
    semigroup_value_ln_time(kernel, u0, t.ln(), r)
}

pub fn apply_semigroup(
    kernel: &StableKernel,
    u0: &InitialData,
    t: f64,
    radii: &[f64],
) -> Result<RadialField> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(param(format!("time must be positive, got {t}")));
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(param("radii must be strictly increasing"));
    }
    let est: Vec<Estimate> = radii
        .par_iter()
        .map(|&r| semigroup_value(kernel, u0, t, r))
        .collect::<Result<_>>()?;
    let values: Vec<f64> = est.iter().map(|e| e.value).collect();
    let errors: Vec<f64> = est.iter().map(|e| e.error).collect();
    let quad_error = errors.iter().copied().fold(0.0, f64::max);
    Ok(RadialField {
        t,
        radii: radii.to_vec(),
        values,
        errors,
        quad_error,
    })
}

/// `n ω_n ∫_0^∞ r^{n-1} g(r) dr`: linear panel up to the smallest scale,
/// then the log variable with breaks at every scale and 60 e-folds past the largest.
fn radial_integral<F: Fn(f64) -> f64 + Sync>(
    dim: usize,
    g: F,
    scales: &[f64],
    rule: Adaptive,
) -> Result<Estimate> {
    let n = dim as f64;
    let mut s: Vec<f64> = scales.iter().copied().filter(|v| *v > 0.0).collect();
    s.sort_by(f64::total_cmp);
    let b0 = s[0];
    let head = rule.integrate(|r: f64| r.powf(n - 1.0) * g(r), 0.0, b0)?;
    let mut pts: Vec<f64> = s.iter().map(|v| v.ln()).collect();
    let top = pts[pts.len() - 1] + 60.0;
    let mut v = pts[0] + 4.0;
    while v < top {
        pts.push(v);
        v += 4.0;
    }
    pts.push(top);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let tail = rule.integrate_breaks(
        |v: f64| {
            let r = v.exp();
            r.powf(n) * g(r)
        },
        &pts,
    )?;
    Ok((head + tail) * unit_sphere_area(dim))
}

/// `∫ w(x, t) dx` from the computed field.
pub fn field_mass(kernel: &StableKernel, u0: &InitialData, t: f64) -> Result<Estimate> {
    if !(t > 0.0) {
        return Err(param(format!("time must be positive, got {t}")));
    }
    check_pair(kernel, u0)?;
    let alpha = kernel.alpha();
    let n = u0.dim as f64;
    let ln_t = t.ln();
    let r_s = u0.radius * t.powf(-1.0 / alpha);
    let rule = Adaptive::new(1e-10, 1e-8);
    // Errors inside the integrand are folded in through a relative bound.
    let w = |xi: f64| {
        scaled_convolution(kernel, u0, ln_t, xi)
            .map(|e| e.value)
            .unwrap_or(f64::NAN)
    };
    let scales = [r_s.min(1.0), 1.0, r_s, r_s + 10.0];
    let mut est = radial_integral(u0.dim, w, &scales, rule)?;
    if !est.value.is_finite() {
        return Err(Error::Accuracy {
            what: "field mass quadrature".into(),
            achieved: f64::NAN,
            requested: rule.rel_tol,
        });
    }
    est.error += kernel.profile_tolerance() * est.value;
    Ok(est * t.powf((n - u0.beta) / alpha))
}

/// `∫ p(t₂, |y|) w(|y|, t₁) dy`, which equals `w(0, t₁ + t₂)`.
pub fn reconvolve_at_origin(
    kernel: &StableKernel,
    u0: &InitialData,
    t1: f64,
    t2: f64,
) -> Result<Estimate> {
    if !(t1 > 0.0 && t2 > 0.0) {
        return Err(param("times must be positive"));
    }
    let rule = Adaptive::new(1e-12, 1e-9);
    let g = |rho: f64| {
        let w = semigroup_value(kernel, u0, t1, rho)
            .map(|e| e.value)
            .unwrap_or(f64::NAN);
        kernel.density(t2, rho) * w
    };
    let alpha = kernel.alpha();
    let (s1, s2) = (t1.powf(1.0 / alpha), t2.powf(1.0 / alpha));
    let scales = [s1.min(s2).min(u0.radius), s1, s2, u0.radius];
    let est = radial_integral(u0.dim, g, &scales, rule)?;
    if !est.value.is_finite() {
        return Err(Error::Accuracy {
            what: "re-convolution quadrature".into(),
            achieved: f64::NAN,
            requested: rule.rel_tol,
        });
    }
    Ok(est)
}

/// `count` log-spaced times on `[t_min, 1]`.
pub fn log_time_grid(t_min: f64, count: usize) -> Vec<f64> {
    crate::kernel::log_space(t_min, 1.0, count)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MReport {
    /// `min_t w(1, t)` over the grid.
    pub m: f64,
    /// Error bound on `m`.
    pub error: f64,
    pub t_at: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// `M = min_{t ∈ grid} w(1, t)`; the sphere minimum reduces to `r = 1` by symmetry.
pub fn compute_m(kernel: &StableKernel, u0: &InitialData, t_grid: &[f64]) -> Result<MReport> {
    if t_grid.is_empty() {
        return Err(param("empty time grid"));
    }
    if t_grid.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return Err(param("time grid must lie in (0, 1]"));
    }
    if !t_grid.contains(&1.0) {
        return Err(param("time grid must include t = 1"));
    }
    let est: Vec<Estimate> = t_grid
        .par_iter()
        .map(|&t| semigroup_value(kernel, u0, t, 1.0))
        .collect::<Result<_>>()?;
    let (j, e) = est
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value))
        .unwrap();
    if !(e.value > 0.0) {
        return Err(Error::Certification {
            check: "m-positive".into(),
            detail: format!("w(1, {}) = {}", t_grid[j], e.value),
        });
    }
    Ok(MReport {
        m: e.value,
        error: e.error,
        t_at: t_grid[j],
        times: t_grid.to_vec(),
        values: est.iter().map(|e| e.value).collect(),
    })
}

/// One sampled comparison `lhs ≥ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub t: f64,
    pub r: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Allowed numerical shortfall: `SLACK_FACTOR` times the propagated error.
    pub tolerance: f64,
}

impl Comparison {
    pub fn holds(&self) -> bool {
        self.lhs + self.tolerance >= self.rhs
    }

    pub fn ratio(&self) -> f64 {
        self.lhs / self.rhs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlackReport {
    pub name: String,
    pub passed: bool,
    pub min_slack_ratio: f64,
    pub worst_t: f64,
    pub worst_r: f64,
    pub samples: Vec<Comparison>,
}

impl SlackReport {
    fn from_samples(name: &str, samples: Vec<Comparison>) -> Self {
        let worst = samples
            .iter()
            .min_by(|a, b| a.ratio().total_cmp(&b.ratio()))
            .cloned();
        let (ratio, t, r) = worst.map_or((f64::INFINITY, f64::NAN, f64::NAN), |c| {
            (c.ratio(), c.t, c.r)
        });
        Self {
            name: name.into(),
            passed: samples.iter().all(Comparison::holds),
            min_slack_ratio: ratio,
            worst_t: t,
            worst_r: r,
            samples,
        }
    }

    pub fn into_result(self) -> Result<Self> {
        if let Some(c) = self.samples.iter().find(|c| !c.holds()) {
            return Err(Error::Certification {
                check: self.name.clone(),
                detail: format!(
                    "at t = {}, r = {}: {} < {} (tolerance {})",
                    c.t, c.r, c.lhs, c.rhs, c.tolerance
                ),
            });
        }
        Ok(self)
    }
}

fn check_gamma(alpha: f64, gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma * alpha < 1.0) {
        return Err(param(format!(
            "gamma must lie in (0, 1/alpha), got {gamma}"
        )));
    }
    Ok(())
}

fn check_constants(c3: f64, c4: f64) -> Result<()> {
    if !(c3 > 0.0 && c4 >= c3 && c4.is_finite()) {
        return Err(param(format!(
            "need 0 < c3 <= c4 < inf, got c3 = {c3}, c4 = {c4}"
        )));
    }
    Ok(())
}

/// `w(t^γ, t) ≥ (c₃/c₄) t^{-βγ} w(1, t^{α/(1-αγ)})` at each sampled `t ∈ (0, 1]`.
pub fn verify_scaling_inequality(
    kernel: &StableKernel,
    u0: &InitialData,
    gamma: f64,
    t_samples: &[f64],
    c3: f64,
    c4: f64,
) -> Result<SlackReport> {
    let alpha = kernel.alpha();
    check_gamma(alpha, gamma)?;
    check_constants(c3, c4)?;
    if t_samples.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return Err(param("scaling samples must lie in (0, 1]"));
    }
    let beta = u0.beta;
    let exponent = alpha / (1.0 - alpha * gamma);
    let samples = t_samples
        .par_iter()
        .map(|&t| {
            let r = t.powf(gamma);
            let lhs = semigroup_value(kernel, u0, t, r)?;
            let inner = semigroup_value_ln_time(kernel, u0, exponent * t.ln(), 1.0)?;
            let factor = c3 / c4 * t.powf(-beta * gamma);
            let rhs = inner * factor;
            Ok(Comparison {
                t,
                r,
                lhs: lhs.value,
                rhs: rhs.value,
                tolerance: SLACK_FACTOR * (lhs.error + rhs.error),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SlackReport::from_samples("scaling-inequality", samples))
}

/// Layout of the `(x, t)` sample for the lower-bound certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropSampleSpec {
    pub times: usize,
    pub radii: usize,
    /// Sampled times span `[horizon · 10^{-decades}, horizon]`.
    pub decades: f64,
}

impl Default for PropSampleSpec {
    fn default() -> Self {
        Self {
            times: 20,
            radii: 20,
            decades: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropBoundReport {
    pub phi: f64,
    /// `(c₄ φ / (c₃ M))^{-1/(βγ)}`.
    pub horizon: f64,
    /// `w ≥ φ` on `|x| ≤ t^γ`.
    pub level: SlackReport,
    /// `w ≥ (c₃/c₄) M t^{-βγ}` on `|x| ≤ t^γ`.
    pub intermediate: SlackReport,
}

impl PropBoundReport {
    pub fn passed(&self) -> bool {
        self.level.passed && self.intermediate.passed
    }
}

/// `(c₄ φ / (c₃ M))^{-1/(βγ)}`.
pub fn level_horizon(phi: f64, m: f64, c3: f64, c4: f64, beta: f64, gamma: f64) -> f64 {
    (c4 * phi / (c3 * m)).powf(-1.0 / (beta * gamma))
}

#[allow(clippy::too_many_arguments)]
pub fn verify_prop_lower_bound(
    kernel: &StableKernel,
    u0: &InitialData,
    gamma: f64,
    phi: f64,
    m: f64,
    c3: f64,
    c4: f64,
    spec: PropSampleSpec,
) -> Result<PropBoundReport> {
    let alpha = kernel.alpha();
    check_gamma(alpha, gamma)?;
    check_constants(c3, c4)?;
    if !(m > 0.0) {
        return Err(param(format!("M must be positive, got {m}")));
    }
    let threshold = c3 * m / c4;
    if !(phi >= threshold * (1.0 - 1e-12)) {
        return Err(param(format!(
            "phi = {phi} is below c3 M / c4 = {threshold}"
        )));
    }
    if spec.times < 1 || spec.radii < 1 || !(spec.decades > 0.0) {
        return Err(param(
            "sample layout needs at least one time and one radius",
        ));
    }
    let beta = u0.beta;
    let horizon = level_horizon(phi, m, c3, c4, beta, gamma).min(1.0);
    let times = if spec.times == 1 {
        vec![horizon]
    } else {
        crate::kernel::log_space(horizon * 10f64.powf(-spec.decades), horizon, spec.times)
    };
    let points: Vec<(f64, f64)> = times
        .iter()
        .flat_map(|&t| {
            let edge = t.powf(gamma);
            (0..spec.radii).map(move |j| {
                let frac = if spec.radii == 1 {
                    1.0
                } else {
                    j as f64 / (spec.radii - 1) as f64
                };
                (t, edge * frac)
            })
        })
        .collect();
    let values = points
        .par_iter()
        .map(|&(t, r)| semigroup_value(kernel, u0, t, r))
        .collect::<Result<Vec<_>>>()?;
    let mut level = Vec::with_capacity(points.len());
    let mut inter = Vec::with_capacity(points.len());
    for (&(t, r), w) in points.iter().zip(&values) {
        let tol = SLACK_FACTOR * w.error;
        level.push(Comparison {
            t,
            r,
            lhs: w.value,
            rhs: phi,
            tolerance: tol,
        });
        inter.push(Comparison {
            t,
            r,
            lhs: w.value,
            rhs: threshold * t.powf(-beta * gamma),
            tolerance: tol,
        });
    }
    Ok(PropBoundReport {
        phi,
        horizon,
        level: SlackReport::from_samples("level-bound", level),
        intermediate: SlackReport::from_samples("intermediate-bound", inter),
    })
}

/// `w(0, t) t^{βγ} ≥ (c₃/c₄) M` at each sampled `t`.
pub fn verify_origin_growth(
    kernel: &StableKernel,
    u0: &InitialData,
    gamma: f64,
    m: f64,
    c3: f64,
    c4: f64,
    times: &[f64],
) -> Result<SlackReport> {
    check_gamma(kernel.alpha(), gamma)?;
    check_constants(c3, c4)?;
    let bg = u0.beta * gamma;
    let samples = times
        .par_iter()
        .map(|&t| {
            let w = semigroup_value(kernel, u0, t, 0.0)?;
            let s = t.powf(bg);
            Ok(Comparison {
                t,
                r: 0.0,
                lhs: w.value * s,
                rhs: c3 * m / c4,
                tolerance: SLACK_FACTOR * w.error * s,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SlackReport::from_samples("origin-growth", samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma_li;

    fn canonical() -> (StableKernel, InitialData) {
        (
            StableKernel::new(1.5, 1).unwrap(),
            make_initial_data(0.5, 2.0, 1, 1.0).unwrap(),
        )
    }

    #[test]
    fn closed_form_norms() {
        let d = make_initial_data(0.5, 2.0, 1, 1.0).unwrap();
        assert!((d.lq_norm - 4.0 * 2f64.sqrt()).abs() < 1e-12);
        let flat = make_initial_data(1e-12, 2.0, 1, 1.0).unwrap();
        assert!((flat.lq_norm - 4.0).abs() < 1e-9);
        assert!(matches!(
            make_initial_data(0.9, 2.0, 1, 2.0),
            Err(Error::Admissibility(_))
        ));
        assert!(make_initial_data(0.5, 1.0, 1, 1.0).is_err());
        assert!(make_initial_data(1.5, 2.0, 1, 1.0).is_err());
        // Truncated: 2 * (N r_N + (R^{1-β} - r_N^{1-β}) / (1-β)) with r_N = N^{-2}.
        let t = d.truncated(4.0).unwrap();
        let rn: f64 = 1.0 / 16.0;
        let want = 2.0 * (4.0 * rn + (2f64.sqrt() - rn.sqrt()) / 0.5);
        assert!((t.l1_norm() - want).abs() < 1e-12);
    }

    #[test]
    fn gaussian_convolution_oracle() {
        // w(0, t) = (4t)^{-β/2} π^{-1/2} γ((1-β)/2, R²/(4t)) for the heat semigroup.
        let k = StableKernel::new(2.0, 1).unwrap();
        let d = make_initial_data(0.5, 2.0, 1, 1.0).unwrap();
        let t: f64 = 0.1;
        let want =
            (4.0 * t).powf(-0.25) / std::f64::consts::PI.sqrt() * gamma_li(0.25, 4.0 / (4.0 * t));
        let got = semigroup_value(&k, &d, t, 0.0).unwrap();
        assert!(
            ((got.value - want) / want).abs() < 1e-6,
            "{} vs {want}",
            got.value
        );
    }

    #[test]
    fn approximate_identity_at_unit_radius() {
        let (k, d) = canonical();
        let w = semigroup_value(&k, &d, 1e-8, 1.0).unwrap().value;
        assert!((w - 1.0).abs() < 1e-3, "{w}");
    }

    #[test]
    fn mass_is_preserved() {
        let (k, d) = canonical();
        for t in [0.01, 0.1, 1.0] {
            let m = field_mass(&k, &d, t).unwrap().value;
            assert!(
                ((m - d.l1_norm()) / d.l1_norm()).abs() < 1e-3,
                "t = {t}: {m}"
            );
        }
    }

    #[test]
    fn mass_is_preserved_in_higher_dimensions() {
        for dim in [2, 3] {
            let k = StableKernel::new(1.5, dim).unwrap();
            let d = make_initial_data(0.5, 2.0, dim, 1.0).unwrap();
            let m = field_mass(&k, &d, 0.1).unwrap().value;
            assert!(
                ((m - d.l1_norm()) / d.l1_norm()).abs() < 1e-3,
                "n = {dim}: {m}"
            );
        }
    }

    #[test]
    fn field_is_radially_non_increasing() {
        let (k, d) = canonical();
        let radii: Vec<f64> = (0..40).map(|j| 0.1 * j as f64).collect();
        let f = apply_semigroup(&k, &d, 0.05, &radii).unwrap();
        assert_eq!(f.monotone_violation(), 0.0);
        assert!(f.values.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn semigroup_property_at_origin() {
        let (k, d) = canonical();
        let direct = semigroup_value(&k, &d, 0.3, 0.0).unwrap().value;
        let split = reconvolve_at_origin(&k, &d, 0.1, 0.2).unwrap().value;
        assert!(
            ((split - direct) / direct).abs() < 1e-3,
            "{split} vs {direct}"
        );
    }

    #[test]
    fn comparison_under_larger_data() {
        let (k, small) = canonical();
        let big = make_initial_data(0.5, 3.0, 1, 1.0).unwrap();
        let capped = small.truncated(3.0).unwrap();
        for r in [0.0, 0.5, 1.5, 2.5] {
            let a = semigroup_value(&k, &small, 0.2, r).unwrap().value;
            let b = semigroup_value(&k, &big, 0.2, r).unwrap().value;
            let c = semigroup_value(&k, &capped, 0.2, r).unwrap().value;
            assert!(a <= b && c <= a, "r = {r}");
        }
    }

    #[test]
    fn m_and_scaling_inequality() {
        let (k, d) = canonical();
        let grid = log_time_grid(1e-3, 12);
        let rep = compute_m(&k, &d, &grid).unwrap();
        assert!(rep.m > 0.0 && rep.m <= rep.values[rep.values.len() - 1]);
        assert!(compute_m(&k, &d, &[]).is_err());
        assert!(compute_m(&k, &d, &[0.5]).is_err());
        // At t = 1 the inequality degenerates to w(1,1) ≥ (c₃/c₄) w(1,1).
        let s = verify_scaling_inequality(&k, &d, 0.5, &[1.0, 0.25], 0.3, 1.2).unwrap();
        assert!(s.passed && s.min_slack_ratio >= 1.0);
        assert!(verify_scaling_inequality(&k, &d, 0.7, &[0.5], 0.3, 1.2).is_err());
    }

    #[test]
    fn horizon_formula() {
        let (c3, c4, m, beta, gamma) = (0.3, 1.2, 0.8, 0.5, 0.5);
        let phi = c3 * m / c4;
        assert!((level_horizon(phi, m, c3, c4, beta, gamma) - 1.0).abs() < 1e-15);
        let ratio = level_horizon(2.0 * phi, m, c3, c4, beta, gamma)
            / level_horizon(phi, m, c3, c4, beta, gamma);
        assert!((ratio - 2f64.powf(-1.0 / (beta * gamma))).abs() < 1e-14);
    }
}
