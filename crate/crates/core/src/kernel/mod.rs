//! The fractional heat kernel `p(t, x, y)` of `-(-Δ)^{α/2}` on `R^n` and its
//! two-sided comparability bounds.
//!
//! The kernel is radial and self-similar, `p(t, r) = t^{-n/α} P(t^{-1/α} r)`,
//! so everything is driven by the unit-time profile `P`.

mod bounds;
pub mod inversion;
mod table;

use std::f64::consts::PI;
use std::sync::Arc;

use statrs::function::erf::{erf, erfc};

pub use bounds::{
    ball_mass_lower_bound, log_space, verify_kernel_bounds, BallMassReport, BallSampleSpec,
    BoundReport, BoundSample, Extremum, SampleSpec,
};
pub use table::{ProfileTable, TableConfig};

use crate::error::{param, Error, Result};
use crate::quadrature::{Adaptive, Estimate};
use crate::special::{unit_ball_volume, unit_sphere_area};
use inversion::{check_alpha_dim, closed_form_profile, inversion_profile};

/// `P(r) = p(1, r)` for the given stability index and dimension.
///
/// Uses the Gaussian closed form at α = 2, the Poisson kernel at α = 1, and
/// the generic inversion routes otherwise.
pub fn stable_profile(alpha: f64, dim: usize, r: f64) -> Result<f64> {
    check_alpha_dim(alpha, dim)?;
    if !(r >= 0.0) {
        return Err(param(format!("radius must be non-negative, got {r}")));
    }
    if let Some(v) = closed_form_profile(alpha, dim, r) {
        return Ok(v);
    }
    let est = inversion_profile(alpha, dim, r)?;
    Ok(est.value)
}

#[derive(Debug, Clone)]
enum Profile {
    Gaussian,
    Poisson,
    Table(Arc<ProfileTable>),
}

/// Radial fractional heat kernel. Immutable and cheap to clone.
#[derive(Debug, Clone)]
pub struct StableKernel {
    alpha: f64,
    dim: usize,
    profile: Profile,
}

impl StableKernel {
    pub fn new(alpha: f64, dim: usize) -> Result<Self> {
        Self::with_table(alpha, dim, TableConfig::default())
    }

    pub fn with_table(alpha: f64, dim: usize, cfg: TableConfig) -> Result<Self> {
        check_alpha_dim(alpha, dim)?;
        let profile = if alpha == 2.0 {
            Profile::Gaussian
        } else if alpha == 1.0 {
            Profile::Poisson
        } else {
            Profile::Table(Arc::new(ProfileTable::build(alpha, dim, cfg)?))
        };
        Ok(Self {
            alpha,
            dim,
            profile,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The tabulated profile, absent for the closed-form cases.
    pub fn table(&self) -> Option<&ProfileTable> {
        match &self.profile {
            Profile::Table(t) => Some(t),
            _ => None,
        }
    }

    /// Relative accuracy of the profile representation.
    pub fn profile_tolerance(&self) -> f64 {
        match &self.profile {
            Profile::Table(t) => t.tolerance(),
            _ => f64::EPSILON,
        }
    }

    /// Unit-time profile `P(r)`.
    pub fn profile(&self, r: f64) -> f64 {
        let n = self.dim as f64;
        match &self.profile {
            Profile::Gaussian => (4.0 * PI).powf(-n / 2.0) * (-r * r / 4.0).exp(),
            Profile::Poisson => {
                let h = (n + 1.0) / 2.0;
                poisson_constant(self.dim) * (1.0 + r * r).powf(-h)
            }
            Profile::Table(t) => t.eval(r),
        }
    }

    /// `p(t, r)` without argument checks.
    #[inline]
    pub fn density(&self, t: f64, r: f64) -> f64 {
        let scale = t.powf(1.0 / self.alpha);
        self.profile(r / scale) / scale.powi(self.dim as i32)
    }

    /// `p(t, r) = t^{-n/α} P(t^{-1/α} r)`.
    pub fn heat_kernel(&self, t: f64, r: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(param(format!("time must be positive, got {t}")));
        }
        if !(r >= 0.0) {
            return Err(param(format!("separation must be non-negative, got {r}")));
        }
        Ok(self.density(t, r))
    }

    /// Mass of `p(1, ·)` inside the ball of radius `r` about the source.
    pub fn radial_mass(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match (&self.profile, self.dim) {
            (Profile::Table(t), _) => t.radial_mass(r),
            (Profile::Gaussian, 1) => erf(r / 2.0),
            (Profile::Gaussian, 2) => 1.0 - (-r * r / 4.0).exp(),
            (Profile::Gaussian, _) => erf(r / 2.0) - r * (-r * r / 4.0).exp() / PI.sqrt(),
            (Profile::Poisson, 1) => 2.0 / PI * r.atan(),
            (Profile::Poisson, 2) => 1.0 - 1.0 / (1.0 + r * r).sqrt(),
            (Profile::Poisson, _) => 2.0 / PI * (r.atan() - r / (1.0 + r * r)),
        }
    }

    /// Mass of `p(1, ·)` outside the ball of radius `r`.
    pub fn tail_mass(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 1.0;
        }
        match (&self.profile, self.dim) {
            (Profile::Table(t), _) => t.tail_mass_beyond(r),
            (Profile::Gaussian, 1) => erfc(r / 2.0),
            (Profile::Gaussian, 2) => (-r * r / 4.0).exp(),
            (Profile::Gaussian, _) => erfc(r / 2.0) + r * (-r * r / 4.0).exp() / PI.sqrt(),
            (Profile::Poisson, 1) => 2.0 / PI * (1.0 / r).atan(),
            (Profile::Poisson, 2) => 1.0 / (1.0 + r * r).sqrt(),
            (Profile::Poisson, _) => 2.0 / PI * ((1.0 / r).atan() + r / (1.0 + r * r)),
        }
    }

    /// Mass of `p(t, |x - y|)` over `x` in the ball `B_ρ(0)`, for a source at
    /// distance `dist` from the origin.
    pub fn ball_mass(&self, t: f64, dist: f64, rho: f64) -> Result<Estimate> {
        if !(t > 0.0) || !(rho > 0.0) || !(dist >= 0.0) {
            return Err(param("ball mass needs t > 0, rho > 0, dist >= 0"));
        }
        let scale = t.powf(1.0 / self.alpha);
        let (d, rho) = (dist / scale, rho / scale);
        let inner = (rho - d).max(0.0);
        let full = self.radial_mass(inner);
        if d == 0.0 {
            return Ok(Estimate::new(full, 0.0));
        }
        if self.dim == 1 {
            // Interval [-ρ, ρ] seen from d: F(ρ - d) - F(-ρ - d).
            let hi = self.radial_mass(rho + d);
            let lo = if rho >= d {
                full
            } else {
                -self.radial_mass(d - rho)
            };
            return Ok(Estimate::new(0.5 * (hi + lo), 0.0));
        }
        // Partially covered spheres: σ in (|ρ - d|, ρ + d).
        let dim = self.dim;
        let lower = (rho - d).abs();
        let upper = rho + d;
        let covered = move |sigma: f64| -> f64 {
            let c = ((rho * rho - d * d - sigma * sigma) / (2.0 * d * sigma)).clamp(-1.0, 1.0);
            match dim {
                2 => 2.0 * sigma * (PI - c.acos()),
                _ => 2.0 * PI * sigma * sigma * (1.0 + c),
            }
        };
        let quad = Adaptive::new(1e-14, 1e-11);
        let part = quad.integrate(|s| self.profile(s) * covered(s), lower, upper)?;
        Ok(Estimate::new(full + part.value, part.error))
    }

    /// Direct quadrature of `∫_{R^n} p(t, |x|) dx` over the interpolated kernel.
    pub fn numeric_mass(&self, t: f64) -> Result<Estimate> {
        if !(t > 0.0) {
            return Err(param("time must be positive"));
        }
        let n = self.dim as f64;
        let area = unit_sphere_area(self.dim);
        let scale = t.powf(1.0 / self.alpha);
        let (lo, hi) = (1e-8 * scale, 1e7 * scale);
        let integrand = |lr: f64| {
            let r = lr.exp();
            area * r.powf(n) * self.density(t, r)
        };
        let mut breaks = vec![lo.ln()];
        let mut b = lo.ln();
        while b < hi.ln() {
            b = (b + 2.0).min(hi.ln());
            breaks.push(b);
        }
        let quad = Adaptive::new(1e-13, 1e-11);
        let body = quad.integrate_breaks(integrand, &breaks)?;
        let core = unit_ball_volume(self.dim) * lo.powf(n) * self.density(t, 0.0);
        // Beyond hi the kernel is a pure power law r^{-(n+α)}.
        let tail = area * hi.powf(n) * self.density(t, hi) / self.alpha;
        Ok(Estimate::new(body.value + core + tail, body.error))
    }

    /// `∫_R p(s, |x - z|) p(t, |z - y|) dz` (one dimension only).
    pub fn chapman_kolmogorov(&self, s: f64, t: f64, x: f64, y: f64) -> Result<Estimate> {
        if self.dim != 1 {
            return Err(Error::Unsupported(
                "Chapman-Kolmogorov spot check is implemented for n = 1".into(),
            ));
        }
        if !(s > 0.0 && t > 0.0) {
            return Err(param("times must be positive"));
        }
        let ws = s.powf(1.0 / self.alpha);
        let wt = t.powf(1.0 / self.alpha);
        let mut breaks = vec![x, y];
        for k in [1.0, 10.0, 100.0] {
            breaks.extend([x - k * ws, x + k * ws, y - k * wt, y + k * wt]);
        }
        let reach = 1e5 * (ws + wt) + (x - y).abs();
        let lo = x.min(y) - reach;
        let hi = x.max(y) + reach;
        breaks.extend([lo, hi]);
        breaks.retain(|b| *b >= lo && *b <= hi);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let integrand = |z: f64| self.density(s, (x - z).abs()) * self.density(t, (z - y).abs());
        let quad = Adaptive::new(1e-15, 1e-10).with_max_segments(20_000);
        quad.integrate_breaks(integrand, &breaks)
    }
}

fn poisson_constant(dim: usize) -> f64 {
    let h = (dim as f64 + 1.0) / 2.0;
    crate::special::gamma(h) / PI.powf(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_examples() {
        let p = stable_profile(2.0, 1, 0.0).unwrap();
        assert!((p - (4.0 * PI).powf(-0.5)).abs() < 1e-15);
        assert!((p - 0.282_095).abs() < 1e-6);
        let p = stable_profile(1.0, 1, 0.0).unwrap();
        assert!((p - 1.0 / PI).abs() < 1e-15);

        let g = StableKernel::new(2.0, 1).unwrap();
        assert!((g.heat_kernel(4.0, 0.0).unwrap() - (16.0 * PI).powf(-0.5)).abs() < 1e-15);
        let c = StableKernel::new(1.0, 1).unwrap();
        assert!((c.heat_kernel(2.0, 2.0).unwrap() - 2.0 / (PI * 8.0)).abs() < 1e-15);
    }

    #[test]
    fn origin_matches_trapezoid_oracle() {
        // (1/π) ∫_0^∞ exp(-ξ^{1.5}) dξ by a fine trapezoid rule.
        let h = 1e-4;
        let m = 300_000;
        let mut s = 0.5 * (1.0 + (-(m as f64 * h).powf(1.5)).exp());
        for j in 1..m {
            s += (-(j as f64 * h).powf(1.5)).exp();
        }
        let oracle = s * h / PI;
        let got = stable_profile(1.5, 1, 0.0).unwrap();
        assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
    }

    #[test]
    fn self_similarity_holds_exactly() {
        let k = StableKernel::new(1.5, 1).unwrap();
        for (t, r) in [(0.01, 0.3), (3.0, 7.0), (100.0, 0.0)] {
            let lhs = k.heat_kernel(t, r).unwrap();
            let rhs = t.powf(-1.0 / 1.5) * k.heat_kernel(1.0, t.powf(-1.0 / 1.5) * r).unwrap();
            assert!((lhs - rhs).abs() <= 1e-14 * lhs);
        }
    }

    #[test]
    fn rejects_non_positive_time() {
        let k = StableKernel::new(2.0, 1).unwrap();
        assert!(k.heat_kernel(0.0, 1.0).is_err());
        assert!(k.heat_kernel(-1.0, 1.0).is_err());
    }

    #[test]
    fn ball_mass_of_poisson_interval() {
        let k = StableKernel::new(1.0, 1).unwrap();
        let m = k.ball_mass(1.0, 0.0, 2.0).unwrap().value;
        assert!((m - 2.0 / PI * 2f64.atan()).abs() < 1e-14);
        assert!((m - 0.704_83).abs() < 1e-5);
        // Off-centre: F(2 - 1) - F(-3) for the Cauchy law.
        let m = k.ball_mass(1.0, 1.0, 2.0).unwrap().value;
        let want = (1f64.atan() + 3f64.atan()) / PI;
        assert!((m - want).abs() < 1e-14);
    }

    #[test]
    fn ball_mass_in_three_dimensions_matches_monte_carlo_free_limit() {
        // Large ball swallows everything; small offset changes little.
        let k = StableKernel::new(2.0, 3).unwrap();
        let m = k.ball_mass(1.0, 0.5, 60.0).unwrap().value;
        assert!((m - 1.0).abs() < 1e-10);
        let centred = k.ball_mass(1.0, 0.0, 1.5).unwrap().value;
        let off = k.ball_mass(1.0, 1.0, 1.5).unwrap().value;
        assert!(off < centred);
    }

    #[test]
    fn numeric_mass_is_one() {
        for alpha in [1.0, 1.5, 2.0] {
            let k = StableKernel::new(alpha, 1).unwrap();
            for t in [0.01, 1.0, 100.0] {
                let m = k.numeric_mass(t).unwrap().value;
                assert!((m - 1.0).abs() < 1e-4, "alpha {alpha} t {t}: {m}");
            }
        }
    }
}
