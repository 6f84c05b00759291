//! Log-spaced tabulation of the radial profile with monotone cubic
//! interpolation in `(ln r, ln P)` and a power-law tail.

use rayon::prelude::*;

use crate::error::{param, Error, Result};
use crate::kernel::inversion::{inversion_profile, profile_at_origin};
use crate::quadrature::GaussLegendre;
use crate::special::unit_sphere_area;

/// Layout of the profile table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub per_decade: usize,
}

impl Default for TableConfig {
    fn default() -> Self {
        Self {
            r_min: 1e-4,
            r_max: 1e4,
            per_decade: 96,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProfileTable {
    dim: usize,
    alpha: f64,
    ln_r: Vec<f64>,
    ln_p: Vec<f64>,
    slopes: Vec<f64>,
    p0: f64,
    tail_slope: f64,
    // Radial mass n ω_n ∫_0^{r_j} ρ^{n-1} P(ρ) dρ at each node.
    cumulative: Vec<f64>,
    tail_mass: f64,
    tolerance: f64,
    monotone_repairs: usize,
}

impl ProfileTable {
    pub fn build(alpha: f64, dim: usize, cfg: TableConfig) -> Result<Self> {
        if !(cfg.r_min > 0.0 && cfg.r_max > cfg.r_min && cfg.per_decade >= 4) {
            return Err(param(
                "profile table needs 0 < r_min < r_max and >= 4 nodes per decade",
            ));
        }
        let decades = (cfg.r_max / cfg.r_min).log10();
        let count = (decades * cfg.per_decade as f64).round() as usize + 1;
        let step = (cfg.r_max / cfg.r_min).ln() / (count - 1) as f64;
        let ln_r: Vec<f64> = (0..count)
            .map(|j| cfg.r_min.ln() + step * j as f64)
            .collect();
        let values: Vec<f64> = ln_r
            .par_iter()
            .map(|&lr| inversion_profile(alpha, dim, lr.exp()).map(|e| e.value))
            .collect::<Result<Vec<_>>>()?;
        let p0 = profile_at_origin(alpha, dim);
        let mut monotone_repairs = 0;
        let mut clean = Vec::with_capacity(values.len());
        let mut prev = p0;
        for v in values {
            if !(v > 0.0) {
                return Err(Error::Accuracy {
                    what: "profile tabulation produced a non-positive value".into(),
                    achieved: v,
                    requested: 0.0,
                });
            }
            let v = if v > prev {
                monotone_repairs += 1;
                prev
            } else {
                v
            };
            clean.push(v);
            prev = v;
        }
        let ln_p: Vec<f64> = clean.iter().map(|v| v.ln()).collect();
        let slopes = pchip_slopes(&ln_r, &ln_p);
        let last = ln_p.len() - 1;
        let tail_slope = (ln_p[last] - ln_p[last - 1]) / (ln_r[last] - ln_r[last - 1]);
        let mut table = Self {
            dim,
            alpha,
            ln_r,
            ln_p,
            slopes,
            p0,
            tail_slope,
            cumulative: Vec::new(),
            tail_mass: 0.0,
            tolerance: 0.0,
            monotone_repairs,
        };
        table.accumulate_mass()?;
        table.tolerance = table.probe_tolerance()?;
        Ok(table)
    }

    pub fn r_min(&self) -> f64 {
        self.ln_r[0].exp()
    }

    pub fn r_max(&self) -> f64 {
        self.ln_r[self.ln_r.len() - 1].exp()
    }

    pub fn node_count(&self) -> usize {
        self.ln_r.len()
    }

    /// Largest relative interpolation error seen at probed segment midpoints.
    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Exponent of the power-law tail used beyond the last node.
    pub fn tail_slope(&self) -> f64 {
        self.tail_slope
    }

    /// Nodes whose raw value had to be lowered to keep the table non-increasing.
    pub fn monotone_repairs(&self) -> usize {
        self.monotone_repairs
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.ln_r
            .iter()
            .zip(&self.ln_p)
            .map(|(a, b)| (a.exp(), b.exp()))
    }

    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        let r_min = self.r_min();
        if r < r_min {
            let p1 = self.ln_p[0].exp();
            let s = r / r_min;
            return self.p0 + (p1 - self.p0) * s * s;
        }
        let lr = r.ln();
        let last = self.ln_r.len() - 1;
        if lr >= self.ln_r[last] {
            return (self.ln_p[last] + self.tail_slope * (lr - self.ln_r[last])).exp();
        }
        let h = self.ln_r[1] - self.ln_r[0];
        let j = (((lr - self.ln_r[0]) / h).floor() as usize).min(last - 1);
        let t = (lr - self.ln_r[j]) / h;
        let (y0, y1) = (self.ln_p[j], self.ln_p[j + 1]);
        let (m0, m1) = (self.slopes[j] * h, self.slopes[j + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let y = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1;
        y.exp()
    }

    /// Radial mass `n ω_n ∫_0^r ρ^{n-1} P(ρ) dρ`.
    pub fn radial_mass(&self, r: f64) -> f64 {
        let n = self.dim as f64;
        let area = unit_sphere_area(self.dim);
        let r_min = self.r_min();
        if r <= 0.0 {
            return 0.0;
        }
        if r < r_min {
            return area * self.core_mass(r);
        }
        let lr = r.ln();
        let last = self.ln_r.len() - 1;
        if lr >= self.ln_r[last] {
            let s = -self.tail_slope;
            let r_max = self.r_max();
            let p_last = self.ln_p[last].exp();
            // ∫_{r_max}^{r} ρ^{n-1} P_last (ρ/r_max)^{-s} dρ
            let extra = p_last * r_max.powf(n) * (1.0 - (r / r_max).powf(n - s)) / (s - n);
            return self.cumulative[last] + area * extra;
        }
        let h = self.ln_r[1] - self.ln_r[0];
        let j = (((lr - self.ln_r[0]) / h).floor() as usize).min(last - 1);
        self.cumulative[j] + area * self.segment_mass(self.ln_r[j], lr)
    }

    /// Mass outside the ball of radius `r`, without cancellation in the tail.
    pub fn tail_mass_beyond(&self, r: f64) -> f64 {
        let lr = r.max(f64::MIN_POSITIVE).ln();
        let last = self.ln_r.len() - 1;
        if lr >= self.ln_r[last] {
            let n = self.dim as f64;
            let s = -self.tail_slope;
            let r_max = self.r_max();
            let p_last = self.ln_p[last].exp();
            return unit_sphere_area(self.dim) * p_last * r_max.powf(n) * (r / r_max).powf(n - s)
                / (s - n);
        }
        (self.total_mass() - self.radial_mass(r)).max(0.0)
    }

    /// Total mass of the tabulated profile including the analytic tail.
    pub fn total_mass(&self) -> f64 {
        self.cumulative[self.cumulative.len() - 1] + self.tail_mass
    }

    fn core_mass(&self, r: f64) -> f64 {
        // ∫_0^r ρ^{n-1} (p0 + (p1 - p0)(ρ/r_min)^2) dρ
        let n = self.dim as f64;
        let p1 = self.ln_p[0].exp();
        let r_min = self.r_min();
        self.p0 * r.powf(n) / n + (p1 - self.p0) * r.powf(n + 2.0) / ((n + 2.0) * r_min * r_min)
    }

    fn segment_mass(&self, lr_a: f64, lr_b: f64) -> f64 {
        thread_local! {
            static GL: GaussLegendre = GaussLegendre::new(10);
        }
        let n = self.dim as f64;
        GL.with(|gl| gl.integrate(|lr: f64| (n * lr).exp() * self.eval(lr.exp()), lr_a, lr_b))
    }

    fn accumulate_mass(&mut self) -> Result<()> {
        let area = unit_sphere_area(self.dim);
        let n = self.dim as f64;
        let mut cum = Vec::with_capacity(self.ln_r.len());
        let mut acc = area * self.core_mass(self.r_min());
        cum.push(acc);
        for j in 0..self.ln_r.len() - 1 {
            acc += area * self.segment_mass(self.ln_r[j], self.ln_r[j + 1]);
            cum.push(acc);
        }
        let s = -self.tail_slope;
        if !(s > n) {
            return Err(Error::Accuracy {
                what: "profile tail decays too slowly to be integrable".into(),
                achieved: s,
                requested: n,
            });
        }
        let last = self.ln_r.len() - 1;
        self.tail_mass = area * self.ln_p[last].exp() * self.r_max().powf(n) / (s - n);
        self.cumulative = cum;
        Ok(())
    }

    fn probe_tolerance(&self) -> Result<f64> {
        let stride = 24;
        let probes: Vec<usize> = (0..self.ln_r.len() - 1).step_by(stride).collect();
        let errs = probes
            .par_iter()
            .map(|&j| {
                let r = (0.5 * (self.ln_r[j] + self.ln_r[j + 1])).exp();
                let exact = inversion_profile(self.alpha, self.dim, r)?.value;
                Ok(((self.eval(r) - exact) / exact).abs())
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(errs.into_iter().fold(0.0, f64::max))
    }
}

/// Fritsch–Butland derivative estimates (monotonicity preserving).
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let delta: Vec<f64> = (0..n - 1)
        .map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i]))
        .collect();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (a, b) = (delta[i - 1], delta[i]);
        d[i] = if a * b <= 0.0 {
            0.0
        } else {
            let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
            let w1 = 2.0 * h1 + h0;
            let w2 = h1 + 2.0 * h0;
            (w1 + w2) / (w1 / a + w2 / b)
        };
    }
    d[0] = end_slope(x[1] - x[0], x[2] - x[1], delta[0], delta[1]);
    d[n - 1] = end_slope(
        x[n - 1] - x[n - 2],
        x[n - 2] - x[n - 3],
        delta[n - 2],
        delta[n - 3],
    );
    d
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_is_accurate_and_normalized() {
        let t = ProfileTable::build(1.5, 1, TableConfig::default()).unwrap();
        assert!(t.tolerance() < 1e-6, "tolerance {}", t.tolerance());
        assert!(
            (t.total_mass() - 1.0).abs() < 1e-6,
            "mass {}",
            t.total_mass()
        );
        assert!((t.tail_slope() + 2.5).abs() < 1e-3);
        assert_eq!(t.monotone_repairs(), 0);
    }

    #[test]
    fn interpolant_is_non_increasing() {
        let t = ProfileTable::build(0.8, 2, TableConfig::default()).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..5000 {
            let r = 1e-6 * 10f64.powf(k as f64 * 11.0 / 5000.0);
            let v = t.eval(r);
            assert!(v <= prev && v > 0.0, "r = {r}");
            prev = v;
        }
    }

    #[test]
    fn rejects_degenerate_layout() {
        let cfg = TableConfig {
            r_min: 1.0,
            r_max: 0.5,
            per_decade: 10,
        };
        assert!(ProfileTable::build(1.5, 1, cfg).is_err());
    }
}
