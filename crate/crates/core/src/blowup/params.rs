use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::kernel::{verify_kernel_bounds, SampleSpec, StableKernel};
use crate::semigroup::{compute_m, InitialData};
use crate::special::unit_ball_volume;

/// Constants certified upstream: kernel comparability `c₃ ≤ c₄`, the
/// semigroup minimum `M`, and the ball-mass floor `c̃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifiedConstants {
    pub c3: f64,
    pub c4: f64,
    pub m: f64,
    pub c_tilde: f64,
}

impl CertifiedConstants {
    /// Measure every constant: `c₃, c₄` on the kernel sample, `M` on the
    /// time grid and `c̃` on the default ball sample of radius `rho`.
    pub fn measure(
        kernel: &StableKernel,
        u0: &InitialData,
        kernel_spec: &SampleSpec,
        m_grid: &[f64],
        rho: f64,
    ) -> Result<Self> {
        let bounds = verify_kernel_bounds(kernel, kernel_spec)?;
        let m = compute_m(kernel, u0, m_grid)?;
        Ok(Self {
            c3: bounds.c3,
            c4: bounds.c4,
            m: m.m,
            c_tilde: super::ball_floor(kernel, rho)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExperimentParams {
    pub dim: usize,
    pub q: f64,
    pub alpha: f64,
    pub k: f64,
    pub beta: f64,
    pub gamma: f64,
    /// `k - (nγ + 1)/(βγ)`.
    pub epsilon: f64,
    pub constants: CertifiedConstants,
    /// Observation ball radius.
    pub rho: f64,
}

/// Midpoint choice of `β ∈ ((n+α)/k, n/q)` and `γ ∈ (1/(kβ-n), 1/α)`.
pub fn admissible_params(dim: usize, q: f64, alpha: f64, k: f64) -> Result<(f64, f64)> {
    if !(1..=3).contains(&dim) {
        return Err(param(format!("dimension must be 1, 2 or 3, got {dim}")));
    }
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(param(format!("alpha must lie in (1, 2], got {alpha}")));
    }
    if !(q >= 1.0) || !q.is_finite() || !k.is_finite() {
        return Err(param(format!(
            "need q >= 1 and finite k, got q = {q}, k = {k}"
        )));
    }
    let n = dim as f64;
    let threshold = q * (1.0 + alpha / n);
    if !(k > threshold) {
        return Err(Error::Infeasible(format!(
            "k = {k} does not exceed q (1 + alpha / n) = {threshold}"
        )));
    }
    let beta = 0.5 * ((n + alpha) / k + n / q);
    let gamma = 0.5 * (1.0 / (k * beta - n) + 1.0 / alpha);
    Ok((beta, gamma))
}

impl ExperimentParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dim: usize,
        q: f64,
        alpha: f64,
        k: f64,
        beta: f64,
        gamma: f64,
        constants: CertifiedConstants,
        rho: f64,
    ) -> Result<Self> {
        let n = dim as f64;
        let mut bad = Vec::new();
        if !(alpha > 1.0 && alpha <= 2.0) {
            bad.push(format!("alpha = {alpha} not in (1, 2]"));
        }
        if !(k > q * (1.0 + alpha / n)) {
            bad.push(format!("k = {k} <= q (1 + alpha/n)"));
        }
        if !(beta > 0.0 && beta * q < n) {
            bad.push(format!("beta = {beta} not in (0, n/q)"));
        }
        if !(k * beta > n + alpha) {
            bad.push(format!("k beta = {} <= n + alpha", k * beta));
        }
        if !(gamma > 0.0 && gamma * alpha < 1.0) {
            bad.push(format!("gamma = {gamma} not in (0, 1/alpha)"));
        }
        let epsilon = k - (n * gamma + 1.0) / (beta * gamma);
        if !(epsilon > 0.0) {
            bad.push(format!("epsilon = {epsilon} <= 0"));
        }
        if !(rho > 1.0) {
            bad.push(format!("rho = {rho} <= 1"));
        }
        let c = constants;
        if !(c.c3 > 0.0 && c.c4 >= c.c3 && c.m > 0.0) {
            bad.push(format!(
                "constants c3 = {}, c4 = {}, M = {} invalid",
                c.c3, c.c4, c.m
            ));
        }
        if !bad.is_empty() {
            return Err(Error::Admissibility(bad.join("; ")));
        }
        Ok(Self {
            dim,
            q,
            alpha,
            k,
            beta,
            gamma,
            epsilon,
            constants,
            rho,
        })
    }

    /// `ln((c₄ φ / (c₃ M))^{-1/(βγ)})` from `ln φ`.
    pub fn ln_horizon(&self, ln_phi: f64) -> f64 {
        let c = self.constants;
        -(c.c4.ln() + ln_phi - c.c3.ln() - c.m.ln()) / (self.beta * self.gamma)
    }

    /// `ln` of the floor `((α-1) ω_n / (α(γn+1))) (c₄/(c₃M))^{-(γn+1)/(βγ)} φ^ε`.
    pub fn ln_functional_floor(&self, ln_phi: f64) -> f64 {
        let n = self.dim as f64;
        let a = self.alpha;
        let e = n * self.gamma + 1.0;
        let c = self.constants;
        ((a - 1.0) * unit_ball_volume(self.dim) / (a * e)).ln()
            - e / (self.beta * self.gamma) * (c.c4.ln() - c.c3.ln() - c.m.ln())
            + self.epsilon * ln_phi
    }

    /// `ln c̄` with `c̄ = c̃ (α-1) ω_n / (α(nγ+1)) · (c₄/(c₃M))^{-(nγ+1)/(βγ)}`.
    pub fn ln_c_bar(&self) -> f64 {
        self.constants.c_tilde.ln() + self.ln_functional_floor(0.0)
    }
}
