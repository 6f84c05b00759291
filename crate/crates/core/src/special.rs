//! Special functions used by the kernel evaluators.

use std::f64::consts::PI;

pub use statrs::function::gamma::{gamma, ln_gamma};

/// Volume of the unit ball in `R^n` (ω₁ = 2, ω₂ = π, ω₃ = 4π/3).
pub fn unit_ball_volume(dim: usize) -> f64 {
    let half = dim as f64 / 2.0;
    PI.powf(half) / gamma(half + 1.0)
}

/// Surface area of the unit sphere `S^{n-1}`, equal to `n ω_n`.
pub fn unit_sphere_area(dim: usize) -> f64 {
    dim as f64 * unit_ball_volume(dim)
}

/// Bessel function of the first kind of order zero.
///
/// Power series below `x = 12`, Hankel asymptotic expansion above.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x < 12.0 {
        let q = -0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        for m in 1..200 {
            let mf = m as f64;
            term *= q / (mf * mf);
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        sum
    } else {
        let mut b = 1.0;
        let mut p = 1.0;
        let mut q = 0.0;
        let mut prev = f64::INFINITY;
        for k in 1..60 {
            let kf = k as f64;
            let next = b * (2.0 * kf - 1.0).powi(2) / (8.0 * kf * x);
            if next.abs() > prev || next.abs() < 1e-17 {
                break;
            }
            prev = next.abs();
            b = next;
            // P = 1 - b2 + b4 - ..., Q = -b1 + b3 - ...
            match k % 4 {
                1 => q -= b,
                2 => p -= b,
                3 => q += b,
                _ => p += b,
            }
        }
        let chi = x - PI / 4.0;
        (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
    }
}
