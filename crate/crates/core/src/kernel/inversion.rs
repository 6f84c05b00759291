//! Evaluation of the unit-time radial profile `P(r) = p(1, r)` by inverting
//! the Fourier transform `ξ ↦ exp(-|ξ|^α)`.
//!
//! Four routes are combined:
//!
//! * oscillatory panels: the radial inversion integral split at the
//!   (approximate) zeros of the oscillatory factor, each panel integrated
//!   adaptively, Wynn-accelerated when the damping is too weak to truncate;
//! * the same integral deformed onto its steepest-descent contour (the
//!   Zolotarev representation), which has a positive integrand and keeps full
//!   relative accuracy deep in fast-decaying tails (n = 1, α away from 1);
//! * the convergent power series around `r = 0` (α > 1);
//! * the large-`r` series in powers of `r^{-(αk+n)}` (convergent for α < 1,
//!   asymptotic for 1 ≤ α < 2), accepted only when its terms have converged.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{param, Error, Result};
use crate::quadrature::{wynn_epsilon, Adaptive, Estimate};
use crate::special::{bessel_j0, gamma, ln_gamma};

/// Relative accuracy requested from every route.
pub const INVERSION_REL_TOL: f64 = 1e-12;

const MAX_PANELS: usize = 4000;

pub(crate) fn check_alpha_dim(alpha: f64, dim: usize) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(param(format!("alpha must lie in (0, 2], got {alpha}")));
    }
    if !(1..=3).contains(&dim) {
        return Err(param(format!("dimension must be 1, 2 or 3, got {dim}")));
    }
    Ok(())
}

/// `P(0) = 2 Γ(n/α) / (α (4π)^{n/2} Γ(n/2))`.
pub fn profile_at_origin(alpha: f64, dim: usize) -> f64 {
    let n = dim as f64;
    2.0 * gamma(n / alpha) / (alpha * (4.0 * PI).powf(n / 2.0) * gamma(n / 2.0))
}

/// Gaussian (α = 2) and Poisson (α = 1) closed forms; `None` otherwise.
pub fn closed_form_profile(alpha: f64, dim: usize, r: f64) -> Option<f64> {
    let n = dim as f64;
    if alpha == 2.0 {
        Some((4.0 * PI).powf(-n / 2.0) * (-r * r / 4.0).exp())
    } else if alpha == 1.0 {
        let h = (n + 1.0) / 2.0;
        Some(gamma(h) / PI.powf(h) * (1.0 + r * r).powf(-h))
    } else {
        None
    }
}

/// Generic Fourier-inversion evaluation of `P(r)`, valid for every α in (0, 2].
///
/// Never takes the closed-form shortcut, so it can be checked against it.
pub fn inversion_profile(alpha: f64, dim: usize, r: f64) -> Result<Estimate> {
    check_alpha_dim(alpha, dim)?;
    if !(r >= 0.0) || !r.is_finite() {
        return Err(param(format!(
            "radius must be finite and non-negative, got {r}"
        )));
    }
    if r == 0.0 {
        return Ok(Estimate::new(profile_at_origin(alpha, dim), 0.0));
    }
    if dim == 1 && (alpha - 1.0).abs() >= 0.1 {
        return steepest_descent_1d(alpha, r);
    }
    if alpha > 1.0 && r <= 4.0 {
        if let Some(e) = small_r_series(alpha, dim, r) {
            return Ok(e);
        }
    }
    if alpha < 2.0 && r >= 1.0 {
        if let Some(e) = large_r_series(alpha, dim, r) {
            return Ok(e);
        }
    }
    oscillatory_panels(alpha, dim, r)
}

/// Convergent series `P(r) = 2/(α(4π)^{n/2}) Σ (-1)^m Γ((2m+n)/α) (r²/4)^m / (m! Γ(m+n/2))`.
///
/// Returns `None` when cancellation would cost more than three digits or the
/// series has not converged.
pub fn small_r_series(alpha: f64, dim: usize, r: f64) -> Option<Estimate> {
    if alpha <= 1.0 {
        return None;
    }
    let n = dim as f64;
    let ln_q = if r > 0.0 {
        (r * r / 4.0).ln()
    } else {
        f64::NEG_INFINITY
    };
    let mut sum: f64 = 0.0;
    let mut max_term: f64 = 0.0;
    let mut last = f64::INFINITY;
    let mut converged = false;
    let mut count = 0usize;
    for m in 0..600usize {
        let mf = m as f64;
        let ln_t = ln_gamma((2.0 * mf + n) / alpha) + if m == 0 { 0.0 } else { mf * ln_q }
            - ln_gamma(mf + 1.0)
            - ln_gamma(mf + n / 2.0);
        let t = ln_t.exp();
        let term = if m % 2 == 0 { t } else { -t };
        sum += term;
        max_term = max_term.max(t);
        count += 1;
        if m > 2 && t < 1e-17 * sum.abs() && t < last {
            converged = true;
            last = t;
            break;
        }
        last = t;
    }
    if !converged || sum <= 0.0 || max_term > 1e3 * sum {
        return None;
    }
    let pref = 2.0 / (alpha * (4.0 * PI).powf(n / 2.0));
    let err = last + 4.0 * f64::EPSILON * max_term * count as f64;
    Some(Estimate::new(pref * sum, pref * err))
}

/// Large-`r` series
/// `P(r) = π^{-(n/2+1)} Σ_k (-1)^{k+1}/k! Γ(αk/2+1) Γ((αk+n)/2) 2^{αk} sin(παk/2) r^{-(αk+n)}`.
///
/// Returns `None` unless the terms have decayed below 1e-17 of the sum before
/// any asymptotic divergence sets in.
pub fn large_r_series(alpha: f64, dim: usize, r: f64) -> Option<Estimate> {
    if alpha >= 2.0 || r <= 0.0 {
        return None;
    }
    let n = dim as f64;
    let ln_r = r.ln();
    let mut sum: f64 = 0.0;
    let mut prev_bound = f64::INFINITY;
    let mut max_term: f64 = 0.0;
    for k in 1..400usize {
        let kf = k as f64;
        let ln_b = ln_gamma(alpha * kf / 2.0 + 1.0)
            + ln_gamma((alpha * kf + n) / 2.0)
            + alpha * kf * 2f64.ln()
            - ln_gamma(kf + 1.0)
            - (alpha * kf + n) * ln_r;
        let bound = ln_b.exp();
        let s = (PI * alpha * kf / 2.0).sin();
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let term = sign * bound * s;
        if k > 1 && sum != 0.0 && bound < 1e-17 * sum.abs() {
            if sum <= 0.0 {
                return None;
            }
            let pref = PI.powf(-(n / 2.0 + 1.0));
            let err = bound + 4.0 * f64::EPSILON * max_term * k as f64;
            return Some(Estimate::new(pref * sum, pref * err));
        }
        if k > 1 && bound > prev_bound {
            return None;
        }
        prev_bound = bound;
        max_term = max_term.max(term.abs());
        sum += term;
    }
    None
}

/// Steepest-descent form of the one-dimensional inversion integral:
/// `P(x) = α / (π |α-1| x) ∫_0^{π/2} g(θ) exp(-g(θ)) dθ` with
/// `g(θ) = x^{α/(α-1)} V(θ)` and
/// `V(θ) = (cos θ / sin αθ)^{α/(α-1)} cos((α-1)θ) / cos θ`.
pub fn steepest_descent_1d(alpha: f64, x: f64) -> Result<Estimate> {
    if alpha == 1.0 {
        return Err(Error::Unsupported(
            "steepest-descent representation is singular at alpha = 1".into(),
        ));
    }
    if x <= 0.0 {
        return Ok(Estimate::new(profile_at_origin(alpha, 1), 0.0));
    }
    let a = alpha / (alpha - 1.0);
    let ln_x = x.ln();
    let ln_g = move |theta: f64| -> f64 {
        let c = theta.cos();
        let s = (alpha * theta).sin();
        a * (ln_x + c.ln() - s.ln()) + ((alpha - 1.0) * theta).cos().ln() - c.ln()
    };
    let lo = 1e-300_f64.max(FRAC_PI_2 * 1e-15);
    let hi = FRAC_PI_2 * (1.0 - 1e-15);
    let g_lo = ln_g(lo).exp();
    let g_hi = ln_g(hi).exp();
    // exp(-g) is factored by exp(-shift) so the integrand never underflows.
    let shift = g_lo.min(g_hi).max(0.0);
    let shift = if shift.is_finite() { shift } else { 0.0 };

    // Break points where ln g crosses -4, 0 and 4 (g is monotone in θ).
    let increasing = alpha < 1.0;
    let mut breaks = vec![0.0];
    for level in [-4.0, 0.0, 4.0] {
        if let Some(th) = bisect_monotone(&ln_g, lo, hi, level, increasing) {
            breaks.push(th);
        }
    }
    breaks.push(FRAC_PI_2);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let integrand = |theta: f64| -> f64 {
        let lg = ln_g(theta);
        if !lg.is_finite() {
            return 0.0;
        }
        let g = lg.exp();
        let v = (lg - (g - shift)).exp();
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let quad = Adaptive::new(0.0, INVERSION_REL_TOL).with_max_segments(2000);
    let est = quad.integrate_breaks(integrand, &breaks)?;
    let scale = alpha / (PI * (alpha - 1.0).abs() * x) * (-shift).exp();
    Ok(est * scale)
}

fn bisect_monotone<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    level: f64,
    increasing: bool,
) -> Option<f64> {
    let h = |t: f64| {
        let v = f(t) - level;
        if increasing {
            v
        } else {
            -v
        }
    };
    let (mut a, mut b) = (lo, hi);
    let (ha, hb) = (h(a), h(b));
    if !(ha < 0.0 && hb > 0.0) {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if h(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Radial inversion integral split at the zeros of its oscillatory factor.
pub fn oscillatory_panels(alpha: f64, dim: usize, r: f64) -> Result<Estimate> {
    check_alpha_dim(alpha, dim)?;
    let n = dim as f64;
    // Amplitude ξ^{n-1} exp(-ξ^α) is below 1e-20 of its peak past ξ_end.
    let mut xi_end: f64 = 50f64.powf(1.0 / alpha);
    for _ in 0..3 {
        xi_end = (50.0 + (n - 1.0) * xi_end.max(1.0).ln()).powf(1.0 / alpha);
    }
    let integrand = |xi: f64| -> f64 {
        let damp = (-xi.powf(alpha)).exp();
        match dim {
            1 => (xi * r).cos() * damp,
            2 => xi * bessel_j0(xi * r) * damp,
            _ => xi * (xi * r).sin() / r * damp,
        }
    };
    let prefactor = match dim {
        1 => 1.0 / PI,
        2 => 1.0 / (2.0 * PI),
        _ => 1.0 / (2.0 * PI * PI),
    };
    let offset = match dim {
        1 => 0.5,
        2 => 0.75,
        _ => 1.0,
    };
    // Panels no wider than the damping scale so each one stays smooth.
    let max_width = xi_end / 16.0;
    let spacing = PI / r;
    let quad = Adaptive::new(1e-19, INVERSION_REL_TOL).with_max_segments(400);
    let mut total = Estimate::default();
    let mut partial = Vec::new();
    let mut a = 0.0;
    let mut j = 0usize;
    while a < xi_end {
        let zero = (j as f64 + offset) * spacing;
        let b = if zero <= a {
            j += 1;
            continue;
        } else if zero - a > max_width {
            a + max_width
        } else {
            j += 1;
            zero
        };
        let b = b.min(xi_end);
        total += quad.integrate(integrand, a, b)?;
        partial.push(total.value);
        a = b;
        if partial.len() >= MAX_PANELS {
            let tail = &partial[partial.len() - 40..];
            let (v, e) = wynn_epsilon(tail).ok_or_else(|| Error::Accuracy {
                what: "oscillatory inversion".into(),
                achieved: f64::INFINITY,
                requested: INVERSION_REL_TOL,
            })?;
            if e > 1e-9 * v.abs() {
                return Err(Error::Accuracy {
                    what: "oscillatory inversion (Wynn extrapolation)".into(),
                    achieved: e / v.abs(),
                    requested: 1e-9,
                });
            }
            return Ok(Estimate::new(v, e + total.error) * prefactor);
        }
    }
    Ok(total * prefactor)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn origin_value_matches_gamma_formula() {
        // n = 1: P(0) = Γ(1 + 1/α) / π.
        for alpha in [0.5, 1.0, 1.5, 2.0] {
            let want = gamma(1.0 + 1.0 / alpha) / PI;
            assert!(rel(profile_at_origin(alpha, 1), want) < 1e-13);
        }
    }

    #[test]
    fn steepest_descent_reproduces_gaussian_tail() {
        for x in [0.01, 0.5, 3.0, 20.0, 50.0] {
            let got = steepest_descent_1d(2.0, x).unwrap().value;
            let want = closed_form_profile(2.0, 1, x).unwrap();
            assert!(rel(got, want) < 1e-9, "x = {x}: {got} vs {want}");
        }
    }

    #[test]
    fn panels_reproduce_poisson_kernel() {
        for x in [0.1, 1.0, 7.0, 50.0] {
            let got = oscillatory_panels(1.0, 1, x).unwrap().value;
            let want = closed_form_profile(1.0, 1, x).unwrap();
            assert!(rel(got, want) < 1e-8, "x = {x}");
        }
    }

    #[test]
    fn series_and_panels_agree() {
        for (alpha, dim, r) in [(1.5, 1, 0.7), (1.5, 2, 1.3), (1.8, 3, 0.9), (1.2, 3, 0.8)] {
            let s = small_r_series(alpha, dim, r).expect("series should converge");
            let p = oscillatory_panels(alpha, dim, r).unwrap();
            assert!(rel(s.value, p.value) < 1e-9, "{alpha} {dim} {r}");
        }
        for (alpha, dim, r) in [
            (0.5, 1, 30.0),
            (1.5, 1, 40.0),
            (0.8, 2, 20.0),
            (1.3, 3, 25.0),
        ] {
            let s = large_r_series(alpha, dim, r).expect("tail series should converge");
            let p = oscillatory_panels(alpha, dim, r).unwrap();
            assert!(rel(s.value, p.value) < 1e-7, "{alpha} {dim} {r}");
        }
    }

    #[test]
    fn steepest_descent_matches_panels_for_small_alpha() {
        for x in [0.3, 2.0, 10.0] {
            let a = steepest_descent_1d(0.7, x).unwrap().value;
            let b = oscillatory_panels(0.7, 1, x).unwrap().value;
            assert!(rel(a, b) < 1e-8, "x = {x}");
        }
    }

    #[test]
    fn higher_dimensional_closed_forms() {
        for dim in [2, 3] {
            for r in [0.2, 1.0, 4.0] {
                for alpha in [1.0, 2.0] {
                    let got = inversion_profile(alpha, dim, r).unwrap().value;
                    let want = closed_form_profile(alpha, dim, r).unwrap();
                    assert!(rel(got, want) < 1e-8, "alpha {alpha} dim {dim} r {r}");
                }
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(inversion_profile(0.0, 1, 1.0).is_err());
        assert!(inversion_profile(2.5, 1, 1.0).is_err());
        assert!(inversion_profile(1.5, 4, 1.0).is_err());
        assert!(inversion_profile(1.5, 1, -1.0).is_err());
    }
}
