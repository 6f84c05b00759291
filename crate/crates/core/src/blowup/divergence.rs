//! Lower-bound functionals that grow without bound along the ladder.
//!
//! `L_i = ∫_0^{t̃_i} ∫ f(w(x, s)) dx ds` is infinite for the singular datum
//! (near `s = 0`, `f(w) ~ |x|^{-βk}` is not integrable), so the functional
//! is evaluated with the integrand capped at the next rung:
//! `f(min(w, φ_{i+1}))`. The capped value is still a lower bound for `L_i`
//! and still dominates the closed-form floor, because `w ≥ φ_i` on
//! `|x| ≤ s^γ` for `s ≤ t̃_i`.

use std::cell::RefCell;

use rayon::prelude::*;
use serde::Serialize;

use super::fit_slope;
use super::params::ExperimentParams;
use crate::error::{param, Error, Result};
use crate::kernel::{ball_mass_lower_bound, BallSampleSpec, StableKernel};
use crate::osgood::OsgoodFamily;
use crate::quadrature::{Adaptive, Estimate, GaussLegendre};
use crate::semigroup::{scaled_convolution, InitialData};
use crate::special::{unit_ball_volume, unit_sphere_area};

/// Which nonlinearity is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Integrand {
    Full,
    Comparison,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalTerm {
    pub i: usize,
    pub ln_phi: f64,
    pub ln_horizon: f64,
    /// `ln` of the capped functional.
    pub ln_value: f64,
    /// Relative error bound on the capped functional.
    pub rel_error: f64,
    pub ln_floor: f64,
    pub above_floor: bool,
}

const INNER_REL: f64 = 1e-8;
const OUTER_REL: f64 = 1e-6;

fn integrate_relative<F: Fn(f64) -> f64>(
    f: F,
    pts: &[f64],
    rel: f64,
    abs: f64,
    what: &str,
) -> Result<Estimate> {
    let rule = Adaptive {
        abs_tol: abs,
        rel_tol: rel,
        max_segments: 2000,
    };
    let (est, ok) = rule.run(&f, pts);
    if ok || est.value == 0.0 {
        Ok(est)
    } else {
        Err(Error::Accuracy {
            what: format!("{what} quadrature"),
            achieved: est.error / est.value.abs(),
            requested: rel,
        })
    }
}

/// `ln W(ξ; ∞)` on a uniform grid in `ln ξ`: the self-similar profile that
/// `W(ξ; R')` matches whenever `ξ ≪ R'`.
pub struct SelfSimilarTable {
    lo: f64,
    h: f64,
    ln_w: Vec<f64>,
    slope: Vec<f64>,
    ln_w0: f64,
    /// Largest relative interpolation error seen at checked midpoints.
    pub max_rel_error: f64,
}

const TABLE_LO: f64 = -12.0;
const TABLE_HI: f64 = 60.0;
const TABLE_STEP: f64 = 0.02;
/// `ln t` at which `R'` saturates, giving the `R' = ∞` profile.
const LN_T_SELF_SIMILAR: f64 = -1e4;

impl SelfSimilarTable {
    pub fn build(kernel: &StableKernel, u0: &InitialData) -> Result<Self> {
        if u0.cap.is_some() {
            return Err(param(
                "the self-similar profile needs the untruncated datum",
            ));
        }
        let count = ((TABLE_HI - TABLE_LO) / TABLE_STEP).round() as usize + 1;
        let at = |x: f64| -> Result<f64> {
            Ok(scaled_convolution(kernel, u0, LN_T_SELF_SIMILAR, x.exp())?
                .value
                .ln())
        };
        let ln_w = (0..count)
            .into_par_iter()
            .map(|j| at(TABLE_LO + TABLE_STEP * j as f64))
            .collect::<Result<Vec<f64>>>()?;
        let ln_w0 = scaled_convolution(kernel, u0, LN_T_SELF_SIMILAR, 0.0)?
            .value
            .ln();
        let h = TABLE_STEP;
        let last = count - 1;
        let slope = (0..count)
            .map(|j| match j {
                0 => (ln_w[1] - ln_w[0]) / h,
                1 => (ln_w[2] - ln_w[0]) / (2.0 * h),
                _ if j == last => (ln_w[last] - ln_w[last - 1]) / h,
                _ if j == last - 1 => (ln_w[last] - ln_w[last - 2]) / (2.0 * h),
                _ => {
                    (ln_w[j - 2] - 8.0 * ln_w[j - 1] + 8.0 * ln_w[j + 1] - ln_w[j + 2]) / (12.0 * h)
                }
            })
            .collect();
        let mut table = Self {
            lo: TABLE_LO,
            h,
            ln_w,
            slope,
            ln_w0,
            max_rel_error: 0.0,
        };
        let checks = (2..last - 2)
            .step_by(37)
            .map(|j| {
                let x = TABLE_LO + h * (j as f64 + 0.5);
                Ok((at(x)? - table.ln_w_ln(x)).abs())
            })
            .collect::<Result<Vec<f64>>>()?;
        table.max_rel_error = checks.into_iter().fold(0.0, f64::max);
        Ok(table)
    }

    /// `ln W` from `ln ξ`.
    pub fn ln_w_ln(&self, x: f64) -> f64 {
        let last = self.ln_w.len() - 1;
        if x <= self.lo {
            return self.ln_w0.max(self.ln_w[0]);
        }
        let u = (x - self.lo) / self.h;
        if u >= last as f64 {
            return self.ln_w[last] + self.slope[last] * (x - self.lo - self.h * last as f64);
        }
        let j = u.floor() as usize;
        let t = u - j as f64;
        let (y0, y1) = (self.ln_w[j], self.ln_w[j + 1]);
        let (m0, m1) = (self.slope[j] * self.h, self.slope[j + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1
    }

    pub fn ln_w0(&self) -> f64 {
        self.ln_w0
    }
}

/// The tail of the space integral is followed over `TAIL_EFOLDS / (βk - n)`
/// units of `ln ξ` past its start, where `ξ^n f(w)` has dropped by
/// `e^{-TAIL_EFOLDS}`.
const TAIL_EFOLDS: f64 = 24.0;

/// One time slice of the capped functional, restricted to `|x| ≤ R/2`.
///
/// There `W(ξ; R') ≥ W(ξ; ∞) - R'^{-β} P(|·| > R'/2)`, so the table minus
/// that correction is a lower bound for the exact profile.
struct Slice<'a> {
    kernel: &'a StableKernel,
    family: &'a OsgoodFamily,
    u0: &'a InitialData,
    table: &'a SelfSimilarTable,
    ln_cap: f64,
    ln_f_cap: f64,
    integrand: Integrand,
    /// `βk - n`, the decay exponent of `ξ^n f(w)` in the tail.
    decay: f64,
}

struct Profile {
    /// `ln` of the self-similar scaling `s^{-β/α}`.
    scale: f64,
    /// Scaled half radius `R'/2`.
    edge: f64,
    correction: f64,
}

impl Slice<'_> {
    fn ln_f(&self, ln_u: f64) -> Result<f64> {
        let l = ln_u.min(self.ln_cap);
        match self.integrand {
            Integrand::Full => self.family.ln_f_ln(l),
            Integrand::Comparison => self.family.ln_f_tilde_ln(l),
        }
    }

    fn profile(&self, v: f64) -> Profile {
        let alpha = self.kernel.alpha();
        let r_s = (self.u0.radius.ln() - v / alpha).exp().min(1e300);
        let edge = 0.5 * r_s;
        Profile {
            scale: -self.u0.beta / alpha * v,
            edge,
            correction: r_s.powf(-self.u0.beta) * self.kernel.tail_mass(edge),
        }
    }

    /// Lower bound for `ln w(ξ s^{1/α}, s)`; `-∞` where it vanishes.
    fn ln_w(&self, p: &Profile, xi: f64) -> f64 {
        let ln_w = if xi == 0.0 {
            self.table.ln_w0()
        } else {
            self.table.ln_w_ln(xi.ln())
        };
        let w = ln_w.exp() - p.correction;
        if w > 0.0 {
            p.scale + w.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Radius in `[0, edge]` where the bound falls to the cap.
    fn crossing(&self, p: &Profile) -> f64 {
        if self.ln_w(p, 0.0) < self.ln_cap {
            return 0.0;
        }
        if self.ln_w(p, p.edge) >= self.ln_cap {
            return p.edge;
        }
        let (mut lo, mut hi) = (0.0, p.edge);
        while hi - lo > 1e-13 * hi {
            let mid = 0.5 * (lo + hi);
            if self.ln_w(p, mid) >= self.ln_cap {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// `ln ∫_{|x| ≤ R/2} f(min(w(x, e^v), cap)) dx`, from below.
    fn ln_space_integral(&self, v: f64) -> Result<f64> {
        let n = self.u0.dim as f64;
        let alpha = self.kernel.alpha();
        let p = self.profile(v);
        let xi_c = self.crossing(&p);
        let at = |xi: f64| -> f64 {
            let ln_w = self.ln_w(&p, xi);
            if ln_w == f64::NEG_INFINITY {
                return 0.0;
            }
            self.ln_f(ln_w)
                .map(|l| (l - self.ln_f_cap).exp())
                .unwrap_or(f64::NAN)
        };

        // Inside the crossing radius the capped integrand is exactly 1.
        let core = unit_ball_volume(self.u0.dim) * xi_c.powf(n);
        let area = unit_sphere_area(self.u0.dim);
        let mut total = core;
        let start = if xi_c > 0.0 {
            xi_c
        } else {
            let b = p.edge.min(1.0);
            let head = integrate_relative(
                |xi: f64| xi.powf(n - 1.0) * at(xi),
                &[0.0, 0.5 * b, b],
                INNER_REL,
                0.0,
                "inner head",
            )?;
            total += area * head.value;
            b
        };
        let lo = start.ln();
        let top = (start.max(1.0).ln() + TAIL_EFOLDS / self.decay).min(p.edge.ln());
        if top > lo {
            let mut pts = vec![lo];
            let mut x = lo + 1.0;
            while x < top {
                pts.push(x);
                x += 1.0;
            }
            pts.push(top);
            let tail = integrate_relative(
                |u: f64| {
                    let xi = u.exp();
                    xi.powf(n) * at(xi)
                },
                &pts,
                INNER_REL,
                INNER_REL * total / area,
                "inner tail",
            )?;
            total += area * tail.value;
        }
        if total == 0.0 {
            // f(w) / f(cap) underflows everywhere: negligible next to the peak.
            return Ok(f64::NEG_INFINITY);
        }
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Accuracy {
                what: "space integral of the nonlinearity".into(),
                achieved: total,
                requested: INNER_REL,
            });
        }
        Ok(n / alpha * v + self.ln_f_cap + total.ln())
    }
}

fn check_index(family: &OsgoodFamily, params: &ExperimentParams, i: usize) -> Result<(f64, f64)> {
    let ln_phi = family.ln_phi(i)?;
    let ln_h = params.ln_horizon(ln_phi);
    if ln_phi < params.constants.m.ln() || ln_h > 0.0 {
        return Err(Error::Range(format!(
            "index {i} precedes the threshold (need phi_i >= M and horizon <= 1; \
             ln phi_i = {ln_phi}, ln horizon = {ln_h})"
        )));
    }
    Ok((ln_phi, ln_h))
}

/// `ln L_i` with the integrand capped at `φ_{i+1}`, compared with the floor.
pub fn divergence_functional(
    kernel: &StableKernel,
    family: &OsgoodFamily,
    u0: &InitialData,
    params: &ExperimentParams,
    i: usize,
) -> Result<FunctionalTerm> {
    divergence_functional_with(kernel, family, u0, params, i, Integrand::Full)
}

pub fn divergence_functional_with(
    kernel: &StableKernel,
    family: &OsgoodFamily,
    u0: &InitialData,
    params: &ExperimentParams,
    i: usize,
    integrand: Integrand,
) -> Result<FunctionalTerm> {
    let table = SelfSimilarTable::build(kernel, u0)?;
    functional_with_table(kernel, family, u0, params, &table, i, integrand)
}

/// As [`divergence_functional_with`], reusing a prebuilt profile table.
pub fn functional_with_table(
    kernel: &StableKernel,
    family: &OsgoodFamily,
    u0: &InitialData,
    params: &ExperimentParams,
    table: &SelfSimilarTable,
    i: usize,
    integrand: Integrand,
) -> Result<FunctionalTerm> {
    if u0.cap.is_some() {
        return Err(param(
            "the divergence functional needs the untruncated datum",
        ));
    }
    if kernel.alpha() != params.alpha || family.alpha() != params.alpha {
        return Err(param("kernel, family and parameters disagree on alpha"));
    }
    if family.k() != params.k || u0.dim != params.dim {
        return Err(param("family, datum and parameters disagree on k or n"));
    }
    let (ln_phi, ln_h) = check_index(family, params, i)?;
    let ln_cap = family.ln_phi(i + 1)?;
    let slice = Slice {
        kernel,
        family,
        u0,
        table,
        ln_cap,
        ln_f_cap: match integrand {
            Integrand::Full => family.ln_f_ln(ln_cap)?,
            Integrand::Comparison => family.ln_f_tilde_ln(ln_cap)?,
        },
        integrand,
        decay: u0.beta * params.k - params.dim as f64,
    };
    let alpha = kernel.alpha();
    // w(0, s) reaches the cap near s* = (cap / W(0))^{-α/β}.
    let ln_s_star = -(alpha / u0.beta) * (ln_cap - table.ln_w0());
    let v_hi = ln_h;
    let v_lo = v_hi.min(ln_s_star) - 40.0;

    // Coarse pass to locate the peak of e^v g(e^v).
    let coarse: Vec<f64> = (0..=32)
        .map(|j| v_lo + (v_hi - v_lo) * j as f64 / 32.0)
        .collect();
    let heights = coarse
        .iter()
        .map(|&v| slice.ln_space_integral(v).map(|l| l + v))
        .collect::<Result<Vec<f64>>>()?;
    let shift = heights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let body = integrate_relative(
        |v: f64| {
            slice
                .ln_space_integral(v)
                .map(|l| (l + v - shift).exp())
                .unwrap_or(f64::NAN)
        },
        &coarse,
        OUTER_REL,
        0.0,
        "outer",
    )?;
    if !(body.value > 0.0) || !body.value.is_finite() {
        return Err(Error::Accuracy {
            what: "time integral of the divergence functional".into(),
            achieved: body.value,
            requested: OUTER_REL,
        });
    }
    // Interpolation error in ln W enters f(w) ≤ α^k w^k at most k-fold.
    let rel_error = body.error / body.value
        + INNER_REL
        + (kernel.profile_tolerance() + table.max_rel_error) * params.k;
    let ln_value = shift + body.value.ln();
    let ln_floor = params.ln_functional_floor(ln_phi);
    Ok(FunctionalTerm {
        i,
        ln_phi,
        ln_horizon: ln_h,
        ln_value,
        rel_error,
        ln_floor,
        above_floor: ln_value + (1.0 - rel_error).ln() >= ln_floor,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalReport {
    pub terms: Vec<FunctionalTerm>,
    /// Least-squares slope of `ln L_i` against `ln φ_i`.
    pub fitted_slope: f64,
    pub epsilon: f64,
    pub increasing: bool,
    pub above_floor: bool,
}

/// Evaluate the capped functional at every index and fit its growth exponent.
pub fn divergence_series(
    kernel: &StableKernel,
    family: &OsgoodFamily,
    u0: &InitialData,
    params: &ExperimentParams,
    indices: &[usize],
) -> Result<FunctionalReport> {
    if indices.len() < 2 {
        return Err(param("need at least two ladder indices"));
    }
    let table = SelfSimilarTable::build(kernel, u0)?;
    let terms = indices
        .par_iter()
        .map(|&i| functional_with_table(kernel, family, u0, params, &table, i, Integrand::Full))
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = terms.iter().map(|t| t.ln_phi).collect();
    let y: Vec<f64> = terms.iter().map(|t| t.ln_value).collect();
    Ok(FunctionalReport {
        fitted_slope: fit_slope(&x, &y),
        epsilon: params.epsilon,
        increasing: y.windows(2).all(|w| w[1] > w[0]),
        above_floor: terms.iter().all(|t| t.above_floor),
        terms,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalMassTerm {
    pub i: usize,
    pub ln_phi: f64,
    pub ln_horizon: f64,
    /// `ln(c̃ (α-1) ω_n / (α(nγ+1)) · φ_{i+1} t̃^{nγ+1})`.
    pub ln_bound: f64,
    /// `ln(c̄ φ_i^ε)`; equal to `ln_bound` up to rounding.
    pub ln_power_form: f64,
    /// `ln((φ_{i+1} - φ_i) ∫_0^{t̃} ∫_{|y| ≤ s^γ} ∫_{B_ρ} p(t-s, x, y) dx dy ds)`.
    pub ln_chain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub t: f64,
    pub rho: f64,
    pub c_tilde: f64,
    pub terms: Vec<LocalMassTerm>,
    pub fitted_slope: f64,
    pub epsilon: f64,
    pub increasing: bool,
    /// Largest `|ln_bound - ln_power_form|`.
    pub identity_gap: f64,
    /// Every computed chain value dominates its bound.
    pub chain_dominates: bool,
}

/// Local-mass lower bounds on `B_ρ` at observation time `t` for each ladder index.
pub fn local_mass_divergence(
    kernel: &StableKernel,
    family: &OsgoodFamily,
    params: &ExperimentParams,
    t: f64,
    indices: &[usize],
) -> Result<DivergenceReport> {
    if !(t > 0.0 && t < 1.0) {
        return Err(param(format!(
            "observation time must lie in (0, 1), got {t}"
        )));
    }
    if indices.is_empty() {
        return Err(param("empty index list"));
    }
    let c_tilde = params.constants.c_tilde;
    if !(c_tilde > 0.0) {
        return Err(Error::Certification {
            check: "ball-mass-floor".into(),
            detail: format!("c_tilde = {c_tilde} is not positive"),
        });
    }
    let n = params.dim as f64;
    let a = params.alpha;
    let e = n * params.gamma + 1.0;
    let ln_pref = (c_tilde * (a - 1.0) * unit_ball_volume(params.dim) / (a * e)).ln();
    let gl = GaussLegendre::new(16);
    let mut terms = Vec::with_capacity(indices.len());
    for &i in indices {
        let ln_phi = family.ln_phi(i)?;
        let ln_h = params.ln_horizon(ln_phi);
        if ln_h > t.ln() {
            return Err(param(format!(
                "index {i}: horizon exp({ln_h}) exceeds the observation time {t}"
            )));
        }
        let ln_next = family.ln_phi(i + 1)?;
        let ln_bound = ln_pref + ln_next + e * ln_h;
        let ln_power_form = params.ln_c_bar() + params.epsilon * ln_phi;
        let ln_chain = family.ln_gap(i + 1)? + ln_chain_integral(kernel, params, t, ln_h, &gl)?;
        terms.push(LocalMassTerm {
            i,
            ln_phi,
            ln_horizon: ln_h,
            ln_bound,
            ln_power_form,
            ln_chain,
        });
    }
    let x: Vec<f64> = terms.iter().map(|t| t.ln_phi).collect();
    let y: Vec<f64> = terms.iter().map(|t| t.ln_bound).collect();
    Ok(DivergenceReport {
        t,
        rho: params.rho,
        c_tilde,
        fitted_slope: if terms.len() >= 2 {
            fit_slope(&x, &y)
        } else {
            f64::NAN
        },
        epsilon: params.epsilon,
        increasing: y.windows(2).all(|w| w[1] > w[0]),
        identity_gap: terms
            .iter()
            .map(|t| (t.ln_bound - t.ln_power_form).abs())
            .fold(0.0, f64::max),
        chain_dominates: terms.iter().all(|t| t.ln_chain >= t.ln_bound),
        terms,
    })
}

/// `ln ∫_0^{t̃} ∫_{|y| ≤ s^γ} ∫_{B_ρ} p(t - s, x, y) dx dy ds`, with the time
/// integral in `ln s` over 40 e-folds below `t̃`.
fn ln_chain_integral(
    kernel: &StableKernel,
    params: &ExperimentParams,
    t: f64,
    ln_h: f64,
    gl: &GaussLegendre,
) -> Result<f64> {
    let n = params.dim as f64;
    let area = unit_sphere_area(params.dim);
    let g = params.gamma;
    // Factor out s^{nγ+1} so the panel sums stay O(1).
    let e = n * g + 1.0;
    let mut total = 0.0;
    for p in 0..4 {
        let (a, b) = (ln_h - 10.0 * (p + 1) as f64, ln_h - 10.0 * p as f64);
        let err = RefCell::new(None);
        let panel = gl.integrate(
            |v: f64| {
                let s = v.exp();
                let edge = (g * v).exp();
                // ∫_0^{s^γ} r^{n-1} mass(r) dr with r = edge·u
                let radial = gl.integrate(
                    |u: f64| match kernel.ball_mass(t - s, edge * u, params.rho) {
                        Ok(m) => u.powf(n - 1.0) * m.value,
                        Err(x) => {
                            err.borrow_mut().get_or_insert(x);
                            0.0
                        }
                    },
                    0.0,
                    1.0,
                );
                area * radial * (e * (v - ln_h)).exp()
            },
            a,
            b,
        );
        if let Some(x) = err.into_inner() {
            return Err(x);
        }
        total += panel;
    }
    Ok(e * ln_h + total.ln())
}

/// `c̃` for the observation ball, from the kernel's ball-mass floor.
pub fn ball_floor(kernel: &StableKernel, rho: f64) -> Result<f64> {
    Ok(ball_mass_lower_bound(kernel, rho, &BallSampleSpec::default())?.c_tilde)
}

#[cfg(test)]
mod tests {
    use std::sync::OnceLock;

    use super::*;
    use crate::blowup::{admissible_params, CertifiedConstants};
    use crate::osgood::build_family;
    use crate::semigroup::make_initial_data;

    struct Setup {
        kernel: StableKernel,
        family: OsgoodFamily,
        u0: InitialData,
        params: ExperimentParams,
        table: SelfSimilarTable,
    }

    fn constants() -> CertifiedConstants {
        CertifiedConstants {
            c3: 0.2874245939666832,
            c4: 1.356657166457881,
            m: 1.0071625908009731,
            c_tilde: 0.70474,
        }
    }

    fn setup() -> &'static Setup {
        static S: OnceLock<Setup> = OnceLock::new();
        S.get_or_init(|| {
            let kernel = StableKernel::new(1.5, 1).unwrap();
            let (beta, gamma) = admissible_params(1, 1.0, 1.5, 3.0).unwrap();
            let u0 = make_initial_data(beta, 2.0, 1, 1.0).unwrap();
            let params =
                ExperimentParams::new(1, 1.0, 1.5, 3.0, beta, gamma, constants(), 2.0).unwrap();
            let family = build_family(1.5, 3.0, 2.0, 12).unwrap();
            let table = SelfSimilarTable::build(&kernel, &u0).unwrap();
            Setup {
                kernel,
                family,
                u0,
                params,
                table,
            }
        })
    }

    fn term(i: usize, integrand: Integrand) -> FunctionalTerm {
        let s = setup();
        functional_with_table(
            &s.kernel, &s.family, &s.u0, &s.params, &s.table, i, integrand,
        )
        .unwrap()
    }

    #[test]
    fn table_matches_convolution() {
        let s = setup();
        assert!(s.table.max_rel_error < 1e-5, "{}", s.table.max_rel_error);
        for &xi in &[0.3f64, 4.0, 1e3] {
            let exact = scaled_convolution(&s.kernel, &s.u0, LN_T_SELF_SIMILAR, xi)
                .unwrap()
                .value
                .ln();
            assert!((s.table.ln_w_ln(xi.ln()) - exact).abs() < 1e-5);
        }
    }

    #[test]
    fn slice_is_a_lower_bound_for_the_exact_profile() {
        // Direct Simpson sum of f(min(w, cap)) over |x| ≤ R/2 using the
        // exact convolution, at a time where R' is still moderate.
        let s = setup();
        let i = 1;
        let ln_cap = s.family.ln_phi(i + 1).unwrap();
        let slice = Slice {
            kernel: &s.kernel,
            family: &s.family,
            u0: &s.u0,
            table: &s.table,
            ln_cap,
            ln_f_cap: s.family.ln_f_ln(ln_cap).unwrap(),
            integrand: Integrand::Full,
            decay: s.u0.beta * 3.0 - 1.0,
        };
        let v = s.params.ln_horizon(s.family.ln_phi(i).unwrap());
        let got = slice.ln_space_integral(v).unwrap().exp();

        let scale = (-s.u0.beta / 1.5 * v).exp();
        let edge = 0.5 * (s.u0.radius.ln() - v / 1.5).exp();
        let cap = ln_cap.exp();
        let f = |xi: f64| {
            let w = scale * scaled_convolution(&s.kernel, &s.u0, v, xi).unwrap().value;
            s.family.eval_f(w.min(cap)).unwrap()
        };
        // x = ξ s^{1/α}; integrate over ξ ∈ [0, edge] in the variable ln(1 + ξ).
        let m = 4000;
        let top = edge.ln_1p();
        let h = top / m as f64;
        let mut sum = 0.0;
        for j in 0..=m {
            let u = h * j as f64;
            let w = if j == 0 || j == m {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            sum += w * f(u.exp_m1()) * u.exp();
        }
        let want = 2.0 * sum * h / 3.0 * (v / 1.5).exp();
        assert!(got <= want * (1.0 + 1e-4), "{got} {want}");
        assert!(got >= want * (1.0 - 1e-3), "{got} {want}");
    }

    #[test]
    fn functional_clears_the_floor_and_grows() {
        let s = setup();
        let terms: Vec<FunctionalTerm> = (0..6).map(|i| term(i, Integrand::Full)).collect();
        assert!(terms.iter().all(|t| t.above_floor));
        assert!(terms.windows(2).all(|w| w[1].ln_value > w[0].ln_value));
        let x: Vec<f64> = terms.iter().map(|t| t.ln_phi).collect();
        let y: Vec<f64> = terms.iter().map(|t| t.ln_value).collect();
        assert!(fit_slope(&x, &y) >= 0.9 * s.params.epsilon);
        assert!(terms.iter().all(|t| t.rel_error < 1e-4));
    }

    #[test]
    fn comparison_integrand_is_smaller() {
        for i in [0, 2, 4] {
            let full = term(i, Integrand::Full);
            let cmp = term(i, Integrand::Comparison);
            assert!(cmp.ln_value <= full.ln_value, "{i}");
        }
    }

    #[test]
    fn index_before_threshold_is_rejected() {
        let s = setup();
        let mut c = constants();
        // φ_0 = 2 < M = 3 puts index 0 below the threshold.
        c.m = 3.0;
        let p = ExperimentParams::new(1, 1.0, 1.5, 3.0, s.u0.beta, s.params.gamma, c, 2.0).unwrap();
        let r = functional_with_table(
            &s.kernel,
            &s.family,
            &s.u0,
            &p,
            &s.table,
            0,
            Integrand::Full,
        );
        assert!(matches!(r, Err(Error::Range(_))));
    }

    #[test]
    fn local_mass_bound_grows_at_rate_epsilon() {
        let s = setup();
        let r =
            local_mass_divergence(&s.kernel, &s.family, &s.params, 0.05, &[0, 1, 2, 3]).unwrap();
        assert!(r.increasing);
        assert!((r.fitted_slope - s.params.epsilon).abs() < 1e-9);
        assert!(r.identity_gap < 1e-9);
        assert!(r.chain_dominates);
    }
}
