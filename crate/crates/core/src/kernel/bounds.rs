use rayon::prelude::*;
use serde::Serialize;

use super::StableKernel;
use crate::error::{param, Error, Result};

/// `(t, r)` sample set for the comparability check.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpec {
    pub times: Vec<f64>,
    pub radii: Vec<f64>,
}

impl SampleSpec {
    /// `count` log-spaced radii in `[r_min, r_max]` at the given times.
    pub fn log_spaced(times: Vec<f64>, r_min: f64, r_max: f64, count: usize) -> Self {
        let radii = log_space(r_min, r_max, count);
        Self { times, radii }
    }

    pub fn describe(&self) -> String {
        let (lo, hi) = min_max(&self.radii);
        format!(
            "{} times x {} log-spaced radii in [{lo:e}, {hi:e}]",
            self.times.len(),
            self.radii.len()
        )
    }
}

impl Default for SampleSpec {
    /// The `t = 1` slice with 400 log-spaced radii over eight decades.
    fn default() -> Self {
        Self::log_spaced(vec![1.0], 1e-4, 1e4, 400)
    }
}

/// `count` log-spaced points from `lo` to `hi`, both endpoints exact.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let step = (hi / lo).ln() / (count - 1) as f64;
    let mut v: Vec<f64> = (0..count).map(|j| lo * (step * j as f64).exp()).collect();
    v[count - 1] = hi;
    v
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremum {
    pub t: f64,
    pub r: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundSample {
    pub t: f64,
    pub r: f64,
    pub p: f64,
    /// `t^{-n/α} ∧ t r^{-(n+α)}`
    pub min_envelope: f64,
    /// `t / (t^{1/α} + r)^{n+α}`
    pub envelope: f64,
}

impl BoundSample {
    pub fn min_ratio(&self) -> f64 {
        self.p / self.min_envelope
    }

    pub fn ratio(&self) -> f64 {
        self.p / self.envelope
    }
}

/// Tightest comparability constants over a sample set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub alpha: f64,
    pub dim: usize,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub sample_spec: String,
    pub c1_at: Extremum,
    pub c2_at: Extremum,
    pub c3_at: Extremum,
    pub c4_at: Extremum,
    #[serde(skip)]
    pub samples: Vec<BoundSample>,
}

impl BoundReport {
    /// The two envelopes differ by at most `2^{n+α}`, so each pair of
    /// constants bounds the other.
    pub fn envelopes_consistent(&self) -> bool {
        let f = 2f64.powf(self.dim as f64 + self.alpha) * (1.0 + 1e-12);
        self.c3 >= self.c1 / (1.0 + 1e-12)
            && self.c4 <= self.c2 * f
            && self.c1 >= self.c3 / f
            && self.c2 <= self.c4 * (1.0 + 1e-12)
    }
}

/// Certify the two-sided bounds
/// `c1 (t^{-n/α} ∧ t r^{-(n+α)}) ≤ p(t, r) ≤ c2 (...)` and
/// `c3 t/(t^{1/α}+r)^{n+α} ≤ p(t, r) ≤ c4 t/(t^{1/α}+r)^{n+α}` on samples.
pub fn verify_kernel_bounds(kernel: &StableKernel, spec: &SampleSpec) -> Result<BoundReport> {
    let alpha = kernel.alpha();
    if alpha >= 2.0 {
        return Err(Error::Unsupported(
            "alpha = 2: the Gaussian tail violates any polynomial lower envelope".into(),
        ));
    }
    if spec.times.is_empty() || spec.radii.is_empty() {
        return Err(param("empty sample set"));
    }
    if spec.times.iter().any(|t| !(*t > 0.0)) || spec.radii.iter().any(|r| !(*r >= 0.0)) {
        return Err(param(
            "sample times must be positive and radii non-negative",
        ));
    }
    // Scaled radii r t^{-1/α} must span at least four decades.
    let scaled: Vec<f64> = spec
        .times
        .iter()
        .flat_map(|t| spec.radii.iter().map(move |r| r / t.powf(1.0 / alpha)))
        .filter(|x| *x > 0.0)
        .collect();
    let (lo, hi) = min_max(&scaled);
    if scaled.is_empty() || hi / lo < 1e4 {
        return Err(param(
            "sample set must cover at least four decades of r t^{-1/alpha}",
        ));
    }

    let n = kernel.dim() as f64;
    let pairs: Vec<(f64, f64)> = spec
        .times
        .iter()
        .flat_map(|&t| spec.radii.iter().map(move |&r| (t, r)))
        .collect();
    let samples: Vec<BoundSample> = pairs
        .par_iter()
        .map(|&(t, r)| {
            let p = kernel.density(t, r);
            let min_envelope = if r == 0.0 {
                t.powf(-n / alpha)
            } else {
                t.powf(-n / alpha).min(t * r.powf(-(n + alpha)))
            };
            let envelope = t / (t.powf(1.0 / alpha) + r).powf(n + alpha);
            BoundSample {
                t,
                r,
                p,
                min_envelope,
                envelope,
            }
        })
        .collect();

    let ext = |f: &dyn Fn(&BoundSample) -> f64, want_min: bool| -> Extremum {
        let mut best: Option<Extremum> = None;
        for s in &samples {
            let v = f(s);
            let better = match best {
                None => true,
                Some(b) => (want_min && v < b.ratio) || (!want_min && v > b.ratio),
            };
            if better {
                best = Some(Extremum {
                    t: s.t,
                    r: s.r,
                    ratio: v,
                });
            }
        }
        best.expect("non-empty samples")
    };
    let c1_at = ext(&|s| s.min_ratio(), true);
    let c2_at = ext(&|s| s.min_ratio(), false);
    let c3_at = ext(&|s| s.ratio(), true);
    let c4_at = ext(&|s| s.ratio(), false);
    for e in [c1_at, c2_at, c3_at, c4_at] {
        if !(e.ratio > 0.0 && e.ratio.is_finite()) {
            return Err(Error::Certification {
                check: "kernel-bounds".into(),
                detail: format!("degenerate ratio {} at t={}, r={}", e.ratio, e.t, e.r),
            });
        }
    }
    Ok(BoundReport {
        alpha,
        dim: kernel.dim(),
        c1: c1_at.ratio,
        c2: c2_at.ratio,
        c3: c3_at.ratio,
        c4: c4_at.ratio,
        sample_spec: spec.describe(),
        c1_at,
        c2_at,
        c3_at,
        c4_at,
        samples,
    })
}

/// Sources `|y| ≤ 1` and times `τ ∈ (0, 1]` for the ball-mass constant.
#[derive(Debug, Clone, PartialEq)]
pub struct BallSampleSpec {
    pub dists: Vec<f64>,
    pub taus: Vec<f64>,
}

impl Default for BallSampleSpec {
    fn default() -> Self {
        Self {
            dists: (0..=8).map(|j| j as f64 / 8.0).collect(),
            taus: log_space(1e-3, 1.0, 25),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallMassReport {
    pub rho: f64,
    pub c_tilde: f64,
    pub dist_at: f64,
    pub tau_at: f64,
}

/// `c̃ = inf ∫_{B_ρ(0)} p(τ, |x - y|) dx` over the sampled `(y, τ)`.
pub fn ball_mass_lower_bound(
    kernel: &StableKernel,
    rho: f64,
    spec: &BallSampleSpec,
) -> Result<BallMassReport> {
    if !(rho > 1.0) {
        return Err(param(format!("ball radius must exceed 1, got {rho}")));
    }
    if spec.dists.is_empty() || spec.taus.is_empty() {
        return Err(param("empty ball-mass sample set"));
    }
    if spec.dists.iter().any(|d| !(0.0..=1.0).contains(d))
        || spec.taus.iter().any(|t| !(*t > 0.0 && *t <= 1.0))
    {
        return Err(param("ball-mass samples need |y| <= 1 and tau in (0, 1]"));
    }
    let pairs: Vec<(f64, f64)> = spec
        .dists
        .iter()
        .flat_map(|&d| spec.taus.iter().map(move |&t| (d, t)))
        .collect();
    let masses = pairs
        .par_iter()
        .map(|&(d, t)| kernel.ball_mass(t, d, rho).map(|e| e.value))
        .collect::<Result<Vec<f64>>>()?;
    let (idx, c_tilde) =
        masses
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |(bi, bv), (i, v)| if v < bv { (i, v) } else { (bi, bv) },
            );
    if !(c_tilde > 0.0) {
        return Err(Error::Certification {
            check: "ball-mass".into(),
            detail: format!("non-positive ball mass {c_tilde}"),
        });
    }
    Ok(BallMassReport {
        rho,
        c_tilde,
        dist_at: pairs[idx].0,
        tau_at: pairs[idx].1,
    })
}
