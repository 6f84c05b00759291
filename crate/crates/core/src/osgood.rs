//! A one-parameter family of nonlinearities satisfying the Osgood condition
//! `∫_1^∞ ds / f(s) = ∞` while dominating `s^k` on a doubly exponential ladder.
//!
//! The ladder is `φ_{i+1} = φ_i^k` from a base `φ_0 > α^{1/(k-1)}`, and
//!
//! ```text
//! f(s) = (1 - φ0^{1-k}) s^k                 on J0 = [0, φ0]
//!      = φ_i - φ_{i-1}                       on I_i = (φ_{i-1}, φ_i / α]
//!      = linear from φ_i - φ_{i-1} to
//!        φ_{i+1} - φ_i                        on J_i = (φ_i / α, φ_i]
//! ```
//!
//! The comparison function `f̃` is 0 on `J0` and `φ_i - φ_{i-1}` on
//! `(φ_{i-1}, φ_i]`. Ladder values overflow `f64` after a handful of rungs,
//! so everything is stored as `ln φ_i`.

use serde::Serialize;

use crate::error::{param, Error, Result};

/// Hard cap on the number of rungs the ladder may be extended to.
pub const MAX_RUNGS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct OsgoodFamily {
    alpha: f64,
    k: f64,
    ln_phi: Vec<f64>,
    // φ_i by repeated powf while finite, +∞ afterwards.
    phi: Vec<f64>,
    i_max: usize,
}

/// Which piece of `f` a state value falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Piece {
    /// `J0 = [0, φ0]`
    Core,
    /// `I_i = (φ_{i-1}, φ_i / α]`
    Plateau(usize),
    /// `J_i = (φ_i / α, φ_i]`
    Ramp(usize),
}

pub fn build_family(alpha: f64, k: f64, phi0: f64, i_max: usize) -> Result<OsgoodFamily> {
    OsgoodFamily::new(alpha, k, phi0, i_max)
}

impl OsgoodFamily {
    pub fn new(alpha: f64, k: f64, phi0: f64, i_max: usize) -> Result<Self> {
        if !(alpha > 1.0 && alpha <= 2.0) {
            return Err(param(format!("alpha must lie in (1, 2], got {alpha}")));
        }
        if !(k > 1.0) || !k.is_finite() {
            return Err(param(format!("k must exceed 1, got {k}")));
        }
        if !(1..=MAX_RUNGS).contains(&i_max) {
            return Err(param(format!(
                "i_max must lie in [1, {MAX_RUNGS}], got {i_max}"
            )));
        }
        if !(phi0.is_finite() && phi0 > 0.0) || !((k - 1.0) * phi0.ln() > alpha.ln()) {
            return Err(Error::Admissibility(format!(
                "phi0 = {phi0} must exceed alpha^(1/(k-1)) = {}",
                alpha.powf(1.0 / (k - 1.0))
            )));
        }
        let mut ln_phi = Vec::with_capacity(i_max + 1);
        ln_phi.push(phi0.ln());
        let mut phi = Vec::with_capacity(i_max + 1);
        phi.push(phi0);
        for i in 0..i_max {
            ln_phi.push(k * ln_phi[i]);
            phi.push(phi[i].powf(k));
        }
        Ok(Self {
            alpha,
            k,
            ln_phi,
            phi,
            i_max,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn i_max(&self) -> usize {
        self.i_max
    }

    pub fn phi0(&self) -> f64 {
        self.phi[0]
    }

    /// `ln φ_i`, extending the ladder past `i_max` on demand.
    pub fn ln_phi(&self, i: usize) -> Result<f64> {
        if i <= self.i_max {
            return Ok(self.ln_phi[i]);
        }
        if i > MAX_RUNGS {
            return Err(Error::Range(format!(
                "ladder index {i} beyond cap {MAX_RUNGS}"
            )));
        }
        let mut v = self.ln_phi[self.i_max];
        for _ in self.i_max..i {
            v *= self.k;
        }
        if !v.is_finite() {
            return Err(Error::Range(format!("ln phi_{i} is not representable")));
        }
        Ok(v)
    }

    /// `φ_i`, or an overflow error carrying `ln φ_i`.
    pub fn phi(&self, i: usize) -> Result<f64> {
        if i <= self.i_max && self.phi[i].is_finite() {
            return Ok(self.phi[i]);
        }
        let l = self.ln_phi(i)?;
        finite_exp(l)
    }

    /// `ln(φ_i - φ_{i-1})` for `i ≥ 1`, computed as
    /// `ln φ_i + ln(1 - exp(ln φ_{i-1} - ln φ_i))`.
    pub fn ln_gap(&self, i: usize) -> Result<f64> {
        if i == 0 {
            return Err(Error::Range("gap index starts at 1".into()));
        }
        let hi = self.ln_phi(i)?;
        let lo = self.ln_phi(i - 1)?;
        Ok(hi + (-(lo - hi).exp_m1()).ln())
    }

    /// `φ_i - φ_{i-1}`.
    pub fn gap(&self, i: usize) -> Result<f64> {
        if i >= 1 && i <= self.i_max && self.phi[i].is_finite() {
            return Ok(self.phi[i] - self.phi[i - 1]);
        }
        finite_exp(self.ln_gap(i)?)
    }

    /// Locate the piece containing `s ≥ 0` (closed side at shared endpoints).
    pub fn piece(&self, s: f64) -> Result<Piece> {
        if !(s >= 0.0) {
            return Err(param(format!("state must be non-negative, got {s}")));
        }
        if s == 0.0 {
            return Ok(Piece::Core);
        }
        self.piece_ln(s.ln(), Some(s))
    }

    fn piece_ln(&self, ln_s: f64, s: Option<f64>) -> Result<Piece> {
        // Compare in linear space whenever the ladder value is finite.
        let le = |i: usize, ln_v: f64| -> bool {
            match (s, self.phi(i)) {
                (Some(s), Ok(v)) => s <= v,
                _ => ln_s <= ln_v,
            }
        };
        if le(0, self.ln_phi[0]) {
            return Ok(Piece::Core);
        }
        for i in 1..=MAX_RUNGS {
            let ln_phi = self.ln_phi(i)?;
            if le(i, ln_phi) {
                let ln_knee = ln_phi - self.alpha.ln();
                let on_plateau = match (s, self.phi(i)) {
                    (Some(s), Ok(p)) => s <= p / self.alpha,
                    _ => ln_s <= ln_knee,
                };
                return Ok(if on_plateau {
                    Piece::Plateau(i)
                } else {
                    Piece::Ramp(i)
                });
            }
        }
        Err(Error::Range(format!(
            "state exp({ln_s}) beyond the ladder cap"
        )))
    }

    /// `f(s)`.
    pub fn eval_f(&self, s: f64) -> Result<f64> {
        let piece = self.piece(s)?;
        if s == 0.0 {
            return Ok(0.0);
        }
        let linear = match piece {
            Piece::Core => {
                let d1 = self.gap(1);
                d1.map(|d1| d1 * (s / self.phi0()).powf(self.k))
            }
            Piece::Plateau(i) => self.gap(i),
            Piece::Ramp(i) => match (self.gap(i), self.gap(i + 1), self.phi(i)) {
                (Ok(d0), Ok(d1), Ok(p)) => {
                    let theta = self.ramp_position(s / p);
                    Ok(d0 + (d1 - d0) * theta)
                }
                _ => Err(Error::Overflow { ln_value: 0.0 }),
            },
        };
        match linear {
            Ok(v) if v.is_finite() => Ok(v),
            _ => {
                let ln_value = self.ln_f_ln(s.ln())?;
                finite_exp(ln_value)
            }
        }
    }

    fn ramp_position(&self, ratio: f64) -> f64 {
        let inv = 1.0 / self.alpha;
        ((ratio - inv) / (1.0 - inv)).clamp(0.0, 1.0)
    }

    /// `ln f(s)` from `ln s`; never overflows.
    pub fn ln_f_ln(&self, ln_s: f64) -> Result<f64> {
        if ln_s == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        if ln_s.is_nan() {
            return Err(param("state is NaN"));
        }
        match self.piece_ln(ln_s, None)? {
            Piece::Core => Ok(self.ln_gap(1)? + self.k * (ln_s - self.ln_phi[0])),
            Piece::Plateau(i) => self.ln_gap(i),
            Piece::Ramp(i) => {
                let theta = self.ramp_position((ln_s - self.ln_phi(i)?).exp());
                let (l0, l1) = (self.ln_gap(i)?, self.ln_gap(i + 1)?);
                let rho = (l0 - l1).exp();
                Ok(l1 + (rho * (1.0 - theta) + theta).ln())
            }
        }
    }

    /// `f̃(s)`.
    pub fn eval_f_tilde(&self, s: f64) -> Result<f64> {
        match self.piece(s)? {
            Piece::Core => Ok(0.0),
            Piece::Plateau(i) | Piece::Ramp(i) => {
                let l = self.ln_gap(i)?;
                finite_exp(l)
            }
        }
    }

    /// `ln f̃(s)` from `ln s` (`-∞` on the core piece).
    pub fn ln_f_tilde_ln(&self, ln_s: f64) -> Result<f64> {
        match self.piece_ln(ln_s, None)? {
            Piece::Core => Ok(f64::NEG_INFINITY),
            Piece::Plateau(i) | Piece::Ramp(i) => self.ln_gap(i),
        }
    }

    /// Slope of `f` on a piece: `k d_1 / φ0` at the right end of `J0`
    /// (its maximum), 0 on plateaus, and
    /// `α(φ_{i+1} - 2φ_i + φ_{i-1}) / ((α-1) φ_i)` on ramps.
    pub fn piece_slope(&self, piece: Piece) -> Result<f64> {
        match piece {
            Piece::Core => Ok(self.k * finite_exp(self.ln_gap(1)? - self.ln_phi[0])?),
            Piece::Plateau(_) => Ok(0.0),
            Piece::Ramp(i) => {
                let l1 = self.ln_gap(i + 1)?;
                let l0 = self.ln_gap(i)?;
                // (d_{i+1} - d_i) / (φ_i (1 - 1/α))
                let ln_num = l1 + (-(l0 - l1).exp_m1()).ln();
                finite_exp(ln_num - self.ln_phi(i)? - (1.0 - 1.0 / self.alpha).ln())
            }
        }
    }

    /// Terms `(1/α)(1 - (α-1)/(φ_{i-1}^{k-1} - 1))`, `i = 1..=N`, of the
    /// lower bound for `∫_1^∞ ds/f` restricted to the plateaus.
    pub fn osgood_terms(&self, count: usize) -> Result<Vec<f64>> {
        if count < 1 || count > self.i_max {
            return Err(Error::Range(format!(
                "term count must lie in [1, {}], got {count}",
                self.i_max
            )));
        }
        (1..=count)
            .map(|i| {
                let e = ((self.k - 1.0) * self.ln_phi(i - 1)?).exp_m1();
                Ok((1.0 - (self.alpha - 1.0) / e) / self.alpha)
            })
            .collect()
    }

    /// Partial sums of [`OsgoodFamily::osgood_terms`].
    pub fn osgood_partial_sums(&self, count: usize) -> Result<Vec<f64>> {
        let mut acc = 0.0;
        Ok(self
            .osgood_terms(count)?
            .into_iter()
            .map(|t| {
                acc += t;
                acc
            })
            .collect())
    }

    /// Cumulative `∫_1^{φ_N} ds / f(s)` for `N = 1..=count`: plateaus exactly,
    /// ramps and the core piece by composite trapezoid with `nodes` points.
    pub fn reciprocal_integral(&self, count: usize, nodes: usize) -> Result<Vec<f64>> {
        if count < 1 || count > self.i_max {
            return Err(Error::Range(format!(
                "piece count must lie in [1, {}]",
                self.i_max
            )));
        }
        let nodes = nodes.max(2);
        let phi0 = self.phi0();
        let inv = 1.0 / self.alpha;
        // Core piece on [1, φ0]: 1/f = (φ0/s)^k / d_1.
        let d1 = self.gap(1)?;
        let mut acc = trapezoid(|s| (phi0 / s).powf(self.k) / d1, 1.0, phi0, nodes);
        let mut out = Vec::with_capacity(count);
        for i in 1..=count {
            let (lp, lq) = (self.ln_phi(i)?, self.ln_phi(i - 1)?);
            let (l0, l1) = (self.ln_gap(i)?, self.ln_gap(i + 1)?);
            // Plateau: (φ_i/α - φ_{i-1}) / d_i.
            acc += (lp - l0).exp() * (inv - (lq - lp).exp());
            // Ramp: (φ_i / d_{i+1}) ∫_{1/α}^1 du / (ρ + (1-ρ)θ(u)), ρ = d_i/d_{i+1}.
            let rho = (l0 - l1).exp();
            let ramp = trapezoid(
                |u| 1.0 / (rho + (1.0 - rho) * self.ramp_position(u)),
                inv,
                1.0,
                nodes,
            );
            acc += (lp - l1).exp() * ramp;
            out.push(acc);
        }
        Ok(out)
    }

    /// Breakpoints `φ0, φ_i/α, φ_i` that are finite in `f64`, up to `i_max`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v = vec![self.phi0()];
        for i in 1..=self.i_max {
            let p = self.phi[i];
            if !p.is_finite() || p > 1e300 {
                break;
            }
            v.push(p / self.alpha);
            v.push(p);
        }
        v
    }

    /// One-sided values of `f` at each finite breakpoint, evaluated with the
    /// formula of the piece on each side.
    pub fn breakpoint_limits(&self) -> Result<Vec<(f64, f64, f64)>> {
        let mut out = Vec::new();
        let d1 = self.gap(1)?;
        // φ0: core formula d_1 (s/φ0)^k at s = φ0 against plateau value d_1.
        out.push((self.phi0(), d1 * 1f64.powf(self.k), d1));
        for i in 1..=self.i_max {
            let p = self.phi[i];
            if !p.is_finite() || p > 1e300 {
                break;
            }
            let (Ok(d0), Ok(dn)) = (self.gap(i), self.gap(i + 1)) else {
                break;
            };
            // Knee φ_i/α: plateau value against ramp at θ = 0.
            out.push((p / self.alpha, d0, d0 + (dn - d0) * 0.0));
            // φ_i: ramp at θ = 1 against the next plateau.
            out.push((p, d0 + (dn - d0) * 1.0, dn));
        }
        Ok(out)
    }
}

fn finite_exp(ln_value: f64) -> Result<f64> {
    let v = ln_value.exp();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow { ln_value })
    }
}

fn trapezoid<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, nodes: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / (nodes - 1) as f64;
    let mut s = 0.5 * (f(a) + f(b));
    for j in 1..nodes - 1 {
        s += f(a + h * j as f64);
    }
    s * h
}

/// Outcome of one sampled property.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    /// Smallest margin seen (positive when the property holds).
    pub slack: f64,
    /// Sample point with the smallest margin.
    pub worst_at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PieceSlope {
    pub piece: String,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub checks: Vec<PropertyCheck>,
    pub slopes: Vec<PieceSlope>,
    pub samples: usize,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Convert the first failing check into a certification error.
    pub fn into_result(self) -> Result<Self> {
        if let Some(c) = self.checks.iter().find(|c| !c.passed) {
            return Err(Error::Certification {
                check: c.name.clone(),
                detail: format!("violated at s = {} (margin {})", c.worst_at, c.slack),
            });
        }
        Ok(self)
    }
}

struct Tracker {
    name: &'static str,
    slack: f64,
    worst_at: f64,
}

impl Tracker {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            slack: f64::INFINITY,
            worst_at: f64::NAN,
        }
    }
    fn see(&mut self, margin: f64, at: f64) {
        if margin < self.slack || self.worst_at.is_nan() {
            self.slack = margin;
            self.worst_at = at;
        }
    }
    fn finish(self) -> PropertyCheck {
        PropertyCheck {
            name: self.name.into(),
            passed: self.slack >= 0.0,
            slack: self.slack,
            worst_at: self.worst_at,
        }
    }
}

/// Breakpoints plus `per_piece` log-spaced points inside each piece.
pub fn default_samples(family: &OsgoodFamily, per_piece: usize) -> Vec<f64> {
    let mut bps = vec![0.0, 1e-6];
    bps.extend(family.breakpoints());
    let mut out = Vec::new();
    for w in bps.windows(2) {
        let (a, b) = (w[0].max(1e-6), w[1]);
        out.push(w[0]);
        for j in 1..=per_piece {
            out.push(a * (b / a).powf(j as f64 / (per_piece + 1) as f64));
        }
    }
    out.push(*bps.last().unwrap());
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Check continuity, monotonicity, `f ≤ α^k s^k`, `f̃ ≤ f` and the per-piece
/// Lipschitz slopes on the given samples.
pub fn verify_f_properties(family: &OsgoodFamily, samples: &[f64]) -> Result<PropertyReport> {
    if samples.is_empty() {
        return Err(param("empty sample set"));
    }
    let mut s: Vec<f64> = samples.to_vec();
    if s.iter().any(|v| !(*v >= 0.0)) {
        return Err(param("samples must be non-negative"));
    }
    s.sort_by(f64::total_cmp);
    s.dedup();

    let mut continuity = Tracker::new("continuity");
    for (bp, left, right) in family.breakpoint_limits()? {
        continuity.see(-(left - right).abs(), bp);
    }

    let ln_ak = family.k * family.alpha.ln();
    let mut monotone = Tracker::new("monotone");
    let mut bound = Tracker::new("power-bound");
    let mut comparison = Tracker::new("f-tilde-below-f");
    let mut lipschitz = Tracker::new("piece-lipschitz");
    let mut prev: Option<(f64, f64, Option<f64>, Piece)> = None;
    for &x in &s {
        let lx = x.ln();
        let lf = family.ln_f_ln(lx)?;
        let lft = family.ln_f_tilde_ln(lx)?;
        let fx = family.eval_f(x).ok();
        if x > 0.0 {
            // Log margin of f ≤ α^k s^k.
            bound.see(ln_ak + family.k * lx - lf + 1e-12, x);
        }
        comparison.see(
            if lft == f64::NEG_INFINITY {
                0.0
            } else {
                lf - lft + 1e-12
            },
            x,
        );
        let piece = family.piece(x)?;
        if let Some((px, plf, pfx, pp)) = prev {
            monotone.see(if lf == plf { 0.0 } else { lf - plf + 1e-12 }, x);
            if let (Some(a), Some(b), true) = (pfx, fx, pp == piece) {
                let slope = (b - a) / (x - px);
                let cap = family.piece_slope(piece)?;
                let rounding = 8.0 * f64::EPSILON * b.abs().max(a.abs()) / (x - px);
                lipschitz.see(cap * (1.0 + 1e-9) + rounding - slope, x);
            }
        }
        prev = Some((x, lf, fx, piece));
    }

    let mut slopes = vec![PieceSlope {
        piece: "J0".into(),
        slope: family.piece_slope(Piece::Core)?,
    }];
    for i in 1..=family.i_max {
        match family.piece_slope(Piece::Ramp(i)) {
            Ok(v) => slopes.push(PieceSlope {
                piece: format!("J{i}"),
                slope: v,
            }),
            Err(_) => break,
        }
    }

    Ok(PropertyReport {
        checks: vec![
            continuity.finish(),
            monotone.finish(),
            bound.finish(),
            comparison.finish(),
            lipschitz.finish(),
        ],
        slopes,
        samples: s.len(),
    })
}
