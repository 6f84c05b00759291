//! Quadrature rules: adaptive Gauss–Kronrod (7/15) with global error control
//! and fixed Gauss–Legendre rules.
//!
//! Every routine here is deterministic: the subdivision order depends only on
//! the integrand values, never on timing or thread scheduling.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// An integral value together with an estimate of its absolute error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn new(value: f64, error: f64) -> Self {
        Self { value, error }
    }
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, rhs: Estimate) -> Estimate {
        Estimate::new(self.value + rhs.value, self.error + rhs.error)
    }
}

impl std::ops::AddAssign for Estimate {
    fn add_assign(&mut self, rhs: Estimate) {
        self.value += rhs.value;
        self.error += rhs.error;
    }
}

impl std::ops::Mul<f64> for Estimate {
    type Output = Estimate;
    fn mul(self, rhs: f64) -> Estimate {
        Estimate::new(self.value * rhs, self.error * rhs.abs())
    }
}

/// Single 15-point Kronrod evaluation on `[a, b]`.
///
/// Returns `(kronrod value, error estimate, integral of |f|)`.
pub fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let res_k = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g * half).abs()).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (res_k, err, res_abs)
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Globally adaptive Gauss–Kronrod integrator.
#[derive(Debug, Clone, Copy)]
pub struct Adaptive {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_segments: usize,
}

impl Default for Adaptive {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_segments: 4000,
        }
    }
}

impl Adaptive {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    pub fn with_max_segments(mut self, max_segments: usize) -> Self {
        self.max_segments = max_segments;
        self
    }

    /// Integrate over `[a, b]`, failing with an accuracy error when the
    /// tolerance cannot be met within the segment budget.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<Estimate> {
        self.integrate_breaks(f, &[a, b])
    }

    /// Integrate over consecutive panels `[p0, p1], [p1, p2], ...`.
    /// Break points must be non-decreasing; empty panels are skipped.
    pub fn integrate_breaks<F: Fn(f64) -> f64>(&self, f: F, points: &[f64]) -> Result<Estimate> {
        let (est, converged) = self.run(&f, points);
        if converged {
            Ok(est)
        } else {
            Err(Error::Accuracy {
                what: "adaptive quadrature".into(),
                achieved: est.error,
                requested: self.abs_tol.max(self.rel_tol * est.value.abs()),
            })
        }
    }

    /// Like [`Adaptive::integrate_breaks`] but always returns the best
    /// estimate, with a flag telling whether the tolerance was met.
    pub fn run<F: Fn(f64) -> f64>(&self, f: &F, points: &[f64]) -> (Estimate, bool) {
        let mut heap = BinaryHeap::new();
        let mut frozen = Estimate::default();
        let mut total = Estimate::default();
        for w in points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if !(b > a) {
                continue;
            }
            let (value, error, _) = gauss_kronrod_15(f, a, b);
            total += Estimate::new(value, error);
            heap.push(Segment { a, b, value, error });
        }
        let mut count = heap.len();
        loop {
            let tol = self.abs_tol.max(self.rel_tol * total.value.abs());
            if total.error <= tol || !total.error.is_finite() && !total.value.is_finite() {
                break;
            }
            let Some(seg) = heap.pop() else { break };
            let mid = 0.5 * (seg.a + seg.b);
            let width = seg.b - seg.a;
            if count >= self.max_segments
                || width <= 4.0 * f64::EPSILON * mid.abs().max(f64::MIN_POSITIVE)
                || mid <= seg.a
                || mid >= seg.b
            {
                // Cannot refine further: freeze this segment.
                frozen += Estimate::new(seg.value, seg.error);
                if count >= self.max_segments {
                    for s in heap.drain() {
                        frozen += Estimate::new(s.value, s.error);
                    }
                    break;
                }
                continue;
            }
            let (v1, e1, _) = gauss_kronrod_15(f, seg.a, mid);
            let (v2, e2, _) = gauss_kronrod_15(f, mid, seg.b);
            total.value += v1 + v2 - seg.value;
            total.error += e1 + e2 - seg.error;
            heap.push(Segment {
                a: seg.a,
                b: mid,
                value: v1,
                error: e1,
            });
            heap.push(Segment {
                a: mid,
                b: seg.b,
                value: v2,
                error: e2,
            });
            count += 1;
        }
        // Re-sum for a clean total (avoids drift from incremental updates).
        let mut sum = frozen;
        let mut segs: Vec<Segment> = heap.into_vec();
        segs.sort_by(|x, y| x.a.total_cmp(&y.a));
        for s in segs {
            sum += Estimate::new(s.value, s.error);
        }
        let tol = self.abs_tol.max(self.rel_tol * sum.value.abs());
        (sum, sum.error <= tol * 1.000_001 && sum.value.is_finite())
    }

    /// Integrate over `[a, ∞)` through the map `x = a + u / (1 - u)`.
    pub fn integrate_to_infinity<F: Fn(f64) -> f64>(&self, f: F, a: f64) -> Result<Estimate> {
        let g = |u: f64| {
            if u >= 1.0 {
                return 0.0;
            }
            let one_minus = 1.0 - u;
            let x = a + u / one_minus;
            let v = f(x) / (one_minus * one_minus);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        self.integrate(g, 0.0, 1.0)
    }
}

/// Fixed `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        for i in 0..m {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, z);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + h * x))
            .sum::<f64>()
            * h
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Wynn's epsilon algorithm applied to a sequence of partial sums; returns the
/// extrapolated limit and a crude error estimate.
pub fn wynn_epsilon(partial_sums: &[f64]) -> Option<(f64, f64)> {
    let n = partial_sums.len();
    if n < 3 {
        return None;
    }
    let mut prev = vec![0.0; n + 1];
    let mut cur: Vec<f64> = partial_sums.to_vec();
    let mut best: Option<(f64, f64)> = None;
    let mut last_even: Option<f64> = None;
    let mut k = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for j in 0..cur.len() - 1 {
            let diff = cur[j + 1] - cur[j];
            if diff == 0.0 {
                return best.or(Some((cur[j + 1], 0.0)));
            }
            next.push(prev[j + 1] + 1.0 / diff);
        }
        prev = cur;
        cur = next;
        k += 1;
        if k % 2 == 0 {
            let v = *cur.last().unwrap();
            if !v.is_finite() {
                break;
            }
            let err = last_even.map_or(f64::INFINITY, |p| (v - p).abs());
            if best.is_none_or(|(_, e)| err < e) {
                best = Some((v, err));
            }
            last_even = Some(v);
        }
    }
    best
}
