//! Exact flows of the scalar reaction `u' = f(u)`.
//!
//! Every nonlinearity used by the simulator is piecewise a power, a constant
//! or an affine function, so the flow over a step is available in closed form
//! and is order preserving without any step-size restriction.

use crate::error::{Error, Result};
use crate::osgood::OsgoodFamily;

/// Largest state the simulator will carry before flagging overflow.
pub const STATE_CEILING: f64 = 1e300;

/// Result of flowing a state forward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Flow {
    Value(f64),
    /// The solution leaves every bounded set `after` this much time.
    BlowUp {
        after: f64,
    },
}

pub trait Reaction: Sync {
    fn eval(&self, u: f64) -> f64;

    /// `u(h)` for `u' = f(u)`, `u(0) = u`.
    fn flow(&self, u: f64, h: f64) -> Flow;

    /// States above this value are reported as overflow.
    fn ceiling(&self) -> f64 {
        STATE_CEILING
    }

    fn name(&self) -> &'static str;
}

/// `f ≡ 0`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Linear;

impl Reaction for Linear {
    fn eval(&self, _u: f64) -> f64 {
        0.0
    }

    fn flow(&self, u: f64, _h: f64) -> Flow {
        Flow::Value(u)
    }

    fn name(&self) -> &'static str {
        "linear"
    }
}

/// `f(u) = u^k`, `k > 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub k: f64,
}

impl PowerLaw {
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 1.0) || !k.is_finite() {
            return Err(Error::Parameter(format!("power must exceed 1, got {k}")));
        }
        Ok(Self { k })
    }
}

impl Reaction for PowerLaw {
    fn eval(&self, u: f64) -> f64 {
        u.powf(self.k)
    }

    fn flow(&self, u: f64, h: f64) -> Flow {
        power_flow(1.0, self.k, u, h)
    }

    fn name(&self) -> &'static str {
        "power-law"
    }
}

/// `u' = c u^k`.
fn power_flow(c: f64, k: f64, u: f64, h: f64) -> Flow {
    if u <= 0.0 || h == 0.0 {
        return Flow::Value(u);
    }
    let base = u.powf(1.0 - k);
    let rate = (k - 1.0) * c;
    let rest = base - rate * h;
    if rest <= 0.0 {
        return Flow::BlowUp { after: base / rate };
    }
    let v = rest.powf(-1.0 / (k - 1.0));
    if v.is_finite() {
        Flow::Value(v)
    } else {
        Flow::BlowUp { after: base / rate }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    /// `c s^k`
    Power { c: f64, k: f64 },
    /// `d`
    Constant { d: f64 },
    /// `a + b s`
    Affine { a: f64, b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Segment {
    hi: f64,
    shape: Shape,
}

impl Segment {
    fn eval(&self, s: f64) -> f64 {
        match self.shape {
            Shape::Power { c, k } => c * s.powf(k),
            Shape::Constant { d } => d,
            Shape::Affine { a, b } => a + b * s,
        }
    }

    /// Time to travel from `u` to `hi`.
    fn exit_time(&self, u: f64) -> f64 {
        if u >= self.hi {
            return 0.0;
        }
        match self.shape {
            Shape::Power { c, k } => {
                if u <= 0.0 {
                    f64::INFINITY
                } else {
                    (u.powf(1.0 - k) - self.hi.powf(1.0 - k)) / ((k - 1.0) * c)
                }
            }
            Shape::Constant { d } => (self.hi - u) / d,
            Shape::Affine { a, b } => ((self.hi - u) * b / (a + b * u)).ln_1p() / b,
        }
    }

    /// State after time `h`, which must not exceed the exit time.
    fn advance(&self, u: f64, h: f64) -> f64 {
        let v = match self.shape {
            Shape::Power { c, k } => match power_flow(c, k, u, h) {
                Flow::Value(v) => v,
                Flow::BlowUp { .. } => self.hi,
            },
            Shape::Constant { d } => u + d * h,
            Shape::Affine { a, b } => u + (a + b * u) * (b * h).exp_m1() / b,
        };
        v.min(self.hi)
    }
}

/// The Osgood family as a reaction term, tabulated up to the highest rung
/// whose coefficients are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct OsgoodReaction {
    segments: Vec<Segment>,
    ceiling: f64,
}

impl OsgoodReaction {
    pub fn new(family: &OsgoodFamily) -> Result<Self> {
        let alpha = family.alpha();
        let k = family.k();
        let phi0 = family.phi0();
        let d1 = family.gap(1)?;
        let mut segments = vec![Segment {
            hi: phi0,
            shape: Shape::Power {
                c: d1 / phi0.powf(k),
                k,
            },
        }];
        for i in 1..=family.i_max() {
            let (Ok(phi), Ok(d), Ok(d_next)) = (family.phi(i), family.gap(i), family.gap(i + 1))
            else {
                break;
            };
            if phi > STATE_CEILING {
                break;
            }
            // f = d + (d_next - d)(s/φ - 1/α)/(1 - 1/α) on the ramp.
            let b = (d_next - d) / (phi * (1.0 - 1.0 / alpha));
            let a = d - b * phi / alpha;
            if !b.is_finite() || !a.is_finite() {
                break;
            }
            segments.push(Segment {
                hi: phi / alpha,
                shape: Shape::Constant { d },
            });
            segments.push(Segment {
                hi: phi,
                shape: Shape::Affine { a, b },
            });
        }
        let ceiling = segments.last().map(|s| s.hi).unwrap_or(phi0);
        Ok(Self { segments, ceiling })
    }

    fn locate(&self, u: f64) -> Option<usize> {
        let j = self.segments.partition_point(|s| s.hi < u);
        (j < self.segments.len()).then_some(j)
    }
}

impl Reaction for OsgoodReaction {
    fn eval(&self, u: f64) -> f64 {
        match self.locate(u) {
            Some(j) => self.segments[j].eval(u),
            None => f64::INFINITY,
        }
    }

    fn flow(&self, u: f64, h: f64) -> Flow {
        if u <= 0.0 {
            return Flow::Value(u);
        }
        let Some(mut j) = self.locate(u) else {
            return Flow::Value(u);
        };
        let mut u = u;
        let mut left = h;
        loop {
            let seg = &self.segments[j];
            let exit = seg.exit_time(u);
            if exit > left {
                return Flow::Value(seg.advance(u, left));
            }
            left -= exit;
            u = seg.hi;
            j += 1;
            if j == self.segments.len() {
                // Past the tabulated ladder: report the state at the top.
                return Flow::Value(f64::INFINITY);
            }
        }
    }

    fn ceiling(&self) -> f64 {
        self.ceiling
    }

    fn name(&self) -> &'static str {
        "osgood"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::osgood::build_family;

    fn rk4<F: Fn(f64) -> f64>(f: F, mut u: f64, t: f64, steps: usize) -> f64 {
        let h = t / steps as f64;
        for _ in 0..steps {
            let k1 = f(u);
            let k2 = f(u + 0.5 * h * k1);
            let k3 = f(u + 0.5 * h * k2);
            let k4 = f(u + h * k3);
            u += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        }
        u
    }

    #[test]
    fn power_law_blow_up_time() {
        let p = PowerLaw::new(3.0).unwrap();
        // u' = u^3 from 2 blows up at 1/(2·4).
        assert_eq!(p.flow(2.0, 1.0), Flow::BlowUp { after: 0.125 });
        let Flow::Value(v) = p.flow(2.0, 0.1) else {
            panic!()
        };
        assert!((v - 2.0 / (1.0f64 - 0.8).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn osgood_eval_matches_family() {
        let fam = build_family(1.5, 3.0, 2.0, 6).unwrap();
        let r = OsgoodReaction::new(&fam).unwrap();
        for &s in &[
            0.0, 0.3, 2.0, 3.0, 5.5, 7.9, 8.0, 100.0, 400.0, 1e6, 1e8, 1.2e8,
        ] {
            let want = fam.eval_f(s).unwrap();
            let got = r.eval(s);
            assert!(
                (got - want).abs() <= 1e-13 * want.max(1.0),
                "{s}: {got} {want}"
            );
        }
        // φ_5 = 2^243 is the last rung with a finite next gap.
        assert_eq!(r.ceiling(), 2f64.powi(243));
    }

    #[test]
    fn osgood_flow_matches_rk4_across_pieces() {
        let fam = build_family(1.5, 3.0, 2.0, 6).unwrap();
        let r = OsgoodReaction::new(&fam).unwrap();
        let f = |s: f64| fam.eval_f(s).unwrap();
        for &(u, t) in &[
            (0.5, 0.5),
            (1.9, 0.05),
            (5.0, 0.5),
            (7.0, 0.1),
            (300.0, 0.4),
        ] {
            let Flow::Value(got) = r.flow(u, t) else {
                panic!()
            };
            let want = rk4(f, u, t, 4_000_000);
            assert!((got - want).abs() < 1e-8 * want, "{u},{t}: {got} {want}");
        }
    }

    #[test]
    fn flows_compose() {
        let fam = build_family(1.5, 2.0, 2.0, 8).unwrap();
        let r = OsgoodReaction::new(&fam).unwrap();
        let Flow::Value(a) = r.flow(1.0, 0.7) else {
            panic!()
        };
        let Flow::Value(b) = r.flow(1.0, 0.3) else {
            panic!()
        };
        let Flow::Value(c) = r.flow(b, 0.4) else {
            panic!()
        };
        assert!((a - c).abs() < 1e-12 * a);
    }
}
