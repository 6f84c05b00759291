//! Experiment configuration: JSON file, flag overrides, validation and hash.

use std::fmt;
use std::path::Path;

use fracheat_core::admissible_params;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Exponents shared by every block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Model {
    /// Space dimension.
    pub n: usize,
    pub q: f64,
    pub alpha: f64,
    pub k: f64,
}

impl Default for Model {
    fn default() -> Self {
        Self {
            n: 1,
            q: 1.0,
            alpha: 1.5,
            k: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelBlock {
    /// Log-spaced radii in the comparability sample.
    pub radii: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub times: Vec<f64>,
    /// Times at which the total mass is checked.
    pub mass_times: Vec<f64>,
}

impl Default for KernelBlock {
    fn default() -> Self {
        Self {
            radii: 400,
            r_min: 1e-4,
            r_max: 1e4,
            times: vec![1.0],
            mass_times: vec![0.01, 1.0, 100.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OsgoodBlock {
    pub phi0: f64,
    pub i_max: usize,
    /// Log-uniform random samples for the global bounds.
    pub samples: usize,
    pub seed: u64,
    /// Trapezoid nodes per piece for `∫ ds / f`.
    pub trapezoid_nodes: usize,
}

impl Default for OsgoodBlock {
    fn default() -> Self {
        Self {
            phi0: 2.0,
            i_max: 64,
            samples: 10_000,
            seed: 0,
            trapezoid_nodes: 2001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SemigroupBlock {
    /// Singularity exponent; with `gamma`, defaults to the admissible midpoint.
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    /// Support radius `R` of the datum.
    pub radius: f64,
    /// `M` and the origin growth use `t_count` log-spaced times on `[t_min, 1]`.
    pub t_min: f64,
    pub t_count: usize,
    pub mass_times: Vec<f64>,
    /// Level of the lower-bound certificate.
    pub phi: f64,
    pub level_times: usize,
    pub level_radii: usize,
    pub level_decades: f64,
}

impl Default for SemigroupBlock {
    fn default() -> Self {
        Self {
            beta: None,
            gamma: None,
            radius: 2.0,
            t_min: 1e-3,
            t_count: 60,
            mass_times: vec![0.01, 0.1, 1.0],
            phi: 2.0,
            level_times: 20,
            level_radii: 20,
            level_decades: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReactionKind {
    Osgood,
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlowupBlock {
    /// Truncation levels `N`.
    pub n_list: Vec<f64>,
    /// Observation time.
    pub t0: f64,
    pub steps: usize,
    pub first_step: f64,
    pub min_points: usize,
    /// Radius of the ball for the divergence bounds.
    pub rho: f64,
    /// Radius of the ball for the simulated local mass.
    pub observe_radius: f64,
    /// Ladder indices scanned past the threshold.
    pub rungs: usize,
    pub reaction: ReactionKind,
    /// Also run the pure power law `u^k` for comparison.
    pub contrast: bool,
}

impl Default for BlowupBlock {
    fn default() -> Self {
        Self {
            n_list: vec![10.0, 100.0, 1000.0, 10_000.0],
            t0: 0.05,
            steps: 300,
            first_step: 1e-7,
            min_points: 1 << 14,
            rho: 2.0,
            observe_radius: 1.0,
            rungs: 8,
            reaction: ReactionKind::Osgood,
            contrast: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Common {
    /// Worker threads; `null` uses every core.
    pub jobs: Option<usize>,
    pub out: String,
}

impl Default for Common {
    fn default() -> Self {
        Self {
            jobs: None,
            out: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub model: Model,
    pub kernel: KernelBlock,
    pub osgood: OsgoodBlock,
    pub semigroup: SemigroupBlock,
    pub blowup: BlowupBlock,
    pub common: Common,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError(pub String);

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One failed precondition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
    /// Breaks a structural hypothesis rather than a plain range.
    pub admissibility: bool,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = if self.admissibility {
            "admissibility"
        } else {
            "invalid"
        };
        write!(f, "{kind}: {}: {}", self.field, self.message)
    }
}

/// Which blocks a command needs.
#[derive(Debug, Clone, Copy, Default)]
pub struct Needs {
    pub kernel: bool,
    pub osgood: bool,
    pub semigroup: bool,
    pub blowup: bool,
    pub simulate: bool,
}

/// `(β, γ, ε)` after filling defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponents {
    pub beta: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

impl Config {
    /// Parse JSON text; errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self, ParseError> {
        serde_json::from_str(text).map_err(|e| ParseError(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, ParseError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ParseError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
            .map_err(|e| ParseError(format!("{}: {}", path.display(), &e.0["config: ".len()..])))
    }

    /// Set the value at a dotted `path` such as `blowup.t0`.
    pub fn set(&mut self, path: &str, value: Value) -> Result<(), ParseError> {
        let mut root = serde_json::to_value(&*self).expect("config serializes");
        let mut node = &mut root;
        let parts: Vec<&str> = path.split('.').collect();
        for (j, part) in parts.iter().enumerate() {
            let obj = node
                .as_object_mut()
                .ok_or_else(|| ParseError(format!("override `{path}`: `{part}` is not a block")))?;
            if j + 1 == parts.len() {
                if !obj.contains_key(*part) {
                    return Err(ParseError(format!(
                        "override `{path}`: unknown field `{part}`"
                    )));
                }
                obj.insert(part.to_string(), value.clone());
                break;
            }
            node = obj
                .get_mut(*part)
                .ok_or_else(|| ParseError(format!("override `{path}`: unknown block `{part}`")))?;
        }
        *self = serde_json::from_value(root)
            .map_err(|e| ParseError(format!("override `{path}` = {value}: {e}")))?;
        Ok(())
    }

    /// `key=value` with `value` read as JSON, or as a string when it is not JSON.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ParseError> {
        let (key, raw) = pair
            .split_once('=')
            .ok_or_else(|| ParseError(format!("override `{pair}` is not of the form key=value")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.into()));
        self.set(key.trim(), value)
    }

    /// Everything that can change a result: the config without `common`.
    pub fn experiment(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().unwrap().remove("common");
        v
    }

    /// SHA-256 of the compact JSON of [`Config::experiment`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.experiment().to_string().as_bytes()))
    }

    pub fn exponents(&self) -> Result<Exponents, Vec<Violation>> {
        let m = &self.model;
        let (beta, gamma) = match (self.semigroup.beta, self.semigroup.gamma) {
            (Some(b), Some(g)) => (b, g),
            (None, None) => admissible_params(m.n, m.q, m.alpha, m.k).map_err(|e| {
                vec![violation(
                    "model.k",
                    format!("no admissible (beta, gamma): {e}"),
                    true,
                )]
            })?,
            _ => {
                return Err(vec![violation(
                    "semigroup.beta",
                    "beta and gamma must be given together or both left null",
                    false,
                )])
            }
        };
        let n = m.n as f64;
        let epsilon = m.k - (n * gamma + 1.0) / (beta * gamma);
        Ok(Exponents {
            beta,
            gamma,
            epsilon,
        })
    }

    /// Every violated precondition of the blocks in `needs`.
    pub fn validate(&self, needs: Needs) -> Vec<Violation> {
        let mut v = Vec::new();
        let m = &self.model;
        let n = m.n as f64;
        if !(1..=3).contains(&m.n) {
            v.push(violation(
                "model.n",
                format!("must be 1, 2 or 3, got {}", m.n),
                false,
            ));
        }
        if !(m.alpha > 1.0 && m.alpha <= 2.0) {
            v.push(violation(
                "model.alpha",
                format!("must lie in (1, 2], got {}", m.alpha),
                false,
            ));
        }
        if !(m.q >= 1.0 && m.q.is_finite()) {
            v.push(violation(
                "model.q",
                format!("must be at least 1, got {}", m.q),
                false,
            ));
        }
        if !(m.k > 1.0 && m.k.is_finite()) {
            v.push(violation(
                "model.k",
                format!("must exceed 1, got {}", m.k),
                false,
            ));
        }
        if let Some(j) = self.common.jobs {
            if j == 0 {
                v.push(violation("common.jobs", "must be at least 1", false));
            }
        }
        let base_ok = v.is_empty();

        if needs.kernel {
            let b = &self.kernel;
            if m.alpha >= 2.0 {
                v.push(violation(
                    "model.alpha",
                    "the comparability bounds need alpha < 2",
                    false,
                ));
            }
            if b.radii < 2 {
                v.push(violation("kernel.radii", "need at least 2 radii", false));
            }
            if !(b.r_min > 0.0 && b.r_max > b.r_min && b.r_max.is_finite()) {
                v.push(violation(
                    "kernel.r_min",
                    format!("need 0 < r_min < r_max, got [{}, {}]", b.r_min, b.r_max),
                    false,
                ));
            }
            positive_list(&mut v, "kernel.times", &b.times);
            positive_list(&mut v, "kernel.mass_times", &b.mass_times);
        }

        if needs.osgood {
            let o = &self.osgood;
            if base_ok {
                let bound = m.alpha.powf(1.0 / (m.k - 1.0));
                if !(o.phi0.is_finite() && o.phi0 > 0.0 && (m.k - 1.0) * o.phi0.ln() > m.alpha.ln())
                {
                    v.push(violation(
                        "osgood.phi0",
                        format!("phi0 = {} must exceed alpha^(1/(k-1)) = {bound}", o.phi0),
                        true,
                    ));
                }
            }
            if !(1..=fracheat_core::osgood::MAX_RUNGS).contains(&o.i_max) {
                v.push(violation(
                    "osgood.i_max",
                    format!(
                        "must lie in [1, {}], got {}",
                        fracheat_core::osgood::MAX_RUNGS,
                        o.i_max
                    ),
                    false,
                ));
            }
            if o.samples == 0 {
                v.push(violation(
                    "osgood.samples",
                    "need at least one sample",
                    false,
                ));
            }
            if o.trapezoid_nodes < 2 {
                v.push(violation(
                    "osgood.trapezoid_nodes",
                    "need at least 2 nodes",
                    false,
                ));
            }
        }

        if needs.semigroup || needs.blowup || needs.simulate {
            let s = &self.semigroup;
            if !(s.radius > 1.0 && s.radius.is_finite()) {
                v.push(violation(
                    "semigroup.radius",
                    format!("must exceed 1, got {}", s.radius),
                    false,
                ));
            }
            if base_ok {
                match self.exponents() {
                    Err(mut e) => v.append(&mut e),
                    Ok(x) => {
                        if !(x.beta > 0.0 && x.beta * m.q < n) {
                            v.push(violation(
                                "semigroup.beta",
                                format!(
                                    "beta = {} must lie in (0, n/q) = (0, {})",
                                    x.beta,
                                    n / m.q
                                ),
                                true,
                            ));
                        }
                        if !(x.gamma > 0.0 && x.gamma * m.alpha < 1.0) {
                            v.push(violation(
                                "semigroup.gamma",
                                format!("gamma = {} must lie in (0, 1/alpha)", x.gamma),
                                true,
                            ));
                        }
                        if needs.blowup || needs.simulate {
                            if !(m.k > m.q * (1.0 + m.alpha / n)) {
                                v.push(violation(
                                    "model.k",
                                    format!(
                                        "k = {} must exceed q (1 + alpha/n) = {}",
                                        m.k,
                                        m.q * (1.0 + m.alpha / n)
                                    ),
                                    true,
                                ));
                            }
                            if !(m.k * x.beta > n + m.alpha) {
                                v.push(violation(
                                    "semigroup.beta",
                                    format!("k beta = {} must exceed n + alpha", m.k * x.beta),
                                    true,
                                ));
                            }
                            if !(x.epsilon > 0.0) {
                                v.push(violation(
                                    "semigroup.gamma",
                                    format!("epsilon = k - (n gamma + 1)/(beta gamma) = {} must be positive", x.epsilon),
                                    true,
                                ));
                            }
                        }
                    }
                }
            }
        }

        if needs.semigroup {
            let s = &self.semigroup;
            if !(s.t_min > 0.0 && s.t_min < 1.0) {
                v.push(violation(
                    "semigroup.t_min",
                    format!("must lie in (0, 1), got {}", s.t_min),
                    false,
                ));
            }
            if s.t_count < 2 {
                v.push(violation(
                    "semigroup.t_count",
                    "need at least 2 times",
                    false,
                ));
            }
            positive_list(&mut v, "semigroup.mass_times", &s.mass_times);
            if !(s.phi > 0.0 && s.phi.is_finite()) {
                v.push(violation(
                    "semigroup.phi",
                    format!("must be positive, got {}", s.phi),
                    false,
                ));
            }
            if s.level_times == 0 || s.level_radii == 0 {
                v.push(violation(
                    "semigroup.level_times",
                    "need at least one time and one radius",
                    false,
                ));
            }
            if !(s.level_decades > 0.0 && s.level_decades.is_finite()) {
                v.push(violation(
                    "semigroup.level_decades",
                    "must be positive",
                    false,
                ));
            }
        }

        if needs.blowup || needs.simulate {
            let b = &self.blowup;
            if !(b.t0 > 0.0 && b.t0 < 1.0) {
                v.push(violation(
                    "blowup.t0",
                    format!("must lie in (0, 1), got {}", b.t0),
                    false,
                ));
            }
        }

        if (needs.kernel || needs.blowup) && !(self.blowup.rho > 1.0 && self.blowup.rho.is_finite())
        {
            v.push(violation(
                "blowup.rho",
                format!("must exceed 1, got {}", self.blowup.rho),
                false,
            ));
        }

        if needs.blowup {
            let b = &self.blowup;
            if b.rungs < 2 {
                v.push(violation(
                    "blowup.rungs",
                    "need at least 2 rungs to fit a slope",
                    false,
                ));
            }
        }

        if needs.simulate {
            let b = &self.blowup;
            if m.n != 1 {
                v.push(violation(
                    "model.n",
                    "the simulator is one-dimensional",
                    false,
                ));
            }
            if b.n_list.is_empty() {
                v.push(violation(
                    "blowup.n_list",
                    "need at least one truncation level",
                    false,
                ));
            }
            positive_list(&mut v, "blowup.n_list", &b.n_list);
            if b.n_list.windows(2).any(|w| !(w[1] > w[0])) {
                v.push(violation(
                    "blowup.n_list",
                    "levels must be strictly increasing",
                    false,
                ));
            }
            if b.steps == 0 {
                v.push(violation("blowup.steps", "need at least one step", false));
            }
            if !(b.first_step > 0.0 && b.first_step * b.steps as f64 <= b.t0) {
                v.push(violation(
                    "blowup.first_step",
                    format!(
                        "need 0 < first_step * steps <= t0, got {} * {}",
                        b.first_step, b.steps
                    ),
                    false,
                ));
            }
            if b.min_points < 8 {
                v.push(violation(
                    "blowup.min_points",
                    "need at least 8 points",
                    false,
                ));
            }
            if !(b.observe_radius > 0.0 && b.observe_radius.is_finite()) {
                v.push(violation(
                    "blowup.observe_radius",
                    "must be positive",
                    false,
                ));
            }
        }
        v
    }
}

fn violation(field: &str, message: impl Into<String>, admissibility: bool) -> Violation {
    Violation {
        field: field.into(),
        message: message.into(),
        admissibility,
    }
}

fn positive_list(v: &mut Vec<Violation>, field: &str, xs: &[f64]) {
    if xs.is_empty() {
        v.push(violation(field, "must not be empty", false));
    } else if let Some(bad) = xs.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        v.push(violation(
            field,
            format!("entries must be positive and finite, got {bad}"),
            false,
        ));
    }
}
