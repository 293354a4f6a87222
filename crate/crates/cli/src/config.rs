//! Run configuration, read from JSON with field-path diagnostics.

use serde::{Deserialize, Serialize};
use std::path::Path;
use wolff_core::bounds::{BoundOptions, BoundSpec, HessianExponent, NeumannSpec};
use wolff_core::capacity::{AinfSampling, BallSampling, WeakAinfParams};
use wolff_core::measures::spec::MeasureSpec;
use wolff_core::oracle::IterationSpec;
use wolff_core::potentials::Branch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Potential,
    Capacity,
    Carleson,
    Supersolution,
    Lowerbound,
    Bilateral,
    Gauge,
    Hessian,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Potential => "potential",
            Command::Capacity => "capacity",
            Command::Carleson => "carleson",
            Command::Supersolution => "supersolution",
            Command::Lowerbound => "lowerbound",
            Command::Bilateral => "bilateral",
            Command::Gauge => "gauge",
            Command::Hessian => "hessian",
        }
    }
}

/// Evaluation points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PointSpec {
    List(Vec<Vec<f64>>),
    /// Uniform in an annulus around `center`; needs a seed.
    Random {
        count: usize,
        #[serde(default)]
        center: Option<Vec<f64>>,
        radius: f64,
        #[serde(default)]
        r_min: f64,
    },
    /// Geometric spacing along a ray, for radial comparisons.
    Ray {
        #[serde(default)]
        center: Option<Vec<f64>>,
        direction: Vec<f64>,
        r_min: f64,
        r_max: f64,
        count: usize,
    },
}

impl Default for PointSpec {
    fn default() -> Self {
        PointSpec::List(Vec::new())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialKind {
    Riesz { alpha: f64 },
    Wolff { beta: f64, s: f64 },
    /// `W_{1,p}` with the run's `p`.
    WolffP,
    /// `I_p` with the run's `p`.
    RieszP,
}

impl Default for PotentialKind {
    fn default() -> Self {
        PotentialKind::WolffP
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    Sigma,
    #[default]
    Omega,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialSection {
    pub kind: PotentialKind,
    pub measure: Which,
    /// `null` means untruncated.
    pub r_trunc: Option<f64>,
    /// Bracket each value by brute-force quadrature.
    pub brute_force: bool,
    pub brute_per_octave: usize,
    /// Also report `V_{B(c,r)}σ` at each point.
    pub local_v: Option<LocalVSection>,
}

impl Default for PotentialSection {
    fn default() -> Self {
        PotentialSection {
            kind: PotentialKind::default(),
            measure: Which::default(),
            r_trunc: None,
            brute_force: true,
            brute_per_octave: wolff_core::oracle::BRUTE_MIN_PER_OCTAVE,
            local_v: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalVSection {
    pub center: Vec<f64>,
    pub radius: f64,
    #[serde(default)]
    pub branch: Option<Branch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AinfSection {
    pub params: WeakAinfParams,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub sampling: AinfSampling,
}

fn default_trials() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacitySection {
    pub sampling: BallSampling,
    /// Pass iff the measured ball constant is at most this.
    pub threshold: Option<f64>,
    pub multiplier: bool,
    pub weak_ainf: Option<AinfSection>,
    /// Morrey exponent `ε` applied to ω.
    pub morrey_eps: Option<f64>,
}

impl Default for CapacitySection {
    fn default() -> Self {
        CapacitySection { sampling: BallSampling::default(), threshold: None, multiplier: false, weak_ainf: None, morrey_eps: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarlesonSection {
    pub max_level: i32,
    pub depth: u32,
    /// Exponents of the embedding check, run with `f = 1 + |x|`.
    pub s_values: Vec<f64>,
    pub duality: Option<DualitySection>,
}

impl Default for CarlesonSection {
    fn default() -> Self {
        CarlesonSection { max_level: 1, depth: 5, s_values: vec![1.5, 2.0, 3.0], duality: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualitySection {
    pub s: f64,
    #[serde(default = "default_dual_trials")]
    pub trials: usize,
}

fn default_dual_trials() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailSection {
    pub x0: Vec<f64>,
    pub radius: f64,
    #[serde(default = "one")]
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupersolutionSection {
    pub tail: Option<TailSection>,
    /// Recompute `C*` with doubled quadrature and bound the drift.
    pub refinement_check: bool,
    pub max_refinement_drift: f64,
}

impl Default for SupersolutionSection {
    fn default() -> Self {
        SupersolutionSection { tail: None, refinement_check: true, max_refinement_drift: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct LowerboundSection {
    pub neumann: NeumannSpec,
    /// Localization ball `B(x0, R)` for σ̃ and ω̃; `None` keeps everything.
    pub localize: Option<TailSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BilateralSection {
    pub c_lower: f64,
    pub c_upper: f64,
    /// Fail unless `lower ≤ oracle ≤ upper` at every point.
    pub assert_sandwich: bool,
    pub oracle_per_octave: usize,
    pub iteration: IterationSpec,
}

impl Default for BilateralSection {
    fn default() -> Self {
        BilateralSection { c_lower: 1.0, c_upper: 1.0, assert_sandwich: false, oracle_per_octave: 64, iteration: IterationSpec::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaugeSection {
    pub iteration: IterationSpec,
    pub per_octave: usize,
    /// `c` of the exponential bounds.
    pub c: f64,
    /// Accepted range of `log u / W_{1,p}σ`.
    pub bracket: Option<[f64; 2]>,
    /// Fail unless `lower ≤ u ≤ upper` at every point.
    pub assert_bounds: bool,
    /// Also check `v = e^{βW}` as a supersolution.
    pub beta: Option<f64>,
}

impl Default for GaugeSection {
    fn default() -> Self {
        GaugeSection { iteration: IterationSpec::default(), per_octave: 64, c: 1.0, bracket: None, assert_bounds: false, beta: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HessianSection {
    pub k: u32,
    pub c: f64,
    pub exponent: HessianExponent,
}

impl Default for HessianSection {
    fn default() -> Self {
        HessianSection { k: 1, c: 1.0, exponent: HessianExponent::default() }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional here when given on the command line.
    #[serde(default)]
    pub command: Option<Command>,
    pub n: usize,
    pub p: f64,
    #[serde(default)]
    pub sigma: Option<MeasureSpec>,
    #[serde(default)]
    pub omega: Option<MeasureSpec>,
    #[serde(default)]
    pub points: PointSpec,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub options: BoundOptions,
    #[serde(default)]
    pub bound: BoundSpec,
    /// Largest relative drift accepted against a baseline.
    #[serde(default = "default_drift")]
    pub baseline_tolerance: f64,
    #[serde(default)]
    pub potential: PotentialSection,
    #[serde(default)]
    pub capacity: CapacitySection,
    #[serde(default)]
    pub carleson: CarlesonSection,
    #[serde(default)]
    pub supersolution: SupersolutionSection,
    #[serde(default)]
    pub lowerbound: LowerboundSection,
    #[serde(default)]
    pub bilateral: BilateralSection,
    #[serde(default)]
    pub gauge: GaugeSection,
    #[serde(default)]
    pub hessian: HessianSection,
}

fn default_drift() -> f64 {
    0.05
}

/// A configuration problem, located by its field path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl ConfigError {
    pub fn at(path: impl Into<String>, message: impl std::fmt::Display) -> Self {
        ConfigError { path: path.into(), message: message.to_string() }
    }
}

pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError { path: if path == "." { String::new() } else { path }, message: e.into_inner().to_string() }
    })
}

pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::at("", format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_and_paths() {
        let c = parse(r#"{"n": 3, "p": 2.0}"#).unwrap();
        assert_eq!(c.points, PointSpec::List(vec![]));
        let e = parse(r#"{"n": 3, "p": 2.0, "bound": {"c": "x"}}"#).unwrap_err();
        assert_eq!(e.path, "bound.c");
        let e = parse(r#"{"n": 3, "p": 2.0, "sigma": {"type": "radial", "center": [0,0,0], "profile": {"kind": "lebesgue", "radius": 1, "densty": 1}}}"#).unwrap_err();
        assert!(e.path.starts_with("sigma"), "{}", e.path);
        assert!(parse("{").is_err());
    }
}
