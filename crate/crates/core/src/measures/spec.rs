//! Serializable measure descriptions used by configuration files.

use super::{GridDensity, Measure, PointMasses, PowerLaw, RadialMeasure, Region};
use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomSpec {
    pub at: Vec<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// Constant density on a ball; `radius: null` means all of `R^n`.
    Lebesgue {
        radius: Option<f64>,
        #[serde(default = "one")]
        density: f64,
    },
    Shells { radii: Vec<Option<f64>>, densities: Vec<f64> },
    /// Density `coef |z - center|^{-gamma}` on `B(center, radius)`.
    Power {
        gamma: f64,
        #[serde(default = "one")]
        coef: f64,
        radius: f64,
        #[serde(default = "default_per_octave")]
        per_octave: usize,
        #[serde(default = "default_octaves")]
        octaves: u32,
    },
}

fn one() -> f64 {
    1.0
}
fn default_per_octave() -> usize {
    16
}
fn default_octaves() -> u32 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Zero {
        dim: usize,
    },
    Dirac {
        #[serde(default)]
        dim: Option<usize>,
        #[serde(default)]
        atoms: Vec<AtomSpec>,
        #[serde(default)]
        at: Option<Vec<f64>>,
        #[serde(default)]
        mass: Option<f64>,
    },
    Radial {
        center: Vec<f64>,
        profile: ProfileSpec,
    },
    Grid {
        lower: Vec<f64>,
        cell: f64,
        shape: Vec<usize>,
        #[serde(default)]
        masses: Option<Vec<f64>>,
        #[serde(default)]
        total: Option<f64>,
    },
    Restrict {
        measure: Box<MeasureSpec>,
        region: Region,
    },
    Scaled {
        factor: f64,
        measure: Box<MeasureSpec>,
    },
    Sum {
        parts: Vec<MeasureSpec>,
    },
}

impl MeasureSpec {
    pub fn build(&self) -> Result<Measure> {
        match self {
            MeasureSpec::Zero { dim } => {
                if *dim == 0 {
                    return Err(invalid("dim", "dimension must be positive"));
                }
                Ok(Measure::zero(*dim))
            }
            MeasureSpec::Dirac { dim, atoms, at, mass } => {
                let mut list: Vec<(Vec<f64>, f64)> = atoms.iter().map(|a| (a.at.clone(), a.mass)).collect();
                if let Some(at) = at {
                    list.push((at.clone(), mass.unwrap_or(1.0)));
                }
                let n = dim.or_else(|| list.first().map(|a| a.0.len())).ok_or_else(|| invalid("atoms", "need `dim` or at least one atom"))?;
                if n == 0 {
                    return Err(invalid("dim", "dimension must be positive"));
                }
                Ok(Measure::Atoms(PointMasses::new(n, list)?))
            }
            MeasureSpec::Radial { center, profile } => {
                let n = center.len();
                if n == 0 {
                    return Err(invalid("center", "dimension must be positive"));
                }
                let m = match profile {
                    ProfileSpec::Lebesgue { radius, density } => {
                        RadialMeasure::uniform_ball(n, center.clone(), radius.unwrap_or(f64::INFINITY), *density)?
                    }
                    ProfileSpec::Shells { radii, densities } => RadialMeasure::shells(
                        n,
                        center.clone(),
                        radii.iter().map(|r| r.unwrap_or(f64::INFINITY)).collect(),
                        densities.clone(),
                    )?,
                    ProfileSpec::Power { gamma, coef, radius, per_octave, octaves } => RadialMeasure::power(
                        n,
                        center.clone(),
                        PowerLaw { coef: *coef, gamma: *gamma, radius: *radius },
                        *per_octave,
                        *octaves,
                    )?,
                };
                Ok(Measure::Radial(m))
            }
            MeasureSpec::Grid { lower, cell, shape, masses, total } => {
                let g = match (masses, total) {
                    (Some(m), None) => GridDensity::new(lower.clone(), *cell, shape.clone(), m.clone())?,
                    (None, Some(t)) => GridDensity::uniform(lower.clone(), *cell, shape.clone(), *t)?,
                    _ => return Err(invalid("masses", "give exactly one of `masses` or `total`")),
                };
                Ok(Measure::Grid(g))
            }
            MeasureSpec::Restrict { measure, region } => measure.build()?.restrict(region),
            MeasureSpec::Scaled { factor, measure } => {
                if !(*factor >= 0.0) || !factor.is_finite() {
                    return Err(invalid("factor", "scale factor must be finite and nonnegative"));
                }
                Ok(measure.build()?.scaled(*factor))
            }
            MeasureSpec::Sum { parts } => {
                let built = parts.iter().map(|p| p.build()).collect::<Result<Vec<_>>>()?;
                let n = built.first().map(|m| m.dim()).ok_or_else(|| invalid("parts", "a sum needs at least one part"))?;
                for m in &built {
                    crate::error::check_dim(n, m.dim())?;
                }
                Ok(Measure::Sum(built))
            }
        }
    }
}
