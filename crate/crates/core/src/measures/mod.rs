//! Nonnegative measures and the geometric queries the potentials need:
//! masses of closed balls, of half-open boxes and dyadic cubes, restriction
//! to regions, and cubature nodes for integrating against the measure.

mod grid;
mod kdtree;
mod radial;
pub mod spec;

pub use grid::GridDensity;
pub use kdtree::KdTree;
pub use radial::{sphere_rule, PowerLaw, RadialMeasure};

use crate::error::{check_dim, invalid, Error, Result};
use crate::geometry::{dist, Shape};
use serde::{Deserialize, Serialize};

/// A mass value with its declared absolute error.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mass {
    pub value: f64,
    pub err: f64,
}

impl Mass {
    pub fn exact(value: f64) -> Self {
        Mass { value, err: 0.0 }
    }
}

impl std::ops::Add for Mass {
    type Output = Mass;
    fn add(self, o: Mass) -> Mass {
        Mass { value: self.value + o.value, err: self.err + o.err }
    }
}

/// Query and restriction regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    HalfSpace { normal: Vec<f64>, offset: f64 },
}

impl Region {
    pub fn ball(center: &[f64], radius: f64) -> Self {
        Region::Ball { center: center.to_vec(), radius }
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Ball { center, .. } => center.len(),
            Region::Box { lo, .. } => lo.len(),
            Region::HalfSpace { normal, .. } => normal.len(),
        }
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        self.shape().contains(z)
    }

    fn shape(&self) -> Shape {
        match self.clone() {
            Region::Ball { center, radius } => Shape::Ball { center, radius },
            Region::Box { lo, hi } => Shape::Box { lo, hi },
            Region::HalfSpace { normal, offset } => Shape::HalfSpace { normal, offset },
        }
    }

    fn contains_box(&self, lo: &[f64], hi: &[f64]) -> bool {
        match self {
            Region::Ball { center, radius } => {
                let far: f64 = (0..lo.len()).map(|i| (center[i] - lo[i]).abs().max((hi[i] - center[i]).abs()).powi(2)).sum();
                far.sqrt() <= *radius
            }
            Region::Box { lo: a, hi: b } => (0..lo.len()).all(|i| lo[i] >= a[i] && hi[i] < b[i]),
            Region::HalfSpace { normal, offset } => {
                (0..lo.len()).map(|i| (normal[i] * lo[i]).max(normal[i] * hi[i])).sum::<f64>() <= *offset
            }
        }
    }
}

/// Finite collection of weighted atoms with a k-d tree for ball counting.
#[derive(Debug, Clone)]
pub struct PointMasses {
    pub dim: usize,
    pub points: Vec<f64>,
    pub masses: Vec<f64>,
    tree: KdTree,
}

impl PartialEq for PointMasses {
    fn eq(&self, o: &Self) -> bool {
        self.dim == o.dim && self.points == o.points && self.masses == o.masses
    }
}

impl PointMasses {
    pub fn new(dim: usize, atoms: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let mut points = Vec::with_capacity(dim * atoms.len());
        let mut masses = Vec::with_capacity(atoms.len());
        for (loc, m) in atoms {
            check_dim(dim, loc.len())?;
            if !(m >= 0.0) || !m.is_finite() {
                return Err(crate::error::invalid("mass", "atom masses must be finite and nonnegative"));
            }
            if m > 0.0 {
                points.extend(loc);
                masses.push(m);
            }
        }
        let tree = KdTree::build(dim, &points, &masses);
        Ok(PointMasses { dim, points, masses, tree })
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        (0..self.len()).map(|i| (self.point(i), self.masses[i]))
    }

    pub fn ball_mass(&self, x: &[f64], r: f64) -> f64 {
        if r < 0.0 {
            return 0.0;
        }
        self.tree.ball_mass(&self.points, &self.masses, x, r)
    }

    pub fn for_each_in_ball(&self, x: &[f64], r: f64, f: impl FnMut(usize)) {
        self.tree.for_each_in_ball(&self.points, x, r, f)
    }

    fn from_filtered(&self, keep: impl Fn(&[f64]) -> Option<f64>) -> Self {
        let atoms = self.atoms().filter_map(|(z, m)| keep(z).map(|w| (z.to_vec(), m * w))).collect();
        PointMasses::new(self.dim, atoms).expect("filtered atoms stay valid")
    }
}

/// A nonnegative measure on `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Atoms(PointMasses),
    Radial(RadialMeasure),
    Grid(GridDensity),
    /// A grid density restricted to a region that does not align with it.
    Restricted { base: GridDensity, region: Region },
    Sum(Vec<Measure>),
}

impl Measure {
    pub fn zero(dim: usize) -> Self {
        Measure::Atoms(PointMasses::new(dim, Vec::new()).unwrap())
    }

    pub fn dirac(at: &[f64], mass: f64) -> Self {
        Measure::Atoms(PointMasses::new(at.len(), vec![(at.to_vec(), mass)]).unwrap())
    }

    pub fn atoms(dim: usize, atoms: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        Ok(Measure::Atoms(PointMasses::new(dim, atoms)?))
    }

    /// `density ×` Lebesgue measure on `B(center, radius)`.
    pub fn uniform_ball(center: &[f64], radius: f64, density: f64) -> Result<Self> {
        Ok(Measure::Radial(RadialMeasure::uniform_ball(center.len(), center.to_vec(), radius, density)?))
    }

    pub fn dim(&self) -> usize {
        match self {
            Measure::Atoms(a) => a.dim,
            Measure::Radial(r) => r.dim,
            Measure::Grid(g) => g.dim,
            Measure::Restricted { base, .. } => base.dim,
            Measure::Sum(parts) => parts.first().map(|m| m.dim()).unwrap_or(0),
        }
    }

    pub fn is_atomic(&self) -> bool {
        match self {
            Measure::Atoms(_) => true,
            Measure::Sum(parts) => parts.iter().all(|m| m.is_atomic()),
            _ => false,
        }
    }

    pub fn has_atoms(&self) -> bool {
        match self {
            Measure::Atoms(a) => !a.is_empty(),
            Measure::Sum(parts) => parts.iter().any(|m| m.has_atoms()),
            _ => false,
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            Measure::Atoms(a) => a.masses.iter().sum(),
            Measure::Radial(r) => r.total_mass(),
            Measure::Grid(g) => g.total_mass(),
            Measure::Restricted { base, region } => {
                let (lo, hi) = base.bounding_box();
                if lo[0] > hi[0] {
                    return 0.0;
                }
                base.shapes_mass(&lo, &hi, &[region.shape()], base.cell).0
            }
            Measure::Sum(parts) => parts.iter().map(|m| m.total_mass()).sum(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.total_mass() == 0.0
    }

    /// Mass of the closed ball `B(x, r)`.
    pub fn ball_mass(&self, x: &[f64], r: f64) -> Result<Mass> {
        check_dim(self.dim(), x.len())?;
        if r.is_nan() || r < 0.0 {
            return Err(crate::error::invalid("r", "radius must be nonnegative"));
        }
        Ok(self.ball_mass_unchecked(x, r))
    }

    pub(crate) fn ball_mass_unchecked(&self, x: &[f64], r: f64) -> Mass {
        match self {
            Measure::Atoms(a) => Mass::exact(a.ball_mass(x, r)),
            Measure::Radial(m) => {
                let (value, err) = m.ball_mass(x, r);
                Mass { value, err }
            }
            Measure::Grid(g) => {
                let (value, err) = g.ball_mass(x, r);
                Mass { value, err }
            }
            Measure::Restricted { base, region } => {
                if r <= 0.0 {
                    return Mass::default();
                }
                let lo: Vec<f64> = x.iter().map(|c| c - r).collect();
                let hi: Vec<f64> = x.iter().map(|c| c + r).collect();
                let shapes = [Shape::Ball { center: x.to_vec(), radius: r }, region.shape()];
                let (value, err) = base.shapes_mass(&lo, &hi, &shapes, r);
                Mass { value, err }
            }
            Measure::Sum(parts) => parts.iter().map(|m| m.ball_mass_unchecked(x, r)).fold(Mass::default(), |a, b| a + b),
        }
    }

    /// Mass of the half-open box `[lo, hi)`.
    pub fn box_mass(&self, lo: &[f64], hi: &[f64]) -> Result<Mass> {
        check_dim(self.dim(), lo.len())?;
        check_dim(self.dim(), hi.len())?;
        Ok(match self {
            Measure::Atoms(a) => {
                let inside = |z: &[f64]| z.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| v >= l && v < h);
                Mass::exact(a.atoms().filter(|(z, _)| inside(z)).map(|(_, m)| m).sum())
            }
            Measure::Radial(m) => {
                let (value, err) = m.box_mass(lo, hi);
                Mass { value, err }
            }
            Measure::Grid(g) => Mass::exact(g.box_mass(lo, hi)),
            Measure::Restricted { base, region } => {
                let shapes = [Shape::Box { lo: lo.to_vec(), hi: hi.to_vec() }, region.shape()];
                let scale = lo.iter().zip(hi).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min);
                let (value, err) = base.shapes_mass(lo, hi, &shapes, scale);
                Mass { value, err }
            }
            Measure::Sum(parts) => {
                let mut acc = Mass::default();
                for m in parts {
                    acc = acc + m.box_mass(lo, hi)?;
                }
                acc
            }
        })
    }

    /// `μ(B(y, s) ∩ B(x, r))`.
    pub fn ball_pair_mass(&self, y: &[f64], s: f64, x: &[f64], r: f64) -> Result<Mass> {
        check_dim(self.dim(), y.len())?;
        check_dim(self.dim(), x.len())?;
        if s <= 0.0 && r <= 0.0 {
            return Ok(Mass::default());
        }
        let d = dist(x, y);
        if d + s <= r {
            return self.ball_mass(y, s);
        }
        if d + r <= s {
            return self.ball_mass(x, r);
        }
        if d > s + r {
            return Ok(Mass::default());
        }
        Ok(match self {
            Measure::Atoms(a) => {
                let (c, rad, o, orad) = if s <= r { (y, s, x, r) } else { (x, r, y, s) };
                let mut acc = 0.0;
                a.for_each_in_ball(c, rad, |i| {
                    if dist(a.point(i), o) <= orad {
                        acc += a.masses[i];
                    }
                });
                Mass::exact(acc)
            }
            Measure::Radial(m) => {
                if m.is_concentric(y) {
                    let (value, err) = m.truncate(s).ball_mass(x, r);
                    Mass { value, err }
                } else if m.is_concentric(x) {
                    let (value, err) = m.truncate(r).ball_mass(y, s);
                    Mass { value, err }
                } else {
                    let (value, err) = m.ball_pair_mass(y, s, x, r);
                    Mass { value, err }
                }
            }
            Measure::Grid(g) => {
                let lo: Vec<f64> = y.iter().map(|c| c - s).collect();
                let hi: Vec<f64> = y.iter().map(|c| c + s).collect();
                let shapes = [Shape::Ball { center: y.to_vec(), radius: s }, Shape::Ball { center: x.to_vec(), radius: r }];
                let (value, err) = g.shapes_mass(&lo, &hi, &shapes, s.min(r));
                Mass { value, err }
            }
            Measure::Restricted { base, region } => {
                let lo: Vec<f64> = y.iter().map(|c| c - s).collect();
                let hi: Vec<f64> = y.iter().map(|c| c + s).collect();
                let shapes = [
                    Shape::Ball { center: y.to_vec(), radius: s },
                    Shape::Ball { center: x.to_vec(), radius: r },
                    region.shape(),
                ];
                let (value, err) = base.shapes_mass(&lo, &hi, &shapes, s.min(r));
                Mass { value, err }
            }
            Measure::Sum(parts) => {
                let mut acc = Mass::default();
                for m in parts {
                    acc = acc + m.ball_pair_mass(y, s, x, r)?;
                }
                acc
            }
        })
    }

    /// Restriction `χ_E μ`.
    pub fn restrict(&self, region: &Region) -> Result<Measure> {
        check_dim(self.dim(), region.dim())?;
        if let Some((lo, hi)) = self.bounding_box() {
            if lo.iter().zip(&hi).all(|(a, b)| a <= b) && region.contains_box(&lo, &hi) {
                return Ok(self.clone());
            }
        }
        match self {
            Measure::Atoms(a) => Ok(Measure::Atoms(a.from_filtered(|z| region.contains(z).then_some(1.0)))),
            Measure::Radial(m) => match region {
                Region::Ball { center, radius } if m.is_concentric(center) => Ok(Measure::Radial(m.truncate(*radius))),
                Region::Ball { center, radius } if dist(center, &m.center) >= radius + m.outer_radius() => {
                    Ok(Measure::zero(m.dim))
                }
                _ => Err(Error::Unsupported("restriction of a radial profile to a non-concentric region".into())),
            },
            Measure::Grid(g) => Ok(Measure::Restricted { base: g.clone(), region: region.clone() }),
            Measure::Restricted { .. } => {
                Err(Error::Unsupported("restriction of an already restricted grid".into()))
            }
            Measure::Sum(parts) => Ok(Measure::Sum(parts.iter().map(|m| m.restrict(region)).collect::<Result<_>>()?)),
        }
    }

    /// Axis-aligned box containing the support, `None` when unbounded or
    /// the measure is zero.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.dim();
        match self {
            Measure::Atoms(a) => {
                if a.is_empty() {
                    return None;
                }
                let mut lo = vec![f64::INFINITY; n];
                let mut hi = vec![f64::NEG_INFINITY; n];
                for (z, _) in a.atoms() {
                    for i in 0..n {
                        lo[i] = lo[i].min(z[i]);
                        hi[i] = hi[i].max(z[i]);
                    }
                }
                Some((lo, hi))
            }
            Measure::Radial(m) => {
                let r = m.outer_radius();
                if r == 0.0 || r.is_infinite() {
                    return None;
                }
                Some((m.center.iter().map(|c| c - r).collect(), m.center.iter().map(|c| c + r).collect()))
            }
            Measure::Grid(g) | Measure::Restricted { base: g, .. } => {
                let (lo, hi) = g.bounding_box();
                (lo[0] <= hi[0]).then_some((lo, hi))
            }
            Measure::Sum(parts) => {
                let mut out: Option<(Vec<f64>, Vec<f64>)> = None;
                for m in parts {
                    if m.is_zero() {
                        continue;
                    }
                    let (lo, hi) = m.bounding_box()?;
                    out = Some(match out {
                        None => (lo, hi),
                        Some((a, b)) => (
                            a.iter().zip(&lo).map(|(x, y)| x.min(*y)).collect(),
                            b.iter().zip(&hi).map(|(x, y)| x.max(*y)).collect(),
                        ),
                    });
                }
                out
            }
        }
    }

    /// `(ρ, δ)` such that `μ(B(x,t)) = ρ·|B(x,t)|` for every `t ≤ δ`.
    /// `δ = 0` means no such neighborhood is known.
    pub fn local_uniform(&self, x: &[f64]) -> (f64, f64) {
        match self {
            Measure::Atoms(a) => (0.0, a.tree_nearest(x)),
            Measure::Radial(m) => m.local_uniform(x),
            Measure::Grid(g) => g.local_uniform(x),
            Measure::Restricted { base, region } => {
                let (rho, delta) = base.local_uniform(x);
                let (inside, gap) = region_gap(region, x);
                (if inside { rho } else { 0.0 }, delta.min(gap))
            }
            Measure::Sum(parts) => parts.iter().fold((0.0, f64::INFINITY), |(r, d), m| {
                let (r2, d2) = m.local_uniform(x);
                (r + r2, d.min(d2))
            }),
        }
    }

    /// Mass sitting exactly at `x`.
    pub fn point_mass_at(&self, x: &[f64]) -> f64 {
        match self {
            Measure::Atoms(a) => a.ball_mass(x, 0.0),
            Measure::Sum(parts) => parts.iter().map(|m| m.point_mass_at(x)).sum(),
            _ => 0.0,
        }
    }

    /// Distance from `x` to the support (∞ for the zero measure).
    pub fn support_distance(&self, x: &[f64]) -> f64 {
        match self {
            Measure::Atoms(a) => a.tree_nearest(x),
            Measure::Radial(m) => m.support_distance(x),
            Measure::Grid(g) => g.support_distance(x),
            Measure::Restricted { base, region } => {
                let d = base.support_distance(x);
                match region {
                    Region::Ball { center, radius } => d.max(dist(center, x) - radius),
                    _ => d,
                }
            }
            Measure::Sum(parts) => parts.iter().map(|m| m.support_distance(x)).fold(f64::INFINITY, f64::min),
        }
    }

    /// Smallest radius `R` with `μ(B(x,R)) = μ(R^n)`; ∞ for unbounded support.
    pub fn support_radius_from(&self, x: &[f64]) -> f64 {
        match self {
            Measure::Atoms(a) => a.atoms().map(|(z, _)| dist(z, x)).fold(0.0, f64::max),
            Measure::Radial(m) => m.support_radius_from(x),
            Measure::Grid(g) => g.support_radius_from(x),
            Measure::Restricted { base, region } => {
                let r = base.support_radius_from(x);
                match region {
                    Region::Ball { center, radius } => r.min(dist(center, x) + radius),
                    _ => r,
                }
            }
            Measure::Sum(parts) => parts.iter().map(|m| m.support_radius_from(x)).fold(0.0, f64::max),
        }
    }

    /// Radii where `t ↦ μ(B(x,t))` jumps or has a kink.
    pub fn breakpoints(&self, x: &[f64]) -> Vec<f64> {
        let mut out = match self {
            Measure::Atoms(a) => a.atoms().map(|(z, _)| dist(z, x)).filter(|d| *d > 0.0).collect(),
            Measure::Radial(m) => m.breakpoints(x),
            Measure::Grid(_) => Vec::new(),
            Measure::Restricted { region, .. } => match region {
                Region::Ball { center, radius } => {
                    let d = dist(center, x);
                    vec![(radius - d).abs(), radius + d]
                }
                _ => Vec::new(),
            },
            Measure::Sum(parts) => parts.iter().flat_map(|m| m.breakpoints(x)).collect(),
        };
        out.retain(|b| *b > 0.0 && b.is_finite());
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out
    }

    /// Weighted nodes approximating integration against the measure;
    /// atoms are returned exactly.
    pub fn nodes(&self, resolution: usize) -> Result<Vec<(Vec<f64>, f64)>> {
        Ok(match self {
            Measure::Atoms(a) => a.atoms().map(|(z, m)| (z.to_vec(), m)).collect(),
            Measure::Radial(m) => m.nodes(resolution)?,
            Measure::Grid(g) => g.nodes(resolution),
            Measure::Restricted { base, region } => {
                base.nodes(resolution).into_iter().filter(|(z, _)| region.contains(z)).collect()
            }
            Measure::Sum(parts) => {
                let mut out = Vec::new();
                for m in parts {
                    out.extend(m.nodes(resolution)?);
                }
                out
            }
        })
    }

    /// `f·μ`. Atoms are reweighted exactly and grid cells by `f` at their
    /// centers. Radial profiles are refined to `per_octave` shells and
    /// reweighted by `f` sampled along the first coordinate axis, which is
    /// exact only for `f` radial about the profile's center. Samples of `f`
    /// are taken in parallel.
    pub fn reweight(&self, f: &(dyn Fn(&[f64]) -> f64 + Sync), per_octave: usize) -> Result<Measure> {
        let sample = |sites: &[Vec<f64>]| -> Result<Vec<f64>> {
            let w = crate::parallel::map(sites, |z| f(z));
            match w.iter().find(|w| !(**w >= 0.0)) {
                Some(bad) => Err(Error::Precondition(format!("reweighting function must be nonnegative, got {bad}"))),
                None => Ok(w),
            }
        };
        Ok(match self {
            Measure::Atoms(a) => {
                let sites: Vec<Vec<f64>> = a.atoms().map(|(z, _)| z.to_vec()).collect();
                let w = sample(&sites)?;
                let atoms = a.atoms().zip(w).map(|((z, m), w)| (z.to_vec(), m * w)).collect();
                Measure::Atoms(PointMasses::new(a.dim, atoms)?)
            }
            Measure::Radial(m) => {
                let outer = m.outer_radius();
                if outer.is_infinite() {
                    return Err(Error::Unsupported("reweighting an unbounded radial profile".into()));
                }
                let fine = m.refined(per_octave, outer * 2f64.powi(-40));
                let sites: Vec<Vec<f64>> = fine
                    .shell_midpoints()
                    .into_iter()
                    .map(|s| {
                        let mut z = fine.center.clone();
                        z[0] += s;
                        z
                    })
                    .collect();
                let w = sample(&sites)?;
                Measure::Radial(fine.with_weights(&w))
            }
            Measure::Grid(g) => Measure::Grid(g.with_masses(reweight_cells(g, None, &sample)?)),
            Measure::Restricted { base, region } => Measure::Restricted {
                base: base.with_masses(reweight_cells(base, Some(region), &sample)?),
                region: region.clone(),
            },
            Measure::Sum(parts) => {
                Measure::Sum(parts.iter().map(|m| m.reweight(f, per_octave)).collect::<Result<_>>()?)
            }
        })
    }

    /// The measure with density `ρ^q` where `μ = ρ dx`. Atoms have no
    /// density; sums are refused since powers do not split over them.
    pub fn density_power(&self, q: f64) -> Result<Measure> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(invalid("q", "density exponent must be positive"));
        }
        match self {
            Measure::Atoms(a) if a.is_empty() => Ok(self.clone()),
            Measure::Atoms(_) => Err(Error::Unsupported("density power of an atomic measure".into())),
            Measure::Radial(m) => {
                let w: Vec<f64> = m.density.iter().map(|d| if *d > 0.0 { d.powf(q - 1.0) } else { 0.0 }).collect();
                Ok(Measure::Radial(m.with_weights(&w)))
            }
            Measure::Grid(g) => Ok(Measure::Grid(g.with_masses(grid_power(g, q)))),
            Measure::Restricted { base, region } => {
                Ok(Measure::Restricted { base: base.with_masses(grid_power(base, q)), region: region.clone() })
            }
            Measure::Sum(parts) => {
                let live: Vec<&Measure> = parts.iter().filter(|m| !m.is_zero()).collect();
                match live.as_slice() {
                    [] => Ok(Measure::zero(self.dim())),
                    [one] => one.density_power(q),
                    _ => Err(Error::Unsupported("density power of a sum of measures".into())),
                }
            }
        }
    }

    pub fn scaled(&self, c: f64) -> Measure {
        match self {
            Measure::Atoms(a) => Measure::Atoms(a.from_filtered(|_| Some(c))),
            Measure::Radial(m) => Measure::Radial(m.scaled(c)),
            Measure::Grid(g) => Measure::Grid(g.with_masses(g.masses.iter().map(|m| m * c).collect())),
            Measure::Restricted { base, region } => Measure::Restricted {
                base: base.with_masses(base.masses.iter().map(|m| m * c).collect()),
                region: region.clone(),
            },
            Measure::Sum(parts) => Measure::Sum(parts.iter().map(|m| m.scaled(c)).collect()),
        }
    }

    /// Image under `z ↦ λz` with masses multiplied by `factor`.
    pub fn pushforward(&self, lambda: f64, factor: f64) -> Measure {
        let scale_region = |r: &Region| match r {
            Region::Ball { center, radius } => {
                Region::Ball { center: center.iter().map(|c| c * lambda).collect(), radius: radius * lambda }
            }
            Region::Box { lo, hi } => {
                Region::Box { lo: lo.iter().map(|c| c * lambda).collect(), hi: hi.iter().map(|c| c * lambda).collect() }
            }
            Region::HalfSpace { normal, offset } => Region::HalfSpace { normal: normal.clone(), offset: offset * lambda },
        };
        match self {
            Measure::Atoms(a) => Measure::Atoms(
                PointMasses::new(a.dim, a.atoms().map(|(z, m)| (z.iter().map(|c| c * lambda).collect(), m * factor)).collect())
                    .unwrap(),
            ),
            Measure::Radial(m) => Measure::Radial(m.pushforward(lambda, factor)),
            Measure::Grid(g) => Measure::Grid(g.pushforward(lambda, factor)),
            Measure::Restricted { base, region } => {
                Measure::Restricted { base: base.pushforward(lambda, factor), region: scale_region(region) }
            }
            Measure::Sum(parts) => Measure::Sum(parts.iter().map(|m| m.pushforward(lambda, factor)).collect()),
        }
    }

    /// The center when the measure is radially symmetric about one point
    /// (radial profiles, atoms at a single location, and sums of those).
    pub fn radial_center(&self) -> Option<Vec<f64>> {
        match self {
            Measure::Radial(m) => Some(m.center.clone()),
            Measure::Atoms(a) => {
                let first = a.atoms().next()?.0.to_vec();
                a.atoms().all(|(z, _)| dist(z, &first) == 0.0).then_some(first)
            }
            Measure::Sum(parts) => {
                let mut center: Option<Vec<f64>> = None;
                for m in parts.iter().filter(|m| !m.is_zero()) {
                    let c = m.radial_center()?;
                    match &center {
                        None => center = Some(c),
                        Some(c0) if dist(c0, &c) <= 1e-14 => {}
                        _ => return None,
                    }
                }
                center
            }
            _ => None,
        }
    }

    /// `t ↦ μ(B(c, t))` about the radial center; exact for radial
    /// profiles and centered atoms.
    pub fn radial_cumulative(&self, t: f64) -> f64 {
        match self {
            Measure::Radial(m) => m.cumulative(t),
            Measure::Atoms(a) => {
                if t >= 0.0 {
                    a.masses.iter().sum()
                } else {
                    0.0
                }
            }
            Measure::Sum(parts) => parts.iter().map(|m| m.radial_cumulative(t)).sum(),
            _ => f64::NAN,
        }
    }
}

/// Whether `x` lies in the region, and its distance to the boundary.
fn region_gap(region: &Region, x: &[f64]) -> (bool, f64) {
    match region {
        Region::Ball { center, radius } => {
            let d = dist(center, x);
            (d <= *radius, (radius - d).abs())
        }
        Region::Box { lo, hi } => {
            let inside = region.contains(x);
            if inside {
                (true, (0..x.len()).map(|i| (x[i] - lo[i]).min(hi[i] - x[i])).fold(f64::INFINITY, f64::min))
            } else {
                let out: f64 = (0..x.len()).map(|i| (lo[i] - x[i]).max(x[i] - hi[i]).max(0.0).powi(2)).sum();
                (false, out.sqrt())
            }
        }
        Region::HalfSpace { normal, offset } => {
            let len = crate::geometry::norm(normal);
            let v: f64 = normal.iter().zip(x).map(|(a, b)| a * b).sum();
            (v <= *offset, (offset - v).abs() / len)
        }
    }
}

impl PointMasses {
    fn tree_nearest(&self, x: &[f64]) -> f64 {
        self.tree.nearest(&self.points, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn ball_mass_examples() {
        let d = Measure::dirac(&[0.0; 3], 1.0);
        assert_eq!(d.ball_mass(&[0.0; 3], 0.1).unwrap().value, 1.0);
        assert_eq!(d.ball_mass(&[1.0, 0.0, 0.0], 0.5).unwrap().value, 0.0);
        // closed ball: an atom on the sphere counts
        assert_eq!(d.ball_mass(&[1.0, 0.0, 0.0], 1.0).unwrap().value, 1.0);
        let leb = Measure::uniform_ball(&[0.0; 3], 1.0, 1.0).unwrap();
        assert_relative_eq!(leb.ball_mass(&[0.0; 3], 0.5).unwrap().value, 4.0 * PI / 3.0 * 0.125, max_relative = 1e-14);
        assert!(matches!(d.ball_mass(&[0.0; 2], 1.0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn restrict_examples() {
        let d = Measure::dirac(&[0.0; 3], 1.0);
        assert_eq!(d.restrict(&Region::ball(&[0.0; 3], 1.0)).unwrap().total_mass(), 1.0);
        assert_eq!(d.restrict(&Region::ball(&[3.0, 0.0, 0.0], 1.0)).unwrap().total_mass(), 0.0);
        let leb2 = Measure::uniform_ball(&[0.0; 3], 2.0, 1.0).unwrap();
        let r = leb2.restrict(&Region::ball(&[0.0; 3], 1.0)).unwrap();
        assert_relative_eq!(r.total_mass(), 4.0 * PI / 3.0, max_relative = 1e-14);
        assert!(matches!(leb2.restrict(&Region::ball(&[0.5, 0.0, 0.0], 1.0)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn cube_mass_examples() {
        let a = Measure::dirac(&[0.1, 0.1], 1.0);
        assert_eq!(a.box_mass(&[0.0, 0.0], &[1.0, 1.0]).unwrap().value, 1.0);
        assert_eq!(a.box_mass(&[1.0, 0.0], &[2.0, 1.0]).unwrap().value, 0.0);
        // half-open faces
        let face = Measure::dirac(&[1.0, 0.5], 1.0);
        assert_eq!(face.box_mass(&[0.0, 0.0], &[1.0, 1.0]).unwrap().value, 0.0);
        assert_eq!(face.box_mass(&[1.0, 0.0], &[2.0, 1.0]).unwrap().value, 1.0);
    }

    #[test]
    fn restricted_grid_queries() {
        let g = Measure::Grid(GridDensity::uniform(vec![0.0, 0.0], 0.25, vec![4, 4], 1.0).unwrap());
        let half = g.restrict(&Region::HalfSpace { normal: vec![1.0, 0.0], offset: 0.5 }).unwrap();
        assert_relative_eq!(half.total_mass(), 0.5, max_relative = 1e-12);
        let disk = g.restrict(&Region::ball(&[0.5, 0.5], 0.25)).unwrap();
        assert_relative_eq!(disk.total_mass(), PI * 0.0625, max_relative = 1e-3);
        assert_relative_eq!(disk.ball_mass(&[0.5, 0.5], 1.0).unwrap().value, disk.total_mass(), max_relative = 1e-3);
    }

    #[test]
    fn pair_mass_for_centered_profile() {
        let leb = Measure::uniform_ball(&[0.0; 3], 1.0, 1.0).unwrap();
        let m = leb.ball_pair_mass(&[0.0; 3], 0.5, &[0.6, 0.0, 0.0], 0.5).unwrap();
        let direct = crate::geometry::lens_volume(3, 0.5, 0.5, 0.6);
        assert_relative_eq!(m.value, direct, max_relative = 1e-12);
    }

    #[test]
    fn radial_reweighting_is_shellwise() {
        let leb = Measure::uniform_ball(&[0.0; 3], 1.0, 1.0).unwrap();
        let w = leb.reweight(&|z: &[f64]| 2.0 + 0.0 * z[0], 8).unwrap();
        assert_relative_eq!(w.total_mass(), 8.0 * PI / 3.0, max_relative = 1e-10);
        assert!(leb.reweight(&|_: &[f64]| -1.0, 8).is_err());
    }
}

fn reweight_cells(
    g: &GridDensity,
    region: Option<&Region>,
    sample: &dyn Fn(&[Vec<f64>]) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    let live: Vec<usize> = (0..g.masses.len())
        .filter(|&i| g.masses[i] > 0.0 && region.is_none_or(|r| r.contains(&g.cell_center(i))))
        .collect();
    let sites: Vec<Vec<f64>> = live.iter().map(|&i| g.cell_center(i)).collect();
    let w = sample(&sites)?;
    let mut masses = g.masses.clone();
    if region.is_none() {
        masses.iter_mut().for_each(|m| *m = 0.0);
    }
    for (&i, w) in live.iter().zip(w) {
        masses[i] = g.masses[i] * w;
    }
    Ok(masses)
}

fn grid_power(g: &GridDensity, q: f64) -> Vec<f64> {
    let vol = g.cell.powi(g.dim as i32);
    g.masses.iter().map(|&m| if m > 0.0 { (m / vol).powf(q) * vol } else { 0.0 }).collect()
}
