//! Pointwise bounds for `-Δ_p u = σ u^{p-1} + ω`: the operator `T`, the
//! supersolution `v` and its obstacle inequality, localized lower bounds,
//! the closed forms on both sides, gauge bounds, special data classes and
//! the k-Hessian presets.

pub mod classes;
pub mod engine;
pub mod gauge;
pub mod hessian;
pub mod lower;
pub mod sumparts;

use crate::capacity::quadrature_nodes;
use crate::error::{check_dim, check_p, invalid, Result};
use crate::geometry::dist;
use crate::measures::{Measure, Region};
use crate::parallel;
use crate::potentials::{local_v, wolff_p, Branch, DyadicSumSpec, Kernel, PotValue, Quadrature};
use engine::{BoundIntegral, InnerWeight, OuterWeight};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};

pub use classes::*;
pub use gauge::*;
pub use hessian::*;
pub use lower::*;
pub use sumparts::*;

/// Numerical settings shared by the bound evaluators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundOptions {
    pub quad: Quadrature,
    pub dyadic: DyadicSumSpec,
    /// Cubature resolution for integrals against non-atomic measures.
    pub node_resolution: usize,
    /// Shells per octave when a radial `σ` is reweighted by a function.
    pub per_octave: usize,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions { quad: Quadrature::with_k(16), dyadic: DyadicSumSpec::default(), node_resolution: 2, per_octave: 4 }
    }
}

impl BoundOptions {
    /// `factor` times finer radial quadrature and reweighting shells.
    pub fn refined(&self, factor: usize) -> Self {
        let f = factor.max(1);
        BoundOptions { quad: self.quad.refined(f), per_octave: self.per_octave * f, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        self.quad.validate()?;
        if self.node_resolution == 0 || self.per_octave == 0 {
            return Err(invalid("node_resolution", "resolutions must be positive"));
        }
        Ok(())
    }
}

/// Where the equation is posed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    #[default]
    Entire,
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

impl Domain {
    pub fn is_entire(&self) -> bool {
        matches!(self, Domain::Entire)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            Domain::Entire => Ok(()),
            Domain::Ball { center, radius } => {
                check_dim(n, center.len())?;
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(invalid("domain.radius", "radius must be positive and finite"));
                }
                Ok(())
            }
            Domain::Box { lo, hi } => {
                check_dim(n, lo.len())?;
                check_dim(n, hi.len())?;
                if lo.iter().zip(hi).any(|(a, b)| !(a < b) || !b.is_finite() || !a.is_finite()) {
                    return Err(invalid("domain.hi", "box needs lo < hi on every axis"));
                }
                Ok(())
            }
        }
    }

    /// `d(x)`, the distance to the complement; `0` outside the domain.
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Entire => f64::INFINITY,
            Domain::Ball { center, radius } => (radius - dist(center, x)).max(0.0),
            Domain::Box { lo, hi } => {
                x.iter().zip(lo.iter().zip(hi)).map(|(&xi, (&a, &b))| (xi - a).min(b - xi)).fold(f64::INFINITY, f64::min).max(0.0)
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Entire => f64::INFINITY,
            Domain::Ball { radius, .. } => 2.0 * radius,
            Domain::Box { lo, hi } => dist(lo, hi),
        }
    }

    pub fn region(&self) -> Option<Region> {
        match self {
            Domain::Entire => None,
            Domain::Ball { center, radius } => Some(Region::Ball { center: center.clone(), radius: *radius }),
            Domain::Box { lo, hi } => Some(Region::Box { lo: lo.clone(), hi: hi.clone() }),
        }
    }

    /// `χ_Ω μ`.
    pub fn restrict(&self, mu: &Measure) -> Result<Measure> {
        match self.region() {
            None => Ok(mu.clone()),
            Some(r) => mu.restrict(&r),
        }
    }
}

/// Weight inside the `ω`-integral of the upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerSelector {
    /// `e^{c I^r_p σ(z)}`.
    Riesz,
    /// `e^{c W^r_{1,p} σ(z)}`.
    Wolff,
    /// `e^{c V_{B(x,r)}(z)}`.
    V,
}

impl InnerSelector {
    /// The weight of the entire-space upper bound for this `p`.
    pub fn for_p(p: f64) -> Self {
        if p <= 2.0 {
            InnerSelector::Riesz
        } else {
            InnerSelector::Wolff
        }
    }
}

/// Constants and setting of a bound evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundSpec {
    /// Which half of the theory applies; defaults to the one given by `p`.
    pub branch: Option<Branch>,
    pub domain: Domain,
    /// Exponent constant of the closed forms.
    pub c: f64,
    /// Supersolution exponent.
    pub beta: f64,
    pub selector: Option<InnerSelector>,
}

impl Default for BoundSpec {
    fn default() -> Self {
        BoundSpec { branch: None, domain: Domain::Entire, c: 1.0, beta: 0.1, selector: None }
    }
}

impl BoundSpec {
    pub fn validate(&self, p: f64, n: usize) -> Result<()> {
        check_p(p, n)?;
        self.domain.validate(n)?;
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(invalid("c", "exponent constant must be positive"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(invalid("beta", "supersolution exponent must be positive"));
        }
        match self.branch {
            Some(Branch::Low) if p > 2.0 => Err(invalid("branch", "the p <= 2 branch needs p <= 2")),
            Some(Branch::High) if p < 2.0 => Err(invalid("branch", "the p >= 2 branch needs p >= 2")),
            _ => Ok(()),
        }
    }

    pub fn branch_for(&self, p: f64) -> Branch {
        self.branch.unwrap_or(Branch::for_p(p))
    }

    pub fn selector_for(&self, p: f64) -> InnerSelector {
        self.selector.unwrap_or(InnerSelector::for_p(p))
    }
}

/// One evaluation point with everything known about it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub x: Vec<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub v: Option<f64>,
    pub oracle: Option<f64>,
    pub constants: BTreeMap<String, f64>,
    pub flags: Vec<String>,
}

impl BoundReport {
    pub fn at(x: &[f64]) -> Self {
        BoundReport { x: x.to_vec(), lower: None, upper: None, v: None, oracle: None, constants: BTreeMap::new(), flags: Vec::new() }
    }

    pub fn flag(&mut self, f: impl Into<String>) {
        let f = f.into();
        if !self.flags.contains(&f) {
            self.flags.push(f);
        }
    }
}

/// `f^{p-1} σ`, or `None` when `f` is infinite somewhere on the support.
pub fn power_reweight(
    sigma: &Measure,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    p: f64,
    per_octave: usize,
) -> Result<Option<Measure>> {
    let infinite = AtomicBool::new(false);
    let g = |z: &[f64]| {
        let v = f(z);
        if v == f64::INFINITY {
            infinite.store(true, Ordering::Relaxed);
            0.0
        } else if v >= 0.0 {
            v.powf(p - 1.0)
        } else {
            // negative or NaN samples are rejected by the reweighting
            -1.0
        }
    };
    let mu = sigma.reweight(&g, per_octave)?;
    Ok(if infinite.load(Ordering::Relaxed) { None } else { Some(mu) })
}

/// `T(f)(x) = W_{1,p}(f^{p-1} dσ)(x)`.
pub fn t_operator(
    sigma: &Measure,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    x: &[f64],
    p: f64,
    opts: &BoundOptions,
) -> Result<PotValue> {
    check_p(p, sigma.dim())?;
    check_dim(sigma.dim(), x.len())?;
    if sigma.is_zero() {
        return Ok(PotValue::zero());
    }
    match power_reweight(sigma, f, p, opts.per_octave)? {
        None => Ok(PotValue::infinite()),
        Some(mu) => wolff_p(&mu, x, p, f64::INFINITY, &opts.quad),
    }
}

/// `μ_{B(y,s)} = ∫_{B(y,s)} e^{β V_{B(y,s)}(z)} dω(z)`.
#[allow(clippy::too_many_arguments)]
pub fn mu_ball(
    sigma: &Measure,
    omega: &Measure,
    y: &[f64],
    s: f64,
    beta: f64,
    p: f64,
    branch: Branch,
    opts: &BoundOptions,
) -> Result<f64> {
    let n = omega.dim();
    check_p(p, n)?;
    check_dim(n, sigma.dim())?;
    check_dim(n, y.len())?;
    if !(s > 0.0) {
        return Err(invalid("s", "ball radius must be positive"));
    }
    if omega.is_zero() {
        return Ok(0.0);
    }
    if sigma.is_zero() {
        return Ok(omega.ball_mass(y, s)?.value);
    }
    let nodes = if omega.is_atomic() { omega.nodes(1)? } else { quadrature_nodes(omega, opts.node_resolution)? };
    let inside: Vec<_> = nodes.into_iter().filter(|(z, w)| *w > 0.0 && dist(z, y) < s).collect();
    let terms = parallel::map(&inside, |(z, w)| -> Result<f64> {
        let v = local_v(sigma, y, s, z, p, branch, &opts.dyadic)?;
        Ok(w * (beta * v.value).exp())
    });
    terms.into_iter().sum()
}

fn supersolution_integral(beta: f64, p: f64, n: usize, branch: Branch, r_max: f64, opts: &BoundOptions) -> Result<BoundIntegral> {
    let k = Kernel::wolff_p(n, p)?;
    Ok(BoundIntegral::quasilinear(n, p, r_max)
        .with_outer(OuterWeight::Restricted(k), beta)
        .with_inner(InnerWeight::LocalV { p, branch }, beta)
        .with_resolution(opts.node_resolution)
        .with_dyadic(opts.dyadic))
}

/// The candidate supersolution
/// `v(x) = ∫_0^∞ (e^{β W(χ_{B(x,r)}σ)(x)} r^{p-n} μ_{B(x,r)})^{1/(p-1)} dr/r`.
#[allow(clippy::too_many_arguments)]
pub fn supersolution_v(
    sigma: &Measure,
    omega: &Measure,
    x: &[f64],
    beta: f64,
    p: f64,
    branch: Branch,
    opts: &BoundOptions,
) -> Result<PotValue> {
    supersolution_truncated(sigma, omega, x, beta, p, branch, f64::INFINITY, opts)
}

/// `v` with the radial integral cut at `r_max`.
#[allow(clippy::too_many_arguments)]
pub fn supersolution_truncated(
    sigma: &Measure,
    omega: &Measure,
    x: &[f64],
    beta: f64,
    p: f64,
    branch: Branch,
    r_max: f64,
    opts: &BoundOptions,
) -> Result<PotValue> {
    let n = omega.dim();
    check_p(p, n)?;
    if !(beta >= 0.0) {
        return Err(invalid("beta", "supersolution exponent must be nonnegative"));
    }
    supersolution_integral(beta, p, n, branch, r_max, opts)?.eval(sigma, omega, x, &opts.quad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstaclePoint {
    pub x: Vec<f64>,
    pub v: f64,
    pub wolff: f64,
    pub t: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleReport {
    pub points: Vec<ObstaclePoint>,
    /// `max T(v) / (v - W_{1,p}ω)` over the points.
    pub c_star: f64,
    /// `v ≥ W_{1,p}ω` at every point, up to declared quadrature error.
    pub dominates: bool,
    /// `T(v) > 0` where `v = W_{1,p}ω`.
    pub hard_failure: bool,
    /// Every ratio was `0/0`.
    pub degenerate: bool,
    pub divergent: bool,
}

/// Checks `v ≥ W_{1,p}ω` and measures `C*` in `T(v) ≤ C*(v - W_{1,p}ω)`.
pub fn obstacle_check(
    sigma: &Measure,
    omega: &Measure,
    beta: f64,
    p: f64,
    points: &[Vec<f64>],
    opts: &BoundOptions,
) -> Result<ObstacleReport> {
    let n = omega.dim();
    check_p(p, n)?;
    check_dim(n, sigma.dim())?;
    opts.validate()?;
    for x in points {
        check_dim(n, x.len())?;
        if omega.point_mass_at(x) > 0.0 {
            return Err(invalid("points", "sample points must avoid the atoms of ω"));
        }
    }
    let branch = Branch::for_p(p);
    let vfun = |z: &[f64]| supersolution_v(sigma, omega, z, beta, p, branch, opts).map(|v| v.value).unwrap_or(f64::NAN);
    // the reweighted measure v^{p-1}σ is shared by all points
    let v_sigma = if sigma.is_zero() || omega.is_zero() { None } else { power_reweight(sigma, &vfun, p, opts.per_octave)? };
    let t_infinite = !sigma.is_zero() && !omega.is_zero() && v_sigma.is_none();
    let rows = parallel::map(points, |x| -> Result<(ObstaclePoint, bool, bool)> {
        let v = supersolution_v(sigma, omega, x, beta, p, branch, opts)?;
        let w = wolff_p(omega, x, p, f64::INFINITY, &opts.quad)?;
        let t = match &v_sigma {
            Some(mu) => wolff_p(mu, x, p, f64::INFINITY, &opts.quad)?,
            None if t_infinite => PotValue::infinite(),
            None => PotValue::zero(),
        };
        let tol = v.err + w.err + 1e-12 * w.value.abs();
        let gap = v.value - w.value;
        let ratio = if gap > tol {
            t.value / gap
        } else if t.value > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        let point = ObstaclePoint { x: x.clone(), v: v.value, wolff: w.value, t: t.value, ratio };
        Ok((point, gap >= -tol, v.divergent || w.divergent || t.divergent))
    });
    let mut out = ObstacleReport {
        points: Vec::with_capacity(points.len()),
        c_star: 0.0,
        dominates: true,
        hard_failure: false,
        degenerate: true,
        divergent: false,
    };
    for r in rows {
        let (pt, dominates, divergent) = r?;
        out.dominates &= dominates;
        out.divergent |= divergent;
        if pt.ratio == f64::INFINITY {
            out.hard_failure = true;
        }
        if pt.t > 0.0 {
            out.degenerate = false;
        }
        out.c_star = out.c_star.max(pt.ratio);
        out.points.push(pt);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalEstimateReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub degenerate: bool,
}

/// Both sides of the local inequality
/// `∫_{B(x,r)} v_r(y)^{p-1} dσ(y) ≤ C ∫_{B(x,2r)} (e^{β V_{B(x,2r)}} - 1) dω`,
/// where `v_r` is the supersolution integral cut at `r`.
#[allow(clippy::too_many_arguments)]
pub fn local_estimate_check(
    sigma: &Measure,
    omega: &Measure,
    x: &[f64],
    r: f64,
    beta: f64,
    p: f64,
    branch: Branch,
    opts: &BoundOptions,
) -> Result<LocalEstimateReport> {
    let n = omega.dim();
    check_p(p, n)?;
    check_dim(n, sigma.dim())?;
    check_dim(n, x.len())?;
    if !(r > 0.0) {
        return Err(invalid("r", "ball radius must be positive"));
    }
    let (lhs, rhs) = if sigma.is_zero() || omega.is_zero() {
        (0.0, 0.0)
    } else {
        let s_nodes = if sigma.is_atomic() { sigma.nodes(1)? } else { quadrature_nodes(sigma, opts.node_resolution)? };
        let inside: Vec<_> = s_nodes.into_iter().filter(|(y, w)| *w > 0.0 && dist(y, x) < r).collect();
        let parts = parallel::map(&inside, |(y, w)| -> Result<f64> {
            let v = supersolution_truncated(sigma, omega, y, beta, p, branch, r, opts)?;
            Ok(w * v.value.powf(p - 1.0))
        });
        let lhs: f64 = parts.into_iter().sum::<Result<f64>>()?;
        let o_nodes = if omega.is_atomic() { omega.nodes(1)? } else { quadrature_nodes(omega, opts.node_resolution)? };
        let big: Vec<_> = o_nodes.into_iter().filter(|(z, w)| *w > 0.0 && dist(z, x) < 2.0 * r).collect();
        let parts = parallel::map(&big, |(z, w)| -> Result<f64> {
            let v = local_v(sigma, x, 2.0 * r, z, p, branch, &opts.dyadic)?;
            Ok(w * (beta * v.value).exp_m1())
        });
        (lhs, parts.into_iter().sum::<Result<f64>>()?)
    };
    let (ratio, degenerate) = ratio_or_zero(lhs, rhs);
    Ok(LocalEstimateReport { lhs, rhs, ratio, degenerate })
}

/// `a/b` with `0/0 = 0` flagged as degenerate.
pub fn ratio_or_zero(a: f64, b: f64) -> (f64, bool) {
    if a == 0.0 && b == 0.0 {
        (0.0, true)
    } else if b == 0.0 {
        (f64::INFINITY, false)
    } else {
        (a / b, false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub value: f64,
    pub err: f64,
    pub finite: bool,
}

/// The tail integral beyond `R`,
/// `∫_R^∞ (e^{c W(σ(B(x_0,·) \ B(x_0,R)))} r^{p-n} ∫_{B(x_0,r)} e^{c I^r_p σ} dω)^{1/(p-1)} dr/r`,
/// whose finiteness licenses the untruncated supersolution.
#[allow(clippy::too_many_arguments)]
pub fn tail_finiteness(
    sigma: &Measure,
    omega: &Measure,
    x0: &[f64],
    big_r: f64,
    c: f64,
    p: f64,
    opts: &BoundOptions,
) -> Result<TailReport> {
    let n = omega.dim();
    check_p(p, n)?;
    if !(big_r > 0.0 && big_r.is_finite()) {
        return Err(invalid("R", "tail radius must be positive and finite"));
    }
    let b = BoundIntegral::quasilinear(n, p, f64::INFINITY)
        .from_radius(big_r)
        .with_outer(OuterWeight::Annulus { kernel: Kernel::wolff_p(n, p)?, radius: big_r }, c)
        .with_inner(InnerWeight::Truncated(Kernel::riesz_p(n, p)?), c)
        .with_resolution(opts.node_resolution);
    let v = b.eval(sigma, omega, x0, &opts.quad)?;
    Ok(TailReport { value: v.value, err: v.err, finite: v.value.is_finite() && !v.divergent })
}
