//! Truncated Riesz and Wolff potentials, the local potential `V`, and the
//! tail difference of a Wolff potential between two nearby points.
//!
//! Every potential here is an integral `∫ (μ(B(x,t)) t^{-a})^q dt/t` of the
//! ball-mass profile of a measure. [`Profile`] samples that profile once on
//! a geometric grid with the measure's jump radii as cell boundaries; below
//! the grid the profile is a known power of `t` and above the saturation
//! radius it is constant, so both ends are integrated in closed form.

use crate::error::{check_dim, check_p, invalid, Result};
use crate::geometry::{norm, unit_ball_volume};
use crate::measures::Measure;
use crate::parallel;
use crate::quadrature::LogGrid;
use serde::{Deserialize, Serialize};

/// Resolution of the `dt/t` integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Quadrature {
    /// Grid cells per octave of `t`.
    #[serde(rename = "K", alias = "k")]
    pub k: usize,
    /// Octaves below the saturation radius where the grid starts when no
    /// exact small-ball behavior of the measure is known.
    pub r_min_octaves: u32,
    /// Integrate the constant-mass tail beyond the support in closed form;
    /// otherwise it is sampled up to `2^far_octaves` times the scale.
    pub tail_completion: bool,
    /// Far radius, in octaves above `|x| + 1`, used where an integral to
    /// infinity cannot be completed in closed form.
    pub far_octaves: u32,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature { k: 32, r_min_octaves: 60, tail_completion: true, far_octaves: 20 }
    }
}

impl Quadrature {
    pub fn with_k(k: usize) -> Self {
        Quadrature { k, ..Self::default() }
    }

    /// Same settings with `factor` times as many cells per octave.
    pub fn refined(&self, factor: usize) -> Self {
        Quadrature { k: self.k * factor.max(1), ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("K", "need at least one cell per octave"));
        }
        if self.r_min_octaves == 0 || self.r_min_octaves > 1000 {
            return Err(invalid("r_min_octaves", "must lie in 1..=1000"));
        }
        Ok(())
    }

    pub(crate) fn far_radius(&self, x: &[f64]) -> f64 {
        (norm(x) + 1.0) * 2f64.powi(self.far_octaves as i32)
    }
}

/// A potential value with its declared error. `value = +∞` is a legitimate
/// result (an atom at the evaluation point); `divergent` marks a partial
/// value whose true integral is infinite or was cut at a far radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotValue {
    pub value: f64,
    pub err: f64,
    pub divergent: bool,
}

impl PotValue {
    pub fn zero() -> Self {
        PotValue { value: 0.0, err: 0.0, divergent: false }
    }

    pub fn infinite() -> Self {
        PotValue { value: f64::INFINITY, err: 0.0, divergent: false }
    }

    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }
}

/// Integrand `(M t^{-a})^q` of a potential in `dt/t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub a: f64,
    pub q: f64,
}

impl Kernel {
    /// `I_α`: `a = n - α`, `q = 1`.
    pub fn riesz(n: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < n as f64) {
            return Err(invalid("alpha", format!("need 0 < α < n = {n}, got {alpha}")));
        }
        Ok(Kernel { a: n as f64 - alpha, q: 1.0 })
    }

    /// `W_{β,s}`: `a = n - βs`, `q = 1/(s-1)`.
    pub fn wolff(n: usize, beta: f64, s: f64) -> Result<Self> {
        if !(s > 1.0 && s.is_finite()) {
            return Err(invalid("s", format!("need s > 1, got {s}")));
        }
        if !(beta > 0.0 && beta * s < n as f64) {
            return Err(invalid("beta", format!("need 0 < β < n/s = {}, got {beta}", n as f64 / s)));
        }
        Ok(Kernel { a: n as f64 - beta * s, q: 1.0 / (s - 1.0) })
    }

    /// `W_{1,p}`.
    pub fn wolff_p(n: usize, p: f64) -> Result<Self> {
        check_p(p, n)?;
        Self::wolff(n, 1.0, p)
    }

    /// `I_p`.
    pub fn riesz_p(n: usize, p: f64) -> Result<Self> {
        check_p(p, n)?;
        Self::riesz(n, p)
    }

    #[inline]
    pub fn eval(&self, m: f64, t: f64) -> f64 {
        if m <= 0.0 {
            0.0
        } else if self.q == 1.0 {
            m * t.powf(-self.a)
        } else {
            (self.q * (m.ln() - self.a * t.ln())).exp()
        }
    }

    /// `∫_lo^hi (M t^{-a})^q dt/t` for constant `M`.
    pub fn constant_mass_integral(&self, m: f64, lo: f64, hi: f64) -> f64 {
        if m <= 0.0 || hi <= lo {
            return 0.0;
        }
        let e = self.a * self.q;
        let hi_term = if hi.is_infinite() { 0.0 } else { hi.powf(-e) };
        m.powf(self.q) * (lo.powf(-e) - hi_term) / e
    }

    /// `∫_0^t (c s^n s^{-a})^q ds/s`, the contribution of a uniform density.
    fn power_mass_integral(&self, n: usize, c: f64, t: f64) -> f64 {
        let g = (n as f64 - self.a) * self.q;
        if c <= 0.0 || t <= 0.0 {
            0.0
        } else {
            c.powf(self.q) * t.powf(g) / g
        }
    }
}

/// The ball-mass profile `t ↦ μ(B(x,t))` on `[t_min, t_max]`.
#[derive(Debug, Clone)]
pub struct Profile {
    pub dim: usize,
    pub t_min: f64,
    pub t_max: f64,
    /// Grid covering `[t_lo, t_hi]`.
    pub grid: LogGrid,
    /// Masses at the grid's Gauss points and their declared errors.
    pub mass: Vec<f64>,
    pub mass_err: Vec<f64>,
    /// On `(t_min, t_lo)`, `μ(B(x,t)) = lower_coef·t^n`.
    t_lo: f64,
    lower_coef: f64,
    lower_exact: bool,
    /// Beyond `t_hi` the profile equals `total` (when `saturated`).
    t_hi: f64,
    total: f64,
    saturated: bool,
    /// `x` carries an atom, so every potential from `t = 0` is infinite.
    pub atom_at_x: bool,
    /// The profile does not saturate before `t_max = ∞`.
    pub unbounded: bool,
}

impl Profile {
    /// Samples `μ(B(x,t))` for `t ∈ [t_min, t_max]`. `t_min = 0` starts at
    /// the origin; `t_max = ∞` completes the tail analytically when the
    /// measure has bounded support.
    pub fn new(mu: &Measure, x: &[f64], t_min: f64, t_max: f64, quad: &Quadrature, extra_breaks: &[f64]) -> Result<Self> {
        check_dim(mu.dim(), x.len())?;
        quad.validate()?;
        if !(t_min >= 0.0) || !(t_max >= t_min) {
            return Err(invalid("r", format!("need 0 ≤ t_min ≤ t_max, got [{t_min}, {t_max}]")));
        }
        let n = mu.dim();
        let total = mu.total_mass();
        let r_sat = mu.support_radius_from(x);
        let atom_at_x = t_min == 0.0 && t_max > 0.0 && mu.point_mass_at(x) > 0.0;
        let unbounded = r_sat.is_infinite() && t_max.is_infinite();
        let mut t_hi = r_sat.min(t_max);
        let saturated = r_sat <= t_max;
        if unbounded || (!quad.tail_completion && t_max.is_infinite()) {
            t_hi = quad.far_radius(x).max(t_min * 2.0);
        }
        let d0 = mu.support_distance(x);
        let (mut t_lo, mut lower_coef, mut lower_exact) = (t_hi, 0.0, true);
        if d0 < t_hi {
            if d0 > 0.0 {
                t_lo = d0;
            } else {
                let (rho, delta) = mu.local_uniform(x);
                if delta > 0.0 {
                    t_lo = delta.min(t_hi);
                    lower_coef = rho * unit_ball_volume(n);
                } else {
                    t_lo = t_hi * 2f64.powi(-(quad.r_min_octaves as i32));
                    lower_coef = mu.ball_mass_unchecked(x, t_lo).value / t_lo.powi(n as i32);
                    lower_exact = false;
                }
            }
        }
        let t_lo = t_lo.max(t_min).min(t_hi);
        let mut breaks = mu.breakpoints(x);
        breaks.extend_from_slice(extra_breaks);
        // anchoring at a positive lower limit keeps the grid covariant
        // under dilations of the whole configuration
        let anchor = if t_min > 0.0 { t_min } else { 1.0 };
        let grid = LogGrid::new(t_lo, t_hi, quad.k, anchor, &breaks);
        let samples = parallel::map(&grid.points, |&t| mu.ball_mass_unchecked(x, t));
        let mass = samples.iter().map(|m| m.value).collect();
        let mass_err = samples.iter().map(|m| m.err).collect();
        Ok(Profile {
            dim: n,
            t_min,
            t_max,
            grid,
            mass,
            mass_err,
            t_lo,
            lower_coef,
            lower_exact,
            t_hi,
            total,
            saturated,
            atom_at_x,
            unbounded,
        })
    }

    /// Saturation radius bound: `μ(B(x,t)) = μ(R^n)` for `t ≥ self.hi()`
    /// whenever the profile saturates.
    pub fn hi(&self) -> f64 {
        self.t_hi
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    fn values(&self, kernel: &Kernel) -> Vec<f64> {
        self.grid.points.iter().zip(&self.mass).map(|(&t, &m)| kernel.eval(m, t)).collect()
    }

    fn value_errors(&self, kernel: &Kernel) -> f64 {
        self.grid
            .points
            .iter()
            .zip(self.mass.iter().zip(&self.mass_err))
            .zip(&self.grid.weights)
            .map(|((&t, (&m, &e)), &w)| {
                if e == 0.0 {
                    0.0
                } else {
                    0.5 * w * (kernel.eval(m + e, t) - kernel.eval((m - e).max(0.0), t))
                }
            })
            .sum()
    }

    fn lower_part(&self, kernel: &Kernel, t: f64) -> f64 {
        let t = t.min(self.t_lo);
        kernel.power_mass_integral(self.dim, self.lower_coef, t) - kernel.power_mass_integral(self.dim, self.lower_coef, self.t_min.min(t))
    }

    fn tail_part(&self, kernel: &Kernel, t: f64) -> f64 {
        if t <= self.t_hi || !self.saturated {
            return 0.0;
        }
        kernel.constant_mass_integral(self.total, self.t_hi, t)
    }

    /// `∫_{t_min}^{t_max} (μ(B(x,t)) t^{-a})^q dt/t`.
    pub fn integral(&self, kernel: &Kernel) -> PotValue {
        if self.atom_at_x {
            return PotValue::infinite();
        }
        let vals = self.values(kernel);
        let lower = self.lower_part(kernel, self.t_lo);
        let value = lower + self.grid.integrate(&vals) + self.tail_part(kernel, self.t_max);
        let mut err = self.value_errors(kernel);
        if !self.lower_exact {
            err += lower;
        }
        err += 1e-14 * value;
        PotValue { value, err, divergent: self.unbounded }
    }

    /// The truncated potential `∫_{t_min}^{r} (...) dt/t` at each radius.
    pub fn cumulative(&self, kernel: &Kernel, radii: &[f64]) -> Vec<f64> {
        if self.atom_at_x {
            return radii.iter().map(|&r| if r > 0.0 { f64::INFINITY } else { 0.0 }).collect();
        }
        let vals = self.values(kernel);
        let nodes = self.grid.cumulative_nodes(&vals);
        let grid_total = nodes.last().copied().unwrap_or(0.0);
        radii
            .iter()
            .map(|&r| {
                let r = r.min(self.t_max);
                if r <= self.t_min {
                    0.0
                } else if r <= self.t_lo {
                    self.lower_part(kernel, r)
                } else if r <= self.t_hi {
                    self.lower_part(kernel, self.t_lo) + self.grid.cumulative_at(&vals, &nodes, r)
                } else {
                    self.lower_part(kernel, self.t_lo) + grid_total + self.tail_part(kernel, r)
                }
            })
            .collect()
    }

    /// `max_t μ(B(x,t)) t^{-a}` over the sampled radii and the saturation
    /// radius; a sampled lower estimate of the ball-condition constant.
    pub fn ball_ratio(&self, a: f64) -> f64 {
        let mut best = self.grid.points.iter().zip(&self.mass).map(|(&t, &m)| m * t.powf(-a)).fold(0.0, f64::max);
        if self.saturated && self.t_hi > 0.0 && self.t_hi.is_finite() {
            best = best.max(self.total * self.t_hi.powf(-a));
        }
        if self.lower_coef > 0.0 {
            best = best.max(self.lower_coef * self.t_lo.powf(self.dim as f64 - a));
        }
        best
    }
}

/// `∫_0^{r} (μ(B(x,t)) t^{-a})^q dt/t` for a generic kernel.
pub fn kernel_potential(mu: &Measure, x: &[f64], kernel: &Kernel, r_trunc: f64, quad: &Quadrature) -> Result<PotValue> {
    if !(r_trunc >= 0.0) {
        return Err(invalid("r_trunc", "truncation radius must be nonnegative"));
    }
    if r_trunc == 0.0 {
        check_dim(mu.dim(), x.len())?;
        return Ok(PotValue::zero());
    }
    Ok(Profile::new(mu, x, 0.0, r_trunc, quad, &[])?.integral(kernel))
}

/// `I_α^r μ(x)`.
pub fn riesz(mu: &Measure, x: &[f64], alpha: f64, r_trunc: f64, quad: &Quadrature) -> Result<PotValue> {
    kernel_potential(mu, x, &Kernel::riesz(mu.dim(), alpha)?, r_trunc, quad)
}

/// `W_{β,s}^r μ(x)`.
pub fn wolff(mu: &Measure, x: &[f64], beta: f64, s: f64, r_trunc: f64, quad: &Quadrature) -> Result<PotValue> {
    kernel_potential(mu, x, &Kernel::wolff(mu.dim(), beta, s)?, r_trunc, quad)
}

/// `W_{1,p}^r μ(x)`.
pub fn wolff_p(mu: &Measure, x: &[f64], p: f64, r_trunc: f64, quad: &Quadrature) -> Result<PotValue> {
    kernel_potential(mu, x, &Kernel::wolff_p(mu.dim(), p)?, r_trunc, quad)
}

/// Closed form of `W_{1,p}(a δ_{x_0})(x)` at distance `d = |x - x_0|`.
pub fn dirac_wolff(a: f64, d: f64, p: f64, n: usize) -> f64 {
    let n = n as f64;
    a.powf(1.0 / (p - 1.0)) * (p - 1.0) / (n - p) * d.powf((p - n) / (p - 1.0))
}

/// Which sum defines the local potential `V_{B(c,r)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `1 < p ≤ 2`: linear sum over `j ≥ 0`.
    Low,
    /// `p ≥ 2`: `1/(p-1)` powers over all `j ∈ Z`.
    High,
}

impl Branch {
    pub fn for_p(p: f64) -> Self {
        if p <= 2.0 {
            Branch::Low
        } else {
            Branch::High
        }
    }
}

/// Settings for the dyadic sums over balls `B(y, r 2^{-j})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DyadicSumSpec {
    /// Octaves above `r` kept in the `j < 0` part.
    pub j_lo: u32,
    /// Stop once a term falls below this fraction of the running sum.
    pub rel_tol: f64,
    pub max_terms: u32,
}

impl Default for DyadicSumSpec {
    fn default() -> Self {
        DyadicSumSpec { j_lo: 40, rel_tol: 1e-16, max_terms: 1100 }
    }
}

/// `Σ_{j ≥ -j_lo} (μ(B(y, r2^{-j}) ∩ clip) (r2^{-j})^{-a})^q`.
///
/// With a clip ball the large-`j` terms stop varying once `B(y, r2^{-j})`
/// covers it, and that geometric run is summed exactly; the part beyond
/// `j_lo` octaves becomes the reported error. Small balls inside a region
/// of constant density also sum in closed form.
pub fn dyadic_ball_sum(
    mu: &Measure,
    y: &[f64],
    r: f64,
    a: f64,
    q: f64,
    clip: Option<(&[f64], f64)>,
    spec: &DyadicSumSpec,
) -> Result<PotValue> {
    check_dim(mu.dim(), y.len())?;
    if !(r > 0.0) {
        return Err(invalid("r", "radius must be positive"));
    }
    let n = mu.dim();
    let mass = |s: f64| -> Result<f64> {
        Ok(match clip {
            Some((c, rc)) => mu.ball_pair_mass(y, s, c, rc)?.value,
            None => mu.ball_mass_unchecked(y, s).value,
        })
    };
    let inside_clip = match clip {
        Some((c, rc)) => rc - crate::geometry::dist(c, y),
        None => f64::INFINITY,
    };
    if inside_clip >= 0.0 && mu.point_mass_at(y) > 0.0 {
        return Ok(PotValue::infinite());
    }
    let term = |m: f64, s: f64| if m <= 0.0 { 0.0 } else { (q * (m.ln() - a * s.ln())).exp() };
    let mut value = 0.0;
    let mut err = 0.0;
    // j < 0: radii r 2^m for m = 1..j_lo
    if let Some((c, rc)) = clip {
        let cover = crate::geometry::dist(c, y) + rc;
        let whole = mu.ball_pair_mass(c, rc, c, rc)?.value;
        let ratio = 2f64.powf(-a * q);
        for m in 1..=spec.j_lo {
            let s = r * 2f64.powi(m as i32);
            if s >= cover {
                // Σ_{m' ≥ m}^{j_lo} whole^q s'^{-aq}
                let count = (spec.j_lo - m + 1) as i32;
                value += term(whole, s) * (1.0 - ratio.powi(count)) / (1.0 - ratio);
                break;
            }
            value += term(mass(s)?, s);
        }
        let s_cut = r * 2f64.powi(spec.j_lo as i32 + 1);
        err += term(whole, s_cut) / (1.0 - ratio);
    }
    let (rho, delta) = mu.local_uniform(y);
    let uniform_radius = delta.min(inside_clip);
    let mut s = r;
    for j in 0..spec.max_terms {
        if rho.is_finite() && s <= uniform_radius && uniform_radius > 0.0 {
            // terms (ρ ω_n)^q s^{(n-a)q} 2^{-i(n-a)q}
            let g = (n as f64 - a) * q;
            if rho > 0.0 {
                value += term(rho * unit_ball_volume(n) * s.powi(n as i32), s) / (1.0 - 2f64.powf(-g));
            }
            return Ok(PotValue { value, err: err + 1e-14 * value, divergent: false });
        }
        let m = mass(s)?;
        if m <= 0.0 {
            break;
        }
        let t = term(m, s);
        value += t;
        if j > 8 && t < spec.rel_tol * value {
            err += 2.0 * t;
            break;
        }
        if j + 1 == spec.max_terms {
            return Ok(PotValue { value, err: f64::INFINITY, divergent: true });
        }
        s *= 0.5;
    }
    Ok(PotValue { value, err: err + 1e-14 * value, divergent: false })
}

/// The local potential `V_{B(c,r)}(y)`.
pub fn local_v(sigma: &Measure, c: &[f64], r: f64, y: &[f64], p: f64, branch: Branch, spec: &DyadicSumSpec) -> Result<PotValue> {
    let n = sigma.dim();
    check_p(p, n)?;
    check_dim(n, c.len())?;
    let a = n as f64 - p;
    match branch {
        Branch::Low => dyadic_ball_sum(sigma, y, r, a, 1.0, Some((c, r)), &DyadicSumSpec { j_lo: 0, ..*spec }),
        Branch::High => dyadic_ball_sum(sigma, y, r, a, 1.0 / (p - 1.0), Some((c, r)), spec),
    }
}

/// The `j ≥ 0` part of `V_{B(c,r)}(y)` alone, shared by both branches.
pub fn local_v_small_balls(sigma: &Measure, c: &[f64], r: f64, y: &[f64], p: f64, spec: &DyadicSumSpec) -> Result<PotValue> {
    let n = sigma.dim();
    check_p(p, n)?;
    dyadic_ball_sum(sigma, y, r, n as f64 - p, 1.0 / (p - 1.0), Some((c, r)), &DyadicSumSpec { j_lo: 0, ..*spec })
}

/// Result of [`tail_difference`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailDifference {
    pub value: f64,
    pub err: f64,
    /// Largest sampled `σ(B(z,r)) r^{αs-n}` over both profiles.
    pub ball_ratio: f64,
}

/// `|∫_t^∞ [(σ(B(x,r)) r^{αs-n})^{1/(s-1)} - (σ(B(y,r)) r^{αs-n})^{1/(s-1)}] dr/r|`
/// for `y ∈ B(x,t)`.
pub fn tail_difference(sigma: &Measure, x: &[f64], y: &[f64], t: f64, alpha: f64, s: f64, quad: &Quadrature) -> Result<TailDifference> {
    check_dim(sigma.dim(), x.len())?;
    check_dim(sigma.dim(), y.len())?;
    if !(t > 0.0) {
        return Err(invalid("t", "radius must be positive"));
    }
    if crate::geometry::dist(x, y) > t {
        return Err(crate::Error::Precondition("y must lie in B(x, t)".into()));
    }
    let kernel = Kernel::wolff(sigma.dim(), alpha, s)?;
    if x == y {
        let px = Profile::new(sigma, x, t, f64::INFINITY, quad, &[])?;
        return Ok(TailDifference { value: 0.0, err: 0.0, ball_ratio: px.ball_ratio(kernel.a) });
    }
    // shared breakpoints keep the two integrands on the same cells
    let mut breaks = sigma.breakpoints(x);
    breaks.extend(sigma.breakpoints(y));
    let px = Profile::new(sigma, x, t, f64::INFINITY, quad, &breaks)?;
    let py = Profile::new(sigma, y, t, f64::INFINITY, quad, &breaks)?;
    let (ix, iy) = (px.integral(&kernel), py.integral(&kernel));
    if ix.divergent || iy.divergent {
        return Err(crate::Error::Divergent("tail integral of a measure with unbounded support".into()));
    }
    Ok(TailDifference {
        value: (ix.value - iy.value).abs(),
        err: ix.err + iy.err,
        ball_ratio: px.ball_ratio(kernel.a).max(py.ball_ratio(kernel.a)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn q() -> Quadrature {
        Quadrature::default()
    }

    #[test]
    fn dirac_riesz_and_wolff_closed_forms() {
        let d = Measure::dirac(&[0.0; 3], 1.0);
        let x = [0.5, 0.0, 0.0];
        assert_relative_eq!(riesz(&d, &x, 2.0, f64::INFINITY, &q()).unwrap().value, 2.0, max_relative = 1e-13);
        assert_relative_eq!(wolff_p(&d, &x, 2.0, f64::INFINITY, &q()).unwrap().value, 2.0, max_relative = 1e-13);
        assert!(riesz(&d, &[0.0; 3], 2.0, f64::INFINITY, &q()).unwrap().is_infinite());
        assert_eq!(riesz(&d, &x, 2.0, 0.4, &q()).unwrap().value, 0.0);
        let d5 = Measure::dirac(&[0.0; 5], 2.0);
        let x5 = [0.3, -0.2, 0.1, 0.0, 0.4];
        let got = wolff_p(&d5, &x5, 3.0, f64::INFINITY, &q()).unwrap().value;
        assert_relative_eq!(got, dirac_wolff(2.0, norm(&x5), 3.0, 5), max_relative = 1e-13);
    }

    #[test]
    fn lebesgue_ball_center_value() {
        let leb = Measure::uniform_ball(&[0.0; 3], 1.0, 1.0).unwrap();
        let v = wolff_p(&leb, &[0.0; 3], 2.0, 1.0, &q()).unwrap();
        assert_relative_eq!(v.value, 2.0 * PI / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn off_center_lebesgue_matches_newtonian_potential() {
        // ∫_0^∞ μ(B(x,t)) t^{-2} dt = ∫ |x - z|^{-1} dz over the unit ball
        let leb = Measure::uniform_ball(&[0.0; 3], 1.0, 1.0).unwrap();
        for &d in &[0.0, 0.3, 0.95, 1.0, 2.5] {
            let x = [d, 0.0, 0.0];
            let v = riesz(&leb, &x, 2.0, f64::INFINITY, &q()).unwrap().value;
            let exact = if d <= 1.0 { 2.0 * PI * (1.0 - d * d / 3.0) } else { 4.0 * PI / (3.0 * d) };
            assert_relative_eq!(v, exact, max_relative = 1e-9);
        }
    }

    #[test]
    fn cumulative_is_truncated_potential() {
        let leb = Measure::uniform_ball(&[0.0; 3], 1.0, 1.0).unwrap();
        let x = [0.4, 0.1, 0.0];
        let k = Kernel::wolff_p(3, 2.5).unwrap();
        let prof = Profile::new(&leb, &x, 0.0, f64::INFINITY, &q(), &[]).unwrap();
        let radii = [0.05, 0.3, 0.77, 1.4, 3.0];
        let cum = prof.cumulative(&k, &radii);
        for (i, &r) in radii.iter().enumerate() {
            let direct = kernel_potential(&leb, &x, &k, r, &q()).unwrap().value;
            assert_relative_eq!(cum[i], direct, max_relative = 1e-9);
        }
    }

    #[test]
    fn unbounded_support_is_flagged() {
        let leb = Measure::uniform_ball(&[0.0; 3], f64::INFINITY, 1.0).unwrap();
        let v = wolff_p(&leb, &[0.0; 3], 2.0, f64::INFINITY, &q()).unwrap();
        assert!(v.divergent);
        let v = wolff_p(&leb, &[0.0; 3], 2.0, 1.0, &q()).unwrap();
        assert!(!v.divergent);
        assert_relative_eq!(v.value, 2.0 * PI / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn tail_completion_off_agrees() {
        let leb = Measure::uniform_ball(&[0.0; 3], 1.0, 1.0).unwrap();
        let x = [0.2, 0.0, 0.0];
        let on = wolff_p(&leb, &x, 2.0, f64::INFINITY, &q()).unwrap().value;
        let off = wolff_p(&leb, &x, 2.0, f64::INFINITY, &Quadrature { tail_completion: false, far_octaves: 60, ..q() }).unwrap().value;
        assert_relative_eq!(on, off, max_relative = 1e-10);
    }

    #[test]
    fn local_v_basics() {
        let spec = DyadicSumSpec::default();
        let zero = Measure::zero(3);
        for b in [Branch::Low, Branch::High] {
            assert_eq!(local_v(&zero, &[0.0; 3], 1.0, &[0.2, 0.0, 0.0], 2.5, b, &spec).unwrap().value, 0.0);
        }
        let atom = Measure::dirac(&[0.2, 0.0, 0.0], 1.0);
        assert!(local_v(&atom, &[0.0; 3], 1.0, &[0.2, 0.0, 0.0], 1.5, Branch::Low, &spec).unwrap().is_infinite());
        // Lebesgue ball around y: Σ_j ω (r2^{-j})^n (r2^{-j})^{p-n} = ω r^p/(1 - 2^{-p})
        let leb = Measure::uniform_ball(&[0.0; 3], 1.0, 1.0).unwrap();
        let v = local_v(&leb, &[0.0; 3], 1.0, &[0.0; 3], 2.0, Branch::Low, &spec).unwrap();
        assert_relative_eq!(v.value, 16.0 * PI / 9.0, max_relative = 1e-12);
    }

    #[test]
    fn high_branch_large_balls_are_geometric() {
        let spec = DyadicSumSpec::default();
        let leb = Measure::uniform_ball(&[0.0; 3], 1.0, 1.0).unwrap();
        let y = [0.3, 0.2, 0.0];
        let c = [0.1, 0.0, 0.0];
        let r = 0.6;
        let hi = local_v(&leb, &c, r, &y, 2.0, Branch::High, &spec).unwrap();
        let small = local_v_small_balls(&leb, &c, r, &y, 2.0, &spec).unwrap();
        let lo = local_v(&leb, &c, r, &y, 2.0, Branch::Low, &spec).unwrap();
        assert_relative_eq!(small.value, lo.value, max_relative = 1e-13);
        // direct sum of the j < 0 terms
        let mut direct = 0.0;
        for m in 1..=40 {
            let s = r * 2f64.powi(m);
            direct += leb.ball_pair_mass(&y, s, &c, r).unwrap().value / s;
        }
        assert_relative_eq!(hi.value - lo.value, direct, max_relative = 1e-12);
        assert!(hi.err > 0.0 && hi.err < 1e-10);
    }

    #[test]
    fn tail_difference_is_scale_invariant() {
        let leb = Measure::uniform_ball(&[0.0; 3], 1.0, 1.0).unwrap();
        let (x, y, t) = ([0.3, 0.0, 0.0], [0.5, 0.2, 0.0], 0.4);
        let base = tail_difference(&leb, &x, &y, t, 1.0, 2.0, &q()).unwrap();
        assert!(base.value > 0.0 && base.value.is_finite());
        let lam = 3.7;
        let scaled = leb.pushforward(lam, lam.powf(3.0 - 2.0));
        let xs: Vec<f64> = x.iter().map(|c| c * lam).collect();
        let ys: Vec<f64> = y.iter().map(|c| c * lam).collect();
        let other = tail_difference(&scaled, &xs, &ys, lam * t, 1.0, 2.0, &q()).unwrap();
        assert_relative_eq!(base.value, other.value, max_relative = 1e-9);
        assert_eq!(tail_difference(&leb, &x, &x, t, 1.0, 2.0, &q()).unwrap().value, 0.0);
        assert!(tail_difference(&leb, &x, &[2.0, 0.0, 0.0], t, 1.0, 2.0, &q()).is_err());
    }
}
