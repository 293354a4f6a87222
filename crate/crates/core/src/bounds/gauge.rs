//! The gauge equation `-Δ_p u = σ u^{p-1}`, `u → 1`: the exponential
//! supersolution and the two-sided exponential bounds.

use super::{power_reweight, ratio_or_zero, BoundOptions, Domain};
use crate::error::{check_dim, check_p, invalid, Result};
use crate::measures::Measure;
use crate::parallel;
use crate::potentials::wolff_p;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugePoint {
    pub x: Vec<f64>,
    /// `exp(β W_{1,p}σ(x))`.
    pub v: f64,
    /// `W_{1,p}(v^{p-1} dσ)(x)`.
    pub lhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeCheckReport {
    pub points: Vec<GaugePoint>,
    /// `max W_{1,p}(v^{p-1}dσ) / (v - 1)`.
    pub c_star: f64,
    pub degenerate: bool,
    pub divergent: bool,
}

/// Measures `C*` in `W_{1,p}(v^{p-1} dσ) ≤ C*(v - 1)` for `v = e^{β W_{1,p}σ}`.
pub fn gauge_supersolution_check(
    sigma: &Measure,
    beta: f64,
    p: f64,
    points: &[Vec<f64>],
    opts: &BoundOptions,
) -> Result<GaugeCheckReport> {
    let n = sigma.dim();
    check_p(p, n)?;
    opts.validate()?;
    if !(beta > 0.0) {
        return Err(invalid("beta", "gauge exponent must be positive"));
    }
    let quad = opts.quad;
    let v = |z: &[f64]| wolff_p(sigma, z, p, f64::INFINITY, &quad).map(|w| (beta * w.value).exp()).unwrap_or(f64::NAN);
    let weighted = if sigma.is_zero() { Some(Measure::zero(n)) } else { power_reweight(sigma, &v, p, opts.per_octave)? };
    let rows = parallel::map(points, |x| -> Result<(GaugePoint, bool)> {
        check_dim(n, x.len())?;
        let w = wolff_p(sigma, x, p, f64::INFINITY, &quad)?;
        let lhs = match &weighted {
            Some(mu) => wolff_p(mu, x, p, f64::INFINITY, &quad)?,
            None => crate::potentials::PotValue::infinite(),
        };
        // v - 1 without cancellation
        let (ratio, _) = ratio_or_zero(lhs.value, (beta * w.value).exp_m1());
        Ok((GaugePoint { x: x.clone(), v: (beta * w.value).exp(), lhs: lhs.value, ratio }, w.divergent || lhs.divergent))
    });
    let mut out = GaugeCheckReport { points: Vec::new(), c_star: 0.0, degenerate: true, divergent: false };
    for r in rows {
        let (pt, div) = r?;
        out.divergent |= div;
        if pt.lhs > 0.0 {
            out.degenerate = false;
        }
        out.c_star = out.c_star.max(pt.ratio);
        out.points.push(pt);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeBounds {
    /// `exp(W^{d(x)/2}_{1,p}σ(x) / c)`.
    pub lower: f64,
    /// `exp(c W^{2 diam Ω}_{1,p}σ(x))`.
    pub upper: f64,
    pub divergent: bool,
}

/// Exponential bounds for the gauge solution; in all of space both
/// truncations are infinite. `σ` is restricted to the domain first.
pub fn gauge_bounds(sigma: &Measure, x: &[f64], c: f64, p: f64, domain: &Domain, opts: &BoundOptions) -> Result<GaugeBounds> {
    let n = sigma.dim();
    check_p(p, n)?;
    domain.validate(n)?;
    if !(c > 0.0) {
        return Err(invalid("c", "gauge constant must be positive"));
    }
    let s = domain.restrict(sigma)?;
    let lo_r = if domain.is_entire() { f64::INFINITY } else { domain.distance_to_boundary(x) / 2.0 };
    let hi_r = 2.0 * domain.diameter();
    let lo = if lo_r > 0.0 { wolff_p(&s, x, p, lo_r, &opts.quad)? } else { crate::potentials::PotValue::zero() };
    let hi = wolff_p(&s, x, p, hi_r, &opts.quad)?;
    Ok(GaugeBounds { lower: (lo.value / c).exp(), upper: (c * hi.value).exp(), divergent: lo.divergent || hi.divergent })
}
