//! The integral shared by every pointwise bound:
//!
//! `∫_0^R ( e^{c_o O_r(x)} r^{-a} ∫_{B(x,r)} e^{c_i J_r(z)} dω(z) )^e dr/r`
//!
//! where the outer potential `O_r` and the inner weight `J_r` are drawn
//! from a small menu. Radii run over a geometric grid between the nearest
//! ω-mass and the truncation; for `R = ∞` the integrand beyond the far
//! radius is a pure power and is summed in closed form.

use crate::capacity::quadrature_nodes;
use crate::error::{check_dim, invalid, Error, Result};
use crate::geometry::dist;
use crate::measures::Measure;
use crate::parallel;
use crate::potentials::{local_v, Branch, DyadicSumSpec, Kernel, PotValue, Profile, Quadrature};
use crate::quadrature::LogGrid;
use std::collections::BTreeMap;

/// Potential of `σ` at the evaluation point inside the outer exponential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OuterWeight {
    None,
    /// `∫_0^r (σ(B(x,t)) t^{-a})^q dt/t`.
    Truncated(Kernel),
    /// `∫_0^∞ (σ(B(x,t) ∩ B(x,r)) t^{-a})^q dt/t`, the potential of `χ_{B(x,r)} σ`.
    Restricted(Kernel),
    /// `∫_0^r (σ(B(x,t) \ B(x,R)) t^{-a})^q dt/t`.
    Annulus { kernel: Kernel, radius: f64 },
}

/// Weight integrated against `ω` over `B(x,r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerWeight {
    None,
    /// Truncated potential `∫_0^r (σ(B(z,t)) t^{-a})^q dt/t`.
    Truncated(Kernel),
    /// The local potential `V_{B(x,r)}(z)`.
    LocalV { p: f64, branch: Branch },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundIntegral {
    pub a: f64,
    pub exponent: f64,
    /// Truncation radius `R`; may be infinite.
    pub r_max: f64,
    /// Lower end of the radial integral, `0` for the full bound.
    pub r_min: f64,
    pub outer: OuterWeight,
    pub c_outer: f64,
    pub inner: InnerWeight,
    pub c_inner: f64,
    /// Cubature resolution for non-atomic `ω`.
    pub node_resolution: usize,
    pub dyadic: DyadicSumSpec,
}

const NODE_BATCH: usize = 256;
const MAX_NODE_BREAKS: usize = 256;

impl BoundIntegral {
    /// `∫_0^R (r^{p-n} ω(B(x,r)))^{1/(p-1)} dr/r`, the plain Wolff potential.
    pub fn quasilinear(n: usize, p: f64, r_max: f64) -> Self {
        BoundIntegral {
            a: n as f64 - p,
            exponent: 1.0 / (p - 1.0),
            r_max,
            r_min: 0.0,
            outer: OuterWeight::None,
            c_outer: 0.0,
            inner: InnerWeight::None,
            c_inner: 0.0,
            node_resolution: 4,
            dyadic: DyadicSumSpec::default(),
        }
    }

    pub fn with_outer(mut self, w: OuterWeight, c: f64) -> Self {
        self.outer = w;
        self.c_outer = c;
        self
    }

    pub fn with_inner(mut self, w: InnerWeight, c: f64) -> Self {
        self.inner = w;
        self.c_inner = c;
        self
    }

    /// Integrate over `r > r_min` only.
    pub fn from_radius(mut self, r_min: f64) -> Self {
        self.r_min = r_min;
        self
    }

    pub fn with_dyadic(mut self, spec: DyadicSumSpec) -> Self {
        self.dyadic = spec;
        self
    }

    pub fn with_resolution(mut self, res: usize) -> Self {
        self.node_resolution = res.max(1);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.exponent > 0.0) {
            return Err(invalid("bound", "need a positive radial power and outer exponent"));
        }
        if !(self.r_min >= 0.0 && self.r_min < self.r_max) {
            return Err(invalid("r_min", "need 0 <= r_min < r_max"));
        }
        if !(self.r_max > 0.0) {
            return Err(invalid("r_max", "truncation radius must be positive"));
        }
        if !(self.c_outer >= 0.0 && self.c_inner >= 0.0) {
            return Err(invalid("c", "exponential constants must be nonnegative"));
        }
        Ok(())
    }

    pub fn eval(&self, sigma: &Measure, omega: &Measure, x: &[f64], quad: &Quadrature) -> Result<PotValue> {
        self.validate()?;
        quad.validate()?;
        let n = omega.dim();
        check_dim(n, sigma.dim())?;
        check_dim(n, x.len())?;
        if omega.is_zero() {
            return Ok(PotValue::zero());
        }
        if omega.point_mass_at(x) > 0.0 && self.r_min == 0.0 {
            return Ok(PotValue::infinite());
        }
        // with no σ the inner exponential is identically one
        let inner_kind = if sigma.is_zero() || self.c_inner == 0.0 { InnerWeight::None } else { self.inner };
        let omega_sat = omega.support_radius_from(x);
        let sigma_sat = if sigma.is_zero() { 0.0 } else { sigma.support_radius_from(x) };
        let mut divergent = false;

        // ω samples, needed only when the inner weight varies with z
        let nodes: Vec<(Vec<f64>, f64, f64)> = if matches!(inner_kind, InnerWeight::None) {
            Vec::new()
        } else {
            let raw = if omega.is_atomic() {
                omega.nodes(1)?
            } else {
                match quadrature_nodes(omega, self.node_resolution) {
                    Ok(v) => v,
                    Err(Error::Unsupported(_)) => return Ok(PotValue { divergent: true, ..PotValue::infinite() }),
                    Err(e) => return Err(e),
                }
            };
            let v: Vec<_> = raw
                .into_iter()
                .filter(|(_, w)| *w > 0.0)
                .map(|(z, w)| {
                    let d = dist(&z, x);
                    (z, w, d)
                })
                .filter(|(_, _, d)| *d < self.r_max)
                .collect();
            if v.is_empty() {
                return Ok(PotValue::zero());
            }
            if self.r_min == 0.0 && v.iter().any(|(_, _, d)| *d == 0.0) {
                return Ok(PotValue::infinite());
            }
            v
        };

        let r_sat = omega_sat.max(sigma_sat);
        let (r_hi, tail) = if self.r_max.is_finite() {
            (self.r_max, false)
        } else if r_sat.is_finite() && !quad.tail_completion {
            (quad.far_radius(x).max(r_sat * 2.0), false)
        } else if r_sat.is_finite() {
            let base = match inner_kind {
                // inner potentials at z saturate by |z - x| + sigma_sat
                InnerWeight::Truncated(_) => omega_sat + sigma_sat,
                _ => r_sat,
            };
            (base.max(f64::MIN_POSITIVE) * 2f64.powi(quad.far_octaves as i32), true)
        } else {
            divergent = true;
            (quad.far_radius(x), false)
        };
        let d_min = if nodes.is_empty() {
            omega.support_distance(x)
        } else {
            nodes.iter().map(|n| n.2).fold(f64::INFINITY, f64::min)
        };
        if d_min >= r_hi {
            return Ok(PotValue { divergent, ..PotValue::zero() });
        }
        let (r_lo, lower_needed) = if self.r_min > 0.0 {
            (d_min.max(self.r_min), false)
        } else if d_min > 0.0 {
            (d_min, false)
        } else {
            (r_hi * 2f64.powi(-(quad.r_min_octaves as i32)), true)
        };
        if r_lo >= r_hi {
            return Ok(PotValue { divergent, ..PotValue::zero() });
        }

        let mut breaks = sigma.breakpoints(x);
        breaks.extend(omega.breakpoints(x));
        breaks.push(sigma_sat);
        breaks.push(omega_sat);
        if let OuterWeight::Annulus { radius, .. } = self.outer {
            breaks.push(radius);
        }
        if nodes.len() <= MAX_NODE_BREAKS {
            breaks.extend(nodes.iter().map(|n| n.2));
        }
        let grid = LogGrid::new(r_lo, r_hi, quad.k, 1.0, &breaks);
        let pts = &grid.points;

        // logarithm of the outer weight
        let (log_outer, d1) = self.outer_log(sigma, x, pts, r_hi, quad)?;
        divergent |= d1;
        // mass term ∫_{B(x,r)} e^{c J_r} dω
        let inner = match inner_kind {
            InnerWeight::None => parallel::map(pts, |&r| omega.ball_mass_unchecked(x, r).value),
            InnerWeight::Truncated(k) => {
                let (m, d2) = self.inner_truncated(sigma, &nodes, k, pts, r_hi, quad)?;
                divergent |= d2;
                m
            }
            InnerWeight::LocalV { p, branch } => {
                let spec = self.dyadic;
                let c = self.c_inner;
                let vals = parallel::map(pts, |&r| -> Result<f64> {
                    let mut acc = 0.0;
                    for (z, w, d) in &nodes {
                        if *d < r {
                            let v = local_v(sigma, x, r, z, p, branch, &spec)?;
                            acc += w * (c * v.value).exp();
                        }
                    }
                    Ok(acc)
                });
                vals.into_iter().collect::<Result<Vec<_>>>()?
            }
        };

        let e = self.exponent;
        let f: Vec<f64> = pts
            .iter()
            .zip(&log_outer)
            .zip(&inner)
            .map(|((&r, &lo), &m)| if m <= 0.0 { 0.0 } else { (e * (lo - self.a * r.ln() + m.ln())).exp() })
            .collect();
        let mut value = grid.integrate(&f);
        let mut err = 1e-13 * value;
        if lower_needed {
            // integrand ~ r^{e(n-a)} near a density point
            let g = e * (n as f64 - self.a);
            if g > 0.0 {
                let low = f.first().copied().unwrap_or(0.0) / g;
                value += low;
                err += low;
            } else {
                return Ok(PotValue::infinite());
            }
        }
        if tail && !f.is_empty() {
            let ae = self.a * e;
            let last = f.len() - 1;
            let r_last = pts[last];
            let t = f[last] * (r_hi / r_last).powf(-ae) / ae;
            // drift of f·r^{ae} over the last octave bounds the error
            let back = pts.iter().position(|&r| r >= r_last / 2.0).unwrap_or(0);
            let scaled = |i: usize| f[i] * pts[i].powf(ae);
            let drift = if scaled(back) > 0.0 { (scaled(last) / scaled(back) - 1.0).abs() } else { 0.0 };
            value += t;
            err += t * drift;
        }
        if !value.is_finite() {
            return Ok(PotValue { value: f64::INFINITY, err: f64::INFINITY, divergent });
        }
        Ok(PotValue { value, err, divergent })
    }

    fn outer_log(&self, sigma: &Measure, x: &[f64], pts: &[f64], r_hi: f64, quad: &Quadrature) -> Result<(Vec<f64>, bool)> {
        let c = self.c_outer;
        if sigma.is_zero() || c == 0.0 || matches!(self.outer, OuterWeight::None) {
            return Ok((vec![0.0; pts.len()], false));
        }
        match self.outer {
            OuterWeight::None => unreachable!(),
            OuterWeight::Truncated(k) | OuterWeight::Restricted(k) => {
                let prof = Profile::new(sigma, x, 0.0, self.r_max.min(r_hi), quad, &[])?;
                let cum = prof.cumulative(&k, pts);
                let mut out: Vec<f64> = cum.iter().map(|v| c * v).collect();
                if let OuterWeight::Restricted(_) = self.outer {
                    let masses = parallel::map(pts, |&r| sigma.ball_mass_unchecked(x, r).value);
                    for (o, (&m, &r)) in out.iter_mut().zip(masses.iter().zip(pts)) {
                        *o += c * k.constant_mass_integral(m, r, f64::INFINITY);
                    }
                }
                Ok((out, prof.unbounded))
            }
            OuterWeight::Annulus { kernel, radius } => {
                let mut out = vec![0.0; pts.len()];
                if radius >= r_hi {
                    return Ok((out, false));
                }
                let base = sigma.ball_mass_unchecked(x, radius).value;
                let g = LogGrid::new(radius, r_hi, quad.k, 1.0, &sigma.breakpoints(x));
                let vals: Vec<f64> = parallel::map(&g.points, |&s| kernel.eval((sigma.ball_mass_unchecked(x, s).value - base).max(0.0), s));
                let nodes = g.cumulative_nodes(&vals);
                for (o, &r) in out.iter_mut().zip(pts) {
                    if r > radius {
                        *o = c * g.cumulative_at(&vals, &nodes, r);
                    }
                }
                Ok((out, false))
            }
        }
    }

    fn inner_truncated(
        &self,
        sigma: &Measure,
        nodes: &[(Vec<f64>, f64, f64)],
        k: Kernel,
        pts: &[f64],
        r_hi: f64,
        quad: &Quadrature,
    ) -> Result<(Vec<f64>, bool)> {
        let c = self.c_inner;
        let mut total = vec![0.0; pts.len()];
        let mut divergent = false;
        if sigma.is_zero() || c == 0.0 {
            for (_, w, d) in nodes {
                for (t, &r) in total.iter_mut().zip(pts) {
                    if r > *d {
                        *t += w;
                    }
                }
            }
            return Ok((total, false));
        }
        // a radial σ looks the same from every point of a sphere about its
        // center, so nodes sharing a radius share one profile
        let center = sigma.radial_center();
        let mut groups: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
        match &center {
            Some(c) => {
                let mut by_radius: BTreeMap<u64, usize> = BTreeMap::new();
                for (i, (z, _, _)) in nodes.iter().enumerate() {
                    let rho = dist(z, c);
                    let key = (rho * (1u64 << 40) as f64).round() as u64;
                    let g = *by_radius.entry(key).or_insert_with(|| {
                        let mut rep = c.clone();
                        rep[0] += rho;
                        groups.push((rep, Vec::new()));
                        groups.len() - 1
                    });
                    groups[g].1.push(i);
                }
            }
            None => groups.extend(nodes.iter().enumerate().map(|(i, (z, _, _))| (z.clone(), vec![i]))),
        }
        for batch in groups.chunks(NODE_BATCH) {
            let parts = parallel::map(batch, |(z, members)| -> Result<(Vec<f64>, bool)> {
                let prof = Profile::new(sigma, z, 0.0, r_hi, quad, &[])?;
                let cum = prof.cumulative(&k, pts);
                let mut v = vec![0.0; pts.len()];
                for &i in members {
                    let (_, w, d) = &nodes[i];
                    for ((acc, &r), &j) in v.iter_mut().zip(pts).zip(&cum) {
                        if r > *d {
                            *acc += w * (c * j).exp();
                        }
                    }
                }
                Ok((v, prof.unbounded))
            });
            for part in parts {
                let (v, d) = part?;
                divergent |= d;
                for (t, x) in total.iter_mut().zip(v) {
                    *t += x;
                }
            }
        }
        Ok((total, divergent))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::dirac_wolff;
    use approx::assert_relative_eq;

    #[test]
    fn plain_wolff_of_dirac() {
        let omega = Measure::dirac(&[0.0; 3], 2.0);
        let x = [0.3, 0.1, 0.0];
        let d = dist(&x, &[0.0; 3]);
        for p in [1.5, 2.0, 2.5] {
            let b = BoundIntegral::quasilinear(3, p, f64::INFINITY);
            let v = b.eval(&Measure::zero(3), &omega, &x, &Quadrature::default()).unwrap();
            assert_relative_eq!(v.value, dirac_wolff(2.0, d, p, 3), max_relative = 1e-10);
            // the truncated inner path with σ = 0 gives the same number
            let b2 = b.clone().with_inner(InnerWeight::Truncated(Kernel::wolff_p(3, p).unwrap()), 1.0);
            let v2 = b2.eval(&Measure::zero(3), &omega, &x, &Quadrature::default()).unwrap();
            assert_relative_eq!(v2.value, v.value, max_relative = 1e-12);
        }
    }

    #[test]
    fn exponentials_increase_the_bound() {
        let sigma = Measure::uniform_ball(&[0.0; 3], 1.0, 0.01).unwrap();
        let omega = Measure::dirac(&[0.0; 3], 1.0);
        let x = [0.5, 0.0, 0.0];
        let k = Kernel::wolff_p(3, 2.0).unwrap();
        let q = Quadrature::with_k(16);
        let base = BoundIntegral::quasilinear(3, 2.0, f64::INFINITY).eval(&sigma, &omega, &x, &q).unwrap().value;
        let b = BoundIntegral::quasilinear(3, 2.0, f64::INFINITY)
            .with_outer(OuterWeight::Truncated(k), 1.0)
            .with_inner(InnerWeight::Truncated(k), 1.0);
        let v = b.eval(&sigma, &omega, &x, &q).unwrap();
        assert!(v.value > base && v.value.is_finite() && !v.divergent);
    }
}
