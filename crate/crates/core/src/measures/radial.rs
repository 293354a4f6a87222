//! Radially symmetric measures as piecewise-constant densities on shells.
//!
//! Shell `i` is `{r_{i-1} ≤ |z - c| < r_i}` with density `ρ_i`. Any ball
//! mass then telescopes into `Σ (ρ_i - ρ_{i+1}) |B(c, r_i) ∩ B(x, r)|`, and
//! the lens volumes have closed forms, so off-center queries are exact up
//! to rounding. Power-law densities are stored as fine geometric shells
//! carrying their exact shell masses, with the density variation inside
//! each shell reported as error.

use crate::error::{invalid, Result};
use crate::geometry::{ball_volume, dist, lens_volume, region_volume, sphere_area, unit_ball_volume, Shape};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub coef: f64,
    pub gamma: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialMeasure {
    pub dim: usize,
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    pub density: Vec<f64>,
    cum: Vec<f64>,
    shell_err: Vec<f64>,
    power: Option<PowerLaw>,
    /// Bisection depth for box intersections.
    pub depth: u32,
}

impl RadialMeasure {
    pub fn shells(dim: usize, center: Vec<f64>, radii: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if center.len() != dim {
            return Err(invalid("center", format!("expected {dim} coordinates")));
        }
        if radii.len() != density.len() || radii.is_empty() {
            return Err(invalid("radii", "need one density per shell and at least one shell"));
        }
        let mut prev = 0.0;
        for (i, (&r, &rho)) in radii.iter().zip(&density).enumerate() {
            if !(r > prev) || r.is_nan() {
                return Err(invalid("radii", "shell radii must be positive and strictly increasing"));
            }
            if r.is_infinite() && i + 1 != radii.len() {
                return Err(invalid("radii", "only the last shell may be unbounded"));
            }
            if !(rho >= 0.0) || !rho.is_finite() {
                return Err(invalid("densities", "densities must be finite and nonnegative"));
            }
            prev = r;
        }
        let shell_err = vec![0.0; radii.len()];
        Ok(Self::assemble(dim, center, radii, density, shell_err, None))
    }

    /// Uniform density on `B(center, radius)`; `radius = ∞` is Lebesgue
    /// measure scaled by `density` on all of `R^n`.
    pub fn uniform_ball(dim: usize, center: Vec<f64>, radius: f64, density: f64) -> Result<Self> {
        Self::shells(dim, center, vec![radius], vec![density])
    }

    /// Density `coef·|z - c|^γ` on `B(c, radius)`, `γ > -n`, stored on
    /// `per_octave` geometric shells down to `radius·2^{-octaves}`.
    pub fn power(dim: usize, center: Vec<f64>, law: PowerLaw, per_octave: usize, octaves: u32) -> Result<Self> {
        let n = dim as f64;
        if !(law.gamma > -n) || !(law.coef >= 0.0) || !(law.radius > 0.0 && law.radius.is_finite()) {
            return Err(invalid("profile", "power law needs γ > -n, coef ≥ 0 and a finite positive radius"));
        }
        if center.len() != dim {
            return Err(invalid("center", format!("expected {dim} coordinates")));
        }
        let g = law.gamma + n;
        let shell_mass = |a: f64, b: f64| law.coef * sphere_area(dim) * (b.powf(g) - a.powf(g)) / g;
        let k = per_octave.max(1) as u32;
        let steps = k * octaves;
        let mut radii = Vec::with_capacity(steps as usize + 1);
        let r0 = law.radius * 2f64.powf(-(octaves as f64));
        radii.push(r0);
        for j in 1..=steps {
            radii.push(r0 * 2f64.powf(j as f64 / k as f64));
        }
        *radii.last_mut().unwrap() = law.radius;
        let mut density = Vec::with_capacity(radii.len());
        let mut shell_err = Vec::with_capacity(radii.len());
        let mut a = 0.0;
        for &b in &radii {
            let m = shell_mass(a, b);
            let vol = ball_volume(dim, b) - ball_volume(dim, a);
            density.push(m / vol);
            let var = if a == 0.0 { m } else { (law.coef * (b.powf(law.gamma) - a.powf(law.gamma))).abs() * vol };
            shell_err.push(var);
            a = b;
        }
        Ok(Self::assemble(dim, center, radii, density, shell_err, Some(law)))
    }

    fn assemble(dim: usize, center: Vec<f64>, radii: Vec<f64>, density: Vec<f64>, shell_err: Vec<f64>, power: Option<PowerLaw>) -> Self {
        let mut cum = Vec::with_capacity(radii.len());
        let mut acc = 0.0;
        let mut a = 0.0;
        for (&b, &rho) in radii.iter().zip(&density) {
            acc += if rho == 0.0 { 0.0 } else { rho * (ball_volume(dim, b) - ball_volume(dim, a)) };
            cum.push(acc);
            a = b;
        }
        RadialMeasure { dim, center, radii, density, cum, shell_err, power, depth: 6 }
    }

    pub fn total_mass(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    pub fn outer_radius(&self) -> f64 {
        // outermost shell with positive density
        self.radii.iter().zip(&self.density).rev().find(|(_, d)| **d > 0.0).map(|(r, _)| *r).unwrap_or(0.0)
    }

    fn inner_radius(&self) -> f64 {
        let mut a = 0.0;
        for (&b, &d) in self.radii.iter().zip(&self.density) {
            if d > 0.0 {
                return a;
            }
            a = b;
        }
        f64::INFINITY
    }

    /// `M(t) = μ(B(center, t))`.
    pub fn cumulative(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if let Some(law) = self.power {
            let g = law.gamma + self.dim as f64;
            return law.coef * sphere_area(self.dim) * t.min(law.radius).powf(g) / g;
        }
        let i = self.radii.partition_point(|&r| r < t);
        if i == self.radii.len() {
            return self.total_mass();
        }
        let (a, base) = if i == 0 { (0.0, 0.0) } else { (self.radii[i - 1], self.cum[i - 1]) };
        let rho = self.density[i];
        if rho == 0.0 {
            return base;
        }
        base + rho * unit_ball_volume(self.dim) * (t.powi(self.dim as i32) - a.powi(self.dim as i32))
    }

    fn offset(&self, x: &[f64]) -> f64 {
        let d = dist(&self.center, x);
        let scale = self.radii[0].min(1.0).max(1e-300);
        if d <= 1e-14 * scale {
            0.0
        } else {
            d
        }
    }

    /// Mass of the closed ball `B(x, r)` and its declared error.
    pub fn ball_mass(&self, x: &[f64], r: f64) -> (f64, f64) {
        if r <= 0.0 {
            return (0.0, 0.0);
        }
        let d = self.offset(x);
        if d == 0.0 {
            return (self.cumulative(r), 0.0);
        }
        let n = self.dim;
        let k = self.radii.len();
        let rho = |i: usize| if i < k { self.density[i] } else { 0.0 };
        let ia = self.radii.partition_point(|&ri| ri <= r - d);
        let iz = self.radii.partition_point(|&ri| ri <= d - r);
        let ib = self.radii.partition_point(|&ri| ri < r + d);
        let mut mass = 0.0;
        if ia > 0 {
            let j = ia - 1;
            mass += self.cum[j] - rho(ia) * ball_volume(n, self.radii[j]);
        }
        if ib < k {
            mass += rho(ib) * ball_volume(n, r);
        }
        let mut err = 0.0;
        let start = ia.max(iz);
        let mut lens_prev = if start == 0 { 0.0 } else { lens_volume(n, self.radii[start - 1], r, d) };
        for i in start..ib.min(k) {
            let w = rho(i) - rho(i + 1);
            let lens = lens_volume(n, self.radii[i], r, d);
            if w != 0.0 {
                mass += w * lens;
            }
            // density variation only acts on the part of the shell inside the ball
            if self.shell_err[i] > 0.0 {
                let shell = ball_volume(n, self.radii[i]) - if i == 0 { 0.0 } else { ball_volume(n, self.radii[i - 1]) };
                let frac = if i == 0 || shell <= 0.0 { 1.0 } else { ((lens - lens_prev) / shell).clamp(0.0, 1.0) };
                err += self.shell_err[i] * frac;
            }
            lens_prev = lens;
        }
        let mass = mass.max(0.0);
        (mass, err + 1e-13 * mass)
    }

    /// Mass of the half-open box `[lo, hi)`.
    pub fn box_mass(&self, lo: &[f64], hi: &[f64]) -> (f64, f64) {
        let n = self.dim;
        let mut near = 0.0;
        let mut far = 0.0;
        for i in 0..n {
            let c = self.center[i];
            let dn = (lo[i] - c).max(c - hi[i]).max(0.0);
            let df = (c - lo[i]).abs().max((hi[i] - c).abs());
            near += dn * dn;
            far += df * df;
        }
        let (near, far) = (near.sqrt(), far.sqrt());
        let k = self.radii.len();
        let rho = |i: usize| if i < k { self.density[i] } else { 0.0 };
        let i0 = self.radii.partition_point(|&ri| ri <= near);
        let ib = self.radii.partition_point(|&ri| ri < far);
        let vol: f64 = lo.iter().zip(hi).map(|(a, b)| (b - a).max(0.0)).product();
        let mut mass = 0.0;
        let mut err = 0.0;
        if ib < k {
            mass += rho(ib) * vol;
        }
        for i in i0..ib.min(k) {
            let w = rho(i) - rho(i + 1);
            if w == 0.0 {
                continue;
            }
            let (v, e) = region_volume(lo, hi, &[Shape::Ball { center: self.center.clone(), radius: self.radii[i] }], self.depth);
            mass += w * v;
            err += w.abs() * e + self.shell_err[i];
        }
        (mass.max(0.0), err)
    }

    /// `μ(B(y,s) ∩ B(x,r))` for balls in general position. Shells that
    /// contain or miss the lens are exact; the others are resolved by
    /// bisection and contribute to the error.
    pub fn ball_pair_mass(&self, y: &[f64], s: f64, x: &[f64], r: f64) -> (f64, f64) {
        let n = self.dim;
        let dxy = dist(x, y);
        let lens = lens_volume(n, s, r, dxy);
        if lens <= 0.0 {
            return (0.0, 0.0);
        }
        let (dy, dx) = (dist(&self.center, y), dist(&self.center, x));
        let (sc, small, small_r) = if s <= r { (dy, y, s) } else { (dx, x, r) };
        let lo: Vec<f64> = small.iter().map(|c| c - small_r).collect();
        let hi: Vec<f64> = small.iter().map(|c| c + small_r).collect();
        let k = self.radii.len();
        let rho = |i: usize| if i < k { self.density[i] } else { 0.0 };
        let mut mass = 0.0;
        let mut err = 0.0;
        for i in 0..k {
            let w = rho(i) - rho(i + 1);
            if w == 0.0 {
                continue;
            }
            let ri = self.radii[i];
            let part = if ri.is_infinite() || ri >= sc + small_r {
                lens
            } else if ri + dy <= s {
                lens_volume(n, ri, r, dx)
            } else if ri + dx <= r {
                lens_volume(n, ri, s, dy)
            } else if ri <= dy - s || ri <= dx - r {
                0.0
            } else {
                let shapes = [
                    Shape::Ball { center: self.center.clone(), radius: ri },
                    Shape::Ball { center: y.to_vec(), radius: s },
                    Shape::Ball { center: x.to_vec(), radius: r },
                ];
                let (v, e) = region_volume(&lo, &hi, &shapes, self.depth + 2);
                err += w.abs() * e;
                v
            };
            mass += w * part;
            if part > 0.0 {
                err += self.shell_err[i];
            }
        }
        (mass.max(0.0), err + 1e-13 * mass)
    }

    /// Restriction to `B(center, radius)`; only concentric balls are exact.
    pub fn truncate(&self, radius: f64) -> Self {
        let mut radii = Vec::new();
        let mut density = Vec::new();
        let mut errs = Vec::new();
        for i in 0..self.radii.len() {
            let r = self.radii[i].min(radius);
            radii.push(r);
            density.push(self.density[i]);
            errs.push(self.shell_err[i]);
            if self.radii[i] >= radius {
                break;
            }
        }
        let power = self.power.map(|p| PowerLaw { radius: p.radius.min(radius), ..p });
        let mut out = Self::assemble(self.dim, self.center.clone(), radii, density, errs, power);
        out.depth = self.depth;
        out
    }

    /// `(ρ, δ)` with `μ(B(x,t)) = ρ|B(x,t)|` for all `t ≤ δ`; `δ = 0` when
    /// `x` sits on a shell boundary or inside a power-law profile.
    pub fn local_uniform(&self, x: &[f64]) -> (f64, f64) {
        let d = self.offset(x);
        let i = self.radii.partition_point(|&r| r <= d);
        if i == self.radii.len() {
            return (0.0, d - self.radii.last().copied().unwrap_or(0.0));
        }
        if self.power.is_some() && self.density[i] > 0.0 {
            return (0.0, 0.0);
        }
        let inner = if i == 0 { f64::NEG_INFINITY } else { self.radii[i - 1] };
        let delta = (d - inner).min(self.radii[i] - d).max(0.0);
        (self.density[i], delta)
    }

    pub fn is_concentric(&self, c: &[f64]) -> bool {
        self.offset(c) == 0.0
    }

    pub fn support_distance(&self, x: &[f64]) -> f64 {
        let d = dist(&self.center, x);
        let (a, b) = (self.inner_radius(), self.outer_radius());
        if b == 0.0 {
            f64::INFINITY
        } else if d > b {
            d - b
        } else if d < a {
            a - d
        } else {
            0.0
        }
    }

    pub fn support_radius_from(&self, x: &[f64]) -> f64 {
        let b = self.outer_radius();
        if b == 0.0 {
            0.0
        } else {
            dist(&self.center, x) + b
        }
    }

    /// Radii where `t ↦ μ(B(x,t))` is not smooth.
    pub fn breakpoints(&self, x: &[f64]) -> Vec<f64> {
        let d = self.offset(x);
        let mut out = Vec::new();
        for &r in &self.radii {
            if r.is_finite() {
                for b in [(r - d).abs(), r + d] {
                    if b > 0.0 {
                        out.push(b);
                    }
                }
            }
        }
        out
    }

    /// Splits every shell at the geometric nodes `r_min·2^{j/k}`.
    pub fn refined(&self, k: usize, r_min: f64) -> Self {
        let step = 2f64.powf(1.0 / k.max(1) as f64);
        let mut radii = Vec::new();
        let mut density = Vec::new();
        let mut errs = Vec::new();
        let mut a = 0.0;
        let mut t = r_min;
        for i in 0..self.radii.len() {
            let b = self.radii[i];
            let mut pieces = Vec::new();
            while t < b && t.is_finite() {
                if t > a {
                    pieces.push(t);
                }
                t *= step;
                if b.is_infinite() && t > 1e3 * a.max(r_min) * 2f64.powi(20) {
                    break;
                }
            }
            pieces.push(b);
            let vol_total = ball_volume(self.dim, b) - ball_volume(self.dim, a);
            let mut lo = a;
            for &pb in &pieces {
                radii.push(pb);
                density.push(self.density[i]);
                let frac = if vol_total.is_finite() && vol_total > 0.0 {
                    (ball_volume(self.dim, pb) - ball_volume(self.dim, lo)) / vol_total
                } else {
                    0.0
                };
                errs.push(self.shell_err[i] * frac);
                lo = pb;
            }
            a = b;
        }
        let mut out = Self::assemble(self.dim, self.center.clone(), radii, density, errs, None);
        out.depth = self.depth;
        out
    }

    /// Representative radius of each shell (geometric midpoint; half the
    /// radius for the innermost ball).
    pub fn shell_midpoints(&self) -> Vec<f64> {
        let mut a = 0.0;
        self.radii
            .iter()
            .map(|&b| {
                let m = if a == 0.0 { 0.5 * b } else { (a * b).sqrt() };
                a = b;
                m
            })
            .collect()
    }

    /// Densities multiplied shell-wise by `w_i`.
    pub fn with_weights(&self, w: &[f64]) -> Self {
        let density: Vec<f64> = self.density.iter().zip(w).map(|(d, w)| d * w).collect();
        let errs: Vec<f64> = self.shell_err.iter().zip(w).map(|(e, w)| e * w).collect();
        let mut out = Self::assemble(self.dim, self.center.clone(), self.radii.clone(), density, errs, None);
        out.depth = self.depth;
        out
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.density.iter_mut().for_each(|d| *d *= c);
        out.cum.iter_mut().for_each(|m| *m *= c);
        out.shell_err.iter_mut().for_each(|e| *e *= c);
        if let Some(p) = out.power.as_mut() {
            p.coef *= c;
        }
        out
    }

    /// Image under `z ↦ λz` with all masses multiplied by `factor`.
    pub fn pushforward(&self, lambda: f64, factor: f64) -> Self {
        let n = self.dim as i32;
        let dens = factor / lambda.powi(n);
        let mut out = self.clone();
        out.center.iter_mut().for_each(|c| *c *= lambda);
        out.radii.iter_mut().for_each(|r| *r *= lambda);
        out.density.iter_mut().for_each(|d| *d *= dens);
        out.cum.iter_mut().for_each(|m| *m *= factor);
        out.shell_err.iter_mut().for_each(|e| *e *= factor);
        if let Some(p) = out.power.as_mut() {
            p.radius *= lambda;
            p.coef *= factor / lambda.powf(p.gamma + self.dim as f64);
        }
        out
    }

    /// Cubature nodes: four radial Gauss points per shell times a product
    /// rule on the sphere with `m` points per polar angle.
    pub fn nodes(&self, m: usize) -> Result<Vec<(Vec<f64>, f64)>> {
        if self.radii.last().is_some_and(|r| r.is_infinite()) {
            return Err(crate::Error::Unsupported("cubature nodes of an unbounded radial measure".into()));
        }
        let dirs = sphere_rule(self.dim, m.max(2));
        let (gx, gw) = crate::quadrature::gauss_legendre_4();
        let mut out = Vec::new();
        let mut a = 0.0;
        for (i, &b) in self.radii.iter().enumerate() {
            let rho = self.density[i];
            if rho > 0.0 {
                let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
                for q in 0..4 {
                    let s = mid + half * gx[q];
                    let ws = rho * half * gw[q] * s.powi(self.dim as i32 - 1);
                    for (dir, wd) in &dirs {
                        let z: Vec<f64> = self.center.iter().zip(dir).map(|(c, u)| c + s * u).collect();
                        out.push((z, ws * wd));
                    }
                }
            }
            a = b;
        }
        Ok(out)
    }
}

/// Product rule on `S^{n-1}`: uniform in the azimuth, Gauss-Legendre in
/// each polar angle with the `sin^k` Jacobian folded into the weights.
/// Weights are normalized to the exact sphere area.
pub fn sphere_rule(n: usize, m: usize) -> Vec<(Vec<f64>, f64)> {
    let mut dirs: Vec<(Vec<f64>, f64)> = (0..2 * m)
        .map(|j| {
            let phi = std::f64::consts::PI * (j as f64 + 0.5) / m as f64;
            (vec![phi.cos(), phi.sin()], std::f64::consts::PI / m as f64)
        })
        .collect();
    let (gx, gw) = crate::quadrature::gauss_legendre_4();
    for dim in 3..=n {
        let mut next = Vec::new();
        let panels = m.max(2);
        let h = std::f64::consts::PI / panels as f64;
        for p in 0..panels {
            for q in 0..4 {
                let th = (p as f64 + 0.5) * h + 0.5 * h * gx[q];
                let w = 0.5 * h * gw[q] * th.sin().powi(dim as i32 - 2);
                for (d, wd) in &dirs {
                    let mut v: Vec<f64> = d.iter().map(|c| c * th.sin()).collect();
                    v.push(th.cos());
                    next.push((v, wd * w));
                }
            }
        }
        dirs = next;
    }
    let total: f64 = dirs.iter().map(|d| d.1).sum();
    let area = sphere_area(n);
    dirs.iter_mut().for_each(|d| d.1 *= area / total);
    dirs
}
