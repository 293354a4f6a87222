//! Data classes where the bilateral bound simplifies: `ω ∈ L^q`,
//! weak-A∞ weights, and Morrey-type decay of `ω`.

use super::engine::{BoundIntegral, OuterWeight};
use super::BoundOptions;
use crate::capacity::{ball_ratio_sup, quadrature_nodes, BallSampling, CapacityReport};
use crate::dyadic::{DyadicCube, MAX_TREE};
use crate::error::{check_dim, check_p, invalid, Error, Result};
use crate::geometry::dist;
use crate::measures::{Measure, Region};
use crate::parallel;
use crate::potentials::{wolff_p, Kernel, PotValue};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqReport {
    pub value: f64,
    /// `[W^{diam}_{1,p}(ω^q dx)(x)]^{1/q}`.
    pub omega_factor: f64,
    /// `exp((c/q') W^{diam}_{1,p}σ(x))`.
    pub sigma_factor: f64,
}

/// The product bound for `ω ∈ L^q`.
#[allow(clippy::too_many_arguments)]
pub fn lq_bound(
    sigma: &Measure,
    omega: &Measure,
    x: &[f64],
    c: f64,
    q: f64,
    p: f64,
    diam: f64,
    opts: &BoundOptions,
) -> Result<LqReport> {
    let n = omega.dim();
    check_p(p, n)?;
    check_dim(n, sigma.dim())?;
    if !(q > 1.0 && q.is_finite()) {
        return Err(invalid("q", "need q > 1"));
    }
    if !(diam > 0.0) {
        return Err(invalid("diam", "diameter must be positive"));
    }
    let wq = wolff_p(&omega.density_power(q)?, x, p, diam, &opts.quad)?;
    let ws = wolff_p(sigma, x, p, diam, &opts.quad)?;
    let q_dual = q / (q - 1.0);
    let omega_factor = wq.value.powf(1.0 / q);
    let sigma_factor = (c / q_dual * ws.value).exp();
    Ok(LqReport { value: omega_factor * sigma_factor, omega_factor, sigma_factor })
}

/// Both sides `c_i ∫_0^∞ (e^{c_i W^r σ(x)} r^{p-n} ω(B(x,r)))^{1/(p-1)} dr/r`
/// of the simplified bound for weak-A∞ weights, returned without the
/// leading factor `c_i`.
pub fn ainf_bilateral(
    sigma: &Measure,
    omega: &Measure,
    x: &[f64],
    c1: f64,
    c2: f64,
    p: f64,
    opts: &BoundOptions,
) -> Result<(PotValue, PotValue)> {
    let n = omega.dim();
    check_p(p, n)?;
    let k = Kernel::wolff_p(n, p)?;
    let side = |c: f64| {
        BoundIntegral::quasilinear(n, p, f64::INFINITY).with_outer(OuterWeight::Truncated(k), c).eval(sigma, omega, x, &opts.quad)
    };
    Ok((side(c1)?, side(c2)?))
}

/// `sup ω(B(x,r)) / r^{n-p+ε}` over the sampled balls.
pub fn morrey_check(omega: &Measure, eps: f64, p: f64, sampling: &BallSampling) -> Result<CapacityReport> {
    check_p(p, omega.dim())?;
    if !(eps > 0.0) {
        return Err(invalid("eps", "Morrey gain must be positive"));
    }
    ball_ratio_sup(omega, omega.dim() as f64 - p + eps, sampling)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorreyExpReport {
    /// `∫_{B(x,r)} exp(c W^r_{1,p}σ(z)) dω(z)`.
    pub lhs: f64,
    /// `r^{n-p+ε} / c`.
    pub bound: f64,
    pub ratio: f64,
    pub pass: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn morrey_exp_integral(
    sigma: &Measure,
    omega: &Measure,
    center: &[f64],
    r: f64,
    c: f64,
    eps: f64,
    p: f64,
    opts: &BoundOptions,
) -> Result<MorreyExpReport> {
    let n = omega.dim();
    check_p(p, n)?;
    check_dim(n, sigma.dim())?;
    check_dim(n, center.len())?;
    if !(r > 0.0 && c > 0.0 && eps > 0.0) {
        return Err(invalid("r", "radius, constant and gain must be positive"));
    }
    let lhs = if sigma.is_zero() || omega.is_zero() {
        omega.ball_mass(center, r)?.value
    } else {
        let nodes = if omega.is_atomic() { omega.nodes(1)? } else { quadrature_nodes(omega, opts.node_resolution)? };
        let inside: Vec<_> = nodes.into_iter().filter(|(z, w)| *w > 0.0 && dist(z, center) < r).collect();
        let parts = parallel::map(&inside, |(z, w)| -> Result<f64> {
            Ok(w * (c * wolff_p(sigma, z, p, r, &opts.quad)?.value).exp())
        });
        parts.into_iter().sum::<Result<f64>>()?
    };
    let bound = r.powf(n as f64 - p + eps) / c;
    Ok(MorreyExpReport { lhs, bound, ratio: lhs / bound, pass: lhs <= bound })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfoldReport {
    /// `I_1, ..., I_m`.
    pub values: Vec<f64>,
    /// `I_{j+1} / I_j`.
    pub ratios: Vec<f64>,
    pub cubes: usize,
    /// Levels kept above the ball's scale; the cut tail is geometric.
    pub levels_above: u32,
}

/// Levels above `⌈log2 2r⌉` included in the chains.
const LEVELS_ABOVE: u32 = 40;

/// The nested dyadic sums
/// `I_m = ∫_{B} Σ_{z∈Q_1} a(Q_1) Σ_{z∈Q_2⊆Q_1} a(Q_2) ⋯ Σ_{z∈Q_m⊆Q_{m-1}} a(Q_m) dω(z)`
/// with `a(Q) = (σ(Q ∩ B)/ℓ(Q)^{n-p})^{1/(p-1)}` and `B = B(x,r)`. The
/// cubes containing `z` form a chain, so the inner sums are complete
/// homogeneous polynomials in the chain weights, computed for all
/// `m` at once. Levels run from `depth` below the ball's scale up to
/// `LEVELS_ABOVE` above it.
#[allow(clippy::too_many_arguments)]
pub fn mfold_dyadic_sum(
    sigma: &Measure,
    omega: &Measure,
    center: &[f64],
    r: f64,
    m: usize,
    p: f64,
    depth: u32,
    resolution: usize,
) -> Result<MfoldReport> {
    let n = omega.dim();
    check_p(p, n)?;
    check_dim(n, sigma.dim())?;
    check_dim(n, center.len())?;
    if m == 0 || m > 8 {
        return Err(invalid("m", "need 1 <= m <= 8"));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid("r", "ball radius must be positive"));
    }
    let ball = Region::ball(center, r);
    let s = sigma.restrict(&ball)?;
    let nodes = if omega.is_atomic() { omega.nodes(1)? } else { omega.nodes(resolution.max(1))? };
    let inside: Vec<(Vec<f64>, f64)> = nodes.into_iter().filter(|(z, w)| *w > 0.0 && dist(z, center) < r).collect();
    let scale = (2.0 * r).log2().ceil() as i32;
    let (top, bottom) = (scale + LEVELS_ABOVE as i32, scale - depth as i32);
    let levels = (top - bottom + 1) as usize;
    if inside.len().saturating_mul(levels) > MAX_TREE {
        return Err(Error::TreeTooLarge(inside.len() * levels));
    }
    let mut cubes = BTreeSet::new();
    for (z, _) in &inside {
        for l in bottom..=top {
            cubes.insert(DyadicCube::containing(z, l));
        }
    }
    let cubes: Vec<DyadicCube> = cubes.into_iter().collect();
    let e = n as f64 - p;
    let weights = parallel::map(&cubes, |q| -> Result<f64> {
        let mass = s.box_mass(&q.lo(), &q.hi())?.value;
        Ok((mass / q.side().powf(e)).powf(1.0 / (p - 1.0)))
    });
    let mut a = HashMap::with_capacity(cubes.len());
    for (q, w) in cubes.iter().zip(weights) {
        a.insert(q.clone(), w?);
    }
    let mut values = vec![0.0; m];
    for (z, w) in &inside {
        let mut h = vec![0.0; m + 1];
        h[0] = 1.0;
        for l in (bottom..=top).rev() {
            let al = a[&DyadicCube::containing(z, l)];
            for k in 1..=m {
                h[k] += al * h[k - 1];
            }
        }
        for k in 0..m {
            values[k] += w * h[k + 1];
        }
    }
    let ratios = values.windows(2).map(|v| if v[0] > 0.0 { v[1] / v[0] } else { 0.0 }).collect();
    Ok(MfoldReport { values, ratios, cubes: cubes.len(), levels_above: LEVELS_ABOVE })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn lq_closed_form() {
        let omega = Measure::uniform_ball(&[0.0; 3], 1.0, 1.0).unwrap();
        for q in [1.5, 2.0, 3.0] {
            let r = lq_bound(&Measure::zero(3), &omega, &[0.0; 3], 1.0, q, 2.0, 2.0, &BoundOptions::default()).unwrap();
            assert_relative_eq!(r.value, (4.0 * PI / 3.0).powf(1.0 / q), max_relative = 1e-8);
            assert_eq!(r.sigma_factor, 1.0);
        }
        let z = lq_bound(&Measure::zero(3), &Measure::zero(3), &[0.0; 3], 1.0, 2.0, 2.0, 2.0, &BoundOptions::default());
        assert_eq!(z.unwrap().value, 0.0);
        assert!(lq_bound(&Measure::zero(3), &omega, &[0.0; 3], 1.0, 1.0, 2.0, 2.0, &BoundOptions::default()).is_err());
    }

    #[test]
    fn ainf_sides() {
        let o = BoundOptions::default();
        let omega = Measure::uniform_ball(&[0.0; 3], 4.0, 1.0).unwrap();
        let x = [0.5, 0.0, 0.0];
        let w = wolff_p(&omega, &x, 2.0, f64::INFINITY, &o.quad).unwrap().value;
        let (a, b) = ainf_bilateral(&Measure::zero(3), &omega, &x, 0.5, 2.0, 2.0, &o).unwrap();
        assert_relative_eq!(a.value, w, max_relative = 1e-9);
        assert_relative_eq!(b.value, w, max_relative = 1e-9);
        let sigma = Measure::uniform_ball(&[0.0; 3], 1.0, 0.02).unwrap();
        let (a, b) = ainf_bilateral(&sigma, &omega, &x, 0.5, 2.0, 2.0, &o).unwrap();
        assert!(w < a.value && a.value < b.value);
    }

    #[test]
    fn morrey_examples() {
        let omega = Measure::uniform_ball(&[0.0; 3], 1.0, 1.0).unwrap();
        let r = morrey_check(&omega, 0.5, 2.0, &BallSampling::default()).unwrap();
        assert_relative_eq!(r.constant, 4.0 * PI / 3.0, max_relative = 1e-9);
        assert!(!r.divergent);
        let d = morrey_check(&Measure::dirac(&[0.0; 3], 1.0), 0.5, 2.0, &BallSampling::default()).unwrap();
        assert!(d.divergent);
        let e = morrey_exp_integral(&Measure::zero(3), &omega, &[0.0; 3], 0.5, 1.0, 0.5, 2.0, &BoundOptions::default()).unwrap();
        assert_relative_eq!(e.lhs, 4.0 * PI / 3.0 * 0.125, max_relative = 1e-12);
    }

    fn brute(sigma: &Measure, omega: &Measure, c: &[f64], r: f64, p: f64, depth: u32) -> (f64, f64) {
        // direct double sums over the chain
        let n = 2.0;
        let s = sigma.restrict(&Region::ball(c, r)).unwrap();
        let scale = (2.0 * r).log2().ceil() as i32;
        let a = |z: &[f64], l: i32| {
            let q = DyadicCube::containing(z, l);
            (s.box_mass(&q.lo(), &q.hi()).unwrap().value / q.side().powf(n - p)).powf(1.0 / (p - 1.0))
        };
        let (mut i1, mut i2) = (0.0, 0.0);
        for (z, w) in omega.nodes(1).unwrap() {
            if dist(&z, c) >= r {
                continue;
            }
            for l1 in (scale - depth as i32)..=(scale + LEVELS_ABOVE as i32) {
                i1 += w * a(&z, l1);
                for l2 in (scale - depth as i32)..=l1 {
                    i2 += w * a(&z, l1) * a(&z, l2);
                }
            }
        }
        (i1, i2)
    }

    #[test]
    fn mfold_matches_direct_sums() {
        let sigma = Measure::atoms(2, vec![(vec![0.1, 0.2], 0.3), (vec![-0.4, 0.1], 0.2), (vec![0.3, -0.3], 0.1)]).unwrap();
        let omega = Measure::atoms(2, vec![(vec![0.05, 0.25], 1.0), (vec![0.2, -0.1], 0.5)]).unwrap();
        let c = [0.0, 0.0];
        let rep = mfold_dyadic_sum(&sigma, &omega, &c, 0.8, 3, 1.5, 6, 1).unwrap();
        let (i1, i2) = brute(&sigma, &omega, &c, 0.8, 1.5, 6);
        assert_relative_eq!(rep.values[0], i1, max_relative = 1e-10);
        assert_relative_eq!(rep.values[1], i2, max_relative = 1e-10);
        let z = mfold_dyadic_sum(&Measure::zero(2), &omega, &c, 0.8, 3, 1.5, 6, 1).unwrap();
        assert!(z.values.iter().all(|v| *v == 0.0));
    }
}
