//! Computable lower proxies for the capacity hypotheses on `σ`: the ball
//! condition, the multiplier inequality on radial tents, exponential
//! integrability of `W_{1,p}`, and the weak-A∞ property of a weight.
//!
//! True capacities are variational and out of reach; each quantity here is
//! a supremum over a finite sample, hence an estimate from below.

use crate::error::{check_dim, check_p, invalid, Error, Result};
use crate::geometry::{ball_volume, dist};
use crate::measures::Measure;
use crate::parallel;
use crate::potentials::{kernel_potential, Kernel, Quadrature};
use crate::Region;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub center: Vec<f64>,
    pub radius: f64,
    /// Inner set for the weak-A∞ ratio.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner: Option<(Vec<f64>, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub constant: f64,
    pub witness: Witness,
    pub samples: usize,
    /// The supremum sits at the edge of the sampled radii and keeps
    /// growing there.
    pub divergent: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
}

impl CapacityReport {
    pub fn with_threshold(mut self, threshold: Option<f64>) -> Self {
        self.pass = threshold.map(|t| self.constant <= t && !self.divergent);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BallSampling {
    /// Explicit centers; `None` picks support-adapted ones.
    pub centers: Option<Vec<Vec<f64>>>,
    pub max_centers: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub per_octave: usize,
}

impl Default for BallSampling {
    fn default() -> Self {
        BallSampling { centers: None, max_centers: 64, r_min: 2f64.powi(-20), r_max: 64.0, per_octave: 16 }
    }
}

impl BallSampling {
    fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_max > self.r_min && self.r_max.is_finite()) {
            return Err(invalid("sampling.r_min", "need 0 < r_min < r_max < ∞"));
        }
        if self.per_octave == 0 || self.max_centers == 0 {
            return Err(invalid("sampling.per_octave", "must be positive"));
        }
        Ok(())
    }
}

/// Evenly strided subset of at most `k` items.
fn strided<T: Clone>(v: &[T], k: usize) -> Vec<T> {
    if v.len() <= k {
        return v.to_vec();
    }
    (0..k).map(|i| v[i * v.len() / k].clone()).collect()
}

fn support_centers(mu: &Measure, k: usize) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    if let Some(c) = mu.radial_center() {
        out.push(c);
    }
    let pts: Vec<Vec<f64>> = match mu {
        Measure::Radial(_) => Vec::new(),
        m if m.is_atomic() => m.nodes(1)?.into_iter().map(|(z, _)| z).collect(),
        m => match m.nodes(1) {
            Ok(n) => n.into_iter().map(|(z, _)| z).collect(),
            Err(_) => Vec::new(),
        },
    };
    out.extend(strided(&pts, k.saturating_sub(out.len()).max(1)));
    if out.is_empty() {
        out.push(vec![0.0; mu.dim()]);
    }
    Ok(out)
}

fn radius_grid(lo: f64, hi: f64, k: usize, extra: &[f64]) -> Vec<f64> {
    let step = 2f64.powf(1.0 / k as f64);
    let mut r = Vec::new();
    // anchored at 1 so that unit radii are always hit
    let j0 = (lo.log2() * k as f64).ceil() as i64;
    let j1 = (hi.log2() * k as f64).floor() as i64;
    for j in j0..=j1 {
        r.push(step.powi(j as i32));
    }
    r.extend(extra.iter().copied().filter(|b| *b >= lo && *b <= hi));
    r.sort_by(|a, b| a.partial_cmp(b).unwrap());
    r.dedup();
    r
}

/// `sup σ(B(x,r))/r^{n-p}` over sampled balls.
pub fn ball_condition_constant(sigma: &Measure, p: f64, sampling: &BallSampling) -> Result<CapacityReport> {
    check_p(p, sigma.dim())?;
    ball_ratio_sup(sigma, sigma.dim() as f64 - p, sampling)
}

/// `sup μ(B(x,r)) / r^e` over the sampled balls, for any exponent `e > 0`.
/// The ball condition is `e = n - p`; Morrey-type decay uses larger `e`.
pub fn ball_ratio_sup(sigma: &Measure, e: f64, sampling: &BallSampling) -> Result<CapacityReport> {
    let n = sigma.dim();
    if !(e > 0.0 && e.is_finite()) {
        return Err(invalid("exponent", "ball ratio exponent must be positive"));
    }
    sampling.validate()?;
    let centers = match &sampling.centers {
        Some(c) => {
            for x in c {
                check_dim(n, x.len())?;
            }
            c.clone()
        }
        None => support_centers(sigma, sampling.max_centers)?,
    };
    let per_center = parallel::map(&centers, |x| -> Result<(f64, f64, bool, usize)> {
        let dense = if sigma.radial_center().is_some_and(|c| dist(&c, x) == 0.0) { 4 } else { 1 };
        let radii = radius_grid(sampling.r_min, sampling.r_max, sampling.per_octave * dense, &sigma.breakpoints(x));
        let mut best = (f64::NEG_INFINITY, radii[0], 0usize);
        for (i, &r) in radii.iter().enumerate() {
            let v = sigma.ball_mass(x, r)?.value / r.powf(e);
            if v > best.0 {
                best = (v, r, i);
            }
        }
        let rising = best.0 > 0.0 && best.2 == 0 && {
            let next = sigma.ball_mass(x, radii[0] * 2.0)?.value / (radii[0] * 2.0).powf(e);
            best.0 > next * (1.0 + 1e-9)
        };
        Ok((best.0, best.1, rising, radii.len()))
    });
    let mut best: Option<(usize, f64, f64, bool)> = None;
    let mut samples = 0;
    for (i, r) in per_center.into_iter().enumerate() {
        let (v, rad, rising, count) = r?;
        samples += count;
        if best.as_ref().is_none_or(|b| v > b.1) {
            best = Some((i, v, rad, rising));
        }
    }
    let (i, v, rad, rising) = best.ok_or_else(|| invalid("sampling.centers", "no centers"))?;
    Ok(CapacityReport {
        constant: v.max(0.0),
        witness: Witness { center: centers[i].clone(), radius: rad, inner: None },
        samples,
        divergent: rising,
        pass: None,
    })
}

/// Normalized `cap_p(B(x,r)) / cap_p(B(0,1)) = r^{n-p}`.
pub fn capacity_ball_scaling(p: f64, n: usize, r: f64) -> Result<f64> {
    check_p(p, n)?;
    if !(r > 0.0) {
        return Err(invalid("r", "radius must be positive"));
    }
    Ok(r.powf(n as f64 - p))
}

/// `h(y) = (1 - |y - c|/R)_+`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tent {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierReport {
    /// `∫|h|^p dσ / ((p/(p-1))^p ∫|∇h|^p dx)` per tent.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub witness: Option<Tent>,
}

/// `∫ h^p dσ` for a tent, by the layer-cake formula in the radius with
/// the substitution `r = R(1 - v^4)`, which keeps the weight smooth.
pub fn tent_moment(sigma: &Measure, tent: &Tent, p: f64) -> Result<f64> {
    check_dim(sigma.dim(), tent.center.len())?;
    let big_r = tent.radius;
    let c = &tent.center;
    // ∫ h^p dσ = ∫_0^1 p u^{p-1} σ(B(c, R(1-u))) du, u = v^4
    let mut cuts = vec![0.0, 1.0];
    for b in sigma.breakpoints(c) {
        if b < big_r {
            cuts.push((1.0 - b / big_r).powf(0.25));
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let g = |v: f64| {
            let r = big_r * (1.0 - v.powi(4));
            4.0 * p * v.powf(4.0 * p - 1.0) * sigma.ball_mass_unchecked(c, r).value
        };
        let seg = crate::quadrature::gauss_panels(w[0], w[1], 16, g);
        acc += seg;
    }
    Ok(acc)
}

/// Ratios of the multiplier inequality on radial tents; `∫|∇h|^p dx =
/// R^{-p} |B(c,R)|` is closed form.
pub fn multiplier_check(sigma: &Measure, p: f64, tents: &[Tent]) -> Result<MultiplierReport> {
    let n = sigma.dim();
    check_p(p, n)?;
    for t in tents {
        check_dim(n, t.center.len())?;
        if !(t.radius > 0.0 && t.radius.is_finite()) {
            return Err(invalid("tents.radius", "tent radius must be positive and finite"));
        }
    }
    let ratios: Vec<f64> = parallel::map(tents, |t| -> Result<f64> {
        let energy = t.radius.powf(-p) * ball_volume(n, t.radius);
        Ok(tent_moment(sigma, t, p)? / ((p / (p - 1.0)).powf(p) * energy))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut max_ratio = 0.0;
    let mut witness = None;
    for (i, &r) in ratios.iter().enumerate() {
        if r > max_ratio || witness.is_none() {
            max_ratio = r;
            witness = Some(tents[i].clone());
        }
    }
    Ok(MultiplierReport { ratios, max_ratio, witness })
}

/// Default tents: concentric at each support center with radii `2^j`.
pub fn default_tents(sigma: &Measure, j_lo: i32, j_hi: i32, max_centers: usize) -> Result<Vec<Tent>> {
    let centers = support_centers(sigma, max_centers)?;
    Ok(centers
        .iter()
        .flat_map(|c| (j_lo..=j_hi).map(move |j| Tent { center: c.clone(), radius: 2f64.powi(j) }))
        .collect())
}

/// Weighted points integrating against `mu`. Radial profiles are first
/// split into `resolution` shells per octave so that smooth integrands
/// converge under refinement.
pub fn quadrature_nodes(mu: &Measure, resolution: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    match mu {
        Measure::Radial(r) => {
            let outer = r.outer_radius();
            if !outer.is_finite() {
                return Err(Error::Unsupported("integration against an unbounded radial measure".into()));
            }
            r.refined(resolution, outer * 2f64.powi(-16)).nodes(resolution.clamp(2, 8))
        }
        Measure::Sum(parts) => {
            let mut out = Vec::new();
            for m in parts {
                out.extend(quadrature_nodes(m, resolution)?);
            }
            Ok(out)
        }
        m => m.nodes(resolution),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpReport {
    pub value: f64,
    pub samples: usize,
    pub divergent: bool,
}

/// `σ(E)^{-1} ∫_E exp(β W_{1,p}(χ_E σ)) dσ`.
pub fn exp_integrability_ratio(
    sigma: &Measure,
    region: &Region,
    beta: f64,
    p: f64,
    resolution: usize,
    quad: &Quadrature,
) -> Result<ExpReport> {
    let n = sigma.dim();
    check_p(p, n)?;
    check_dim(n, region.dim())?;
    if !(beta >= 0.0) {
        return Err(invalid("beta", "β must be nonnegative"));
    }
    let part = sigma.restrict(region)?;
    let nodes = quadrature_nodes(&part, resolution)?;
    let total: f64 = nodes.iter().map(|(_, w)| w).sum();
    if !(total > 0.0) {
        return Err(Error::Precondition("σ(E) = 0".into()));
    }
    if beta == 0.0 {
        return Ok(ExpReport { value: 1.0, samples: nodes.len(), divergent: false });
    }
    let kernel = Kernel::wolff_p(n, p)?;
    let vals: Vec<Result<(f64, bool)>> = parallel::map(&nodes, |(z, w)| {
        let v = kernel_potential(&part, z, &kernel, f64::INFINITY, quad)?;
        Ok((w * (beta * v.value).exp(), v.divergent))
    });
    let mut acc = 0.0;
    let mut divergent = false;
    for v in vals {
        let (a, d) = v?;
        acc += a;
        divergent |= d;
    }
    Ok(ExpReport { value: acc / total, samples: nodes.len(), divergent: divergent || !acc.is_finite() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakAinfParams {
    pub c_w: f64,
    pub theta: f64,
}

impl WeakAinfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_w > 0.0 && self.theta > 0.0) {
            return Err(invalid("weak_ainf", "C_w and θ must be positive"));
        }
        Ok(())
    }
}

/// `|2B|_ω^{-1} ∫_{2B} exp(c ∫_0^∞ (σ(B(x,s)∩B)/s^{n-p})^q ds/s) dω(x)`.
#[allow(clippy::too_many_arguments)]
pub fn weighted_exp_integrability(
    omega: &Measure,
    sigma: &Measure,
    center: &[f64],
    radius: f64,
    p: f64,
    q: f64,
    c: f64,
    resolution: usize,
    quad: &Quadrature,
) -> Result<ExpReport> {
    let n = sigma.dim();
    check_p(p, n)?;
    check_dim(n, omega.dim())?;
    check_dim(n, center.len())?;
    if !(q > 0.0 && c > 0.0 && radius > 0.0) {
        return Err(invalid("q", "need q > 0, c > 0 and a positive radius"));
    }
    let ball = Region::ball(center, radius);
    let inner = sigma.restrict(&ball)?;
    let nodes = quadrature_nodes(&omega.restrict(&Region::ball(center, 2.0 * radius))?, resolution)?;
    let total: f64 = nodes.iter().map(|(_, w)| w).sum();
    if !(total > 0.0) {
        return Err(Error::Precondition("|2B|_ω = 0".into()));
    }
    if inner.is_zero() {
        return Ok(ExpReport { value: 1.0, samples: nodes.len(), divergent: false });
    }
    let kernel = Kernel { a: n as f64 - p, q };
    let vals: Vec<Result<(f64, bool)>> = parallel::map(&nodes, |(z, w)| {
        let v = kernel_potential(&inner, z, &kernel, f64::INFINITY, quad)?;
        Ok((w * (c * v.value).exp(), v.divergent))
    });
    let mut acc = 0.0;
    let mut divergent = false;
    for v in vals {
        let (a, d) = v?;
        acc += a;
        divergent |= d;
    }
    Ok(ExpReport { value: acc / total, samples: nodes.len(), divergent: divergent || !acc.is_finite() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AinfSampling {
    /// Ball centers are drawn uniformly from `B(domain_center, domain_radius)`.
    pub domain_center: Option<Vec<f64>>,
    pub domain_radius: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub seed: u64,
}

impl Default for AinfSampling {
    fn default() -> Self {
        AinfSampling { domain_center: None, domain_radius: 1.0, r_min: 0.01, r_max: 1.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AinfReport {
    pub max_ratio: f64,
    pub witness: Option<Witness>,
    pub trials: usize,
    pub pass: bool,
}

fn uniform_in_ball(rng: &mut ChaCha8Rng, c: &[f64], r: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = c.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        if v.iter().map(|a| a * a).sum::<f64>() <= 1.0 {
            return c.iter().zip(v).map(|(a, b)| a + r * b).collect();
        }
    }
}

/// Largest sampled `(|E|_ω/|2B|_ω) / (|E|/|B|)^θ` over sub-balls `E ⊆ B`.
/// A sub-ball of radius equal to `B`'s is `B` itself.
pub fn weak_ainf_check(omega: &Measure, params: &WeakAinfParams, trials: usize, sampling: &AinfSampling) -> Result<AinfReport> {
    params.validate()?;
    if omega.has_atoms() {
        return Err(Error::Unsupported("atomic ω is not a weight".into()));
    }
    let n = omega.dim();
    if !(sampling.r_min > 0.0 && sampling.r_max >= sampling.r_min) {
        return Err(invalid("sampling.r_min", "need 0 < r_min ≤ r_max"));
    }
    let dc = sampling.domain_center.clone().unwrap_or_else(|| vec![0.0; n]);
    check_dim(n, dc.len())?;
    let results = parallel::map_range(trials, |i| -> Result<(f64, Witness)> {
        let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed ^ (i as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
        let x = uniform_in_ball(&mut rng, &dc, sampling.domain_radius);
        let r = sampling.r_min * (sampling.r_max / sampling.r_min).powf(rng.gen_range(0.0..=1.0));
        let s = r * rng.gen_range(0.05..=1.0f64);
        // E = B(y, s) ⊆ B(x, r)
        let y = uniform_in_ball(&mut rng, &x, r - s);
        let e = omega.ball_mass(&y, s)?.value;
        let two_b = omega.ball_mass(&x, 2.0 * r)?.value;
        let ratio = if two_b > 0.0 { (e / two_b) / (s / r).powf(n as f64 * params.theta) } else { 0.0 };
        Ok((ratio, Witness { center: x, radius: r, inner: Some((y, s)) }))
    });
    let mut max_ratio = 0.0;
    let mut witness = None;
    for r in results {
        let (v, w) = r?;
        if v > max_ratio || witness.is_none() {
            max_ratio = v;
            witness = Some(w);
        }
    }
    Ok(AinfReport { max_ratio, witness, trials, pass: max_ratio <= params.c_w })
}
