//! Localized lower bounds and the two closed-form sides of the bilateral
//! estimate.

use super::engine::{BoundIntegral, InnerWeight, OuterWeight};
use super::{power_reweight, t_operator, BoundOptions, Domain, InnerSelector};
use crate::error::{check_dim, check_p, invalid, Result};
use crate::measures::{Measure, Region};
use crate::potentials::{dyadic_ball_sum, wolff_p, Branch, DyadicSumSpec, Kernel, PotValue};
use serde::{Deserialize, Serialize};

/// `(χ_{B(x_0,R)} σ, χ_{B(x_0,R)} ω)`.
pub fn localize(sigma: &Measure, omega: &Measure, x0: &[f64], big_r: f64) -> Result<(Measure, Measure)> {
    if !(big_r > 0.0) {
        return Err(invalid("R", "localization radius must be positive"));
    }
    let b = Region::ball(x0, big_r);
    Ok((sigma.restrict(&b)?, omega.restrict(&b)?))
}

/// `N(f)(x) = W_{1,p}(f^{p-1} dσ̃)(x)` with no truncation.
pub fn n_operator(
    sigma_t: &Measure,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    x: &[f64],
    p: f64,
    opts: &BoundOptions,
) -> Result<PotValue> {
    t_operator(sigma_t, f, x, p, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeumannSpec {
    pub j_max: usize,
    /// Exponent parameter of the `p > 2` weights `j^{q(2-p)/(p-1)}`.
    pub q: f64,
    /// Multiplier `C` in `C^j`.
    pub c: f64,
}

impl Default for NeumannSpec {
    fn default() -> Self {
        NeumannSpec { j_max: 8, q: 2.0, c: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeumannReport {
    /// `N^j(W_{1,p} ω̃)(x)` for `j = 0..=j_max`.
    pub terms: Vec<f64>,
    pub weights: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub value: f64,
    /// Last increment relative to the sum.
    pub last_increment: f64,
    pub divergent: bool,
}

/// Weight of the `j`-th iterate; the `j = 0` term carries weight one.
pub fn neumann_weight(j: usize, p: f64, spec: &NeumannSpec) -> f64 {
    let base = spec.c.powi(j as i32);
    if p <= 2.0 || j == 0 {
        base
    } else {
        base * (j as f64).powf(spec.q * (2.0 - p) / (p - 1.0))
    }
}

/// `Σ_{j ≤ j_max} C^j w_j N^j(W_{1,p} ω̃)(x)`.
pub fn neumann_series_lower(
    sigma_t: &Measure,
    omega_t: &Measure,
    x: &[f64],
    p: f64,
    spec: &NeumannSpec,
    opts: &BoundOptions,
) -> Result<NeumannReport> {
    let n = omega_t.dim();
    check_p(p, n)?;
    check_dim(n, sigma_t.dim())?;
    check_dim(n, x.len())?;
    if spec.q <= 1.0 && p > 2.0 {
        return Err(invalid("q", "need q > 1"));
    }
    if !(spec.c >= 0.0) {
        return Err(invalid("c", "series constant must be nonnegative"));
    }
    let inf = f64::INFINITY;
    let quad = opts.quad;
    let mut terms = vec![wolff_p(omega_t, x, p, inf, &quad)?.value];
    let mut divergent = false;
    // the current iterate as the measure it is the Wolff potential of
    let mut current = omega_t.clone();
    for _ in 1..=spec.j_max {
        if divergent || sigma_t.is_zero() || omega_t.is_zero() {
            terms.push(if divergent { inf } else { 0.0 });
            continue;
        }
        let prev = current.clone();
        let f = move |z: &[f64]| wolff_p(&prev, z, p, inf, &quad).map(|v| v.value).unwrap_or(f64::NAN);
        match power_reweight(sigma_t, &f, p, opts.per_octave)? {
            Some(mu) => {
                terms.push(wolff_p(&mu, x, p, inf, &quad)?.value);
                current = mu;
            }
            None => {
                divergent = true;
                terms.push(inf);
            }
        }
    }
    let weights: Vec<f64> = (0..terms.len()).map(|j| neumann_weight(j, p, spec)).collect();
    let mut partial_sums = Vec::with_capacity(terms.len());
    let mut acc = 0.0;
    for (t, w) in terms.iter().zip(&weights) {
        if *w > 0.0 {
            acc += t * w;
        }
        partial_sums.push(acc);
    }
    let last_increment = match partial_sums.len() {
        0 | 1 => 0.0,
        k if acc > 0.0 && acc.is_finite() => (partial_sums[k - 1] - partial_sums[k - 2]) / acc,
        _ => if acc == 0.0 { 0.0 } else { inf },
    };
    Ok(NeumannReport { terms, weights, partial_sums, value: acc, last_increment, divergent: divergent || !acc.is_finite() })
}

/// `B^t(z) = Σ_{j≥0} (t/2^j)^{p-n} σ̃(B(z, t/2^j))`.
pub fn b_aux(sigma_t: &Measure, z: &[f64], t: f64, p: f64, spec: &DyadicSumSpec) -> Result<PotValue> {
    let n = sigma_t.dim();
    check_p(p, n)?;
    if sigma_t.point_mass_at(z) > 0.0 {
        return Ok(PotValue::infinite());
    }
    dyadic_ball_sum(sigma_t, z, t, n as f64 - p, 1.0, None, &DyadicSumSpec { j_lo: 0, ..*spec })
}

fn inner_for(selector: InnerSelector, n: usize, p: f64) -> Result<InnerWeight> {
    Ok(match selector {
        InnerSelector::Riesz => InnerWeight::Truncated(Kernel::riesz_p(n, p)?),
        InnerSelector::Wolff => InnerWeight::Truncated(Kernel::wolff_p(n, p)?),
        InnerSelector::V => InnerWeight::LocalV { p, branch: Branch::for_p(p) },
    })
}

/// `∫_0^R (e^{c W^r σ(x)} r^{p-n} ∫_{B(x,r)} e^{c J^r(z)} dω)^{1/(p-1)} dr/r`
/// with `J = W_{1,p}` on the `p ≤ 2` branch and `J = I_p` on the other;
/// `R = d(x)/5` in a bounded domain and `∞` in all of space.
#[allow(clippy::too_many_arguments)]
pub fn closed_form_lower(
    sigma: &Measure,
    omega: &Measure,
    x: &[f64],
    c: f64,
    p: f64,
    domain: &Domain,
    branch: Branch,
    opts: &BoundOptions,
) -> Result<PotValue> {
    let n = omega.dim();
    check_p(p, n)?;
    domain.validate(n)?;
    let big_r = if domain.is_entire() { f64::INFINITY } else { domain.distance_to_boundary(x) / 5.0 };
    if big_r == 0.0 {
        return Ok(PotValue::zero());
    }
    let selector = match branch {
        Branch::Low => InnerSelector::Wolff,
        Branch::High => InnerSelector::Riesz,
    };
    BoundIntegral::quasilinear(n, p, big_r)
        .with_outer(OuterWeight::Truncated(Kernel::wolff_p(n, p)?), c)
        .with_inner(inner_for(selector, n, p)?, c)
        .with_resolution(opts.node_resolution)
        .with_dyadic(opts.dyadic)
        .eval(sigma, omega, x, &opts.quad)
}

/// The upper side, with the inner weight picked by `selector`. In a
/// bounded domain both measures are restricted to it and the integral is
/// cut at twice its diameter.
#[allow(clippy::too_many_arguments)]
pub fn upper_bound_eval(
    sigma: &Measure,
    omega: &Measure,
    x: &[f64],
    c: f64,
    p: f64,
    domain: &Domain,
    selector: InnerSelector,
    opts: &BoundOptions,
) -> Result<PotValue> {
    let n = omega.dim();
    check_p(p, n)?;
    domain.validate(n)?;
    let (s, w) = (domain.restrict(sigma)?, domain.restrict(omega)?);
    BoundIntegral::quasilinear(n, p, 2.0 * domain.diameter())
        .with_outer(OuterWeight::Truncated(Kernel::wolff_p(n, p)?), c)
        .with_inner(inner_for(selector, n, p)?, c)
        .with_resolution(opts.node_resolution)
        .with_dyadic(opts.dyadic)
        .eval(&s, &w, x, &opts.quad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::dist;
    use crate::potentials::dirac_wolff;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn eps_ball(eps: f64) -> Measure {
        Measure::uniform_ball(&[0.0; 3], 1.0, eps).unwrap()
    }

    #[test]
    fn n_operator_of_dirac() {
        let s = Measure::dirac(&[0.1, 0.0, 0.0], 0.7);
        let x = [0.5, 0.3, 0.0];
        for p in [1.5, 2.0, 2.5] {
            let v = n_operator(&s, &|_| 1.0, &x, p, &BoundOptions::default()).unwrap();
            assert_relative_eq!(v.value, dirac_wolff(0.7, dist(&x, &[0.1, 0.0, 0.0]), p, 3), max_relative = 1e-10);
        }
    }

    #[test]
    fn neumann_reductions() {
        let o = BoundOptions::default();
        let omega = Measure::dirac(&[0.0; 3], 1.0);
        let x = [0.5, 0.0, 0.0];
        let w = dirac_wolff(1.0, 0.5, 2.0, 3);
        let r = neumann_series_lower(&Measure::zero(3), &omega, &x, 2.0, &NeumannSpec::default(), &o).unwrap();
        assert_relative_eq!(r.value, w, max_relative = 1e-12);
        let spec = NeumannSpec { j_max: 0, ..Default::default() };
        let r = neumann_series_lower(&eps_ball(0.01), &omega, &x, 2.0, &spec, &o).unwrap();
        assert_relative_eq!(r.value, w, max_relative = 1e-12);
    }

    #[test]
    fn neumann_atoms_blow_up() {
        // the second iterate of an atomic σ̃ sees its own atoms
        let sigma = Measure::atoms(3, vec![(vec![0.3, 0.0, 0.0], 0.01), (vec![-0.3, 0.0, 0.0], 0.01)]).unwrap();
        let omega = Measure::dirac(&[0.0; 3], 1.0);
        let spec = NeumannSpec { j_max: 3, ..Default::default() };
        let r = neumann_series_lower(&sigma, &omega, &[0.0, 0.5, 0.0], 2.0, &spec, &BoundOptions::default()).unwrap();
        assert!(r.terms[1].is_finite() && r.terms[2].is_infinite() && r.divergent);
    }

    #[test]
    fn neumann_converges_for_small_density() {
        let spec = NeumannSpec { j_max: 12, ..Default::default() };
        let o = BoundOptions { per_octave: 2, ..Default::default() };
        let omega = Measure::dirac(&[0.0; 3], 1.0);
        let r = neumann_series_lower(&eps_ball(0.01), &omega, &[0.5, 0.0, 0.0], 2.0, &spec, &o).unwrap();
        assert!(!r.divergent && r.last_increment.abs() < 1e-8, "{:?}", r.terms);
        for w in r.terms.windows(2).skip(1) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn b_aux_examples() {
        let spec = DyadicSumSpec::default();
        let z = [0.0; 3];
        assert_eq!(b_aux(&Measure::zero(3), &z, 1.0, 2.0, &spec).unwrap().value, 0.0);
        assert!(b_aux(&Measure::dirac(&z, 1.0), &z, 1.0, 2.0, &spec).unwrap().is_infinite());
        let b = b_aux(&eps_ball(1.0), &z, 1.0, 2.0, &spec).unwrap();
        assert_relative_eq!(b.value, 16.0 * PI / 9.0, max_relative = 1e-12);
    }

    #[test]
    fn sigma_zero_gives_wolff() {
        let o = BoundOptions::default();
        let omega = Measure::dirac(&[0.0; 3], 2.0);
        let x = [0.2, 0.1, 0.0];
        let d = dist(&x, &[0.0; 3]);
        let z = Measure::zero(3);
        for p in [1.5, 2.5] {
            let w = dirac_wolff(2.0, d, p, 3);
            let lo = closed_form_lower(&z, &omega, &x, 1.0, p, &Domain::Entire, Branch::for_p(p), &o).unwrap();
            assert_relative_eq!(lo.value, w, max_relative = 1e-10);
            let up = upper_bound_eval(&z, &omega, &x, 1.0, p, &Domain::Entire, InnerSelector::for_p(p), &o).unwrap();
            assert_relative_eq!(up.value, w, max_relative = 1e-10);
        }
        // truncation at d(x)/5 in the unit ball: ∫_d^R r^{-2} dr
        let dom = Domain::Ball { center: vec![0.0; 3], radius: 1.0 };
        let near = Measure::dirac(&[0.05, 0.0, 0.0], 1.0);
        let lo = closed_form_lower(&z, &near, &[0.0; 3], 1.0, 2.0, &dom, Branch::Low, &o).unwrap();
        assert_relative_eq!(lo.value, 1.0 / 0.05 - 1.0 / 0.2, max_relative = 1e-10);
    }

    #[test]
    fn branches_coincide_at_two() {
        let o = BoundOptions::default();
        let sigma = eps_ball(0.02);
        let omega = Measure::atoms(3, vec![(vec![0.0; 3], 1.0), (vec![0.4, 0.1, 0.0], 0.5)]).unwrap();
        let x = [0.3, -0.2, 0.1];
        let a = closed_form_lower(&sigma, &omega, &x, 0.5, 2.0, &Domain::Entire, Branch::Low, &o).unwrap();
        let b = closed_form_lower(&sigma, &omega, &x, 0.5, 2.0, &Domain::Entire, Branch::High, &o).unwrap();
        assert_relative_eq!(a.value, b.value, max_relative = 1e-10);
        let a = upper_bound_eval(&sigma, &omega, &x, 0.5, 2.0, &Domain::Entire, InnerSelector::Riesz, &o).unwrap();
        let b = upper_bound_eval(&sigma, &omega, &x, 0.5, 2.0, &Domain::Entire, InnerSelector::Wolff, &o).unwrap();
        assert_relative_eq!(a.value, b.value, max_relative = 1e-10);
    }

    #[test]
    fn lower_below_upper_for_dirac() {
        let o = BoundOptions::default();
        let sigma = eps_ball(0.02);
        let omega = Measure::dirac(&[0.0; 3], 1.0);
        for p in [1.5, 2.5] {
            for x in [[0.3, 0.0, 0.0], [0.0, 1.4, 0.2]] {
                let lo = closed_form_lower(&sigma, &omega, &x, 0.5, p, &Domain::Entire, Branch::for_p(p), &o).unwrap();
                let up = upper_bound_eval(&sigma, &omega, &x, 0.5, p, &Domain::Entire, InnerSelector::for_p(p), &o).unwrap();
                assert!(lo.value <= up.value * (1.0 + 1e-12), "{p} {x:?}: {} {}", lo.value, up.value);
            }
        }
    }
}
