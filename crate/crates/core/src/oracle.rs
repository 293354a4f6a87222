//! Independent reference values: radial solutions of `-Δ_p u = μ` and of
//! the gauge equation, the residual of the logarithmic substitution, and a
//! brute-force bracket for the truncated potentials.
//!
//! For a radial measure with `M(t) = μ(B(0,t))` the flux identity
//! `|S^{n-1}| r^{n-1} |u'|^{p-2} u'(r) = -M(r)` integrates to
//! `u(r) = ∫_r^∞ (M(t) / (|S^{n-1}| t^{n-1}))^{1/(p-1)} dt`,
//! with `|S^{n-1}| = 2π^{n/2}/Γ(n/2)` the area of the unit sphere.

use crate::error::{check_dim, check_p, invalid, Error, Result};
use crate::geometry::{sphere_area, unit_ball_volume};
use crate::measures::Measure;
use crate::potentials::Kernel;
use crate::quadrature::gauss_legendre_4;
use serde::{Deserialize, Serialize};

/// Geometric grid `r_min · 2^{i/per_octave}` up to `r_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub per_octave: usize,
}

impl RadialGrid {
    /// `2^{-12}` to `2^{10}` times the support radius (or one for a
    /// measure sitting at the center).
    pub fn for_measure(mu: &Measure, per_octave: usize) -> Self {
        let s = match mu.radial_center() {
            Some(c) => mu.support_radius_from(&c),
            None => 1.0,
        };
        let s = if s > 0.0 && s.is_finite() { s } else { 1.0 };
        RadialGrid { r_min: s * 2f64.powi(-12), r_max: s * 2f64.powi(10), per_octave }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_max > self.r_min && self.r_max.is_finite()) {
            return Err(invalid("grid.r_max", "need 0 < r_min < r_max < ∞"));
        }
        if self.per_octave == 0 {
            return Err(invalid("grid.per_octave", "need at least one point per octave"));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let octaves = (self.r_max / self.r_min).log2();
        let cells = (octaves * self.per_octave as f64).ceil().max(1.0) as usize;
        let h = (self.r_max / self.r_min).ln() / cells as f64;
        (0..=cells).map(|i| self.r_min * (i as f64 * h).exp()).collect()
    }

    pub fn doubled(&self) -> Self {
        RadialGrid { per_octave: self.per_octave * 2, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// `-Δ_p u = μ`, `u(∞) = 0`.
    Poisson,
    /// `-Δ_p u = σ u^{p-1}`, `u(∞) = 1`, with `σ = μ`.
    Gauge,
    /// `-Δ_p u = σ u^{p-1} + ω`, `u(∞) = 0`, with `σ = μ`.
    Full,
}

#[derive(Debug, Clone)]
pub struct RadialProblem {
    pub p: f64,
    pub n: usize,
    pub kind: ProblemKind,
    /// `μ` for the Poisson problem, `σ` otherwise.
    pub mu: Measure,
    /// The source of the full problem.
    pub omega: Option<Measure>,
    pub grid: RadialGrid,
}

impl RadialProblem {
    fn center(&self) -> Result<Vec<f64>> {
        let mut c: Option<Vec<f64>> = None;
        for m in std::iter::once(&self.mu).chain(self.omega.iter()).filter(|m| !m.is_zero()) {
            let mc = m.radial_center().ok_or_else(|| Error::Unsupported("the radial oracle needs radial measures".into()))?;
            match &c {
                Some(c0) if crate::geometry::dist(c0, &mc) > 1e-14 => {
                    return Err(Error::Unsupported("measures must share one center".into()))
                }
                Some(_) => {}
                None => c = Some(mc),
            }
        }
        Ok(c.unwrap_or_else(|| vec![0.0; self.n]))
    }

    fn validate(&self) -> Result<Vec<f64>> {
        check_p(self.p, self.n)?;
        check_dim(self.n, self.mu.dim())?;
        if let Some(w) = &self.omega {
            check_dim(self.n, w.dim())?;
        }
        self.grid.validate()?;
        let c = self.center()?;
        for m in std::iter::once(&self.mu).chain(self.omega.iter()) {
            if !m.is_zero() && m.support_radius_from(&c) >= self.grid.r_max {
                return Err(invalid("grid.r_max", "measure has mass beyond the grid; its tail is not representable"));
            }
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSolution {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    /// `u'(r_i)`.
    pub du: Vec<f64>,
    /// Geometric cell midpoints and the values there.
    pub r_mid: Vec<f64>,
    pub u_mid: Vec<f64>,
    pub du_mid: Vec<f64>,
    /// Sup-norm increment of each fixed-point step.
    pub increments: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Fixed-point steps that decreased `u` somewhere.
    pub monotonicity_violations: usize,
}

impl RadialSolution {
    /// Interpolation between grid values; constant below the grid and
    /// `None` beyond it.
    pub fn eval(&self, r: f64) -> Option<f64> {
        let last = *self.r.last()?;
        if r > last {
            return None;
        }
        if r <= self.r[0] {
            return Some(self.u[0]);
        }
        let i = self.r.partition_point(|&t| t <= r).min(self.r.len() - 1);
        let (a, b) = (self.r[i - 1], self.r[i]);
        let s = (r / a).ln() / (b / a).ln();
        let (ua, ub) = (self.u[i - 1], self.u[i]);
        if ua > 0.0 && ub > 0.0 {
            // log-log, exact on power laws
            Some((ua.ln() * (1.0 - s) + ub.ln() * s).exp())
        } else {
            Some(ua * (1.0 - s) + ub * s)
        }
    }

    /// Rows `r, u, u'`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,u,du\n");
        for i in 0..self.r.len() {
            s.push_str(&format!("{:e},{:e},{:e}\n", self.r[i], self.u[i], self.du[i]));
        }
        s
    }
}

/// Flux `F(t)` on the grid with an in-cell model driven by `M_base`.
struct Flux<'a> {
    nodes: Vec<f64>,
    base: &'a dyn Fn(f64) -> f64,
    /// Flux at the nodes.
    at: Vec<f64>,
    /// Base cumulative at the nodes.
    base_at: Vec<f64>,
    /// Extra flux arriving in cell k as a multiple of the base increment.
    slope: Vec<f64>,
    /// A further term constant in `t > 0` (centered atoms of the source).
    point: f64,
}

impl Flux<'_> {
    fn eval(&self, k: usize, t: f64) -> f64 {
        self.at[k] + self.slope[k] * ((self.base)(t) - self.base_at[k]) + self.point
    }
}

/// `∫_{r_k}^{r_{k+1}} (F(t) / (S t^{n-1}))^{1/(p-1)} dt` on `[a, b]` inside cell `k`.
fn flux_integral(f: &Flux, k: usize, a: f64, b: f64, s: f64, n: usize, p: f64) -> f64 {
    let (gx, gw) = gauss_legendre_4();
    let e = 1.0 / (p - 1.0);
    // two panels in log t keep the r^{-(n-1)/(p-1)} weight resolved
    let (la, lb) = (a.ln(), b.ln());
    let mut acc = 0.0;
    for panel in 0..2 {
        let (u0, u1) = (la + (lb - la) * panel as f64 / 2.0, la + (lb - la) * (panel + 1) as f64 / 2.0);
        let (m, h) = (0.5 * (u0 + u1), 0.5 * (u1 - u0));
        for i in 0..4 {
            let t = (m + h * gx[i]).exp();
            let fl = f.eval(k, t).max(0.0);
            acc += h * gw[i] * t * (fl / (s * t.powi(n as i32 - 1))).powf(e);
        }
    }
    acc
}

/// `u = c_∞ + ∫_r^∞ |u'|` on the nodes and midpoints.
fn integrate_down(f: &Flux, n: usize, p: f64, c_inf: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let s = sphere_area(n);
    let e = 1.0 / (p - 1.0);
    let r = &f.nodes;
    let last = r.len() - 1;
    let d = |fl: f64, t: f64| -(fl.max(0.0) / (s * t.powi(n as i32 - 1))).powf(e);
    // beyond the grid the flux is constant: ∫_R^∞ (F/(S t^{n-1}))^{e} dt
    let f_top = f.at[last] + f.point;
    let tail = (f_top.max(0.0) / s).powf(e) * (p - 1.0) / (n as f64 - p) * r[last].powf((p - n as f64) / (p - 1.0));
    let mut u = vec![0.0; r.len()];
    let mut du = vec![0.0; r.len()];
    let mut um = vec![0.0; last];
    let mut dum = vec![0.0; last];
    u[last] = c_inf + tail;
    du[last] = d(f_top, r[last]);
    for k in (0..last).rev() {
        let mid = (r[k] * r[k + 1]).sqrt();
        um[k] = u[k + 1] + flux_integral(f, k, mid, r[k + 1], s, n, p);
        u[k] = um[k] + flux_integral(f, k, r[k], mid, s, n, p);
        dum[k] = d(f.eval(k, mid), mid);
        du[k] = d(f.at[k] + f.point, r[k]);
    }
    (u, du, um, dum)
}

/// `t ↦ μ(B(c, t))` about the shared center (already validated).
fn centered(mu: &Measure) -> impl Fn(f64) -> f64 + '_ {
    move |t: f64| if mu.is_zero() { 0.0 } else { mu.radial_cumulative(t) }
}

/// `-Δ_p u = μ` for radial `μ`, by the flux identity.
pub fn radial_poisson_solve(prob: &RadialProblem) -> Result<RadialSolution> {
    if prob.kind != ProblemKind::Poisson {
        return Err(invalid("kind", "expected a Poisson problem"));
    }
    prob.validate()?;
    let m = centered(&prob.mu);
    let nodes = prob.grid.points();
    let at: Vec<f64> = nodes.iter().map(|&t| m(t)).collect();
    let f = Flux { base: &m, base_at: at.clone(), at, slope: vec![1.0; nodes.len()], point: 0.0, nodes };
    let (u, du, u_mid, du_mid) = integrate_down(&f, prob.n, prob.p, 0.0);
    Ok(RadialSolution {
        r_mid: f.nodes.windows(2).map(|w| (w[0] * w[1]).sqrt()).collect(),
        r: f.nodes,
        u,
        du,
        u_mid,
        du_mid,
        increments: Vec::new(),
        iterations: 1,
        converged: true,
        monotonicity_violations: 0,
    })
}

/// Settings of the monotone iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IterationSpec {
    pub tol: f64,
    pub max_iter: usize,
    /// Divergence is reported once an iterate exceeds `cap` times the
    /// first one (at least 1) somewhere; a singular `P(ω)` is not growth.
    pub cap: f64,
}

impl Default for IterationSpec {
    fn default() -> Self {
        IterationSpec { tol: 1e-13, max_iter: 500, cap: 1e12 }
    }
}

/// Monotone iteration `u_{j+1} = c_∞ + P(σ u_j^{p-1} + ω)` from
/// `u_0 = c_∞ + P(ω)`; `c_∞ = 1` for the gauge problem.
pub fn gauge_solve(prob: &RadialProblem, spec: &IterationSpec) -> Result<RadialSolution> {
    let (c_inf, omega) = match prob.kind {
        ProblemKind::Gauge => (1.0, None),
        ProblemKind::Full => (0.0, prob.omega.as_ref()),
        ProblemKind::Poisson => return Err(invalid("kind", "expected a gauge or full problem")),
    };
    let c = prob.validate()?;
    let (n, p) = (prob.n, prob.p);
    let sig = centered(&prob.mu);
    let zero = Measure::zero(n);
    let om = centered(omega.unwrap_or(&zero));
    let nodes = prob.grid.points();
    let sig_at: Vec<f64> = nodes.iter().map(|&t| sig(t)).collect();
    let om_at: Vec<f64> = nodes.iter().map(|&t| om(t)).collect();
    let om_point = omega.map_or(0.0, |w| w.point_mass_at(&c));
    if prob.mu.point_mass_at(&c) > 0.0 {
        return Err(invalid("mu", "σ may not charge the center"));
    }
    let sum_base = |t: f64| sig(t) + om(t) - om_point;
    // the ω part rides on the same in-cell model through its own increments
    let build = |u: Option<&[f64]>| -> Flux {
        let len = nodes.len();
        let mut at = vec![0.0; len];
        let mut slope = vec![0.0; len];
        let w = |i: usize| u.map_or(1.0, |u| u[i].powf(p - 1.0));
        if u.is_none() && c_inf == 0.0 {
            // first iterate of the full problem: P(ω)
            for i in 0..len {
                at[i] = om_at[i] - om_point;
            }
        } else {
            // mass below the first node: u^{p-1} ~ r^{-γ} against a density
            let gamma = match u {
                Some(u) if len > 1 => {
                    let g = -(p - 1.0) * (u[1] / u[0]).ln() / (nodes[1] / nodes[0]).ln();
                    g.clamp(0.0, n as f64 - 0.5)
                }
                _ => 0.0,
            };
            at[0] = w(0) * sig_at[0] * n as f64 / (n as f64 - gamma) + om_at[0] - om_point;
            for i in 1..len {
                at[i] = at[i - 1] + 0.5 * (w(i - 1) + w(i)) * (sig_at[i] - sig_at[i - 1]) + (om_at[i] - om_at[i - 1]);
            }
        }
        for k in 0..len - 1 {
            let db = sum_base(nodes[k + 1]) - sum_base(nodes[k]);
            slope[k] = if db > 0.0 { (at[k + 1] - at[k]) / db } else { 0.0 };
        }
        Flux { nodes: nodes.clone(), base: &sum_base, base_at: nodes.iter().map(|&t| sum_base(t)).collect(), at, slope, point: om_point }
    };
    let first = if c_inf == 1.0 {
        let (len, cells) = (nodes.len(), nodes.len() - 1);
        (vec![1.0; len], vec![0.0; len], vec![1.0; cells], vec![0.0; cells])
    } else {
        integrate_down(&build(None), n, p, 0.0)
    };
    let (mut u, mut du, mut um, mut dum) = first;
    let ceiling: Vec<f64> = u.iter().map(|v| spec.cap * v.max(1.0)).collect();
    let mut increments = Vec::new();
    let mut violations = 0;
    let mut converged = false;
    for _ in 0..spec.max_iter {
        let flux = build(Some(&u));
        let (u2, du2, um2, dum2) = integrate_down(&flux, n, p, c_inf);
        let mut inc: f64 = 0.0;
        let mut decreased = false;
        for (a, b) in u.iter().zip(&u2) {
            inc = inc.max((b - a).abs() / b.abs().max(1.0));
            if *b < a * (1.0 - 1e-13) {
                decreased = true;
            }
        }
        if u2.iter().zip(&ceiling).any(|(v, c)| !v.is_finite() || v > c) {
            return Err(Error::Divergent(format!("iterate exceeded the cap {} after {} steps", spec.cap, increments.len() + 1)));
        }
        violations += decreased as usize;
        increments.push(inc);
        (u, du, um, dum) = (u2, du2, um2, dum2);
        if inc < spec.tol {
            converged = true;
            break;
        }
    }
    Ok(RadialSolution {
        r_mid: nodes.windows(2).map(|w| (w[0] * w[1]).sqrt()).collect(),
        r: nodes,
        u,
        du,
        u_mid: um,
        du_mid: dum,
        iterations: increments.len(),
        increments,
        converged,
        monotonicity_violations: violations,
    })
}

/// Largest relative weak residual of `-Δ_p v = (p-1)|∇v|^p + σ` for
/// `v = log u`, over radial bumps `cos²` in `log r`. Each residual is
/// divided by the sum of the absolute values of its three terms.
pub fn riccati_residual(sol: &RadialSolution, sigma: &Measure, p: f64, n: usize) -> Result<f64> {
    check_p(p, n)?;
    if sol.u.iter().chain(&sol.u_mid).any(|u| !(*u > 0.0)) {
        return Err(Error::Precondition("u must stay positive for the logarithm".into()));
    }
    if !sigma.is_zero() && sigma.radial_center().is_none() {
        return Err(Error::Unsupported("the residual needs a radial σ".into()));
    }
    let m = centered(sigma);
    let s = sphere_area(n);
    let r = &sol.r;
    let cells = r.len() - 1;
    let (l0, l1) = (r[0].ln(), r[cells].ln());
    let mut worst: f64 = 0.0;
    // bumps of half-width one octave over the inner part of the grid
    let w = std::f64::consts::LN_2;
    let count = 24;
    for j in 0..count {
        let lc = l0 + (l1 - l0) * (0.15 + 0.5 * j as f64 / count as f64);
        // φ and dφ/dr
        let bump = |t: f64| {
            let x = (t.ln() - lc) / w;
            if x.abs() >= 1.0 {
                return (0.0, 0.0);
            }
            let phase = 0.5 * std::f64::consts::PI * x;
            (phase.cos().powi(2), -std::f64::consts::PI * phase.sin() * phase.cos() / (w * t))
        };
        // a: flux term, b: gradient term, g: σ term by parts, -∫ φ' M dt
        let terms = |t: f64, u: f64, du: f64| {
            let (phi, dphi) = bump(t);
            let vp = du / u;
            let vol = s * t.powi(n as i32 - 1) * t;
            (vp.abs().powf(p - 2.0) * vp * dphi * vol, (p - 1.0) * vp.abs().powf(p) * phi * vol, -dphi * m(t) * t)
        };
        let (mut a, mut b, mut g) = (0.0, 0.0, 0.0);
        for k in 0..cells {
            let (t0, t1) = (r[k], r[k + 1]);
            if (t1.ln() - lc).abs() >= w && (t0.ln() - lc).abs() >= w && (t0.ln() - lc) * (t1.ln() - lc) > 0.0 {
                continue;
            }
            // Simpson in log r
            let h = (t1 / t0).ln() / 6.0;
            let e0 = terms(t0, sol.u[k], sol.du[k]);
            let em = terms(sol.r_mid[k], sol.u_mid[k], sol.du_mid[k]);
            let e1 = terms(t1, sol.u[k + 1], sol.du[k + 1]);
            a += h * (e0.0 + 4.0 * em.0 + e1.0);
            b += h * (e0.1 + 4.0 * em.1 + e1.1);
            g += h * (e0.2 + 4.0 * em.2 + e1.2);
        }
        let scale = a.abs() + b.abs() + g.abs();
        if scale > 0.0 {
            worst = worst.max((a - b - g).abs() / scale);
        }
    }
    Ok(worst)
}

/// Settings of the brute-force evaluator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteForce {
    pub kernel: Kernel,
    pub r_trunc: f64,
    pub per_octave: usize,
}

/// Minimum cells per octave, ten times the default resolution.
pub const BRUTE_MIN_PER_OCTAVE: usize = 320;

/// Bracket `(low, high)` of `∫_0^R (μ(B(x,t)) t^{-a})^q dt/t`: on each
/// geometric cell the mass is squeezed between its values at the cell ends
/// and the power weight is integrated exactly.
pub fn brute_force_potential(mu: &Measure, x: &[f64], bf: &BruteForce) -> Result<(f64, f64)> {
    let n = mu.dim();
    check_dim(n, x.len())?;
    if bf.per_octave < BRUTE_MIN_PER_OCTAVE {
        return Err(invalid("per_octave", format!("need at least {BRUTE_MIN_PER_OCTAVE} cells per octave")));
    }
    if !(bf.r_trunc > 0.0) {
        return Err(invalid("r_trunc", "truncation must be positive"));
    }
    if mu.is_zero() {
        return Ok((0.0, 0.0));
    }
    if mu.point_mass_at(x) > 0.0 {
        return Ok((f64::INFINITY, f64::INFINITY));
    }
    let k = bf.kernel;
    let aq = k.a * k.q;
    // ∫_lo^hi t^{-aq} dt/t
    let pw = |lo: f64, hi: f64| if hi.is_infinite() { lo.powf(-aq) / aq } else { (lo.powf(-aq) - hi.powf(-aq)) / aq };
    let sat = mu.support_radius_from(x);
    let t_hi = bf.r_trunc.min(sat);
    let d0 = mu.support_distance(x);
    let (mut lo, mut hi) = (0.0, 0.0);
    let t_start = if d0 > 0.0 {
        d0
    } else {
        let top = if t_hi.is_finite() { t_hi } else { 1.0 };
        let t0 = top * 2f64.powi(-60);
        let (rho, delta) = mu.local_uniform(x);
        if delta >= t0 {
            // μ(B(x,t)) = ρ ω_n t^n below t0
            let g = (n as f64 - k.a) * k.q;
            let v = (rho * unit_ball_volume(n)).powf(k.q) * t0.powf(g) / g;
            lo += v;
            hi += v;
        } else {
            hi = f64::INFINITY;
        }
        t0
    };
    if t_start < t_hi {
        if t_hi.is_infinite() {
            return Ok((lo, f64::INFINITY));
        }
        let mut knots = crate::quadrature::LogGrid::new(t_start, t_hi, bf.per_octave, 1.0, &mu.breakpoints(x)).nodes;
        knots.dedup();
        for w in knots.windows(2) {
            let (a, b) = (w[0], w[1]);
            // open balls: the mass on (a, b) is at least μ(B(x, a⁺))
            let sliver = a * (1.0 + 2f64.powi(-40));
            let m_lo = mu.ball_mass(x, sliver.min(b))?;
            let m_hi = mu.ball_mass(x, b)?;
            let (ml, mh) = ((m_lo.value - m_lo.err).max(0.0), m_hi.value + m_hi.err);
            lo += ml.powf(k.q) * pw(sliver.min(b), b);
            hi += mh.powf(k.q) * pw(a, b);
        }
    }
    if bf.r_trunc > t_hi {
        let total = mu.ball_mass(x, t_hi * (1.0 + 1e-12))?.value.max(mu.total_mass().min(f64::MAX));
        let v = total.powf(k.q) * pw(t_hi.max(t_start), bf.r_trunc);
        lo += v;
        hi += v;
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{dirac_wolff, wolff_p, Quadrature};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn poisson(mu: Measure, p: f64, n: usize) -> RadialProblem {
        let grid = RadialGrid::for_measure(&mu, 32);
        RadialProblem { p, n, kind: ProblemKind::Poisson, mu, omega: None, grid }
    }

    #[test]
    fn newtonian_dirac() {
        let sol = radial_poisson_solve(&poisson(Measure::dirac(&[0.0; 3], 1.0), 2.0, 3)).unwrap();
        for (r, u) in sol.r.iter().zip(&sol.u) {
            assert_relative_eq!(*u, 1.0 / (4.0 * PI * r), max_relative = 1e-6);
        }
        let u = sol.eval(0.5).unwrap();
        assert_relative_eq!(u, 1.0 / (2.0 * PI), max_relative = 1e-4);
    }

    #[test]
    fn dirac_slopes() {
        for (p, n) in [(1.5, 3), (3.0, 5), (2.5, 4)] {
            let sol = radial_poisson_solve(&poisson(Measure::dirac(&vec![0.0; n], 1.0), p, n)).unwrap();
            let m = sol.r.len() / 2;
            let slope = (sol.u[m + 8] / sol.u[m]).ln() / (sol.r[m + 8] / sol.r[m]).ln();
            assert!((slope - (p - n as f64) / (p - 1.0)).abs() < 1e-3);
        }
    }

    #[test]
    fn zero_and_comparison() {
        let sol = radial_poisson_solve(&poisson(Measure::zero(3), 2.0, 3)).unwrap();
        assert!(sol.u.iter().all(|u| *u == 0.0));
        let small = radial_poisson_solve(&poisson(Measure::uniform_ball(&[0.0; 3], 1.0, 1.0).unwrap(), 2.0, 3)).unwrap();
        let mut prob = poisson(Measure::uniform_ball(&[0.0; 3], 1.0, 1.5).unwrap(), 2.0, 3);
        prob.grid = RadialGrid::for_measure(&prob.mu, 32);
        let big = radial_poisson_solve(&prob).unwrap();
        assert!(small.u.iter().zip(&big.u).all(|(a, b)| a <= b));
        assert!(small.u.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn gauge_trivial_and_small() {
        let grid = RadialGrid { r_min: 1e-3, r_max: 1e3, per_octave: 16 };
        let prob = RadialProblem { p: 2.0, n: 3, kind: ProblemKind::Gauge, mu: Measure::zero(3), omega: None, grid };
        let sol = gauge_solve(&prob, &IterationSpec::default()).unwrap();
        assert!(sol.u.iter().all(|u| *u == 1.0) && sol.iterations == 1);
        let sigma = Measure::uniform_ball(&[0.0; 3], 1.0, 0.02).unwrap();
        let prob = RadialProblem { mu: sigma, ..prob };
        let sol = gauge_solve(&prob, &IterationSpec::default()).unwrap();
        assert!(sol.converged && sol.monotonicity_violations == 0);
        assert!(sol.u.iter().all(|u| *u >= 1.0));
        assert!(sol.u.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn riccati_control() {
        for (p, n, eps) in [(2.0, 3, 0.05), (2.5, 3, 0.02), (3.0, 4, 0.05)] {
            let sigma = Measure::uniform_ball(&vec![0.0; n], 1.0, eps).unwrap();
            let grid = RadialGrid::for_measure(&sigma, 64);
            let prob = RadialProblem { p, n, kind: ProblemKind::Gauge, mu: sigma.clone(), omega: None, grid };
            let g = gauge_solve(&prob, &IterationSpec::default()).unwrap();
            let res = riccati_residual(&g, &sigma, p, n).unwrap();
            let g2 = gauge_solve(&RadialProblem { grid: grid.doubled(), ..prob.clone() }, &IterationSpec::default()).unwrap();
            let res2 = riccati_residual(&g2, &sigma, p, n).unwrap();
            assert!(g.converged && res < 1e-4 && res2 <= 0.5 * res, "{res} {res2}");
            let pois = radial_poisson_solve(&RadialProblem { kind: ProblemKind::Poisson, ..prob }).unwrap();
            assert!(riccati_residual(&pois, &sigma, p, n).unwrap() > 1e-2);
        }
    }

    #[test]
    fn full_problem_with_zero_sigma() {
        let omega = Measure::dirac(&[0.0; 3], 1.0);
        let grid = RadialGrid::for_measure(&omega, 32);
        let prob = RadialProblem { p: 2.0, n: 3, kind: ProblemKind::Full, mu: Measure::zero(3), omega: Some(omega), grid };
        let sol = gauge_solve(&prob, &IterationSpec::default()).unwrap();
        for (r, u) in sol.r.iter().zip(&sol.u) {
            assert_relative_eq!(*u, 1.0 / (4.0 * PI * r), max_relative = 1e-6);
        }
    }

    #[test]
    fn bracket_contains_closed_forms() {
        let k = Kernel::wolff_p(3, 2.5).unwrap();
        let bf = BruteForce { kernel: k, r_trunc: f64::INFINITY, per_octave: 320 };
        let mu = Measure::dirac(&[0.1, 0.0, 0.0], 2.0);
        let x = [0.4, 0.3, 0.0];
        let (lo, hi) = brute_force_potential(&mu, &x, &bf).unwrap();
        let exact = dirac_wolff(2.0, crate::geometry::dist(&x, &[0.1, 0.0, 0.0]), 2.5, 3);
        assert!(lo <= exact * (1.0 + 1e-12) && exact <= hi * (1.0 + 1e-12) && hi - lo < 1e-8, "{lo} {hi} {exact}");
        assert_eq!(brute_force_potential(&Measure::zero(3), &x, &bf).unwrap(), (0.0, 0.0));
        let ball = Measure::uniform_ball(&[0.0; 3], 1.0, 1.0).unwrap();
        let (lo, hi) = brute_force_potential(&ball, &[0.2, 0.1, 0.0], &BruteForce { r_trunc: 1.5, ..bf }).unwrap();
        let v = wolff_p(&ball, &[0.2, 0.1, 0.0], 2.5, 1.5, &Quadrature::default()).unwrap().value;
        assert!(lo <= v && v <= hi, "{lo} {v} {hi}");
    }
}
