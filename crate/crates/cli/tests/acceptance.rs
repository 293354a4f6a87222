//! The acceptance suite: thirteen criteria, one PASS/FAIL line each.
//!
//! Empirical constants are frozen in `tests/baselines/acceptance.json` on
//! the first run and read back afterwards; `WOLFF_REFREEZE=1` recalibrates.
//! `WOLFF_ONLY=3,9` restricts a run to the listed criteria.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;
use wolff_core::baseline::{relative_drift, Baselines};
use wolff_core::bounds::{self, BoundOptions, Domain, InnerSelector};
use wolff_core::capacity::{ball_condition_constant, BallSampling};
use wolff_core::dyadic::{self, CubeTree, DyadicCube};
use wolff_core::geometry::{dist, norm, sample_annulus};
use wolff_core::measures::{PowerLaw, RadialMeasure};
use wolff_core::oracle::{self, IterationSpec, ProblemKind, RadialGrid, RadialProblem};
use wolff_core::potentials::{self, Branch, Quadrature};
use wolff_core::Measure;

/// Criteria expected to fail, with the reason recorded in the ledger.
const KNOWN_FAILURES: &[u32] = &[7, 12];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_point(r: &mut ChaCha8Rng, n: usize, half: f64) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-half..half)).collect()
}

fn log_uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (r.gen_range(lo.ln()..hi.ln())).exp()
}

/// Uniform density on `B(0, radius)` with ball constant `eps` at exponent
/// `p`: `σ(B(x,r))/r^{n-p}` is largest for the ball itself, where it is
/// `d |B_1| radius^p`.
fn eps_ball(n: usize, p: f64, eps: f64, radius: f64) -> Measure {
    let vol = wolff_core::geometry::unit_ball_volume(n);
    let density = eps / (vol * radius.powf(p));
    Measure::uniform_ball(&vec![0.0; n], radius, density).unwrap()
}

fn power_density_on(n: usize, gamma: f64, coef: f64, radius: f64, per_octave: usize, octaves: u32) -> Measure {
    let law = PowerLaw { coef, gamma, radius };
    Measure::Radial(RadialMeasure::power(n, vec![0.0; n], law, per_octave, octaves).unwrap())
}

fn ray(n: usize, radii: &[f64]) -> Vec<Vec<f64>> {
    let mut dir = vec![1.0; n];
    let l = norm(&dir);
    dir.iter_mut().for_each(|d| *d /= l);
    radii.iter().map(|r| dir.iter().map(|d| d * r).collect()).collect()
}

fn geometric(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64)).collect()
}

/// Freezes `values` and reports the largest drift against the stored copy.
fn frozen(store: &mut Baselines, key: &str, note: &str, values: Vec<f64>) -> (Vec<f64>, f64) {
    let live = values.clone();
    let f = store.freeze_with(key, note, || values).expect("baseline");
    let stored = f.values().to_vec();
    let drift = stored.iter().zip(&live).map(|(a, b)| relative_drift(*a, *b)).fold(0.0, f64::max);
    (stored, drift)
}

fn c1_dirac_closed_form(_: &mut Baselines) -> Verdict {
    let start = Instant::now();
    let mut r = rng(1);
    let q = Quadrature::default();
    let mut worst = 0.0f64;
    for (p, n) in [(2.0, 3), (3.0, 5), (1.5, 3)] {
        for _ in 0..20 {
            let x0 = random_point(&mut r, n, 1.0);
            let x = random_point(&mut r, n, 2.0);
            let a = r.gen_range(0.1..5.0);
            let got = potentials::wolff_p(&Measure::dirac(&x0, a), &x, p, f64::INFINITY, &q).unwrap().value;
            let d = dist(&x, &x0);
            let want = a.powf(1.0 / (p - 1.0)) * ((p - 1.0) / (n as f64 - p)) * d.powf((p - n as f64) / (p - 1.0));
            worst = worst.max(relative_drift(got, want));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(worst <= 1e-6 && secs < 1.0, format!("max rel err {worst:.2e} over 60 points in {secs:.3} s"))
}

fn c2_lebesgue_center(_: &mut Baselines) -> Verdict {
    let leb = Measure::uniform_ball(&[0.0; 3], 1.0, 1.0).unwrap();
    let v = potentials::wolff_p(&leb, &[0.0; 3], 2.0, 1.0, &Quadrature::default()).unwrap().value;
    let err = (v - 2.0 * PI / 3.0).abs();
    verdict(err <= 1e-4, format!("W^1_(1,2) = {v:.12}, |err| = {err:.2e}"))
}

/// Random atomic measure in a cube of side `2^level` at the origin.
fn random_atoms(r: &mut ChaCha8Rng, n: usize, max_atoms: usize) -> Measure {
    let k = r.gen_range(1..=max_atoms);
    let atoms = (0..k).map(|_| ((0..n).map(|_| r.gen_range(0.0..1.0)).collect(), log_uniform(r, 1e-3, 1.0))).collect();
    Measure::atoms(n, atoms).unwrap()
}

fn c3_carleson_embedding(_: &mut Baselines) -> Verdict {
    let start = Instant::now();
    let mut r = rng(3);
    let (mut violations, mut checks, mut worst) = (0, 0, 0.0f64);
    for _ in 0..200 {
        let sigma = random_atoms(&mut r, 2, 64);
        let p = r.gen_range(1.1..1.9);
        let depth = r.gen_range(1..=6);
        let c = dyadic::carleson_condition_constant(&sigma, p, 0, depth).unwrap().constant;
        let (a, b, phase) = (r.gen_range(-8.0..8.0), r.gen_range(-8.0..8.0), r.gen_range(0.0..PI));
        let amp = r.gen_range(0.0..3.0);
        let f = move |z: &[f64]| (amp * (a * z[0] + b * z[1] + phase).sin()).exp();
        for s in [1.5, 2.0, 3.0] {
            let e = dyadic::carleson_embedding_check(&sigma, &f, s, p, c, 0, depth).unwrap();
            checks += 1;
            worst = worst.max(e.lhs / e.rhs);
            if !e.pass {
                violations += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        violations == 0 && secs < 60.0,
        format!("{violations} violations in {checks} checks, max lhs/rhs {worst:.3}, {secs:.2} s"),
    )
}

fn c4_duality(store: &mut Baselines) -> Verdict {
    let mut r = rng(4);
    let (mut adm, mut gap, mut ratio) = (0.0f64, 0.0f64, 0.0f64);
    let root = DyadicCube::new(0, vec![0, 0]);
    for i in 0..100 {
        let sigma = random_atoms(&mut r, 2, 64);
        let depth = r.gen_range(2..=6);
        let tree = CubeTree::build(&sigma, std::slice::from_ref(&root), depth).unwrap();
        let mut lambda = BTreeMap::new();
        for (q, m) in tree.sorted() {
            if m > 0.0 && r.gen_bool(0.7) {
                lambda.insert(q.clone(), log_uniform(&mut r, 1e-3, 10.0));
            }
        }
        if lambda.is_empty() {
            lambda.insert(root.clone(), 1.0);
        }
        let s = r.gen_range(1.2..4.0);
        let d = dyadic::duality_check(&sigma, &root, &lambda, s, 32, 1000 + i).unwrap();
        adm = adm.max(d.admissibility);
        gap = gap.max(d.identity_gap / d.lhs);
        ratio = ratio.max(d.random_ratio);
    }
    // the pairing of an admissible sequence never exceeds the left side
    // (Hölder), so the recorded constant is 1 whenever the sample agrees
    let (c, _) = frozen(store, "duality.random_pairing_constant", "max random pairing / lhs, rounded up to 1", vec![ratio.max(1.0)]);
    let pass = adm <= 1.0 + 1e-12 && gap <= 1e-10 && ratio <= c[0];
    verdict(pass, format!("admissibility {adm:.15}, relative gap {gap:.1e}, random pairing ratio {ratio:.4} (c = {})", c[0]))
}

fn c5_tail_scaling(_: &mut Baselines) -> Verdict {
    let mut r = rng(5);
    let q = Quadrature::default();
    let (mut worst, mut infinite, mut tried) = (0.0f64, 0, 0);
    while tried < 100 {
        let n = r.gen_range(2..=3);
        let p = r.gen_range(1.2..(n as f64 - 0.2));
        let sigma = match r.gen_range(0..3) {
            0 => eps_ball(n, p, r.gen_range(0.01..1.0), log_uniform(&mut r, 0.2, 3.0)),
            1 => power_density_on(n, -r.gen_range(0.0..(n as f64 - p)), r.gen_range(0.1..2.0), log_uniform(&mut r, 0.3, 3.0), 4, 30),
            _ => {
                let c: Vec<f64> = random_point(&mut r, n, 1.0);
                Measure::Radial(RadialMeasure::uniform_ball(n, c, log_uniform(&mut r, 0.2, 2.0), r.gen_range(0.01..1.0)).unwrap())
            }
        };
        let x = random_point(&mut r, n, 2.0);
        let t = log_uniform(&mut r, 0.05, 3.0);
        let dir = random_point(&mut r, n, 1.0);
        let y: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + 0.5 * t * d / norm(&dir).max(1.0)).collect();
        if dist(&x, &y) > t {
            continue;
        }
        tried += 1;
        let a = potentials::tail_difference(&sigma, &x, &y, t, 1.0, p, &q).unwrap();
        let lambda = log_uniform(&mut r, 0.05, 20.0);
        let scaled = sigma.pushforward(lambda, lambda.powf(n as f64 - p));
        let sc = |v: &[f64]| v.iter().map(|c| c * lambda).collect::<Vec<f64>>();
        let b = potentials::tail_difference(&scaled, &sc(&x), &sc(&y), lambda * t, 1.0, p, &q).unwrap();
        if !(a.value.is_finite() && b.value.is_finite()) {
            infinite += 1;
        }
        worst = worst.max(relative_drift(a.value, b.value));
    }
    verdict(infinite == 0 && worst <= 1e-6, format!("{infinite} non-finite, max relative change {worst:.2e} over {tried} rescalings"))
}

fn c6_obstacle(store: &mut Baselines) -> Verdict {
    let sigma = Measure::uniform_ball(&[0.0; 3], 1.0, 0.05 * 3.0 / (4.0 * PI)).unwrap();
    let omega = Measure::dirac(&[0.0; 3], 1.0);
    let ball = ball_condition_constant(&sigma, 2.0, &BallSampling::default()).unwrap().constant;
    let pts = sample_annulus(&[0.0; 3], 0.01, 2.0, 100, 2026);
    let opts = BoundOptions::default();
    let a = bounds::obstacle_check(&sigma, &omega, 0.1, 2.0, &pts, &opts).unwrap();
    let b = bounds::obstacle_check(&sigma, &omega, 0.1, 2.0, &pts, &opts.refined(2)).unwrap();
    let drift = relative_drift(a.c_star, b.c_star);
    let (c, stored_drift) = frozen(store, "obstacle.c_star", "ε-ball σ, Dirac ω, p = 2, n = 3, β = 0.1", vec![a.c_star]);
    let pass = ball <= 0.05 + 1e-12
        && a.dominates
        && !a.hard_failure
        && !a.divergent
        && a.c_star.is_finite()
        && drift < 0.05
        && stored_drift < 1e-6;
    verdict(
        pass,
        format!(
            "ball constant {ball:.6}, v ≥ Wω at {}/100, C* = {:.5} (doubled {:.5}, drift {:.2}%), frozen {:.5}",
            a.points.iter().filter(|q| q.v >= q.wolff).count(),
            a.c_star,
            b.c_star,
            100.0 * drift,
            c[0]
        ),
    )
}

fn c7_branch_coincidence(_: &mut Baselines) -> Verdict {
    let n = 3;
    let p = 2.0;
    let opts = BoundOptions::default();
    let sigmas = [eps_ball(n, p, 0.05, 1.0), power_density_on(n, -0.5, 0.02, 1.5, 4, 30)];
    let omegas = [Measure::dirac(&[0.0; 3], 1.0), Measure::uniform_ball(&[0.0; 3], 0.5, 1.0).unwrap()];
    let pts = sample_annulus(&[0.0; 3], 0.05, 1.5, 8, 7);
    let (mut dv, mut dl, mut du) = (0.0f64, 0.0f64, 0.0f64);
    for sigma in &sigmas {
        for y in &pts {
            let c = [0.0; 3];
            let lo = potentials::local_v(sigma, &c, 1.0, y, p, Branch::Low, &opts.dyadic).unwrap().value;
            let hi = potentials::local_v(sigma, &c, 1.0, y, p, Branch::High, &opts.dyadic).unwrap().value;
            dv = dv.max(relative_drift(lo, hi));
        }
        for omega in &omegas {
            for x in &pts {
                let d = Domain::Entire;
                let a = bounds::closed_form_lower(sigma, omega, x, 1.0, p, &d, Branch::Low, &opts).unwrap().value;
                let b = bounds::closed_form_lower(sigma, omega, x, 1.0, p, &d, Branch::High, &opts).unwrap().value;
                dl = dl.max(relative_drift(a, b));
                let a = bounds::upper_bound_eval(sigma, omega, x, 1.0, p, &d, InnerSelector::Riesz, &opts).unwrap().value;
                let b = bounds::upper_bound_eval(sigma, omega, x, 1.0, p, &d, InnerSelector::Wolff, &opts).unwrap().value;
                du = du.max(relative_drift(a, b));
            }
        }
    }
    let tol = 1e-10;
    verdict(
        dv <= tol && dl <= tol && du <= tol,
        format!(
            "max rel diff: V {dv:.2e}{}, closed_form_lower {dl:.2e}, upper_bound_eval {du:.2e}",
            if dv > tol { " (the p ≥ 2 form also sums the balls above r)" } else { "" }
        ),
    )
}

fn c8_radial_oracle(_: &mut Baselines) -> Verdict {
    let mut notes = Vec::new();
    let mut pass = true;
    // Dirac Poisson problems
    let dirac = Measure::dirac(&[0.0; 3], 1.0);
    let grid = RadialGrid { r_min: 1e-3, r_max: 1e3, per_octave: 64 };
    let prob = RadialProblem { p: 2.0, n: 3, kind: ProblemKind::Poisson, mu: dirac, omega: None, grid };
    let sol = oracle::radial_poisson_solve(&prob).unwrap();
    let err = sol.r.iter().zip(&sol.u).map(|(r, u)| relative_drift(*u, 1.0 / (4.0 * PI * r))).fold(0.0, f64::max);
    pass &= err <= 1e-6;
    notes.push(format!("1/(4πr) err {err:.1e}"));
    let mut slope_err = 0.0f64;
    for (p, n) in [(1.5, 3), (2.5, 3), (3.0, 5), (2.0, 4), (1.8, 2)] {
        let mu = Measure::dirac(&vec![0.0; n], 1.0);
        let grid = RadialGrid { r_min: 1e-2, r_max: 1e2, per_octave: 64 };
        let s = oracle::radial_poisson_solve(&RadialProblem { p, n, kind: ProblemKind::Poisson, mu, omega: None, grid }).unwrap();
        let (i, j) = (s.r.len() / 4, 3 * s.r.len() / 4);
        let slope = (s.u[j].ln() - s.u[i].ln()) / (s.r[j].ln() - s.r[i].ln());
        slope_err = slope_err.max((slope - (p - n as f64) / (p - 1.0)).abs());
    }
    pass &= slope_err <= 1e-3;
    notes.push(format!("slope err {slope_err:.1e}"));
    // gauge iterates and the Riccati residual
    let (mut violations, mut worst_res, mut worst_rate) = (0, 0.0f64, f64::INFINITY);
    for (p, n) in [(2.0, 3), (2.5, 3), (3.0, 4), (1.5, 3)] {
        let sigma = eps_ball(n, p, 0.05, 1.0);
        let grid = RadialGrid::for_measure(&sigma, 64);
        let spec = IterationSpec::default();
        let a = oracle::gauge_solve(&RadialProblem { p, n, kind: ProblemKind::Gauge, mu: sigma.clone(), omega: None, grid }, &spec).unwrap();
        let b = oracle::gauge_solve(&RadialProblem { p, n, kind: ProblemKind::Gauge, mu: sigma.clone(), omega: None, grid: grid.doubled() }, &spec)
            .unwrap();
        violations += a.monotonicity_violations + b.monotonicity_violations + usize::from(!a.converged || !b.converged);
        let ra = oracle::riccati_residual(&a, &sigma, p, n).unwrap();
        let rb = oracle::riccati_residual(&b, &sigma, p, n).unwrap();
        worst_res = worst_res.max(ra);
        worst_rate = worst_rate.min(ra / rb);
    }
    pass &= violations == 0 && worst_res < 1e-4 && worst_rate >= 2.0;
    notes.push(format!("monotonicity violations {violations}, residual ≤ {worst_res:.1e}, doubling gain ≥ {worst_rate:.1}×"));
    verdict(pass, notes.join(", "))
}

/// One radial bilateral case: `σ`, `ω` centered at the origin, sampled on a ray.
struct RadialCase {
    p: f64,
    n: usize,
    sigma: Measure,
    omega: Measure,
    radii: Vec<f64>,
}

fn radial_corpus() -> Vec<RadialCase> {
    let mut out = Vec::new();
    for (p, n) in [(2.0, 3), (1.5, 3), (2.5, 3), (3.0, 4)] {
        for eps in [0.01, 0.05] {
            let z = vec![0.0; n];
            for omega in [Measure::dirac(&z, 1.0), Measure::uniform_ball(&z, 0.5, 1.0).unwrap()] {
                out.push(RadialCase { p, n, sigma: eps_ball(n, p, eps, 1.0), omega, radii: geometric(0.05, 4.0, 8) });
            }
        }
    }
    out
}

/// `(u/L, u/U)` at every sample radius of a case.
fn sandwich_ratios(case: &RadialCase) -> Vec<(f64, f64)> {
    let z = vec![0.0; case.n];
    let grid = RadialGrid { r_min: 0.05 * 2f64.powi(-12), r_max: 4.0 * 2f64.powi(10), per_octave: 64 };
    let prob = RadialProblem { p: case.p, n: case.n, kind: ProblemKind::Full, mu: case.sigma.clone(), omega: Some(case.omega.clone()), grid };
    let sol = oracle::gauge_solve(&prob, &IterationSpec::default()).unwrap();
    let opts = BoundOptions::default();
    let sel = InnerSelector::for_p(case.p);
    let br = Branch::for_p(case.p);
    let pts = ray(case.n, &case.radii);
    wolff_core::parallel::map(&pts, |x| {
        let u = sol.eval(dist(x, &z)).unwrap();
        let lo = bounds::closed_form_lower(&case.sigma, &case.omega, x, 1.0, case.p, &Domain::Entire, br, &opts).unwrap().value;
        let hi = bounds::upper_bound_eval(&case.sigma, &case.omega, x, 1.0, case.p, &Domain::Entire, sel, &opts).unwrap().value;
        (u / lo, u / hi)
    })
}

fn c9_bilateral(store: &mut Baselines) -> Verdict {
    let corpus = radial_corpus();
    let ratios: Vec<Vec<(f64, f64)>> = wolff_core::parallel::map(&corpus, sandwich_ratios);
    let mut keys: Vec<(f64, usize)> = corpus.iter().map(|c| (c.p, c.n)).collect();
    keys.dedup();
    let mut fails = 0;
    let mut notes = Vec::new();
    for (p, n) in keys {
        let mine: Vec<&(f64, f64)> =
            corpus.iter().zip(&ratios).filter(|(c, _)| c.p == p && c.n == n).flat_map(|(_, r)| r.iter()).collect();
        // even samples calibrate, all samples validate
        let calib: Vec<&(f64, f64)> = mine.iter().step_by(2).copied().collect();
        let lo = 0.5 * calib.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
        let hi = 2.0 * calib.iter().map(|r| r.1).fold(0.0, f64::max);
        let (c, _) = frozen(store, &format!("bilateral.p{p}_n{n}"), "[c_lower, c_upper]: 0.5·min u/L and 2·max u/U on the even samples", vec![lo, hi]);
        let bad = mine.iter().filter(|r| c[0] > r.0 || r.1 > c[1]).count();
        fails += bad;
        let span_lo = mine.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
        let span_hi = mine.iter().map(|r| r.1).fold(0.0, f64::max);
        notes.push(format!("(p={p},n={n}) c=[{:.3},{:.3}] u/L≥{span_lo:.3} u/U≤{span_hi:.3}", c[0], c[1]));
    }
    verdict(fails == 0, format!("{fails} sandwich violations; {}", notes.join("; ")))
}

fn c10_gauge(store: &mut Baselines) -> Verdict {
    let mut cases = Vec::new();
    for (p, n) in [(2.0, 3), (2.5, 3), (1.5, 3), (3.0, 4)] {
        for (eps, radius) in [(0.01, 1.0), (0.05, 1.0), (0.05, 0.3)] {
            cases.push((p, n, eps_ball(n, p, eps, radius)));
        }
    }
    let q = Quadrature::default();
    let rows: Vec<Vec<(f64, f64)>> = wolff_core::parallel::map(&cases, |(p, n, sigma)| {
        let grid = RadialGrid { r_min: 0.02 * 2f64.powi(-12), r_max: 4.0 * 2f64.powi(10), per_octave: 64 };
        let prob = RadialProblem { p: *p, n: *n, kind: ProblemKind::Gauge, mu: sigma.clone(), omega: None, grid };
        let sol = oracle::gauge_solve(&prob, &IterationSpec::default()).unwrap();
        ray(*n, &geometric(0.02, 4.0, 10))
            .iter()
            .map(|x| (sol.eval(norm(x)).unwrap(), potentials::wolff_p(sigma, x, *p, f64::INFINITY, &q).unwrap().value))
            .collect()
    });
    let all: Vec<(f64, f64)> = rows.iter().flatten().copied().collect();
    let calib: Vec<f64> = all.iter().step_by(2).map(|(u, w)| u.ln() / w).collect();
    let lo = 0.5 * calib.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = 2.0 * calib.iter().copied().fold(0.0, f64::max);
    let (b, _) = frozen(store, "gauge.bracket", "0.5·min and 2·max of log u / W on the even samples", vec![lo, hi]);
    // Lemma direction: u ≥ exp(c W) with the bracket's lower end as c
    let c = b[0];
    let (mut out, mut below_one, mut below_exp) = (0, 0, 0);
    let (mut rmin, mut rmax) = (f64::INFINITY, 0.0f64);
    for (u, w) in &all {
        let ratio = u.ln() / w;
        rmin = rmin.min(ratio);
        rmax = rmax.max(ratio);
        out += usize::from(!(b[0] <= ratio && ratio <= b[1]));
        below_one += usize::from(*u < 1.0);
        below_exp += usize::from(*u < (c * w).exp());
    }
    verdict(
        out + below_one + below_exp == 0,
        format!(
            "log u/W in [{rmin:.4}, {rmax:.4}] vs frozen [{:.4}, {:.4}]; u<1: {below_one}, u<exp(cW): {below_exp} over {} points",
            b[0],
            b[1],
            all.len()
        ),
    )
}

fn c11_sumparts(_: &mut Baselines) -> Verdict {
    let start = Instant::now();
    let mut r = rng(11);
    let (mut pow_bad, mut exp_bad, mut exp_checked) = (0, 0, 0);
    for i in 0..10_000 {
        let len = r.gen_range(1..=60);
        let scale = if i % 3 == 0 { 5.0 } else { 1.0 };
        let lambda: Vec<f64> = (0..len).map(|_| if r.gen_bool(0.1) { 0.0 } else { scale * r.gen_range(0.0..1.0f64) }).collect();
        let m = r.gen_range(1..=8);
        let rep = bounds::sumparts_checks(&lambda, m).unwrap();
        pow_bad += usize::from(!rep.power_holds);
        if let Some(h) = rep.exp_holds {
            exp_checked += 1;
            exp_bad += usize::from(!h);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        pow_bad + exp_bad == 0 && secs < 5.0,
        format!("power form {pow_bad} violations, exp form {exp_bad} in {exp_checked}, {secs:.3} s"),
    )
}

fn c12_classes(store: &mut Baselines) -> Verdict {
    let opts = BoundOptions::default();
    let mut notes = Vec::new();
    let mut pass = true;

    // weak-A∞: ω Lebesgue on a ball much larger than the sample region
    let mut ainf = Vec::new();
    for p in [2.0, 1.5, 2.5] {
        for eps in [0.01, 0.05] {
            ainf.push((p, eps_ball(3, p, eps, 1.0)));
        }
    }
    let leb = Measure::uniform_ball(&[0.0; 3], 4.0, 1.0).unwrap();
    let pts = sample_annulus(&[0.0; 3], 0.05, 1.0, 6, 12);
    let ratios: Vec<Vec<f64>> = wolff_core::parallel::map(&ainf, |(p, sigma)| {
        pts.iter()
            .map(|x| {
                let u = bounds::upper_bound_eval(sigma, &leb, x, 1.0, *p, &Domain::Entire, InnerSelector::for_p(*p), &opts).unwrap().value;
                let (a, _) = bounds::ainf_bilateral(sigma, &leb, x, 1.0, 1.0, *p, &opts).unwrap();
                u / a.value
            })
            .collect()
    });
    let flat: Vec<f64> = ratios.into_iter().flatten().collect();
    let calib: Vec<f64> = flat.iter().step_by(2).copied().collect();
    let (b, _) = frozen(
        store,
        "classes.ainf_bracket",
        "0.5·min and 2·max of upper_bound_eval / simplified form on the even samples",
        vec![0.5 * calib.iter().copied().fold(f64::INFINITY, f64::min), 2.0 * calib.iter().copied().fold(0.0, f64::max)],
    );
    let out = flat.iter().filter(|r| !(b[0] <= **r && **r <= b[1])).count();
    pass &= out == 0;
    let span = (flat.iter().copied().fold(f64::INFINITY, f64::min), flat.iter().copied().fold(0.0, f64::max));
    notes.push(format!("A∞ ratio [{:.4},{:.4}] in [{:.4},{:.4}]", span.0, span.1, b[0], b[1]));

    // L^q: the product bound dominates in a bounded domain
    let dom = Domain::Ball { center: vec![0.0; 3], radius: 2.0 };
    let mut lq = Vec::new();
    for p in [2.0, 1.5, 2.5] {
        let q = 2.0;
        lq.push((p, q, Measure::uniform_ball(&[0.0; 3], 1.0, 1.0).unwrap()));
        lq.push((p, q, power_density_on(3, -1.0, 1.0, 1.0, 4, 20)));
        lq.push((p, 4.0, Measure::uniform_ball(&[0.0; 3], 0.5, 2.0).unwrap()));
    }
    let sigma = eps_ball(3, 2.0, 0.02, 1.0);
    let pts = sample_annulus(&[0.0; 3], 0.05, 1.5, 6, 13);
    let lq_ratios: Vec<Vec<f64>> = wolff_core::parallel::map(&lq, |(p, q, omega)| {
        pts.iter()
            .map(|x| {
                let u = bounds::upper_bound_eval(&sigma, omega, x, 1.0, *p, &dom, InnerSelector::for_p(*p), &opts).unwrap().value;
                let l = bounds::lq_bound(&sigma, omega, x, 1.0, *q, *p, dom.diameter(), &opts).unwrap().value;
                u / l
            })
            .collect()
    });
    let flat: Vec<f64> = lq_ratios.into_iter().flatten().collect();
    let calib_max = flat.iter().step_by(2).copied().fold(0.0, f64::max);
    let (k, _) = frozen(store, "classes.lq_kappa", "2·max upper_bound_eval / lq_bound on the even samples", vec![2.0 * calib_max]);
    let over = flat.iter().filter(|r| **r > k[0]).count();
    pass &= over == 0;
    notes.push(format!("L^q: upper/lq ≤ {:.4} (κ = {:.4}), {over} over", flat.iter().copied().fold(0.0, f64::max), k[0]));

    // Morrey m-fold sums
    let mut drift = 0.0f64;
    let morrey = [
        (2.0, eps_ball(3, 2.0, 0.05, 1.0), Measure::uniform_ball(&[0.0; 3], 1.0, 1.0).unwrap()),
        (2.0, eps_ball(3, 2.0, 0.02, 1.0), power_density_on(3, -1.0, 1.0, 1.0, 4, 20)),
        (1.5, eps_ball(3, 1.5, 0.05, 1.0), Measure::uniform_ball(&[0.0; 3], 0.7, 1.0).unwrap()),
        (2.5, eps_ball(3, 2.5, 0.05, 1.0), power_density_on(3, -0.3, 1.0, 1.0, 4, 20)),
    ];
    let mut worst = String::new();
    for (p, sigma, omega) in &morrey {
        let rep = bounds::mfold_dyadic_sum(sigma, omega, &[0.0; 3], 1.0, 4, *p, 6, 2).unwrap();
        for w in rep.ratios.windows(2) {
            let d = (w[1] - w[0]).abs() / w[0];
            if d > drift {
                drift = d;
                worst = format!("{:?}", rep.ratios.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>());
            }
        }
    }
    pass &= drift < 0.2;
    notes.push(format!("Morrey ratio drift {:.1}% (worst ratios {worst})", 100.0 * drift));
    verdict(pass, notes.join("; "))
}

fn c13_determinism(_: &mut Baselines) -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(
        &config,
        r#"{
  "command": "bilateral",
  "n": 3, "p": 2.0,
  "sigma": {"type": "radial", "center": [0,0,0], "profile": {"kind": "lebesgue", "radius": 1.0, "density": 0.01}},
  "omega": {"type": "dirac", "at": [0,0,0], "mass": 1.0},
  "points": {"random": {"count": 24, "radius": 2.0, "r_min": 0.05}}
}"#,
    )
    .unwrap();
    let run = |out: &str| {
        let st = std::process::Command::new(env!("CARGO_BIN_EXE_wolffpot"))
            .arg("bilateral")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(dir.path().join(out))
            .args(["--seed", "77"])
            .output()
            .unwrap();
        (st.status.code(), std::fs::read(dir.path().join(out).join("bilateral.csv")).unwrap_or_default())
    };
    let (ca, a) = run("a");
    let (cb, b) = run("b");
    verdict(ca == Some(0) && cb == Some(0) && !a.is_empty() && a == b, format!("exit codes {ca:?}/{cb:?}, {} CSV bytes, identical: {}", a.len(), a == b))
}

type Criterion = (u32, &'static str, fn(&mut Baselines) -> Verdict);

const CRITERIA: &[Criterion] = &[
    (1, "dirac_wolff_closed_form", c1_dirac_closed_form),
    (2, "lebesgue_ball_truncated_wolff", c2_lebesgue_center),
    (3, "carleson_embedding", c3_carleson_embedding),
    (4, "duality", c4_duality),
    (5, "tail_scale_invariance", c5_tail_scaling),
    (6, "obstacle_desk_scale", c6_obstacle),
    (7, "branch_coincidence_p2", c7_branch_coincidence),
    (8, "radial_oracle", c8_radial_oracle),
    (9, "bilateral_sandwich", c9_bilateral),
    (10, "gauge_sandwich", c10_gauge),
    (11, "summation_by_parts", c11_sumparts),
    (12, "special_classes", c12_classes),
    (13, "cli_determinism", c13_determinism),
];

#[test]
fn acceptance() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/baselines/acceptance.json");
    let mut store = Baselines::open(&path).expect("baseline store");
    let only: Option<Vec<u32>> =
        std::env::var("WOLFF_ONLY").ok().map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut unexpected = Vec::new();
    let _ = writeln!(std::io::stdout().lock());
    for (id, name, check) in CRITERIA {
        if only.as_ref().is_some_and(|o| !o.contains(id)) {
            continue;
        }
        let start = Instant::now();
        let v = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| check(&mut store)))
            .unwrap_or_else(|e| verdict(false, format!("panicked: {:?}", e.downcast_ref::<String>().map(String::as_str).or(e.downcast_ref::<&str>().copied()))));
        let known = KNOWN_FAILURES.contains(id);
        // straight to stdout so the lines survive test-harness capture
        let _ = writeln!(
            std::io::stdout().lock(),
            "{} {id:>2} {name} [{:.2} s]{}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            if known && !v.pass { " (known)" } else { "" },
            v.detail
        );
        if v.pass == known {
            unexpected.push(*id);
        }
    }
    store.save().expect("saving baselines");
    assert!(unexpected.is_empty(), "criteria with an unexpected outcome: {unexpected:?}");
}
