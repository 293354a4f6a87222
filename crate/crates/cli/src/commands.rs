//! One function per subcommand. Each turns the validated context into rows
//! and a summary; the caller handles baselines and output.

use crate::config::{Command, ConfigError, PointSpec, PotentialKind, RunConfig, Which};
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use wolff_core::bounds::{self, BoundOptions, BoundReport};
use wolff_core::capacity;
use wolff_core::dyadic::{self, CubeTree, DyadicCube};
use wolff_core::geometry::{dist, norm, sample_annulus};
use wolff_core::measures::Measure;
use wolff_core::oracle::{self, BruteForce, ProblemKind, RadialGrid, RadialProblem};
use wolff_core::potentials::{self, Kernel, PotValue};
use wolff_core::{parallel, Error};

/// Flags with this prefix are reported but do not fail the run.
pub const INFO: &str = "info:";

pub fn is_fatal(flag: &str) -> bool {
    !flag.starts_with(INFO)
}

/// Everything a subcommand produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub rows: Vec<BoundReport>,
    pub summary: Map<String, Value>,
    pub flags: Vec<String>,
    /// Scalars compared against a baseline file.
    pub baseline: BTreeMap<String, f64>,
    /// Further CSV files, by name.
    pub extra: Vec<(String, String)>,
}

impl Outcome {
    fn flag(&mut self, f: impl Into<String>) {
        let f = f.into();
        if !self.flags.contains(&f) {
            self.flags.push(f);
        }
    }

    fn put(&mut self, key: &str, v: impl serde::Serialize) {
        self.summary.insert(key.to_string(), serde_json::to_value(v).unwrap_or(Value::Null));
    }
}

/// Why a run stopped before producing output.
#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    /// A numerical failure that leaves nothing to report.
    Divergent(String),
    Io(String),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

/// Maps a library error raised while handling `section`.
fn lib_err(section: &str, e: Error) -> RunError {
    match e {
        Error::Divergent(m) => RunError::Divergent(format!("{section}: {m}")),
        Error::InvalidParameter { name, reason } => RunError::Config(ConfigError::at(format!("{section}.{name}"), reason)),
        other => RunError::Config(ConfigError::at(section, other)),
    }
}

pub struct Context {
    pub command: Command,
    pub cfg: RunConfig,
    pub n: usize,
    pub p: f64,
    pub sigma: Measure,
    pub omega: Measure,
    pub points: Vec<Vec<f64>>,
    pub opts: BoundOptions,
    pub refine: usize,
    pub seed: u64,
}

fn build_measure(spec: &Option<wolff_core::measures::spec::MeasureSpec>, n: usize, path: &str) -> Result<Measure, RunError> {
    let m = match spec {
        None => Measure::zero(n),
        Some(s) => s.build().map_err(|e| lib_err(path, e))?,
    };
    if m.dim() != n {
        return Err(ConfigError::at(path, format!("dimension {} does not match n = {n}", m.dim())).into());
    }
    Ok(m)
}

fn unit(v: &[f64]) -> Option<Vec<f64>> {
    let l = norm(v);
    (l > 0.0 && l.is_finite()).then(|| v.iter().map(|a| a / l).collect())
}

fn build_points(spec: &PointSpec, n: usize, seed: Option<u64>) -> Result<Vec<Vec<f64>>, RunError> {
    let center = |c: &Option<Vec<f64>>, path: &str| -> Result<Vec<f64>, RunError> {
        let c = c.clone().unwrap_or_else(|| vec![0.0; n]);
        if c.len() != n {
            return Err(ConfigError::at(path, format!("expected {n} coordinates")).into());
        }
        Ok(c)
    };
    match spec {
        PointSpec::List(v) => {
            for (i, x) in v.iter().enumerate() {
                if x.len() != n || x.iter().any(|a| !a.is_finite()) {
                    return Err(ConfigError::at(format!("points.list[{i}]"), format!("expected {n} finite coordinates")).into());
                }
            }
            Ok(v.clone())
        }
        PointSpec::Random { count, center: c, radius, r_min } => {
            let seed = seed.ok_or_else(|| ConfigError::at("seed", "random points need a seed (config `seed` or --seed)"))?;
            let c = center(c, "points.random.center")?;
            if !(*r_min >= 0.0 && radius > r_min && radius.is_finite()) {
                return Err(ConfigError::at("points.random.radius", "need 0 <= r_min < radius < ∞").into());
            }
            Ok(sample_annulus(&c, *r_min, *radius, *count, seed))
        }
        PointSpec::Ray { center: c, direction, r_min, r_max, count } => {
            let c = center(c, "points.ray.center")?;
            if direction.len() != n {
                return Err(ConfigError::at("points.ray.direction", format!("expected {n} coordinates")).into());
            }
            let d = unit(direction).ok_or_else(|| ConfigError::at("points.ray.direction", "must be a nonzero vector"))?;
            if !(*r_min > 0.0 && r_max >= r_min && r_max.is_finite()) || *count == 0 {
                return Err(ConfigError::at("points.ray.r_min", "need 0 < r_min <= r_max < ∞ and count >= 1").into());
            }
            let step = if *count > 1 { (r_max / r_min).ln() / (*count - 1) as f64 } else { 0.0 };
            Ok((0..*count)
                .map(|i| {
                    let r = r_min * (i as f64 * step).exp();
                    c.iter().zip(&d).map(|(a, b)| a + r * b).collect()
                })
                .collect())
        }
    }
}

impl Context {
    pub fn new(command: Command, cfg: RunConfig, seed: Option<u64>, refine: usize) -> Result<Self, RunError> {
        let n = cfg.n;
        if n < 2 {
            return Err(ConfigError::at("n", "dimension must be at least 2").into());
        }
        if !(cfg.p > 1.0 && cfg.p < n as f64) {
            return Err(ConfigError::at("p", format!("need 1 < p < n = {n}, got {}", cfg.p)).into());
        }
        if refine == 0 {
            return Err(ConfigError::at("refine", "factor must be at least 1").into());
        }
        if !(cfg.baseline_tolerance >= 0.0) {
            return Err(ConfigError::at("baseline_tolerance", "must be nonnegative").into());
        }
        let sigma = build_measure(&cfg.sigma, n, "sigma")?;
        let omega = build_measure(&cfg.omega, n, "omega")?;
        let seed = seed.or(cfg.seed);
        let points = build_points(&cfg.points, n, seed)?;
        cfg.options.validate().map_err(|e| lib_err("options", e))?;
        cfg.bound.validate(cfg.p, n).map_err(|e| lib_err("bound", e))?;
        let opts = cfg.options.refined(refine);
        Ok(Context { command, p: cfg.p, n, sigma, omega, points, opts, refine, seed: seed.unwrap_or(0), cfg })
    }
}

/// Runs `f` at every point in parallel; divergence becomes a row flag and
/// any other failure aborts the command.
fn per_point<F>(ctx: &Context, section: &str, f: F) -> Result<Vec<BoundReport>, RunError>
where
    F: Fn(&[f64], &mut BoundReport) -> wolff_core::Result<()> + Sync + Send,
{
    let rows: Vec<(BoundReport, Option<Error>)> = parallel::map(&ctx.points, |x| {
        let mut rep = BoundReport::at(x);
        match f(x, &mut rep) {
            Ok(()) => (rep, None),
            Err(Error::Divergent(m)) => {
                rep.flag("divergent");
                rep.constants.clear();
                let _ = m;
                (rep, None)
            }
            Err(e) => (rep, Some(e)),
        }
    });
    let mut out = Vec::with_capacity(rows.len());
    for (rep, err) in rows {
        if let Some(e) = err {
            return Err(lib_err(section, e));
        }
        out.push(rep);
    }
    Ok(out)
}

/// Records a potential value and its flags; returns the value.
fn take(rep: &mut BoundReport, v: PotValue) -> f64 {
    if v.divergent {
        rep.flag("divergent");
    }
    if v.value.is_infinite() {
        rep.flag("info:infinite");
    }
    v.value
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Single-location atoms: `(location, total mass)`.
fn single_atom(mu: &Measure) -> Option<(Vec<f64>, f64)> {
    if !mu.is_atomic() || mu.is_zero() {
        return None;
    }
    mu.radial_center().map(|c| (c, mu.total_mass()))
}

fn kernel_of(kind: PotentialKind, n: usize, p: f64) -> wolff_core::Result<Kernel> {
    match kind {
        PotentialKind::Riesz { alpha } => Kernel::riesz(n, alpha),
        PotentialKind::Wolff { beta, s } => Kernel::wolff(n, beta, s),
        PotentialKind::WolffP => Kernel::wolff_p(n, p),
        PotentialKind::RieszP => Kernel::riesz_p(n, p),
    }
}

pub fn run(ctx: &Context) -> Result<Outcome, RunError> {
    match ctx.command {
        Command::Potential => potential(ctx),
        Command::Capacity => capacity_cmd(ctx),
        Command::Carleson => carleson(ctx),
        Command::Supersolution => supersolution(ctx),
        Command::Lowerbound => lowerbound(ctx),
        Command::Bilateral => bilateral(ctx),
        Command::Gauge => gauge(ctx),
        Command::Hessian => hessian(ctx),
    }
}

fn potential(ctx: &Context) -> Result<Outcome, RunError> {
    let sec = &ctx.cfg.potential;
    let mu = match sec.measure {
        Which::Sigma => &ctx.sigma,
        Which::Omega => &ctx.omega,
    };
    let kernel = kernel_of(sec.kind, ctx.n, ctx.p).map_err(|e| lib_err("potential.kind", e))?;
    let r = sec.r_trunc.unwrap_or(f64::INFINITY);
    if !(r > 0.0) {
        return Err(ConfigError::at("potential.r_trunc", "must be positive").into());
    }
    if sec.brute_force && sec.brute_per_octave < oracle::BRUTE_MIN_PER_OCTAVE {
        return Err(ConfigError::at("potential.brute_per_octave", format!("need at least {}", oracle::BRUTE_MIN_PER_OCTAVE)).into());
    }
    if let Some(lv) = &sec.local_v {
        if lv.center.len() != ctx.n || !(lv.radius > 0.0) {
            return Err(ConfigError::at("potential.local_v", "need an n-dimensional center and a positive radius").into());
        }
    }
    let closed = single_atom(mu);
    let bf = BruteForce { kernel, r_trunc: r, per_octave: sec.brute_per_octave * ctx.refine };
    let rows = per_point(ctx, "potential", |x, rep| {
        let v = potentials::kernel_potential(mu, x, &kernel, r, &ctx.opts.quad)?;
        let err = v.err;
        let val = take(rep, v);
        rep.v = Some(val);
        if sec.brute_force {
            let (lo, hi) = oracle::brute_force_potential(mu, x, &bf)?;
            rep.lower = Some(lo);
            rep.upper = Some(hi);
            let slack = err + 1e-12 * val.abs();
            if !(val.is_infinite() && hi.is_infinite()) && (val < lo - slack || val > hi + slack) {
                rep.flag("outside_bracket");
            }
        }
        if let Some((z, m)) = &closed {
            let d = dist(x, z);
            let exact = if d == 0.0 { f64::INFINITY } else { kernel.constant_mass_integral(*m, d, r) };
            rep.oracle = Some(exact);
            if !rel_close(val, exact, 1e-6) {
                rep.flag("oracle_mismatch");
            }
        } else if kernel.q == 1.0 && mu.is_atomic() && !mu.is_zero() {
            // Riesz potentials are linear: sum the atoms
            let exact: f64 = mu
                .nodes(1)?
                .iter()
                .map(|(z, m)| {
                    let d = dist(x, z);
                    if d == 0.0 {
                        f64::INFINITY
                    } else {
                        kernel.constant_mass_integral(*m, d, r)
                    }
                })
                .sum();
            rep.oracle = Some(exact);
            if !rel_close(val, exact, 1e-6) {
                rep.flag("oracle_mismatch");
            }
        }
        if let Some(lv) = &sec.local_v {
            let branch = lv.branch.unwrap_or(potentials::Branch::for_p(ctx.p));
            let v = potentials::local_v(&ctx.sigma, &lv.center, lv.radius, x, ctx.p, branch, &ctx.opts.dyadic)?;
            rep.constants.insert("local_v".into(), v.value);
        }
        Ok(())
    })?;
    let mut out = Outcome { rows, ..Default::default() };
    out.put("kernel", json!({"a": kernel.a, "q": kernel.q}));
    out.put("r_trunc", if r.is_finite() { json!(r) } else { Value::Null });
    Ok(out)
}

fn capacity_cmd(ctx: &Context) -> Result<Outcome, RunError> {
    let sec = &ctx.cfg.capacity;
    let mut out = Outcome::default();
    let rep = capacity::ball_condition_constant(&ctx.sigma, ctx.p, &sec.sampling).map_err(|e| lib_err("capacity.sampling", e))?;
    let rep = rep.with_threshold(sec.threshold);
    if rep.divergent {
        out.flag("ball_condition_divergent");
    }
    if rep.pass == Some(false) {
        out.flag("ball_condition_exceeds_threshold");
    }
    let global = rep.constant;
    out.baseline.insert("ball_constant".into(), global);
    out.put("ball_condition", &rep);
    if sec.multiplier {
        let tents = capacity::default_tents(&ctx.sigma, -6, 4, 8).map_err(|e| lib_err("capacity", e))?;
        let m = capacity::multiplier_check(&ctx.sigma, ctx.p, &tents).map_err(|e| lib_err("capacity", e))?;
        out.put("multiplier", &m);
    }
    if let Some(a) = &sec.weak_ainf {
        let mut sampling = a.sampling.clone();
        if sampling.seed == 0 {
            sampling.seed = ctx.seed;
        }
        let r = capacity::weak_ainf_check(&ctx.omega, &a.params, a.trials, &sampling).map_err(|e| lib_err("capacity.weak_ainf", e))?;
        if !r.pass {
            out.flag("weak_ainf_fails");
        }
        out.put("weak_ainf", &r);
    }
    if let Some(eps) = sec.morrey_eps {
        let r = bounds::morrey_check(&ctx.omega, eps, ctx.p, &sec.sampling).map_err(|e| lib_err("capacity.morrey_eps", e))?;
        if r.divergent {
            out.flag("morrey_divergent");
        }
        out.put("morrey", &r);
    }
    let e = ctx.n as f64 - ctx.p;
    out.rows = per_point(ctx, "capacity", |x, row| {
        let local = capacity::BallSampling { centers: Some(vec![x.to_vec()]), ..sec.sampling.clone() };
        let r = capacity::ball_ratio_sup(&ctx.sigma, e, &local)?;
        row.v = Some(r.constant);
        row.upper = Some(global);
        if r.divergent {
            row.flag("divergent");
        }
        Ok(())
    })?;
    Ok(out)
}

fn carleson(ctx: &Context) -> Result<Outcome, RunError> {
    let sec = &ctx.cfg.carleson;
    let mut out = Outcome::default();
    if ctx.sigma.is_zero() {
        return Err(ConfigError::at("sigma", "the Carleson checks need a nonzero σ").into());
    }
    let rep = dyadic::carleson_condition_constant(&ctx.sigma, ctx.p, sec.max_level, sec.depth).map_err(|e| lib_err("carleson", e))?;
    if rep.divergent {
        out.flag("carleson_condition_divergent");
    }
    out.baseline.insert("carleson_constant".into(), rep.constant);
    out.put("condition", &rep);
    let mut emb = Vec::new();
    for (i, &s) in sec.s_values.iter().enumerate() {
        let f = |z: &[f64]| 1.0 + norm(z);
        let e = dyadic::carleson_embedding_check(&ctx.sigma, &f, s, ctx.p, rep.constant, sec.max_level, sec.depth)
            .map_err(|e| lib_err(&format!("carleson.s_values[{i}]"), e))?;
        if !e.pass {
            out.flag(format!("embedding_violation_s{s}"));
        }
        emb.push(json!({"s": s, "lhs": e.lhs, "rhs": e.rhs, "pass": e.pass}));
    }
    out.put("embedding", emb);
    if let Some(d) = &sec.duality {
        let tree = CubeTree::build(&ctx.sigma, std::slice::from_ref(&rep.witness), sec.depth).map_err(|e| lib_err("carleson.duality", e))?;
        let lambda: BTreeMap<DyadicCube, f64> = tree.sorted().into_iter().filter(|(_, m)| *m > 0.0).map(|(q, _)| (q.clone(), q.side())).collect();
        let r = dyadic::duality_check(&ctx.sigma, &rep.witness, &lambda, d.s, d.trials, ctx.seed).map_err(|e| lib_err("carleson.duality", e))?;
        if r.admissibility > 1.0 + 1e-12 {
            out.flag("duality_inadmissible");
        }
        if r.identity_gap > 1e-10 * r.lhs.max(1e-300) {
            out.flag("duality_identity_gap");
        }
        out.put("duality", &r);
    }
    let c = rep.constant;
    out.rows = per_point(ctx, "carleson", |x, row| {
        let q = DyadicCube::containing(x, sec.max_level);
        let t = dyadic::carleson_sum(&ctx.sigma, &q, ctx.p, sec.depth)?;
        let m = dyadic::cube_mass(&ctx.sigma, &q, None)?;
        row.v = Some(t.value);
        row.upper = Some(c * m.value);
        row.constants.insert("last_increment".into(), t.last_increment);
        Ok(())
    })?;
    Ok(out)
}

fn supersolution(ctx: &Context) -> Result<Outcome, RunError> {
    let sec = &ctx.cfg.supersolution;
    let (beta, p) = (ctx.cfg.bound.beta, ctx.p);
    let mut out = Outcome::default();
    let obs = match bounds::obstacle_check(&ctx.sigma, &ctx.omega, beta, p, &ctx.points, &ctx.opts) {
        Ok(r) => r,
        Err(Error::Divergent(m)) => {
            out.flag("obstacle_divergent");
            out.put("obstacle_error", m);
            return Ok(out);
        }
        Err(e) => return Err(lib_err("supersolution", e)),
    };
    if obs.hard_failure {
        out.flag("obstacle_violation");
    }
    if obs.divergent {
        out.flag("obstacle_divergent");
    }
    if obs.degenerate {
        out.flag("info:degenerate");
    }
    for pt in &obs.points {
        let mut row = BoundReport::at(&pt.x);
        row.lower = Some(pt.wolff);
        row.v = Some(pt.v);
        row.constants.insert("t".into(), pt.t);
        row.constants.insert("ratio".into(), pt.ratio);
        if pt.v < pt.wolff {
            row.flag("below_obstacle");
        }
        out.rows.push(row);
    }
    out.put("c_star", obs.c_star);
    out.put("dominates", obs.dominates);
    if obs.c_star.is_finite() {
        out.baseline.insert("c_star".into(), obs.c_star);
    } else {
        out.flag("c_star_infinite");
    }
    if sec.refinement_check && !ctx.points.is_empty() {
        let fine = bounds::obstacle_check(&ctx.sigma, &ctx.omega, beta, p, &ctx.points, &ctx.opts.refined(2))
            .map_err(|e| lib_err("supersolution", e))?;
        let drift = wolff_core::baseline::relative_drift(obs.c_star, fine.c_star);
        out.put("c_star_refined", fine.c_star);
        out.put("c_star_refinement_drift", drift);
        if !(drift < sec.max_refinement_drift) {
            out.flag("c_star_refinement_drift");
        }
    }
    if let Some(t) = &sec.tail {
        if t.x0.len() != ctx.n {
            return Err(ConfigError::at("supersolution.tail.x0", format!("expected {} coordinates", ctx.n)).into());
        }
        let r = bounds::tail_finiteness(&ctx.sigma, &ctx.omega, &t.x0, t.radius, t.c, p, &ctx.opts)
            .map_err(|e| lib_err("supersolution.tail", e))?;
        if !r.finite {
            out.flag("tail_infinite");
        }
        out.put("tail", &r);
    }
    Ok(out)
}

fn lowerbound(ctx: &Context) -> Result<Outcome, RunError> {
    let sec = &ctx.cfg.lowerbound;
    let b = &ctx.cfg.bound;
    let (st, wt) = match &sec.localize {
        Some(l) => {
            if l.x0.len() != ctx.n {
                return Err(ConfigError::at("lowerbound.localize.x0", format!("expected {} coordinates", ctx.n)).into());
            }
            bounds::localize(&ctx.sigma, &ctx.omega, &l.x0, l.radius).map_err(|e| lib_err("lowerbound.localize", e))?
        }
        None => (ctx.sigma.clone(), ctx.omega.clone()),
    };
    let branch = b.branch_for(ctx.p);
    let rows = per_point(ctx, "lowerbound", |x, row| {
        let lo = bounds::closed_form_lower(&ctx.sigma, &ctx.omega, x, b.c, ctx.p, &b.domain, branch, &ctx.opts)?;
        row.lower = Some(take(row, lo));
        let ns = bounds::neumann_series_lower(&st, &wt, x, ctx.p, &sec.neumann, &ctx.opts)?;
        row.v = Some(ns.value);
        row.constants.insert("last_increment".into(), ns.last_increment);
        for (j, s) in ns.partial_sums.iter().enumerate() {
            row.constants.insert(format!("partial_{j}"), *s);
        }
        if ns.divergent {
            // divergence of the series is an outcome, not an error
            row.flag("info:neumann_divergent");
        }
        Ok(())
    })?;
    let mut out = Outcome { rows, ..Default::default() };
    out.put("neumann", &sec.neumann);
    Ok(out)
}

/// Common center of two radial measures (zero measures are ignored);
/// `None` when there is none.
fn shared_center(a: &Measure, b: &Measure) -> Option<Vec<f64>> {
    let ca = if a.is_zero() { None } else { Some(a.radial_center()?) };
    let cb = if b.is_zero() { None } else { Some(b.radial_center()?) };
    match (ca, cb) {
        (Some(x), Some(y)) => (dist(&x, &y) <= 1e-14).then_some(x),
        (Some(x), None) | (None, Some(x)) => Some(x),
        (None, None) => None,
    }
}

/// Grid covering both measures and every evaluation radius.
fn oracle_grid(measures: &[&Measure], c: &[f64], radii: &[f64], per_octave: usize) -> RadialGrid {
    let s = measures
        .iter()
        .filter(|m| !m.is_zero())
        .map(|m| m.support_radius_from(c))
        .filter(|r| *r > 0.0 && r.is_finite())
        .fold(0.0, f64::max);
    let s = if s > 0.0 { s } else { 1.0 };
    let near = radii.iter().copied().filter(|r| *r > 0.0).fold(f64::INFINITY, f64::min);
    let far = radii.iter().copied().fold(0.0, f64::max);
    RadialGrid { r_min: (s * 2f64.powi(-12)).min(near / 2.0), r_max: (s * 2f64.powi(10)).max(2.0 * far), per_octave }
}

fn bilateral(ctx: &Context) -> Result<Outcome, RunError> {
    let sec = &ctx.cfg.bilateral;
    let b = &ctx.cfg.bound;
    if !(sec.c_lower > 0.0 && sec.c_upper > 0.0) {
        return Err(ConfigError::at("bilateral.c_lower", "calibration constants must be positive").into());
    }
    if sec.oracle_per_octave == 0 {
        return Err(ConfigError::at("bilateral.oracle_per_octave", "must be positive").into());
    }
    let mut out = Outcome::default();
    let solution = match shared_center(&ctx.sigma, &ctx.omega) {
        Some(c) if sec.oracle_per_octave > 0 => {
            let radii: Vec<f64> = ctx.points.iter().map(|x| dist(x, &c)).collect();
            let grid = oracle_grid(&[&ctx.sigma, &ctx.omega], &c, &radii, sec.oracle_per_octave * ctx.refine);
            let prob = RadialProblem { p: ctx.p, n: ctx.n, kind: ProblemKind::Full, mu: ctx.sigma.clone(), omega: Some(ctx.omega.clone()), grid };
            match oracle::gauge_solve(&prob, &sec.iteration) {
                Ok(s) => {
                    if !s.converged {
                        out.flag("oracle_unconverged");
                    }
                    if s.monotonicity_violations > 0 {
                        out.flag("oracle_not_monotone");
                    }
                    out.put("oracle_iterations", s.iterations);
                    Some((c, s))
                }
                Err(Error::Divergent(m)) => {
                    out.flag("oracle_divergent");
                    out.put("oracle_error", m);
                    None
                }
                Err(e) => return Err(lib_err("bilateral", e)),
            }
        }
        _ => {
            out.flag("info:no_radial_oracle");
            None
        }
    };
    let (branch, selector) = (b.branch_for(ctx.p), b.selector_for(ctx.p));
    out.rows = per_point(ctx, "bilateral", |x, row| {
        let lo = bounds::closed_form_lower(&ctx.sigma, &ctx.omega, x, b.c, ctx.p, &b.domain, branch, &ctx.opts)?;
        let hi = bounds::upper_bound_eval(&ctx.sigma, &ctx.omega, x, b.c, ctx.p, &b.domain, selector, &ctx.opts)?;
        let v = bounds::supersolution_v(&ctx.sigma, &ctx.omega, x, b.beta, ctx.p, branch, &ctx.opts)?;
        let lo = sec.c_lower * take(row, lo);
        let hi = sec.c_upper * take(row, hi);
        row.lower = Some(lo);
        row.upper = Some(hi);
        row.v = Some(take(row, v));
        if let Some((c, s)) = &solution {
            let r = dist(x, c);
            let u = if r == 0.0 { None } else { s.eval(r) };
            row.oracle = u;
            if let Some(u) = u {
                if lo > 0.0 {
                    row.constants.insert("oracle_over_lower".into(), u / lo);
                }
                if hi > 0.0 && hi.is_finite() {
                    row.constants.insert("oracle_over_upper".into(), u / hi);
                }
                if sec.assert_sandwich {
                    if u < lo {
                        row.flag("below_lower");
                    }
                    if u > hi {
                        row.flag("above_upper");
                    }
                }
            }
        }
        Ok(())
    })?;
    let ratio = |key: &str, pick: fn(f64, f64) -> f64, init: f64| {
        out.rows.iter().filter_map(|r| r.constants.get(key).copied()).fold(init, pick)
    };
    let lo_min = ratio("oracle_over_lower", f64::min, f64::INFINITY);
    let hi_max = ratio("oracle_over_upper", f64::max, 0.0);
    if lo_min.is_finite() {
        out.put("min_oracle_over_lower", lo_min);
        out.put("max_oracle_over_upper", hi_max);
    }
    out.put("c_lower", sec.c_lower);
    out.put("c_upper", sec.c_upper);
    Ok(out)
}

fn gauge(ctx: &Context) -> Result<Outcome, RunError> {
    let sec = &ctx.cfg.gauge;
    let b = &ctx.cfg.bound;
    if sec.per_octave == 0 {
        return Err(ConfigError::at("gauge.per_octave", "must be positive").into());
    }
    if let Some([lo, hi]) = sec.bracket {
        if !(lo > 0.0 && hi >= lo) {
            return Err(ConfigError::at("gauge.bracket", "need 0 < lo <= hi").into());
        }
    }
    let mut out = Outcome::default();
    let c = if ctx.sigma.is_zero() {
        vec![0.0; ctx.n]
    } else {
        ctx.sigma.radial_center().ok_or_else(|| ConfigError::at("sigma", "the gauge oracle needs a radial σ"))?
    };
    let radii: Vec<f64> = ctx.points.iter().map(|x| dist(x, &c)).collect();
    let grid = oracle_grid(&[&ctx.sigma], &c, &radii, sec.per_octave * ctx.refine);
    let prob = RadialProblem { p: ctx.p, n: ctx.n, kind: ProblemKind::Gauge, mu: ctx.sigma.clone(), omega: None, grid };
    let sol = match oracle::gauge_solve(&prob, &sec.iteration) {
        Ok(s) => s,
        Err(Error::Divergent(m)) => {
            out.flag("gauge_divergent");
            out.put("gauge_error", m);
            return Ok(out);
        }
        Err(e) => return Err(lib_err("gauge", e)),
    };
    if !sol.converged {
        out.flag("gauge_unconverged");
    }
    if sol.monotonicity_violations > 0 {
        out.flag("gauge_not_monotone");
    }
    let residual = oracle::riccati_residual(&sol, &ctx.sigma, ctx.p, ctx.n).map_err(|e| lib_err("gauge", e))?;
    out.put("iterations", sol.iterations);
    out.put("riccati_residual", residual);
    out.extra.push(("radial.csv".into(), radial_csv(&sol, residual)));
    if let Some(beta) = sec.beta {
        let r = bounds::gauge_supersolution_check(&ctx.sigma, beta, ctx.p, &ctx.points, &ctx.opts).map_err(|e| lib_err("gauge.beta", e))?;
        if r.divergent {
            out.flag("gauge_supersolution_divergent");
        }
        out.put("supersolution_c_star", r.c_star);
    }
    out.rows = per_point(ctx, "gauge", |x, row| {
        let r = dist(x, &c);
        let gb = bounds::gauge_bounds(&ctx.sigma, x, sec.c, ctx.p, &b.domain, &ctx.opts)?;
        if gb.divergent {
            row.flag("divergent");
        }
        row.lower = Some(gb.lower);
        row.upper = Some(gb.upper);
        let w = potentials::wolff_p(&ctx.sigma, x, ctx.p, f64::INFINITY, &ctx.opts.quad)?;
        let w = take(row, w);
        let Some(u) = (if r == 0.0 { Some(sol.u[0]) } else { sol.eval(r) }) else {
            row.flag("outside_oracle_grid");
            return Ok(());
        };
        row.oracle = Some(u);
        if u < 1.0 {
            row.flag("u_below_one");
        }
        if sec.assert_bounds && (u < gb.lower || u > gb.upper) {
            row.flag("outside_gauge_bounds");
        }
        let (ratio, degenerate) = bounds::ratio_or_zero(u.ln(), w);
        row.v = Some(ratio);
        if degenerate {
            row.flag("info:degenerate");
        } else if let Some([lo, hi]) = sec.bracket {
            if ratio < lo || ratio > hi {
                row.flag("ratio_outside_bracket");
            }
        }
        Ok(())
    })?;
    let vals: Vec<f64> = out.rows.iter().filter(|r| !r.flags.iter().any(|f| f == "info:degenerate")).filter_map(|r| r.v).collect();
    if !vals.is_empty() {
        out.put("min_ratio", vals.iter().copied().fold(f64::INFINITY, f64::min));
        out.put("max_ratio", vals.iter().copied().fold(0.0, f64::max));
    }
    Ok(out)
}

fn radial_csv(sol: &oracle::RadialSolution, residual: f64) -> String {
    let mut s = String::from("r,u,du,residual\n");
    for i in 0..sol.r.len() {
        s.push_str(&format!("{},{},{},{}\n", sol.r[i], sol.u[i], sol.du[i], residual));
    }
    s
}

fn hessian(ctx: &Context) -> Result<Outcome, RunError> {
    let sec = &ctx.cfg.hessian;
    let hp = bounds::hessian_params(sec.k, ctx.n).map_err(|e| lib_err("hessian", e))?;
    if !(sec.c > 0.0) {
        return Err(ConfigError::at("hessian.c", "must be positive").into());
    }
    let closed = if ctx.sigma.is_zero() { single_atom(&ctx.omega) } else { None };
    let w = hp.wolff_kernel(ctx.n).map_err(|e| lib_err("hessian", e))?;
    let rows = per_point(ctx, "hessian", |x, row| {
        let lo = bounds::hessian_lower(&ctx.sigma, &ctx.omega, x, sec.c, sec.k, &ctx.opts)?;
        let hi = bounds::hessian_upper(&ctx.sigma, &ctx.omega, x, sec.c, sec.k, sec.exponent, &ctx.opts)?;
        let lo = take(row, lo);
        row.lower = Some(lo);
        row.upper = Some(take(row, hi));
        if let Some((z, m)) = &closed {
            let d = dist(x, z);
            let exact = if d == 0.0 { f64::INFINITY } else { w.constant_mass_integral(*m, d, f64::INFINITY) };
            row.oracle = Some(exact);
            if !rel_close(lo, exact, 1e-6) {
                row.flag("oracle_mismatch");
            }
        }
        Ok(())
    })?;
    let mut out = Outcome { rows, ..Default::default() };
    out.put("params", hp);
    out.put("exponent", sec.exponent);
    Ok(out)
}
