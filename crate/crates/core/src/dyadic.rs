//! Dyadic cubes, the discrete Carleson condition and embedding, shifted
//! lattices, mixed norms and the discrete Littlewood-Paley duality.
//!
//! A cube of level `k` with corner `m ∈ Z^n` is `Π [2^k m_i, 2^k (m_i + 1))`.
//! Truncated sums run over a finite [`CubeTree`] holding only cubes with
//! positive mass, so atoms of any depth cost one cube per level.

use crate::error::{check_dim, check_p, invalid, Error, Result};
use crate::measures::Measure;
use crate::parallel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    pub level: i32,
    pub corner: Vec<i64>,
}

impl DyadicCube {
    pub fn new(level: i32, corner: Vec<i64>) -> Self {
        DyadicCube { level, corner }
    }

    pub fn dim(&self) -> usize {
        self.corner.len()
    }

    pub fn side(&self) -> f64 {
        2f64.powi(self.level)
    }

    pub fn lo(&self) -> Vec<f64> {
        let s = self.side();
        self.corner.iter().map(|&m| m as f64 * s).collect()
    }

    pub fn hi(&self) -> Vec<f64> {
        let s = self.side();
        self.corner.iter().map(|&m| (m + 1) as f64 * s).collect()
    }

    pub fn volume(&self) -> f64 {
        self.side().powi(self.dim() as i32)
    }

    /// The unique cube of `level` whose half-open box contains `x`.
    pub fn containing(x: &[f64], level: i32) -> Self {
        let s = 2f64.powi(level);
        DyadicCube { level, corner: x.iter().map(|&c| (c / s).floor() as i64).collect() }
    }

    pub fn parent(&self) -> Self {
        DyadicCube { level: self.level + 1, corner: self.corner.iter().map(|m| m.div_euclid(2)).collect() }
    }

    pub fn ancestor(&self, level: i32) -> Self {
        assert!(level >= self.level);
        let shift = (level - self.level) as u32;
        let f = 1i64 << shift.min(62);
        DyadicCube { level, corner: self.corner.iter().map(|m| m.div_euclid(f)).collect() }
    }

    pub fn children(&self) -> Vec<Self> {
        let n = self.dim();
        (0..1usize << n)
            .map(|bits| DyadicCube {
                level: self.level - 1,
                corner: (0..n).map(|i| 2 * self.corner[i] + ((bits >> i) & 1) as i64).collect(),
            })
            .collect()
    }

    /// `other ⊆ self`.
    pub fn contains(&self, other: &DyadicCube) -> bool {
        other.level <= self.level && other.ancestor(self.level) == *self
    }

    pub fn intersects(&self, other: &DyadicCube) -> bool {
        self.contains(other) || other.contains(self)
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        DyadicCube::containing(x, self.level) == *self
    }
}

/// `c_Q = ℓ(Q)^{(p-n)/(p-1)}`.
pub fn coefficient_cq(side: f64, p: f64, n: usize) -> Result<f64> {
    check_p(p, n)?;
    Ok(side.powf((p - n as f64) / (p - 1.0)))
}

/// `|Q + t|_μ`.
pub fn cube_mass(mu: &Measure, q: &DyadicCube, shift: Option<&[f64]>) -> Result<crate::Mass> {
    check_dim(mu.dim(), q.dim())?;
    let (mut lo, mut hi) = (q.lo(), q.hi());
    if let Some(t) = shift {
        check_dim(q.dim(), t.len())?;
        for i in 0..lo.len() {
            lo[i] += t[i];
            hi[i] += t[i];
        }
    }
    mu.box_mass(&lo, &hi)
}

pub(crate) const MAX_TREE: usize = 1 << 22;

/// Cubes with positive mass between a set of root cubes and `depth`
/// levels below them.
#[derive(Debug, Clone)]
pub struct CubeTree {
    pub dim: usize,
    pub top_level: i32,
    pub min_level: i32,
    pub masses: HashMap<DyadicCube, f64>,
}

impl CubeTree {
    pub fn build(mu: &Measure, roots: &[DyadicCube], depth: u32) -> Result<Self> {
        let n = mu.dim();
        let top_level = roots.first().map(|r| r.level).ok_or_else(|| invalid("roots", "need at least one root cube"))?;
        if roots.iter().any(|r| r.level != top_level || r.dim() != n) {
            return Err(invalid("roots", "root cubes must share level and dimension"));
        }
        let min_level = top_level - depth as i32;
        let mut masses = HashMap::new();
        if mu.is_atomic() {
            for (z, m) in mu.nodes(1)? {
                let leaf = DyadicCube::containing(&z, min_level);
                if !roots.iter().any(|r| r.contains(&leaf)) {
                    continue;
                }
                for level in min_level..=top_level {
                    *masses.entry(leaf.ancestor(level)).or_insert(0.0) += m;
                }
                if masses.len() > MAX_TREE {
                    return Err(Error::TreeTooLarge(masses.len()));
                }
            }
        } else {
            let per_root = 1usize.checked_shl(n as u32 * depth).unwrap_or(usize::MAX);
            let total = per_root.saturating_mul(roots.len());
            if total > MAX_TREE {
                return Err(Error::TreeTooLarge(total));
            }
            let mut leaves = Vec::with_capacity(total);
            let f = 1i64 << depth;
            for r in roots {
                for idx in 0..per_root {
                    let mut rem = idx;
                    let corner = (0..n)
                        .map(|i| {
                            let off = (rem % f as usize) as i64;
                            rem /= f as usize;
                            r.corner[i] * f + off
                        })
                        .collect();
                    leaves.push(DyadicCube::new(min_level, corner));
                }
            }
            let leaf_mass = parallel::map(&leaves, |q| cube_mass(mu, q, None).map(|m| m.value));
            for (q, m) in leaves.into_iter().zip(leaf_mass) {
                let m = m?;
                if m > 0.0 {
                    for level in min_level..=top_level {
                        *masses.entry(q.ancestor(level)).or_insert(0.0) += m;
                    }
                }
            }
        }
        Ok(CubeTree { dim: n, top_level, min_level, masses })
    }

    /// Tree on all cubes of `top_level` meeting the support of `mu`.
    pub fn covering(mu: &Measure, top_level: i32, depth: u32) -> Result<Self> {
        if mu.is_zero() {
            return Err(Error::EmptyMeasure);
        }
        let (lo, hi) = mu
            .bounding_box()
            .ok_or_else(|| Error::Unsupported("dyadic trees need a measure with bounded support".into()))?;
        let a = DyadicCube::containing(&lo, top_level);
        let b = DyadicCube::containing(&hi, top_level);
        let n = mu.dim();
        let spans: Vec<i64> = (0..n).map(|i| b.corner[i] - a.corner[i] + 1).collect();
        let count: i64 = spans.iter().product();
        if count as usize > MAX_TREE {
            return Err(Error::TreeTooLarge(count as usize));
        }
        let mut roots = Vec::with_capacity(count as usize);
        for idx in 0..count {
            let mut rem = idx;
            let corner = (0..n)
                .map(|i| {
                    let c = a.corner[i] + rem % spans[i];
                    rem /= spans[i];
                    c
                })
                .collect();
            roots.push(DyadicCube::new(top_level, corner));
        }
        Self::build(mu, &roots, depth)
    }

    pub fn mass(&self, q: &DyadicCube) -> f64 {
        self.masses.get(q).copied().unwrap_or(0.0)
    }

    /// Cubes sorted from the finest level up, ties by corner.
    pub fn sorted(&self) -> Vec<(&DyadicCube, f64)> {
        let mut v: Vec<_> = self.masses.iter().map(|(q, m)| (q, *m)).collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v
    }

    /// `Σ_{Q ⊆ P} w(Q)` for every tree cube `P`, by one bottom-up pass.
    pub fn subtree_sums(&self, w: impl Fn(&DyadicCube, f64) -> f64) -> HashMap<DyadicCube, f64> {
        let mut sums: HashMap<DyadicCube, f64> = HashMap::with_capacity(self.masses.len());
        for (q, m) in self.sorted() {
            *sums.entry(q.clone()).or_insert(0.0) += w(q, m);
            if q.level < self.top_level {
                let s = sums[q];
                *sums.entry(q.parent()).or_insert(0.0) += s;
            }
        }
        sums
    }
}

/// A truncated sum with the size of its finest level's contribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncated {
    pub value: f64,
    pub last_increment: f64,
}

/// `Σ_{Q ⊆ P, ℓ(Q) ≥ 2^{level(P) - depth}} c_Q |Q|_σ^{p'}`.
pub fn carleson_sum(sigma: &Measure, pcube: &DyadicCube, p: f64, depth: u32) -> Result<Truncated> {
    let n = sigma.dim();
    check_p(p, n)?;
    check_dim(n, pcube.dim())?;
    if sigma.is_zero() {
        return Ok(Truncated { value: 0.0, last_increment: 0.0 });
    }
    let tree = CubeTree::build(sigma, std::slice::from_ref(pcube), depth)?;
    let pp = p / (p - 1.0);
    let mut value = 0.0;
    let mut last = 0.0;
    for (q, m) in tree.sorted() {
        let term = coefficient_cq(q.side(), p, n)? * m.powf(pp);
        value += term;
        if q.level == tree.min_level {
            last += term;
        }
    }
    Ok(Truncated { value, last_increment: last })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlesonReport {
    /// `sup_P Σ_{Q⊆P} c_Q |Q|^{p'} / |P|` over the tree.
    pub constant: f64,
    pub witness: DyadicCube,
    /// The same supremum without the finest level.
    pub previous: f64,
    /// `(constant - previous)/constant`.
    pub relative_increment: f64,
    pub divergent: bool,
    pub cubes: usize,
}

/// Grows more than this fraction on the last level: flagged divergent.
pub const DIVERGENCE_TOLERANCE: f64 = 0.02;

/// Measured discrete Carleson constant over every cube of the tree
/// rooted at level `max_level` and `depth` levels deep.
pub fn carleson_condition_constant(sigma: &Measure, p: f64, max_level: i32, depth: u32) -> Result<CarlesonReport> {
    let n = sigma.dim();
    check_p(p, n)?;
    if depth == 0 {
        return Err(invalid("depth", "need at least one level below the roots"));
    }
    let tree = CubeTree::covering(sigma, max_level, depth)?;
    carleson_constant_of_tree(&tree, p)
}

pub(crate) fn carleson_constant_of_tree(tree: &CubeTree, p: f64) -> Result<CarlesonReport> {
    let n = tree.dim;
    let pp = p / (p - 1.0);
    let expo = (p - n as f64) / (p - 1.0);
    let full = tree.subtree_sums(|q, m| q.side().powf(expo) * m.powf(pp));
    let coarse = tree.subtree_sums(|q, m| if q.level == tree.min_level { 0.0 } else { q.side().powf(expo) * m.powf(pp) });
    let mut best = (0.0, None);
    let mut prev = 0.0f64;
    for (q, m) in tree.sorted() {
        if m <= 0.0 {
            continue;
        }
        let r = full[q] / m;
        if r > best.0 || best.1.is_none() {
            best = (r, Some(q.clone()));
        }
        if q.level > tree.min_level {
            prev = prev.max(coarse[q] / m);
        }
    }
    let witness = best.1.ok_or(Error::EmptyMeasure)?;
    let rel = if best.0 > 0.0 { (best.0 - prev) / best.0 } else { 0.0 };
    Ok(CarlesonReport {
        constant: best.0,
        witness,
        previous: prev,
        relative_increment: rel,
        divergent: rel > DIVERGENCE_TOLERANCE,
        cubes: tree.masses.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Both sides of the dyadic Carleson embedding on the tree of `sigma`:
/// `Σ c_Q |Q|^{p'} (avg_Q f)^s ≤ C̃ (s/(s-1))^s ‖f‖_s^s`.
/// `f` is sampled at the atoms (or the cubature nodes of a density).
pub fn carleson_embedding_check(
    sigma: &Measure,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    s: f64,
    p: f64,
    c_tilde: f64,
    max_level: i32,
    depth: u32,
) -> Result<EmbeddingReport> {
    if !(s > 1.0) {
        return Err(invalid("s", format!("need s > 1, got {s}")));
    }
    let n = sigma.dim();
    check_p(p, n)?;
    let atoms = discrete(sigma)?;
    let tree = CubeTree::covering(&atoms, max_level, depth)?;
    let nodes = atoms.nodes(1)?;
    let mut fsum: HashMap<DyadicCube, f64> = HashMap::new();
    let mut norm = 0.0;
    for (z, m) in &nodes {
        let v = f(z);
        if !(v >= 0.0) {
            return Err(Error::Precondition(format!("f must be nonnegative, got {v}")));
        }
        norm += m * v.powf(s);
        let leaf = DyadicCube::containing(z, tree.min_level);
        for level in tree.min_level..=tree.top_level {
            *fsum.entry(leaf.ancestor(level)).or_insert(0.0) += m * v;
        }
    }
    let pp = p / (p - 1.0);
    let mut lhs = 0.0;
    for (q, m) in tree.sorted() {
        if m > 0.0 {
            let avg = fsum.get(q).copied().unwrap_or(0.0) / m;
            lhs += coefficient_cq(q.side(), p, n)? * m.powf(pp) * avg.powf(s);
        }
    }
    let rhs = c_tilde * (s / (s - 1.0)).powf(s) * norm;
    Ok(EmbeddingReport { lhs, rhs, pass: lhs <= rhs * (1.0 + 1e-12) })
}

/// Atoms stay atoms; densities are replaced by their cubature nodes.
fn discrete(mu: &Measure) -> Result<Measure> {
    if mu.is_atomic() {
        Ok(mu.clone())
    } else {
        Measure::atoms(mu.dim(), mu.nodes(8)?)
    }
}

/// `(∫ [Σ_Q |λ_Q χ_Q(x)|^q]^{p/q} dσ)^{1/p}` for the family `f_Q = λ_Q χ_Q`.
pub fn mixed_norm(family: &BTreeMap<DyadicCube, f64>, p: f64, q: f64, sigma: &Measure) -> Result<f64> {
    if !(p > 0.0 && q > 0.0) {
        return Err(invalid("p", "mixed norm exponents must be positive"));
    }
    if family.is_empty() {
        return Ok(0.0);
    }
    let nodes = discrete(sigma)?.nodes(1)?;
    let levels: Vec<i32> = {
        let mut l: Vec<i32> = family.keys().map(|c| c.level).collect();
        l.sort_unstable();
        l.dedup();
        l
    };
    let mut acc = 0.0;
    for (z, m) in &nodes {
        let mut inner = 0.0;
        for &l in &levels {
            if let Some(v) = family.get(&DyadicCube::containing(z, l)) {
                inner += v.abs().powf(q);
            }
        }
        acc += m * inner.powf(p / q);
    }
    Ok(acc.powf(1.0 / p))
}

/// Weight attached to a shifted cube in the shifting lemma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShiftWeight {
    Unit,
    /// `exp(β W_{1,p}(χ_Q σ))`.
    ExpWolff { beta: f64 },
    /// `exp(β I_p(χ_Q σ))`.
    ExpRiesz { beta: f64 },
}

impl ShiftWeight {
    fn eval(&self, sigma: &Measure, q: &DyadicCube, t: &[f64], z: &[f64], p: f64, quad: &crate::Quadrature) -> Result<f64> {
        let (beta, kernel) = match *self {
            ShiftWeight::Unit => return Ok(1.0),
            ShiftWeight::ExpWolff { beta } => (beta, crate::potentials::Kernel::wolff_p(sigma.dim(), p)?),
            ShiftWeight::ExpRiesz { beta } => (beta, crate::potentials::Kernel::riesz_p(sigma.dim(), p)?),
        };
        let lo: Vec<f64> = q.lo().iter().zip(t).map(|(a, b)| a + b).collect();
        let hi: Vec<f64> = q.hi().iter().zip(t).map(|(a, b)| a + b).collect();
        let part = sigma.restrict(&crate::Region::Box { lo, hi })?;
        let w = crate::potentials::kernel_potential(&part, z, &kernel, f64::INFINITY, quad)?.value;
        Ok((beta * w).exp())
    }
}

/// `Σ_{x ∈ Q+t, 2^{min_level} ≤ ℓ(Q) ≤ 2^{max_level}} c_Q (φ(Q_t)(x) ∫_{Q_t} ψ(Q_t) dω)^{1/(p-1)}`.
#[allow(clippy::too_many_arguments)]
pub fn dyadic_wolff_sum(
    sigma: &Measure,
    omega: &Measure,
    x: &[f64],
    shift: &[f64],
    p: f64,
    max_level: i32,
    min_level: i32,
    weight: ShiftWeight,
    quad: &crate::Quadrature,
) -> Result<f64> {
    let n = omega.dim();
    check_p(p, n)?;
    check_dim(n, x.len())?;
    check_dim(n, shift.len())?;
    let xs: Vec<f64> = x.iter().zip(shift).map(|(a, b)| a - b).collect();
    let omega_nodes = if matches!(weight, ShiftWeight::Unit) { Vec::new() } else { discrete(omega)?.nodes(1)? };
    let mut total = 0.0;
    for level in min_level..=max_level {
        let q = DyadicCube::containing(&xs, level);
        let m = if matches!(weight, ShiftWeight::Unit) {
            cube_mass(omega, &q, Some(shift))?.value
        } else {
            let mut acc = 0.0;
            for (z, w) in &omega_nodes {
                let zs: Vec<f64> = z.iter().zip(shift).map(|(a, b)| a - b).collect();
                if q.contains_point(&zs) {
                    acc += w * weight.eval(sigma, &q, shift, z, p, quad)?;
                }
            }
            acc
        };
        if m <= 0.0 {
            continue;
        }
        let phi = weight.eval(sigma, &q, shift, x, p, quad)?;
        total += coefficient_cq(q.side(), p, n)? * (phi * m).powf(1.0 / (p - 1.0));
    }
    Ok(total)
}

/// `j_0 = ⌈log2(2√n)⌉ + 1`.
pub fn default_j0(n: usize) -> i32 {
    (2.0 * (n as f64).sqrt()).log2().ceil() as i32 + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
    pub j0: i32,
}

/// Uniform point of `B(0, radius)` in `R^n`.
fn uniform_in_ball(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if v.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
            return v.into_iter().map(|c| c * radius).collect();
        }
    }
}

/// Monte-Carlo average over shifts `t ∈ B(0, 2^{k+j0})` of the weighted
/// dyadic Wolff sum with sides between `2^{min_level}` and `2^{k+j0}`.
/// Shift `i` draws from its own stream seeded by `(seed, i)`.
#[allow(clippy::too_many_arguments)]
pub fn shift_average(
    sigma: &Measure,
    omega: &Measure,
    x: &[f64],
    p: f64,
    k: i32,
    min_level: i32,
    j0: Option<i32>,
    weight: ShiftWeight,
    samples: usize,
    seed: u64,
    quad: &crate::Quadrature,
) -> Result<ShiftReport> {
    if samples == 0 {
        return Err(invalid("samples", "need at least one shift"));
    }
    let n = omega.dim();
    let j0 = j0.unwrap_or_else(|| default_j0(n));
    let radius = 2f64.powi(k + j0);
    let vals = parallel::map_range(samples, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let t = uniform_in_ball(&mut rng, n, radius);
        dyadic_wolff_sum(sigma, omega, x, &t, p, k + j0, min_level, weight, quad)
    });
    let vals: Vec<f64> = vals.into_iter().collect::<Result<_>>()?;
    let mean = vals.iter().sum::<f64>() / samples as f64;
    let var = if samples > 1 { vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples - 1) as f64 } else { 0.0 };
    Ok(ShiftReport { mean, std_err: (var / samples as f64).sqrt(), samples, j0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    /// `∫_P [Σ_{x∈Q⊆P} λ_Q^s]^{1/s} dσ`.
    pub lhs: f64,
    /// `Σ λ_Q μ_Q |Q|_σ` for the constructed `μ`.
    pub pairing: f64,
    pub identity_gap: f64,
    /// `sup_Q |Q|^{-1} Σ_{R⊆Q} μ_R^{s'} |R|` for the constructed `μ`.
    pub admissibility: f64,
    /// Largest pairing over random admissible sequences, divided by `lhs`.
    pub random_ratio: f64,
    pub trials: usize,
}

struct AtomTree {
    levels: Vec<i32>,
    /// per atom, its cube at every level (coarsest first)
    cubes: Vec<Vec<DyadicCube>>,
    masses: Vec<f64>,
    cube_mass: HashMap<DyadicCube, f64>,
}

impl AtomTree {
    fn new(nodes: &[(Vec<f64>, f64)], pcube: &DyadicCube, min_level: i32) -> Self {
        let levels: Vec<i32> = (min_level..=pcube.level).rev().collect();
        let mut cubes = Vec::new();
        let mut masses = Vec::new();
        let mut cube_mass = HashMap::new();
        for (z, m) in nodes {
            if !pcube.contains_point(z) || *m <= 0.0 {
                continue;
            }
            let cs: Vec<DyadicCube> = levels.iter().map(|&l| DyadicCube::containing(z, l)).collect();
            for c in &cs {
                *cube_mass.entry(c.clone()).or_insert(0.0) += m;
            }
            cubes.push(cs);
            masses.push(*m);
        }
        AtomTree { levels, cubes, masses, cube_mass }
    }

    /// `sup_Q |Q|^{-1} Σ_{R ⊆ Q} μ_R^{s'} |R|`.
    fn admissibility(&self, mu: &HashMap<DyadicCube, f64>, sp: f64) -> f64 {
        let mut sums: HashMap<DyadicCube, f64> = HashMap::new();
        let mut keys: Vec<&DyadicCube> = self.cube_mass.keys().collect();
        keys.sort();
        for q in keys {
            let own = mu.get(q).copied().unwrap_or(0.0).powf(sp) * self.cube_mass[q];
            *sums.entry(q.clone()).or_insert(0.0) += own;
            if q.level < self.levels[0] {
                let s = sums[q];
                *sums.entry(q.parent()).or_insert(0.0) += s;
            }
        }
        sums.iter().map(|(q, s)| s / self.cube_mass[q]).fold(0.0, f64::max)
    }

    fn pairing(&self, lambda: &BTreeMap<DyadicCube, f64>, mu: &HashMap<DyadicCube, f64>) -> f64 {
        lambda.iter().map(|(q, l)| l * mu.get(q).copied().unwrap_or(0.0) * self.cube_mass.get(q).copied().unwrap_or(0.0)).sum()
    }
}

/// Checks the discrete Littlewood-Paley duality on the cubes under `P`.
pub fn duality_check(
    sigma: &Measure,
    pcube: &DyadicCube,
    lambda: &BTreeMap<DyadicCube, f64>,
    s: f64,
    trials: usize,
    seed: u64,
) -> Result<DualityReport> {
    if !(s > 1.0) {
        return Err(invalid("s", format!("need s > 1, got {s}")));
    }
    let nodes = match sigma {
        m if m.is_atomic() => m.nodes(1)?,
        Measure::Grid(g) => g.nodes(1),
        _ => return Err(Error::Unsupported("duality needs an atomic or grid measure".into())),
    };
    for (q, &l) in lambda {
        if !pcube.contains(q) || !(l >= 0.0) {
            return Err(invalid("lambda", "λ must be nonnegative and supported on cubes inside P"));
        }
    }
    let min_level = lambda.keys().map(|q| q.level).min().unwrap_or(pcube.level);
    let tree = AtomTree::new(&nodes, pcube, min_level);
    let sp = s / (s - 1.0);
    let lam = |q: &DyadicCube| lambda.get(q).copied().unwrap_or(0.0);
    let mut lhs = 0.0;
    let mut mu: HashMap<DyadicCube, f64> = HashMap::new();
    for (i, cs) in tree.cubes.iter().enumerate() {
        let big_s: f64 = cs.iter().map(|c| lam(c).powf(s)).sum();
        lhs += tree.masses[i] * big_s.powf(1.0 / s);
        if big_s > 0.0 {
            for c in cs {
                let l = lam(c);
                if l > 0.0 {
                    *mu.entry(c.clone()).or_insert(0.0) += tree.masses[i] * (l.powf(s) / big_s).powf(1.0 / sp);
                }
            }
        }
    }
    for (q, v) in mu.iter_mut() {
        *v /= tree.cube_mass[q];
    }
    let pairing = tree.pairing(lambda, &mu);
    let admissibility = tree.admissibility(&mu, sp);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<DyadicCube> = {
        let mut k: Vec<DyadicCube> = tree.cube_mass.keys().cloned().collect();
        k.sort();
        k
    };
    let mut random_ratio: f64 = 0.0;
    for _ in 0..trials {
        let cand: HashMap<DyadicCube, f64> = all.iter().map(|q| (q.clone(), rng.gen_range(0.0..1.0f64).powi(3))).collect();
        let a = tree.admissibility(&cand, sp);
        if a <= 0.0 {
            continue;
        }
        let scale = a.powf(-1.0 / sp);
        let scaled: HashMap<DyadicCube, f64> = cand.into_iter().map(|(q, v)| (q, v * scale)).collect();
        if lhs > 0.0 {
            random_ratio = random_ratio.max(tree.pairing(lambda, &scaled) / lhs);
        }
    }
    Ok(DualityReport { lhs, pairing, identity_gap: (pairing - lhs).abs(), admissibility, random_ratio, trials })
}
