//! Piecewise-constant densities on a uniform cubic cell grid.

use crate::error::{invalid, Result};
use crate::geometry::{region_volume, Shape};

#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    pub dim: usize,
    pub lower: Vec<f64>,
    pub cell: f64,
    pub shape: Vec<usize>,
    /// Cell masses, last axis fastest.
    pub masses: Vec<f64>,
    /// Deepest bisection level for cells a query boundary cuts through.
    pub max_depth: u32,
}

impl GridDensity {
    pub fn new(lower: Vec<f64>, cell: f64, shape: Vec<usize>, masses: Vec<f64>) -> Result<Self> {
        let dim = lower.len();
        if shape.len() != dim {
            return Err(invalid("shape", format!("expected {dim} axis counts")));
        }
        if !(cell > 0.0 && cell.is_finite()) {
            return Err(invalid("cell", "cell size must be positive"));
        }
        let count: usize = shape.iter().product();
        if masses.len() != count {
            return Err(invalid("masses", format!("expected {count} cell masses, got {}", masses.len())));
        }
        if masses.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(invalid("masses", "cell masses must be finite and nonnegative"));
        }
        Ok(GridDensity { dim, lower, cell, shape, masses, max_depth: match dim { 1 | 2 => 14, 3 => 9, _ => 6 } })
    }

    pub fn uniform(lower: Vec<f64>, cell: f64, shape: Vec<usize>, total: f64) -> Result<Self> {
        let count: usize = shape.iter().product();
        Self::new(lower, cell, shape, vec![total / count as f64; count])
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    fn cell_volume(&self) -> f64 {
        self.cell.powi(self.dim as i32)
    }

    fn unflatten(&self, mut flat: usize, idx: &mut [usize]) {
        for a in (0..self.dim).rev() {
            idx[a] = flat % self.shape[a];
            flat /= self.shape[a];
        }
    }

    pub fn cell_lo(&self, flat: usize) -> Vec<f64> {
        let mut idx = vec![0; self.dim];
        self.unflatten(flat, &mut idx);
        idx.iter().zip(&self.lower).map(|(&i, l)| l + i as f64 * self.cell).collect()
    }

    pub fn cell_center(&self, flat: usize) -> Vec<f64> {
        self.cell_lo(flat).iter().map(|l| l + 0.5 * self.cell).collect()
    }

    /// Flat indices of cells meeting `[lo, hi]`, nonzero masses only.
    fn cells_in(&self, lo: &[f64], hi: &[f64]) -> Vec<usize> {
        let mut ranges = Vec::with_capacity(self.dim);
        for a in 0..self.dim {
            let i0 = ((lo[a] - self.lower[a]) / self.cell).floor().max(0.0);
            let i1 = ((hi[a] - self.lower[a]) / self.cell).ceil().min(self.shape[a] as f64);
            if i1 <= i0 {
                return Vec::new();
            }
            ranges.push((i0 as usize, i1 as usize));
        }
        let mut out = Vec::new();
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        loop {
            let flat = idx.iter().zip(&self.shape).fold(0usize, |acc, (i, s)| acc * s + i);
            if self.masses[flat] > 0.0 {
                out.push(flat);
            }
            let mut a = self.dim;
            loop {
                if a == 0 {
                    return out;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < ranges[a].1 {
                    break;
                }
                idx[a] = ranges[a].0;
            }
        }
    }

    fn depth_for(&self, r: f64) -> u32 {
        let rel = (self.cell / r.max(1e-300)).log2().ceil().max(0.0) as u32;
        let extra = match self.dim {
            1 | 2 => 8,
            3 => 5,
            _ => 3,
        };
        (rel + extra).min(self.max_depth)
    }

    /// Mass of `(∩ shapes) ∩ [lo, hi]`, where `[lo, hi]` bounds the shapes.
    pub fn shapes_mass(&self, lo: &[f64], hi: &[f64], shapes: &[Shape], scale: f64) -> (f64, f64) {
        let depth = self.depth_for(scale);
        let cv = self.cell_volume();
        let mut mass = 0.0;
        let mut err = 0.0;
        for flat in self.cells_in(lo, hi) {
            let clo = self.cell_lo(flat);
            let chi: Vec<f64> = clo.iter().map(|c| c + self.cell).collect();
            let (v, e) = region_volume(&clo, &chi, shapes, depth);
            let rho = self.masses[flat] / cv;
            mass += rho * v;
            err += rho * e;
        }
        (mass, err)
    }

    pub fn ball_mass(&self, x: &[f64], r: f64) -> (f64, f64) {
        if r <= 0.0 {
            return (0.0, 0.0);
        }
        let lo: Vec<f64> = x.iter().map(|c| c - r).collect();
        let hi: Vec<f64> = x.iter().map(|c| c + r).collect();
        self.shapes_mass(&lo, &hi, &[Shape::Ball { center: x.to_vec(), radius: r }], r)
    }

    /// Exact mass of the half-open box `[lo, hi)`.
    pub fn box_mass(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let mut mass = 0.0;
        for flat in self.cells_in(lo, hi) {
            let clo = self.cell_lo(flat);
            let mut frac = 1.0;
            for a in 0..self.dim {
                let overlap = (hi[a].min(clo[a] + self.cell) - lo[a].max(clo[a])).max(0.0);
                frac *= overlap / self.cell;
            }
            mass += frac * self.masses[flat];
        }
        mass
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for (flat, &m) in self.masses.iter().enumerate() {
            if m > 0.0 {
                let c = self.cell_lo(flat);
                for a in 0..self.dim {
                    lo[a] = lo[a].min(c[a]);
                    hi[a] = hi[a].max(c[a] + self.cell);
                }
            }
        }
        (lo, hi)
    }

    pub fn support_distance(&self, x: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for (flat, &m) in self.masses.iter().enumerate() {
            if m > 0.0 {
                let c = self.cell_lo(flat);
                let d2: f64 = (0..self.dim).map(|a| (c[a] - x[a]).max(x[a] - c[a] - self.cell).max(0.0).powi(2)).sum();
                best = best.min(d2);
            }
        }
        best.sqrt()
    }

    pub fn support_radius_from(&self, x: &[f64]) -> f64 {
        let mut best: f64 = 0.0;
        for (flat, &m) in self.masses.iter().enumerate() {
            if m > 0.0 {
                let c = self.cell_lo(flat);
                let d2: f64 = (0..self.dim).map(|a| (x[a] - c[a]).abs().max((c[a] + self.cell - x[a]).abs()).powi(2)).sum();
                best = best.max(d2);
            }
        }
        best.sqrt()
    }

    /// Sub-cell centers with equal shares of the cell mass.
    pub fn nodes(&self, m: usize) -> Vec<(Vec<f64>, f64)> {
        let m = m.max(1);
        let per = m.pow(self.dim as u32);
        let h = self.cell / m as f64;
        let mut out = Vec::new();
        for (flat, &mass) in self.masses.iter().enumerate() {
            if mass <= 0.0 {
                continue;
            }
            let lo = self.cell_lo(flat);
            for s in 0..per {
                let mut rem = s;
                let mut z = lo.clone();
                for zi in z.iter_mut() {
                    *zi += (rem % m) as f64 * h + 0.5 * h;
                    rem /= m;
                }
                out.push((z, mass / per as f64));
            }
        }
        out
    }

    /// `(ρ, δ)` such that the density is the constant `ρ` on `B(x, δ)`:
    /// the cube `(x - δ, x + δ)^n` is grown across cell faces while every
    /// cell it meets carries the same mass.
    pub fn local_uniform(&self, x: &[f64]) -> (f64, f64) {
        let n = self.dim;
        let rel: Vec<f64> = (0..n).map(|a| (x[a] - self.lower[a]) / self.cell).collect();
        let mass_at = |ix: &[i64]| -> f64 {
            let mut flat = 0usize;
            for a in 0..n {
                if ix[a] < 0 || ix[a] >= self.shape[a] as i64 {
                    return 0.0;
                }
                flat = flat * self.shape[a] + ix[a] as usize;
            }
            self.masses[flat]
        };
        let home: Vec<i64> = rel.iter().map(|r| r.floor() as i64).collect();
        let m0 = mass_at(&home);
        let mut cands: Vec<f64> = Vec::new();
        for a in 0..n {
            let f = rel[a] - home[a] as f64;
            for j in 0..4 {
                cands.push(f + j as f64);
                cands.push(1.0 - f + j as f64);
            }
        }
        cands.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let uniform_within = |t: f64| -> bool {
            let ranges: Vec<(i64, i64)> = rel
                .iter()
                .map(|&r| (((r - t) * (1.0 + 1e-14)).floor() as i64, ((r + t).ceil() as i64 - 1).max((r - t).floor() as i64)))
                .collect();
            let mut ix: Vec<i64> = ranges.iter().map(|r| r.0).collect();
            loop {
                if mass_at(&ix) != m0 {
                    return false;
                }
                let mut a = n;
                loop {
                    if a == 0 {
                        return true;
                    }
                    a -= 1;
                    ix[a] += 1;
                    if ix[a] <= ranges[a].1 {
                        break;
                    }
                    ix[a] = ranges[a].0;
                }
            }
        };
        let mut delta = 0.0;
        for t in cands {
            if t <= delta {
                continue;
            }
            if !uniform_within(t) {
                break;
            }
            delta = t;
        }
        (m0 / self.cell_volume(), delta * self.cell)
    }

    pub fn with_masses(&self, masses: Vec<f64>) -> Self {
        GridDensity { masses, ..self.clone() }
    }

    pub fn pushforward(&self, lambda: f64, factor: f64) -> Self {
        GridDensity {
            lower: self.lower.iter().map(|l| l * lambda).collect(),
            cell: self.cell * lambda,
            masses: self.masses.iter().map(|m| m * factor).collect(),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn quarter_cube_of_uniform_square() {
        let g = GridDensity::uniform(vec![0.0, 0.0], 0.125, vec![8, 8], 1.0).unwrap();
        assert_relative_eq!(g.box_mass(&[0.0, 0.0], &[0.5, 0.5]), 0.25, max_relative = 1e-14);
        assert_relative_eq!(g.box_mass(&[0.1, 0.3], &[0.7, 0.35]), 0.6 * 0.05, max_relative = 1e-12);
    }

    #[test]
    fn planar_ball_mass_is_exact() {
        let g = GridDensity::uniform(vec![-1.0, -1.0], 0.25, vec![8, 8], 4.0).unwrap();
        let (v, e) = g.ball_mass(&[0.1, 0.2], 0.5);
        assert_eq!(e, 0.0);
        assert_relative_eq!(v, PI * 0.25, max_relative = 1e-12);
        // tiny ball inside a single cell
        assert_relative_eq!(g.ball_mass(&[0.1, 0.1], 1e-4).0, PI * 1e-8, max_relative = 1e-10);
    }

    #[test]
    fn spatial_ball_mass_within_declared_error() {
        let g = GridDensity::uniform(vec![-1.0; 3], 0.5, vec![4, 4, 4], 8.0).unwrap();
        let (v, e) = g.ball_mass(&[0.05, -0.1, 0.2], 0.6);
        let exact = 4.0 * PI / 3.0 * 0.216;
        assert!((v - exact).abs() <= e);
        assert!(e < 0.01 * exact);
    }

    #[test]
    fn local_uniform_grows_over_equal_cells() {
        let g = GridDensity::uniform(vec![0.0, 0.0], 0.1, vec![20, 20], 1.0).unwrap();
        let (rho, delta) = g.local_uniform(&[1.0, 1.0]);
        assert_relative_eq!(rho, 0.25, max_relative = 1e-12);
        assert_relative_eq!(delta, 0.4, max_relative = 1e-9);
        let (_, edge) = g.local_uniform(&[0.03, 1.0]);
        assert_relative_eq!(edge, 0.03, max_relative = 1e-9);
    }

    #[test]
    fn nodes_carry_total_mass() {
        let g = GridDensity::uniform(vec![0.0; 2], 0.5, vec![2, 2], 3.0).unwrap();
        let nodes = g.nodes(3);
        assert_eq!(nodes.len(), 36);
        assert_relative_eq!(nodes.iter().map(|n| n.1).sum::<f64>(), 3.0, max_relative = 1e-14);
    }
}
