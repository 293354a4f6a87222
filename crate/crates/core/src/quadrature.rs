//! Composite Gauss-Legendre quadrature on geometric grids for `∫ f(t) dt/t`.
//!
//! A cell `[t_j, t_{j+1}]` is mapped to `u = ln t`, so `dt/t = du` and each
//! cell carries four Gauss points. Jump radii of the integrand are inserted
//! as cell boundaries, which keeps the rule exact on piecewise power laws.

use std::sync::OnceLock;

const GL4_X: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
const GL4_W: [f64; 4] = [0.347_854_845_137_453_8, 0.652_145_154_862_546_2, 0.652_145_154_862_546_2, 0.347_854_845_137_453_8];
const GL8_X: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_W: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

pub const POINTS_PER_CELL: usize = 4;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre_4() -> (&'static [f64; 4], &'static [f64; 4]) {
    (&GL4_X, &GL4_W)
}

fn lagrange(k: usize, x: f64) -> f64 {
    let mut v = 1.0;
    for j in 0..4 {
        if j != k {
            v *= (x - GL4_X[j]) / (GL4_X[k] - GL4_X[j]);
        }
    }
    v
}

/// `S[i][k] = ∫_{-1}^{x_i} ℓ_k`, the spectral integration matrix of the
/// four-point rule; exact for the cubic interpolant.
fn integration_matrix() -> &'static [[f64; 4]; 4] {
    static S: OnceLock<[[f64; 4]; 4]> = OnceLock::new();
    S.get_or_init(|| {
        let mut s = [[0.0; 4]; 4];
        for i in 0..4 {
            let half = 0.5 * (GL4_X[i] + 1.0);
            for k in 0..4 {
                s[i][k] = GL8_X
                    .iter()
                    .zip(GL8_W)
                    .map(|(x, w)| w * half * lagrange(k, -1.0 + half * (x + 1.0)))
                    .sum();
            }
        }
        s
    })
}

/// Gauss points of a geometric grid between `t_lo` and `t_hi`.
#[derive(Debug, Clone)]
pub struct LogGrid {
    pub nodes: Vec<f64>,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LogGrid {
    /// Nodes `anchor·2^{j/k}` strictly inside `(t_lo, t_hi)` together with
    /// the endpoints and every breakpoint in range.
    pub fn new(t_lo: f64, t_hi: f64, k: usize, anchor: f64, breakpoints: &[f64]) -> Self {
        let mut nodes = Vec::new();
        if t_hi > t_lo && t_lo > 0.0 && t_hi.is_finite() {
            let k = k.max(1) as f64;
            let step = std::f64::consts::LN_2 / k;
            let (la, l0, l1) = (anchor.ln(), t_lo.ln(), t_hi.ln());
            let j0 = ((l0 - la) / step).floor() as i64 + 1;
            let j1 = ((l1 - la) / step).ceil() as i64 - 1;
            nodes.push(t_lo);
            for j in j0..=j1 {
                let t = anchor * (j as f64 * step).exp();
                if t > t_lo && t < t_hi {
                    nodes.push(t);
                }
            }
            nodes.push(t_hi);
            nodes.extend(breakpoints.iter().copied().filter(|b| *b > t_lo && *b < t_hi));
            nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
            nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * b.abs());
        }
        let cells = nodes.len().saturating_sub(1);
        let mut points = Vec::with_capacity(cells * 4);
        let mut weights = Vec::with_capacity(cells * 4);
        for w in nodes.windows(2) {
            let (u0, u1) = (w[0].ln(), w[1].ln());
            let (m, h) = (0.5 * (u0 + u1), 0.5 * (u1 - u0));
            for i in 0..4 {
                points.push((m + h * GL4_X[i]).exp());
                weights.push(h * GL4_W[i]);
            }
        }
        LogGrid { nodes, points, weights }
    }

    pub fn cells(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Running integral from `t_lo` to each Gauss point.
    pub fn cumulative(&self, values: &[f64]) -> Vec<f64> {
        let s = integration_matrix();
        let mut out = Vec::with_capacity(values.len());
        let mut base = 0.0;
        for (c, w) in self.nodes.windows(2).enumerate() {
            let h = 0.5 * (w[1].ln() - w[0].ln());
            let f = &values[4 * c..4 * c + 4];
            for row in s.iter() {
                out.push(base + h * (0..4).map(|k| row[k] * f[k]).sum::<f64>());
            }
            base += h * (0..4).map(|k| GL4_W[k] * f[k]).sum::<f64>();
        }
        out
    }

    /// Running integral at the cell boundaries (`nodes`).
    pub fn cumulative_nodes(&self, values: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.nodes.len());
        out.push(0.0);
        let mut acc = 0.0;
        for c in 0..self.cells() {
            acc += (0..4).map(|i| self.weights[4 * c + i] * values[4 * c + i]).sum::<f64>();
            out.push(acc);
        }
        out
    }
}

/// `L_k(ξ) = ∫_{-1}^{ξ} ℓ_k`: weights that integrate the cubic interpolant
/// through the four Gauss values from the left end of a cell to `ξ`.
pub fn partial_weights(xi: f64) -> [f64; 4] {
    let half = 0.5 * (xi + 1.0);
    let mut out = [0.0; 4];
    for (k, o) in out.iter_mut().enumerate() {
        *o = GL8_X.iter().zip(GL8_W).map(|(x, w)| w * half * lagrange(k, -1.0 + half * (x + 1.0))).sum();
    }
    out
}

impl LogGrid {
    /// Running integral from the first node to an arbitrary `t` inside
    /// the grid, using the node cumulative plus the cubic interpolant on
    /// the partial cell.
    pub fn cumulative_at(&self, values: &[f64], node_cum: &[f64], t: f64) -> f64 {
        if self.is_empty() || t <= self.nodes[0] {
            return 0.0;
        }
        let last = *self.nodes.last().unwrap();
        if t >= last {
            return *node_cum.last().unwrap();
        }
        let c = self.nodes.partition_point(|&b| b <= t) - 1;
        let (u0, u1) = (self.nodes[c].ln(), self.nodes[c + 1].ln());
        let h = 0.5 * (u1 - u0);
        let xi = ((t.ln() - u0) / h - 1.0).clamp(-1.0, 1.0);
        let w = partial_weights(xi);
        node_cum[c] + h * (0..4).map(|k| w[k] * values[4 * c + k]).sum::<f64>()
    }
}

/// Integral of `g` on `[a, b]` with `n` panels of the four-point rule.
pub fn gauss_panels(a: f64, b: f64, panels: usize, g: impl Fn(f64) -> f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for j in 0..panels {
        let m = a + (j as f64 + 0.5) * h;
        for i in 0..4 {
            acc += GL4_W[i] * 0.5 * h * g(m + 0.5 * h * GL4_X[i]);
        }
    }
    acc
}
