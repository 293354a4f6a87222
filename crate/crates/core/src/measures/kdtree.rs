//! Static k-d tree over atom locations with subtree mass aggregates, so a
//! ball whose box is fully covered is counted without visiting its atoms.

const LEAF: usize = 8;

#[derive(Debug, Clone)]
struct Node {
    start: usize,
    end: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    mass: f64,
    children: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn build(dim: usize, points: &[f64], masses: &[f64]) -> Self {
        let mut tree = KdTree { dim, order: (0..masses.len()).collect(), nodes: Vec::new() };
        if !masses.is_empty() {
            tree.build_node(points, masses, 0, masses.len());
        }
        tree
    }

    fn build_node(&mut self, pts: &[f64], masses: &[f64], start: usize, end: usize) -> usize {
        let d = self.dim;
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        let mut mass = 0.0;
        for &i in &self.order[start..end] {
            for k in 0..d {
                lo[k] = lo[k].min(pts[i * d + k]);
                hi[k] = hi[k].max(pts[i * d + k]);
            }
            mass += masses[i];
        }
        let id = self.nodes.len();
        self.nodes.push(Node { start, end, lo: lo.clone(), hi: hi.clone(), mass, children: None });
        if end - start > LEAF {
            let axis = (0..d).max_by(|&a, &b| (hi[a] - lo[a]).partial_cmp(&(hi[b] - lo[b])).unwrap()).unwrap();
            let mid = (start + end) / 2;
            self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                pts[a * d + axis].partial_cmp(&pts[b * d + axis]).unwrap()
            });
            let l = self.build_node(pts, masses, start, mid);
            let r = self.build_node(pts, masses, mid, end);
            self.nodes[id].children = Some((l, r));
        }
        id
    }

    fn box_distances(&self, node: &Node, x: &[f64]) -> (f64, f64) {
        let mut near = 0.0;
        let mut far = 0.0;
        for k in 0..self.dim {
            let dn = (node.lo[k] - x[k]).max(x[k] - node.hi[k]).max(0.0);
            let df = (x[k] - node.lo[k]).abs().max((node.hi[k] - x[k]).abs());
            near += dn * dn;
            far += df * df;
        }
        (near, far)
    }

    /// Total mass of atoms in the closed ball `B(x, r)`.
    pub fn ball_mass(&self, pts: &[f64], masses: &[f64], x: &[f64], r: f64) -> f64 {
        if self.nodes.is_empty() {
            return 0.0;
        }
        let r2 = r * r;
        let mut stack = vec![0usize];
        let mut acc = 0.0;
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            let (near, far) = self.box_distances(node, x);
            if near > r2 {
                continue;
            }
            if far <= r2 {
                acc += node.mass;
                continue;
            }
            match node.children {
                Some((l, r)) => {
                    stack.push(l);
                    stack.push(r);
                }
                None => {
                    for &i in &self.order[node.start..node.end] {
                        if sq_dist(&pts[i * self.dim..(i + 1) * self.dim], x) <= r2 {
                            acc += masses[i];
                        }
                    }
                }
            }
        }
        acc
    }

    /// Calls `f(i)` for every atom index inside the closed ball.
    pub fn for_each_in_ball(&self, pts: &[f64], x: &[f64], r: f64, mut f: impl FnMut(usize)) {
        if self.nodes.is_empty() {
            return;
        }
        let r2 = r * r;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            let (near, far) = self.box_distances(node, x);
            if near > r2 {
                continue;
            }
            match node.children {
                Some((l, r)) if far > r2 => {
                    stack.push(l);
                    stack.push(r);
                }
                _ => {
                    for &i in &self.order[node.start..node.end] {
                        if far <= r2 || sq_dist(&pts[i * self.dim..(i + 1) * self.dim], x) <= r2 {
                            f(i);
                        }
                    }
                }
            }
        }
    }

    /// Distance from `x` to the nearest atom.
    pub fn nearest(&self, pts: &[f64], x: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        if self.nodes.is_empty() {
            return best;
        }
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            let (near, _) = self.box_distances(node, x);
            if near >= best {
                continue;
            }
            match node.children {
                Some((l, r)) => {
                    stack.push(l);
                    stack.push(r);
                }
                None => {
                    for &i in &self.order[node.start..node.end] {
                        best = best.min(sq_dist(&pts[i * self.dim..(i + 1) * self.dim], x));
                    }
                }
            }
        }
        best.sqrt()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 500;
        let pts: Vec<f64> = (0..3 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let masses: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
        let tree = KdTree::build(3, &pts, &masses);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let r = rng.gen_range(0.0..1.5);
            let brute: f64 = (0..n).filter(|&i| sq_dist(&pts[3 * i..3 * i + 3], &x) <= r * r).map(|i| masses[i]).sum();
            assert!((tree.ball_mass(&pts, &masses, &x, r) - brute).abs() < 1e-9);
            let mut visited = 0.0;
            tree.for_each_in_ball(&pts, &x, r, |i| visited += masses[i]);
            assert!((visited - brute).abs() < 1e-9);
            let near = (0..n).map(|i| sq_dist(&pts[3 * i..3 * i + 3], &x)).fold(f64::INFINITY, f64::min).sqrt();
            assert!((tree.nearest(&pts, &x) - near).abs() < 1e-12);
        }
    }
}
