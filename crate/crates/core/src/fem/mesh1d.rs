//! Unit interval with spherical measure `4 pi r^2 dr`.

use std::f64::consts::PI;

use super::basis::Lagrange1d;
use super::quadrature::{gauss, RefRule};
use super::{Adaptive, CellFlag, CellValues, Constraint, Discretization, FemError, Pinned};

#[derive(Debug, Clone)]
struct Interval {
    a: f64,
    b: f64,
    level: usize,
    parent: Option<usize>,
    children: Option<[usize; 2]>,
    birth: u64,
}

#[derive(Debug, Clone)]
pub struct Mesh1d {
    basis: Lagrange1d,
    tree: Vec<Interval>,
    leaves: Vec<usize>,
    cell_nodes: Vec<Vec<usize>>,
    x: Vec<f64>,
    rule: RefRule,
    node_rule: RefRule,
}

impl Mesh1d {
    /// `n_cells` uniform root intervals of order `p`.
    pub fn new(n_cells: usize, p: usize) -> Result<Self, FemError> {
        Self::with_quadrature(n_cells, p, 2 * p + 1)
    }

    pub fn with_quadrature(n_cells: usize, p: usize, nq: usize) -> Result<Self, FemError> {
        if !(1..=4).contains(&p) {
            return Err(FemError::InvalidOrder(p));
        }
        if n_cells == 0 {
            return Err(FemError::InvalidSize("need at least one cell".into()));
        }
        let tree = (0..n_cells)
            .map(|k| Interval {
                a: k as f64 / n_cells as f64,
                b: (k + 1) as f64 / n_cells as f64,
                level: 0,
                parent: None,
                children: None,
                birth: 0,
            })
            .collect();
        let basis = Lagrange1d::new(p);
        let node_rule = RefRule {
            points: basis.nodes.iter().map(|&x| [x, 0.0]).collect(),
            weights: vec![0.0; p + 1],
        };
        let mut m = Self {
            basis,
            tree,
            leaves: (0..n_cells).collect(),
            cell_nodes: Vec::new(),
            x: Vec::new(),
            rule: RefRule::tensor(&gauss(nq.max(1)), 1),
            node_rule,
        };
        m.rebuild();
        Ok(m)
    }

    /// Uniformly refine `levels` times.
    pub fn refined(mut self, levels: usize) -> Self {
        for _ in 0..levels {
            let flags = vec![CellFlag::Refine; self.n_cells()];
            self = self.adapt(&flags, 0, 0, usize::MAX);
        }
        self
    }

    fn rebuild(&mut self) {
        let p = self.basis.order;
        self.leaves
            .sort_by(|&i, &j| self.tree[i].a.total_cmp(&self.tree[j].a));
        self.x.clear();
        self.cell_nodes.clear();
        for (k, &leaf) in self.leaves.iter().enumerate() {
            let iv = &self.tree[leaf];
            let start = if k == 0 { 0 } else { 1 };
            for i in start..=p {
                self.x.push(iv.a + (iv.b - iv.a) * self.basis.nodes[i]);
            }
            self.cell_nodes.push((k * p..=k * p + p).collect());
        }
        // Exact end points.
        let n = self.x.len();
        self.x[0] = 0.0;
        self.x[n - 1] = 1.0;
    }

    pub fn coordinates(&self) -> &[f64] {
        &self.x
    }

    pub fn cell_bounds(&self, cell: usize) -> (f64, f64) {
        let iv = &self.tree[self.leaves[cell]];
        (iv.a, iv.b)
    }

    /// Evaluate a nodal field at `r`.
    pub fn evaluate(&self, field: &[f64], r: f64) -> f64 {
        let k = self.locate(r);
        let (a, b) = self.cell_bounds(k);
        let vals = self.basis.values((r - a) / (b - a));
        self.cell_nodes[k]
            .iter()
            .zip(vals)
            .map(|(&n, v)| field[n] * v)
            .sum()
    }

    fn locate(&self, r: f64) -> usize {
        let k = self
            .leaves
            .partition_point(|&l| self.tree[l].b <= r);
        k.min(self.leaves.len() - 1)
    }

    fn children_of(&mut self, idx: usize, stamp: u64) -> [usize; 2] {
        if let Some(ch) = self.tree[idx].children {
            for c in ch {
                self.tree[c].birth = stamp;
            }
            return ch;
        }
        let iv = self.tree[idx].clone();
        let mid = 0.5 * (iv.a + iv.b);
        let n = self.tree.len();
        for (a, b) in [(iv.a, mid), (mid, iv.b)] {
            self.tree.push(Interval {
                a,
                b,
                level: iv.level + 1,
                parent: Some(idx),
                children: None,
                birth: stamp,
            });
        }
        self.tree[idx].children = Some([n, n + 1]);
        [n, n + 1]
    }
}

impl Discretization<3> for Mesh1d {
    fn sdim(&self) -> usize {
        1
    }

    fn ncomp(&self) -> usize {
        1
    }

    fn order(&self) -> usize {
        self.basis.order
    }

    fn n_nodes(&self) -> usize {
        self.x.len()
    }

    fn n_cells(&self) -> usize {
        self.leaves.len()
    }

    fn cell_nodes(&self, cell: usize) -> &[usize] {
        &self.cell_nodes[cell]
    }

    fn cell_level(&self, cell: usize) -> usize {
        self.tree[self.leaves[cell]].level
    }

    fn cell_values(&self, cell: usize, rule: &RefRule) -> CellValues<3> {
        let (a, b) = self.cell_bounds(cell);
        let h = b - a;
        let n = self.basis.len();
        let nq = rule.len();
        let mut cv = CellValues {
            nloc: n,
            nq,
            jxw: Vec::with_capacity(nq),
            dx: Vec::with_capacity(nq),
            phi: vec![0.0; nq * n],
            grad: vec![[0.0; 2]; nq * n],
            hoop: vec![0.0; nq * n],
            x: Vec::with_capacity(nq),
        };
        let mut v = vec![0.0; n];
        let mut d = vec![0.0; n];
        for (q, (pt, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let r = a + h * pt[0];
            self.basis.eval(pt[0], &mut v, &mut d);
            cv.jxw.push(4.0 * PI * r * r * h * w);
            cv.dx.push(h * w);
            cv.x.push([r, 0.0]);
            for i in 0..n {
                let k = q * n + i;
                cv.phi[k] = v[i];
                cv.grad[k] = [d[i] / h, 0.0];
                cv.hoop[k] = if r > 0.0 { v[i] / r } else { d[i] / h };
            }
        }
        cv
    }

    fn volume_rule(&self) -> &RefRule {
        &self.rule
    }

    fn node_rule(&self) -> &RefRule {
        &self.node_rule
    }

    fn node_coords(&self, node: usize) -> [f64; 2] {
        [self.x[node], 0.0]
    }

    fn boundary_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.n_nodes()];
        *w.last_mut().unwrap() = 4.0 * PI;
        w
    }

    fn pinned(&self) -> Vec<Pinned> {
        vec![Pinned { node: 0, comp: 0 }]
    }

    fn constraints(&self) -> &[Constraint] {
        &[]
    }

    fn cell_vertices(&self, cell: usize) -> Vec<[f64; 2]> {
        let (a, b) = self.cell_bounds(cell);
        vec![[a, 0.0], [b, 0.0]]
    }
}

impl Adaptive<3> for Mesh1d {
    fn cell_birth(&self, cell: usize) -> u64 {
        self.tree[self.leaves[cell]].birth
    }

    fn has_parent(&self, cell: usize) -> bool {
        self.tree[self.leaves[cell]].parent.is_some()
    }

    fn adapt(&self, flags: &[CellFlag], stamp: u64, min_level: usize, max_level: usize) -> Self {
        assert_eq!(flags.len(), self.n_cells());
        let mut out = self.clone();
        let mut leaves = Vec::with_capacity(self.leaves.len() * 2);
        let mut merged = std::collections::HashSet::new();
        for (k, &leaf) in self.leaves.iter().enumerate() {
            let iv = &self.tree[leaf];
            match flags[k] {
                CellFlag::Refine if iv.level < max_level => {
                    leaves.extend(out.children_of(leaf, stamp));
                }
                CellFlag::Coarsen if iv.level > min_level => {
                    let parent = iv.parent.expect("level > 0 implies parent");
                    let [c0, c1] = self.tree[parent].children.unwrap();
                    let sibling = if c0 == leaf { c1 } else { c0 };
                    let sib_pos = self.leaves.iter().position(|&l| l == sibling);
                    let can = sib_pos.is_some_and(|s| flags[s] == CellFlag::Coarsen);
                    if can {
                        if merged.insert(parent) {
                            leaves.push(parent);
                        }
                    } else {
                        leaves.push(leaf);
                    }
                }
                _ => leaves.push(leaf),
            }
        }
        out.leaves = leaves;
        out.rebuild();
        out
    }

    fn transfer_scalar(&self, target: &Self, field: &[f64]) -> Vec<f64> {
        if target.leaves == self.leaves {
            return field.to_vec();
        }
        target.x.iter().map(|&r| self.evaluate(field, r)).collect()
    }
}
