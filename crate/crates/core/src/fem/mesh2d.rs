//! Quarter of the unit disk built from three quads: a center square and two
//! boundary quads blended to the arc. Leaves may differ by one level across
//! an edge; the fine-side edge nodes are constrained to the coarse edge.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_4;

use super::basis::Lagrange1d;
use super::quadrature::{gauss, RefRule};
use super::{Adaptive, CellFlag, CellValues, Constraint, Discretization, FemError, Pinned};

/// Finest representable level.
const MAXL: usize = 24;
const SPAN: i64 = 1 << MAXL;
/// Side of the center square.
const CORE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Arc {
    None,
    /// On the face xi = 1, angle increasing with eta.
    Right,
    /// On the face eta = 1, angle decreasing with xi.
    Top,
}

#[derive(Debug, Clone)]
struct Quad {
    mac: usize,
    level: usize,
    ix: i64,
    iy: i64,
    /// Corners at reference (0,0), (1,0), (1,1), (0,1).
    corners: [[f64; 2]; 4],
    arc: Arc,
    parent: Option<usize>,
    children: Option<[usize; 4]>,
    birth: u64,
}

impl Quad {
    fn size(&self) -> i64 {
        SPAN >> self.level
    }

    fn map(&self, xi: f64, eta: f64) -> [f64; 2] {
        let c = &self.corners;
        let w = [
            (1.0 - xi) * (1.0 - eta),
            xi * (1.0 - eta),
            xi * eta,
            (1.0 - xi) * eta,
        ];
        let mut x = [0.0; 2];
        for k in 0..4 {
            x[0] += w[k] * c[k][0];
            x[1] += w[k] * c[k][1];
        }
        let (from, to, t, blend) = match self.arc {
            Arc::None => return x,
            Arc::Right => (c[1], c[2], eta, xi),
            Arc::Top => (c[3], c[2], xi, eta),
        };
        let (t0, t1) = (from[1].atan2(from[0]), to[1].atan2(to[0]));
        let th = t0 + t * (t1 - t0);
        let chord = [from[0] + t * (to[0] - from[0]), from[1] + t * (to[1] - from[1])];
        x[0] += blend * (th.cos() - chord[0]);
        x[1] += blend * (th.sin() - chord[1]);
        x
    }
}

#[derive(Debug, Clone)]
pub struct QuarterDisk {
    basis: Lagrange1d,
    tree: Vec<Quad>,
    leaves: Vec<usize>,
    /// Leaf index per tree cell, `usize::MAX` when not a leaf.
    leaf_of: Vec<usize>,
    cell_nodes: Vec<Vec<usize>>,
    coords: Vec<[f64; 2]>,
    constraints: Vec<Constraint>,
    bweights: Vec<f64>,
    pinned: Vec<Pinned>,
    rule: RefRule,
    node_rule: RefRule,
}

fn canon(mac: usize, x: i64, y: i64) -> (i64, i64) {
    match mac {
        0 => (x, y),
        1 => (SPAN + x, y),
        _ if x == SPAN => (SPAN + y, SPAN),
        _ => (x, SPAN + y),
    }
}

/// Map a macro-local point just outside macro `mac` into its neighbour.
fn cross(mac: usize, x: i64, y: i64) -> Option<(usize, i64, i64)> {
    let inside = |v: i64| (0..SPAN).contains(&v);
    if inside(x) && inside(y) {
        return Some((mac, x, y));
    }
    match mac {
        0 if x >= SPAN => Some((1, x - SPAN, y)),
        0 if y >= SPAN => Some((2, x, y - SPAN)),
        1 if x < 0 => Some((0, x + SPAN, y)),
        1 if y >= SPAN => Some((2, SPAN - 1 - (y - SPAN), x)),
        2 if y < 0 => Some((0, x, y + SPAN)),
        2 if x >= SPAN => Some((1, y, SPAN - 1 - (x - SPAN))),
        _ => None,
    }
}

impl QuarterDisk {
    /// Uniform mesh with `levels` refinements of the macro patch.
    pub fn new(levels: usize, p: usize) -> Result<Self, FemError> {
        Self::with_quadrature(levels, p, 2 * p + 1)
    }

    pub fn with_quadrature(levels: usize, p: usize, nq: usize) -> Result<Self, FemError> {
        if !(1..=4).contains(&p) {
            return Err(FemError::InvalidOrder(p));
        }
        if levels > MAXL - 2 {
            return Err(FemError::InvalidSize(format!("levels {levels} exceeds {}", MAXL - 2)));
        }
        let (s, d) = (CORE, FRAC_PI_4.cos());
        let quad = |mac, corners, arc| Quad {
            mac,
            level: 0,
            ix: 0,
            iy: 0,
            corners,
            arc,
            parent: None,
            children: None,
            birth: 0,
        };
        let tree = vec![
            quad(0, [[0.0, 0.0], [s, 0.0], [s, s], [0.0, s]], Arc::None),
            quad(1, [[s, 0.0], [1.0, 0.0], [d, d], [s, s]], Arc::Right),
            quad(2, [[0.0, s], [s, s], [d, d], [0.0, 1.0]], Arc::Top),
        ];
        let basis = Lagrange1d::new(p);
        let mut node_rule = RefRule { points: Vec::new(), weights: Vec::new() };
        for &y in &basis.nodes {
            for &x in &basis.nodes {
                node_rule.points.push([x, y]);
                node_rule.weights.push(0.0);
            }
        }
        let mut m = Self {
            basis,
            tree,
            leaves: vec![0, 1, 2],
            leaf_of: Vec::new(),
            cell_nodes: Vec::new(),
            coords: Vec::new(),
            constraints: Vec::new(),
            bweights: Vec::new(),
            pinned: Vec::new(),
            rule: RefRule::tensor(&gauss(nq.max(1)), 2),
            node_rule,
        };
        m.index_leaves();
        for _ in 0..levels {
            let all: Vec<usize> = m.leaves.clone();
            for t in all {
                m.split(t, 0);
            }
        }
        m.rebuild();
        Ok(m)
    }

    fn index_leaves(&mut self) {
        self.leaf_of = vec![usize::MAX; self.tree.len()];
        for (k, &t) in self.leaves.iter().enumerate() {
            self.leaf_of[t] = k;
        }
    }

    fn is_leaf(&self, t: usize) -> bool {
        self.leaf_of.get(t).is_some_and(|&k| k != usize::MAX)
    }

    /// Replace leaf `t` by its four children.
    fn split(&mut self, t: usize, stamp: u64) {
        let ch = match self.tree[t].children {
            Some(ch) => {
                for c in ch {
                    self.tree[c].birth = stamp;
                }
                ch
            }
            None => {
                let q = self.tree[t].clone();
                let n = self.tree.len();
                for j in 0..2 {
                    for i in 0..2 {
                        let (a0, b0) = (0.5 * i as f64, 0.5 * j as f64);
                        let corners = [
                            q.map(a0, b0),
                            q.map(a0 + 0.5, b0),
                            q.map(a0 + 0.5, b0 + 0.5),
                            q.map(a0, b0 + 0.5),
                        ];
                        let arc = match q.arc {
                            Arc::Right if i == 1 => Arc::Right,
                            Arc::Top if j == 1 => Arc::Top,
                            _ => Arc::None,
                        };
                        self.tree.push(Quad {
                            mac: q.mac,
                            level: q.level + 1,
                            ix: 2 * q.ix + i as i64,
                            iy: 2 * q.iy + j as i64,
                            corners,
                            arc,
                            parent: Some(t),
                            children: None,
                            birth: stamp,
                        });
                    }
                }
                let ch = [n, n + 1, n + 2, n + 3];
                self.tree[t].children = Some(ch);
                ch
            }
        };
        self.leaf_of.resize(self.tree.len(), usize::MAX);
        let pos = self.leaf_of[t];
        self.leaf_of[t] = usize::MAX;
        self.leaves[pos] = ch[0];
        self.leaf_of[ch[0]] = pos;
        for &c in &ch[1..] {
            self.leaf_of[c] = self.leaves.len();
            self.leaves.push(c);
        }
    }

    /// Replace the four leaf children of `t` by `t`.
    fn merge(&mut self, t: usize) {
        let ch = self.tree[t].children.unwrap();
        let mut gone: Vec<usize> = ch.iter().map(|&c| self.leaf_of[c]).collect();
        gone.sort_unstable();
        for &pos in gone.iter().rev() {
            self.leaves.swap_remove(pos);
        }
        self.leaves.push(t);
        self.index_leaves();
    }

    /// Leaf containing the macro-local integer point.
    fn locate(&self, mac: usize, x: i64, y: i64) -> usize {
        let mut t = mac;
        while !self.is_leaf(t) {
            let q = &self.tree[t];
            let half = q.size() / 2;
            let i = (x - q.ix * q.size() >= half) as usize;
            let j = (y - q.iy * q.size() >= half) as usize;
            t = q.children.expect("non-leaf has children")[2 * j + i];
        }
        t
    }

    /// Leaf across face `f` (0 bottom, 1 right, 2 top, 3 left).
    fn neighbor(&self, t: usize, f: usize) -> Option<usize> {
        let q = &self.tree[t];
        let h = q.size();
        let (x0, y0) = (q.ix * h, q.iy * h);
        let (px, py) = match f {
            0 => (x0 + h / 2, y0 - 1),
            1 => (x0 + h, y0 + h / 2),
            2 => (x0 + h / 2, y0 + h),
            _ => (x0 - 1, y0 + h / 2),
        };
        cross(q.mac, px, py).map(|(m, x, y)| self.locate(m, x, y))
    }

    /// Local node indices along face `f` ordered by increasing reference coordinate.
    fn face_locals(&self, f: usize) -> Vec<usize> {
        let n = self.basis.len();
        let p = n - 1;
        (0..n)
            .map(|k| match f {
                0 => k,
                1 => k * n + p,
                2 => p * n + k,
                _ => k * n,
            })
            .collect()
    }

    fn rebuild(&mut self) {
        let n1 = self.basis.len();
        let p = n1 - 1;
        let mut verts: HashMap<(i64, i64), usize> = HashMap::new();
        let mut edges: HashMap<(usize, usize, usize), usize> = HashMap::new();
        self.coords.clear();
        self.cell_nodes.clear();
        for k in 0..self.leaves.len() {
            let q = self.tree[self.leaves[k]].clone();
            let h = q.size();
            let (x0, y0) = (q.ix * h, q.iy * h);
            let vkeys = [
                canon(q.mac, x0, y0),
                canon(q.mac, x0 + h, y0),
                canon(q.mac, x0 + h, y0 + h),
                canon(q.mac, x0, y0 + h),
            ];
            let mut vid = [0usize; 4];
            for c in 0..4 {
                vid[c] = *verts.entry(vkeys[c]).or_insert_with(|| {
                    self.coords.push(q.corners[c]);
                    self.coords.len() - 1
                });
            }
            let mut nodes = Vec::with_capacity(n1 * n1);
            for b in 0..n1 {
                for a in 0..n1 {
                    let corner = match (a, b) {
                        (0, 0) => Some(0),
                        (x, 0) if x == p => Some(1),
                        (x, y) if x == p && y == p => Some(2),
                        (0, y) if y == p => Some(3),
                        _ => None,
                    };
                    if let Some(c) = corner {
                        nodes.push(vid[c]);
                        continue;
                    }
                    let pos = q.map(self.basis.nodes[a], self.basis.nodes[b]);
                    let edge = if b == 0 {
                        Some((vid[0], vid[1], a))
                    } else if b == p {
                        Some((vid[3], vid[2], a))
                    } else if a == 0 {
                        Some((vid[0], vid[3], b))
                    } else if a == p {
                        Some((vid[1], vid[2], b))
                    } else {
                        None
                    };
                    let id = match edge {
                        Some((s, e, i)) => {
                            let key = if s < e { (s, e, i) } else { (e, s, p - i) };
                            *edges.entry(key).or_insert_with(|| {
                                self.coords.push(pos);
                                self.coords.len() - 1
                            })
                        }
                        None => {
                            self.coords.push(pos);
                            self.coords.len() - 1
                        }
                    };
                    nodes.push(id);
                }
            }
            self.cell_nodes.push(nodes);
        }
        self.build_constraints();
        self.build_boundary();
    }

    fn build_constraints(&mut self) {
        let mut cons: HashMap<usize, Vec<(usize, f64)>> = HashMap::new();
        for k in 0..self.leaves.len() {
            let t = self.leaves[k];
            for f in 0..4 {
                let Some(nb) = self.neighbor(t, f) else { continue };
                if self.tree[nb].level >= self.tree[t].level {
                    continue;
                }
                let nk = self.leaf_of[nb];
                let mine = self.face_locals(f);
                let a = self.coords[self.cell_nodes[k][mine[0]]];
                let b = self.coords[self.cell_nodes[k][*mine.last().unwrap()]];
                let probe = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                // Coarse face containing this fine face.
                let mut best = (f64::INFINITY, 0, 0.0);
                for g in 0..4 {
                    let theirs = self.face_locals(g);
                    let p0 = self.coords[self.cell_nodes[nk][theirs[0]]];
                    let p1 = self.coords[self.cell_nodes[nk][*theirs.last().unwrap()]];
                    let (s, dist) = project(probe, p0, p1);
                    if (0.0..=1.0).contains(&s) && dist < best.0 {
                        best = (dist, g, s);
                    }
                }
                let theirs = self.face_locals(best.1);
                let masters: Vec<usize> = theirs.iter().map(|&l| self.cell_nodes[nk][l]).collect();
                let p0 = self.coords[masters[0]];
                let p1 = self.coords[*masters.last().unwrap()];
                for &l in &mine {
                    let node = self.cell_nodes[k][l];
                    if masters.contains(&node) || cons.contains_key(&node) {
                        continue;
                    }
                    let (s, _) = project(self.coords[node], p0, p1);
                    let w = self.basis.values(s);
                    let list = masters
                        .iter()
                        .zip(w)
                        .filter(|(_, w)| w.abs() > 1e-15)
                        .map(|(&m, w)| (m, w))
                        .collect();
                    cons.insert(node, list);
                }
            }
        }
        // Resolve chains where a master is itself constrained.
        let keys: Vec<usize> = cons.keys().copied().collect();
        loop {
            let mut changed = false;
            for &node in &keys {
                let list = cons[&node].clone();
                if !list.iter().any(|(m, _)| cons.contains_key(m)) {
                    continue;
                }
                let mut acc: HashMap<usize, f64> = HashMap::new();
                for (m, w) in list {
                    match cons.get(&m) {
                        Some(sub) => {
                            for &(mm, ww) in sub {
                                *acc.entry(mm).or_default() += w * ww;
                            }
                        }
                        None => *acc.entry(m).or_default() += w,
                    }
                }
                let mut v: Vec<(usize, f64)> = acc.into_iter().collect();
                v.sort_by_key(|e| e.0);
                cons.insert(node, v);
                changed = true;
            }
            if !changed {
                break;
            }
        }
        let mut list: Vec<Constraint> = cons
            .into_iter()
            .map(|(node, masters)| Constraint { node, masters })
            .collect();
        list.sort_by_key(|c| c.node);
        self.constraints = list;
    }

    fn build_boundary(&mut self) {
        let n1 = self.basis.len();
        let mut w = vec![0.0; self.coords.len()];
        let mut pinned = Vec::new();
        let mut v = vec![0.0; n1];
        let mut d = vec![0.0; n1];
        for k in 0..self.leaves.len() {
            let q = &self.tree[self.leaves[k]];
            let arc_face = match q.arc {
                Arc::Right => Some(1),
                Arc::Top => Some(2),
                Arc::None => None,
            };
            if let Some(f) = arc_face {
                let locals = self.face_locals(f);
                let pts: Vec<[f64; 2]> =
                    locals.iter().map(|&l| self.coords[self.cell_nodes[k][l]]).collect();
                for (i, &l) in locals.iter().enumerate() {
                    self.basis.eval(self.basis.nodes[i], &mut v, &mut d);
                    let mut tx = [0.0; 2];
                    for (j, pj) in pts.iter().enumerate() {
                        tx[0] += d[j] * pj[0];
                        tx[1] += d[j] * pj[1];
                    }
                    let len = (tx[0] * tx[0] + tx[1] * tx[1]).sqrt();
                    w[self.cell_nodes[k][l]] += self.basis.lobatto.weights[i] * len;
                }
            }
            // Symmetry lines: y = 0 (bottom of center and right quads), x = 0
            // (left of center and top quads).
            if q.iy == 0 && q.mac != 2 {
                for l in self.face_locals(0) {
                    pinned.push(Pinned { node: self.cell_nodes[k][l], comp: 1 });
                }
            }
            if q.ix == 0 && q.mac != 1 {
                for l in self.face_locals(3) {
                    pinned.push(Pinned { node: self.cell_nodes[k][l], comp: 0 });
                }
            }
        }
        pinned.sort_by_key(|p| (p.node, p.comp));
        pinned.dedup();
        self.bweights = w;
        self.pinned = pinned;
    }

    fn shape(&self, xi: f64, eta: f64, n: &mut [f64], dxi: &mut [f64], deta: &mut [f64]) {
        let n1 = self.basis.len();
        let mut va = vec![0.0; n1];
        let mut da = vec![0.0; n1];
        let mut vb = vec![0.0; n1];
        let mut db = vec![0.0; n1];
        self.basis.eval(xi, &mut va, &mut da);
        self.basis.eval(eta, &mut vb, &mut db);
        for b in 0..n1 {
            for a in 0..n1 {
                let l = b * n1 + a;
                n[l] = va[a] * vb[b];
                dxi[l] = da[a] * vb[b];
                deta[l] = va[a] * db[b];
            }
        }
    }

    /// Isoparametric position and Jacobian of leaf `k`.
    fn geometry(&self, k: usize, xi: f64, eta: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        let nl = self.basis.len().pow(2);
        let (mut n, mut dx, mut dy) = (vec![0.0; nl], vec![0.0; nl], vec![0.0; nl]);
        self.shape(xi, eta, &mut n, &mut dx, &mut dy);
        let mut x = [0.0; 2];
        let mut j = [[0.0; 2]; 2];
        for (l, &node) in self.cell_nodes[k].iter().enumerate() {
            let c = self.coords[node];
            for r in 0..2 {
                x[r] += n[l] * c[r];
                j[r][0] += dx[l] * c[r];
                j[r][1] += dy[l] * c[r];
            }
        }
        (x, j)
    }

    /// Reference coordinates of physical point `x` in leaf `k` by Newton.
    fn invert(&self, k: usize, x: [f64; 2], mut r: [f64; 2]) -> [f64; 2] {
        for _ in 0..30 {
            let (y, j) = self.geometry(k, r[0], r[1]);
            let res = [y[0] - x[0], y[1] - x[1]];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            let d0 = (j[1][1] * res[0] - j[0][1] * res[1]) / det;
            let d1 = (-j[1][0] * res[0] + j[0][0] * res[1]) / det;
            r[0] -= d0;
            r[1] -= d1;
            if d0.abs() + d1.abs() < 1e-15 {
                break;
            }
        }
        r
    }

    pub fn evaluate_in(&self, k: usize, field: &[f64], r: [f64; 2]) -> f64 {
        let nl = self.basis.len().pow(2);
        let (mut n, mut dx, mut dy) = (vec![0.0; nl], vec![0.0; nl], vec![0.0; nl]);
        self.shape(r[0], r[1], &mut n, &mut dx, &mut dy);
        self.cell_nodes[k].iter().zip(&n).map(|(&i, v)| field[i] * v).sum()
    }

    /// Evaluate a nodal field at the physical point with macro-local
    /// reference position `(mac, lx, ly)` as search hint.
    fn evaluate_at(&self, field: &[f64], x: [f64; 2], mac: usize, lx: f64, ly: f64) -> f64 {
        let clamp = |v: f64| (v.max(0.0) as i64).min(SPAN - 1);
        let mut t = self.locate(mac, clamp(lx), clamp(ly));
        let q = &self.tree[t];
        let h = q.size() as f64;
        let mut guess = [
            ((lx - (q.ix as f64) * h) / h).clamp(0.0, 1.0),
            ((ly - (q.iy as f64) * h) / h).clamp(0.0, 1.0),
        ];
        let tol = 1e-10;
        let mut best: Option<(f64, usize, [f64; 2])> = None;
        for _ in 0..4 {
            let k = self.leaf_of[t];
            let r = self.invert(k, x, guess);
            let out = [
                (-r[0]).max(r[0] - 1.0).max(0.0),
                (-r[1]).max(r[1] - 1.0).max(0.0),
            ];
            let viol = out[0].max(out[1]);
            if best.as_ref().is_none_or(|b| viol < b.0) {
                best = Some((viol, k, r));
            }
            if viol <= tol {
                break;
            }
            let face = if out[0] >= out[1] {
                if r[0] > 1.0 { 1 } else { 3 }
            } else if r[1] > 1.0 {
                2
            } else {
                0
            };
            match self.neighbor(t, face) {
                Some(nb) => {
                    t = nb;
                    guess = [0.5, 0.5];
                }
                None => break,
            }
        }
        let (viol, k, mut r) = best.unwrap();
        if viol > 1e-3 {
            r = [r[0].clamp(0.0, 1.0), r[1].clamp(0.0, 1.0)];
        }
        self.evaluate_in(k, field, r)
    }

    pub fn coordinates(&self) -> &[[f64; 2]] {
        &self.coords
    }

    /// Macro-patch id of a cell: 0 center, 1 right, 2 top.
    pub fn cell_macro(&self, cell: usize) -> usize {
        self.tree[self.leaves[cell]].mac
    }
}

/// Parameter of the projection of `x` onto segment `p0 -> p1` and its distance.
fn project(x: [f64; 2], p0: [f64; 2], p1: [f64; 2]) -> (f64, f64) {
    let e = [p1[0] - p0[0], p1[1] - p0[1]];
    let l2 = e[0] * e[0] + e[1] * e[1];
    let s = ((x[0] - p0[0]) * e[0] + (x[1] - p0[1]) * e[1]) / l2;
    let q = [p0[0] + s * e[0] - x[0], p0[1] + s * e[1] - x[1]];
    (s, (q[0] * q[0] + q[1] * q[1]).sqrt())
}

impl Discretization<2> for QuarterDisk {
    fn sdim(&self) -> usize {
        2
    }

    fn ncomp(&self) -> usize {
        2
    }

    fn order(&self) -> usize {
        self.basis.order
    }

    fn n_nodes(&self) -> usize {
        self.coords.len()
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

    fn cell_values(&self, cell: usize, rule: &RefRule) -> CellValues<2> {
        let nl = self.basis.len().pow(2);
        let nq = rule.len();
        let mut cv = CellValues {
            nloc: nl,
            nq,
            jxw: Vec::with_capacity(nq),
            dx: Vec::with_capacity(nq),
            phi: vec![0.0; nq * nl],
            grad: vec![[0.0; 2]; nq * nl],
            hoop: Vec::new(),
            x: Vec::with_capacity(nq),
        };
        let (mut n, mut dxi, mut deta) = (vec![0.0; nl], vec![0.0; nl], vec![0.0; nl]);
        let nodes = &self.cell_nodes[cell];
        for (q, (pt, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            self.shape(pt[0], pt[1], &mut n, &mut dxi, &mut deta);
            let mut x = [0.0; 2];
            let mut j = [[0.0; 2]; 2];
            for l in 0..nl {
                let c = self.coords[nodes[l]];
                for r in 0..2 {
                    x[r] += n[l] * c[r];
                    j[r][0] += dxi[l] * c[r];
                    j[r][1] += deta[l] * c[r];
                }
            }
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            let inv = [
                [j[1][1] / det, -j[0][1] / det],
                [-j[1][0] / det, j[0][0] / det],
            ];
            cv.jxw.push(det * w);
            cv.dx.push(det * w);
            cv.x.push(x);
            for l in 0..nl {
                let k = q * nl + l;
                cv.phi[k] = n[l];
                cv.grad[k] = [
                    dxi[l] * inv[0][0] + deta[l] * inv[1][0],
                    dxi[l] * inv[0][1] + deta[l] * inv[1][1],
                ];
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
        self.coords[node]
    }

    fn boundary_weights(&self) -> Vec<f64> {
        self.bweights.clone()
    }

    fn pinned(&self) -> Vec<Pinned> {
        self.pinned.clone()
    }

    fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    fn cell_vertices(&self, cell: usize) -> Vec<[f64; 2]> {
        self.tree[self.leaves[cell]].corners.to_vec()
    }
}

impl Adaptive<2> for QuarterDisk {
    fn cell_birth(&self, cell: usize) -> u64 {
        self.tree[self.leaves[cell]].birth
    }

    fn has_parent(&self, cell: usize) -> bool {
        self.tree[self.leaves[cell]].parent.is_some()
    }

    fn adapt(&self, flags: &[CellFlag], stamp: u64, min_level: usize, max_level: usize) -> Self {
        assert_eq!(flags.len(), self.n_cells());
        let max_level = max_level.min(MAXL - 2);
        let mut out = self.clone();

        // Coarsen parents whose four children are all flagged and whose
        // outer neighbours are at most one level finer than the children.
        let mut parents: Vec<usize> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (k, &t) in self.leaves.iter().enumerate() {
            if flags[k] != CellFlag::Coarsen {
                continue;
            }
            let Some(par) = self.tree[t].parent else { continue };
            if self.tree[par].level < min_level || !seen.insert(par) {
                continue;
            }
            let ch = self.tree[par].children.unwrap();
            let all = ch.iter().all(|&c| {
                self.is_leaf(c) && flags[self.leaf_of[c]] == CellFlag::Coarsen
            });
            if !all {
                continue;
            }
            let level = self.tree[t].level;
            let balanced = ch.iter().enumerate().all(|(idx, &c)| {
                let (i, j) = (idx % 2, idx / 2);
                let outer = [j == 0, i == 1, j == 1, i == 0];
                (0..4).all(|f| {
                    !outer[f]
                        || self
                            .neighbor(c, f)
                            .is_none_or(|nb| self.tree[nb].level <= level)
                })
            });
            if balanced {
                parents.push(par);
            }
        }
        for &par in &parents {
            out.merge(par);
        }

        let mut queue: Vec<usize> = self
            .leaves
            .iter()
            .enumerate()
            .filter(|&(k, &t)| flags[k] == CellFlag::Refine && self.tree[t].level < max_level)
            .map(|(_, &t)| t)
            .filter(|&t| out.is_leaf(t))
            .collect();
        loop {
            for &t in &queue {
                if out.is_leaf(t) {
                    out.split(t, stamp);
                }
            }
            queue.clear();
            for &t in &out.leaves {
                for f in 0..4 {
                    if let Some(nb) = out.neighbor(t, f) {
                        if out.tree[nb].level + 1 < out.tree[t].level {
                            queue.push(nb);
                        }
                    }
                }
            }
            if queue.is_empty() {
                break;
            }
            queue.sort_unstable();
            queue.dedup();
        }
        out.rebuild();
        out
    }

    fn transfer_scalar(&self, target: &Self, field: &[f64]) -> Vec<f64> {
        if target.leaves == self.leaves {
            return field.to_vec();
        }
        let n1 = target.basis.len();
        let mut out = vec![f64::NAN; target.n_nodes()];
        for (k, &t) in target.leaves.iter().enumerate() {
            let q = &target.tree[t];
            let h = q.size() as f64;
            for (l, &node) in target.cell_nodes[k].iter().enumerate() {
                if !out[node].is_nan() {
                    continue;
                }
                let (a, b) = (l % n1, l / n1);
                let lx = q.ix as f64 * h + target.basis.nodes[a] * h;
                let ly = q.iy as f64 * h + target.basis.nodes[b] * h;
                out[node] = self.evaluate_at(field, target.coords[node], q.mac, lx, ly);
            }
        }
        out
    }
}
