//! Meshes, Lagrange spaces, quadrature and solution transfer.

pub mod basis;
pub mod mesh1d;
pub mod mesh2d;
pub mod quadrature;

use crate::material::Mat;
use quadrature::RefRule;
use thiserror::Error;

pub use mesh1d::Mesh1d;
pub use mesh2d::QuarterDisk;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("basis order {0} not in 1..=4")]
    InvalidOrder(usize),
    #[error("invalid mesh size: {0}")]
    InvalidSize(String),
}

/// Per-cell adaptation request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellFlag {
    Keep,
    Refine,
    Coarsen,
}

/// `x[node] = sum w * x[master]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub node: usize,
    pub masters: Vec<(usize, f64)>,
}

/// Displacement component pinned to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pinned {
    pub node: usize,
    pub comp: usize,
}

/// Basis data of one cell at a set of reference points.
#[derive(Debug, Clone)]
pub struct CellValues<const D: usize> {
    pub nloc: usize,
    pub nq: usize,
    /// Integration weight including the spherical factor.
    pub jxw: Vec<f64>,
    /// Plain length/area weight.
    pub dx: Vec<f64>,
    pub phi: Vec<f64>,
    /// Physical gradient; second entry unused in 1D.
    pub grad: Vec<[f64; 2]>,
    /// 1D only: hoop strain factor `phi / r` (its limit `phi'` at r = 0).
    pub hoop: Vec<f64>,
    pub x: Vec<[f64; 2]>,
}

impl<const D: usize> CellValues<D> {
    #[inline]
    pub fn idx(&self, q: usize, i: usize) -> usize {
        q * self.nloc + i
    }

    /// Nonzero entries `(row, col, value)` of the displacement gradient of the
    /// basis function of local node `i`, component `comp`.
    #[inline]
    pub fn disp_entries(&self, q: usize, i: usize, comp: usize) -> [(usize, usize, f64); 3] {
        let k = self.idx(q, i);
        if D == 3 {
            let h = self.hoop[k];
            [(0, 0, self.grad[k][0]), (1, 1, h), (2, 2, h)]
        } else {
            [(comp, 0, self.grad[k][0]), (comp, 1, self.grad[k][1]), (0, 0, 0.0)]
        }
    }

    /// Displacement gradient at point q; `u(i, comp)` yields local coefficients.
    pub fn grad_u(&self, q: usize, ncomp: usize, u: impl Fn(usize, usize) -> f64) -> Mat<D> {
        let mut g = Mat::<D>::zeros();
        for i in 0..self.nloc {
            for comp in 0..ncomp {
                let val = u(i, comp);
                if val == 0.0 {
                    continue;
                }
                for (r, c, v) in self.disp_entries(q, i, comp) {
                    g[(r, c)] += v * val;
                }
            }
        }
        g
    }

    pub fn value(&self, q: usize, f: impl Fn(usize) -> f64) -> f64 {
        (0..self.nloc).map(|i| self.phi[self.idx(q, i)] * f(i)).sum()
    }

    pub fn gradient(&self, q: usize, f: impl Fn(usize) -> f64) -> [f64; 2] {
        let mut g = [0.0; 2];
        for i in 0..self.nloc {
            let v = f(i);
            let gi = self.grad[self.idx(q, i)];
            g[0] += gi[0] * v;
            g[1] += gi[1] * v;
        }
        g
    }
}

/// A finite-element space of continuous Lagrange elements with `D x D`
/// kinematics. Unknowns are interleaved per node as `[c, mu, u_0, .., u_{m-1}]`.
pub trait Discretization<const D: usize>: Sync + Send {
    /// Geometric dimension of the mesh (1 or 2).
    fn sdim(&self) -> usize;
    /// Number of displacement components per node.
    fn ncomp(&self) -> usize;
    fn order(&self) -> usize;
    fn n_nodes(&self) -> usize;
    fn n_cells(&self) -> usize;
    fn cell_nodes(&self, cell: usize) -> &[usize];
    fn cell_level(&self, cell: usize) -> usize;
    fn cell_values(&self, cell: usize, rule: &RefRule) -> CellValues<D>;
    /// Volume quadrature on the reference cell.
    fn volume_rule(&self) -> &RefRule;
    /// Reference coordinates of the local nodes.
    fn node_rule(&self) -> &RefRule;
    fn node_coords(&self, node: usize) -> [f64; 2];
    /// Lumped (Lobatto) integral of each nodal basis function over the
    /// external boundary, before constraint condensation.
    fn boundary_weights(&self) -> Vec<f64>;
    fn pinned(&self) -> Vec<Pinned>;
    fn constraints(&self) -> &[Constraint];
    /// Reference corner points for mesh export.
    fn cell_vertices(&self, cell: usize) -> Vec<[f64; 2]>;

    fn fields(&self) -> usize {
        2 + self.ncomp()
    }

    fn n_dofs(&self) -> usize {
        self.n_nodes() * self.fields()
    }

    /// Total volume with the problem's measure (spherical in 1D).
    fn volume(&self) -> f64 {
        (0..self.n_cells())
            .map(|k| self.cell_values(k, self.volume_rule()).jxw.iter().sum::<f64>())
            .sum()
    }

    fn boundary_measure(&self) -> f64 {
        self.boundary_weights().iter().sum()
    }

    /// Apply constraints to an interleaved vector so slave values
    /// interpolate their masters.
    fn distribute(&self, y: &mut [f64]) {
        let nf = self.fields();
        for con in self.constraints() {
            for f in 0..nf {
                let v: f64 = con.masters.iter().map(|&(m, w)| w * y[m * nf + f]).sum();
                y[con.node * nf + f] = v;
            }
        }
    }
}

/// Meshes that can refine/coarsen and move nodal fields between snapshots.
pub trait Adaptive<const D: usize>: Discretization<D> + Sized + Clone {
    /// Step stamp at which the cell was created by refinement.
    fn cell_birth(&self, cell: usize) -> u64;
    /// Whether the cell's parent exists (coarsening is possible).
    fn has_parent(&self, cell: usize) -> bool;
    fn adapt(&self, flags: &[CellFlag], stamp: u64, min_level: usize, max_level: usize) -> Self;
    /// Interpolate a nodal scalar field (length `n_nodes`) onto `target`.
    fn transfer_scalar(&self, target: &Self, field: &[f64]) -> Vec<f64>;

    /// Transfer an interleaved unknown vector and re-impose constraints.
    fn transfer(&self, target: &Self, y: &[f64]) -> Vec<f64> {
        let nf = self.fields();
        let n_old = self.n_nodes();
        let n_new = target.n_nodes();
        let mut out = vec![0.0; n_new * nf];
        for f in 0..nf {
            let comp: Vec<f64> = (0..n_old).map(|i| y[i * nf + f]).collect();
            let t = self.transfer_scalar(target, &comp);
            for (i, v) in t.into_iter().enumerate() {
                out[i * nf + f] = v;
            }
        }
        target.distribute(&mut out);
        out
    }
}
