//! Gradient-recovery error indicators, maximal-strategy marking and the
//! mixed space/time acceptance rule.

use rayon::prelude::*;

use crate::assembly::{C, U};
use crate::fem::{Adaptive, CellFlag, Discretization};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptivitySettings {
    pub rtol_x: f64,
    pub atol_x: f64,
    pub theta_c: f64,
    pub theta_r: f64,
    pub min_level: usize,
    pub max_level: usize,
    /// Spatial redos allowed per time step.
    pub max_space_redos: usize,
    /// Steps a freshly refined cell is protected from coarsening.
    pub cooldown: u64,
}

impl AdaptivitySettings {
    pub fn one_d() -> Self {
        Self {
            rtol_x: 1e-5,
            atol_x: 1e-8,
            theta_c: 0.05,
            theta_r: 0.5,
            min_level: 0,
            max_level: 12,
            max_space_redos: 3,
            cooldown: 1,
        }
    }

    pub fn two_d() -> Self {
        Self {
            rtol_x: 4e-5,
            atol_x: 4e-8,
            theta_c: 0.005,
            max_level: 6,
            ..Self::one_d()
        }
    }
}

/// Per-cell indicators with the norm of the recovered gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub eta: Vec<f64>,
    pub recovered_norm: f64,
}

impl Estimate {
    pub fn total(&self) -> f64 {
        self.eta.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    pub fn max(&self) -> f64 {
        self.eta.iter().fold(0.0, |m: f64, &e| m.max(e))
    }

    /// Weighted spatial error; `<= 1` passes.
    pub fn weighted(&self, s: &AdaptivitySettings) -> f64 {
        self.total() / (s.atol_x + s.rtol_x * self.recovered_norm)
    }
}

/// Gradient recovery estimator. Fields are `c` and every displacement
/// component. The recovered gradient is the plain nodal average of the
/// finite-element gradients of the adjacent cells, interpolated with the
/// same basis. `eta_K` is the L2 norm over `K` of the
/// difference between recovered and raw gradients.
pub fn estimate<M: Discretization<D>, const D: usize>(mesh: &M, y: &[f64]) -> Estimate {
    let nf = mesh.fields();
    let fields: Vec<usize> = std::iter::once(C).chain((0..mesh.ncomp()).map(|k| U + k)).collect();
    let sd = mesh.sdim();
    let nn = mesh.n_nodes();
    let ng = fields.len() * sd;
    let per_cell: Vec<Vec<f64>> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|cell| {
            let nodes = mesh.cell_nodes(cell);
            let cv = mesh.cell_values(cell, mesh.node_rule());
            let mut g = vec![0.0; cv.nq * ng];
            for q in 0..cv.nq {
                for (fi, &f) in fields.iter().enumerate() {
                    let gr = cv.gradient(q, |i| y[nodes[i] * nf + f]);
                    for d in 0..sd {
                        g[q * ng + fi * sd + d] = gr[d];
                    }
                }
            }
            g
        })
        .collect();
    let mut rec = vec![0.0; nn * ng];
    let mut wsum = vec![0.0; nn];
    for (cell, g) in per_cell.iter().enumerate() {
        for (q, &node) in mesh.cell_nodes(cell).iter().enumerate() {
            wsum[node] += 1.0;
            for j in 0..ng {
                rec[node * ng + j] += g[q * ng + j];
            }
        }
    }
    for (node, w) in wsum.iter().enumerate() {
        if *w > 0.0 {
            for j in 0..ng {
                rec[node * ng + j] /= w;
            }
        }
    }
    let out: Vec<(f64, f64)> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|cell| {
            let nodes = mesh.cell_nodes(cell);
            let cv = mesh.cell_values(cell, mesh.volume_rule());
            let (mut e2, mut r2) = (0.0, 0.0);
            for q in 0..cv.nq {
                for (fi, &f) in fields.iter().enumerate() {
                    let gr = cv.gradient(q, |i| y[nodes[i] * nf + f]);
                    for d in 0..sd {
                        let gq = cv.value(q, |i| rec[nodes[i] * ng + fi * sd + d]);
                        e2 += cv.dx[q] * (gq - gr[d]).powi(2);
                        r2 += cv.dx[q] * gq * gq;
                    }
                }
            }
            (e2.sqrt(), r2)
        })
        .collect();
    Estimate {
        eta: out.iter().map(|o| o.0).collect(),
        recovered_norm: out.iter().map(|o| o.1).sum::<f64>().sqrt(),
    }
}

/// Maximal strategy: refine iff `eta >= theta_r max`, coarsen iff
/// `eta <= theta_c max`.
pub fn mark_cells(eta: &[f64], theta_c: f64, theta_r: f64) -> Vec<CellFlag> {
    let m = eta.iter().fold(0.0f64, |m, &e| m.max(e));
    eta.iter()
        .map(|&e| {
            if m <= 0.0 {
                CellFlag::Keep
            } else if e >= theta_r * m {
                CellFlag::Refine
            } else if e <= theta_c * m {
                CellFlag::Coarsen
            } else {
                CellFlag::Keep
            }
        })
        .collect()
}

/// Enforce level bounds and the coarsening cooldown at step `stamp`.
pub fn restrict_flags<M: Adaptive<D>, const D: usize>(
    mesh: &M,
    flags: &mut [CellFlag],
    stamp: u64,
    s: &AdaptivitySettings,
) {
    for (cell, f) in flags.iter_mut().enumerate() {
        let level = mesh.cell_level(cell);
        match *f {
            CellFlag::Refine if level >= s.max_level => *f = CellFlag::Keep,
            CellFlag::Coarsen
                if level <= s.min_level
                    || !mesh.has_parent(cell)
                    || mesh.cell_birth(cell) + s.cooldown >= stamp =>
            {
                *f = CellFlag::Keep
            }
            _ => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    AcceptBoth,
    RedoTime,
    RedoSpace,
}

/// Temporal failure takes precedence; a spatial failure alone triggers
/// adaptation and a redo at the same step size.
pub fn mixed_accept(est_t: f64, est_x: f64) -> Decision {
    if est_t > 1.0 {
        Decision::RedoTime
    } else if est_x > 1.0 {
        Decision::RedoSpace
    } else {
        Decision::AcceptBoth
    }
}
