//! Right-hand side `f(y)` of the DAE `M y' = f(y)`, its Jacobian, and the
//! singular mass matrix.
//!
//! Rows per node: `c` carries `-K_m mu + s N_ext`, `mu` carries
//! `-M mu + Psi(c, grad u)`, each displacement component carries the weak
//! elastic form `int P : grad xi`. Hanging-node slaves are condensed into
//! their masters; their own rows are left zero and later replaced by the
//! constraint equation.

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::fem::{CellValues, Discretization};
use crate::material::{Mat, Material, MaterialError};
use crate::sparse::{Csr, Pattern};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("cell {cell}: {source}")]
pub struct AssemblyError {
    pub cell: usize,
    #[source]
    pub source: MaterialError,
}

pub const C: usize = 0;
pub const MU: usize = 1;
pub const U: usize = 2;

/// Index sets that replace rows of the iteration matrix by identity rows.
#[derive(Debug, Clone, Default)]
pub struct RowReplacement {
    pub identity: Vec<usize>,
}

pub struct Assembler<'a, M: Discretization<D>, const D: usize> {
    pub mesh: &'a M,
    pub material: Material,
    /// Dimensionless boundary flux magnitude.
    pub n_ext: f64,
    nf: usize,
    slave: Vec<Option<usize>>,
    pub pattern: Arc<Pattern>,
    mass: Csr,
    flux: Vec<f64>,
    volume: f64,
}

struct Local {
    dofs: Vec<usize>,
    f: Vec<f64>,
    jac: Vec<f64>,
}

impl<'a, M: Discretization<D>, const D: usize> Assembler<'a, M, D> {
    /// Flux magnitude defaults to `|Omega_h| / |Gamma_h|` (unit SOC rate).
    pub fn new(mesh: &'a M, material: Material) -> Self {
        let nf = mesh.fields();
        let mut slave = vec![None; mesh.n_nodes()];
        for (k, c) in mesh.constraints().iter().enumerate() {
            slave[c.node] = Some(k);
        }
        let mut this = Self {
            mesh,
            material,
            n_ext: 0.0,
            nf,
            slave,
            pattern: Arc::new(Pattern::from_rows(Vec::new())),
            mass: Csr::zeros(Arc::new(Pattern::from_rows(Vec::new()))),
            flux: Vec::new(),
            volume: 0.0,
        };
        this.pattern = Arc::new(this.build_pattern());
        this.flux = this.condense_nodal(&mesh.boundary_weights());
        this.mass = this.build_mass();
        this.volume = this.mass.vals.iter().sum();
        let area: f64 = this.flux.iter().sum();
        this.n_ext = this.volume / area;
        this
    }

    pub fn with_flux(mut self, n_ext: f64) -> Self {
        self.n_ext = n_ext;
        self
    }

    pub fn fields(&self) -> usize {
        self.nf
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.n_nodes() * self.nf
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Condensed boundary weights `int_Gamma phi_i dS` per node.
    pub fn boundary_weights(&self) -> &[f64] {
        &self.flux
    }

    pub fn is_slave(&self, node: usize) -> bool {
        self.slave[node].is_some()
    }

    /// Masters of a node with weights; a free node maps to itself.
    pub fn expand(&self, node: usize) -> Vec<(usize, f64)> {
        match self.slave[node] {
            Some(k) => self.mesh.constraints()[k].masters.clone(),
            None => vec![(node, 1.0)],
        }
    }

    /// Redistribute a nodal load vector from slaves to masters.
    pub fn condense_nodal(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        for c in self.mesh.constraints() {
            let x = out[c.node];
            out[c.node] = 0.0;
            for &(m, w) in &c.masters {
                out[m] += w * x;
            }
        }
        out
    }

    fn build_pattern(&self) -> Pattern {
        let nf = self.nf;
        let n = self.n_dofs();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for cell in 0..self.mesh.n_cells() {
            let mut nodes: Vec<usize> = Vec::new();
            for &nd in self.mesh.cell_nodes(cell) {
                nodes.extend(self.expand(nd).into_iter().map(|e| e.0));
            }
            nodes.sort_unstable();
            nodes.dedup();
            for &a in &nodes {
                for fa in 0..nf {
                    let row = &mut rows[a * nf + fa];
                    for &b in &nodes {
                        row.extend((0..nf).map(|fb| b * nf + fb));
                    }
                }
            }
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row.push(i);
        }
        for c in self.mesh.constraints() {
            for f in 0..nf {
                let row = &mut rows[c.node * nf + f];
                row.extend(c.masters.iter().map(|&(m, _)| m * nf + f));
            }
        }
        Pattern::from_rows(rows)
    }

    fn build_mass(&self) -> Csr {
        let nf = self.nf;
        let mut m = Csr::zeros(self.pattern.clone());
        for cell in 0..self.mesh.n_cells() {
            let cv = self.mesh.cell_values(cell, self.mesh.volume_rule());
            let nodes = self.mesh.cell_nodes(cell);
            for q in 0..cv.nq {
                for i in 0..cv.nloc {
                    let wi = cv.jxw[q] * cv.phi[cv.idx(q, i)];
                    for j in i..cv.nloc {
                        let v = wi * cv.phi[cv.idx(q, j)];
                        for (a, wa) in self.expand(nodes[i]) {
                            for (b, wb) in self.expand(nodes[j]) {
                                m.add(a * nf + C, b * nf + C, wa * wb * v);
                                if i != j {
                                    m.add(b * nf + C, a * nf + C, wa * wb * v);
                                }
                            }
                        }
                    }
                }
            }
        }
        m
    }

    /// Mass matrix restricted to the concentration block (full dof indexing).
    pub fn mass(&self) -> &Csr {
        &self.mass
    }

    pub fn mass_apply(&self, v: &[f64]) -> Vec<f64> {
        self.mass.matvec(v)
    }

    /// Volume-averaged concentration.
    pub fn soc(&self, y: &[f64]) -> f64 {
        let mc = self.mass.matvec(y);
        mc.iter().step_by(self.nf).sum::<f64>() / self.volume
    }

    /// Boundary flux vector on the concentration rows.
    pub fn flux_vector(&self, flux_sign: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.n_dofs()];
        for (node, w) in self.flux.iter().enumerate() {
            v[node * self.nf + C] = flux_sign * self.n_ext * w;
        }
        v
    }

    fn local(&self, cell: usize, y: &[f64], with_jac: bool) -> Result<Local, AssemblyError> {
        let nf = self.nf;
        let ncomp = nf - 2;
        let nodes = self.mesh.cell_nodes(cell);
        let cv: CellValues<D> = self.mesh.cell_values(cell, self.mesh.volume_rule());
        let nl = cv.nloc;
        let nd = nl * nf;
        let mut f = vec![0.0; nd];
        let mut jac = if with_jac { vec![0.0; nd * nd] } else { Vec::new() };
        let val = |i: usize, fld: usize| y[nodes[i] * nf + fld];
        let mut ents_u: Vec<[(usize, usize, f64); 3]> = vec![[(0, 0, 0.0); 3]; nl * ncomp];
        let mut t_u: Vec<Mat<D>> = vec![Mat::<D>::zeros(); nl * ncomp];
        for q in 0..cv.nq {
            let w = cv.jxw[q];
            let c = cv.value(q, |i| val(i, C));
            let mu = cv.value(q, |i| val(i, MU));
            let gmu = cv.gradient(q, |i| val(i, MU));
            let gu = cv.grad_u(q, ncomp, |i, k| val(i, U + k));
            let ev = self
                .material
                .evaluate::<D>(c, &gu)
                .map_err(|source| AssemblyError { cell, source })?;
            for i in 0..nl {
                let k = cv.idx(q, i);
                let (phi, g) = (cv.phi[k], cv.grad[k]);
                let gdot = g[0] * gmu[0] + g[1] * gmu[1];
                f[i * nf + C] -= w * ev.mob * gdot;
                f[i * nf + MU] += w * (ev.mu - mu) * phi;
                for comp in 0..ncomp {
                    let e = cv.disp_entries(q, i, comp);
                    let mut s = 0.0;
                    for &(r, cc, v) in &e {
                        s += ev.p[(r, cc)] * v;
                    }
                    f[i * nf + U + comp] += w * s;
                    ents_u[i * ncomp + comp] = e;
                }
            }
            if !with_jac {
                continue;
            }
            // A : grad xi_j for every displacement test function j.
            for j in 0..nl {
                for l in 0..ncomp {
                    let mut t = Mat::<D>::zeros();
                    for &(r, cc, v) in &ents_u[j * ncomp + l] {
                        if v != 0.0 {
                            t += ev.dp_dg[r][cc] * v;
                        }
                    }
                    t_u[j * ncomp + l] = t;
                }
            }
            let contract = |m: &Mat<D>, e: &[(usize, usize, f64); 3]| -> f64 {
                e.iter().map(|&(r, cc, v)| m[(r, cc)] * v).sum()
            };
            for i in 0..nl {
                let ki = cv.idx(q, i);
                let (phi_i, g_i) = (cv.phi[ki], cv.grad[ki]);
                let gdot = g_i[0] * gmu[0] + g_i[1] * gmu[1];
                for j in 0..nl {
                    let kj = cv.idx(q, j);
                    let (phi_j, g_j) = (cv.phi[kj], cv.grad[kj]);
                    let gij = g_i[0] * g_j[0] + g_i[1] * g_j[1];
                    let row_c = (i * nf + C) * nd;
                    let row_mu = (i * nf + MU) * nd;
                    jac[row_c + j * nf + MU] -= w * ev.mob * gij;
                    jac[row_c + j * nf + C] -= w * ev.dmob_dc * phi_j * gdot;
                    jac[row_mu + j * nf + MU] -= w * phi_i * phi_j;
                    jac[row_mu + j * nf + C] += w * ev.dmu_dc * phi_j * phi_i;
                    for l in 0..ncomp {
                        let ej = &ents_u[j * ncomp + l];
                        jac[row_c + j * nf + U + l] -= w * contract(&ev.dmob_dg, ej) * gdot;
                        jac[row_mu + j * nf + U + l] += w * contract(&ev.dmu_dg, ej) * phi_i;
                    }
                    for k in 0..ncomp {
                        let ei = &ents_u[i * ncomp + k];
                        let row_u = (i * nf + U + k) * nd;
                        jac[row_u + j * nf + C] += w * contract(&ev.dp_dc, ei) * phi_j;
                        for l in 0..ncomp {
                            jac[row_u + j * nf + U + l] += w * contract(&t_u[j * ncomp + l], ei);
                        }
                    }
                }
            }
        }
        let dofs = (0..nl)
            .flat_map(|i| (0..nf).map(move |fl| nodes[i] * nf + fl))
            .collect();
        Ok(Local { dofs, f, jac })
    }

    fn locals(&self, y: &[f64], with_jac: bool) -> Result<Vec<Local>, AssemblyError> {
        (0..self.mesh.n_cells())
            .into_par_iter()
            .map(|cell| self.local(cell, y, with_jac))
            .collect()
    }

    /// Global dof -> condensed targets.
    fn targets(&self, dof: usize) -> Vec<(usize, f64)> {
        let (node, fl) = (dof / self.nf, dof % self.nf);
        self.expand(node)
            .into_iter()
            .map(|(m, w)| (m * self.nf + fl, w))
            .collect()
    }

    /// `f(y)` without the boundary flux.
    fn interior_rhs(&self, y: &[f64]) -> Result<Vec<f64>, AssemblyError> {
        let mut out = vec![0.0; self.n_dofs()];
        for loc in self.locals(y, false)? {
            for (a, &dof) in loc.dofs.iter().enumerate() {
                for (t, w) in self.targets(dof) {
                    out[t] += w * loc.f[a];
                }
            }
        }
        Ok(out)
    }

    /// Right-hand side `f(y)`; `flux_sign` is +1 during lithiation.
    pub fn rhs(&self, y: &[f64], flux_sign: f64) -> Result<Vec<f64>, AssemblyError> {
        let mut f = self.interior_rhs(y)?;
        for (fi, b) in f.iter_mut().zip(self.flux_vector(flux_sign)) {
            *fi += b;
        }
        Ok(f)
    }

    /// `f(y)` and `df/dy` (condensed; slave rows empty).
    pub fn rhs_and_jacobian(
        &self,
        y: &[f64],
        flux_sign: f64,
    ) -> Result<(Vec<f64>, Csr), AssemblyError> {
        let mut f = self.flux_vector(flux_sign);
        let mut jac = Csr::zeros(self.pattern.clone());
        let locals = self.locals(y, true)?;
        for loc in locals {
            let nd = loc.dofs.len();
            let tg: Vec<Vec<(usize, f64)>> = loc.dofs.iter().map(|&d| self.targets(d)).collect();
            for a in 0..nd {
                for &(ra, wa) in &tg[a] {
                    f[ra] += wa * loc.f[a];
                    for b in 0..nd {
                        let v = loc.jac[a * nd + b];
                        if v == 0.0 {
                            continue;
                        }
                        for &(cb, wb) in &tg[b] {
                            jac.add(ra, cb, wa * wb * v);
                        }
                    }
                }
            }
        }
        Ok((f, jac))
    }

    /// Iteration matrix `alpha M - tau J` with identity rows for `rows`
    /// and constraint rows `x_s - sum w x_m` for hanging-node slaves.
    pub fn iteration_matrix(&self, jac: &Csr, alpha: f64, tau: f64, rows: &RowReplacement) -> Csr {
        let mut a = jac.clone();
        for v in a.vals.iter_mut() {
            *v *= -tau;
        }
        for i in 0..self.mass.n() {
            let (cols, vals) = self.mass.row(i);
            for (&j, &m) in cols.iter().zip(vals) {
                if m != 0.0 {
                    a.add(i, j, alpha * m);
                }
            }
        }
        for &i in &rows.identity {
            a.set_identity_row(i);
        }
        self.constraint_rows(&mut a);
        a
    }

    /// Replace the rows of slave dofs by their constraint equations.
    pub fn constraint_rows(&self, a: &mut Csr) {
        for c in self.mesh.constraints() {
            for f in 0..self.nf {
                let row = c.node * self.nf + f;
                a.set_identity_row(row);
                for &(m, w) in &c.masters {
                    a.add(row, m * self.nf + f, -w);
                }
            }
        }
    }

    /// Slave dof indices.
    pub fn slave_dofs(&self) -> Vec<usize> {
        self.mesh
            .constraints()
            .iter()
            .flat_map(|c| (0..self.nf).map(move |f| c.node * self.nf + f))
            .collect()
    }

    /// Weak elastic form `int P : grad xi` at every displacement dof.
    pub fn elastic_residual(&self, y: &[f64]) -> Result<Vec<f64>, AssemblyError> {
        let f = self.interior_rhs(y)?;
        Ok(f.iter()
            .enumerate()
            .map(|(i, &v)| if i % self.nf >= U { v } else { 0.0 })
            .collect())
    }
}
