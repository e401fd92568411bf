//! Sparse direct solves and the semismooth Newton iteration for one
//! implicit time step with contact.

use std::sync::Arc;

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::Mat as FMat;
use log::{debug, trace};
use thiserror::Error;

use crate::assembly::{Assembler, AssemblyError, RowReplacement, C};
use crate::contact::{ActiveSet, Phase};
use crate::fem::Discretization;
use crate::sparse::{Csr, Pattern};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearSolveError {
    #[error("row {0} is identically zero")]
    ZeroRow(usize),
    #[error("structurally singular matrix (pivot {0})")]
    StructurallySingular(usize),
    #[error("factorization failed")]
    Factorization,
    #[error("non-finite solution")]
    NonFinite,
    #[error("residual {residual:e} exceeds bound {bound:e}")]
    Residual { residual: f64, bound: f64 },
}

/// Direct LU solver that keeps the symbolic analysis for a fixed pattern.
#[derive(Default)]
pub struct LinearSolver {
    cache: Option<(Arc<Pattern>, SymbolicLu<usize>)>,
}

impl LinearSolver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Solve `A x = b` with row equilibration and iterative refinement.
    pub fn solve(&mut self, a: &Csr, b: &[f64]) -> Result<Vec<f64>, LinearSolveError> {
        let n = a.n();
        let pat = &a.pattern;
        let mut scale = vec![0.0; n];
        for (i, s) in scale.iter_mut().enumerate() {
            let m = a.row(i).1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if m == 0.0 {
                return Err(LinearSolveError::ZeroRow(i));
            }
            *s = 1.0 / m;
        }
        let mut vals = a.vals.clone();
        for i in 0..n {
            for v in &mut vals[pat.row_ptr[i]..pat.row_ptr[i + 1]] {
                *v *= scale[i];
            }
        }
        // CSR of A is CSC of A^T: factor A^T and solve transposed.
        let sym = SymbolicSparseColMatRef::new_checked(n, n, &pat.row_ptr, None, &pat.cols);
        let mat = SparseColMatRef::new(sym, &vals);
        let symbolic = match &self.cache {
            Some((p, s)) if Arc::ptr_eq(p, pat) || **p == **pat => s.clone(),
            _ => {
                let s = SymbolicLu::try_new(sym).map_err(|_| LinearSolveError::Factorization)?;
                self.cache = Some((pat.clone(), s.clone()));
                s
            }
        };
        let lu = Lu::try_new_with_symbolic(symbolic, mat).map_err(|e| match e {
            faer::sparse::linalg::LuError::SymbolicSingular { index } => {
                LinearSolveError::StructurallySingular(index)
            }
            _ => LinearSolveError::Factorization,
        })?;
        let bs: Vec<f64> = b.iter().zip(&scale).map(|(v, s)| v * s).collect();
        let bnorm = bs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scaled = Csr {
            pattern: pat.clone(),
            vals,
        };
        let mut x = vec![0.0; n];
        let mut r = bs.clone();
        let target = 1e-10 * bnorm;
        let mut res = bnorm;
        for _ in 0..4 {
            let mut rhs = FMat::from_fn(n, 1, |i, _| r[i]);
            lu.solve_transpose_in_place(rhs.as_mut());
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += rhs[(i, 0)];
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(LinearSolveError::NonFinite);
            }
            let ax = scaled.matvec(&x);
            for i in 0..n {
                r[i] = bs[i] - ax[i];
            }
            res = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if res <= target {
                break;
            }
        }
        if res > 1e-6 * bnorm.max(f64::MIN_POSITIVE) {
            return Err(LinearSolveError::Residual {
                residual: res,
                bound: target,
            });
        }
        Ok(x)
    }
}

/// One-shot convenience wrapper around [`LinearSolver`].
pub fn linear_solve(a: &Csr, b: &[f64]) -> Result<Vec<f64>, LinearSolveError> {
    LinearSolver::new().solve(a, b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    pub max_iters: usize,
    /// Required contraction of the weighted update norm from iteration 2 on.
    pub reduction: f64,
    /// Bound on the weighted update norm.
    pub tol: f64,
    /// 2D: accept a step after one spatial refinement if Newton converged.
    pub allow_refine_retry: bool,
}

impl NewtonSettings {
    pub fn one_d() -> Self {
        Self {
            max_iters: 12,
            reduction: 0.5,
            tol: 1.0,
            allow_refine_retry: false,
        }
    }

    pub fn two_d() -> Self {
        Self {
            max_iters: 20,
            allow_refine_retry: true,
            ..Self::one_d()
        }
    }
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self::one_d()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NewtonError {
    #[error("no convergence in {0} iterations")]
    MaxIters(usize),
    #[error("update norm grew to {0:e}")]
    Diverged(f64),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("linear solve: {0}")]
    Linear(#[from] LinearSolveError),
}

/// Implicit stage `alpha M (y - phi) - tau f(y) = 0` subject to contact.
pub struct Stage<'s> {
    pub alpha: f64,
    pub tau: f64,
    pub phi: &'s [f64],
    pub flux_sign: f64,
    pub phase: Phase,
    /// Error weights `1 / (atol + rtol |y|)`.
    pub weights: &'s [f64],
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub y: Vec<f64>,
    pub lambda: Vec<f64>,
    pub iters: usize,
    pub partition_changes: usize,
}

/// Weighted max norm.
pub fn weighted_norm(v: &[f64], w: &[f64]) -> f64 {
    v.iter().zip(w).fold(0.0f64, |m, (a, b)| m.max((a * b).abs()))
}

/// Residual `alpha M (y - phi) - tau f(y)` given `f(y)`.
pub fn stage_residual<M: Discretization<D>, const D: usize>(
    asm: &Assembler<M, D>,
    stage: &Stage,
    y: &[f64],
    f: &[f64],
) -> Vec<f64> {
    let diff: Vec<f64> = y.iter().zip(stage.phi).map(|(a, b)| a - b).collect();
    let md = asm.mass_apply(&diff);
    md.iter()
        .zip(f)
        .map(|(m, fi)| stage.alpha * m - stage.tau * fi)
        .collect()
}

/// Semismooth Newton iteration: each update solves the reduced system with
/// active and pinned rows eliminated, then the multiplier is recovered, the
/// partition updated and the iterate projected. Converged once the partition
/// is unchanged and the weighted update norm is below `tol` and contracting.
pub fn semismooth_newton<M: Discretization<D>, const D: usize>(
    asm: &Assembler<M, D>,
    solver: &mut LinearSolver,
    stage: &Stage,
    predictor: &[f64],
    set: &mut ActiveSet,
    settings: &NewtonSettings,
) -> Result<NewtonOutcome, NewtonError> {
    let nf = asm.fields();
    let pinned: Vec<usize> = asm
        .mesh
        .pinned()
        .iter()
        .map(|p| p.node * nf + 2 + p.comp)
        .collect();
    let slaves = asm.slave_dofs();
    let mut y = predictor.to_vec();
    asm.mesh.distribute(&mut y);
    for &d in &pinned {
        y[d] = 0.0;
    }
    set.project(&mut y);
    let mut prev: Option<f64> = None;
    let mut changes = 0;
    for iter in 1..=settings.max_iters {
        let (f, jac) = asm.rhs_and_jacobian(&y, stage.flux_sign)?;
        let g = stage_residual(asm, stage, &y, &f);
        let mut rows = RowReplacement {
            identity: pinned.clone(),
        };
        rows.identity.extend(set.active_dofs());
        let a = asm.iteration_matrix(&jac, stage.alpha, stage.tau, &rows);
        let mut rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        for &i in rows.identity.iter().chain(&slaves) {
            rhs[i] = 0.0;
        }
        let delta = solver.solve(&a, &rhs)?;
        for (yi, di) in y.iter_mut().zip(&delta) {
            *yi += di;
        }
        let norm = weighted_norm(&delta, stage.weights);
        if !norm.is_finite() {
            return Err(NewtonError::Diverged(norm));
        }
        let lambda = if set.is_empty() {
            Vec::new()
        } else {
            set.recover_multiplier(&asm.elastic_residual(&y)?)
        };
        let changed = !set.is_empty() && set.update(&y, &lambda, stage.phase);
        if changed {
            changes += 1;
            set.project(&mut y);
        }
        trace!(
            "newton iter {iter}: |dy|_w = {norm:.3e}, |A| = {}, changed = {changed}",
            set.n_active()
        );
        let contracting = match prev {
            None => norm <= 1e-3 * settings.tol,
            Some(p) => norm <= settings.reduction * p || norm <= 1e-3 * settings.tol,
        };
        if !changed && norm <= settings.tol && contracting {
            let lambda = if set.is_empty() {
                Vec::new()
            } else {
                set.recover_multiplier(&asm.elastic_residual(&y)?)
            };
            debug!("newton converged in {iter} iterations");
            return Ok(NewtonOutcome {
                y,
                lambda,
                iters: iter,
                partition_changes: changes,
            });
        }
        if let Some(p) = prev {
            if !changed && iter > 3 && norm > 2.0 * p && norm > settings.tol {
                return Err(NewtonError::Diverged(norm));
            }
        }
        prev = if changed { None } else { Some(norm) };
    }
    Err(NewtonError::MaxIters(settings.max_iters))
}

/// Concentration entries of an interleaved vector.
pub fn concentration(y: &[f64], nf: usize) -> Vec<f64> {
    y.iter().skip(C).step_by(nf).copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_solve() {
        let a = Csr::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(linear_solve(&a, &[3.0, -2.0]).unwrap(), vec![3.0, -2.0]);
    }

    #[test]
    fn poisson_four_nodes() {
        let a = Csr::from_dense(&[
            vec![2.0, -1.0, 0.0, 0.0],
            vec![-1.0, 2.0, -1.0, 0.0],
            vec![0.0, -1.0, 2.0, -1.0],
            vec![0.0, 0.0, -1.0, 2.0],
        ]);
        // Inverse is min(i,j)(5-max(i,j))/5 with 1-based indices.
        let b = [1.0, 0.0, 0.0, 0.0];
        let x = linear_solve(&a, &b).unwrap();
        let expect = [4.0 / 5.0, 3.0 / 5.0, 2.0 / 5.0, 1.0 / 5.0];
        for (u, v) in x.iter().zip(expect) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn random_spd_residual() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let n = 50;
        let b: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                d[i][j] = (0..n).map(|k| b[i][k] * b[j][k]).sum::<f64>();
            }
            d[i][i] += 1.0;
        }
        let a = Csr::from_dense(&d);
        let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = linear_solve(&a, &rhs).unwrap();
        let r = a.matvec(&x);
        let err = r.iter().zip(&rhs).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        let bn = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err <= 1e-10 * bn);
    }

    #[test]
    fn zero_row_is_reported() {
        let a = Csr::from_dense(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(linear_solve(&a, &[1.0, 1.0]), Err(LinearSolveError::ZeroRow(1)));
    }
}
