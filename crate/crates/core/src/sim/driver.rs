//! Lithiation/delithiation cycle driver with space-time adaptivity.

use std::collections::HashMap;
use std::time::Instant;

use log::{debug, info, warn};
use rayon::prelude::*;
use thiserror::Error;

use crate::adaptivity::{estimate, mark_cells, restrict_flags, Estimate};
use crate::assembly::{Assembler, AssemblyError, C, MU, U};
use crate::contact::{ActiveSet, Phase};
use crate::fem::{Adaptive, CellFlag, Discretization, FemError, Mesh1d, QuarterDisk};
use crate::integrator::{Corrector, Integrator, Stats};
use crate::material::{nondimensionalize_with, Material, MaterialError, ScaledParams};
use crate::newton::{semismooth_newton, LinearSolver, NewtonError, NewtonSettings, Stage};

use super::config::{Scenario, ScenarioConfig};

/// Stage step used to re-solve the algebraic rows after a mesh change.
const REINIT_TAU: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Mesh(#[from] FemError),
    #[error("solver failure at t = {t:.6e}: {message}")]
    Solver {
        t: f64,
        message: String,
        state: Box<Snapshot>,
    },
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

/// One accepted time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub soc: f64,
    pub tau: f64,
    pub order: usize,
    pub phase: Phase,
    pub est_t: f64,
    pub est_x: f64,
    pub newton_iters: usize,
    pub n_active: usize,
    pub n_contact: usize,
    pub dofs: usize,
    pub cells: usize,
    /// GPa; NaN for planar runs.
    pub max_sigma_h: f64,
    /// GPa; NaN for spherical runs.
    pub max_sigma_vm: f64,
    pub max_sigma_vm_at: [f64; 2],
    /// `(max(u_hat - g_hat), max(-lambda_hat), max |lambda_hat (u_hat - g_hat)|)`.
    pub kkt: (f64, f64, f64),
    /// Reference coordinates and component of every active dof.
    pub active: Vec<([f64; 2], usize)>,
    pub c_active_mean: f64,
    pub c_inactive_mean: f64,
    pub eta_total: f64,
    pub eta_max: f64,
    pub n_refined: usize,
    pub n_coarsened: usize,
}

/// Nodal fields at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub label: String,
    pub phase: Phase,
    pub target_soc: f64,
    pub t: f64,
    pub soc: f64,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// Receives results as they are produced.
pub trait Sink {
    fn step(&mut self, _r: &StepRecord) -> std::io::Result<()> {
        Ok(())
    }
    fn snapshot(&mut self, _s: &Snapshot) -> std::io::Result<()> {
        Ok(())
    }
}

impl Sink for () {}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub scaled: ScaledParams,
    pub records: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    pub stats: Stats,
    pub wall_seconds: f64,
    pub peak_dofs: usize,
}

impl RunSummary {
    /// First accepted step with a nonempty active set.
    pub fn first_contact(&self) -> Option<&StepRecord> {
        self.records.iter().find(|r| r.n_active > 0)
    }

    pub fn peak_sigma_h(&self, phase: Phase) -> f64 {
        self.records
            .iter()
            .filter(|r| r.phase == phase)
            .fold(0.0, |m, r| m.max(r.max_sigma_h))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum StopKind {
    Snapshot(Phase, f64),
    Switch,
    End,
}

struct StageSolver<'a, 'm, M: Discretization<D>, const D: usize> {
    asm: &'a Assembler<'m, M, D>,
    solver: &'a mut LinearSolver,
    set: &'a ActiveSet,
    flux_sign: f64,
    phase: Phase,
    newton: NewtonSettings,
}

struct StageExtra {
    set: ActiveSet,
    lambda: Vec<f64>,
    iters: usize,
}

impl<M: Discretization<D>, const D: usize> Corrector for StageSolver<'_, '_, M, D> {
    type Extra = StageExtra;
    type Error = NewtonError;

    fn correct(
        &mut self,
        _t: f64,
        tau: f64,
        alpha: f64,
        phi: &[f64],
        pred: &[f64],
        weights: &[f64],
    ) -> Result<(Vec<f64>, StageExtra), NewtonError> {
        let mut set = self.set.clone();
        let stage = Stage {
            alpha,
            tau,
            phi,
            flux_sign: self.flux_sign,
            phase: self.phase,
            weights,
        };
        let out = semismooth_newton(self.asm, self.solver, &stage, pred, &mut set, &self.newton)?;
        Ok((
            out.y,
            StageExtra {
                set,
                lambda: out.lambda,
                iters: out.iters,
            },
        ))
    }
}

/// Stress-free state at concentration `c0`: `u = X (lambda_ch(c0) - 1)`.
pub fn initial_state<M: Discretization<D>, const D: usize>(
    mesh: &M,
    mat: &Material,
    c0: f64,
) -> Result<Vec<f64>, MaterialError> {
    let nf = mesh.fields();
    let lam = mat.lambda_ch(c0)?;
    let g = crate::material::Mat::<D>::identity() * (lam - 1.0);
    let mu0 = mat.chemical_potential::<D>(c0, &g)?;
    let mut y = vec![0.0; mesh.n_dofs()];
    for n in 0..mesh.n_nodes() {
        let x = mesh.node_coords(n);
        y[n * nf + C] = c0;
        y[n * nf + MU] = mu0;
        for k in 0..mesh.ncomp() {
            y[n * nf + U + k] = x[k] * (lam - 1.0);
        }
    }
    for p in mesh.pinned() {
        y[p.node * nf + U + p.comp] = 0.0;
    }
    Ok(y)
}

/// Nodal Cauchy stress components (dimensionless, averaged over adjacent
/// cells) and the extreme value of the scalar measure with its location.
/// Spherical: `[sigma_r, sigma_phi, sigma_h, 0]`, extreme `|sigma_h|`.
/// Planar: `[sigma_xx, sigma_yy, sigma_xy, sigma_vm]`, extreme `sigma_vm`.
pub fn nodal_stress<M: Discretization<D>, const D: usize>(
    mesh: &M,
    mat: &Material,
    y: &[f64],
) -> Result<(Vec<[f64; 4]>, f64, [f64; 2]), AssemblyError> {
    let nf = mesh.fields();
    let ncomp = mesh.ncomp();
    let per_cell: Vec<Vec<[f64; 4]>> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|cell| {
            let nodes = mesh.cell_nodes(cell);
            let cv = mesh.cell_values(cell, mesh.node_rule());
            (0..cv.nq)
                .map(|q| {
                    let c = y[nodes[q] * nf + C];
                    let gu = cv.grad_u(q, ncomp, |i, k| y[nodes[i] * nf + U + k]);
                    let s = mat
                        .stress_measures::<D>(c, &gu)
                        .map_err(|source| AssemblyError { cell, source })?;
                    let sc = s.cauchy;
                    Ok(match (s.hydrostatic, s.von_mises) {
                        (Some(h), _) => [sc[(0, 0)], sc[(1, 1)], h, 0.0],
                        (_, vm) => [sc[(0, 0)], sc[(1, 1)], sc[(0, 1)], vm.unwrap_or(0.0)],
                    })
                })
                .collect::<Result<Vec<_>, AssemblyError>>()
        })
        .collect::<Result<_, _>>()?;
    let nn = mesh.n_nodes();
    let mut acc = vec![[0.0; 4]; nn];
    let mut cnt = vec![0usize; nn];
    let (mut peak, mut at) = (0.0f64, [0.0; 2]);
    let scalar = if D == 3 { 2 } else { 3 };
    for (cell, vals) in per_cell.iter().enumerate() {
        for (q, &node) in mesh.cell_nodes(cell).iter().enumerate() {
            let v = vals[q];
            for j in 0..4 {
                acc[node][j] += v[j];
            }
            cnt[node] += 1;
            if v[scalar].abs() > peak {
                peak = v[scalar].abs();
                at = mesh.node_coords(node);
            }
        }
    }
    for (a, &n) in acc.iter_mut().zip(&cnt) {
        if n > 0 {
            a.iter_mut().for_each(|v| *v /= n as f64);
        }
    }
    Ok((acc, peak, at))
}

type CoordKey = (i64, i64, usize);

fn key(x: [f64; 2], comp: usize) -> CoordKey {
    ((x[0] * 1e9).round() as i64, (x[1] * 1e9).round() as i64, comp)
}

/// Carry active flags and multipliers to a new set by matching reference
/// coordinates. Unmatched dofs activate if the transferred state touches the
/// obstacle.
fn remap_set<M: Discretization<D>, const D: usize>(
    old: &ActiveSet,
    old_lambda: &[f64],
    old_mesh: &M,
    new: &mut ActiveSet,
    new_mesh: &M,
    y: &[f64],
) -> Vec<f64> {
    let map: HashMap<CoordKey, usize> = old
        .dofs
        .iter()
        .enumerate()
        .map(|(p, d)| (key(old_mesh.node_coords(d.node), d.comp), p))
        .collect();
    let mut lambda = vec![0.0; new.len()];
    for p in 0..new.len() {
        let d = new.dofs[p];
        match map.get(&key(new_mesh.node_coords(d.node), d.comp)) {
            Some(&q) => {
                new.active[p] = old.active[q];
                lambda[p] = old_lambda.get(q).copied().unwrap_or(0.0);
            }
            None => {
                let b = d.bound();
                new.active[p] = y[d.dof] >= b - 1e-3 * b.abs().max(1e-3);
            }
        }
    }
    lambda
}

struct State<M> {
    mesh: M,
    integ: Integrator,
    set: ActiveSet,
    lambda: Vec<f64>,
    phase: Phase,
    flux_sign: f64,
}

fn snapshot_of<M: Discretization<D>, const D: usize>(
    mesh: &M,
    mat: &Material,
    scaled: &ScaledParams,
    set: &ActiveSet,
    y: &[f64],
    soc: f64,
    t: f64,
    phase: Phase,
    target: f64,
    label: String,
) -> Snapshot {
    let nf = mesh.fields();
    let gpa = scaled.stress_scale * 1e-9;
    let stress = nodal_stress(mesh, mat, y)
        .map(|s| s.0)
        .unwrap_or_else(|_| vec![[f64::NAN; 4]; mesh.n_nodes()]);
    let mut active = vec![0.0; mesh.n_nodes()];
    for (d, &a) in set.dofs.iter().zip(&set.active) {
        if a {
            active[d.node] += 1.0;
        }
    }
    let planar = mesh.sdim() == 2;
    let columns: Vec<String> = if planar {
        ["x", "y", "c", "mu", "u_x", "u_y", "sigma_xx", "sigma_yy", "sigma_xy", "sigma_vm", "active"]
    } else {
        ["r", "c", "mu", "u_r", "sigma_r", "sigma_phi", "sigma_h", "", "", "", "active"]
    }
    .iter()
    .filter(|s| !s.is_empty())
    .map(|s| s.to_string())
    .collect();
    let mut order: Vec<usize> = (0..mesh.n_nodes()).collect();
    order.sort_by(|&a, &b| {
        let (xa, xb) = (mesh.node_coords(a), mesh.node_coords(b));
        xa[0].total_cmp(&xb[0]).then(xa[1].total_cmp(&xb[1]))
    });
    let rows = order
        .into_iter()
        .map(|n| {
            let x = mesh.node_coords(n);
            let s = stress[n];
            let mut row = vec![x[0]];
            if planar {
                row.push(x[1]);
            }
            row.push(y[n * nf + C]);
            row.push(y[n * nf + MU]);
            for k in 0..mesh.ncomp() {
                row.push(y[n * nf + U + k]);
            }
            let ns = if planar { 4 } else { 3 };
            row.extend(s[..ns].iter().map(|v| v * gpa));
            row.push(active[n]);
            row
        })
        .collect();
    Snapshot {
        label,
        phase,
        target_soc: target,
        t,
        soc,
        columns,
        rows,
    }
}

fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::Lithiation => "lithiation",
        Phase::Delithiation => "delithiation",
    }
}

/// Run the configured scenario, streaming results into `sink`.
pub fn run_scenario(cfg: &ScenarioConfig, sink: &mut dyn Sink) -> Result<RunSummary, SimError> {
    match cfg.scenario {
        Scenario::Sphere1d => {
            let mesh = Mesh1d::new(cfg.root_cells, cfg.order)?.refined(cfg.initial_level);
            run(cfg, mesh, sink)
        }
        Scenario::QuarterDisk2d => {
            let mesh = QuarterDisk::new(cfg.initial_level, cfg.order)?;
            run(cfg, mesh, sink)
        }
    }
}

/// Cycle driver on a given initial mesh.
pub fn run<M: Adaptive<D>, const D: usize>(
    cfg: &ScenarioConfig,
    mesh: M,
    sink: &mut dyn Sink,
) -> Result<RunSummary, SimError> {
    let start = Instant::now();
    let scaled = nondimensionalize_with(&cfg.raw, cfg.lame)?;
    let mat = Material::from_scaled(&scaled);
    let c0 = scaled.c0_tilde;
    let t_sw = cfg.t_switch();
    let t_end = cfg.t_end;
    let gpa = scaled.stress_scale * 1e-9;
    let ad = cfg.adaptivity;

    let mut stops: Vec<(f64, StopKind)> = vec![(t_sw, StopKind::Switch), (t_end, StopKind::End)];
    for &s in &cfg.snapshots_lithiation {
        stops.push(((s - c0).max(0.0), StopKind::Snapshot(Phase::Lithiation, s)));
    }
    for &s in &cfg.snapshots_delithiation {
        let t = (2.0 * t_sw + c0 - s).clamp(t_sw, t_end);
        stops.push((t, StopKind::Snapshot(Phase::Delithiation, s)));
    }
    // Snapshots at a switch belong before it; lithiation before delithiation.
    let rank = |k: &StopKind| match k {
        StopKind::Snapshot(Phase::Lithiation, _) => 0,
        StopKind::Switch => 1,
        StopKind::Snapshot(Phase::Delithiation, _) => 2,
        StopKind::End => 3,
    };
    stops.sort_by(|a, b| a.0.total_cmp(&b.0).then(rank(&a.1).cmp(&rank(&b.1))));
    let time_tol = 1e-10 * t_end.max(1.0);

    let y0 = initial_state(&mesh, &mat, c0)?;
    let mut snapshots = Vec::new();
    let mut records: Vec<StepRecord> = Vec::new();
    let mut st = {
        let asm = Assembler::new(&mesh, mat);
        let set = ActiveSet::new(&mesh, asm.boundary_weights(), cfg.gap, cfg.ncp_alpha);
        let lambda = vec![0.0; set.len()];
        State {
            integ: Integrator::new(0.0, y0, cfg.integrator),
            set,
            lambda,
            mesh,
            phase: Phase::Lithiation,
            flux_sign: 1.0,
        }
    };
    let mut stop_idx = 0;
    let mut step = 0usize;
    let mut redos = 0usize;
    let mut hold = 0usize;
    let mut skip_space = 0usize;
    let mut step_refined = 0usize;
    let mut step_coarsened = 0usize;
    let mut target_soc: Option<f64> = None;
    let mut peak_dofs = st.mesh.n_dofs();
    let mut previous: Option<(M, ActiveSet)> = None;

    let fail = |st: &State<M>, soc: f64, message: String| {
        let state = snapshot_of(
            &st.mesh, &mat, &scaled, &st.set, &st.integ.y, soc, st.integ.t, st.phase, f64::NAN,
            "failure".into(),
        );
        SimError::Solver {
            t: st.integ.t,
            message,
            state: Box::new(state),
        }
    };

    'mesh: loop {
        let asm = Assembler::new(&st.mesh, mat);
        let mut solver = LinearSolver::new();
        peak_dofs = peak_dofs.max(asm.n_dofs());
        if let Some((old_mesh, old_set)) = previous.take() {
            let mut set = ActiveSet::new(&st.mesh, asm.boundary_weights(), cfg.gap, cfg.ncp_alpha);
            st.lambda = remap_set(&old_set, &st.lambda, &old_mesh, &mut set, &st.mesh, &st.integ.y);
            st.set = set;
        }
        if let Some(target) = target_soc.take() {
            let shift = target - asm.soc(&st.integ.y);
            let nf = asm.fields();
            st.integ.y.iter_mut().step_by(nf).for_each(|c| *c += shift);
            // Interpolated mu and u do not satisfy the algebraic rows on the
            // new mesh; re-solve them at (almost) frozen c.
            let y = st.integ.y.clone();
            let weights = st.integ.weights(&y);
            let stage = Stage {
                alpha: 1.0,
                tau: REINIT_TAU,
                phi: &y,
                flux_sign: st.flux_sign,
                phase: st.phase,
                weights: &weights,
            };
            let mut set = st.set.clone();
            match semismooth_newton(&asm, &mut solver, &stage, &y, &mut set, &cfg.newton) {
                Ok(out) => {
                    st.integ.y = out.y;
                    st.set = set;
                    if !out.lambda.is_empty() {
                        st.lambda = out.lambda;
                    }
                }
                Err(e) => warn!("re-initialization after remeshing failed: {e}"),
            }
        }
        let next_mesh: M;
        loop {
            // Events due at the current time.
            while stop_idx < stops.len() && stops[stop_idx].0 <= st.integ.t + time_tol {
                let soc = asm.soc(&st.integ.y);
                match stops[stop_idx].1 {
                    StopKind::Snapshot(phase, s) => {
                        let snap = snapshot_of(
                            &st.mesh, &mat, &scaled, &st.set, &st.integ.y, soc, st.integ.t, phase, s,
                            format!("{}_{s:.2}", phase_name(phase)),
                        );
                        sink.snapshot(&snap)?;
                        snapshots.push(snap);
                    }
                    StopKind::Switch => {
                        info!("flux switch at t = {:.6}, SOC = {soc:.6}", st.integ.t);
                        st.phase = Phase::Delithiation;
                        st.flux_sign = -1.0;
                        st.integ.restart(cfg.switch_tau, cfg.switch_steps);
                        hold = cfg.switch_steps;
                    }
                    StopKind::End => {}
                }
                stop_idx += 1;
            }
            if stop_idx >= stops.len() {
                break 'mesh;
            }
            st.integ.set_stop(Some(stops[stop_idx].0));

            let cand = {
                let mut corr = StageSolver {
                    asm: &asm,
                    solver: &mut solver,
                    set: &st.set,
                    flux_sign: st.flux_sign,
                    phase: st.phase,
                    newton: cfg.newton,
                };
                st.integ.try_step(&mut corr)
            };
            let cand = match cand {
                Ok(c) => c,
                Err(e) => {
                    let soc = asm.soc(&st.integ.y);
                    return Err(fail(&st, soc, e.to_string()));
                }
            };

            let adapt_now = cfg.adaptive && hold == 0;
            let est: Option<Estimate> = adapt_now.then(|| estimate(&st.mesh, &cand.y));
            let est_x = est.as_ref().map_or(0.0, |e| e.weighted(&ad));
            let max_redos = if cfg.newton.allow_refine_retry {
                ad.max_space_redos.min(1)
            } else {
                ad.max_space_redos
            };
            if let Some(e) = est.as_ref().filter(|_| skip_space == 0 && est_x > 1.0) {
                if redos < max_redos {
                    let mut flags = mark_cells(&e.eta, ad.theta_c, ad.theta_r);
                    flags.iter_mut().for_each(|f| {
                        if *f == CellFlag::Coarsen {
                            *f = CellFlag::Keep
                        }
                    });
                    restrict_flags(&st.mesh, &mut flags, step as u64 + 1, &ad);
                    let nref = flags.iter().filter(|f| **f == CellFlag::Refine).count();
                    if nref > 0 {
                        debug!("t = {:.6e}: est_x = {est_x:.3e}, refining {nref} cells", cand.t);
                        step_refined += nref;
                        redos += 1;
                        next_mesh = st.mesh.adapt(&flags, step as u64 + 1, ad.min_level, ad.max_level);
                        target_soc = Some(asm.soc(&st.integ.y));
                        break;
                    }
                } else if !cfg.newton.allow_refine_retry {
                    warn!("t = {:.6e}: spatial estimate {est_x:.3e} above tolerance after {redos} redos", cand.t);
                }
            }

            // Accept.
            let refined_this_step = redos > 0;
            let (extra, cand) = cand.split();
            let (tau, order, est_t) = (cand.h, cand.order, cand.est);
            st.integ.commit(cand);
            let StageExtra { set, lambda, iters } = extra;
            st.set = set;
            st.lambda = if lambda.is_empty() { vec![0.0; st.set.len()] } else { lambda };
            step += 1;
            redos = 0;
            hold = hold.saturating_sub(1);
            if refined_this_step && cfg.newton.allow_refine_retry {
                skip_space = cfg.skip_space_steps;
            } else {
                skip_space = skip_space.saturating_sub(1);
            }

            let y = &st.integ.y;
            let soc = asm.soc(y);
            let (_, peak, at) = nodal_stress(&st.mesh, &mat, y)
                .map_err(|e| fail(&st, soc, e.to_string()))?;
            let nf = asm.fields();
            let mut node_active: HashMap<usize, bool> = HashMap::new();
            let mut active = Vec::new();
            for (d, &a) in st.set.dofs.iter().zip(&st.set.active) {
                *node_active.entry(d.node).or_insert(false) |= a;
                if a {
                    active.push((st.mesh.node_coords(d.node), d.comp));
                }
            }
            let mean = |want: bool| {
                let v: Vec<f64> = node_active
                    .iter()
                    .filter(|(_, &a)| a == want)
                    .map(|(&n, _)| y[n * nf + C])
                    .collect();
                if v.is_empty() {
                    f64::NAN
                } else {
                    v.iter().sum::<f64>() / v.len() as f64
                }
            };
            let rec = StepRecord {
                step,
                t: st.integ.t,
                soc,
                tau,
                order,
                phase: st.phase,
                est_t,
                est_x,
                newton_iters: iters,
                n_active: st.set.n_active(),
                n_contact: st.set.len(),
                dofs: asm.n_dofs(),
                cells: st.mesh.n_cells(),
                max_sigma_h: if D == 3 { peak * gpa } else { f64::NAN },
                max_sigma_vm: if D == 2 { peak * gpa } else { f64::NAN },
                max_sigma_vm_at: if D == 2 { at } else { [f64::NAN; 2] },
                kkt: st.set.kkt_violation(y, &st.lambda),
                active,
                c_active_mean: mean(true),
                c_inactive_mean: mean(false),
                eta_total: est.as_ref().map_or(f64::NAN, |e| e.total()),
                eta_max: est.as_ref().map_or(f64::NAN, |e| e.max()),
                n_refined: step_refined,
                n_coarsened: step_coarsened,
            };
            debug!(
                "step {step}: t = {:.6e}, tau = {tau:.3e}, k = {order}, |A| = {}, dofs = {}",
                rec.t, rec.n_active, rec.dofs
            );
            if records.last().map_or(true, |r: &StepRecord| r.n_active == 0) && rec.n_active > 0 {
                info!("first contact at t = {:.6}, SOC = {:.6}", rec.t, rec.soc);
            }
            sink.step(&rec)?;
            records.push(rec);
            step_refined = 0;
            step_coarsened = 0;

            // Coarsening on the accepted state.
            if let Some(e) = est.as_ref().filter(|_| est_x <= 1.0) {
                let mut flags = mark_cells(&e.eta, ad.theta_c, ad.theta_r);
                flags.iter_mut().for_each(|f| {
                    if *f == CellFlag::Refine {
                        *f = CellFlag::Keep
                    }
                });
                restrict_flags(&st.mesh, &mut flags, step as u64, &ad);
                let ncoarse = flags.iter().filter(|f| **f == CellFlag::Coarsen).count();
                if ncoarse >= 2.max(st.mesh.n_cells() / 10) {
                    let m = st.mesh.adapt(&flags, step as u64, ad.min_level, ad.max_level);
                    if m.n_cells() < st.mesh.n_cells() {
                        step_coarsened = st.mesh.n_cells() - m.n_cells();
                        target_soc = Some(soc);
                        next_mesh = m;
                        break;
                    }
                }
            }
        }
        drop(asm);
        let new_mesh = next_mesh;
        let old_mesh = std::mem::replace(&mut st.mesh, new_mesh);
        let (om, nm) = (&old_mesh, &st.mesh);
        st.integ.transfer(|v| om.transfer(nm, v));
        previous = Some((old_mesh, st.set.clone()));
    }

    let wall_seconds = start.elapsed().as_secs_f64();
    info!(
        "run finished: {} steps, {} rejections, {} corrector failures, {wall_seconds:.1} s",
        st.integ.stats.accepted, st.integ.stats.error_rejections, st.integ.stats.corrector_failures
    );
    Ok(RunSummary {
        scaled,
        records,
        snapshots,
        stats: st.integ.stats,
        wall_seconds,
        peak_dofs,
    })
}
