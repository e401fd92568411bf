//! Gap evaluation, NCP function, active-set updates with the
//! lithiation/delithiation hysteresis, projection and multiplier recovery.

use crate::assembly::U;
use crate::fem::Discretization;

/// Obstacle description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gap {
    /// 1D sphere: obstacle at `r = 1 + g`. `f64::INFINITY` means no obstacle.
    Radial(f64),
    /// 2D: componentwise bound `u_k <= g_hat_k - X_k`.
    Planar([f64; 2]),
}

impl Gap {
    pub fn is_finite(&self) -> bool {
        match *self {
            Gap::Radial(g) => g.is_finite(),
            Gap::Planar(g) => g.iter().all(|v| v.is_finite()),
        }
    }

    /// Pointwise gap of component `comp` at reference point `x`.
    pub fn at(&self, x: [f64; 2], comp: usize) -> f64 {
        match *self {
            Gap::Radial(g) => g,
            Gap::Planar(g) => g[comp] - x[comp],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Lithiation,
    Delithiation,
}

/// `C(a, b) = b - max(b + alpha a, 0)`.
pub fn ncp(a: f64, b: f64, alpha: f64) -> f64 {
    b - (b + alpha * a).max(0.0)
}

/// Slant derivative `(dC/da, dC/db)`; the boundary case `b + alpha a = 0`
/// belongs to the inactive branch.
pub fn ncp_slant(a: f64, b: f64, alpha: f64) -> (f64, f64) {
    if b + alpha * a > 0.0 {
        (-alpha, 0.0)
    } else {
        (0.0, 1.0)
    }
}

/// One displacement component on the contact boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactDof {
    pub dof: usize,
    pub node: usize,
    pub comp: usize,
    /// Lumped weight `D_pp`.
    pub weight: f64,
    /// Weighted gap `g_hat_p`.
    pub gap: f64,
}

impl ContactDof {
    /// Nodal displacement bound `g_hat_p / D_pp`.
    pub fn bound(&self) -> f64 {
        self.gap / self.weight
    }
}

/// Partition of the contact dofs into active and inactive components.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSet {
    pub dofs: Vec<ContactDof>,
    pub active: Vec<bool>,
    pub alpha: f64,
}

impl ActiveSet {
    /// Contact dofs from condensed boundary weights; pinned components and
    /// hanging nodes are excluded. All dofs start inactive.
    pub fn new<M: Discretization<D>, const D: usize>(
        mesh: &M,
        condensed_weights: &[f64],
        gap: Gap,
        alpha: f64,
    ) -> Self {
        let mut dofs = Vec::new();
        if gap.is_finite() {
            let nf = mesh.fields();
            let ncomp = mesh.ncomp();
            let pinned = mesh.pinned();
            // Weighted gaps condensed like the weights themselves.
            let raw = mesh.boundary_weights();
            let mut ghat = vec![[0.0; 2]; mesh.n_nodes()];
            for (n, &w) in raw.iter().enumerate() {
                if w > 0.0 {
                    let x = mesh.node_coords(n);
                    for (k, g) in ghat[n].iter_mut().enumerate().take(ncomp) {
                        *g = w * gap.at(x, k);
                    }
                }
            }
            for c in mesh.constraints() {
                let v = ghat[c.node];
                ghat[c.node] = [0.0; 2];
                for &(m, w) in &c.masters {
                    ghat[m][0] += w * v[0];
                    ghat[m][1] += w * v[1];
                }
            }
            for (node, &w) in condensed_weights.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                for comp in 0..ncomp {
                    if pinned.iter().any(|p| p.node == node && p.comp == comp) {
                        continue;
                    }
                    dofs.push(ContactDof {
                        dof: node * nf + U + comp,
                        node,
                        comp,
                        weight: w,
                        gap: ghat[node][comp],
                    });
                }
            }
        }
        let active = vec![false; dofs.len()];
        Self { dofs, active, alpha }
    }

    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    pub fn n_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn active_dofs(&self) -> Vec<usize> {
        self.dofs
            .iter()
            .zip(&self.active)
            .filter(|(_, &a)| a)
            .map(|(d, _)| d.dof)
            .collect()
    }

    /// `u_hat_p - g_hat_p` for every contact dof.
    pub fn gaps(&self, y: &[f64]) -> Vec<f64> {
        self.dofs.iter().map(|d| d.weight * y[d.dof] - d.gap).collect()
    }

    /// Set active components onto the obstacle. Returns whether anything moved.
    pub fn project(&self, y: &mut [f64]) -> bool {
        let mut moved = false;
        for (d, &a) in self.dofs.iter().zip(&self.active) {
            if a {
                let b = d.bound();
                moved |= y[d.dof] != b;
                y[d.dof] = b;
            }
        }
        moved
    }

    /// `lambda_hat_A = -P_A`, zero on the inactive set.
    pub fn recover_multiplier(&self, elastic_residual: &[f64]) -> Vec<f64> {
        self.dofs
            .iter()
            .zip(&self.active)
            .map(|(d, &a)| if a { -elastic_residual[d.dof] } else { 0.0 })
            .collect()
    }

    /// Semismooth Newton partition update restricted by the phase hysteresis:
    /// during lithiation components only activate, during delithiation they
    /// only release. Returns whether the partition changed.
    pub fn update(&mut self, y: &[f64], lambda: &[f64], phase: Phase) -> bool {
        let gaps = self.gaps(y);
        let mut changed = false;
        for (p, a) in self.active.iter_mut().enumerate() {
            let want = lambda[p] + self.alpha * gaps[p] > 0.0;
            let next = match phase {
                Phase::Lithiation => *a || want,
                Phase::Delithiation => *a && want,
            };
            changed |= next != *a;
            *a = next;
        }
        changed
    }

    /// Largest violation of the discrete KKT conditions
    /// `(max(u_hat - g_hat), max(-lambda_hat), max |lambda_hat (u_hat - g_hat)|)`.
    pub fn kkt_violation(&self, y: &[f64], lambda: &[f64]) -> (f64, f64, f64) {
        let gaps = self.gaps(y);
        let mut v = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64);
        for (g, l) in gaps.iter().zip(lambda) {
            v.0 = v.0.max(*g);
            v.1 = v.1.max(-l);
            v.2 = v.2.max((l * g).abs());
        }
        v
    }
}
