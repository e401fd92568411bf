//! Variable-step, variable-order NDF/BDF integration of `M y' = f(t, y)`
//! in backward-difference form.
//!
//! The history is stored as backward differences `dif[j] = nabla^{j+1} y_n`
//! scaled to the current step `h`. A step solves
//! `alpha (M (y - phi)) - h f(t + h, y) = 0` with `alpha = (1 - kappa_k) gamma_k`,
//! predictor `pred = y_n + sum_{j<=k} nabla^j y_n` and
//! `phi = pred - sum_{j<=k} gamma_j nabla^j y_n / alpha`.

use log::debug;
use thiserror::Error;

pub const MAX_ORDER: usize = 5;

const KAPPA_NDF: [f64; MAX_ORDER] = [-0.1850, -1.0 / 9.0, -0.0823, -0.0415, 0.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Ndf,
    Bdf,
}

impl Family {
    pub fn kappa(self, k: usize) -> f64 {
        match self {
            Family::Ndf => KAPPA_NDF[k - 1],
            Family::Bdf => 0.0,
        }
    }
}

/// `gamma_k = sum_{j=1}^k 1/j`.
pub fn gamma(k: usize) -> f64 {
    (1..=k).map(|j| 1.0 / j as f64).sum()
}

/// Leading coefficient `(1 - kappa_k) gamma_k`.
pub fn alpha(family: Family, k: usize) -> f64 {
    (1.0 - family.kappa(k)) * gamma(k)
}

/// Local error constant `kappa_k gamma_k + 1/(k+1)`.
pub fn error_constant(family: Family, k: usize) -> f64 {
    family.kappa(k) * gamma(k) + 1.0 / (k as f64 + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSettings {
    pub family: Family,
    pub rtol: f64,
    pub atol: f64,
    pub tau0: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub max_order: usize,
    pub grow_cap: f64,
    pub shrink_floor: f64,
    pub safety: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            family: Family::Ndf,
            rtol: 1e-5,
            atol: 1e-8,
            tau0: 1e-6,
            tau_min: 1e-12,
            tau_max: 1e-2,
            max_order: MAX_ORDER,
            grow_cap: 5.0,
            shrink_floor: 0.1,
            safety: 0.8,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error("step size underflow at t = {t}: tau = {tau:e} ({reason})")]
    StepUnderflow { t: f64, tau: f64, reason: String },
}

/// Implicit stage solver supplied by the problem.
pub trait Corrector {
    type Extra;
    type Error: std::fmt::Display;
    /// Solve `alpha M (y - phi) - tau f(t, y) = 0` starting from `pred`.
    fn correct(
        &mut self,
        t: f64,
        tau: f64,
        alpha: f64,
        phi: &[f64],
        pred: &[f64],
        weights: &[f64],
    ) -> Result<(Vec<f64>, Self::Extra), Self::Error>;
}

/// Corrected step awaiting acceptance.
#[derive(Debug, Clone)]
pub struct Candidate<E> {
    pub t: f64,
    pub h: f64,
    pub order: usize,
    pub y: Vec<f64>,
    pub est: f64,
    pub extra: E,
    d: Vec<f64>,
}

impl<E> Candidate<E> {
    /// Detach the corrector output, leaving a committable candidate.
    pub fn split(self) -> (E, Candidate<()>) {
        let Candidate { t, h, order, y, est, extra, d } = self;
        (extra, Candidate { t, h, order, y, est, extra: (), d })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stats {
    pub accepted: usize,
    pub error_rejections: usize,
    pub corrector_failures: usize,
}

#[derive(Debug, Clone)]
pub struct Integrator {
    pub settings: IntegratorSettings,
    pub t: f64,
    pub y: Vec<f64>,
    dif: Vec<Vec<f64>>,
    k: usize,
    h: f64,
    nconhk: usize,
    forced: usize,
    stop: Option<f64>,
    pub stats: Stats,
}

/// Step-change matrix `R(rho) U` restricted to the first `k` differences.
fn ru_matrix(k: usize, rho: f64) -> Vec<Vec<f64>> {
    let build = |r: f64| {
        let mut m = vec![vec![0.0; k]; k];
        for j in 0..k {
            let mut p = 1.0;
            for i in 0..k {
                let (ii, jj) = ((i + 1) as f64, (j + 1) as f64);
                p *= (ii - 1.0 - jj * r) / ii;
                m[i][j] = p;
            }
        }
        m
    };
    let r = build(rho);
    let u = build(1.0);
    let mut ru = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            ru[i][j] = (0..k).map(|l| r[i][l] * u[l][j]).sum();
        }
    }
    ru
}

impl Integrator {
    pub fn new(t0: f64, y0: Vec<f64>, settings: IntegratorSettings) -> Self {
        let n = y0.len();
        Self {
            t: t0,
            dif: vec![vec![0.0; n]; settings.max_order + 2],
            y: y0,
            k: 1,
            h: settings.tau0,
            nconhk: 0,
            forced: 0,
            stop: None,
            settings,
            stats: Stats::default(),
        }
    }

    /// Start from an exact history: `dif[j] = nabla^{j+1} y_n` at step `h`.
    pub fn with_history(mut self, h: f64, order: usize, history: Vec<Vec<f64>>) -> Self {
        for (j, d) in history.into_iter().enumerate() {
            self.dif[j] = d;
        }
        self.h = h;
        self.k = order;
        self
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    pub fn history(&self) -> &[Vec<f64>] {
        &self.dif
    }

    /// Never step past `t_stop`.
    pub fn set_stop(&mut self, t_stop: Option<f64>) {
        self.stop = t_stop;
    }

    /// Change the step size, interpolating the history.
    pub fn set_step(&mut self, h: f64) {
        self.rescale(h);
    }

    fn rescale(&mut self, h_new: f64) {
        if h_new == self.h {
            return;
        }
        let rho = h_new / self.h;
        let k = self.k;
        let ru = ru_matrix(k, rho);
        let n = self.y.len();
        let mut out = vec![vec![0.0; n]; k];
        for (j, o) in out.iter_mut().enumerate() {
            for i in 0..k {
                let c = ru[i][j];
                if c != 0.0 {
                    for (a, b) in o.iter_mut().zip(&self.dif[i]) {
                        *a += c * b;
                    }
                }
            }
        }
        for (j, o) in out.into_iter().enumerate() {
            self.dif[j] = o;
        }
        self.h = h_new;
        self.nconhk = 0;
    }

    /// Restart at order 1 with step `h`, discarding derivative history,
    /// and hold order and step for `steps` steps.
    pub fn restart(&mut self, h: f64, steps: usize) {
        for d in &mut self.dif {
            d.iter_mut().for_each(|v| *v = 0.0);
        }
        self.k = 1;
        self.h = h;
        self.nconhk = 0;
        self.forced = steps;
    }

    /// Map the solution and history through a linear transfer (mesh change).
    /// Order and step size are kept.
    pub fn transfer(&mut self, mut map: impl FnMut(&[f64]) -> Vec<f64>) {
        self.y = map(&self.y);
        for d in &mut self.dif {
            *d = map(d);
        }
        self.nconhk = 0;
    }

    pub fn weights(&self, y: &[f64]) -> Vec<f64> {
        let s = &self.settings;
        y.iter().map(|v| 1.0 / (s.atol + s.rtol * v.abs())).collect()
    }

    fn wnorm(v: &[f64], w: &[f64]) -> f64 {
        v.iter().zip(w).fold(0.0f64, |m, (a, b)| m.max((a * b).abs()))
    }

    /// Predictor, `phi` and `alpha` for the current order and step.
    pub fn predict(&self) -> (Vec<f64>, Vec<f64>, f64) {
        let k = self.k;
        let fam = self.settings.family;
        let a = alpha(fam, k);
        let mut pred = self.y.clone();
        let mut psi = vec![0.0; self.y.len()];
        for j in 0..k {
            let g = gamma(j + 1) / a;
            for ((p, s), d) in pred.iter_mut().zip(psi.iter_mut()).zip(&self.dif[j]) {
                *p += d;
                *s += g * d;
            }
        }
        let phi = pred.iter().zip(&psi).map(|(p, s)| p - s).collect();
        (pred, phi, a)
    }

    fn clamp_to_stop(&mut self) {
        let mut h = self.h.min(self.settings.tau_max);
        if let Some(ts) = self.stop {
            let rem = ts - self.t;
            if rem > 0.0 && h >= rem - 1e-12 * ts.abs().max(1.0) {
                h = rem;
            }
        }
        self.rescale(h);
    }

    /// Try to advance one step; loops over corrector failures (halving `h`)
    /// and temporal error rejections until a step passes the error test.
    pub fn try_step<C: Corrector>(&mut self, corr: &mut C) -> Result<Candidate<C::Extra>, IntegratorError> {
        let mut fails = 0;
        loop {
            self.clamp_to_stop();
            let h = self.h;
            if h < self.settings.tau_min {
                return Err(IntegratorError::StepUnderflow {
                    t: self.t,
                    tau: h,
                    reason: "step rejected repeatedly".into(),
                });
            }
            let (pred, phi, a) = self.predict();
            let w = self.weights(&self.y);
            let t_new = self.t + h;
            match corr.correct(t_new, h, a, &phi, &pred, &w) {
                Err(e) => {
                    debug!("corrector failed at t = {t_new:.6e}, h = {h:.3e}: {e}");
                    self.stats.corrector_failures += 1;
                    self.rescale(0.5 * h);
                    if self.h < self.settings.tau_min {
                        return Err(IntegratorError::StepUnderflow {
                            t: self.t,
                            tau: self.h,
                            reason: e.to_string(),
                        });
                    }
                }
                Ok((y, extra)) => {
                    let d: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
                    let w = self.weights_pair(&y);
                    let est = Self::wnorm(&d, &w) * error_constant(self.settings.family, self.k);
                    if est <= 1.0 || self.forced > 0 {
                        return Ok(Candidate {
                            t: t_new,
                            h,
                            order: self.k,
                            y,
                            est,
                            extra,
                            d,
                        });
                    }
                    self.stats.error_rejections += 1;
                    fails += 1;
                    let s = &self.settings;
                    let fac = (s.safety * est.powf(-1.0 / (self.k as f64 + 1.0))).max(s.shrink_floor);
                    let mut h_new = h * fac.min(0.9);
                    if fails >= 2 && self.k > 1 {
                        self.rescale(h);
                        self.k -= 1;
                        h_new = h_new.max(h * 0.5).min(h);
                    }
                    debug!("step rejected at t = {t_new:.6e}: est = {est:.3e}, h -> {h_new:.3e}");
                    self.rescale(h_new);
                }
            }
        }
    }

    fn weights_pair(&self, y: &[f64]) -> Vec<f64> {
        let s = &self.settings;
        y.iter()
            .zip(&self.y)
            .map(|(a, b)| 1.0 / (s.atol + s.rtol * a.abs().max(b.abs())))
            .collect()
    }

    fn update_history(&mut self, d: Vec<f64>) {
        let k = self.k;
        if k + 1 < self.dif.len() {
            let next = d.iter().zip(&self.dif[k]).map(|(a, b)| a - b).collect();
            self.dif[k + 1] = next;
        }
        self.dif[k] = d;
        for j in (0..k).rev() {
            let (lo, hi) = self.dif.split_at_mut(j + 1);
            for (a, b) in lo[j].iter_mut().zip(&hi[0]) {
                *a += b;
            }
        }
    }

    /// Accept a candidate: update the difference array, then choose the next
    /// order and step size.
    pub fn commit<E>(&mut self, c: Candidate<E>) {
        let k = self.k;
        self.update_history(c.d);
        let w = self.weights_pair(&c.y);
        self.t = c.t;
        self.y = c.y;
        self.stats.accepted += 1;
        if self.forced > 0 {
            self.forced -= 1;
            return;
        }
        self.nconhk = (self.nconhk + 1).min(self.settings.max_order + 2);
        if self.nconhk < k + 2 {
            return;
        }
        let s = self.settings;
        let fam = s.family;
        let pw = |e: f64, q: f64, f: f64| {
            let t = f * e.max(1e-300).powf(1.0 / q);
            if t > 1.0 / s.grow_cap {
                self.h / t
            } else {
                s.grow_cap * self.h
            }
        };
        let mut hopt = pw(c.est, k as f64 + 1.0, 1.0 / s.safety);
        let mut kopt = k;
        if k > 1 {
            let e = Self::wnorm(&self.dif[k - 1], &w) * error_constant(fam, k - 1);
            let hk = pw(e, k as f64, 1.3);
            if hk > hopt {
                hopt = hk.min(self.h);
                kopt = k - 1;
            }
        }
        if k < s.max_order && k + 1 < self.dif.len() {
            let e = Self::wnorm(&self.dif[k + 1], &w) * error_constant(fam, k + 1);
            let hk = pw(e, k as f64 + 2.0, 1.4);
            if hk > hopt {
                hopt = hk;
                kopt = k + 1;
            }
        }
        let hopt = hopt.min(s.tau_max);
        if hopt > self.h || kopt != k {
            if kopt > k {
                self.k = kopt;
                self.rescale(hopt);
            } else {
                self.rescale(hopt);
                self.k = kopt;
            }
            self.nconhk = 0;
        }
    }

    /// Fixed-step, fixed-order step for convergence studies.
    pub fn step_fixed<C: Corrector>(&mut self, corr: &mut C) -> Result<(), String> {
        let (pred, phi, a) = self.predict();
        let w = self.weights(&self.y);
        let (y, extra) = corr
            .correct(self.t + self.h, self.h, a, &phi, &pred, &w)
            .map_err(|e| e.to_string())?;
        let _ = extra;
        let d = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
        self.update_history(d);
        self.t += self.h;
        self.y = y;
        self.stats.accepted += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_change_identity() {
        let ru = ru_matrix(4, 1.0);
        for (i, row) in ru.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((v - e).abs() < 1e-14);
            }
        }
        assert!((ru_matrix(1, 0.3)[0][0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn coefficients() {
        assert_eq!(alpha(Family::Bdf, 1), 1.0);
        assert!((alpha(Family::Ndf, 1) - 1.185).abs() < 1e-12);
        assert!((error_constant(Family::Bdf, 2) - 1.0 / 3.0).abs() < 1e-15);
    }
}
