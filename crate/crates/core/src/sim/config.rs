//! Scenario configuration: flat `key = value` text with dotted sections.
//!
//! Lines are `key = value`; `#` starts a comment. Unknown keys are errors.
//! Defaults depend on `scenario`, so it is read first.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::adaptivity::AdaptivitySettings;
use crate::contact::Gap;
use crate::integrator::{Family, IntegratorSettings};
use crate::material::{LameConvention, RawParams};
use crate::newton::NewtonSettings;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("missing required key `gap` (e.g. `gap = 0.4`, `gap = inf`, `gap = 1.07, 1.07`)")]
    MissingGap,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Sphere1d,
    QuarterDisk2d,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Sphere1d => "sphere1d",
            Scenario::QuarterDisk2d => "quarterdisk2d",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub raw: RawParams,
    pub lame: LameConvention,
    pub gap: Gap,
    pub t_end: f64,
    pub snapshots_lithiation: Vec<f64>,
    pub snapshots_delithiation: Vec<f64>,
    pub order: usize,
    pub root_cells: usize,
    pub initial_level: usize,
    pub integrator: IntegratorSettings,
    pub adaptive: bool,
    pub adaptivity: AdaptivitySettings,
    pub newton: NewtonSettings,
    pub ncp_alpha: f64,
    pub switch_tau: f64,
    pub switch_steps: usize,
    /// Steps after an accepted-after-refinement step that may skip the
    /// spatial criterion.
    pub skip_space_steps: usize,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn defaults(scenario: Scenario) -> Self {
        match scenario {
            Scenario::Sphere1d => Self {
                scenario,
                raw: RawParams::default(),
                lame: LameConvention::Standard,
                gap: Gap::Radial(0.4),
                t_end: 1.8,
                snapshots_lithiation: vec![0.02, 0.05, 0.2, 0.5, 0.55, 0.92],
                snapshots_delithiation: vec![0.87, 0.55, 0.5, 0.3, 0.05, 0.02],
                order: 4,
                root_cells: 2,
                initial_level: 3,
                integrator: IntegratorSettings::default(),
                adaptive: true,
                adaptivity: AdaptivitySettings::one_d(),
                newton: NewtonSettings::one_d(),
                ncp_alpha: 1.0,
                switch_tau: 1e-6,
                switch_steps: 2,
                skip_space_steps: 0,
                output_dir: None,
                seed: 0,
            },
            Scenario::QuarterDisk2d => Self {
                scenario,
                gap: Gap::Planar([1.07, 1.07]),
                t_end: 0.2,
                snapshots_lithiation: vec![0.02, 0.07, 0.1, 0.12],
                snapshots_delithiation: vec![0.1, 0.02],
                order: 2,
                root_cells: 1,
                initial_level: 3,
                integrator: IntegratorSettings {
                    rtol: 4e-5,
                    atol: 4e-8,
                    tau0: 1e-8,
                    tau_max: 1e-3,
                    ..IntegratorSettings::default()
                },
                adaptive: false,
                adaptivity: AdaptivitySettings::two_d(),
                newton: NewtonSettings::two_d(),
                skip_space_steps: 1,
                ..Self::defaults(Scenario::Sphere1d)
            },
        }
    }

    /// Time at which the flux changes sign.
    pub fn t_switch(&self) -> f64 {
        0.5 * self.t_end
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, reason: String| {
            Err(ConfigError::Invalid {
                key: key.into(),
                reason,
            })
        };
        self.raw.validate().map_err(|e| ConfigError::Invalid {
            key: "params".into(),
            reason: e.to_string(),
        })?;
        match (self.scenario, self.gap) {
            (Scenario::Sphere1d, Gap::Radial(g)) if !(g > 0.0) => {
                return bad("gap", format!("must be positive, got {g}"))
            }
            (Scenario::QuarterDisk2d, Gap::Planar(g)) if !(g[0] > 1.0 && g[1] > 1.0) => {
                return bad("gap", format!("components must exceed 1, got {g:?}"))
            }
            (Scenario::Sphere1d, Gap::Planar(_)) => {
                return bad("gap", "sphere1d takes a scalar gap".into())
            }
            (Scenario::QuarterDisk2d, Gap::Radial(_)) => {
                return bad("gap", "quarterdisk2d takes a pair `gx, gy`".into())
            }
            _ => {}
        }
        if !(self.t_end > 0.0) {
            return bad("t_end", format!("must be positive, got {}", self.t_end));
        }
        if !(1..=4).contains(&self.order) {
            return bad("mesh.order", format!("must be in 1..=4, got {}", self.order));
        }
        if self.root_cells == 0 {
            return bad("mesh.root_cells", "must be at least 1".into());
        }
        let i = &self.integrator;
        if !(i.rtol > 0.0 && i.atol > 0.0) {
            return bad("integrator.rtol", "tolerances must be positive".into());
        }
        if !(i.tau_min > 0.0 && i.tau_min <= i.tau0 && i.tau0 <= i.tau_max) {
            return bad("integrator.tau0", "need 0 < tau_min <= tau0 <= tau_max".into());
        }
        if !(1..=5).contains(&i.max_order) {
            return bad("integrator.max_order", "must be in 1..=5".into());
        }
        let a = &self.adaptivity;
        if !(0.0 < a.theta_c && a.theta_c < a.theta_r && a.theta_r <= 1.0) {
            return bad("adaptivity.theta_r", "need 0 < theta_c < theta_r <= 1".into());
        }
        if !(a.rtol_x > 0.0 && a.atol_x > 0.0) {
            return bad("adaptivity.rtol_x", "tolerances must be positive".into());
        }
        if a.min_level > a.max_level {
            return bad("adaptivity.min_level", "must not exceed max_level".into());
        }
        if self.newton.max_iters == 0 || !(self.newton.tol > 0.0) {
            return bad("newton.max_iters", "need max_iters >= 1 and tol > 0".into());
        }
        if !(self.ncp_alpha > 0.0) {
            return bad("contact.alpha", "must be positive".into());
        }
        let c0 = self.raw.c0 / self.raw.c_max;
        let top = c0 + self.t_switch();
        for &s in self.snapshots_lithiation.iter().chain(&self.snapshots_delithiation) {
            if !(s >= c0 - 1e-3 && s <= top + 1e-3) {
                return bad("snapshots", format!("SOC {s} outside [{c0}, {top}]"));
            }
        }
        Ok(())
    }

    /// Effective configuration as `key = value` text; parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let r = &self.raw;
        let i = &self.integrator;
        let a = &self.adaptivity;
        let n = &self.newton;
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let gap = match self.gap {
            Gap::Radial(g) => g.to_string(),
            Gap::Planar(g) => format!("{}, {}", g[0], g[1]),
        };
        vec![
            ("scenario", self.scenario.name().into()),
            ("gap", gap),
            ("t_end", self.t_end.to_string()),
            ("snapshots.lithiation", list(&self.snapshots_lithiation)),
            ("snapshots.delithiation", list(&self.snapshots_delithiation)),
            ("params.r_gas", r.r_gas.to_string()),
            ("params.faraday", r.faraday.to_string()),
            ("params.temperature", r.temperature.to_string()),
            ("params.l0", r.l0.to_string()),
            ("params.diffusivity", r.diffusivity.to_string()),
            ("params.e_h", r.e_h.to_string()),
            ("params.nu", r.nu.to_string()),
            ("params.v_pmv", r.v_pmv.to_string()),
            ("params.c_max", r.c_max.to_string()),
            ("params.c0", r.c0.to_string()),
            ("params.c_rate", r.c_rate.to_string()),
            ("params.u_max", r.u_max.to_string()),
            ("params.u_min", r.u_min.to_string()),
            (
                "material.lame_convention",
                match self.lame {
                    LameConvention::Standard => "standard".into(),
                    LameConvention::TwoNu => "two_nu".into(),
                },
            ),
            ("mesh.order", self.order.to_string()),
            ("mesh.root_cells", self.root_cells.to_string()),
            ("mesh.initial_level", self.initial_level.to_string()),
            (
                "integrator.family",
                match i.family {
                    Family::Ndf => "ndf".into(),
                    Family::Bdf => "bdf".into(),
                },
            ),
            ("integrator.rtol", i.rtol.to_string()),
            ("integrator.atol", i.atol.to_string()),
            ("integrator.tau0", i.tau0.to_string()),
            ("integrator.tau_min", i.tau_min.to_string()),
            ("integrator.tau_max", i.tau_max.to_string()),
            ("integrator.max_order", i.max_order.to_string()),
            ("integrator.grow_cap", i.grow_cap.to_string()),
            ("integrator.shrink_floor", i.shrink_floor.to_string()),
            ("integrator.safety", i.safety.to_string()),
            ("adaptivity.enabled", self.adaptive.to_string()),
            ("adaptivity.rtol_x", a.rtol_x.to_string()),
            ("adaptivity.atol_x", a.atol_x.to_string()),
            ("adaptivity.theta_c", a.theta_c.to_string()),
            ("adaptivity.theta_r", a.theta_r.to_string()),
            ("adaptivity.min_level", a.min_level.to_string()),
            ("adaptivity.max_level", a.max_level.to_string()),
            ("adaptivity.max_space_redos", a.max_space_redos.to_string()),
            ("adaptivity.cooldown", a.cooldown.to_string()),
            ("adaptivity.skip_space_steps", self.skip_space_steps.to_string()),
            ("newton.max_iters", n.max_iters.to_string()),
            ("newton.reduction", n.reduction.to_string()),
            ("newton.tol", n.tol.to_string()),
            ("newton.allow_refine_retry", n.allow_refine_retry.to_string()),
            ("contact.alpha", self.ncp_alpha.to_string()),
            ("switch.tau", self.switch_tau.to_string()),
            ("switch.steps", self.switch_steps.to_string()),
            (
                "output.dir",
                self.output_dir
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default(),
            ),
            ("seed", self.seed.to_string()),
        ]
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        let inv = |reason: String| ConfigError::Invalid {
            key: key.into(),
            reason,
        };
        let f = |v: &str| -> Result<f64, ConfigError> {
            let t = v.trim();
            match t.to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "none" => Ok(f64::INFINITY),
                _ => t.parse::<f64>().map_err(|e| inv(format!("`{t}`: {e}"))),
            }
        };
        let u = |v: &str| -> Result<usize, ConfigError> {
            v.trim().parse::<usize>().map_err(|e| inv(format!("`{}`: {e}", v.trim())))
        };
        let b = |v: &str| -> Result<bool, ConfigError> {
            v.trim().parse::<bool>().map_err(|e| inv(format!("`{}`: {e}", v.trim())))
        };
        let list = |v: &str| -> Result<Vec<f64>, ConfigError> {
            if v.trim().is_empty() {
                return Ok(Vec::new());
            }
            v.split(',').map(f).collect()
        };
        let r = &mut self.raw;
        match key {
            "scenario" => {}
            "gap" => {
                let g = list(v)?;
                self.gap = match (self.scenario, g.as_slice()) {
                    (Scenario::Sphere1d, [x]) => Gap::Radial(*x),
                    (Scenario::QuarterDisk2d, [x, y]) => Gap::Planar([*x, *y]),
                    (Scenario::QuarterDisk2d, [x]) => Gap::Planar([*x, *x]),
                    _ => return Err(inv(format!("`{v}` does not fit scenario"))),
                };
            }
            "t_end" => self.t_end = f(v)?,
            "snapshots.lithiation" => self.snapshots_lithiation = list(v)?,
            "snapshots.delithiation" => self.snapshots_delithiation = list(v)?,
            "params.r_gas" => r.r_gas = f(v)?,
            "params.faraday" => r.faraday = f(v)?,
            "params.temperature" => r.temperature = f(v)?,
            "params.l0" => r.l0 = f(v)?,
            "params.diffusivity" => r.diffusivity = f(v)?,
            "params.e_h" => r.e_h = f(v)?,
            "params.nu" => r.nu = f(v)?,
            "params.v_pmv" => r.v_pmv = f(v)?,
            "params.c_max" => r.c_max = f(v)?,
            "params.c0" => r.c0 = f(v)?,
            "params.c_rate" => r.c_rate = f(v)?,
            "params.u_max" => r.u_max = f(v)?,
            "params.u_min" => r.u_min = f(v)?,
            "material.lame_convention" => {
                self.lame = match v.trim() {
                    "standard" => LameConvention::Standard,
                    "two_nu" => LameConvention::TwoNu,
                    o => return Err(inv(format!("`{o}` is not standard|two_nu"))),
                }
            }
            "mesh.order" => self.order = u(v)?,
            "mesh.root_cells" => self.root_cells = u(v)?,
            "mesh.initial_level" => self.initial_level = u(v)?,
            "integrator.family" => {
                self.integrator.family = match v.trim() {
                    "ndf" => Family::Ndf,
                    "bdf" => Family::Bdf,
                    o => return Err(inv(format!("`{o}` is not ndf|bdf"))),
                }
            }
            "integrator.rtol" => self.integrator.rtol = f(v)?,
            "integrator.atol" => self.integrator.atol = f(v)?,
            "integrator.tau0" => self.integrator.tau0 = f(v)?,
            "integrator.tau_min" => self.integrator.tau_min = f(v)?,
            "integrator.tau_max" => self.integrator.tau_max = f(v)?,
            "integrator.max_order" => self.integrator.max_order = u(v)?,
            "integrator.grow_cap" => self.integrator.grow_cap = f(v)?,
            "integrator.shrink_floor" => self.integrator.shrink_floor = f(v)?,
            "integrator.safety" => self.integrator.safety = f(v)?,
            "adaptivity.enabled" => self.adaptive = b(v)?,
            "adaptivity.rtol_x" => self.adaptivity.rtol_x = f(v)?,
            "adaptivity.atol_x" => self.adaptivity.atol_x = f(v)?,
            "adaptivity.theta_c" => self.adaptivity.theta_c = f(v)?,
            "adaptivity.theta_r" => self.adaptivity.theta_r = f(v)?,
            "adaptivity.min_level" => self.adaptivity.min_level = u(v)?,
            "adaptivity.max_level" => self.adaptivity.max_level = u(v)?,
            "adaptivity.max_space_redos" => self.adaptivity.max_space_redos = u(v)?,
            "adaptivity.cooldown" => self.adaptivity.cooldown = u(v)? as u64,
            "adaptivity.skip_space_steps" => self.skip_space_steps = u(v)?,
            "newton.max_iters" => self.newton.max_iters = u(v)?,
            "newton.reduction" => self.newton.reduction = f(v)?,
            "newton.tol" => self.newton.tol = f(v)?,
            "newton.allow_refine_retry" => self.newton.allow_refine_retry = b(v)?,
            "contact.alpha" => self.ncp_alpha = f(v)?,
            "switch.tau" => self.switch_tau = f(v)?,
            "switch.steps" => self.switch_steps = u(v)?,
            "output.dir" => {
                let t = v.trim();
                self.output_dir = (!t.is_empty()).then(|| PathBuf::from(t));
            }
            "seed" => self.seed = v.trim().parse().map_err(|e| inv(format!("{e}")))?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }
}

fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: n + 1,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(ConfigError::Syntax {
                line: n + 1,
                msg: "empty key".into(),
            });
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Parse configuration text followed by `key=value` overrides.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ScenarioConfig, ConfigError> {
    let mut pairs = parse_pairs(text)?;
    for o in overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: 0,
            msg: format!("override `{o}` is not key=value"),
        })?;
        pairs.push((k.trim().into(), v.trim().into()));
    }
    let map: BTreeMap<&str, &str> = pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
    let scenario = match map.get("scenario").copied().unwrap_or("sphere1d") {
        "sphere1d" => Scenario::Sphere1d,
        "quarterdisk2d" => Scenario::QuarterDisk2d,
        o => {
            return Err(ConfigError::Invalid {
                key: "scenario".into(),
                reason: format!("`{o}` is not sphere1d|quarterdisk2d"),
            })
        }
    };
    if scenario == Scenario::Sphere1d && !map.contains_key("gap") {
        return Err(ConfigError::MissingGap);
    }
    let mut cfg = ScenarioConfig::defaults(scenario);
    for (k, v) in &pairs {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_requires_gap() {
        assert!(matches!(parse_config("", &[]), Err(ConfigError::MissingGap)));
    }

    #[test]
    fn gap_only_gives_baseline() {
        let c = parse_config("gap = 0.4\n", &[]).unwrap();
        assert_eq!(c, ScenarioConfig::defaults(Scenario::Sphere1d));
    }

    #[test]
    fn negative_gap_rejected() {
        let e = parse_config("gap = -0.1", &[]).unwrap_err();
        assert!(matches!(e, ConfigError::Invalid { ref key, .. } if key == "gap"));
    }

    #[test]
    fn unknown_key_rejected() {
        let e = parse_config("gap = 0.4\nfoo.bar = 1", &[]).unwrap_err();
        assert!(matches!(e, ConfigError::UnknownKey(ref k) if k == "foo.bar"));
    }

    #[test]
    fn infinite_gap_and_overrides() {
        let c = parse_config("gap = 0.4 # comment", &["gap=inf".into(), "t_end = 1.9".into()]).unwrap();
        assert_eq!(c.gap, Gap::Radial(f64::INFINITY));
        assert_eq!(c.t_end, 1.9);
    }

    #[test]
    fn text_round_trip() {
        for s in [Scenario::Sphere1d, Scenario::QuarterDisk2d] {
            let mut c = ScenarioConfig::defaults(s);
            c.output_dir = Some("out/run".into());
            let back = parse_config(&c.to_text(), &[]).unwrap();
            assert_eq!(back, c);
        }
    }
}
