//! CSV writers and the run manifest.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use csv::Writer;

use super::config::ScenarioConfig;
use super::driver::{RunSummary, Sink, Snapshot, StepRecord};
use crate::contact::Phase;

pub const TIMESERIES_HEADER: [&str; 8] =
    ["t", "soc", "tau", "order", "dofs", "n_active", "max_sigma_h_gpa", "max_sigma_vm_gpa"];
pub const STEPS_HEADER: [&str; 10] =
    ["step", "t", "tau", "order", "est_t", "est_x", "newton_iters", "n_active", "dofs", "phase"];
pub const CONTACT_HEADER: [&str; 11] = [
    "t",
    "soc",
    "n_active",
    "max_gap",
    "max_neg_lambda",
    "max_complementarity",
    "c_active_mean",
    "c_inactive_mean",
    "vm_x",
    "vm_y",
    "active_points",
];
pub const ESTIMATOR_HEADER: [&str; 5] = ["t", "eta_total", "eta_max", "n_refined", "n_coarsened"];

fn ctx(path: &Path, e: impl std::fmt::Display) -> io::Error {
    io::Error::other(format!("{}: {e}", path.display()))
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:e}")
    }
}

struct Table {
    path: PathBuf,
    w: Writer<File>,
}

impl Table {
    fn create(path: PathBuf, header: &[&str]) -> io::Result<Self> {
        let file = File::create(&path).map_err(|e| ctx(&path, e))?;
        let mut w = Writer::from_writer(file);
        w.write_record(header).map_err(|e| ctx(&path, e))?;
        w.flush().map_err(|e| ctx(&path, e))?;
        Ok(Self { path, w })
    }

    fn row(&mut self, fields: &[String]) -> io::Result<()> {
        self.w.write_record(fields).map_err(|e| ctx(&self.path, e))?;
        self.w.flush().map_err(|e| ctx(&self.path, e))
    }
}

/// Streams results into an output directory, flushing every row.
pub struct RunWriter {
    dir: PathBuf,
    timeseries: Table,
    steps: Table,
    contact: Table,
    estimator: Table,
}

impl RunWriter {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir.join("snapshots")).map_err(|e| ctx(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            timeseries: Table::create(dir.join("timeseries.csv"), &TIMESERIES_HEADER)?,
            steps: Table::create(dir.join("steps.csv"), &STEPS_HEADER)?,
            contact: Table::create(dir.join("contact.csv"), &CONTACT_HEADER)?,
            estimator: Table::create(dir.join("estimator.csv"), &ESTIMATOR_HEADER)?,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::Lithiation => "lithiation",
        Phase::Delithiation => "delithiation",
    }
}

impl Sink for RunWriter {
    fn step(&mut self, r: &StepRecord) -> io::Result<()> {
        self.timeseries.row(&[
            num(r.t),
            num(r.soc),
            num(r.tau),
            r.order.to_string(),
            r.dofs.to_string(),
            r.n_active.to_string(),
            num(r.max_sigma_h),
            num(r.max_sigma_vm),
        ])?;
        self.steps.row(&[
            r.step.to_string(),
            num(r.t),
            num(r.tau),
            r.order.to_string(),
            num(r.est_t),
            num(r.est_x),
            r.newton_iters.to_string(),
            r.n_active.to_string(),
            r.dofs.to_string(),
            phase_name(r.phase).into(),
        ])?;
        let points = r
            .active
            .iter()
            .map(|(x, k)| format!("{:.6}:{:.6}:{k}", x[0], x[1]))
            .collect::<Vec<_>>()
            .join(" ");
        let fin = |v: f64| if v.is_finite() { num(v) } else { String::new() };
        self.contact.row(&[
            num(r.t),
            num(r.soc),
            r.n_active.to_string(),
            fin(r.kkt.0),
            fin(r.kkt.1),
            fin(r.kkt.2),
            num(r.c_active_mean),
            num(r.c_inactive_mean),
            num(r.max_sigma_vm_at[0]),
            num(r.max_sigma_vm_at[1]),
            points,
        ])?;
        self.estimator.row(&[
            num(r.t),
            num(r.eta_total),
            num(r.eta_max),
            r.n_refined.to_string(),
            r.n_coarsened.to_string(),
        ])
    }

    fn snapshot(&mut self, s: &Snapshot) -> io::Result<()> {
        write_snapshot(&self.dir.join("snapshots"), s).map(|_| ())
    }
}

/// Write one snapshot as `<dir>/<label>.csv`.
pub fn write_snapshot(dir: &Path, s: &Snapshot) -> io::Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| ctx(dir, e))?;
    let path = dir.join(format!("{}.csv", s.label));
    let mut t = Table::create(path.clone(), &s.columns.iter().map(String::as_str).collect::<Vec<_>>())?;
    for row in &s.rows {
        t.row(&row.iter().map(|v| num(*v)).collect::<Vec<_>>())?;
    }
    Ok(path)
}

/// Manifest with the effective configuration, code version and run totals.
pub fn write_manifest(
    dir: &Path,
    cfg: &ScenarioConfig,
    summary: Option<&RunSummary>,
    status: &str,
    wall_seconds: f64,
) -> io::Result<PathBuf> {
    let path = dir.join("manifest.json");
    let mut m = serde_json::json!({
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "status": status,
        "wall_seconds": wall_seconds,
        "config": cfg.to_text(),
    });
    if let Some(s) = summary {
        m["accepted_steps"] = s.stats.accepted.into();
        m["error_rejections"] = s.stats.error_rejections.into();
        m["corrector_failures"] = s.stats.corrector_failures.into();
        m["peak_dofs"] = s.peak_dofs.into();
        m["stress_scale_pa"] = s.scaled.stress_scale.into();
        m["first_contact_soc"] = s.first_contact().map(|r| r.soc).into();
    }
    let text = serde_json::to_string_pretty(&m).map_err(|e| ctx(&path, e))?;
    let mut f = File::create(&path).map_err(|e| ctx(&path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| ctx(&path, e))?;
    f.write_all(b"\n").map_err(|e| ctx(&path, e))?;
    fs::write(dir.join("config.txt"), cfg.to_text()).map_err(|e| ctx(&dir.join("config.txt"), e))?;
    Ok(path)
}
