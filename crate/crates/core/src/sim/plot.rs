//! SVG line charts generated from the run CSVs only.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-300);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * span {
        out.push(if t.abs() < 1e-12 * span { 0.0 } else { t });
        t += step;
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Render a line chart; `log_y` plots `log10(y)` with decade ticks.
pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series], log_y: bool) -> String {
    let ty = |y: f64| if log_y { y.log10() } else { y };
    let pts = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_y || *y > 0.0));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        let y = ty(y);
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 <= 0.0 {
        y0 -= 0.5;
        y1 += 0.5;
    } else if !log_y {
        let pad = 0.05 * (y1 - y0);
        y0 -= pad;
        y1 += pad;
    }
    if log_y {
        y0 = y0.floor();
        y1 = y1.ceil();
    }
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for t in nice_ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(
            s,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{TOP}\" stroke=\"#ddd\"/>\n<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            TOP + ph,
            TOP + ph + 16.0,
            fmt_tick(t)
        );
    }
    let yt: Vec<f64> = if log_y {
        (y0 as i64..=y1 as i64).map(|d| d as f64).collect()
    } else {
        nice_ticks(y0, y1)
    };
    for t in yt {
        let y = sy(t);
        let label = if log_y { format!("1e{}", t as i64) } else { fmt_tick(t) };
        let _ = writeln!(
            s,
            "<line x1=\"{LEFT}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#ddd\"/>\n<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{label}</text>",
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(ylabel)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = ser
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_y || *y > 0.0))
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(ty(y))))
            .collect();
        if !path.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                path.join(" ")
            );
        }
        if series.len() > 1 {
            let ly = TOP + 14.0 + 16.0 * i as f64;
            let lx = LEFT + pw - 150.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{ly:.1}">{}</text>"#,
                ly - 4.0,
                lx + 20.0,
                ly - 4.0,
                lx + 26.0,
                escape(&ser.name)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Columns of a CSV file by header name; empty cells become NaN.
pub fn read_columns(path: &Path) -> io::Result<(Vec<String>, Vec<Vec<f64>>)> {
    let ctx = |e: &dyn std::fmt::Display| io::Error::other(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| ctx(&e))?;
    let header: Vec<String> = r.headers().map_err(|e| ctx(&e))?.iter().map(String::from).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for rec in r.records() {
        let rec = rec.map_err(|e| ctx(&e))?;
        for (j, f) in rec.iter().enumerate().take(header.len()) {
            cols[j].push(f.parse::<f64>().unwrap_or(f64::NAN));
        }
    }
    Ok((header, cols))
}

fn col<'a>(h: &[String], c: &'a [Vec<f64>], name: &str) -> Option<&'a Vec<f64>> {
    h.iter().position(|x| x == name).map(|j| &c[j])
}

fn zip(x: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    x.iter().copied().zip(y.iter().copied()).collect()
}

/// Regenerate every plot of a run directory under `<dir>/plots`.
/// Fails if the time series holds no rows.
pub fn plot_run(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let (h, c) = read_columns(&dir.join("timeseries.csv"))?;
    let n = c.first().map_or(0, |v| v.len());
    if n == 0 {
        return Err(io::Error::other(format!("{}: no accepted steps to plot", dir.display())));
    }
    let out = dir.join("plots");
    fs::create_dir_all(&out)?;
    let mut written = Vec::new();
    let mut emit = |name: &str, svg: String| -> io::Result<()> {
        let p = out.join(name);
        fs::write(&p, svg).map_err(|e| io::Error::other(format!("{}: {e}", p.display())))?;
        written.push(p);
        Ok(())
    };
    let get = |name| col(&h, &c, name).cloned().unwrap_or_default();
    let (t, soc) = (get("t"), get("soc"));
    let sh = get("max_sigma_h_gpa");
    let vm = get("max_sigma_vm_gpa");
    let (stress, label) = if sh.iter().any(|v| v.is_finite()) {
        (sh, "max |sigma_h| [GPa]")
    } else {
        (vm, "max sigma_vM [GPa]")
    };
    let one = |name: &str, pts| vec![Series { name: name.into(), points: pts }];
    emit("stress_soc.svg", line_chart("Maximal stress over SOC", "SOC", label, &one("stress", zip(&soc, &stress)), false))?;
    emit("tau.svg", line_chart("Time step size", "t", "tau", &one("tau", zip(&t, &get("tau"))), true))?;
    emit("dofs.svg", line_chart("Degrees of freedom", "t", "DOFs", &one("dofs", zip(&t, &get("dofs"))), false))?;
    emit("active_soc.svg", line_chart("Active set size over SOC", "SOC", "|A|", &one("|A|", zip(&soc, &get("n_active"))), false))?;

    let snap_dir = dir.join("snapshots");
    if snap_dir.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(&snap_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        let mut by_phase: Vec<(String, Vec<Series>, Vec<Series>)> = Vec::new();
        for f in &files {
            let (sh, sc) = read_columns(f)?;
            let Some(r) = col(&sh, &sc, "r") else { continue };
            let stem = f.file_stem().unwrap_or_default().to_string_lossy().to_string();
            let (phase, soc) = stem.split_once('_').unwrap_or((&stem, ""));
            let entry = match by_phase.iter_mut().find(|e| e.0 == phase) {
                Some(e) => e,
                None => {
                    by_phase.push((phase.to_string(), Vec::new(), Vec::new()));
                    by_phase.last_mut().expect("just pushed")
                }
            };
            if let Some(cc) = col(&sh, &sc, "c") {
                entry.1.push(Series { name: format!("SOC {soc}"), points: zip(r, cc) });
            }
            if let Some(sr) = col(&sh, &sc, "sigma_r") {
                entry.2.push(Series { name: format!("SOC {soc}"), points: zip(r, sr) });
            }
        }
        for (phase, conc, sr) in by_phase {
            emit(
                &format!("concentration_{phase}.svg"),
                line_chart(&format!("Concentration profiles ({phase})"), "r", "c", &conc, false),
            )?;
            emit(
                &format!("radial_stress_{phase}.svg"),
                line_chart(&format!("Radial stress profiles ({phase})"), "r", "sigma_r [GPa]", &sr, false),
            )?;
        }
    }
    Ok(written)
}
