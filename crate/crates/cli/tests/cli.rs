use chemo_contact::sim::parse_config;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chemo-sim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

#[test]
fn invalid_gap_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "gap = -0.1\n");
    let out = sim(&["simulate", "--config", &cfg, "--output-dir", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gap"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "gap = 0.4\nmesh.colour = red\n");
    let out = sim(&["simulate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mesh.colour"));
}

#[test]
fn missing_gap_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = sim(&["simulate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let out = sim(&["simulate", "--config", "/nonexistent/run.cfg"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn unwritable_output_dir_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "gap = 0.4\n");
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = sim(&["simulate", "--config", &cfg, "--output-dir", blocker.join("out").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn no_accepted_steps_leave_headers_only() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "gap = 0.4\n");
    let dir = tmp.path().join("out");
    let out = sim(&[
        "simulate",
        "--config",
        &cfg,
        "--output-dir",
        dir.to_str().unwrap(),
        "--override",
        "integrator.rtol=1e-300",
        "--override",
        "integrator.atol=1e-300",
    ]);
    assert_eq!(out.status.code(), Some(3));
    for name in ["timeseries.csv", "steps.csv", "contact.csv", "estimator.csv"] {
        assert_eq!(lines(&dir.join(name)).len(), 1, "{name}");
    }
    assert!(!dir.join("plots").exists());
    assert!(dir.join("manifest.json").exists());
}

#[test]
fn run_writes_artifacts_and_plots_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "gap = 0.4\nt_end = 0.2\nsnapshots.lithiation = 0.02, 0.05\nsnapshots.delithiation = 0.05\n");
    let dir = tmp.path().join("out");
    let out = sim(&["simulate", "--config", &cfg, "--output-dir", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let ts = lines(&dir.join("timeseries.csv"));
    assert_eq!(ts[0], "t,soc,tau,order,dofs,n_active,max_sigma_h_gpa,max_sigma_vm_gpa");
    assert!(ts.len() > 10);
    let steps = lines(&dir.join("steps.csv"));
    assert_eq!(steps.len(), ts.len());

    let snap = lines(&dir.join("snapshots").join("lithiation_0.02.csv"));
    let header: Vec<&str> = snap[0].split(',').collect();
    let ci = header.iter().position(|h| *h == "c").unwrap();
    let c: Vec<f64> = snap[1..].iter().map(|r| r.split(',').nth(ci).unwrap().parse().unwrap()).collect();
    // c0 = 6.23e3 / 311.47e3 is 0.02 to five digits.
    assert!(c.iter().all(|v| *v == c[0] && (v - 0.02).abs() < 1e-5), "{c:?}");

    let plots = dir.join("plots");
    let mut before: Vec<(String, Vec<u8>)> = fs::read_dir(&plots)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    before.sort();
    assert!(before.iter().any(|(n, _)| n == "stress_soc.svg"));
    fs::remove_dir_all(&plots).unwrap();
    let out = sim(&["plot", "--input", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    for (name, bytes) in &before {
        assert_eq!(&fs::read(plots.join(name)).unwrap(), bytes, "{name}");
    }

    let echoed = fs::read_to_string(dir.join("config.txt")).unwrap();
    let reloaded = parse_config(&echoed, &[]).unwrap();
    assert_eq!(reloaded.to_text(), echoed);
    assert_eq!(reloaded.t_end, 0.2);
    let manifest = fs::read_to_string(dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"status\": \"completed\""));
}

#[test]
fn plotting_an_empty_directory_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = sim(&["plot", "--input", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "gap = 0.4\nt_end = 0.1\nsnapshots.lithiation = 0.02\nsnapshots.delithiation = 0.02\n");
    let root = tmp.path().join("sweep");
    let out = sim(&[
        "sweep", "--config", &cfg, "--key", "gap", "--values", "0.3,0.5", "--jobs", "2", "--output-dir",
        root.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for v in ["0.3", "0.5"] {
        let m = fs::read_to_string(root.join(format!("gap_{v}")).join("manifest.json")).unwrap();
        assert!(m.contains(v));
    }
}
