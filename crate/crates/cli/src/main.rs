use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use chemo_contact::sim::{
    load_config, output::write_snapshot, plot_run, run_scenario, write_manifest, ConfigError, RunWriter,
    ScenarioConfig, SimError,
};
use clap::{Parser, Subcommand};
use log::{error, info};

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "chemo-sim", version, about = "Chemo-mechanical particle cycling with obstacle contact")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write CSVs, snapshots, plots and a manifest.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// `key=value`, applied after the file; repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Regenerate plots from the CSVs of a run directory.
    Plot {
        #[arg(long)]
        input: PathBuf,
    },
    /// Run one scenario per value of a key, each in its own process.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "gap")]
        key: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn config_or_exit(path: &Path, overrides: &[String]) -> Result<ScenarioConfig, ExitCode> {
    load_config(path, overrides).map_err(|e| {
        error!("config: {e}");
        eprintln!("error: {e}");
        match e {
            ConfigError::Io { .. } => ExitCode::from(EXIT_IO),
            _ => ExitCode::from(EXIT_CONFIG),
        }
    })
}

fn io_fail(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_IO)
}

fn simulate(config: &Path, output_dir: Option<PathBuf>, overrides: &[String]) -> ExitCode {
    let cfg = match config_or_exit(config, overrides) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let dir = output_dir
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("output"));
    let mut writer = match RunWriter::create(&dir) {
        Ok(w) => w,
        Err(e) => return io_fail(e),
    };
    let start = Instant::now();
    info!("running {} into {}", cfg.scenario.name(), dir.display());
    let result = run_scenario(&cfg, &mut writer);
    let wall = start.elapsed().as_secs_f64();
    match result {
        Ok(summary) => {
            if summary.records.is_empty() {
                let _ = write_manifest(&dir, &cfg, Some(&summary), "no accepted steps", wall);
                eprintln!("error: no accepted steps");
                return ExitCode::from(EXIT_SOLVER);
            }
            if let Err(e) = plot_run(&dir) {
                return io_fail(e);
            }
            if let Err(e) = write_manifest(&dir, &cfg, Some(&summary), "completed", wall) {
                return io_fail(e);
            }
            let peak = summary
                .records
                .iter()
                .map(|r| if r.max_sigma_h.is_nan() { r.max_sigma_vm } else { r.max_sigma_h })
                .fold(0.0, f64::max);
            println!(
                "completed: {} steps, peak DOFs {}, max stress {peak:.3} GPa, first contact SOC {}, {wall:.1} s",
                summary.records.len(),
                summary.peak_dofs,
                summary
                    .first_contact()
                    .map_or("none".to_string(), |r| format!("{:.4}", r.soc)),
            );
            ExitCode::SUCCESS
        }
        Err(SimError::Solver { t, message, state }) => {
            eprintln!("error: solver failure at t = {t:.6e}: {message}");
            let dump = write_snapshot(&dir, &state);
            let _ = write_manifest(&dir, &cfg, None, &format!("solver failure: {message}"), wall);
            if let Ok(p) = dump {
                eprintln!("state written to {}", p.display());
            }
            ExitCode::from(EXIT_SOLVER)
        }
        Err(SimError::Io(e)) => io_fail(e),
        Err(e) => {
            eprintln!("error: {e}");
            let _ = write_manifest(&dir, &cfg, None, &format!("failed: {e}"), wall);
            ExitCode::from(EXIT_SOLVER)
        }
    }
}

fn sweep(
    config: &Path,
    key: &str,
    values: &[String],
    output_dir: Option<PathBuf>,
    jobs: usize,
    overrides: &[String],
) -> ExitCode {
    let cfg = match config_or_exit(config, overrides) {
        Ok(c) => c,
        Err(code) => return code,
    };
    for v in values {
        let mut o = overrides.to_vec();
        o.push(format!("{key}={v}"));
        if let Err(code) = config_or_exit(config, &o) {
            return code;
        }
    }
    let root = output_dir
        .or(cfg.output_dir)
        .unwrap_or_else(|| PathBuf::from("sweep"));
    let exe = match std::env::current_exe() {
        Ok(p) => p,
        Err(e) => return io_fail(e),
    };
    let mut worst = 0u8;
    for chunk in values.chunks(jobs.max(1)) {
        let mut children = Vec::new();
        for v in chunk {
            let dir = root.join(format!("{}_{}", key.replace('.', "_"), v.trim().replace(',', "_")));
            let mut cmd = Command::new(&exe);
            cmd.arg("simulate").arg("--config").arg(config).arg("--output-dir").arg(&dir);
            for o in overrides {
                cmd.arg("--override").arg(o);
            }
            cmd.arg("--override").arg(format!("{key}={v}"));
            match cmd.spawn() {
                Ok(c) => children.push((v.clone(), c)),
                Err(e) => return io_fail(e),
            }
        }
        for (v, mut c) in children {
            let code = c.wait().ok().and_then(|s| s.code()).unwrap_or(EXIT_SOLVER as i32) as u8;
            println!("{key} = {v}: exit {code}");
            worst = worst.max(code);
        }
    }
    ExitCode::from(worst)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Cmd::Simulate {
            config,
            output_dir,
            overrides,
        } => simulate(&config, output_dir, &overrides),
        Cmd::Plot { input } => match plot_run(&input) {
            Ok(files) => {
                for f in files {
                    println!("{}", f.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => io_fail(e),
        },
        Cmd::Sweep {
            config,
            key,
            values,
            output_dir,
            jobs,
            overrides,
        } => sweep(&config, &key, &values, output_dir, jobs, &overrides),
    }
}
