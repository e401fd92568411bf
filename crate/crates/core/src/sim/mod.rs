//! Scenario configuration, the cycling driver and result output.

pub mod config;
pub mod driver;
pub mod output;
pub mod plot;

pub use config::{load_config, parse_config, ConfigError, Scenario, ScenarioConfig};
pub use driver::{run, run_scenario, RunSummary, SimError, Sink, Snapshot, StepRecord};
pub use output::{write_manifest, RunWriter};
pub use plot::plot_run;
