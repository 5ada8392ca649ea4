//! Benchmark orchestration for the gridcast workbench: configuration, the
//! walk-forward runner, the on-disk result store, CSV reports, binary panel
//! files and the external forecaster protocol.

pub mod bench;
pub mod config;
mod error;
pub mod external;
pub mod panel_file;
pub mod protocol;
pub mod report;
pub mod store;

pub use bench::{fit_unit, load_panel, plan_for, replay_forecast, run_benchmark, BenchOutcome, RunOptions};
pub use config::{BenchConfig, DataSource, ModelEntry, ModelKind, PlanConfig, Precision};
pub use error::HarnessError;
pub use external::{forecast_external, forecast_series, ExternalError, ExternalForecasterSpec};
pub use panel_file::{read_panel, write_panel};
pub use report::{emit_report, rank_scores, render_report, ReportKind};
pub use store::{ResultStore, StoredRecord};
