//! Data model and statistics for the gridcast forecasting workbench.
//!
//! - [`panel`]: hourly multi-channel price panels, walk-forward plans,
//!   per-fold scaling and evaluation windows.
//! - [`ingest`]: long-format CSV parsing and gap repair.
//! - [`synth`]: seeded synthetic price-like series.
//! - [`stats`]: autocorrelation and partial autocorrelation.
//! - [`metrics`]: error metrics, the combined indicator, ranking and the
//!   Friedman test.

pub mod ingest;
pub mod metrics;
pub mod panel;
pub mod stats;
pub mod synth;

pub use ingest::{parse_price_csv, repair_gaps, GapPolicy, IngestError, IngestOptions};
pub use metrics::{
    aggregate, compute_metrics, friedman_test, performance_indicator, rank_models, FriedmanResult,
    GroupBy, MetricError, MetricSet, RankTable, ResultRecord, ScoreTable,
};
pub use panel::{
    build_panel, enumerate_eval_windows, make_walk_forward_plan, ChannelScaler, EvalWindow, Fold,
    PanelError, PriceRecord, PricePanel, ScaleDirection, WalkForwardPlan,
};
pub use stats::{autocorrelation, durbin_levinson, pacf, yule_walker, PacfResult, StatsError};
pub use synth::{generate_panel, generate_series, JumpSpec, Seasonal, SynthError, SynthSpec, TrendSegment};

/// Context length used throughout the benchmark (hours).
pub const INPUT_LEN: usize = 96;
/// Forecast horizon used throughout the benchmark (hours).
pub const HORIZON: usize = 96;
