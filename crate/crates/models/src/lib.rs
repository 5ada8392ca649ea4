//! Forecasting models for hourly price panels: ARIMA, DLinear, NLinear,
//! TSMixer and PatchTST, plus the mini-batch trainer used for the neural ones.
//!
//! Neural models map a context `[B, L, C]` to a forecast `[B, H, C]`.

mod arima;
mod decompose;
mod error;
mod forecaster;
mod nets;
mod network;
pub mod selfcheck;
mod trainer;
mod window;

pub use arima::{
    difference, fit_arima, fit_order, make_invertible, select_arima, ArimaConfig, ArimaModel, ArimaOrder, FitStatus,
};
pub use decompose::series_decompose;
pub use error::ModelError;
pub use forecaster::{naive_forecast, Forecaster};
pub use nets::{DLinearConfig, NLinearConfig, PatchTstConfig, TsMixerConfig};
pub use network::{forward_with, NeuralConfig, NeuralModel};
pub use trainer::{evaluate_loss, train, EarlyStopping, TrainConfig, TrainHistory};
pub use window::SeriesBlock;

pub use gridcast_core::{HORIZON, INPUT_LEN};
