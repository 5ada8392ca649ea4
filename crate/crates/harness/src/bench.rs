//! Walk-forward benchmark execution.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use chrono::Utc;
use gridcast_autodiff::Scalar;
use gridcast_core::{
    compute_metrics, enumerate_eval_windows, generate_panel, make_walk_forward_plan, parse_price_csv, ChannelScaler,
    EvalWindow, Fold, IngestOptions, PricePanel, ScaleDirection, WalkForwardPlan,
};
use gridcast_models::{
    fit_arima, train, ArimaModel, Forecaster, NeuralConfig, NeuralModel, SeriesBlock, TrainConfig,
};

use crate::config::{BenchConfig, DataSource, ModelEntry, ModelKind, Precision};
use crate::external::{forecast_external, ExternalForecasterSpec};
use crate::panel_file::read_panel;
use crate::store::{
    checkpoint_path, ArimaFit, HistoryEntry, ResultStore, RunMeta, StoreWriter, StoredRecord, UnitResult, UnitState,
    UnitStatus, META,
};
use crate::HarnessError;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Stop after this many units have been started in this invocation, as
    /// if the process had been killed; the run can be resumed later.
    pub max_units: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutcome {
    pub store: ResultStore,
    /// Units started by this invocation.
    pub units_run: usize,
    /// False when the run stopped early because of `max_units`.
    pub complete: bool,
}

impl BenchOutcome {
    pub fn failed_units(&self) -> usize {
        self.store.failures().count()
    }
}

pub fn load_panel(config: &BenchConfig) -> Result<PricePanel, HarnessError> {
    let panel = match &config.data {
        DataSource::Panel { path } => read_panel(path)?,
        DataSource::Csv { path, fill } => {
            let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
            parse_price_csv(&bytes, &IngestOptions { gap_policy: *fill, ..IngestOptions::default() })?
        }
        DataSource::Synth { channels } => generate_panel(channels)?,
    };
    panel.ensure_complete()?;
    Ok(panel)
}

/// Seed for one purpose of one model, independent of roster order.
pub fn derive_seed(master: u64, model: &str, salt: u64) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ master;
    for b in model.bytes().chain(salt.to_le_bytes()) {
        h = (h ^ b as u64).wrapping_mul(0x100_0000_01b3);
    }
    h
}

fn rows_scaled(panel: &PricePanel, rows: std::ops::Range<usize>, scaler: &ChannelScaler) -> Result<Vec<f64>, HarnessError> {
    Ok(scaler.scale(panel.rows(rows)?, ScaleDirection::Forward)?)
}

/// A model ready to forecast one fold's windows.
pub enum Fitted<T> {
    Plain(Forecaster<T>),
    Scaled { model: NeuralModel<T>, scaler: ChannelScaler },
    External(ExternalForecasterSpec),
}

impl<T: Scalar> Fitted<T> {
    /// Raw-scale forecast `[H x C]` for a window, reading only its context.
    pub fn forecast(&self, panel: &PricePanel, window: &EvalWindow, horizon: usize) -> Result<Vec<f64>, HarnessError> {
        let context = panel.rows(window.context.clone())?;
        Ok(match self {
            Fitted::Plain(f) => f.predict(context, horizon)?,
            Fitted::Scaled { model, scaler } => {
                let z = scaler.scale(context, ScaleDirection::Forward)?;
                scaler.scale(&model.predict_window(&z)?, ScaleDirection::Inverse)?
            }
            Fitted::External(spec) => forecast_external(spec, panel.channels(), context, horizon)?,
        })
    }
}

fn train_config(config: &BenchConfig, model: &str, fold: usize) -> TrainConfig {
    TrainConfig { seed: derive_seed(config.seed, model, 1 + fold as u64), ..config.train.clone() }
}

/// Trains (or fits) one model on one fold. `previous` is the neural model of
/// the preceding fold for warm starts.
pub fn fit_unit<T: Scalar>(
    config: &BenchConfig,
    entry: &ModelEntry,
    panel: &PricePanel,
    fold: &Fold,
    previous: Option<&NeuralModel<T>>,
) -> Result<(Fitted<T>, Option<HistoryEntry>), HarnessError> {
    let name = entry.name();
    let c = panel.n_channels();
    match &entry.kind {
        ModelKind::Naive => Ok((Fitted::Plain(Forecaster::Naive { n_channels: c, horizon: config.horizon }), None)),
        ModelKind::External(spec) => Ok((Fitted::External(spec.clone()), None)),
        ModelKind::Arima(arima) => {
            let mut models: Vec<ArimaModel> = Vec::with_capacity(c);
            let mut fits = Vec::with_capacity(c);
            for (ci, country) in panel.channels().iter().enumerate() {
                let column: Vec<f64> = panel.rows(fold.train.clone())?.iter().skip(ci).step_by(c).copied().collect();
                let m = fit_arima(&column, arima)?;
                fits.push(ArimaFit { country: country.clone(), order: m.order, iterations: m.iterations, status: m.status });
                models.push(m);
            }
            let history = HistoryEntry { model: name.into(), fold: fold.index, training: None, arima: fits };
            Ok((Fitted::Plain(Forecaster::Arima(models)), Some(history)))
        }
        kind => {
            let net: NeuralConfig = kind.neural().expect("remaining kinds are networks");
            let scaler = ChannelScaler::fit(panel, fold.train.clone())?;
            let mut model = NeuralModel::<T>::new(net, c, derive_seed(config.seed, name, 0))?;
            if let Some(prev) = previous {
                model.warm_start(prev)?;
            }
            let block = SeriesBlock::new(rows_scaled(panel, fold.train.clone(), &scaler)?, c)?;
            let hist = train(&mut model, &block, &train_config(config, name, fold.index))?;
            let history = HistoryEntry { model: name.into(), fold: fold.index, training: Some(hist), arima: vec![] };
            Ok((Fitted::Scaled { model, scaler }, Some(history)))
        }
    }
}

fn score_windows<T: Scalar>(
    config: &BenchConfig,
    name: &str,
    fitted: &Fitted<T>,
    panel: &PricePanel,
    windows: &[EvalWindow],
) -> Result<Vec<StoredRecord>, HarnessError> {
    let c = panel.n_channels();
    let mut records = Vec::with_capacity(windows.len() * c);
    for w in windows {
        let pred = fitted.forecast(panel, w, config.horizon)?;
        let actual = panel.rows(w.target.clone())?;
        for (ci, country) in panel.channels().iter().enumerate() {
            let p: Vec<f64> = pred.iter().skip(ci).step_by(c).copied().collect();
            let a: Vec<f64> = actual.iter().skip(ci).step_by(c).copied().collect();
            records.push(StoredRecord {
                model: name.into(),
                country: country.clone(),
                fold: w.fold_index,
                window: w.index,
                origin: w.origin(),
                metrics: compute_metrics(&a, &p)?,
                forecast: config.store_forecasts.then_some(p),
            });
        }
    }
    Ok(records)
}

struct Shared<'a> {
    config: &'a BenchConfig,
    panel: &'a PricePanel,
    plan: &'a WalkForwardPlan,
    windows: &'a [Vec<EvalWindow>],
    existing: Option<&'a ResultStore>,
    writer: &'a Mutex<StoreWriter>,
    dir: &'a Path,
    started: &'a AtomicUsize,
    budget: usize,
}

impl Shared<'_> {
    fn done(&self, model: &str, fold: usize) -> bool {
        self.existing.is_some_and(|s| s.is_done(model, fold))
    }

    fn claim(&self) -> bool {
        self.started.fetch_add(1, Ordering::SeqCst) < self.budget
    }
}

/// Runs every fold of one model in order. Returns false when the unit budget
/// ran out.
fn run_model<T: Scalar>(sh: &Shared<'_>, entry: &ModelEntry) -> Result<bool, HarnessError> {
    let name = entry.name();
    let neural = entry.kind.neural();
    let mut previous: Option<NeuralModel<T>> = None;
    for fold in &sh.plan.folds {
        let ckpt = checkpoint_path(sh.dir, name, fold.index);
        if sh.done(name, fold.index) {
            previous = match &neural {
                Some(net) => {
                    let bytes = std::fs::read(&ckpt).map_err(|e| HarnessError::io(&ckpt, e))?;
                    let mut m = NeuralModel::<T>::zeroed(net.clone(), sh.panel.n_channels())?;
                    m.load_checkpoint(&bytes)?;
                    Some(m)
                }
                None => None,
            };
            continue;
        }
        if !sh.claim() {
            return Ok(false);
        }
        let outcome = fit_unit::<T>(sh.config, entry, sh.panel, fold, previous.as_ref()).and_then(|(fitted, history)| {
            let records = score_windows(sh.config, name, &fitted, sh.panel, &sh.windows[fold.index])?;
            if let Fitted::Scaled { model, .. } = &fitted {
                std::fs::write(&ckpt, model.to_checkpoint()?).map_err(|e| HarnessError::io(&ckpt, e))?;
            }
            Ok((fitted, history, records))
        });
        let unit = match outcome {
            Ok((fitted, history, records)) => {
                previous = match fitted {
                    Fitted::Scaled { model, .. } => Some(model),
                    _ => None,
                };
                UnitResult {
                    status: UnitStatus { model: name.into(), fold: fold.index, state: UnitState::Done, error: None },
                    records,
                    history,
                }
            }
            Err(e) => {
                // the next fold starts from fresh parameters
                previous = None;
                UnitResult {
                    status: UnitStatus {
                        model: name.into(),
                        fold: fold.index,
                        state: UnitState::Failed,
                        error: Some(e.to_string()),
                    },
                    records: vec![],
                    history: None,
                }
            }
        };
        sh.writer.lock().expect("writer lock").commit(&unit)?;
    }
    Ok(true)
}

/// Evaluation windows of every fold, after checking the plan against the panel.
pub fn plan_for(config: &BenchConfig, panel: &PricePanel) -> Result<(WalkForwardPlan, Vec<Vec<EvalWindow>>), HarnessError> {
    let p = config.plan;
    let plan = make_walk_forward_plan(panel.n_hours(), p.train_len, p.test_len, p.n_folds, p.stride)?;
    let windows = (0..plan.n_folds)
        .map(|k| enumerate_eval_windows(&plan, k, config.input_len, config.horizon, config.eval_stride))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((plan, windows))
}

/// Runs (or resumes) the benchmark into `dir`. A directory holding a run of
/// a different configuration is refused.
pub fn run_benchmark(config: &BenchConfig, dir: &Path, options: &RunOptions) -> Result<BenchOutcome, HarnessError> {
    config.validate()?;
    let panel = load_panel(config)?;
    let (plan, windows) = plan_for(config, &panel)?;

    let existing = if dir.join(META).exists() {
        let store = ResultStore::load(dir)?;
        if store.meta.config_hash != config.fingerprint() {
            return Err(HarnessError::Config(format!(
                "{} holds a run of a different configuration; use another output directory",
                dir.display()
            )));
        }
        Some(store)
    } else {
        None
    };
    let meta = RunMeta {
        config_hash: config.fingerprint(),
        seed: config.seed,
        version: env!("CARGO_PKG_VERSION").into(),
        started: existing.as_ref().map_or_else(|| Utc::now().to_rfc3339(), |s| s.meta.started.clone()),
        finished: None,
        channels: panel.channels().to_vec(),
        n_hours: panel.n_hours(),
        provenance: panel.provenance().into(),
        plan: plan.clone(),
        config: config.clone(),
    };
    let writer = Mutex::new(StoreWriter::open(dir, &meta, existing.as_ref())?);
    let started = AtomicUsize::new(0);
    let sh = Shared {
        config,
        panel: &panel,
        plan: &plan,
        windows: &windows,
        existing: existing.as_ref(),
        writer: &writer,
        dir,
        started: &started,
        budget: options.max_units.unwrap_or(usize::MAX),
    };

    let next = AtomicUsize::new(0);
    let jobs = config.effective_jobs().min(config.models.len()).max(1);
    let results: Vec<Result<bool, HarnessError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..jobs)
            .map(|_| {
                s.spawn(|| {
                    let mut complete = true;
                    loop {
                        let i = next.fetch_add(1, Ordering::SeqCst);
                        let Some(entry) = config.models.get(i) else { break };
                        let r = match config.precision {
                            Precision::F32 => run_model::<f32>(&sh, entry),
                            Precision::F64 => run_model::<f64>(&sh, entry),
                        };
                        complete &= r?;
                    }
                    Ok(complete)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut complete = true;
    for r in results {
        complete &= r?;
    }
    let units_run = started.load(Ordering::SeqCst).min(sh.budget);
    let writer = writer.into_inner().expect("writer lock");
    let store = if complete {
        writer.finish(Utc::now().to_rfc3339())?
    } else {
        drop(writer);
        ResultStore::load(dir)?
    };
    Ok(BenchOutcome { store, units_run, complete })
}

/// Recomputes one stored forecast from `panel`, which may be cut off right
/// before the forecast origin: the fold's training data and the window's
/// context are all that is read. Networks are restored from the fold's
/// checkpoint in `dir`.
pub fn replay_forecast(
    config: &BenchConfig,
    dir: &Path,
    panel: &PricePanel,
    model: &str,
    fold: usize,
    window: usize,
) -> Result<Vec<f64>, HarnessError> {
    let entry = config
        .models
        .iter()
        .find(|m| m.name() == model)
        .ok_or_else(|| HarnessError::Config(format!("unknown model {model}")))?;
    let p = config.plan;
    let plan = make_walk_forward_plan(p.train_len + (p.n_folds - 1) * p.stride + p.test_len, p.train_len, p.test_len, p.n_folds, p.stride)?;
    let fold_spec = plan.fold(fold)?.clone();
    let windows = enumerate_eval_windows(&plan, fold, config.input_len, config.horizon, config.eval_stride)?;
    let w = windows.get(window).ok_or_else(|| HarnessError::Config(format!("fold {fold} has no window {window}")))?;
    match config.precision {
        Precision::F32 => replay::<f32>(config, dir, panel, entry, &fold_spec, w),
        Precision::F64 => replay::<f64>(config, dir, panel, entry, &fold_spec, w),
    }
}

fn replay<T: Scalar>(
    config: &BenchConfig,
    dir: &Path,
    panel: &PricePanel,
    entry: &ModelEntry,
    fold: &Fold,
    w: &EvalWindow,
) -> Result<Vec<f64>, HarnessError> {
    let fitted: Fitted<T> = match entry.kind.neural() {
        Some(net) => {
            let ckpt = checkpoint_path(dir, entry.name(), fold.index);
            let bytes = std::fs::read(&ckpt).map_err(|e| HarnessError::io(&ckpt, e))?;
            let mut model = NeuralModel::<T>::zeroed(net, panel.n_channels())?;
            model.load_checkpoint(&bytes)?;
            Fitted::Scaled { model, scaler: ChannelScaler::fit(panel, fold.train.clone())? }
        }
        None => fit_unit::<T>(config, entry, panel, fold, None)?.0,
    };
    fitted.forecast(panel, w, config.horizon)
}

