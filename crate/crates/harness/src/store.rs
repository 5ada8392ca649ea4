//! The on-disk result store of a benchmark run.
//!
//! A run directory holds `meta.json`, append-only `records.ndjson`,
//! `history.ndjson` and `progress.ndjson`, per-fold network checkpoints under
//! `checkpoints/`, and `summary.csv` once the run completes. A unit of work is
//! one (model, fold) pair; its `progress` line is written last, so a unit
//! without one is incomplete and is dropped on resume.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use gridcast_core::ingest::format_sig6;
use gridcast_core::metrics::{cell_means, CellAggregation};
use gridcast_core::{MetricSet, ResultRecord, WalkForwardPlan};
use gridcast_models::{ArimaOrder, FitStatus, TrainHistory};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{BenchConfig, HarnessError};

pub const META: &str = "meta.json";
pub const RECORDS: &str = "records.ndjson";
pub const HISTORY: &str = "history.ndjson";
pub const PROGRESS: &str = "progress.ndjson";
pub const SUMMARY: &str = "summary.csv";
pub const CHECKPOINTS: &str = "checkpoints";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub started: String,
    #[serde(default)]
    pub finished: Option<String>,
    pub channels: Vec<String>,
    pub n_hours: usize,
    pub provenance: String,
    pub plan: WalkForwardPlan,
    pub config: BenchConfig,
}

/// Metrics of one forecast, on the original price scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRecord {
    pub model: String,
    pub country: String,
    pub fold: usize,
    pub window: usize,
    /// Hour index of the first forecast step.
    pub origin: usize,
    pub metrics: MetricSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forecast: Option<Vec<f64>>,
}

impl StoredRecord {
    pub fn to_result(&self) -> ResultRecord {
        ResultRecord {
            model: self.model.clone(),
            country: self.country.clone(),
            fold: self.fold,
            window: self.window,
            metrics: self.metrics,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaFit {
    pub country: String,
    pub order: ArimaOrder,
    pub iterations: usize,
    pub status: FitStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub model: String,
    pub fold: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainHistory>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub arima: Vec<ArimaFit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitState {
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitStatus {
    pub model: String,
    pub fold: usize,
    pub state: UnitState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Everything a completed unit contributes to the store.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitResult {
    pub status: UnitStatus,
    pub records: Vec<StoredRecord>,
    pub history: Option<HistoryEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultStore {
    pub meta: RunMeta,
    pub records: Vec<StoredRecord>,
    pub histories: Vec<HistoryEntry>,
    pub units: Vec<UnitStatus>,
}

fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(HarnessError::io(path, e)),
    };
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(v) => out.push(v),
            // a crash can leave the final line half written
            Err(_) if i + 1 == lines.len() && !complete => break,
            Err(e) => {
                return Err(HarnessError::Format { path: path.to_path_buf(), msg: format!("line {}: {e}", i + 1) })
            }
        }
    }
    Ok(out)
}

fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<(), HarnessError> {
    let mut s = String::new();
    for it in items {
        s.push_str(&serde_json::to_string(it).expect("serializable"));
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| HarnessError::io(path, e))
}

impl ResultStore {
    /// Loads a run directory. Records and histories of units without a
    /// `done` progress line are left out.
    pub fn load(dir: &Path) -> Result<Self, HarnessError> {
        let meta_path = dir.join(META);
        let text = fs::read_to_string(&meta_path).map_err(|e| HarnessError::io(&meta_path, e))?;
        let meta: RunMeta = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Format { path: meta_path.clone(), msg: e.to_string() })?;
        let units: Vec<UnitStatus> = read_lines(&dir.join(PROGRESS))?;
        let mut store = Self { meta, records: read_lines(&dir.join(RECORDS))?, histories: read_lines(&dir.join(HISTORY))?, units };
        store.retain_complete();
        store.canonicalize();
        Ok(store)
    }

    /// Keeps the latest status per unit and only the records and histories of
    /// units that finished successfully.
    fn retain_complete(&mut self) {
        let mut latest: Vec<UnitStatus> = Vec::new();
        for u in self.units.drain(..) {
            latest.retain(|v| !(v.model == u.model && v.fold == u.fold));
            latest.push(u);
        }
        self.units = latest;
        let done = |model: &str, fold: usize| {
            self.units.iter().any(|u| u.model == model && u.fold == fold && u.state == UnitState::Done)
        };
        let records = self.records.drain(..).filter(|r| done(&r.model, r.fold)).collect();
        let histories = self.histories.drain(..).filter(|h| done(&h.model, h.fold)).collect();
        self.records = records;
        self.histories = histories;
    }

    fn model_order(&self, model: &str) -> usize {
        self.meta.config.models.iter().position(|m| m.name() == model).unwrap_or(usize::MAX)
    }

    fn channel_order(&self, channel: &str) -> usize {
        self.meta.channels.iter().position(|c| c == channel).unwrap_or(usize::MAX)
    }

    /// Roster order, then fold, window and channel; independent of the order
    /// in which parallel jobs finished.
    pub fn canonicalize(&mut self) {
        let mut records = std::mem::take(&mut self.records);
        records.sort_by_key(|r| (self.model_order(&r.model), r.fold, r.window, self.channel_order(&r.country)));
        records.dedup_by(|a, b| a.model == b.model && a.fold == b.fold && a.window == b.window && a.country == b.country);
        self.records = records;
        let mut histories = std::mem::take(&mut self.histories);
        histories.sort_by_key(|h| (self.model_order(&h.model), h.fold));
        self.histories = histories;
        let mut units = std::mem::take(&mut self.units);
        units.sort_by_key(|u| (self.model_order(&u.model), u.fold));
        self.units = units;
    }

    pub fn is_done(&self, model: &str, fold: usize) -> bool {
        self.units.iter().any(|u| u.model == model && u.fold == fold && u.state == UnitState::Done)
    }

    pub fn failures(&self) -> impl Iterator<Item = &UnitStatus> {
        self.units.iter().filter(|u| u.state == UnitState::Failed)
    }

    pub fn result_records(&self) -> Vec<ResultRecord> {
        self.records.iter().map(StoredRecord::to_result).collect()
    }

    /// `model,country,smape,mae,mse,rmse,indicator` cell means.
    pub fn summary_csv(&self, how: CellAggregation) -> Result<String, HarnessError> {
        let mut out = String::from("model,country,smape,mae,mse,rmse,indicator\n");
        if self.records.is_empty() {
            return Ok(out);
        }
        let cells = cell_means(&self.result_records(), how)?;
        let mut keys: Vec<&(String, String)> = cells.keys().collect();
        keys.sort_by_key(|(m, c)| (self.model_order(m), self.channel_order(c)));
        for key in keys {
            let m = &cells[key];
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                key.0,
                key.1,
                format_sig6(m.smape),
                format_sig6(m.mae),
                format_sig6(m.mse),
                format_sig6(m.rmse),
                format_sig6(m.indicator())
            ));
        }
        Ok(out)
    }
}

/// Serialized appends to a run directory.
pub struct StoreWriter {
    dir: PathBuf,
    records: BufWriter<File>,
    history: BufWriter<File>,
    progress: BufWriter<File>,
}

fn append(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    let f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(BufWriter::new(f))
}

impl StoreWriter {
    /// Starts a fresh store, or continues `existing` after rewriting its
    /// files to the completed units only.
    pub fn open(dir: &Path, meta: &RunMeta, existing: Option<&ResultStore>) -> Result<Self, HarnessError> {
        fs::create_dir_all(dir.join(CHECKPOINTS)).map_err(|e| HarnessError::io(dir, e))?;
        let meta_path = dir.join(META);
        fs::write(&meta_path, serde_json::to_string_pretty(meta).expect("serializable"))
            .map_err(|e| HarnessError::io(&meta_path, e))?;
        let empty = ResultStore { meta: meta.clone(), records: vec![], histories: vec![], units: vec![] };
        let keep = existing.unwrap_or(&empty);
        let done: Vec<&UnitStatus> = keep.units.iter().filter(|u| u.state == UnitState::Done).collect();
        write_lines(&dir.join(RECORDS), &keep.records)?;
        write_lines(&dir.join(HISTORY), &keep.histories)?;
        write_lines(&dir.join(PROGRESS), &done)?;
        let _ = fs::remove_file(dir.join(SUMMARY));
        Ok(Self {
            dir: dir.to_path_buf(),
            records: append(&dir.join(RECORDS))?,
            history: append(&dir.join(HISTORY))?,
            progress: append(&dir.join(PROGRESS))?,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn line<T: Serialize>(w: &mut BufWriter<File>, path: &Path, item: &T) -> Result<(), HarnessError> {
        let mut s = serde_json::to_string(item).expect("serializable");
        s.push('\n');
        w.write_all(s.as_bytes()).map_err(|e| HarnessError::io(path, e))
    }

    /// Appends a unit's output; the progress line goes last and is flushed
    /// only after the records and history.
    pub fn commit(&mut self, unit: &UnitResult) -> Result<(), HarnessError> {
        let (rp, hp, pp) = (self.dir.join(RECORDS), self.dir.join(HISTORY), self.dir.join(PROGRESS));
        for r in &unit.records {
            Self::line(&mut self.records, &rp, r)?;
        }
        if let Some(h) = &unit.history {
            Self::line(&mut self.history, &hp, h)?;
        }
        self.records.flush().map_err(|e| HarnessError::io(&rp, e))?;
        self.history.flush().map_err(|e| HarnessError::io(&hp, e))?;
        Self::line(&mut self.progress, &pp, &unit.status)?;
        self.progress.flush().map_err(|e| HarnessError::io(&pp, e))
    }

    /// Rewrites the files in canonical order and writes the summary.
    pub fn finish(self, finished: String) -> Result<ResultStore, HarnessError> {
        let dir = self.dir.clone();
        drop(self);
        let mut store = ResultStore::load(&dir)?;
        store.meta.finished = Some(finished);
        let meta_path = dir.join(META);
        fs::write(&meta_path, serde_json::to_string_pretty(&store.meta).expect("serializable"))
            .map_err(|e| HarnessError::io(&meta_path, e))?;
        write_lines(&dir.join(RECORDS), &store.records)?;
        write_lines(&dir.join(HISTORY), &store.histories)?;
        write_lines(&dir.join(PROGRESS), &store.units)?;
        let summary = store.summary_csv(store.meta.config.aggregation)?;
        fs::write(dir.join(SUMMARY), summary).map_err(|e| HarnessError::io(dir.join(SUMMARY), e))?;
        Ok(store)
    }
}

pub fn checkpoint_path(dir: &Path, model: &str, fold: usize) -> PathBuf {
    dir.join(CHECKPOINTS).join(format!("{model}_fold{fold}.gckp"))
}
