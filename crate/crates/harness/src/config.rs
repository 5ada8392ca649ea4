//! Benchmark configuration, read from TOML or JSON.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use gridcast_core::metrics::CellAggregation;
use gridcast_core::{GapPolicy, SynthSpec, HORIZON, INPUT_LEN};
use gridcast_models::{ArimaConfig, DLinearConfig, NLinearConfig, NeuralConfig, PatchTstConfig, TrainConfig, TsMixerConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::external::ExternalForecasterSpec;
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// A panel file written by `gridcast ingest` or `gridcast synth`.
    Panel { path: PathBuf },
    /// Long-format CSV read at run start.
    Csv {
        path: PathBuf,
        #[serde(default)]
        fill: GapPolicy,
    },
    /// Synthetic channels generated at run start.
    Synth { channels: Vec<SynthSpec> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    pub train_len: usize,
    pub test_len: usize,
    pub n_folds: usize,
    pub stride: usize,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self { train_len: 2000, test_len: 500, n_folds: 6, stride: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelKind {
    Naive,
    Arima(ArimaConfig),
    #[serde(rename = "dlinear")]
    DLinear(DLinearConfig),
    #[serde(rename = "nlinear")]
    NLinear(NLinearConfig),
    #[serde(rename = "tsmixer")]
    TsMixer(TsMixerConfig),
    #[serde(rename = "patchtst")]
    PatchTst(PatchTstConfig),
    External(ExternalForecasterSpec),
}

impl ModelKind {
    pub fn default_name(&self) -> &'static str {
        match self {
            ModelKind::Naive => "Naive",
            ModelKind::Arima(_) => "ARIMA",
            ModelKind::DLinear(_) => "DLinear",
            ModelKind::NLinear(_) => "NLinear",
            ModelKind::TsMixer(_) => "TSMixer",
            ModelKind::PatchTst(_) => "PatchTST",
            ModelKind::External(_) => "External",
        }
    }

    pub fn neural(&self) -> Option<NeuralConfig> {
        match self {
            ModelKind::DLinear(c) => Some(NeuralConfig::DLinear(c.clone())),
            ModelKind::NLinear(c) => Some(NeuralConfig::NLinear(c.clone())),
            ModelKind::TsMixer(c) => Some(NeuralConfig::TsMixer(c.clone())),
            ModelKind::PatchTst(c) => Some(NeuralConfig::PatchTst(c.clone())),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    /// Name used in records and reports; defaults to the architecture name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub kind: ModelKind,
}

impl ModelEntry {
    pub fn new(kind: ModelKind) -> Self {
        Self { name: None, kind }
    }

    pub fn named(name: impl Into<String>, kind: ModelKind) -> Self {
        Self { name: Some(name.into()), kind }
    }

    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or(self.kind.default_name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Precision {
    #[serde(rename = "32")]
    #[default]
    F32,
    #[serde(rename = "64")]
    F64,
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "32" => Ok(Precision::F32),
            "64" => Ok(Precision::F64),
            other => Err(format!("precision must be 32 or 64, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub data: DataSource,
    pub models: Vec<ModelEntry>,
    #[serde(default)]
    pub plan: PlanConfig,
    #[serde(default = "default_input_len")]
    pub input_len: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Hours between consecutive forecast origins in a test range.
    #[serde(default = "default_horizon")]
    pub eval_stride: usize,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub precision: Precision,
    /// Models evaluated concurrently. Zero means one per available core.
    #[serde(default)]
    pub jobs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Keep every forecast vector in the records.
    #[serde(default)]
    pub store_forecasts: bool,
    /// Cell aggregation used by the summary.
    #[serde(default)]
    pub aggregation: CellAggregation,
}

fn default_input_len() -> usize {
    INPUT_LEN
}

fn default_horizon() -> usize {
    HORIZON
}

impl BenchConfig {
    pub fn new(data: DataSource, models: Vec<ModelEntry>) -> Self {
        Self {
            data,
            models,
            plan: PlanConfig::default(),
            input_len: INPUT_LEN,
            horizon: HORIZON,
            eval_stride: HORIZON,
            train: TrainConfig::default(),
            seed: 0,
            precision: Precision::default(),
            jobs: 0,
            output_dir: None,
            store_forecasts: false,
            aggregation: CellAggregation::default(),
        }
    }

    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
        }
    }

    /// Reads a config file; relative data paths are resolved against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        match &mut cfg.data {
            DataSource::Panel { path } | DataSource::Csv { path, .. } if path.is_relative() => *path = base.join(&*path),
            _ => {}
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.models.is_empty() {
            return bad("the model roster is empty".into());
        }
        let mut names = BTreeSet::new();
        for m in &self.models {
            let name = m.name();
            if name.is_empty() || name.contains(['/', '\\', ',', '"', '\n']) {
                return bad(format!("model name {name:?} is not usable in file names and CSV"));
            }
            if !names.insert(name) {
                return bad(format!("model name {name:?} appears twice; give one of them a `name`"));
            }
            if let Some(n) = m.kind.neural() {
                n.validate()?;
                if n.input_len() != self.input_len || n.horizon() != self.horizon {
                    return bad(format!(
                        "{name}: network is built for input {} / horizon {} but the benchmark uses {} / {}",
                        n.input_len(),
                        n.horizon(),
                        self.input_len,
                        self.horizon
                    ));
                }
            }
            if let ModelKind::Arima(a) = &m.kind {
                a.order.validate()?;
            }
            if let ModelKind::External(e) = &m.kind {
                e.validate()?;
            }
        }
        if self.input_len == 0 || self.horizon == 0 || self.eval_stride == 0 {
            return bad("input_len, horizon and eval_stride must be positive".into());
        }
        self.train.validate()?;
        match &self.data {
            DataSource::Panel { path } | DataSource::Csv { path, .. } if !path.exists() => {
                bad(format!("data file {} does not exist", path.display()))
            }
            DataSource::Synth { channels } if channels.is_empty() => bad("no synthetic channels".into()),
            _ => Ok(()),
        }
    }

    /// Hash of everything that determines results (not output location or
    /// parallelism).
    pub fn fingerprint(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        c.jobs = 0;
        let json = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn effective_jobs(&self) -> usize {
        if self.jobs > 0 {
            self.jobs
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
    }
}
