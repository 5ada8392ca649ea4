//! Forecast error metrics, the combined performance indicator, aggregation of
//! result records, model ranking and the Friedman test.

mod friedman;
mod rank;
pub mod special;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use friedman::{friedman_test, FriedmanResult};
pub use rank::{rank_models, RankTable, ScoreTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("actual has {actual} values but predicted has {predicted}")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("cannot score an empty forecast")]
    Empty,
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("no records to aggregate")]
    EmptyGroup,
    #[error("score table is missing model {model} for country {country}")]
    MissingCell { model: String, country: String },
    #[error("score for model {model} in country {country} is not finite")]
    NonFiniteScore { model: String, country: String },
    #[error("unknown model {0}")]
    UnknownModel(String),
    #[error("duplicate cell for model {model} and country {country}")]
    DuplicateCell { model: String, country: String },
    #[error("Friedman test needs at least 2 models and 2 blocks (got {models} and {blocks})")]
    TooFewForFriedman { models: usize, blocks: usize },
}

/// Denominator guard for SMAPE terms.
pub const SMAPE_EPS: f64 = 1e-8;

/// Error metrics for one forecast. SMAPE is a fraction in `[0, 2]`; MAE and
/// RMSE are in price units, MSE in squared price units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub smape: f64,
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
}

impl MetricSet {
    pub const ZERO: MetricSet = MetricSet { smape: 0.0, mae: 0.0, mse: 0.0, rmse: 0.0 };

    /// Unweighted field-wise mean. Means of RMSE are not `sqrt` of mean MSE.
    pub fn mean<'a, I: IntoIterator<Item = &'a MetricSet>>(sets: I) -> Result<MetricSet, MetricError> {
        let mut n = 0usize;
        let mut acc = MetricSet::ZERO;
        for m in sets {
            n += 1;
            acc.smape += m.smape;
            acc.mae += m.mae;
            acc.mse += m.mse;
            acc.rmse += m.rmse;
        }
        if n == 0 {
            return Err(MetricError::EmptyGroup);
        }
        let k = n as f64;
        Ok(MetricSet { smape: acc.smape / k, mae: acc.mae / k, mse: acc.mse / k, rmse: acc.rmse / k })
    }

    pub fn indicator(&self) -> f64 {
        performance_indicator(self)
    }
}

pub fn compute_metrics(actual: &[f64], predicted: &[f64]) -> Result<MetricSet, MetricError> {
    if actual.len() != predicted.len() {
        return Err(MetricError::LengthMismatch { actual: actual.len(), predicted: predicted.len() });
    }
    if actual.is_empty() {
        return Err(MetricError::Empty);
    }
    if let Some(i) = actual.iter().zip(predicted).position(|(a, p)| !a.is_finite() || !p.is_finite()) {
        return Err(MetricError::NonFinite(i));
    }
    let n = actual.len() as f64;
    let (mut smape, mut mae, mut mse) = (0.0, 0.0, 0.0);
    for (&y, &yhat) in actual.iter().zip(predicted) {
        let err = yhat - y;
        let denom = y.abs() + yhat.abs();
        if !(y.abs() < SMAPE_EPS && yhat.abs() < SMAPE_EPS) {
            smape += 2.0 * err.abs() / denom.max(SMAPE_EPS);
        }
        mae += err.abs();
        mse += err * err;
    }
    let mse = mse / n;
    Ok(MetricSet { smape: smape / n, mae: mae / n, mse, rmse: mse.sqrt() })
}

/// `(100 * SMAPE + RMSE) / 2`; lower is better.
pub fn performance_indicator(m: &MetricSet) -> f64 {
    (100.0 * m.smape + m.rmse) / 2.0
}

/// One scored forecast: a model's metrics for one channel, fold and window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub model: String,
    pub country: String,
    pub fold: usize,
    pub window: usize,
    pub metrics: MetricSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupBy {
    Model,
    Country,
    Fold,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum GroupKey {
    Name(String),
    Fold(usize),
}

impl std::fmt::Display for GroupKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GroupKey::Name(n) => f.write_str(n),
            GroupKey::Fold(k) => write!(f, "{k}"),
        }
    }
}

/// Pooled unweighted means of the records in each group.
pub fn aggregate(records: &[ResultRecord], group_by: GroupBy) -> Result<BTreeMap<GroupKey, MetricSet>, MetricError> {
    if records.is_empty() {
        return Err(MetricError::EmptyGroup);
    }
    let mut groups: BTreeMap<GroupKey, Vec<&MetricSet>> = BTreeMap::new();
    for r in records {
        let key = match group_by {
            GroupBy::Model => GroupKey::Name(r.model.clone()),
            GroupBy::Country => GroupKey::Name(r.country.clone()),
            GroupBy::Fold => GroupKey::Fold(r.fold),
        };
        groups.entry(key).or_default().push(&r.metrics);
    }
    groups.into_iter().map(|(k, v)| Ok((k, MetricSet::mean(v)?))).collect()
}

/// How window records collapse into one `(model, country)` cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellAggregation {
    /// Mean over windows within each fold, then mean over folds.
    #[default]
    FoldThenMean,
    /// Mean over all windows of all folds.
    Pooled,
}

pub fn cell_means(
    records: &[ResultRecord],
    how: CellAggregation,
) -> Result<BTreeMap<(String, String), MetricSet>, MetricError> {
    if records.is_empty() {
        return Err(MetricError::EmptyGroup);
    }
    let mut cells: BTreeMap<(String, String), BTreeMap<usize, Vec<&MetricSet>>> = BTreeMap::new();
    for r in records {
        cells
            .entry((r.model.clone(), r.country.clone()))
            .or_default()
            .entry(r.fold)
            .or_default()
            .push(&r.metrics);
    }
    cells
        .into_iter()
        .map(|(key, folds)| {
            let m = match how {
                CellAggregation::Pooled => MetricSet::mean(folds.values().flatten().copied())?,
                CellAggregation::FoldThenMean => {
                    let per_fold = folds.values().map(|v| MetricSet::mean(v.iter().copied())).collect::<Result<Vec<_>, _>>()?;
                    MetricSet::mean(&per_fold)?
                }
            };
            Ok((key, m))
        })
        .collect()
}

/// Performance-indicator table built from fold-aggregated cell means.
pub fn score_table(records: &[ResultRecord], how: CellAggregation) -> Result<ScoreTable, MetricError> {
    let cells = cell_means(records, how)?;
    ScoreTable::from_cells(cells.iter().map(|((m, c), set)| (m.as_str(), c.as_str(), set.indicator())))
}
