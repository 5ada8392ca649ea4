use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::MetricError;

/// Models x countries matrix of performance-indicator values (lower is better).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    models: Vec<String>,
    countries: Vec<String>,
    /// `scores[country][model]`
    scores: Vec<Vec<Option<f64>>>,
}

impl ScoreTable {
    /// Builds a table from `(model, country, score)` cells. Models and
    /// countries are sorted by name.
    pub fn from_cells<'a, I>(cells: I) -> Result<Self, MetricError>
    where
        I: IntoIterator<Item = (&'a str, &'a str, f64)>,
    {
        let cells: Vec<_> = cells.into_iter().collect();
        let models: Vec<String> =
            cells.iter().map(|c| c.0).collect::<BTreeSet<_>>().into_iter().map(String::from).collect();
        let countries: Vec<String> =
            cells.iter().map(|c| c.1).collect::<BTreeSet<_>>().into_iter().map(String::from).collect();
        let mut scores = vec![vec![None; models.len()]; countries.len()];
        for (m, c, s) in cells {
            let mi = models.binary_search_by(|x| x.as_str().cmp(m)).expect("collected");
            let ci = countries.binary_search_by(|x| x.as_str().cmp(c)).expect("collected");
            if scores[ci][mi].replace(s).is_some() {
                return Err(MetricError::DuplicateCell { model: m.into(), country: c.into() });
            }
        }
        Ok(Self { models, countries, scores })
    }

    pub fn models(&self) -> &[String] {
        &self.models
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn model_index(&self, model: &str) -> Option<usize> {
        self.models.iter().position(|m| m == model)
    }

    pub fn get(&self, model: &str, country: &str) -> Option<f64> {
        let mi = self.model_index(model)?;
        let ci = self.countries.iter().position(|c| c == country)?;
        self.scores[ci][mi]
    }

    /// Complete score rows (one per country) or the first missing/non-finite cell.
    pub fn complete_rows(&self) -> Result<Vec<Vec<f64>>, MetricError> {
        self.scores
            .iter()
            .enumerate()
            .map(|(ci, row)| {
                row.iter()
                    .enumerate()
                    .map(|(mi, s)| match s {
                        None => Err(MetricError::MissingCell {
                            model: self.models[mi].clone(),
                            country: self.countries[ci].clone(),
                        }),
                        Some(v) if !v.is_finite() => Err(MetricError::NonFiniteScore {
                            model: self.models[mi].clone(),
                            country: self.countries[ci].clone(),
                        }),
                        Some(v) => Ok(*v),
                    })
                    .collect()
            })
            .collect()
    }

    /// Restricts the table to the given models (in the given order).
    pub fn subset(&self, models: &[&str]) -> Result<ScoreTable, MetricError> {
        let idx = models
            .iter()
            .map(|m| self.model_index(m).ok_or_else(|| MetricError::UnknownModel(m.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            models: models.iter().map(|m| m.to_string()).collect(),
            countries: self.countries.clone(),
            scores: self.scores.iter().map(|row| idx.iter().map(|&i| row[i]).collect()).collect(),
        })
    }
}

/// Midranks of `values` (1-based; ties share the mean of their positions).
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j share their mean
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub models: Vec<String>,
    pub countries: Vec<String>,
    /// `ranks[country][model]`, midranks for ties.
    pub ranks: Vec<Vec<f64>>,
    /// Mean rank per model, aligned with `models`.
    pub average: Vec<f64>,
}

impl RankTable {
    pub fn average_rank(&self, model: &str) -> Option<f64> {
        self.models.iter().position(|m| m == model).map(|i| self.average[i])
    }

    pub fn rank(&self, model: &str, country: &str) -> Option<f64> {
        let mi = self.models.iter().position(|m| m == model)?;
        let ci = self.countries.iter().position(|c| c == country)?;
        Some(self.ranks[ci][mi])
    }

    /// Models ordered from best (lowest average rank) to worst.
    pub fn ordering(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<_> = self.models.iter().map(String::as_str).zip(self.average.iter().copied()).collect();
        v.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
        v
    }

    /// Rank sums per model over all countries.
    pub fn rank_sums(&self) -> Vec<f64> {
        (0..self.models.len()).map(|m| self.ranks.iter().map(|row| row[m]).sum()).collect()
    }

    pub fn as_map(&self) -> BTreeMap<&str, f64> {
        self.models.iter().map(String::as_str).zip(self.average.iter().copied()).collect()
    }
}

pub fn rank_models(table: &ScoreTable) -> Result<RankTable, MetricError> {
    let rows = table.complete_rows()?;
    if rows.is_empty() || table.models.is_empty() {
        return Err(MetricError::EmptyGroup);
    }
    let ranks: Vec<Vec<f64>> = rows.iter().map(|r| midranks(r)).collect();
    let n = ranks.len() as f64;
    let average = (0..table.models.len()).map(|m| ranks.iter().map(|r| r[m]).sum::<f64>() / n).collect();
    Ok(RankTable { models: table.models.clone(), countries: table.countries.clone(), ranks, average })
}
