use serde::{Deserialize, Serialize};

use super::rank::midranks;
use super::special::chi_square_sf;
use super::{MetricError, ScoreTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// Number of models compared.
    pub k: usize,
    /// Number of blocks (countries).
    pub n: usize,
}

/// Friedman chi-square test over the countries of `table`, restricted to
/// `models` (all models when empty). Ranks are recomputed within the subset.
///
/// `chi2 = 12 / (N k (k + 1)) * sum_j R_j^2 - 3 N (k + 1)`, `df = k - 1`,
/// with the p-value from the chi-square approximation.
pub fn friedman_test(table: &ScoreTable, models: &[&str]) -> Result<FriedmanResult, MetricError> {
    let sub = if models.is_empty() { table.clone() } else { table.subset(models)? };
    let rows = sub.complete_rows()?;
    let k = sub.models().len();
    let n = rows.len();
    if k < 2 || n < 2 {
        return Err(MetricError::TooFewForFriedman { models: k, blocks: n });
    }
    let mut sums = vec![0.0; k];
    for row in &rows {
        for (s, r) in sums.iter_mut().zip(midranks(row)) {
            *s += r;
        }
    }
    let (nf, kf) = (n as f64, k as f64);
    let statistic = 12.0 / (nf * kf * (kf + 1.0)) * sums.iter().map(|r| r * r).sum::<f64>() - 3.0 * nf * (kf + 1.0);
    // rounding can push an exact zero slightly negative
    let statistic = statistic.max(0.0);
    let df = k - 1;
    Ok(FriedmanResult { statistic, df, p_value: chi_square_sf(statistic, df as f64), k, n })
}
