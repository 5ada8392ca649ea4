//! Plot-ready CSV reports computed from result records.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gridcast_core::ingest::format_sig6;
use gridcast_core::metrics::{cell_means, score_table, CellAggregation};
use gridcast_core::{friedman_test, rank_models, MetricSet, RankTable, ResultRecord, ScoreTable};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ReportKind {
    Ranking,
    Heatmap,
    Boxplot,
    Geomap,
    Tables,
}

impl ReportKind {
    pub const ALL: [ReportKind; 5] =
        [ReportKind::Ranking, ReportKind::Heatmap, ReportKind::Boxplot, ReportKind::Geomap, ReportKind::Tables];

    pub fn name(self) -> &'static str {
        match self {
            ReportKind::Ranking => "ranking",
            ReportKind::Heatmap => "heatmap",
            ReportKind::Boxplot => "boxplot",
            ReportKind::Geomap => "geomap",
            ReportKind::Tables => "tables",
        }
    }
}

impl std::str::FromStr for ReportKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        ReportKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| HarnessError::Report(format!("unknown report kind {s:?} (expected ranking, heatmap, boxplot, geomap or tables)")))
    }
}

/// One output file: name and CSV text.
pub type ReportFile = (String, String);

fn f(x: f64) -> String {
    format_sig6(x)
}

/// Average ranks plus each model's Friedman p-value against the best model
/// (`None` for the best model itself).
#[derive(Debug, Clone, PartialEq)]
pub struct RankingSummary {
    pub ranks: RankTable,
    pub best: String,
    pub p_vs_best: BTreeMap<String, Option<f64>>,
    /// Why p-values are missing, if they are.
    pub note: Option<String>,
}

pub fn rank_scores(table: &ScoreTable) -> Result<RankingSummary, HarnessError> {
    let ranks = rank_models(table)?;
    let best = ranks.ordering()[0].0.to_string();
    let mut p_vs_best = BTreeMap::new();
    let mut note = None;
    if ranks.models.len() < 2 {
        note = Some("insufficient models for a Friedman test".to_string());
    } else if ranks.countries.len() < 2 {
        note = Some("insufficient countries for a Friedman test".to_string());
    }
    for m in &ranks.models {
        let p = if note.is_some() || *m == best {
            None
        } else {
            Some(friedman_test(table, &[best.as_str(), m.as_str()])?.p_value)
        };
        p_vs_best.insert(m.clone(), p);
    }
    Ok(RankingSummary { ranks, best, p_vs_best, note })
}

impl RankingSummary {
    fn p_text(&self, model: &str) -> String {
        match (self.p_vs_best.get(model).copied().flatten(), &self.note) {
            (Some(p), _) => f(p),
            (None, Some(n)) => n.clone(),
            (None, None) => String::new(),
        }
    }

    /// `model,avg_rank,friedman_p` sorted by average rank.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("model,avg_rank,friedman_p\n");
        for (m, r) in self.ranks.ordering() {
            out.push_str(&format!("{m},{},{}\n", f(r), self.p_text(m)));
        }
        out
    }
}

fn ranking(records: &[ResultRecord], how: CellAggregation) -> Result<Vec<ReportFile>, HarnessError> {
    let table = score_table(records, how)?;
    let summary = rank_scores(&table)?;
    let mut out = String::from("model,country,indicator,rank,avg_rank,friedman_p\n");
    for (m, avg) in summary.ranks.ordering() {
        let p = summary.p_text(m);
        for c in &summary.ranks.countries {
            let score = table.get(m, c).expect("ranked cells exist");
            let rank = summary.ranks.rank(m, c).expect("ranked");
            out.push_str(&format!("{m},{c},{},{},{},{p}\n", f(score), f(rank), f(avg)));
        }
    }
    Ok(vec![("ranking.csv".into(), out), ("ranking_summary.csv".into(), summary.summary_csv())])
}

fn heatmap(records: &[ResultRecord], how: CellAggregation) -> Result<Vec<ReportFile>, HarnessError> {
    let table = score_table(records, how)?;
    let mut out = String::from("model");
    for c in table.countries() {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for m in table.models() {
        out.push_str(m);
        for c in table.countries() {
            out.push(',');
            if let Some(v) = table.get(m, c) {
                out.push_str(&f(v));
            }
        }
        out.push('\n');
    }
    Ok(vec![("heatmap.csv".into(), out)])
}

/// Linearly interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn boxplot(records: &[ResultRecord]) -> Result<Vec<ReportFile>, HarnessError> {
    let mut groups: BTreeMap<(&str, usize), Vec<f64>> = BTreeMap::new();
    for r in records {
        groups.entry((&r.model, r.fold)).or_default().push(r.metrics.indicator());
    }
    let mut out = String::from("model,fold,n,min,q1,median,q3,max\n");
    for ((m, k), mut v) in groups {
        v.sort_by(f64::total_cmp);
        out.push_str(&format!(
            "{m},{k},{},{},{},{},{},{}\n",
            v.len(),
            f(v[0]),
            f(quantile(&v, 0.25)),
            f(quantile(&v, 0.5)),
            f(quantile(&v, 0.75)),
            f(v[v.len() - 1])
        ));
    }
    Ok(vec![("boxplot.csv".into(), out)])
}

fn geomap(records: &[ResultRecord], how: CellAggregation) -> Result<Vec<ReportFile>, HarnessError> {
    let cells = cell_means(records, how)?;
    let mut by_country: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for ((_, c), m) in &cells {
        by_country.entry(c).or_default().push(m.smape);
    }
    let mut out = String::from("country,mean_smape,n_models\n");
    for (c, v) in by_country {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        out.push_str(&format!("{c},{},{}\n", f(mean), v.len()));
    }
    Ok(vec![("geomap.csv".into(), out)])
}

fn metric_table(cells: &BTreeMap<(String, String), MetricSet>) -> String {
    let mut out = String::from("model,country,smape,mae,mse,rmse\n");
    for ((m, c), s) in cells {
        out.push_str(&format!("{m},{c},{},{},{},{}\n", f(s.smape), f(s.mae), f(s.mse), f(s.rmse)));
    }
    out
}

fn tables(records: &[ResultRecord], how: CellAggregation) -> Result<Vec<ReportFile>, HarnessError> {
    let other = match how {
        CellAggregation::FoldThenMean => CellAggregation::Pooled,
        CellAggregation::Pooled => CellAggregation::FoldThenMean,
    };
    let suffix = |h: CellAggregation| match h {
        CellAggregation::FoldThenMean => "tables.csv",
        CellAggregation::Pooled => "tables_pooled.csv",
    };
    Ok(vec![
        (suffix(how).into(), metric_table(&cell_means(records, how)?)),
        (suffix(other).into(), metric_table(&cell_means(records, other)?)),
    ])
}

/// Renders one report kind. A pure function of the records.
pub fn render_report(records: &[ResultRecord], kind: ReportKind, how: CellAggregation) -> Result<Vec<ReportFile>, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::Report("the result store holds no records".into()));
    }
    match kind {
        ReportKind::Ranking => ranking(records, how),
        ReportKind::Heatmap => heatmap(records, how),
        ReportKind::Boxplot => boxplot(records),
        ReportKind::Geomap => geomap(records, how),
        ReportKind::Tables => tables(records, how),
    }
}

/// Renders and writes a report into `out_dir`, returning the written paths.
pub fn emit_report(
    records: &[ResultRecord],
    kind: ReportKind,
    how: CellAggregation,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    let files = render_report(records, kind, how)?;
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    files
        .into_iter()
        .map(|(name, text)| {
            let path = out_dir.join(name);
            std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(model: &str, country: &str, fold: usize, window: usize, smape: f64, rmse: f64) -> ResultRecord {
        ResultRecord {
            model: model.into(),
            country: country.into(),
            fold,
            window,
            metrics: MetricSet { smape, mae: rmse, mse: rmse * rmse, rmse },
        }
    }

    #[test]
    fn single_model_ranks_first_everywhere() {
        let records = vec![rec("A", "DE", 0, 0, 0.1, 5.0), rec("A", "FR", 0, 0, 0.2, 7.0)];
        let files = render_report(&records, ReportKind::Ranking, CellAggregation::FoldThenMean).unwrap();
        let lines: Vec<&str> = files[0].1.lines().skip(1).collect();
        assert_eq!(lines.len(), 2);
        for l in lines {
            let cols: Vec<&str> = l.split(',').collect();
            assert_eq!(cols[3], "1");
            assert_eq!(cols[4], "1");
            assert_eq!(cols[5], "insufficient models for a Friedman test");
        }
    }

    #[test]
    fn constant_smape_geomap() {
        let mut records = Vec::new();
        for m in ["A", "B", "C"] {
            for c in ["DE", "FR", "IT"] {
                for k in 0..2 {
                    records.push(rec(m, c, k, 0, 0.2, 3.0 + k as f64));
                }
            }
        }
        let files = render_report(&records, ReportKind::Geomap, CellAggregation::FoldThenMean).unwrap();
        let rows: Vec<&str> = files[0].1.lines().skip(1).collect();
        assert_eq!(rows, vec!["DE,0.2,3", "FR,0.2,3", "IT,0.2,3"]);
    }

    #[test]
    fn boxplot_quartiles() {
        let records: Vec<ResultRecord> = (0..5).map(|w| rec("A", "DE", 0, w, 0.0, 2.0 * w as f64)).collect();
        // indicators are rmse / 2 = 0, 1, 2, 3, 4
        let files = render_report(&records, ReportKind::Boxplot, CellAggregation::FoldThenMean).unwrap();
        assert_eq!(files[0].1, "model,fold,n,min,q1,median,q3,max\nA,0,5,0,1,2,3,4\n");
    }

    #[test]
    fn heatmap_and_empty_store() {
        let records = vec![rec("A", "DE", 0, 0, 0.1, 10.0), rec("B", "DE", 0, 0, 0.3, 20.0)];
        let files = render_report(&records, ReportKind::Heatmap, CellAggregation::FoldThenMean).unwrap();
        assert_eq!(files[0].1, "model,DE\nA,10\nB,25\n");
        assert!(render_report(&[], ReportKind::Tables, CellAggregation::FoldThenMean).is_err());
        assert!("pie".parse::<ReportKind>().is_err());
    }
}
