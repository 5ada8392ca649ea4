//! The tables report reproduces the published per-country metric tables when
//! fed one record per cell.

use std::collections::BTreeMap;

use gridcast_core::ingest::format_sig6;
use gridcast_core::metrics::CellAggregation;
use gridcast_core::{MetricSet, ResultRecord};
use gridcast_harness::{render_report, ReportKind};

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/published_country_metrics.csv");

fn significant_digits(s: &str) -> usize {
    s.chars().filter(char::is_ascii_digit).collect::<String>().trim_start_matches('0').len()
}

#[test]
fn tables_match_published_values() {
    let mut rdr = csv::Reader::from_path(FIXTURE).unwrap();
    let mut published: BTreeMap<(String, String), [String; 4]> = BTreeMap::new();
    let mut records = Vec::new();
    for r in rdr.records() {
        let r = r.unwrap();
        let v = |i: usize| r[i].parse::<f64>().unwrap();
        records.push(ResultRecord {
            model: r[0].into(),
            country: r[1].into(),
            fold: 0,
            window: 0,
            metrics: MetricSet { smape: v(2), rmse: v(3), mse: v(4), mae: v(5) },
        });
        // report column order: smape, mae, mse, rmse
        published.insert((r[0].into(), r[1].into()), [r[2].into(), r[5].into(), r[4].into(), r[3].into()]);
    }
    let files = render_report(&records, ReportKind::Tables, CellAggregation::FoldThenMean).unwrap();
    assert_eq!(files.len(), 2);
    // with a single record per cell both aggregations agree
    assert_eq!(files[0].1, files[1].1);

    let mut rdr = csv::Reader::from_reader(files[0].1.as_bytes());
    assert_eq!(rdr.headers().unwrap(), vec!["model", "country", "smape", "mae", "mse", "rmse"]);
    let (mut exact, mut rounded, mut rows) = (0, 0, 0);
    for r in rdr.records() {
        let r = r.unwrap();
        let want = &published[&(r[0].to_string(), r[1].to_string())];
        for (i, expected) in want.iter().enumerate() {
            let got = &r[2 + i];
            if significant_digits(expected) <= 6 {
                let plain = if expected.contains('.') { expected.trim_end_matches('0').trim_end_matches('.') } else { expected };
                assert_eq!(got, plain, "{} {}", &r[0], &r[1]);
                exact += 1;
            } else {
                assert_eq!(got, format_sig6(expected.parse().unwrap()));
                rounded += 1;
            }
        }
        rows += 1;
    }
    assert_eq!(rows, 297);
    assert_eq!(exact + rounded, 297 * 4);
    assert!(exact > 1100, "{exact}");
}
