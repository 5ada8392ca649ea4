//! Ranks the published per-country SMAPE/RMSE means of eleven models.

use gridcast_core::{friedman_test, performance_indicator, rank_models, MetricSet, ScoreTable};

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/published_country_metrics.csv");

fn published_table() -> ScoreTable {
    let mut rdr = csv::Reader::from_path(FIXTURE).unwrap();
    let rows: Vec<(String, String, f64)> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            let f = |i: usize| r[i].parse::<f64>().unwrap();
            let m = MetricSet { smape: f(2), rmse: f(3), mse: f(4), mae: f(5) };
            (r[0].to_string(), r[1].to_string(), performance_indicator(&m))
        })
        .collect();
    ScoreTable::from_cells(rows.iter().map(|(m, c, s)| (m.as_str(), c.as_str(), *s))).unwrap()
}

const PUBLISHED_AVERAGE_RANKS: [(&str, f64); 10] = [
    ("TimesFM", 2.926),
    ("Basisformer", 3.259),
    ("TSMixer", 3.481),
    ("DLinear", 5.000),
    ("Quatformer", 5.296),
    ("NLinear", 6.778),
    ("Chronos", 8.370),
    ("Informer", 8.852),
    ("ARIMA", 10.000),
    ("Autoformer", 10.778),
];

#[test]
fn fixture_shape() {
    let t = published_table();
    assert_eq!(t.models().len(), 11);
    assert_eq!(t.countries().len(), 27);
    assert_eq!(t.complete_rows().unwrap().len(), 27);
}

#[test]
fn average_ranks_match_published() {
    let ranks = rank_models(&published_table()).unwrap();
    for (model, expected) in PUBLISHED_AVERAGE_RANKS {
        let got = ranks.average_rank(model).unwrap();
        assert!((got - expected).abs() <= 0.3, "{model}: {got} vs {expected}");
    }
    let order: Vec<&str> = ranks.ordering().iter().map(|(m, _)| *m).collect();
    assert_eq!(&order[..3], &["PatchTST", "TimesFM", "Basisformer"]);
    assert_eq!(&order[order.len() - 2..], &["ARIMA", "Autoformer"]);
    // Average ranks of k models always sum to k (k + 1) / 2.
    let total: f64 = ranks.average.iter().sum();
    assert!((total - 66.0).abs() < 1e-9);
}

#[test]
fn patchtst_differs_significantly_from_every_model() {
    let t = published_table();
    for (model, _) in PUBLISHED_AVERAGE_RANKS {
        let r = friedman_test(&t, &["PatchTST", model]).unwrap();
        assert_eq!((r.k, r.n, r.df), (2, 27, 1));
        assert!(r.p_value < 0.05, "{model}: p = {}", r.p_value);
    }
    let all = friedman_test(&t, &[]).unwrap();
    assert_eq!(all.df, 10);
    assert!(all.p_value < 1e-10);
}
