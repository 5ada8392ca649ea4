use gridcast_core::metrics::special::chi_square_sf;
use gridcast_core::{enumerate_eval_windows, make_walk_forward_plan, Fold};

#[test]
fn six_fold_plan_is_exact() {
    let plan = make_walk_forward_plan(5000, 2000, 500, 6, 500).unwrap();
    let expected: Vec<Fold> = (0..6)
        .map(|k| Fold { index: k, train: 500 * k..500 * k + 2000, test: 500 * k + 2000..500 * k + 2500 })
        .collect();
    assert_eq!(plan.folds, expected);
    assert_eq!(plan.folds[5].test.end, 5000);
    assert_eq!(plan.span(), 5000);
    assert!(make_walk_forward_plan(4999, 2000, 500, 6, 500).is_err());
}

#[test]
fn five_windows_per_fold_at_the_default_stride() {
    let plan = make_walk_forward_plan(5000, 2000, 500, 6, 500).unwrap();
    let mut origins = Vec::new();
    for k in 0..6 {
        let w = enumerate_eval_windows(&plan, k, 96, 96, 96).unwrap();
        assert_eq!(w.len(), 5);
        for win in &w {
            assert!(win.context.end == win.origin() && win.target.end <= plan.folds[k].test.end);
            assert!(win.target.start >= plan.folds[k].test.start);
        }
        origins.extend(w.iter().map(|w| w.origin()));
    }
    assert_eq!(origins.len(), 30);
    assert_eq!(origins[0], 2000);
}

#[test]
fn chi_square_critical_value() {
    assert!((chi_square_sf(3.841, 1.0) - 0.05).abs() < 1e-4);
    assert!((chi_square_sf(5.991, 2.0) - 0.05).abs() < 1e-4);
    assert!((chi_square_sf(18.307, 10.0) - 0.05).abs() < 1e-4);
}
