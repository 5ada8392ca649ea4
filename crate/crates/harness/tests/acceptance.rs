//! Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
//! when any of them fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use gridcast_autodiff::selfcheck::primitive_sweep;
use gridcast_core::metrics::special::chi_square_sf;
use gridcast_core::{
    compute_metrics, enumerate_eval_windows, friedman_test, generate_panel, make_walk_forward_plan, pacf,
    performance_indicator, rank_models, Fold, MetricSet, ScoreTable, Seasonal, SynthSpec, TrendSegment,
};
use gridcast_harness::bench::Fitted;
use gridcast_harness::store::{checkpoint_path, HISTORY, PROGRESS, RECORDS, SUMMARY};
use gridcast_harness::{
    emit_report, fit_unit, forecast_series, load_panel, run_benchmark, write_panel, BenchConfig, DataSource,
    ExternalError, ExternalForecasterSpec, ModelEntry, ModelKind, PlanConfig, ReportKind, RunOptions,
};
use gridcast_models::selfcheck::{model_grad_check, tiny_configs};
use gridcast_models::{
    naive_forecast, series_decompose, train, ArimaConfig, ArimaOrder, DLinearConfig, EarlyStopping, NLinearConfig,
    NeuralConfig, NeuralModel, PatchTstConfig, SeriesBlock, TrainConfig, TsMixerConfig,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

const STUB: &str = env!("CARGO_BIN_EXE_gridcast-stub");
const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/published_country_metrics.csv");

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

// 1

const PUBLISHED_RANKS: [(&str, f64); 10] = [
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

fn ranking_reproduction() -> Outcome {
    let mut rdr = ok(csv::Reader::from_path(FIXTURE))?;
    let mut rows = Vec::new();
    for r in rdr.records() {
        let r = ok(r)?;
        let f = |i: usize| r[i].parse::<f64>().map_err(|e| e.to_string());
        let m = MetricSet { smape: f(2)?, rmse: f(3)?, mse: f(4)?, mae: f(5)? };
        rows.push((r[0].to_string(), r[1].to_string(), performance_indicator(&m)));
    }
    let table = ok(ScoreTable::from_cells(rows.iter().map(|(m, c, s)| (m.as_str(), c.as_str(), *s))))?;
    ensure!(table.models().len() == 11 && table.countries().len() == 27, "fixture is not 11 x 27");
    let ranks = ok(rank_models(&table))?;
    let mut worst = 0.0f64;
    for (model, expected) in PUBLISHED_RANKS {
        let got = ranks.average_rank(model).ok_or(format!("{model} missing"))?;
        worst = worst.max((got - expected).abs());
        ensure!((got - expected).abs() <= 0.3, "{model}: average rank {got:.3}, published {expected}");
    }
    let order: Vec<&str> = ranks.ordering().iter().map(|(m, _)| *m).collect();
    ensure!(order[..3] == ["PatchTST", "TimesFM", "Basisformer"], "top three {:?}", &order[..3]);
    ensure!(order[9..] == ["ARIMA", "Autoformer"], "bottom two {:?}", &order[9..]);
    let mut max_p = 0.0f64;
    for (model, _) in PUBLISHED_RANKS {
        let r = ok(friedman_test(&table, &["PatchTST", model]))?;
        max_p = max_p.max(r.p_value);
        ensure!(r.p_value < 0.05, "PatchTST vs {model}: p = {}", r.p_value);
    }
    Ok(format!("max rank deviation {worst:.3}, largest pairwise p {max_p:.2e}"))
}

// 2

fn protocol_arithmetic() -> Outcome {
    let t = Instant::now();
    let plan = ok(make_walk_forward_plan(5000, 2000, 500, 6, 500))?;
    let elapsed = t.elapsed();
    let expected: Vec<Fold> =
        (0..6).map(|k| Fold { index: k, train: 500 * k..500 * k + 2000, test: 500 * k + 2000..500 * k + 2500 }).collect();
    ensure!(plan.folds == expected, "folds {:?}", plan.folds);
    ensure!(plan.folds[5].test.end == 5000, "last test range ends at {}", plan.folds[5].test.end);
    ensure!(elapsed < Duration::from_millis(1), "plan took {elapsed:?}");
    Ok(format!("six folds exact, computed in {elapsed:?}"))
}

// 3

fn gradient_correctness() -> Outcome {
    let mut worst = [0.0f64; 2];
    for (p, err) in ok(primitive_sweep::<f32>(0..100))? {
        ensure!(err < 1e-3, "primitive {} at 32 bits: {err:e}", p.name());
        worst[0] = worst[0].max(err);
    }
    for (p, err) in ok(primitive_sweep::<f64>(0..100))? {
        ensure!(err < 1e-6, "primitive {} at 64 bits: {err:e}", p.name());
        worst[1] = worst[1].max(err);
    }
    for (config, c) in tiny_configs() {
        for seed in 0..100 {
            let e32 = ok(model_grad_check::<f32>(&config, c, seed))?.max_rel_error;
            let e64 = ok(model_grad_check::<f64>(&config, c, seed))?.max_rel_error;
            ensure!(e32 < 1e-3, "{} seed {seed} at 32 bits: {e32:e}", config.name());
            ensure!(e64 < 1e-6, "{} seed {seed} at 64 bits: {e64:e}", config.name());
            worst[0] = worst[0].max(e32);
            worst[1] = worst[1].max(e64);
        }
    }
    Ok(format!("worst relative error {:.1e} (32-bit), {:.1e} (64-bit)", worst[0], worst[1]))
}

// 4

fn permute(x: &[f64], c: usize, perm: &[usize]) -> Vec<f64> {
    x.chunks(c).flat_map(|row| perm.iter().map(move |&p| row[p])).collect()
}

fn model_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for seed in 0..50 {
        let c = 1 + seed % 4;
        let x: Vec<f64> = (0..96 * c).map(|_| rng.gen_range(35.0..65.0)).collect();
        let (trend, seasonal) = ok(series_decompose(&x, c, 25))?;
        ensure!(trend.iter().zip(&seasonal).zip(&x).all(|((t, s), v)| t + s == *v), "decomposition not exact, seed {seed}");
    }
    for c in [1, 3, 27] {
        let ctx: Vec<f64> = (0..96 * c).map(|_| rng.gen_range(-50.0f32..300.0) as f64).collect();
        let naive = ok(naive_forecast(&ctx, c, 96))?;
        let m64 = ok(NeuralModel::<f64>::zeroed(NeuralConfig::NLinear(NLinearConfig::default()), c))?;
        let m32 = ok(NeuralModel::<f32>::zeroed(NeuralConfig::NLinear(NLinearConfig::default()), c))?;
        ensure!(ok(m64.predict_window(&ctx))? == naive, "zero NLinear (64-bit) differs from naive, C = {c}");
        ensure!(ok(m32.predict_window(&ctx))? == naive, "zero NLinear (32-bit) differs from naive, C = {c}");
    }
    let patches = PatchTstConfig::default().n_patches();
    ensure!(patches == 11, "patch count {patches}");
    for seed in 0..20u64 {
        let c = 2 + seed as usize % 5;
        let mut perm: Vec<usize> = (0..c).rev().collect();
        perm.rotate_left(1);
        let ctx: Vec<f64> = (0..96 * c).map(|_| rng.gen_range(-50.0f32..300.0) as f64).collect();
        let configs = [
            NeuralConfig::PatchTst(PatchTstConfig { d_model: 16, d_ff: 32, ..Default::default() }),
            NeuralConfig::DLinear(DLinearConfig::default()),
            NeuralConfig::NLinear(NLinearConfig::default()),
        ];
        for config in configs {
            let m = ok(NeuralModel::<f32>::new(config.clone(), c, seed))?;
            let y = ok(m.predict_window(&ctx))?;
            let yp = ok(m.predict_window(&permute(&ctx, c, &perm)))?;
            ensure!(permute(&y, c, &perm) == yp, "{} not permutation equivariant, seed {seed}", config.name());
        }
    }
    Ok("decomposition exact on 50 blocks, zero NLinear == naive, 11 patches, equivariance bitwise on 60 models".into())
}

// 5

fn seasonal_panel() -> DataSource {
    let channels = (0..3)
        .map(|i| SynthSpec {
            name: Some(["DE", "FR", "NL"][i].into()),
            trend_segments: vec![TrendSegment { length: 5000, slope: 0.004 + 0.002 * i as f64 }],
            seasonals: vec![Seasonal { period: 24.0, amplitude: 20.0, phase: i as f64 }],
            // 5% of the seasonal amplitude
            noise_std: 1.0,
            seed: 50 + i as u64,
            ..SynthSpec::flat(5000, 60.0 + 5.0 * i as f64)
        })
        .collect();
    DataSource::Synth { channels }
}

fn small_patchtst() -> PatchTstConfig {
    PatchTstConfig { d_model: 16, n_layers: 1, n_heads: 2, d_ff: 32, ..Default::default() }
}

fn smape(pred: &[f64], actual: &[f64]) -> f64 {
    pred.iter().zip(actual).map(|(p, a)| 2.0 * (p - a).abs() / (p.abs() + a.abs())).sum::<f64>() / pred.len() as f64
}

/// Fold-averaged SMAPE per model: mean over folds of the fold's mean SMAPE.
fn fold_averaged_smape(records: &[gridcast_harness::StoredRecord]) -> BTreeMap<String, f64> {
    let mut by_fold: BTreeMap<(String, usize), (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = by_fold.entry((r.model.clone(), r.fold)).or_default();
        e.0 += r.metrics.smape;
        e.1 += 1;
    }
    let mut out: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for ((model, _), (sum, n)) in by_fold {
        let e = out.entry(model).or_default();
        e.0 += sum / n as f64;
        e.1 += 1;
    }
    out.into_iter().map(|(m, (s, n))| (m, s / n as f64)).collect()
}

/// Prices whose hourly changes follow an AR(2), the process an ARIMA(2,1,2)
/// nests. The level starts high enough that SMAPE stays well defined.
fn ar2_series(n: usize, seed: u64) -> Vec<f64> {
    let (phi1, phi2) = (0.5, 0.2);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dx = vec![0.0f64; n + 500];
    for t in 2..dx.len() {
        dx[t] = phi1 * dx[t - 1] + phi2 * dx[t - 2] + noise.sample(&mut rng);
    }
    dx.split_off(500)
        .into_iter()
        .scan(1000.0, |level, d| {
            *level += d;
            Some(*level)
        })
        .collect()
}

fn learning_sanity() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = BenchConfig::new(
        seasonal_panel(),
        vec![
            ModelEntry::new(ModelKind::DLinear(DLinearConfig::default())),
            ModelEntry::new(ModelKind::PatchTst(small_patchtst())),
            ModelEntry::new(ModelKind::Naive),
        ],
    );
    cfg.seed = 7;
    cfg.train = TrainConfig { max_epochs: 10, learning_rate: 3e-3, ..TrainConfig::default() };
    let out = ok(run_benchmark(&cfg, dir.path(), &RunOptions::default()))?;
    ensure!(out.failed_units() == 0, "{} failed units", out.failed_units());
    let s = fold_averaged_smape(&out.store.records);
    let naive = s["Naive"];
    for model in ["DLinear", "PatchTST"] {
        ensure!(s[model] <= 0.8 * naive, "{model} SMAPE {:.4} vs naive {naive:.4}", s[model]);
    }

    // ARIMA(2,1,2) against naive on AR(2) data, same walk-forward protocol.
    let plan = ok(make_walk_forward_plan(5000, 2000, 500, 6, 500))?;
    let arima_cfg = ArimaConfig { order: ArimaOrder { p: 2, d: 1, q: 2 }, ..ArimaConfig::default() };
    let (mut arima_total, mut naive_total) = (0.0, 0.0);
    for seed in 0..3 {
        let x = ar2_series(5000, 900 + seed);
        for fold in &plan.folds {
            let model = ok(gridcast_models::fit_arima(&x[fold.train.clone()], &arima_cfg))?;
            let windows = ok(enumerate_eval_windows(&plan, fold.index, 96, 96, 96))?;
            let (mut a, mut n) = (0.0, 0.0);
            for w in &windows {
                let ctx = &x[w.context.clone()];
                let actual = &x[w.target.clone()];
                a += smape(&ok(model.forecast(ctx, 96))?, actual);
                n += smape(&ok(naive_forecast(ctx, 1, 96))?, actual);
            }
            arima_total += a / windows.len() as f64;
            naive_total += n / windows.len() as f64;
        }
    }
    let folds = 3.0 * plan.folds.len() as f64;
    let (arima, naive_ar) = (arima_total / folds, naive_total / folds);
    ensure!(arima < naive_ar, "ARIMA(2,1,2) SMAPE {arima:.4} vs naive {naive_ar:.4}");
    Ok(format!(
        "SMAPE DLinear {:.4}, PatchTST {:.4}, naive {naive:.4}; AR(2): ARIMA {arima:.4}, naive {naive_ar:.4}",
        s["DLinear"], s["PatchTST"]
    ))
}

// 6

fn early_stopping_and_warm_start() -> Outcome {
    let mut stopper = EarlyStopping::new(0.01, 1, 10, None);
    let losses = [1.0, 0.5, 0.495, 0.2, 0.1];
    let stopped = losses.iter().position(|&l| stopper.observe(l)).map(|i| i + 1);
    ensure!(stopped == Some(3), "scripted sequence stopped at {stopped:?}");

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = BenchConfig::new(
        seasonal_panel(),
        vec![ModelEntry::new(ModelKind::DLinear(DLinearConfig::default()))],
    );
    cfg.train = TrainConfig { max_epochs: 2, ..TrainConfig::default() };
    cfg.plan = PlanConfig { n_folds: 4, ..PlanConfig::default() };
    ok(run_benchmark(&cfg, dir.path(), &RunOptions::default()))?;
    let panel = ok(load_panel(&cfg))?;
    let plan = ok(make_walk_forward_plan(5000, 2000, 500, 4, 500))?;
    let entry = &cfg.models[0];
    let net = NeuralConfig::DLinear(DLinearConfig::default());
    for k in 1..4 {
        let saved = |f: usize| std::fs::read(checkpoint_path(dir.path(), "DLinear", f)).map_err(|e| e.to_string());
        let prev_bytes = saved(k - 1)?;
        let mut prev = ok(NeuralModel::<f32>::zeroed(net.clone(), 3))?;
        ok(prev.load_checkpoint(&prev_bytes))?;
        // the warm-started network holds fold k-1's parameters exactly
        let mut warm = ok(NeuralModel::<f32>::new(net.clone(), 3, 12345))?;
        ok(warm.warm_start(&prev))?;
        ensure!(ok(warm.to_checkpoint())? == prev_bytes, "warm start of fold {k} differs from checkpoint {}", k - 1);
        // and retraining from it reproduces fold k's checkpoint
        let (fitted, _) = ok(fit_unit::<f32>(&cfg, entry, &panel, &plan.folds[k], Some(&prev)))?;
        let Fitted::Scaled { model, .. } = fitted else { return Err("DLinear was not scaled".into()) };
        ensure!(ok(model.to_checkpoint())? == saved(k)?, "fold {k} retrained from checkpoint {} differs", k - 1);
    }

    let block = ok(SeriesBlock::new(vec![0.0; 400 * 2], 2))?;
    let mut zero = ok(NeuralModel::<f64>::zeroed(NeuralConfig::NLinear(NLinearConfig::default()), 2))?;
    let hist = ok(train(&mut zero, &block, &TrainConfig { min_epochs: 2, ..TrainConfig::default() }))?;
    ensure!(hist.epochs() == 2, "constant data trained {} epochs", hist.epochs());
    Ok("scripted losses stop at epoch 3, fold chain matches checkpoints for folds 1..3".into())
}

// 7

fn oracle_pacf(series: &[f64], k: usize) -> f64 {
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let mut padded = vec![0.0; k];
    padded.extend(series.iter().map(|v| v - mean));
    padded.extend(std::iter::repeat(0.0).take(k));
    let rows = padded.len() - k;
    let design = DMatrix::from_fn(rows, k, |r, j| padded[r + k - 1 - j]);
    let target = DVector::from_fn(rows, |r, _| padded[r + k]);
    design.svd(true, true).solve(&target, 1e-14).unwrap()[k - 1]
}

fn statistics_oracles() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi: f64 = rng.gen_range(-0.9..0.9);
        let n = rng.gen_range(200..1500);
        let mut x = vec![0.0f64; n];
        for t in 1..n {
            let e: f64 = StandardNormal.sample(&mut rng);
            x[t] = phi * x[t - 1] + e;
        }
        let r = ok(pacf(&x, 12))?;
        for k in 1..=12 {
            worst = worst.max((r.at(k) - oracle_pacf(&x, k)).abs());
        }
    }
    ensure!(worst < 1e-6, "PACF differs from OLS by {worst:e}");

    let cells: Vec<(String, f64, f64)> = (0..27).map(|i| (format!("C{i:02}"), 1.0, 2.0)).collect();
    let table =
        ok(ScoreTable::from_cells(cells.iter().flat_map(|(c, a, b)| [("A", c.as_str(), *a), ("B", c.as_str(), *b)])))?;
    let f = ok(friedman_test(&table, &[]))?;
    ensure!((f.statistic - 27.0).abs() < 1e-9, "chi-square {}", f.statistic);
    ensure!((f.p_value - 2.0e-7).abs() < 5e-8, "p {}", f.p_value);
    let sf = chi_square_sf(3.841, 1.0);
    ensure!((sf - 0.05).abs() < 1e-4, "chi-square sf {sf}");
    Ok(format!("PACF max deviation {worst:.1e}, Friedman chi2 {} p {:.3e}, sf {sf:.5}", f.statistic, f.p_value))
}

// 8

fn resume_roster() -> BenchConfig {
    let mut cfg = BenchConfig::new(
        seasonal_panel(),
        vec![
            ModelEntry::new(ModelKind::NLinear(NLinearConfig::default())),
            ModelEntry::new(ModelKind::DLinear(DLinearConfig::default())),
            ModelEntry::new(ModelKind::Arima(ArimaConfig { order: ArimaOrder { p: 1, d: 1, q: 1 }, ..ArimaConfig::default() })),
            ModelEntry::new(ModelKind::Naive),
        ],
    );
    cfg.train = TrainConfig { max_epochs: 2, ..TrainConfig::default() };
    cfg.seed = 11;
    cfg.jobs = 3;
    cfg
}

fn run_files(dir: &Path) -> Result<Vec<(PathBuf, Vec<u8>)>, String> {
    let mut names: Vec<PathBuf> = [RECORDS, HISTORY, PROGRESS, SUMMARY].iter().map(PathBuf::from).collect();
    for model in ["NLinear", "DLinear"] {
        for k in 0..6 {
            names.push(checkpoint_path(Path::new(""), model, k));
        }
    }
    names
        .into_iter()
        .map(|n| std::fs::read(dir.join(&n)).map(|b| (n.clone(), b)).map_err(|e| format!("{}: {e}", n.display())))
        .collect()
}

fn determinism_and_resume() -> Outcome {
    let cfg = resume_roster();
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let a = ok(run_benchmark(&cfg, dirs[0].path(), &RunOptions::default()))?;
    let b = ok(run_benchmark(&cfg, dirs[1].path(), &RunOptions::default()))?;
    ensure!(a.store.records == b.store.records && a.store.histories == b.store.histories, "stores differ");
    ensure!(a.store.units == b.store.units, "unit states differ");
    let fa = run_files(dirs[0].path())?;
    ensure!(fa == run_files(dirs[1].path())?, "run files differ");

    let killed = ok(run_benchmark(&cfg, dirs[2].path(), &RunOptions { max_units: Some(7) }))?;
    ensure!(!killed.complete, "interrupted run claims completion");
    let resumed = ok(run_benchmark(&cfg, dirs[2].path(), &RunOptions::default()))?;
    ensure!(resumed.complete, "resumed run incomplete");
    ensure!(resumed.units_run == 24 - 7, "resume ran {} units", resumed.units_run);
    ensure!(resumed.store.records == a.store.records, "resumed records differ");
    ensure!(resumed.store.histories == a.store.histories, "resumed histories differ");
    ensure!(run_files(dirs[2].path())? == fa, "resumed run files differ");
    Ok(format!("{} records identical across runs and after resume from 7 of 24 units", a.store.records.len()))
}

// 9

fn stub(mode: &[&str], timeout: f64) -> ExternalForecasterSpec {
    ExternalForecasterSpec::new([&[STUB][..], mode].concat(), timeout)
}

fn external_protocol() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let ctx: Vec<f64> = (0..96).map(|_| rng.gen_range(-100.0..400.0)).collect();
        let actual: Vec<f64> = (0..96).map(|_| rng.gen_range(-100.0..400.0)).collect();
        let pred = ok(forecast_series(&stub(&["naive"], 20.0), "DE", &ctx, 96))?;
        let last = ctx[95];
        ensure!(pred.iter().all(|&v| v == last), "stub did not repeat the last value");
        let m = ok(compute_metrics(&actual, &pred))?;
        let n = 96.0;
        let mae = actual.iter().map(|y| (y - last).abs()).sum::<f64>() / n;
        let mse = actual.iter().map(|y| (y - last) * (y - last)).sum::<f64>() / n;
        let s = actual.iter().map(|y| 2.0 * (y - last).abs() / (y.abs() + last.abs())).sum::<f64>() / n;
        ensure!(m == ok(compute_metrics(&actual, &vec![last; 96]))?, "stub metrics differ from in-process naive");
        ensure!((m.mae - mae).abs() <= 1e-12 * mae && (m.mse - mse).abs() <= 1e-12 * mse, "metrics off closed form");
        ensure!((m.smape - s).abs() <= 1e-12 && (m.rmse - mse.sqrt()).abs() <= 1e-12 * mse.sqrt(), "metrics off closed form");
    }
    let ctx = [1.0, 2.0, 3.0];
    match forecast_series(&stub(&["short"], 20.0), "FR", &ctx, 4) {
        Err(ExternalError::ShortOutput { channel, expected: 4, got: 3 }) if channel == "FR" => {}
        other => return Err(format!("short stub gave {other:?}")),
    }
    match forecast_series(&stub(&["malformed"], 20.0), "FR", &ctx, 4) {
        Err(ExternalError::Malformed { .. }) => {}
        other => return Err(format!("malformed stub gave {other:?}")),
    }
    let t = Instant::now();
    match forecast_series(&stub(&["sleep", "30"], 0.5), "FR", &ctx, 4) {
        Err(ExternalError::Timeout { .. }) => {}
        other => return Err(format!("sleeping stub gave {other:?}")),
    }
    ensure!(t.elapsed() < Duration::from_secs(10), "timeout took {:?}", t.elapsed());
    Ok("naive stub metrics exact; short, malformed and timeout stubs rejected".into())
}

// 10

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let DataSource::Synth { channels } = seasonal_panel() else { unreachable!() };
    let panel = ok(generate_panel(&channels))?;
    let panel_path = dir.path().join("panel.bin");
    ok(write_panel(&panel_path, &panel))?;

    let mut cfg = BenchConfig::new(
        DataSource::Panel { path: panel_path },
        vec![
            ModelEntry::new(ModelKind::Arima(ArimaConfig::default())),
            ModelEntry::new(ModelKind::NLinear(NLinearConfig::default())),
            ModelEntry::new(ModelKind::DLinear(DLinearConfig::default())),
            ModelEntry::new(ModelKind::TsMixer(TsMixerConfig { n_blocks: 1, hidden: 32, ..Default::default() })),
            ModelEntry::new(ModelKind::PatchTst(small_patchtst())),
            ModelEntry::named("NaiveStub", ModelKind::External(stub(&["naive"], 60.0))),
        ],
    );
    cfg.train = TrainConfig { max_epochs: 2, ..TrainConfig::default() };
    cfg.seed = 2024;
    let run_dir = dir.path().join("run");
    let out = ok(run_benchmark(&cfg, &run_dir, &RunOptions::default()))?;
    ensure!(out.complete && out.failed_units() == 0, "{} failed units", out.failed_units());
    let mut expected = std::collections::BTreeSet::new();
    for m in &cfg.models {
        for fold in 0..6 {
            for window in 0..5 {
                for c in panel.channels() {
                    expected.insert((m.name().to_string(), c.clone(), fold, window));
                }
            }
        }
    }
    let got: std::collections::BTreeSet<_> =
        out.store.records.iter().map(|r| (r.model.clone(), r.country.clone(), r.fold, r.window)).collect();
    ensure!(got == expected && out.store.records.len() == expected.len(), "records {} of {}", got.len(), expected.len());
    ensure!(out.store.records.iter().all(|r| r.metrics.smape.is_finite() && r.metrics.rmse.is_finite()), "non-finite metric");

    let records = out.store.result_records();
    let mut files = 0;
    for kind in ReportKind::ALL {
        for path in ok(emit_report(&records, kind, cfg.aggregation, &run_dir.join("reports")))? {
            let mut rdr = ok(csv::Reader::from_path(&path))?;
            let width = ok(rdr.headers())?.len();
            let rows = rdr.records().collect::<Result<Vec<_>, _>>().map_err(|e| format!("{}: {e}", path.display()))?;
            ensure!(width >= 2 && !rows.is_empty(), "{} is empty", path.display());
            ensure!(rows.iter().all(|r| r.len() == width && r.iter().all(|f| !f.is_empty() || width > 2)), "{} ragged", path.display());
            files += 1;
        }
    }
    Ok(format!("{} records from 6 models, {files} report files", out.store.records.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("ranking reproduction", ranking_reproduction, Duration::from_secs(1)),
        ("protocol arithmetic", protocol_arithmetic, Duration::from_secs(1)),
        ("gradient correctness", gradient_correctness, Duration::from_secs(120)),
        ("model identities", model_identities, Duration::from_secs(60)),
        ("learning sanity", learning_sanity, Duration::from_secs(600)),
        ("early stopping and warm start", early_stopping_and_warm_start, Duration::from_secs(60)),
        ("statistics oracles", statistics_oracles, Duration::from_secs(60)),
        ("determinism and resume", determinism_and_resume, Duration::from_secs(300)),
        ("external protocol", external_protocol, Duration::from_secs(60)),
        ("end-to-end smoke", end_to_end, Duration::from_secs(1200)),
    ];
    let only: Option<usize> = std::env::var("GRIDCAST_CRITERION").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = start.elapsed();
        let result = result.and_then(|detail| {
            if elapsed > *budget {
                Err(format!("took {elapsed:.2?}, budget {budget:?}"))
            } else {
                Ok(detail)
            }
        });
        match result {
            Ok(detail) => println!("criterion {n} ({name}): PASS in {elapsed:.2?}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL in {elapsed:.2?}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
