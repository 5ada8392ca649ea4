use gridcast_autodiff::Tensor;
use gridcast_models::{
    naive_forecast, series_decompose, DLinearConfig, NLinearConfig, NeuralConfig, NeuralModel, PatchTstConfig,
    TsMixerConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn all_configs(l: usize, h: usize) -> Vec<NeuralConfig> {
    vec![
        NeuralConfig::DLinear(DLinearConfig { input_len: l, horizon: h, kernel_size: 25 }),
        NeuralConfig::NLinear(NLinearConfig { input_len: l, horizon: h }),
        NeuralConfig::TsMixer(TsMixerConfig { input_len: l, horizon: h, n_blocks: 2, hidden: 16 }),
        NeuralConfig::PatchTst(PatchTstConfig { input_len: l, horizon: h, d_model: 16, d_ff: 32, ..Default::default() }),
    ]
}

fn prices(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-50.0..300.0)).collect()
}

#[test]
fn nlinear_zero_init_is_naive() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for c in [1, 3, 27] {
        let m = NeuralModel::<f64>::zeroed(NeuralConfig::NLinear(NLinearConfig::default()), c).unwrap();
        let ctx = prices(&mut rng, 96 * c);
        assert_eq!(m.predict_window(&ctx).unwrap(), naive_forecast(&ctx, c, 96).unwrap());
        let m32 = NeuralModel::<f32>::zeroed(NeuralConfig::NLinear(NLinearConfig::default()), c).unwrap();
        let ctx32: Vec<f64> = ctx.iter().map(|&v| v as f32 as f64).collect();
        assert_eq!(m32.predict_window(&ctx32).unwrap(), naive_forecast(&ctx32, c, 96).unwrap());
    }
}

#[test]
fn zero_init_dlinear_predicts_zero() {
    let m = NeuralModel::<f64>::zeroed(NeuralConfig::DLinear(DLinearConfig::default()), 2).unwrap();
    let ctx = prices(&mut ChaCha8Rng::seed_from_u64(2), 192);
    assert!(m.predict_window(&ctx).unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn patch_count_default() {
    assert_eq!(PatchTstConfig::default().n_patches(), 11);
    assert_eq!(PatchTstConfig { input_len: 512, ..Default::default() }.n_patches(), 63);
}

#[test]
fn shape_contracts() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for config in all_configs(96, 96) {
        for c in [1, 3, 27] {
            let m = NeuralModel::<f32>::new(config.clone(), c, 7).unwrap();
            let b = 2;
            let x = Tensor::new(vec![b, 96, c], (0..b * 96 * c).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).unwrap();
            let y = m.predict(&x).unwrap();
            assert_eq!(y.shape(), &[b, 96, c], "{}", config.name());
            assert!(y.data().iter().all(|v| v.is_finite()));
            let bad = Tensor::new(vec![1, 95, c], vec![0.0f32; 95 * c]).unwrap();
            assert!(m.predict(&bad).is_err(), "{} accepted a short context", config.name());
        }
    }
}

#[test]
fn tsmixer_rejects_other_channel_counts() {
    let config = NeuralConfig::TsMixer(TsMixerConfig::default());
    let m = NeuralModel::<f64>::new(config, 3, 0).unwrap();
    assert!(m.predict_window(&vec![1.0; 96 * 4]).is_err());
    let x = Tensor::new(vec![1, 96, 4], vec![1.0; 96 * 4]).unwrap();
    assert!(m.predict(&x).is_err());
}

#[test]
fn seeded_init_is_reproducible() {
    for config in all_configs(96, 96) {
        let a = NeuralModel::<f32>::new(config.clone(), 3, 11).unwrap();
        let b = NeuralModel::<f32>::new(config.clone(), 3, 11).unwrap();
        let c = NeuralModel::<f32>::new(config, 3, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}

fn permute_channels(x: &[f64], c: usize, perm: &[usize]) -> Vec<f64> {
    x.chunks(c).flat_map(|row| perm.iter().map(move |&p| row[p])).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn patchtst_channel_permutation_equivariance(seed in any::<u64>(), c in 2usize..6) {
        let m = NeuralModel::<f32>::new(NeuralConfig::PatchTst(PatchTstConfig { d_model: 16, d_ff: 32, ..Default::default() }), c, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ctx: Vec<f64> = prices(&mut rng, 96 * c).into_iter().map(|v| v as f32 as f64).collect();
        let mut perm: Vec<usize> = (0..c).collect();
        perm.rotate_left(1);
        perm.swap(0, c - 1);
        let y = m.predict_window(&ctx).unwrap();
        let yp = m.predict_window(&permute_channels(&ctx, c, &perm)).unwrap();
        prop_assert_eq!(permute_channels(&y, c, &perm), yp);
    }

    #[test]
    fn linear_models_channel_permutation_equivariance(seed in any::<u64>(), c in 2usize..6) {
        for config in [
            NeuralConfig::DLinear(DLinearConfig::default()),
            NeuralConfig::NLinear(NLinearConfig::default()),
        ] {
            let m = NeuralModel::<f64>::new(config, c, seed).unwrap();
            let ctx = prices(&mut ChaCha8Rng::seed_from_u64(seed), 96 * c);
            let perm: Vec<usize> = (0..c).rev().collect();
            let y = m.predict_window(&ctx).unwrap();
            let yp = m.predict_window(&permute_channels(&ctx, c, &perm)).unwrap();
            prop_assert_eq!(permute_channels(&y, c, &perm), yp);
        }
    }

    #[test]
    fn nlinear_level_shift_equivariance(seed in any::<u64>(), shift in -64i32..64) {
        // Power-of-two-friendly values keep the shifted context exact.
        let m = NeuralModel::<f64>::new(NeuralConfig::NLinear(NLinearConfig::default()), 2, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ctx: Vec<f64> = (0..192).map(|_| rng.gen_range(-256i32..256) as f64 / 4.0).collect();
        let shifted: Vec<f64> = ctx.iter().map(|v| v + shift as f64).collect();
        let y = m.predict_window(&ctx).unwrap();
        let ys = m.predict_window(&shifted).unwrap();
        for (a, b) in y.iter().zip(&ys) {
            prop_assert!((a + shift as f64 - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn decomposition_reconstructs_prices(seed in any::<u64>(), k in 0usize..20) {
        let x: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..96 * 3).map(|_| rng.gen_range(35.0..65.0)).collect()
        };
        let (t, s) = series_decompose(&x, 3, 2 * k + 1).unwrap();
        for i in 0..x.len() {
            prop_assert_eq!(t[i] + s[i], x[i]);
        }
    }
}
