//! Finite-difference gradient checks of small model configurations.

use gridcast_autodiff::{grad_check, GradCheckConfig, GradReport, Scalar, ScalarFunction, Tape, Tensor, TensorError, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::nets::{DLinearConfig, NLinearConfig, PatchTstConfig, TsMixerConfig};
use crate::{forward_with, ModelError, NeuralConfig, NeuralModel};

/// Minimal configurations of each architecture with their channel count.
pub fn tiny_configs() -> Vec<(NeuralConfig, usize)> {
    vec![
        (NeuralConfig::DLinear(DLinearConfig { input_len: 8, horizon: 4, kernel_size: 3 }), 2),
        (NeuralConfig::NLinear(NLinearConfig { input_len: 8, horizon: 4 }), 2),
        (NeuralConfig::TsMixer(TsMixerConfig { input_len: 8, horizon: 4, n_blocks: 1, hidden: 4 }), 2),
        (
            NeuralConfig::PatchTst(PatchTstConfig {
                input_len: 16,
                horizon: 4,
                patch_len: 4,
                patch_stride: 4,
                d_model: 8,
                n_layers: 1,
                n_heads: 2,
                d_ff: 16,
            }),
            2,
        ),
    ]
}

const BATCH: usize = 2;
/// Relu inputs closer than this to zero could cross the kink within the
/// finite-difference stencil; such points are redrawn.
pub const KINK_MARGIN: f64 = 0.01;

/// Mean-squared error of the network on a fixed random batch, as a function
/// of its parameters.
pub struct ModelLoss {
    config: NeuralConfig,
    context: Tensor<f64>,
    target: Tensor<f64>,
}

impl ScalarFunction for ModelLoss {
    fn eval<T: Scalar>(&self, tape: &mut Tape<T>, params: &[Var]) -> Result<Var, TensorError> {
        let pred = forward_with(&self.config, tape, params, &self.context.cast()).map_err(|e| match e {
            ModelError::Tensor(t) => t,
            other => TensorError::Invalid { op: "forward", msg: other.to_string() },
        })?;
        let target = tape.constant(self.target.cast());
        tape.mse_loss(pred, target)
    }
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()).expect("sized")
}

/// Draws parameters and data from `seed` (redrawing points that sit within
/// [`KINK_MARGIN`] of a relu kink) and returns the loss and its point.
pub fn model_case(config: &NeuralConfig, n_channels: usize, seed: u64) -> Result<(ModelLoss, Vec<Tensor<f64>>), ModelError> {
    for attempt in 0..1000u64 {
        let s = seed.wrapping_mul(1_000_003).wrapping_add(attempt);
        let model = NeuralModel::<f64>::new(config.clone(), n_channels, s)?;
        let mut rng = ChaCha8Rng::seed_from_u64(s ^ 0x5eed);
        let (l, h) = (config.input_len(), config.horizon());
        let f = ModelLoss {
            config: config.clone(),
            context: random(&mut rng, &[BATCH, l, n_channels]),
            target: random(&mut rng, &[BATCH, h, n_channels]),
        };
        let mut tape = Tape::<f64>::new();
        let vars = model.params().bind_constant(&mut tape);
        forward_with(config, &mut tape, &vars, &f.context)?;
        if tape.relu_margin().is_none_or(|m| m > KINK_MARGIN) {
            return Ok((f, model.params().tensors().to_vec()));
        }
    }
    Err(ModelError::Config("no point away from relu kinks found".into()))
}

/// Fraction of the largest gradient below which a coordinate is compared
/// against that scale: deep compositions cancel some coordinates to within
/// rounding of zero (softmax even makes the key bias gradient exactly zero).
pub fn scale_floor<T: Scalar>() -> f64 {
    if T::BYTES == 4 {
        1e-3
    } else {
        1e-6
    }
}

/// Largest relative gradient error over all parameters at precision `T`.
pub fn model_grad_check<T: Scalar>(config: &NeuralConfig, n_channels: usize, seed: u64) -> Result<GradReport, ModelError> {
    let (f, point) = model_case(config, n_channels, seed)?;
    let cfg = GradCheckConfig { scale_floor: scale_floor::<T>(), ..GradCheckConfig::default() };
    Ok(grad_check::<T, _>(&f, &point, &cfg)?)
}
