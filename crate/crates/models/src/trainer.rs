//! Mini-batch training with the 0.01 early-stopping rule.

use gridcast_autodiff::{adam_step, AdamConfig, AdamState, Scalar, Tape};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{ModelError, NeuralModel, SeriesBlock};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Minimum epoch-over-epoch drop in mean-squared error to keep going.
    pub early_stop_delta: f64,
    pub min_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 10,
            early_stop_delta: 0.01,
            min_epochs: 1,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.min_epochs == 0 || self.max_epochs < self.min_epochs {
            return Err(ModelError::Config(format!(
                "need max_epochs >= min_epochs >= 1, got {} and {}",
                self.max_epochs, self.min_epochs
            )));
        }
        if !(self.early_stop_delta >= 0.0) {
            return Err(ModelError::Config("early_stop_delta must be >= 0".into()));
        }
        if self.batch_size == 0 || !(self.learning_rate > 0.0) {
            return Err(ModelError::Config("batch_size and learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// The stopping rule on its own: after epoch `e` (1-based) training stops
/// when `e == max_epochs`, or when `e >= min_epochs` and the loss fell by less
/// than `delta` relative to the previous epoch. For the first epoch the
/// reference is the loss before any update, when one is supplied.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    delta: f64,
    min_epochs: usize,
    max_epochs: usize,
    previous: Option<f64>,
    epochs: usize,
}

impl EarlyStopping {
    pub fn new(delta: f64, min_epochs: usize, max_epochs: usize, baseline: Option<f64>) -> Self {
        Self { delta, min_epochs, max_epochs, previous: baseline, epochs: 0 }
    }

    /// Records an epoch loss; returns true when training should stop.
    pub fn observe(&mut self, loss: f64) -> bool {
        self.epochs += 1;
        let stalled = self.previous.is_some_and(|prev| prev - loss < self.delta);
        self.previous = Some(loss);
        self.epochs >= self.max_epochs || (self.epochs >= self.min_epochs && stalled)
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean-squared error over all training windows before the first update.
    pub initial_loss: f64,
    /// Mean of the mini-batch losses within each epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.epoch_losses.len()
    }
}

/// Mean-squared error of the model over every window of `block`.
pub fn evaluate_loss<T: Scalar>(model: &NeuralModel<T>, block: &SeriesBlock, batch_size: usize) -> Result<f64, ModelError> {
    let (l, h) = (model.config().input_len(), model.config().horizon());
    let n = block.window_count(l, h);
    if n == 0 {
        return Err(ModelError::NoWindows { hours: block.n_hours(), input_len: l, horizon: h });
    }
    let starts: Vec<usize> = (0..n).collect();
    let mut tape = Tape::new();
    let mut total = 0.0;
    for chunk in starts.chunks(batch_size.max(1)) {
        tape.reset();
        let vars = model.params().bind_constant(&mut tape);
        let (x, y) = block.batch::<T>(chunk, l, h);
        let pred = model.forward(&mut tape, &vars, &x)?;
        let target = tape.constant(y);
        let loss = tape.mse_loss(pred, target)?;
        total += tape.value(loss).item().as_f64() * chunk.len() as f64;
    }
    Ok(total / n as f64)
}

/// Trains in place on every stride-1 window of `block` (already standardized)
/// with Adam, starting from fresh optimizer state.
pub fn train<T: Scalar>(model: &mut NeuralModel<T>, block: &SeriesBlock, config: &TrainConfig) -> Result<TrainHistory, ModelError> {
    config.validate()?;
    if block.n_channels() != model.n_channels() {
        return Err(ModelError::Shape { what: "channel count", expected: model.n_channels(), got: block.n_channels() });
    }
    let (l, h) = (model.config().input_len(), model.config().horizon());
    let n = block.window_count(l, h);
    if n == 0 {
        return Err(ModelError::NoWindows { hours: block.n_hours(), input_len: l, horizon: h });
    }
    let initial_loss = evaluate_loss(model, block, config.batch_size)?;
    if !initial_loss.is_finite() {
        return Err(ModelError::Divergent { epoch: 0, batch: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(model.params(), AdamConfig { lr: config.learning_rate, ..AdamConfig::default() });
    let mut stopper = EarlyStopping::new(config.early_stop_delta, config.min_epochs, config.max_epochs, Some(initial_loss));
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = TrainHistory { initial_loss, epoch_losses: Vec::new(), steps: 0, stopped_early: false };
    let mut tape = Tape::new();
    loop {
        let epoch = stopper.epochs() + 1;
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut sum = 0.0;
        let mut batches = 0;
        for (bi, chunk) in order.chunks(config.batch_size).enumerate() {
            tape.reset();
            let vars = model.params().bind(&mut tape);
            let (x, y) = block.batch::<T>(chunk, l, h);
            let pred = model.forward(&mut tape, &vars, &x)?;
            let target = tape.constant(y);
            let loss = tape.mse_loss(pred, target)?;
            let value = tape.value(loss).item().as_f64();
            if !value.is_finite() {
                return Err(ModelError::Divergent { epoch, batch: bi });
            }
            let mut grads = tape.backward(loss)?;
            let grads = model.params().collect_grads(&mut grads, &vars);
            adam_step(model.params_mut(), &grads, &mut adam)?;
            sum += value;
            batches += 1;
            history.steps += 1;
        }
        let epoch_loss = sum / batches as f64;
        history.epoch_losses.push(epoch_loss);
        if stopper.observe(epoch_loss) {
            history.stopped_early = stopper.epochs() < config.max_epochs;
            break;
        }
    }
    Ok(history)
}
