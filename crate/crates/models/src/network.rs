use gridcast_autodiff::{read_checkpoint, write_checkpoint, ParamSet, Scalar, Tape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nets::{DLinearConfig, NLinearConfig, Net, PatchTstConfig, TsMixerConfig};
use crate::ModelError;

/// Architecture choice with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "lowercase")]
pub enum NeuralConfig {
    DLinear(DLinearConfig),
    NLinear(NLinearConfig),
    TsMixer(TsMixerConfig),
    PatchTst(PatchTstConfig),
}

macro_rules! dispatch {
    ($self:expr, $c:ident => $e:expr) => {
        match $self {
            NeuralConfig::DLinear($c) => $e,
            NeuralConfig::NLinear($c) => $e,
            NeuralConfig::TsMixer($c) => $e,
            NeuralConfig::PatchTst($c) => $e,
        }
    };
}

impl NeuralConfig {
    pub fn name(&self) -> &'static str {
        match self {
            NeuralConfig::DLinear(_) => "DLinear",
            NeuralConfig::NLinear(_) => "NLinear",
            NeuralConfig::TsMixer(_) => "TSMixer",
            NeuralConfig::PatchTst(_) => "PatchTST",
        }
    }

    pub fn input_len(&self) -> usize {
        dispatch!(self, c => c.input_len())
    }

    pub fn horizon(&self) -> usize {
        dispatch!(self, c => c.horizon())
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.input_len() == 0 || self.horizon() == 0 {
            return Err(ModelError::Config("input_len and horizon must be positive".into()));
        }
        dispatch!(self, c => c.validate())
    }
}

/// Records a forward pass of `config` with parameter vars in layout order.
pub fn forward_with<T: Scalar>(
    config: &NeuralConfig,
    tape: &mut Tape<T>,
    params: &[Var],
    context: &Tensor<T>,
) -> Result<Var, ModelError> {
    dispatch!(config, c => c.forward(tape, params, context))
}

/// A trainable network together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralModel<T> {
    config: NeuralConfig,
    n_channels: usize,
    params: ParamSet<T>,
}

impl<T: Scalar> NeuralModel<T> {
    /// Seeded initialization, uniform in `±1/sqrt(fan_in)`.
    pub fn new(config: NeuralConfig, n_channels: usize, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        if n_channels == 0 {
            return Err(ModelError::Config("at least one channel is required".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = dispatch!(&config, c => c.init(n_channels, &mut rng));
        Ok(Self { config, n_channels, params })
    }

    /// Same layout with every parameter set to zero.
    pub fn zeroed(config: NeuralConfig, n_channels: usize) -> Result<Self, ModelError> {
        let mut m = Self::new(config, n_channels, 0)?;
        for t in m.params.tensors_mut() {
            t.data_mut().fill(T::zero());
        }
        Ok(m)
    }

    pub fn config(&self) -> &NeuralConfig {
        &self.config
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    /// Records the forward pass for a `[B, L, C]` context given parameter vars.
    pub fn forward(&self, tape: &mut Tape<T>, params: &[Var], context: &Tensor<T>) -> Result<Var, ModelError> {
        if params.len() != self.params.len() {
            return Err(ModelError::Shape { what: "parameter count", expected: self.params.len(), got: params.len() });
        }
        forward_with(&self.config, tape, params, context)
    }

    /// Forecast `[B, H, C]` for a `[B, L, C]` context.
    pub fn predict(&self, context: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        let mut tape = Tape::new();
        let vars = self.params.bind_constant(&mut tape);
        let y = self.forward(&mut tape, &vars, context)?;
        Ok(tape.value(y).clone())
    }

    /// Forecast for a single row-major `[L x C]` context, as `[H x C]`.
    pub fn predict_window(&self, context: &[f64]) -> Result<Vec<f64>, ModelError> {
        let (l, c) = (self.config.input_len(), self.n_channels);
        if context.len() != l * c {
            return Err(ModelError::Shape { what: "context values", expected: l * c, got: context.len() });
        }
        let ctx = Tensor::new(vec![1, l, c], context.iter().map(|&v| T::lit(v)).collect())?;
        Ok(self.predict(&ctx)?.to_f64())
    }

    /// Copies parameters from the previous fold's model; the architecture must
    /// match exactly. Optimizer state is not part of a model, so training after
    /// a warm start begins with fresh moments.
    pub fn warm_start(&mut self, previous: &NeuralModel<T>) -> Result<(), ModelError> {
        if self.config != previous.config || self.n_channels != previous.n_channels {
            return Err(ModelError::Architecture(format!(
                "{} with {} channels cannot start from {} with {} channels",
                self.config.name(),
                self.n_channels,
                previous.config.name(),
                previous.n_channels
            )));
        }
        self.params.copy_from(&previous.params).map_err(|e| ModelError::Architecture(e.to_string()))
    }

    pub fn to_checkpoint(&self) -> Result<Vec<u8>, ModelError> {
        Ok(write_checkpoint(&self.params)?)
    }

    /// Replaces parameters with a checkpoint written for the same layout.
    pub fn load_checkpoint(&mut self, bytes: &[u8]) -> Result<(), ModelError> {
        let loaded = read_checkpoint::<T>(bytes)?;
        self.params.copy_from(&loaded).map_err(|e| ModelError::Architecture(e.to_string()))
    }
}
