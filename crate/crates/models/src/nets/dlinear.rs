use gridcast_autodiff::{ParamSet, Scalar, Tape, Tensor, Var};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{context_dims, linear, to_time_major, Net};
use crate::window::channels_first;
use crate::{series_decompose, ModelError, HORIZON, INPUT_LEN};

/// Trend and seasonal parts each get one `L -> H` linear map shared by all
/// channels; the forecast is their sum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DLinearConfig {
    pub input_len: usize,
    pub horizon: usize,
    pub kernel_size: usize,
}

impl Default for DLinearConfig {
    fn default() -> Self {
        Self { input_len: INPUT_LEN, horizon: HORIZON, kernel_size: 25 }
    }
}

impl Net for DLinearConfig {
    fn input_len(&self) -> usize {
        self.input_len
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.kernel_size % 2 == 0 {
            return Err(ModelError::Config(format!("kernel_size must be odd, got {}", self.kernel_size)));
        }
        Ok(())
    }

    fn init<T: Scalar>(&self, _n_channels: usize, rng: &mut ChaCha8Rng) -> ParamSet<T> {
        let (l, h) = (self.input_len, self.horizon);
        let mut p = ParamSet::new();
        p.push_uniform("trend.weight", &[l, h], l, rng);
        p.push_uniform("trend.bias", &[h], l, rng);
        p.push_uniform("seasonal.weight", &[l, h], l, rng);
        p.push_uniform("seasonal.bias", &[h], l, rng);
        p
    }

    fn forward<T: Scalar>(&self, tape: &mut Tape<T>, p: &[Var], context: &Tensor<T>) -> Result<Var, ModelError> {
        let (b, c) = context_dims(context, self.input_len)?;
        let l = self.input_len;
        let mut trend = Vec::with_capacity(context.len());
        let mut seasonal = Vec::with_capacity(context.len());
        for window in context.data().chunks_exact(l * c) {
            let (t, s) = series_decompose(window, c, self.kernel_size)?;
            trend.extend(t);
            seasonal.extend(s);
        }
        let shape = vec![b, c, l];
        let trend = tape.constant(Tensor::new(shape.clone(), channels_first(&trend, b, l, c))?);
        let seasonal = tape.constant(Tensor::new(shape, channels_first(&seasonal, b, l, c))?);
        let yt = linear(tape, trend, p[0], p[1])?;
        let ys = linear(tape, seasonal, p[2], p[3])?;
        let y = tape.add(yt, ys)?;
        to_time_major(tape, y)
    }
}
