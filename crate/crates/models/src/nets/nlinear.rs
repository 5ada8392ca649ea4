use gridcast_autodiff::{ParamSet, Scalar, Tape, Tensor, Var};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{context_dims, linear, to_time_major, Net};
use crate::{ModelError, HORIZON, INPUT_LEN};

/// One `L -> H` linear map applied to the context minus its last value; the
/// last value is added back to the output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NLinearConfig {
    pub input_len: usize,
    pub horizon: usize,
}

impl Default for NLinearConfig {
    fn default() -> Self {
        Self { input_len: INPUT_LEN, horizon: HORIZON }
    }
}

impl Net for NLinearConfig {
    fn input_len(&self) -> usize {
        self.input_len
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn validate(&self) -> Result<(), ModelError> {
        Ok(())
    }

    fn init<T: Scalar>(&self, _n_channels: usize, rng: &mut ChaCha8Rng) -> ParamSet<T> {
        let (l, h) = (self.input_len, self.horizon);
        let mut p = ParamSet::new();
        p.push_uniform("linear.weight", &[l, h], l, rng);
        p.push_uniform("linear.bias", &[h], l, rng);
        p
    }

    fn forward<T: Scalar>(&self, tape: &mut Tape<T>, p: &[Var], context: &Tensor<T>) -> Result<Var, ModelError> {
        let (b, c) = context_dims(context, self.input_len)?;
        let (l, h) = (self.input_len, self.horizon);
        let x = context.data();
        let mut shifted = Vec::with_capacity(x.len());
        let mut level = Vec::with_capacity(b * h * c);
        for bi in 0..b {
            let last = &x[(bi * l + l - 1) * c..(bi * l + l) * c];
            for ci in 0..c {
                shifted.extend((0..l).map(|li| x[(bi * l + li) * c + ci] - last[ci]));
            }
            for _ in 0..h {
                level.extend_from_slice(last);
            }
        }
        let xs = tape.constant(Tensor::new(vec![b, c, l], shifted)?);
        let y = linear(tape, xs, p[0], p[1])?;
        let y = to_time_major(tape, y)?;
        let level = tape.constant(Tensor::new(vec![b, h, c], level)?);
        Ok(tape.add(y, level)?)
    }
}
