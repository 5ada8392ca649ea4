use gridcast_autodiff::{ParamSet, Scalar, Tape, Tensor, Var};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{context_dims, linear, to_time_major, Net};
use crate::{ModelError, HORIZON, INPUT_LEN};

/// All-MLP mixer. Each block normalizes over the whole `L x C` window, mixes
/// along time with a relu layer, then along channels with a two-layer relu
/// MLP, both with residual connections. A final linear map projects `L -> H`.
/// Parameter shapes depend on the channel count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsMixerConfig {
    pub input_len: usize,
    pub horizon: usize,
    pub n_blocks: usize,
    pub hidden: usize,
}

impl Default for TsMixerConfig {
    fn default() -> Self {
        Self { input_len: INPUT_LEN, horizon: HORIZON, n_blocks: 2, hidden: 64 }
    }
}

const PER_BLOCK: usize = 10;

impl Net for TsMixerConfig {
    fn input_len(&self) -> usize {
        self.input_len
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.hidden == 0 {
            return Err(ModelError::Config("hidden width must be positive".into()));
        }
        Ok(())
    }

    fn init<T: Scalar>(&self, c: usize, rng: &mut ChaCha8Rng) -> ParamSet<T> {
        let (l, h, hid) = (self.input_len, self.horizon, self.hidden);
        let mut p = ParamSet::new();
        for i in 0..self.n_blocks {
            p.push(format!("block{i}.time_norm.gamma"), Tensor::full(&[l * c], T::one()));
            p.push(format!("block{i}.time_norm.beta"), Tensor::zeros(&[l * c]));
            p.push_uniform(format!("block{i}.time.weight"), &[l, l], l, rng);
            p.push_uniform(format!("block{i}.time.bias"), &[l], l, rng);
            p.push(format!("block{i}.feat_norm.gamma"), Tensor::full(&[l * c], T::one()));
            p.push(format!("block{i}.feat_norm.beta"), Tensor::zeros(&[l * c]));
            p.push_uniform(format!("block{i}.feat1.weight"), &[c, hid], c, rng);
            p.push_uniform(format!("block{i}.feat1.bias"), &[hid], c, rng);
            p.push_uniform(format!("block{i}.feat2.weight"), &[hid, c], hid, rng);
            p.push_uniform(format!("block{i}.feat2.bias"), &[c], hid, rng);
        }
        p.push_uniform("projection.weight", &[l, h], l, rng);
        p.push_uniform("projection.bias", &[h], l, rng);
        p
    }

    fn forward<T: Scalar>(&self, tape: &mut Tape<T>, p: &[Var], context: &Tensor<T>) -> Result<Var, ModelError> {
        let (b, c) = context_dims(context, self.input_len)?;
        let l = self.input_len;
        if self.n_blocks > 0 {
            let expected = tape.shape(p[PER_BLOCK * self.n_blocks - 1])[0];
            if expected != c {
                return Err(ModelError::Shape { what: "channel count", expected, got: c });
            }
        }
        let mut x = tape.constant(context.clone());
        for blk in p[..PER_BLOCK * self.n_blocks].chunks_exact(PER_BLOCK) {
            // time mixing
            let z = tape.reshape(x, &[b, l * c])?;
            let z = tape.layer_norm(z, blk[0], blk[1])?;
            let z = tape.reshape(z, &[b, l, c])?;
            let z = tape.transpose(z, 1, 2)?;
            let z = linear(tape, z, blk[2], blk[3])?;
            let z = tape.relu(z)?;
            let z = tape.transpose(z, 1, 2)?;
            x = tape.add(x, z)?;
            // feature mixing
            let z = tape.reshape(x, &[b, l * c])?;
            let z = tape.layer_norm(z, blk[4], blk[5])?;
            let z = tape.reshape(z, &[b, l, c])?;
            let z = linear(tape, z, blk[6], blk[7])?;
            let z = tape.relu(z)?;
            let z = linear(tape, z, blk[8], blk[9])?;
            x = tape.add(x, z)?;
        }
        let n = p.len();
        let z = tape.transpose(x, 1, 2)?;
        let y = linear(tape, z, p[n - 2], p[n - 1])?;
        to_time_major(tape, y)
    }
}
