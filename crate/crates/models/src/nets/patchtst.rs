use gridcast_autodiff::{ParamSet, Scalar, Tape, Tensor, Var};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{context_dims, linear, Net};
use crate::{ModelError, HORIZON, INPUT_LEN};

/// Channel-independent patch transformer. Every channel of every window is
/// instance-normalized, cut into patches, encoded by a pre-norm transformer
/// with learned positions and mapped back to `H` values by a flatten head.
/// Weights are shared across channels, so parameter shapes do not depend on
/// the channel count.
///
/// Patches are taken at `start = k * patch_stride` for
/// `k < (L - patch_len) / patch_stride + 1`; trailing values that do not fill
/// a stride are left out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatchTstConfig {
    pub input_len: usize,
    pub horizon: usize,
    pub patch_len: usize,
    pub patch_stride: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
}

impl Default for PatchTstConfig {
    fn default() -> Self {
        Self {
            input_len: INPUT_LEN,
            horizon: HORIZON,
            patch_len: 16,
            patch_stride: 8,
            d_model: 64,
            n_layers: 2,
            n_heads: 4,
            d_ff: 128,
        }
    }
}

const NORM_EPS: f64 = 1e-5;
const PER_LAYER: usize = 16;

impl PatchTstConfig {
    pub fn n_patches(&self) -> usize {
        (self.input_len - self.patch_len) / self.patch_stride + 1
    }

    fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Instance-normalized patches `[B * C, n_p, patch_len]` plus the per-series
    /// mean and scale, ordered by window then channel.
    fn patches<T: Scalar>(&self, context: &Tensor<T>, b: usize, c: usize) -> (Vec<T>, Vec<f64>, Vec<f64>) {
        let (l, n_p) = (self.input_len, self.n_patches());
        let x = context.data();
        let mut out = Vec::with_capacity(b * c * n_p * self.patch_len);
        let mut means = Vec::with_capacity(b * c);
        let mut scales = Vec::with_capacity(b * c);
        let mut series = vec![0.0f64; l];
        for bi in 0..b {
            for ci in 0..c {
                for (li, s) in series.iter_mut().enumerate() {
                    *s = x[(bi * l + li) * c + ci].as_f64();
                }
                let mean = series.iter().sum::<f64>() / l as f64;
                let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / l as f64;
                let scale = (var + NORM_EPS).sqrt();
                for k in 0..n_p {
                    let start = k * self.patch_stride;
                    out.extend(series[start..start + self.patch_len].iter().map(|v| T::lit((v - mean) / scale)));
                }
                means.push(mean);
                scales.push(scale);
            }
        }
        (out, means, scales)
    }
}

impl Net for PatchTstConfig {
    fn input_len(&self) -> usize {
        self.input_len
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.patch_len == 0 || self.patch_len > self.input_len {
            return Err(ModelError::Config(format!(
                "patch_len {} must be in 1..={}",
                self.patch_len, self.input_len
            )));
        }
        if self.patch_stride == 0 {
            return Err(ModelError::Config("patch_stride must be positive".into()));
        }
        if self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return Err(ModelError::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.d_ff == 0 {
            return Err(ModelError::Config("d_ff must be positive".into()));
        }
        Ok(())
    }

    fn init<T: Scalar>(&self, _n_channels: usize, rng: &mut ChaCha8Rng) -> ParamSet<T> {
        let (d, ff, n_p) = (self.d_model, self.d_ff, self.n_patches());
        let mut p = ParamSet::new();
        p.push_uniform("embed.weight", &[self.patch_len, d], self.patch_len, rng);
        p.push_uniform("embed.bias", &[d], self.patch_len, rng);
        p.push_uniform("position", &[n_p, d], d, rng);
        for i in 0..self.n_layers {
            p.push(format!("layer{i}.attn_norm.gamma"), Tensor::full(&[d], T::one()));
            p.push(format!("layer{i}.attn_norm.beta"), Tensor::zeros(&[d]));
            for name in ["query", "key", "value", "out"] {
                p.push_uniform(format!("layer{i}.{name}.weight"), &[d, d], d, rng);
                p.push_uniform(format!("layer{i}.{name}.bias"), &[d], d, rng);
            }
            p.push(format!("layer{i}.ff_norm.gamma"), Tensor::full(&[d], T::one()));
            p.push(format!("layer{i}.ff_norm.beta"), Tensor::zeros(&[d]));
            p.push_uniform(format!("layer{i}.ff1.weight"), &[d, ff], d, rng);
            p.push_uniform(format!("layer{i}.ff1.bias"), &[ff], d, rng);
            p.push_uniform(format!("layer{i}.ff2.weight"), &[ff, d], ff, rng);
            p.push_uniform(format!("layer{i}.ff2.bias"), &[d], ff, rng);
        }
        p.push_uniform("head.weight", &[n_p * d, self.horizon], n_p * d, rng);
        p.push_uniform("head.bias", &[self.horizon], n_p * d, rng);
        p
    }

    fn forward<T: Scalar>(&self, tape: &mut Tape<T>, p: &[Var], context: &Tensor<T>) -> Result<Var, ModelError> {
        let (b, c) = context_dims(context, self.input_len)?;
        let (d, n_p, nh, dh, h) = (self.d_model, self.n_patches(), self.n_heads, self.head_dim(), self.horizon);
        let n = b * c;
        let (patches, means, scales) = self.patches(context, b, c);
        let x = tape.constant(Tensor::new(vec![n, n_p, self.patch_len], patches)?);
        let mut z = linear(tape, x, p[0], p[1])?;
        z = tape.add(z, p[2])?;

        let split_heads = |tape: &mut Tape<T>, v: Var| -> Result<Var, ModelError> {
            let v = tape.reshape(v, &[n, n_p, nh, dh])?;
            let v = tape.transpose(v, 1, 2)?;
            Ok(tape.reshape(v, &[n * nh, n_p, dh])?)
        };
        let attn_scale = 1.0 / (dh as f64).sqrt();
        for lp in p[3..3 + PER_LAYER * self.n_layers].chunks_exact(PER_LAYER) {
            let u = tape.layer_norm(z, lp[0], lp[1])?;
            let q = linear(tape, u, lp[2], lp[3])?;
            let k = linear(tape, u, lp[4], lp[5])?;
            let v = linear(tape, u, lp[6], lp[7])?;
            let (q, k, v) = (split_heads(tape, q)?, split_heads(tape, k)?, split_heads(tape, v)?);
            let kt = tape.transpose(k, 1, 2)?;
            let scores = tape.matmul(q, kt)?;
            let scores = tape.scale(scores, attn_scale)?;
            let weights = tape.softmax(scores)?;
            let ctx = tape.matmul(weights, v)?;
            let ctx = tape.reshape(ctx, &[n, nh, n_p, dh])?;
            let ctx = tape.transpose(ctx, 1, 2)?;
            let ctx = tape.reshape(ctx, &[n, n_p, d])?;
            let o = linear(tape, ctx, lp[8], lp[9])?;
            z = tape.add(z, o)?;

            let u = tape.layer_norm(z, lp[10], lp[11])?;
            let f = linear(tape, u, lp[12], lp[13])?;
            let f = tape.gelu(f)?;
            let f = linear(tape, f, lp[14], lp[15])?;
            z = tape.add(z, f)?;
        }
        let last = p.len();
        let flat = tape.reshape(z, &[n, n_p * d])?;
        let y = linear(tape, flat, p[last - 2], p[last - 1])?;

        let rep = |v: &[f64]| -> Result<Tensor<T>, ModelError> {
            let data = v.iter().flat_map(|&s| std::iter::repeat(T::lit(s)).take(h)).collect();
            Ok(Tensor::new(vec![n, h], data)?)
        };
        let scale = tape.constant(rep(&scales)?);
        let mean = tape.constant(rep(&means)?);
        let y = tape.mul(y, scale)?;
        let y = tape.add(y, mean)?;
        let y = tape.reshape(y, &[b, c, h])?;
        Ok(tape.transpose(y, 1, 2)?)
    }
}
