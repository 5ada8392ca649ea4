use gridcast_autodiff::{Scalar, Tensor};

use crate::ModelError;

/// A contiguous row-major `[hours x channels]` block from which training
/// windows are cut with stride 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesBlock {
    data: Vec<f64>,
    n_channels: usize,
}

impl SeriesBlock {
    pub fn new(data: Vec<f64>, n_channels: usize) -> Result<Self, ModelError> {
        if n_channels == 0 || data.len() % n_channels != 0 {
            return Err(ModelError::Shape { what: "multiple of channel count", expected: n_channels, got: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        Ok(Self { data, n_channels })
    }

    pub fn n_hours(&self) -> usize {
        self.data.len() / self.n_channels
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self, start: usize, len: usize) -> &[f64] {
        &self.data[start * self.n_channels..(start + len) * self.n_channels]
    }

    /// Number of `(input_len + horizon)` windows at stride 1.
    pub fn window_count(&self, input_len: usize, horizon: usize) -> usize {
        (self.n_hours() + 1).saturating_sub(input_len + horizon)
    }

    /// Stacks the windows starting at `starts` into contexts `[B, L, C]` and
    /// targets `[B, H, C]`.
    pub fn batch<T: Scalar>(&self, starts: &[usize], input_len: usize, horizon: usize) -> (Tensor<T>, Tensor<T>) {
        let c = self.n_channels;
        let mut ctx = Vec::with_capacity(starts.len() * input_len * c);
        let mut tgt = Vec::with_capacity(starts.len() * horizon * c);
        for &s in starts {
            ctx.extend(self.rows(s, input_len).iter().map(|&v| T::lit(v)));
            tgt.extend(self.rows(s + input_len, horizon).iter().map(|&v| T::lit(v)));
        }
        (
            Tensor::new(vec![starts.len(), input_len, c], ctx).expect("sized"),
            Tensor::new(vec![starts.len(), horizon, c], tgt).expect("sized"),
        )
    }
}

/// Reorders a `[B, L, C]` buffer to `[B, C, L]`.
pub(crate) fn channels_first<T: Copy>(x: &[T], b: usize, l: usize, c: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(x.len());
    for bi in 0..b {
        for ci in 0..c {
            for li in 0..l {
                out.push(x[(bi * l + li) * c + ci]);
            }
        }
    }
    out
}
