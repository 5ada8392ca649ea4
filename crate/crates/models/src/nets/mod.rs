//! Network architectures. Each maps a context `[B, L, C]` to a forecast
//! `[B, H, C]`; inputs are data, so any per-window preprocessing happens on
//! plain tensors before they enter the tape.

mod dlinear;
mod nlinear;
mod patchtst;
mod tsmixer;

pub use dlinear::DLinearConfig;
pub use nlinear::NLinearConfig;
pub use patchtst::PatchTstConfig;
pub use tsmixer::TsMixerConfig;

use gridcast_autodiff::{ParamSet, Scalar, Tape, Tensor, Var};
use rand_chacha::ChaCha8Rng;

use crate::ModelError;

pub(crate) trait Net {
    fn input_len(&self) -> usize;
    fn horizon(&self) -> usize;
    fn validate(&self) -> Result<(), ModelError>;
    fn init<T: Scalar>(&self, n_channels: usize, rng: &mut ChaCha8Rng) -> ParamSet<T>;
    /// `p` holds the tape handles of the parameters in `init` order.
    fn forward<T: Scalar>(&self, tape: &mut Tape<T>, p: &[Var], context: &Tensor<T>) -> Result<Var, ModelError>;
}

/// Checks `[B, L, C]` and returns `(B, C)`.
pub(crate) fn context_dims<T: Scalar>(context: &Tensor<T>, input_len: usize) -> Result<(usize, usize), ModelError> {
    let s = context.shape();
    if s.len() != 3 {
        return Err(ModelError::Shape { what: "context rank", expected: 3, got: s.len() });
    }
    if s[1] != input_len {
        return Err(ModelError::Shape { what: "context length", expected: input_len, got: s[1] });
    }
    if s[2] == 0 || s[0] == 0 {
        return Err(ModelError::Shape { what: "non-empty batch and channels", expected: 1, got: 0 });
    }
    Ok((s[0], s[2]))
}

pub(crate) fn linear<T: Scalar>(tape: &mut Tape<T>, x: Var, w: Var, b: Var) -> Result<Var, ModelError> {
    let y = tape.matmul(x, w)?;
    Ok(tape.add(y, b)?)
}

/// `[B, C, H]` on the tape to `[B, H, C]`.
pub(crate) fn to_time_major<T: Scalar>(tape: &mut Tape<T>, y: Var) -> Result<Var, ModelError> {
    Ok(tape.transpose(y, 1, 2)?)
}
