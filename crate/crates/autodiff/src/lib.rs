//! Dense row-major tensors with a tape-based reverse-mode autodiff engine,
//! Adam/SGD optimizers, finite-difference gradient checking and a flat
//! binary checkpoint format.
//!
//! ```
//! use gridcast_autodiff::{Tape, Tensor};
//!
//! let mut tape = Tape::<f64>::new();
//! let x = tape.param(Tensor::from_vec(vec![1.0, 2.0]));
//! let sq = tape.mul(x, x).unwrap();
//! let loss = tape.sum(sq).unwrap();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(x).unwrap().data(), &[2.0, 4.0]);
//! ```

mod checkpoint;
mod gradcheck;
mod optim;
mod params;
mod scalar;
pub mod selfcheck;
mod tape;
mod tensor;

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, GradCheckConfig, GradReport, ScalarFunction};
pub use optim::{adam_step, sgd_step, AdamConfig, AdamState};
pub use params::ParamSet;
pub use scalar::Scalar;
pub use tape::{Gradients, Tape, Var};
pub use tensor::{Tensor, TensorError};
