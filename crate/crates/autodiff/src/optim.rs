use crate::{ParamSet, Scalar, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Per-parameter first and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParamSet<T>, config: AdamConfig) -> Self {
        let zeros = || params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
        Self { config, step: 0, m: zeros(), v: zeros() }
    }
}

fn check_grads<T: Scalar>(params: &ParamSet<T>, grads: &[Tensor<T>]) -> Result<(), TensorError> {
    if grads.len() != params.len() {
        return Err(TensorError::Invalid {
            op: "optimizer",
            msg: format!("{} gradients for {} parameters", grads.len(), params.len()),
        });
    }
    for (p, g) in params.tensors().iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(TensorError::ShapeMismatch { op: "optimizer", lhs: p.shape().to_vec(), rhs: g.shape().to_vec() });
        }
    }
    Ok(())
}

/// One bias-corrected Adam update, in place.
pub fn adam_step<T: Scalar>(params: &mut ParamSet<T>, grads: &[Tensor<T>], state: &mut AdamState<T>) -> Result<(), TensorError> {
    check_grads(params, grads)?;
    state.step += 1;
    let c = state.config;
    let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
    let bc1 = T::lit(1.0 - c.beta1.powi(state.step as i32));
    let bc2 = T::lit(1.0 - c.beta2.powi(state.step as i32));
    let (lr, eps) = (T::lit(c.lr), T::lit(c.eps));
    for (((p, g), m), v) in params.tensors_mut().iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        for (((w, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
            *mi = b1 * *mi + (T::one() - b1) * gi;
            *vi = b2 * *vi + (T::one() - b2) * gi * gi;
            let mhat = *mi / bc1;
            let vhat = *vi / bc2;
            *w = *w - lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Plain gradient descent, in place.
pub fn sgd_step<T: Scalar>(params: &mut ParamSet<T>, grads: &[Tensor<T>], lr: f64) -> Result<(), TensorError> {
    check_grads(params, grads)?;
    let lr = T::lit(lr);
    for (p, g) in params.tensors_mut().iter_mut().zip(grads) {
        for (w, &gi) in p.data_mut().iter_mut().zip(g.data()) {
            *w = *w - lr * gi;
        }
    }
    Ok(())
}
