//! Randomized gradient checks for every primitive, usable from tests and
//! diagnostics.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{grad_check, GradCheckConfig, GradReport, Scalar, ScalarFunction, Tape, Tensor, TensorError, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Primitive {
    MatMul,
    BatchedMatMul,
    SharedMatMul,
    Add,
    Sub,
    Mul,
    Scale,
    Relu,
    Gelu,
    Softmax,
    LayerNorm,
    Transpose,
    Reshape,
    Slice,
    Concat,
    Sum,
    Mean,
    MseLoss,
}

impl Primitive {
    pub const ALL: [Primitive; 18] = [
        Primitive::MatMul,
        Primitive::BatchedMatMul,
        Primitive::SharedMatMul,
        Primitive::Add,
        Primitive::Sub,
        Primitive::Mul,
        Primitive::Scale,
        Primitive::Relu,
        Primitive::Gelu,
        Primitive::Softmax,
        Primitive::LayerNorm,
        Primitive::Transpose,
        Primitive::Reshape,
        Primitive::Slice,
        Primitive::Concat,
        Primitive::Sum,
        Primitive::Mean,
        Primitive::MseLoss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Primitive::MatMul => "matmul",
            Primitive::BatchedMatMul => "matmul_batched",
            Primitive::SharedMatMul => "matmul_shared",
            Primitive::Add => "add",
            Primitive::Sub => "sub",
            Primitive::Mul => "mul",
            Primitive::Scale => "scale",
            Primitive::Relu => "relu",
            Primitive::Gelu => "gelu",
            Primitive::Softmax => "softmax",
            Primitive::LayerNorm => "layer_norm",
            Primitive::Transpose => "transpose",
            Primitive::Reshape => "reshape",
            Primitive::Slice => "slice",
            Primitive::Concat => "concat",
            Primitive::Sum => "sum",
            Primitive::Mean => "mean",
            Primitive::MseLoss => "mse_loss",
        }
    }
}

/// One randomized instance: input tensors plus a fixed random readout that
/// turns tensor outputs into a scalar.
#[derive(Debug, Clone)]
pub struct PrimitiveCase {
    pub primitive: Primitive,
    pub inputs: Vec<Tensor<f64>>,
    readout: Tensor<f64>,
    extra: Vec<usize>,
    coef: f64,
}

fn dim(rng: &mut ChaCha8Rng, max: usize) -> usize {
    rng.gen_range(1..=max)
}

fn values(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect()).expect("sized")
}

/// Values bounded away from zero, for the relu kink.
fn off_kink(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.gen_range(0.1..1.5);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("sized")
}

/// Positive values: matmul sums then carry no cancellation, so 32-bit
/// rounding stays small relative to every gradient coordinate.
fn positive(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(0.1..1.5)).collect()).expect("sized")
}

/// Values at least 0.05 away from the root of the gelu derivative near -0.7518.
fn off_gelu_root(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| loop {
            let v = rng.gen_range(-1.5..1.5);
            if (v + 0.7518f64).abs() > 0.05 {
                break v;
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("sized")
}

/// Rows whose population std is at least 0.25, so the normalization is well
/// conditioned at the finite-difference step.
fn spread_rows(rng: &mut ChaCha8Rng, rows: usize, d: usize) -> Tensor<f64> {
    let mut data = Vec::with_capacity(rows * d);
    for _ in 0..rows {
        loop {
            let row: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let m = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - m).powi(2)).sum::<f64>() / d as f64;
            if var >= 0.0625 {
                data.extend(row);
                break;
            }
        }
    }
    Tensor::new(vec![rows, d], data).expect("sized")
}

fn readout(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.gen_range(0.5..1.5);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("sized")
}

impl PrimitiveCase {
    /// Draws shapes (at most 16 per dimension) and values from `seed`.
    pub fn random(primitive: Primitive, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (primitive as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let r = &mut rng;
        let mut extra = Vec::new();
        let mut coef = 1.0;
        let (inputs, out_shape): (Vec<Tensor<f64>>, Vec<usize>) = match primitive {
            Primitive::MatMul => {
                let (m, k, n) = (dim(r, 16), dim(r, 16), dim(r, 16));
                (vec![positive(r, &[m, k]), positive(r, &[k, n])], vec![m, n])
            }
            Primitive::BatchedMatMul => {
                let (b, m, k, n) = (dim(r, 4), dim(r, 8), dim(r, 8), dim(r, 8));
                (vec![positive(r, &[b, m, k]), positive(r, &[b, k, n])], vec![b, m, n])
            }
            Primitive::SharedMatMul => {
                let (b, m, k, n) = (dim(r, 4), dim(r, 8), dim(r, 8), dim(r, 8));
                (vec![positive(r, &[b, m, k]), positive(r, &[k, n])], vec![b, m, n])
            }
            Primitive::Add | Primitive::Sub => {
                let (a, c) = (dim(r, 16), dim(r, 16));
                (vec![values(r, &[a, c]), values(r, &[c])], vec![a, c])
            }
            Primitive::Mul => {
                let s = [dim(r, 16), dim(r, 16)];
                (vec![values(r, &s), values(r, &s)], s.to_vec())
            }
            Primitive::Scale => {
                let s = [dim(r, 16), dim(r, 16)];
                coef = r.gen_range(-3.0..3.0);
                (vec![values(r, &s)], s.to_vec())
            }
            Primitive::Relu => {
                let s = [dim(r, 16), dim(r, 16)];
                (vec![off_kink(r, &s)], s.to_vec())
            }
            Primitive::Gelu => {
                let s = [dim(r, 16), dim(r, 16)];
                (vec![off_gelu_root(r, &s)], s.to_vec())
            }
            Primitive::Softmax => {
                let s = [dim(r, 16), dim(r, 16)];
                (vec![values(r, &s)], s.to_vec())
            }
            Primitive::LayerNorm => {
                let (a, d) = (dim(r, 16), r.gen_range(3..=16));
                (vec![spread_rows(r, a, d), values(r, &[d]), values(r, &[d])], vec![a, d])
            }
            Primitive::Transpose => {
                let s = [dim(r, 8), dim(r, 8), dim(r, 8)];
                let mut axes = [0usize, 1, 2];
                axes.shuffle(r);
                extra = vec![axes[0], axes[1]];
                let mut out = s.to_vec();
                out.swap(axes[0], axes[1]);
                (vec![values(r, &s)], out)
            }
            Primitive::Reshape => {
                let (a, b, c) = (dim(r, 8), dim(r, 8), dim(r, 8));
                extra = vec![a * b, c];
                (vec![values(r, &[a, b, c])], vec![a * b, c])
            }
            Primitive::Slice => {
                let s = [dim(r, 16), dim(r, 16)];
                let axis = r.gen_range(0..2);
                let start = r.gen_range(0..s[axis]);
                let end = r.gen_range(start + 1..=s[axis]);
                extra = vec![axis, start, end];
                let mut out = s.to_vec();
                out[axis] = end - start;
                (vec![values(r, &s)], out)
            }
            Primitive::Concat => {
                let (a, c) = (dim(r, 16), dim(r, 16));
                let axis = r.gen_range(0..2);
                let parts = r.gen_range(2..=3);
                let mut ins = Vec::new();
                let mut total = 0;
                for _ in 0..parts {
                    let len = dim(r, 8);
                    total += len;
                    ins.push(values(r, &if axis == 0 { [len, c] } else { [a, len] }));
                }
                extra = vec![axis];
                (ins, if axis == 0 { vec![total, c] } else { vec![a, total] })
            }
            Primitive::Sum | Primitive::Mean => {
                let s = [dim(r, 16), dim(r, 16)];
                (vec![values(r, &s)], vec![])
            }
            Primitive::MseLoss => {
                let s = [dim(r, 16), dim(r, 16)];
                (vec![values(r, &s), values(r, &s)], vec![])
            }
        };
        let readout = match primitive {
            Primitive::MatMul | Primitive::BatchedMatMul | Primitive::SharedMatMul => positive(r, &out_shape),
            _ => readout(r, &out_shape),
        };
        Self { primitive, inputs, readout, extra, coef }
    }

    pub fn check<T: Scalar>(&self) -> Result<GradReport, TensorError> {
        grad_check::<T, _>(self, &self.inputs, &GradCheckConfig::default())
    }
}

impl ScalarFunction for PrimitiveCase {
    fn eval<T: Scalar>(&self, tape: &mut Tape<T>, x: &[Var]) -> Result<Var, TensorError> {
        let e = &self.extra;
        let out = match self.primitive {
            Primitive::MatMul | Primitive::BatchedMatMul | Primitive::SharedMatMul => tape.matmul(x[0], x[1])?,
            Primitive::Add => tape.add(x[0], x[1])?,
            Primitive::Sub => tape.sub(x[0], x[1])?,
            Primitive::Mul => tape.mul(x[0], x[1])?,
            Primitive::Scale => tape.scale(x[0], self.coef)?,
            Primitive::Relu => tape.relu(x[0])?,
            Primitive::Gelu => tape.gelu(x[0])?,
            Primitive::Softmax => tape.softmax(x[0])?,
            Primitive::LayerNorm => tape.layer_norm(x[0], x[1], x[2])?,
            Primitive::Transpose => tape.transpose(x[0], e[0], e[1])?,
            Primitive::Reshape => tape.reshape(x[0], e)?,
            Primitive::Slice => tape.slice(x[0], e[0], e[1], e[2])?,
            Primitive::Concat => tape.concat(x, e[0])?,
            Primitive::Sum => return tape.sum(x[0]),
            Primitive::Mean => return tape.mean(x[0]),
            Primitive::MseLoss => return tape.mse_loss(x[0], x[1]),
        };
        let w = tape.constant(self.readout.cast());
        let weighted = tape.mul(out, w)?;
        tape.sum(weighted)
    }
}

/// Worst relative error of each primitive over `seeds`, at precision `T`.
pub fn primitive_sweep<T: Scalar>(seeds: std::ops::Range<u64>) -> Result<Vec<(Primitive, f64)>, TensorError> {
    Primitive::ALL
        .iter()
        .map(|&p| {
            let mut worst = 0.0f64;
            for seed in seeds.clone() {
                worst = worst.max(PrimitiveCase::random(p, seed).check::<T>()?.max_rel_error);
            }
            Ok((p, worst))
        })
        .collect()
}
