//! Tape-recorded primitives and the reverse pass.

use crate::{Scalar, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul { a: Var, b: Var },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Scale { a: Var, c: T },
    Relu { a: Var },
    Gelu { a: Var },
    Softmax { a: Var },
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, rstd: Vec<f64> },
    Transpose { a: Var, axes: (usize, usize) },
    Reshape { a: Var },
    Slice { a: Var, axis: usize, start: usize },
    Concat { inputs: Vec<Var>, axis: usize },
    Sum { a: Var },
    Mean { a: Var },
    MseLoss { pred: Var, target: Var },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    tracked: bool,
}

/// Records primitive applications in topological order. One backward pass
/// per recording; call [`Tape::reset`] to reuse the allocation.
#[derive(Debug)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    consumed: bool,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

const GELU_C: f64 = 0.044715;
const LN_EPS: f64 = 1e-5;

fn mismatch(op: &'static str, a: &[usize], b: &[usize]) -> TensorError {
    TensorError::ShapeMismatch { op, lhs: a.to_vec(), rhs: b.to_vec() }
}

fn gelu_parts<T: Scalar>(x: T) -> (T, T) {
    let s = T::lit((2.0 / std::f64::consts::PI).sqrt());
    let c = T::lit(GELU_C);
    let half = T::lit(0.5);
    let u = s * (x + c * x * x * x);
    let th = u.tanh();
    let y = half * x * (T::one() + th);
    let dy = half * (T::one() + th) + half * x * (T::one() - th * th) * s * (T::one() + T::lit(3.0) * c * x * x);
    (y, dy)
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), consumed: false }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn reset(&mut self) {
        self.nodes.clear();
        self.consumed = false;
    }

    /// Leaf that receives a gradient.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, tracked: true });
        Var(self.nodes.len() - 1)
    }

    /// Leaf without a gradient (data, targets).
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, tracked: false });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn is_tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    /// Smallest `|x|` over every relu input recorded so far, i.e. how far the
    /// current point is from a kink. `None` when no relu was applied.
    pub fn relu_margin(&self) -> Option<f64> {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu { a } => self.nodes[a.0].value.data().iter().map(|v| v.as_f64().abs()).reduce(f64::min),
                _ => None,
            })
            .reduce(f64::min)
    }

    fn check(&self, vars: &[Var]) -> Result<(), TensorError> {
        if self.consumed {
            return Err(TensorError::TapeConsumed);
        }
        if vars.iter().any(|v| v.0 >= self.nodes.len()) {
            return Err(TensorError::ForeignVar);
        }
        Ok(())
    }

    fn push(&mut self, op_name: &'static str, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Result<Var, TensorError> {
        if cfg!(debug_assertions) && !value.all_finite() {
            return Err(TensorError::NonFinite { op: op_name });
        }
        let tracked = inputs.iter().any(|v| self.nodes[v.0].tracked);
        self.nodes.push(Node { value, op, tracked });
        Ok(Var(self.nodes.len() - 1))
    }

    /// `a [.., m, k] @ b`, where `b` is either a shared `[k, n]` matrix or has
    /// the same batch dimensions as `a`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.check(&[a, b])?;
        let (av, bv) = (self.value(a), self.value(b));
        let (sa, sb) = (av.shape(), bv.shape());
        if sa.len() < 2 || sb.len() < 2 {
            return Err(mismatch("matmul", sa, sb));
        }
        let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let (kb, n) = (sb[sb.len() - 2], sb[sb.len() - 1]);
        let batch_a = &sa[..sa.len() - 2];
        let shared = sb.len() == 2;
        if k != kb || (!shared && batch_a != &sb[..sb.len() - 2]) {
            return Err(mismatch("matmul", sa, sb));
        }
        let batch: usize = batch_a.iter().product();
        let mut out_shape = batch_a.to_vec();
        out_shape.extend([m, n]);
        let mut out = vec![T::zero(); batch * m * n];
        if shared {
            T::gemm(batch * m, k, n, T::one(), av.data(), (k, 1), bv.data(), (n, 1), T::zero(), &mut out, (n, 1));
        } else {
            for i in 0..batch {
                T::gemm(
                    m,
                    k,
                    n,
                    T::one(),
                    &av.data()[i * m * k..(i + 1) * m * k],
                    (k, 1),
                    &bv.data()[i * k * n..(i + 1) * k * n],
                    (n, 1),
                    T::zero(),
                    &mut out[i * m * n..(i + 1) * m * n],
                    (n, 1),
                );
            }
        }
        let value = Tensor::new(out_shape, out)?;
        self.push("matmul", value, Op::MatMul { a, b }, &[a, b])
    }

    fn broadcast_check(&self, op: &'static str, a: Var, b: Var) -> Result<(), TensorError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sb.len() > sa.len() || sa[sa.len() - sb.len()..] != *sb {
            return Err(mismatch(op, sa, sb));
        }
        Ok(())
    }

    fn zip_broadcast(&self, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Tensor<T> {
        let (av, bv) = (self.value(a), self.value(b));
        let bl = bv.len().max(1);
        let data = av.data().iter().enumerate().map(|(i, &x)| f(x, bv.data()[i % bl])).collect();
        Tensor::new(av.shape().to_vec(), data).expect("same shape as a")
    }

    /// Elementwise sum; `b` may have the shape of a suffix of `a` (bias).
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.check(&[a, b])?;
        self.broadcast_check("add", a, b)?;
        let v = self.zip_broadcast(a, b, |x, y| x + y);
        self.push("add", v, Op::Add { a, b }, &[a, b])
    }

    /// Elementwise difference; same broadcasting rule as [`Tape::add`].
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.check(&[a, b])?;
        self.broadcast_check("sub", a, b)?;
        let v = self.zip_broadcast(a, b, |x, y| x - y);
        self.push("sub", v, Op::Sub { a, b }, &[a, b])
    }

    /// Elementwise product of equally shaped tensors.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.check(&[a, b])?;
        if self.shape(a) != self.shape(b) {
            return Err(mismatch("mul", self.shape(a), self.shape(b)));
        }
        let v = self.zip_broadcast(a, b, |x, y| x * y);
        self.push("mul", v, Op::Mul { a, b }, &[a, b])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, TensorError> {
        self.check(&[a])?;
        let c = T::lit(c);
        let v = self.value(a).map(|x| x * c);
        self.push("scale", v, Op::Scale { a, c }, &[a])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, TensorError> {
        self.check(&[a])?;
        let v = self.value(a).map(|x| x.max(T::zero()));
        self.push("relu", v, Op::Relu { a }, &[a])
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Result<Var, TensorError> {
        self.check(&[a])?;
        let v = self.value(a).map(|x| gelu_parts(x).0);
        self.push("gelu", v, Op::Gelu { a }, &[a])
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var, TensorError> {
        self.check(&[a])?;
        let av = self.value(a);
        let d = *av.shape().last().ok_or_else(|| mismatch("softmax", av.shape(), &[]))?;
        let mut out = av.data().to_vec();
        if d > 0 {
            for row in out.chunks_exact_mut(d) {
                let max = row.iter().copied().fold(T::neg_infinity(), T::max);
                let mut sum = T::zero();
                for x in row.iter_mut() {
                    *x = (*x - max).exp();
                    sum = sum + *x;
                }
                for x in row.iter_mut() {
                    *x = *x / sum;
                }
            }
        }
        let v = Tensor::new(av.shape().to_vec(), out)?;
        self.push("softmax", v, Op::Softmax { a }, &[a])
    }

    /// Normalizes the last axis to zero mean and unit variance, then applies
    /// `gamma * xhat + beta` with `gamma`, `beta` of that axis' length.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var, TensorError> {
        self.check(&[x, gamma, beta])?;
        let xv = self.value(x);
        let d = *xv.shape().last().ok_or_else(|| mismatch("layer_norm", xv.shape(), &[]))?;
        if self.shape(gamma) != [d] || self.shape(beta) != [d] {
            return Err(mismatch("layer_norm", xv.shape(), self.shape(gamma)));
        }
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let rows = xv.len() / d.max(1);
        let mut xhat = Vec::with_capacity(xv.len());
        let mut rstd = Vec::with_capacity(rows);
        let mut out = Vec::with_capacity(xv.len());
        // Row statistics are kept in f64 so 32-bit rows lose no precision.
        for row in xv.data().chunks_exact(d) {
            let mean = row.iter().map(|v| v.as_f64()).sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v.as_f64() - mean).powi(2)).sum::<f64>() / d as f64;
            let r = 1.0 / (var + LN_EPS).sqrt();
            rstd.push(r);
            for (j, &v) in row.iter().enumerate() {
                let h = (v.as_f64() - mean) * r;
                xhat.push(h);
                out.push(T::lit(h) * g[j] + b[j]);
            }
        }
        let v = Tensor::new(xv.shape().to_vec(), out)?;
        self.push("layer_norm", v, Op::LayerNorm { x, gamma, beta, xhat, rstd }, &[x, gamma, beta])
    }

    pub fn transpose(&mut self, a: Var, ax1: usize, ax2: usize) -> Result<Var, TensorError> {
        self.check(&[a])?;
        let v = self.value(a).transpose(ax1, ax2)?;
        self.push("transpose", v, Op::Transpose { a, axes: (ax1, ax2) }, &[a])
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, TensorError> {
        self.check(&[a])?;
        let v = self.value(a).clone().reshaped(shape)?;
        self.push("reshape", v, Op::Reshape { a }, &[a])
    }

    pub fn slice(&mut self, a: Var, axis: usize, start: usize, end: usize) -> Result<Var, TensorError> {
        self.check(&[a])?;
        let v = self.value(a).slice_axis(axis, start, end)?;
        self.push("slice", v, Op::Slice { a, axis, start }, &[a])
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var, TensorError> {
        self.check(inputs)?;
        let first = inputs.first().ok_or_else(|| TensorError::Invalid { op: "concat", msg: "no inputs".into() })?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(TensorError::Invalid { op: "concat", msg: format!("axis {axis} for rank {}", base.len()) });
        }
        let mut total = 0;
        for v in inputs {
            let s = self.shape(*v);
            if s.len() != base.len() || s.iter().enumerate().any(|(i, &e)| i != axis && e != base[i]) {
                return Err(mismatch("concat", &base, s));
            }
            total += s[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for v in inputs {
                let t = self.value(*v);
                let chunk = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let v = Tensor::new(shape, data)?;
        self.push("concat", v, Op::Concat { inputs: inputs.to_vec(), axis }, inputs)
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, a: Var) -> Result<Var, TensorError> {
        self.check(&[a])?;
        let s = self.value(a).data().iter().copied().sum::<T>();
        self.push("sum", Tensor::scalar(s), Op::Sum { a }, &[a])
    }

    /// Mean of all elements, as a scalar.
    pub fn mean(&mut self, a: Var) -> Result<Var, TensorError> {
        self.check(&[a])?;
        let av = self.value(a);
        if av.is_empty() {
            return Err(TensorError::Invalid { op: "mean", msg: "empty tensor".into() });
        }
        let s = av.data().iter().copied().sum::<T>() / T::lit(av.len() as f64);
        self.push("mean", Tensor::scalar(s), Op::Mean { a }, &[a])
    }

    /// Mean squared error between equally shaped tensors.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var, TensorError> {
        self.check(&[pred, target])?;
        let (p, t) = (self.value(pred), self.value(target));
        if p.shape() != t.shape() || p.is_empty() {
            return Err(mismatch("mse_loss", p.shape(), t.shape()));
        }
        let s = p.data().iter().zip(t.data()).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>() / T::lit(p.len() as f64);
        self.push("mse_loss", Tensor::scalar(s), Op::MseLoss { pred, target }, &[pred, target])
    }

    /// Reverse pass from a one-element `loss`. Gradients are returned for
    /// every tracked leaf (zero when the loss does not depend on it).
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>, TensorError> {
        self.check(&[loss])?;
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(TensorError::NonScalarLoss(lv.shape().to_vec()));
        }
        let seed = Tensor::full(lv.shape(), T::one());
        self.consumed = true;
        let n = self.nodes.len();
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; n];
        grads[loss.0] = Some(seed);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.tracked {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.pull_back(i, g, &mut grads)?;
        }
        let leaf_grads = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, node)| match node.op {
                Op::Leaf if node.tracked => Some(grads[i].take().unwrap_or_else(|| Tensor::zeros(node.value.shape()))),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads: leaf_grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
        if !self.nodes[v.0].tracked {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => {
                for (e, x) in existing.data_mut().iter_mut().zip(g.data()) {
                    *e = *e + *x;
                }
            }
            slot @ None => *slot = Some(g),
        }
    }

    /// Sums `g` (shape of the broadcast output) down to `shape`, a suffix of it.
    fn reduce_to(g: &Tensor<T>, shape: &[usize]) -> Tensor<T> {
        let n: usize = shape.iter().product();
        if n == g.len() {
            return Tensor::new(shape.to_vec(), g.data().to_vec()).expect("same size");
        }
        let mut out = vec![T::zero(); n];
        for chunk in g.data().chunks_exact(n.max(1)) {
            for (o, x) in out.iter_mut().zip(chunk) {
                *o = *o + *x;
            }
        }
        Tensor::new(shape.to_vec(), out).expect("suffix size")
    }

    fn pull_back(&self, i: usize, g: Tensor<T>, grads: &mut [Option<Tensor<T>>]) -> Result<(), TensorError> {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (sa, sb) = (av.shape(), bv.shape());
                let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
                let n = sb[sb.len() - 1];
                let batch: usize = sa[..sa.len() - 2].iter().product();
                let gd = g.data();
                if self.nodes[a.0].tracked {
                    let mut da = vec![T::zero(); av.len()];
                    if sb.len() == 2 {
                        // dA = dC @ B^T
                        T::gemm(batch * m, n, k, T::one(), gd, (n, 1), bv.data(), (1, n), T::zero(), &mut da, (k, 1));
                    } else {
                        for bi in 0..batch {
                            T::gemm(
                                m,
                                n,
                                k,
                                T::one(),
                                &gd[bi * m * n..(bi + 1) * m * n],
                                (n, 1),
                                &bv.data()[bi * k * n..(bi + 1) * k * n],
                                (1, n),
                                T::zero(),
                                &mut da[bi * m * k..(bi + 1) * m * k],
                                (k, 1),
                            );
                        }
                    }
                    self.accumulate(grads, *a, Tensor::new(sa.to_vec(), da)?);
                }
                if self.nodes[b.0].tracked {
                    let mut db = vec![T::zero(); bv.len()];
                    if sb.len() == 2 {
                        // dB = A^T @ dC over the flattened batch
                        T::gemm(k, batch * m, n, T::one(), av.data(), (1, k), gd, (n, 1), T::zero(), &mut db, (n, 1));
                    } else {
                        for bi in 0..batch {
                            T::gemm(
                                k,
                                m,
                                n,
                                T::one(),
                                &av.data()[bi * m * k..(bi + 1) * m * k],
                                (1, k),
                                &gd[bi * m * n..(bi + 1) * m * n],
                                (n, 1),
                                T::zero(),
                                &mut db[bi * k * n..(bi + 1) * k * n],
                                (n, 1),
                            );
                        }
                    }
                    self.accumulate(grads, *b, Tensor::new(sb.to_vec(), db)?);
                }
            }
            Op::Add { a, b } => {
                let sb = self.shape(*b).to_vec();
                self.accumulate(grads, *b, Self::reduce_to(&g, &sb));
                self.accumulate(grads, *a, g);
            }
            Op::Sub { a, b } => {
                let sb = self.shape(*b).to_vec();
                let neg = Self::reduce_to(&g, &sb).map(|x| -x);
                self.accumulate(grads, *b, neg);
                self.accumulate(grads, *a, g);
            }
            Op::Mul { a, b } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let da = zip(&g, bv, |x, y| x * y);
                let db = zip(&g, av, |x, y| x * y);
                self.accumulate(grads, *a, da);
                self.accumulate(grads, *b, db);
            }
            Op::Scale { a, c } => {
                let c = *c;
                self.accumulate(grads, *a, g.map(|x| x * c));
            }
            Op::Relu { a } => {
                let da = zip(&g, self.value(*a), |x, y| if y > T::zero() { x } else { T::zero() });
                self.accumulate(grads, *a, da);
            }
            Op::Gelu { a } => {
                let da = zip(&g, self.value(*a), |x, y| x * gelu_parts(y).1);
                self.accumulate(grads, *a, da);
            }
            Op::Softmax { a } => {
                let y = &node.value;
                let d = *y.shape().last().expect("rank >= 1");
                let mut da = Vec::with_capacity(y.len());
                for (yr, gr) in y.data().chunks_exact(d).zip(g.data().chunks_exact(d)) {
                    let dot = yr.iter().zip(gr).map(|(&p, &q)| p * q).sum::<T>();
                    da.extend(yr.iter().zip(gr).map(|(&p, &q)| p * (q - dot)));
                }
                self.accumulate(grads, *a, Tensor::new(y.shape().to_vec(), da)?);
            }
            Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
                let d = self.shape(*gamma)[0];
                let gam = self.value(*gamma).data();
                let mut dgamma = vec![0.0f64; d];
                let mut dbeta = vec![0.0f64; d];
                let mut dx = Vec::with_capacity(g.len());
                let df = d as f64;
                for ((gr, hr), &r) in g.data().chunks_exact(d).zip(xhat.chunks_exact(d)).zip(rstd) {
                    let mut sum_dh = 0.0;
                    let mut sum_dh_h = 0.0;
                    for j in 0..d {
                        let gj = gr[j].as_f64();
                        dgamma[j] += gj * hr[j];
                        dbeta[j] += gj;
                        let dh = gj * gam[j].as_f64();
                        sum_dh += dh;
                        sum_dh_h += dh * hr[j];
                    }
                    for j in 0..d {
                        let dh = gr[j].as_f64() * gam[j].as_f64();
                        dx.push(T::lit(r / df * (df * dh - sum_dh - hr[j] * sum_dh_h)));
                    }
                }
                self.accumulate(grads, *gamma, Tensor::new(vec![d], dgamma.into_iter().map(T::lit).collect())?);
                self.accumulate(grads, *beta, Tensor::new(vec![d], dbeta.into_iter().map(T::lit).collect())?);
                self.accumulate(grads, *x, Tensor::new(g.shape().to_vec(), dx)?);
            }
            Op::Transpose { a, axes } => {
                self.accumulate(grads, *a, g.transpose(axes.0, axes.1)?);
            }
            Op::Reshape { a } => {
                let s = self.shape(*a).to_vec();
                self.accumulate(grads, *a, g.reshaped(&s)?);
            }
            Op::Slice { a, axis, start } => {
                let sa = self.shape(*a).to_vec();
                let outer: usize = sa[..*axis].iter().product();
                let inner: usize = sa[axis + 1..].iter().product();
                let (dim, len) = (sa[*axis], g.shape()[*axis]);
                let mut da = vec![T::zero(); sa.iter().product()];
                for o in 0..outer {
                    let src = &g.data()[o * len * inner..(o + 1) * len * inner];
                    let dst = o * dim * inner + start * inner;
                    da[dst..dst + len * inner].copy_from_slice(src);
                }
                self.accumulate(grads, *a, Tensor::new(sa, da)?);
            }
            Op::Concat { inputs, axis } => {
                let shape = g.shape();
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[axis + 1..].iter().product();
                let total = shape[*axis];
                let mut offset = 0;
                for v in inputs {
                    let sv = self.shape(*v).to_vec();
                    let len = sv[*axis];
                    let mut dv = Vec::with_capacity(sv.iter().product());
                    for o in 0..outer {
                        let base = o * total * inner + offset * inner;
                        dv.extend_from_slice(&g.data()[base..base + len * inner]);
                    }
                    offset += len;
                    self.accumulate(grads, *v, Tensor::new(sv, dv)?);
                }
            }
            Op::Sum { a } => {
                let s = self.shape(*a).to_vec();
                self.accumulate(grads, *a, Tensor::full(&s, g.item()));
            }
            Op::Mean { a } => {
                let s = self.shape(*a).to_vec();
                let n = T::lit(s.iter().product::<usize>() as f64);
                self.accumulate(grads, *a, Tensor::full(&s, g.item() / n));
            }
            Op::MseLoss { pred, target } => {
                let (p, t) = (self.value(*pred), self.value(*target));
                let k = T::lit(2.0) * g.item() / T::lit(p.len() as f64);
                let dp = zip(p, t, |x, y| k * (x - y));
                if self.nodes[target.0].tracked {
                    self.accumulate(grads, *target, dp.map(|x| -x));
                }
                self.accumulate(grads, *pred, dp);
            }
        }
        Ok(())
    }
}

fn zip<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

/// Gradients of tracked leaves from one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}
