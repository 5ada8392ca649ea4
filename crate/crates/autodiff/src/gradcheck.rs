//! Finite-difference verification of tape gradients.

use crate::{Scalar, Tape, Tensor, TensorError, Var};

/// A scalar-valued function built on a tape, generic over precision so the
/// numeric oracle can always run in `f64`.
pub trait ScalarFunction {
    fn eval<T: Scalar>(&self, tape: &mut Tape<T>, inputs: &[Var]) -> Result<Var, TensorError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    /// Step is `relative_step * max(|x|, 1)` per coordinate.
    pub relative_step: f64,
    /// Denominator floor of the relative error.
    pub floor: f64,
    /// Further floor as a fraction of the largest numeric gradient, so that
    /// coordinates far below the gradient's scale are judged against that
    /// scale rather than their own rounding noise. Zero disables it.
    pub scale_floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { relative_step: 1e-3, floor: 1e-8, scale_floor: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub max_rel_error: f64,
    /// `(input, coordinate)` where the maximum occurred.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub coords_checked: usize,
}

fn eval_f64<F: ScalarFunction>(f: &F, point: &[Tensor<f64>]) -> Result<f64, TensorError> {
    let mut tape = Tape::<f64>::new();
    let vars: Vec<Var> = point.iter().map(|t| tape.constant(t.clone())).collect();
    let out = f.eval(&mut tape, &vars)?;
    let v = tape.value(out);
    if v.len() != 1 {
        return Err(TensorError::NonScalarLoss(v.shape().to_vec()));
    }
    let y = v.item();
    if !y.is_finite() {
        return Err(TensorError::NonFinite { op: "grad_check" });
    }
    Ok(y)
}

/// Compares the tape gradient (computed in `T`) of `f` at `point` against a
/// fourth-order central difference evaluated in `f64`. Every input is
/// treated as a parameter.
pub fn grad_check<T: Scalar, F: ScalarFunction>(
    f: &F,
    point: &[Tensor<f64>],
    config: &GradCheckConfig,
) -> Result<GradReport, TensorError> {
    // Both sides see the point as representable in `T`.
    let point: Vec<Tensor<f64>> = point.iter().map(|t| t.cast::<T>().cast::<f64>()).collect();
    let mut tape = Tape::<T>::new();
    let vars: Vec<Var> = point.iter().map(|t| tape.param(t.cast())).collect();
    let out = f.eval(&mut tape, &vars)?;
    let grads = tape.backward(out)?;

    let mut pairs = Vec::new();
    let mut probe = point.clone();
    for (i, v) in vars.iter().enumerate() {
        let g = grads.get(*v).expect("tracked leaf").to_f64();
        if g.iter().any(|x| !x.is_finite()) {
            return Err(TensorError::NonFinite { op: "grad_check" });
        }
        for (j, &analytic) in g.iter().enumerate() {
            let x0 = point[i].data()[j];
            let h = config.relative_step * x0.abs().max(1.0);
            let mut at = |dx: f64| -> Result<f64, TensorError> {
                probe[i].data_mut()[j] = x0 + dx;
                eval_f64(f, &probe)
            };
            let (p1, m1, p2, m2) = (at(h)?, at(-h)?, at(2.0 * h)?, at(-2.0 * h)?);
            probe[i].data_mut()[j] = x0;
            let numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
            pairs.push(((i, j), analytic, numeric));
        }
    }

    let scale = pairs.iter().fold(0.0f64, |m, p| m.max(p.2.abs()));
    let floor = config.floor.max(config.scale_floor * scale);
    let mut report = GradReport { max_rel_error: 0.0, worst: (0, 0), analytic: 0.0, numeric: 0.0, coords_checked: 0 };
    for (at, analytic, numeric) in pairs {
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor);
        report.coords_checked += 1;
        if err > report.max_rel_error || report.coords_checked == 1 {
            report.max_rel_error = err;
            report.worst = at;
            report.analytic = analytic;
            report.numeric = numeric;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct SumOf;
    impl ScalarFunction for SumOf {
        fn eval<T: Scalar>(&self, tape: &mut Tape<T>, x: &[Var]) -> Result<Var, TensorError> {
            tape.sum(x[0])
        }
    }

    struct SumRelu;
    impl ScalarFunction for SumRelu {
        fn eval<T: Scalar>(&self, tape: &mut Tape<T>, x: &[Var]) -> Result<Var, TensorError> {
            let r = tape.relu(x[0])?;
            tape.sum(r)
        }
    }

    #[test]
    fn linear_function_is_exact() {
        let x = Tensor::from_vec(vec![0.3, -1.2, 4.0, 7.5]);
        let r = grad_check::<f64, _>(&SumOf, &[x], &GradCheckConfig::default()).unwrap();
        assert!(r.max_rel_error < 1e-10, "{r:?}");
        assert_eq!(r.coords_checked, 4);
    }

    #[test]
    fn relu_away_from_kink() {
        let x = Tensor::from_vec(vec![0.5]);
        let r = grad_check::<f64, _>(&SumRelu, &[x], &GradCheckConfig::default()).unwrap();
        assert_eq!(r.analytic, 1.0);
        assert!(r.max_rel_error < 1e-8, "{r:?}");
    }
}
