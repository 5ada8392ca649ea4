use gridcast_autodiff::Scalar;

use crate::{ArimaModel, ModelError, NeuralModel};

/// Repeats the last context row `horizon` times. `context` is row-major
/// `[L x C]`; the result is `[H x C]`.
pub fn naive_forecast(context: &[f64], n_channels: usize, horizon: usize) -> Result<Vec<f64>, ModelError> {
    if n_channels == 0 || context.len() < n_channels || context.len() % n_channels != 0 {
        return Err(ModelError::Shape { what: "context values", expected: n_channels, got: context.len() });
    }
    let last = &context[context.len() - n_channels..];
    Ok(last.iter().copied().cycle().take(horizon * n_channels).collect())
}

/// Any model of the zoo behind one interface.
#[derive(Debug, Clone)]
pub enum Forecaster<T> {
    Naive { n_channels: usize, horizon: usize },
    /// Univariate; one fitted model per channel.
    Arima(Vec<ArimaModel>),
    Neural(NeuralModel<T>),
}

impl<T: Scalar> Forecaster<T> {
    /// Forecast `[H x C]` for a row-major `[L x C]` context.
    pub fn predict(&self, context: &[f64], horizon: usize) -> Result<Vec<f64>, ModelError> {
        match self {
            Forecaster::Naive { n_channels, .. } => naive_forecast(context, *n_channels, horizon),
            Forecaster::Arima(models) => {
                let c = models.len();
                if c == 0 || context.len() % c != 0 {
                    return Err(ModelError::Shape { what: "context values", expected: c, got: context.len() });
                }
                let mut out = vec![0.0; horizon * c];
                for (ci, m) in models.iter().enumerate() {
                    let series: Vec<f64> = context.iter().skip(ci).step_by(c).copied().collect();
                    for (h, v) in m.forecast(&series, horizon)?.into_iter().enumerate() {
                        out[h * c + ci] = v;
                    }
                }
                Ok(out)
            }
            Forecaster::Neural(m) => {
                if m.config().horizon() != horizon {
                    return Err(ModelError::Shape { what: "horizon", expected: m.config().horizon(), got: horizon });
                }
                m.predict_window(context)
            }
        }
    }

    /// Carries trained parameters over from the previous fold. Only neural
    /// models take part; ARIMA is refit per fold and the naive model has no
    /// parameters, so asking them is a contract error.
    pub fn warm_start(&mut self, previous: &Forecaster<T>) -> Result<(), ModelError> {
        match (self, previous) {
            (Forecaster::Neural(m), Forecaster::Neural(prev)) => m.warm_start(prev),
            (Forecaster::Neural(_), _) => Err(ModelError::Architecture("previous model is not a neural network".into())),
            (Forecaster::Arima(_), _) => Err(ModelError::Contract("ARIMA is refit per fold and cannot be warm-started".into())),
            (Forecaster::Naive { .. }, _) => Err(ModelError::Contract("the naive model has no parameters to carry over".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ArimaOrder;

    #[test]
    fn naive_repeats_last_row() {
        let f = naive_forecast(&[1.0, 2.0, 3.0, 42.0, 5.0, 6.0], 3, 2).unwrap();
        assert_eq!(f, vec![42.0, 5.0, 6.0, 42.0, 5.0, 6.0]);
    }

    #[test]
    fn arima_cannot_warm_start() {
        let m = ArimaModel::from_parameters(ArimaOrder { p: 0, d: 1, q: 0 }, vec![], vec![], 0.0).unwrap();
        let mut a = Forecaster::<f32>::Arima(vec![m.clone()]);
        let b = Forecaster::<f32>::Arima(vec![m]);
        assert!(matches!(a.warm_start(&b), Err(ModelError::Contract(_))));
        assert_eq!(a.predict(&[1.0, 2.0, 42.0], 3).unwrap(), vec![42.0; 3]);
    }
}
