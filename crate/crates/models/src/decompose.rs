use gridcast_autodiff::Scalar;

use crate::ModelError;

/// Splits a row-major `[len x n_channels]` block into a moving-average trend
/// and the seasonal remainder `x - trend`, per channel.
///
/// The window is centered and the series is padded by repeating its first and
/// last values, so the trend has the input's length.
pub fn series_decompose<T: Scalar>(x: &[T], n_channels: usize, kernel_size: usize) -> Result<(Vec<T>, Vec<T>), ModelError> {
    if kernel_size == 0 || kernel_size % 2 == 0 {
        return Err(ModelError::Config(format!("moving-average kernel must be odd, got {kernel_size}")));
    }
    if n_channels == 0 || x.is_empty() || x.len() % n_channels != 0 {
        return Err(ModelError::Shape { what: "multiple of channel count", expected: n_channels, got: x.len() });
    }
    let len = x.len() / n_channels;
    let half = (kernel_size / 2) as isize;
    let k = T::lit(kernel_size as f64);
    let mut trend = vec![T::zero(); x.len()];
    for c in 0..n_channels {
        let at = |t: isize| x[t.clamp(0, len as isize - 1) as usize * n_channels + c];
        for t in 0..len as isize {
            let s = (-half..=half).map(|j| at(t + j)).sum::<T>();
            trend[t as usize * n_channels + c] = s / k;
        }
    }
    let seasonal = x.iter().zip(&trend).map(|(&v, &tr)| v - tr).collect();
    Ok((trend, seasonal))
}
