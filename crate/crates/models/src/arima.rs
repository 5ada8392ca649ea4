//! ARIMA(p, d, q) by conditional sum of squares.
//!
//! On the `d`-times differenced series `w` the model is
//! `w_t = c + sum_i ar_i w_{t-i} + e_t + sum_j ma_j e_{t-j}`.
//! Residuals are generated by that recursion with `e_t = 0` before the first
//! `p` observations; the CSS objective sums `e_t^2` from `t = p` on. It is
//! minimized by Levenberg-Marquardt, using the derivative recursions of the
//! residuals, from Hannan-Rissanen starting values. Steps that would make the
//! MA polynomial non-invertible are rejected.

use gridcast_core::yule_walker;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Result<Self, ModelError> {
        let o = Self { p, d, q };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.p + self.q == 0 && self.d == 0 {
            return Err(ModelError::Config("ARIMA(0,0,0) has nothing to estimate".into()));
        }
        Ok(())
    }
}

impl Default for ArimaOrder {
    fn default() -> Self {
        Self { p: 2, d: 1, q: 2 }
    }
}

impl std::fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ARIMA({},{},{})", self.p, self.d, self.q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArimaConfig {
    pub order: ArimaOrder,
    /// Estimate an intercept on the differenced scale. Defaults to `d == 0`.
    pub intercept: Option<bool>,
    /// Pick the order by AIC over p, q in 0..=3 and d in {0, 1} instead.
    pub select_by_aic: bool,
    pub max_iter: usize,
    /// Relative CSS improvement below which the optimizer stops.
    pub tol: f64,
}

impl Default for ArimaConfig {
    fn default() -> Self {
        Self { order: ArimaOrder::default(), intercept: None, select_by_aic: false, max_iter: 200, tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitStatus {
    Converged,
    /// The iteration cap was hit; parameters are the best found so far.
    IterationCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub order: ArimaOrder,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub intercept: f64,
    pub sigma2: f64,
    pub css: f64,
    pub n_used: usize,
    pub iterations: usize,
    pub status: FitStatus,
}

pub fn difference(x: &[f64], d: usize) -> Vec<f64> {
    let mut w = x.to_vec();
    for _ in 0..d {
        w = w.windows(2).map(|p| p[1] - p[0]).collect();
    }
    w
}

/// Residuals of the recursion for every `t`, zero before `p`.
fn residuals(w: &[f64], p: usize, ar: &[f64], ma: &[f64], c: f64) -> Vec<f64> {
    let mut e = vec![0.0; w.len()];
    for t in p..w.len() {
        let mut v = w[t] - c;
        for (i, a) in ar.iter().enumerate() {
            v -= a * w[t - 1 - i];
        }
        for (j, m) in ma.iter().enumerate() {
            if t > j {
                v -= m * e[t - 1 - j];
            }
        }
        e[t] = v;
    }
    e
}

struct Layout {
    p: usize,
    q: usize,
    intercept: bool,
}

impl Layout {
    fn len(&self) -> usize {
        self.p + self.q + usize::from(self.intercept)
    }

    fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64], f64) {
        let c = if self.intercept { x[self.p + self.q] } else { 0.0 };
        (&x[..self.p], &x[self.p..self.p + self.q], c)
    }

    fn css(&self, w: &[f64], x: &[f64]) -> f64 {
        let (ar, ma, c) = self.split(x);
        residuals(w, self.p, ar, ma, c)[self.p..].iter().map(|e| e * e).sum()
    }

    /// Residuals from `t = p` on and their Jacobian with respect to `x`.
    fn residuals_and_jacobian(&self, w: &[f64], x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let (ar, ma, c) = self.split(x);
        let (p, k, n) = (self.p, self.len(), w.len());
        let e = residuals(w, p, ar, ma, c);
        // de_t/dx = -(direct term) - sum_j ma_j de_{t-1-j}/dx
        let mut de = vec![vec![0.0; k]; n];
        for t in p..n {
            let mut row = vec![0.0; k];
            for i in 0..p {
                row[i] = -w[t - 1 - i];
            }
            for j in 0..self.q {
                if t > j {
                    row[p + j] = -e[t - 1 - j];
                }
            }
            if self.intercept {
                row[p + self.q] = -1.0;
            }
            for (j, m) in ma.iter().enumerate() {
                if t > j {
                    for col in 0..k {
                        row[col] -= m * de[t - 1 - j][col];
                    }
                }
            }
            de[t] = row;
        }
        let rows = n - p;
        let jac = DMatrix::from_fn(rows, k, |r, col| de[p + r][col]);
        (DVector::from_column_slice(&e[p..]), jac)
    }
}

/// Roots of the monic polynomial `z^n + a[0] z^{n-1} + ... + a[n-1]`
/// (Durand-Kerner).
fn monic_roots(a: &[f64]) -> Vec<Complex64> {
    let n = a.len();
    let eval = |z: Complex64| a.iter().fold(Complex64::new(1.0, 0.0), |acc, &c| acc * z + c);
    let scale = 1.0 + a.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..n).map(|i| seed.powu(i as u32) * scale).collect();
    for _ in 0..1000 {
        let mut change = 0.0f64;
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= z[i] - z[j];
                }
            }
            let step = eval(z[i]) / denom;
            z[i] -= step;
            change = change.max(step.norm());
        }
        if change < 1e-14 {
            break;
        }
    }
    z
}

/// Coefficients `a` of the monic polynomial with the given roots, as in
/// [`monic_roots`].
fn from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        poly = next;
    }
    poly[1..].iter().map(|c| c.re).collect()
}

const INVERTIBILITY_MARGIN: f64 = 1e-6;

/// The MA polynomial `1 + ma_1 B + ... + ma_q B^q` is invertible when the
/// roots of `z^q + ma_1 z^{q-1} + ... + ma_q` lie inside the unit circle.
fn ma_invertible(ma: &[f64]) -> bool {
    ma.is_empty() || monic_roots(ma).iter().all(|r| r.norm() < 1.0 - INVERTIBILITY_MARGIN)
}

/// Reflects roots outside the unit circle to `1 / conj(r)` and pulls roots on
/// the boundary slightly inside.
pub fn make_invertible(ma: &[f64]) -> Vec<f64> {
    if ma.is_empty() || ma_invertible(ma) {
        return ma.to_vec();
    }
    let roots: Vec<Complex64> = monic_roots(ma)
        .into_iter()
        .map(|r| {
            let r = if r.norm() > 1.0 { 1.0 / r.conj() } else { r };
            if r.norm() >= 1.0 - INVERTIBILITY_MARGIN {
                r * ((1.0 - 2.0 * INVERTIBILITY_MARGIN) / r.norm())
            } else {
                r
            }
        })
        .collect();
    from_roots(&roots)
}

fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let k = rows.first()?.len();
    if rows.len() <= k {
        return None;
    }
    let a = DMatrix::from_fn(rows.len(), k, |r, c| rows[r][c]);
    let b = DVector::from_column_slice(y);
    let sol = a.svd(true, true).solve(&b, 1e-12).ok()?;
    sol.iter().all(|v| v.is_finite()).then(|| sol.iter().copied().collect())
}

/// Hannan-Rissanen: residuals from a long autoregression, then a regression
/// on lagged values and lagged residuals.
fn initial_values(w: &[f64], l: &Layout) -> Vec<f64> {
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    let mut x = vec![0.0; l.len()];
    if l.q == 0 {
        if l.p > 0 {
            if let Ok((phi, _)) = yule_walker(w, l.p) {
                x[..l.p].copy_from_slice(&phi);
            }
        }
    } else {
        let m = ((l.p + l.q) * 4).clamp(10, 30).min(w.len() / 4);
        if let Ok((phi, _)) = yule_walker(w, m) {
            let mut e = vec![0.0; w.len()];
            for t in m..w.len() {
                e[t] = w[t] - mean - phi.iter().enumerate().map(|(i, a)| a * (w[t - 1 - i] - mean)).sum::<f64>();
            }
            let start = m + l.q.max(l.p);
            let mut rows = Vec::new();
            let mut ys = Vec::new();
            for t in start..w.len() {
                let mut row: Vec<f64> = (0..l.p).map(|i| w[t - 1 - i]).collect();
                row.extend((0..l.q).map(|j| e[t - 1 - j]));
                if l.intercept {
                    row.push(1.0);
                }
                rows.push(row);
                ys.push(w[t]);
            }
            if let Some(sol) = least_squares(&rows, &ys) {
                x = sol;
            }
        }
        let ma = make_invertible(&x[l.p..l.p + l.q]);
        x[l.p..l.p + l.q].copy_from_slice(&ma);
    }
    if l.intercept {
        let ar_sum: f64 = x[..l.p].iter().sum();
        if l.q == 0 || x[l.p + l.q] == 0.0 {
            x[l.p + l.q] = mean * (1.0 - ar_sum);
        }
    }
    x
}

fn check_series(series: &[f64]) -> Result<(), ModelError> {
    if series.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite);
    }
    Ok(())
}

/// Levenberg-Marquardt on the conditional sum of squares, keeping the MA
/// part invertible. Returns the parameters, CSS, iterations and status.
fn minimize(w: &[f64], layout: &Layout, mut x: Vec<f64>, config: &ArimaConfig) -> (Vec<f64>, f64, usize, FitStatus) {
    let k = layout.len();
    let mut css = layout.css(w, &x);
    let mut iterations = 0;
    let mut status = FitStatus::Converged;
    if k > 0 {
        let mut lambda = 1e-3;
        status = FitStatus::IterationCap;
        'outer: while iterations < config.max_iter {
            iterations += 1;
            let (e, jac) = layout.residuals_and_jacobian(w, &x);
            let jt = jac.transpose();
            let a = &jt * &jac;
            let g = &jt * &e;
            let ridge = 1e-12 * (a.trace() / k as f64).max(1.0);
            loop {
                let mut m = a.clone();
                for i in 0..k {
                    m[(i, i)] += lambda * (a[(i, i)] + ridge);
                }
                let step = m.cholesky().map(|ch| ch.solve(&(-&g)));
                if let Some(step) = step {
                    let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                    let ok = cand.iter().all(|v| v.is_finite()) && ma_invertible(&cand[layout.p..layout.p + layout.q]);
                    if ok {
                        let new_css = layout.css(w, &cand);
                        if new_css.is_finite() && new_css <= css {
                            let gain = css - new_css;
                            x = cand;
                            css = new_css;
                            lambda = (lambda / 10.0).max(1e-12);
                            if gain <= config.tol * css.max(f64::MIN_POSITIVE) {
                                status = FitStatus::Converged;
                                break 'outer;
                            }
                            continue 'outer;
                        }
                    }
                }
                lambda *= 10.0;
                if lambda > 1e12 {
                    // no downhill step left: a (local) minimum
                    status = FitStatus::Converged;
                    break 'outer;
                }
            }
        }
    }
    (x, css, iterations, status)
}

/// Fits the order in `config` (or searches by AIC when `select_by_aic`).
pub fn fit_arima(series: &[f64], config: &ArimaConfig) -> Result<ArimaModel, ModelError> {
    if config.select_by_aic {
        return select_arima(series, config).map(|(m, _)| m);
    }
    fit_order(series, config.order, config)
}

pub fn fit_order(series: &[f64], order: ArimaOrder, config: &ArimaConfig) -> Result<ArimaModel, ModelError> {
    order.validate()?;
    check_series(series)?;
    let need = order.p + order.d + order.q + 10;
    if series.len() <= need {
        return Err(ModelError::SeriesTooShort { need, got: series.len() });
    }
    let w = difference(series, order.d);
    let layout = Layout { p: order.p, q: order.q, intercept: config.intercept.unwrap_or(order.d == 0) };
    let (x, css, iterations, status) = minimize(&w, &layout, initial_values(&w, &layout), config);
    let (ar, ma, c) = layout.split(&x);
    let n_used = w.len() - order.p;
    Ok(ArimaModel {
        order,
        ar: ar.to_vec(),
        ma: ma.to_vec(),
        intercept: c,
        sigma2: css / n_used as f64,
        css,
        n_used,
        iterations,
        status,
    })
}

impl ArimaModel {
    /// A model with hand-set coefficients, e.g. for closed-form checks.
    pub fn from_parameters(order: ArimaOrder, ar: Vec<f64>, ma: Vec<f64>, intercept: f64) -> Result<Self, ModelError> {
        order.validate()?;
        if ar.len() != order.p || ma.len() != order.q {
            return Err(ModelError::Config(format!("{order} needs {} AR and {} MA coefficients", order.p, order.q)));
        }
        Ok(Self {
            order,
            ar,
            ma,
            intercept,
            sigma2: f64::NAN,
            css: f64::NAN,
            n_used: 0,
            iterations: 0,
            status: FitStatus::Converged,
        })
    }

    pub fn n_params(&self) -> usize {
        self.order.p + self.order.q + usize::from(self.intercept != 0.0)
    }

    /// Akaike information criterion of the CSS fit (Gaussian likelihood with
    /// the innovation variance counted as a parameter).
    pub fn aic(&self) -> f64 {
        let n = self.n_used as f64;
        n * (self.css / n).ln() + 2.0 * (self.n_params() + 1) as f64
    }

    /// Multi-step forecast from the end of `context`. Residuals over the
    /// context come from the recursion; future shocks are zero. Forecasts of
    /// the differenced series are integrated back `d` times.
    pub fn forecast(&self, context: &[f64], horizon: usize) -> Result<Vec<f64>, ModelError> {
        check_series(context)?;
        let ArimaOrder { p, d, .. } = self.order;
        let need = (p + d).max(1);
        if context.len() < need {
            return Err(ModelError::ContextTooShort { need, got: context.len() });
        }
        let mut levels = vec![context.to_vec()];
        for _ in 0..d {
            let next = difference(levels.last().expect("non-empty"), 1);
            levels.push(next);
        }
        let w = levels.last().expect("non-empty");
        let mut e = residuals(w, p, &self.ar, &self.ma, self.intercept);
        let mut ext = w.clone();
        for _ in 0..horizon {
            let t = ext.len();
            let mut v = self.intercept;
            for (i, a) in self.ar.iter().enumerate() {
                v += a * ext[t - 1 - i];
            }
            for (j, m) in self.ma.iter().enumerate() {
                if t > j {
                    v += m * e[t - 1 - j];
                }
            }
            ext.push(v);
            e.push(0.0);
        }
        let mut out = ext[w.len()..].to_vec();
        for level in levels[..d].iter().rev() {
            let mut prev = *level.last().expect("non-empty");
            for v in out.iter_mut() {
                prev += *v;
                *v = prev;
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let m: Self = serde_json::from_str(s)?;
        m.order.validate()?;
        if m.ar.len() != m.order.p || m.ma.len() != m.order.q {
            return Err(ModelError::Config("coefficient counts do not match the order".into()));
        }
        Ok(m)
    }
}

/// Fits every order with p, q in 0..=3 and d in {0, 1} and keeps the lowest
/// AIC. Orders that fail to fit are skipped. Returns the winner and the AIC of
/// each candidate.
pub fn select_arima(series: &[f64], config: &ArimaConfig) -> Result<(ArimaModel, Vec<(ArimaOrder, f64)>), ModelError> {
    check_series(series)?;
    let mut best: Option<ArimaModel> = None;
    let mut table = Vec::new();
    let mut last_err = None;
    for d in 0..=1 {
        for p in 0..=3 {
            for q in 0..=3 {
                let Ok(order) = ArimaOrder::new(p, d, q) else { continue };
                match fit_order(series, order, config) {
                    Ok(m) => {
                        let aic = m.aic();
                        table.push((order, aic));
                        if aic.is_finite() && best.as_ref().is_none_or(|b| aic < b.aic()) {
                            best = Some(m);
                        }
                    }
                    Err(e) => last_err = Some(e),
                }
            }
        }
    }
    match best {
        Some(m) => Ok((m, table)),
        None => Err(last_err.unwrap_or_else(|| ModelError::Config("no ARIMA order could be fitted".into()))),
    }
}
