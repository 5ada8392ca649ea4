//! Hourly price panels and the walk-forward evaluation arithmetic built on them.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use chrono::{DateTime, Duration, FixedOffset, Timelike, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PanelError {
    #[error("no price records supplied")]
    Empty,
    #[error("duplicate cell for channel {channel} at {timestamp}")]
    DuplicateCell { timestamp: DateTime<Utc>, channel: String },
    #[error("records mix UTC offsets {first} and {other}")]
    MixedTimeZones { first: FixedOffset, other: FixedOffset },
    #[error("timestamp {0} is not on the hourly grid")]
    OffGrid(DateTime<Utc>),
    #[error("duplicate channel identifier {0}")]
    DuplicateChannel(String),
    #[error("panel must have at least one channel")]
    NoChannels,
    #[error("value buffer holds {got} entries, expected {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("unknown channel {0}")]
    UnknownChannel(String),
    #[error("index range {start}..{end} outside panel of {len} hours")]
    OutOfBounds { start: usize, end: usize, len: usize },
    #[error("channel {channel} has zero variance over the fit range")]
    ZeroVariance { channel: String },
    #[error("channel {channel} contains a gap or non-finite value at hour {hour}")]
    NonFinite { channel: String, hour: usize },
    #[error("walk-forward parameters must be positive: {0}")]
    ZeroLength(&'static str),
    #[error("plan needs {needed} hours but the panel has {available}")]
    InsufficientHours { needed: usize, available: usize },
    #[error("horizon {horizon} exceeds the test length {test_len}")]
    HorizonTooLong { horizon: usize, test_len: usize },
    #[error("input length {input_len} exceeds the train length {train_len}")]
    InputTooLong { input_len: usize, train_len: usize },
    #[error("fold {index} does not exist (plan has {n_folds})")]
    NoSuchFold { index: usize, n_folds: usize },
}

/// One long-format observation: a price for a channel at an instant.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceRecord {
    pub timestamp: DateTime<FixedOffset>,
    pub channel: String,
    pub price: f64,
}

impl PriceRecord {
    pub fn new(timestamp: DateTime<FixedOffset>, channel: impl Into<String>, price: f64) -> Self {
        Self { timestamp, channel: channel.into(), price }
    }

    pub fn utc(timestamp: DateTime<Utc>, channel: impl Into<String>, price: f64) -> Self {
        Self::new(timestamp.fixed_offset(), channel, price)
    }
}

/// Hourly, UTC-stamped multi-channel price matrix in EUR/MWh.
///
/// Values are stored row-major (`hour * n_channels + channel`). Missing cells
/// are `NaN` until [`crate::repair_gaps`] fills them; a panel used for
/// benchmarking must be [complete](PricePanel::is_complete).
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    start: DateTime<Utc>,
    channels: Vec<String>,
    values: Vec<f64>,
    provenance: String,
}

impl PricePanel {
    pub fn new(
        start: DateTime<Utc>,
        channels: Vec<String>,
        values: Vec<f64>,
        provenance: impl Into<String>,
    ) -> Result<Self, PanelError> {
        if channels.is_empty() {
            return Err(PanelError::NoChannels);
        }
        let mut seen = BTreeSet::new();
        for c in &channels {
            if !seen.insert(c.as_str()) {
                return Err(PanelError::DuplicateChannel(c.clone()));
            }
        }
        if values.len() % channels.len() != 0 || values.is_empty() {
            let expected = (values.len() / channels.len()).max(1) * channels.len();
            return Err(PanelError::ShapeMismatch { expected, got: values.len() });
        }
        if start.minute() != 0 || start.second() != 0 || start.nanosecond() != 0 {
            return Err(PanelError::OffGrid(start));
        }
        Ok(Self { start, channels, values, provenance: provenance.into() })
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn n_hours(&self) -> usize {
        self.values.len() / self.channels.len()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn set_provenance(&mut self, provenance: impl Into<String>) {
        self.provenance = provenance.into();
    }

    /// Row-major values, `NaN` marking gaps.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn timestamp(&self, hour: usize) -> DateTime<Utc> {
        self.start + Duration::hours(hour as i64)
    }

    pub fn timestamps(&self) -> Vec<DateTime<Utc>> {
        (0..self.n_hours()).map(|h| self.timestamp(h)).collect()
    }

    pub fn channel_index(&self, channel: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == channel)
    }

    pub fn value(&self, hour: usize, channel: usize) -> f64 {
        self.values[hour * self.channels.len() + channel]
    }

    pub fn row(&self, hour: usize) -> &[f64] {
        let c = self.channels.len();
        &self.values[hour * c..(hour + 1) * c]
    }

    pub fn column(&self, channel: usize) -> Vec<f64> {
        self.values.iter().skip(channel).step_by(self.channels.len()).copied().collect()
    }

    /// Row-major block of the given hours (all channels).
    pub fn rows(&self, hours: Range<usize>) -> Result<&[f64], PanelError> {
        self.check_range(&hours)?;
        let c = self.channels.len();
        Ok(&self.values[hours.start * c..hours.end * c])
    }

    pub fn gap_count(&self) -> usize {
        self.values.iter().filter(|v| !v.is_finite()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.gap_count() == 0
    }

    /// Errors with the first gap found, if any.
    pub fn ensure_complete(&self) -> Result<(), PanelError> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(PanelError::NonFinite {
                channel: self.channels[i % self.channels.len()].clone(),
                hour: i / self.channels.len(),
            }),
        }
    }

    pub fn select_hours(&self, hours: Range<usize>) -> Result<PricePanel, PanelError> {
        let values = self.rows(hours.clone())?.to_vec();
        Ok(Self {
            start: self.timestamp(hours.start),
            channels: self.channels.clone(),
            values,
            provenance: self.provenance.clone(),
        })
    }

    /// Keeps the named channels, in the order given.
    pub fn select_channels<S: AsRef<str>>(&self, names: &[S]) -> Result<PricePanel, PanelError> {
        let idx = names
            .iter()
            .map(|n| {
                self.channel_index(n.as_ref())
                    .ok_or_else(|| PanelError::UnknownChannel(n.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut values = Vec::with_capacity(self.n_hours() * idx.len());
        for h in 0..self.n_hours() {
            let row = self.row(h);
            values.extend(idx.iter().map(|&i| row[i]));
        }
        Self::new(
            self.start,
            names.iter().map(|n| n.as_ref().to_string()).collect(),
            values,
            self.provenance.clone(),
        )
    }

    fn check_range(&self, r: &Range<usize>) -> Result<(), PanelError> {
        if r.start > r.end || r.end > self.n_hours() {
            return Err(PanelError::OutOfBounds { start: r.start, end: r.end, len: self.n_hours() });
        }
        Ok(())
    }
}

/// Materializes long-format records into a panel.
///
/// Channels are sorted lexicographically and hours run from the earliest to the
/// latest record; cells with no record are left as `NaN` gaps.
pub fn build_panel(records: &[PriceRecord]) -> Result<PricePanel, PanelError> {
    let first = records.first().ok_or(PanelError::Empty)?;
    let offset = *first.timestamp.offset();
    let mut cells: BTreeMap<(DateTime<Utc>, &str), f64> = BTreeMap::new();
    let mut channels = BTreeSet::new();
    for r in records {
        if *r.timestamp.offset() != offset {
            return Err(PanelError::MixedTimeZones { first: offset, other: *r.timestamp.offset() });
        }
        let ts = r.timestamp.with_timezone(&Utc);
        if ts.minute() != 0 || ts.second() != 0 || ts.nanosecond() != 0 {
            return Err(PanelError::OffGrid(ts));
        }
        if cells.insert((ts, r.channel.as_str()), r.price).is_some() {
            return Err(PanelError::DuplicateCell { timestamp: ts, channel: r.channel.clone() });
        }
        channels.insert(r.channel.as_str());
    }
    let start = cells.keys().next().map(|k| k.0).expect("non-empty");
    let end = cells.keys().next_back().map(|k| k.0).expect("non-empty");
    let n_hours = (end - start).num_hours() as usize + 1;
    let channels: Vec<&str> = channels.into_iter().collect();
    let mut values = vec![f64::NAN; n_hours * channels.len()];
    for ((ts, ch), price) in cells {
        let h = (ts - start).num_hours() as usize;
        let c = channels.binary_search(&ch).expect("channel collected");
        values[h * channels.len() + c] = price;
    }
    PricePanel::new(start, channels.into_iter().map(String::from).collect(), values, "records")
}

/// One train/test split of the walk-forward plan, as hour index ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    pub train: Range<usize>,
    pub test: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkForwardPlan {
    pub train_len: usize,
    pub test_len: usize,
    pub n_folds: usize,
    pub stride: usize,
    pub folds: Vec<Fold>,
}

impl WalkForwardPlan {
    /// Total hours spanned by the plan.
    pub fn span(&self) -> usize {
        self.folds.last().map_or(0, |f| f.test.end)
    }

    pub fn fold(&self, index: usize) -> Result<&Fold, PanelError> {
        self.folds.get(index).ok_or(PanelError::NoSuchFold { index, n_folds: self.n_folds })
    }
}

/// Rolling-window plan: fold `k` trains on `[k*stride, k*stride + train_len)`
/// and tests on the `test_len` hours that follow.
pub fn make_walk_forward_plan(
    n_hours: usize,
    train_len: usize,
    test_len: usize,
    n_folds: usize,
    stride: usize,
) -> Result<WalkForwardPlan, PanelError> {
    for (v, name) in [
        (train_len, "train_len"),
        (test_len, "test_len"),
        (n_folds, "n_folds"),
        (stride, "stride"),
    ] {
        if v == 0 {
            return Err(PanelError::ZeroLength(name));
        }
    }
    let needed = train_len + (n_folds - 1) * stride + test_len;
    if n_hours < needed {
        return Err(PanelError::InsufficientHours { needed, available: n_hours });
    }
    let folds = (0..n_folds)
        .map(|k| {
            let s = k * stride;
            Fold { index: k, train: s..s + train_len, test: s + train_len..s + train_len + test_len }
        })
        .collect();
    Ok(WalkForwardPlan { train_len, test_len, n_folds, stride, folds })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleDirection {
    Forward,
    Inverse,
}

/// Per-channel standardization fitted on one index range (population std).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelScaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub fit_range: Range<usize>,
}

impl ChannelScaler {
    pub fn fit(panel: &PricePanel, range: Range<usize>) -> Result<Self, PanelError> {
        let block = panel.rows(range.clone())?;
        let c = panel.n_channels();
        let n = range.len();
        if n == 0 {
            return Err(PanelError::OutOfBounds { start: range.start, end: range.end, len: panel.n_hours() });
        }
        let mut means = vec![0.0; c];
        let mut stds = vec![0.0; c];
        for ch in 0..c {
            let mut sum = 0.0;
            for (h, row) in block.chunks_exact(c).enumerate() {
                let v = row[ch];
                if !v.is_finite() {
                    return Err(PanelError::NonFinite {
                        channel: panel.channels()[ch].clone(),
                        hour: range.start + h,
                    });
                }
                sum += v;
            }
            let mean = sum / n as f64;
            let var = block.chunks_exact(c).map(|row| (row[ch] - mean).powi(2)).sum::<f64>() / n as f64;
            let std = var.sqrt();
            if !(std > f64::EPSILON * mean.abs().max(1.0)) {
                return Err(PanelError::ZeroVariance { channel: panel.channels()[ch].clone() });
            }
            means[ch] = mean;
            stds[ch] = std;
        }
        Ok(Self { means, stds, fit_range: range })
    }

    pub fn n_channels(&self) -> usize {
        self.means.len()
    }

    pub fn forward_value(&self, channel: usize, x: f64) -> f64 {
        (x - self.means[channel]) / self.stds[channel]
    }

    pub fn inverse_value(&self, channel: usize, z: f64) -> f64 {
        z * self.stds[channel] + self.means[channel]
    }

    /// Scales a row-major `[rows x n_channels]` block.
    pub fn scale(&self, block: &[f64], direction: ScaleDirection) -> Result<Vec<f64>, PanelError> {
        let c = self.n_channels();
        if block.len() % c != 0 {
            return Err(PanelError::ShapeMismatch { expected: block.len() / c * c, got: block.len() });
        }
        Ok(block
            .iter()
            .enumerate()
            .map(|(i, &v)| match direction {
                ScaleDirection::Forward => self.forward_value(i % c, v),
                ScaleDirection::Inverse => self.inverse_value(i % c, v),
            })
            .collect())
    }
}

/// Convenience wrapper matching the free-function form.
pub fn fit_scaler(panel: &PricePanel, range: Range<usize>) -> Result<ChannelScaler, PanelError> {
    ChannelScaler::fit(panel, range)
}

pub fn scale(block: &[f64], scaler: &ChannelScaler, direction: ScaleDirection) -> Result<Vec<f64>, PanelError> {
    scaler.scale(block, direction)
}

/// A forecast origin inside a fold's test range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalWindow {
    pub fold_index: usize,
    /// Position of this window within its fold.
    pub index: usize,
    pub context: Range<usize>,
    pub target: Range<usize>,
}

impl EvalWindow {
    pub fn origin(&self) -> usize {
        self.target.start
    }
}

/// Origins at `test.start + m * eval_stride` while the target fits in the test
/// range. Contexts may reach back into the train range.
pub fn enumerate_eval_windows(
    plan: &WalkForwardPlan,
    fold_index: usize,
    input_len: usize,
    horizon: usize,
    eval_stride: usize,
) -> Result<Vec<EvalWindow>, PanelError> {
    let fold = plan.fold(fold_index)?;
    if horizon == 0 {
        return Err(PanelError::ZeroLength("horizon"));
    }
    if input_len == 0 {
        return Err(PanelError::ZeroLength("input_len"));
    }
    if eval_stride == 0 {
        return Err(PanelError::ZeroLength("eval_stride"));
    }
    if horizon > plan.test_len {
        return Err(PanelError::HorizonTooLong { horizon, test_len: plan.test_len });
    }
    if input_len > plan.train_len {
        return Err(PanelError::InputTooLong { input_len, train_len: plan.train_len });
    }
    let mut windows = Vec::new();
    let mut origin = fold.test.start;
    while origin + horizon <= fold.test.end {
        windows.push(EvalWindow {
            fold_index,
            index: windows.len(),
            context: origin - input_len..origin,
            target: origin..origin + horizon,
        });
        origin += eval_stride;
    }
    Ok(windows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn t(h: i64) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap() + Duration::hours(h)
    }

    #[test]
    fn minimal_grid_sorts_channels() {
        let recs = vec![
            PriceRecord::utc(t(0), "FR", 1.0),
            PriceRecord::utc(t(0), "DE", 2.0),
            PriceRecord::utc(t(1), "FR", 3.0),
            PriceRecord::utc(t(1), "DE", 4.0),
        ];
        let p = build_panel(&recs).unwrap();
        assert_eq!(p.channels(), ["DE", "FR"]);
        assert_eq!(p.values(), [2.0, 1.0, 4.0, 3.0]);
        assert!(p.is_complete());
    }

    #[test]
    fn duplicate_cell_rejected() {
        let recs = vec![PriceRecord::utc(t(0), "DE", 1.0), PriceRecord::utc(t(0), "DE", 5.0)];
        assert!(matches!(build_panel(&recs), Err(PanelError::DuplicateCell { .. })));
    }

    #[test]
    fn mixed_offsets_rejected() {
        let cet = FixedOffset::east_opt(3600).unwrap();
        let recs = vec![
            PriceRecord::utc(t(0), "DE", 1.0),
            PriceRecord::new(t(2).with_timezone(&cet), "DE", 5.0),
        ];
        assert!(matches!(build_panel(&recs), Err(PanelError::MixedTimeZones { .. })));
    }

    #[test]
    fn empty_rejected() {
        assert_eq!(build_panel(&[]), Err(PanelError::Empty));
    }

    #[test]
    fn missing_hour_is_flagged_as_gap() {
        let recs = vec![PriceRecord::utc(t(0), "DE", 1.0), PriceRecord::utc(t(2), "DE", 3.0)];
        let p = build_panel(&recs).unwrap();
        assert_eq!(p.n_hours(), 3);
        assert_eq!(p.gap_count(), 1);
        assert!(p.value(1, 0).is_nan());
    }

    #[test]
    fn out_of_order_rows_match_sorted_construction() {
        let mut recs = Vec::new();
        for h in 0..24 {
            for (i, ch) in ["PL", "AT", "SE"].iter().enumerate() {
                recs.push(PriceRecord::utc(t(h), *ch, (h * 10 + i as i64) as f64));
            }
        }
        let sorted = build_panel(&recs).unwrap();
        let mut shuffled = recs.clone();
        shuffled.reverse();
        shuffled.swap(3, 40);
        assert_eq!(build_panel(&shuffled).unwrap(), sorted);
    }

    #[test]
    fn five_thousand_hour_plan() {
        let plan = make_walk_forward_plan(5000, 2000, 500, 6, 500).unwrap();
        assert_eq!(plan.folds.len(), 6);
        assert_eq!(plan.folds[0].train, 0..2000);
        assert_eq!(plan.folds[0].test, 2000..2500);
        assert_eq!(plan.folds[5].train, 2500..4500);
        assert_eq!(plan.folds[5].test, 4500..5000);
        assert_eq!(plan.span(), 5000);
    }

    #[test]
    fn single_fold_and_boundary() {
        let plan = make_walk_forward_plan(2500, 2000, 500, 1, 500).unwrap();
        assert_eq!(plan.folds.len(), 1);
        assert!(matches!(
            make_walk_forward_plan(4999, 2000, 500, 6, 500),
            Err(PanelError::InsufficientHours { needed: 5000, available: 4999 })
        ));
        assert!(matches!(make_walk_forward_plan(5000, 0, 500, 6, 500), Err(PanelError::ZeroLength(_))));
    }

    fn single_channel(values: Vec<f64>) -> PricePanel {
        PricePanel::new(t(0), vec!["X".into()], values, "test").unwrap()
    }

    #[test]
    fn scaler_hand_values() {
        let p = single_channel(vec![1.0, 2.0, 3.0]);
        let s = ChannelScaler::fit(&p, 0..3).unwrap();
        assert_eq!(s.means, [2.0]);
        assert!((s.stds[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let z = s.scale(&[3.0], ScaleDirection::Forward).unwrap();
        assert!((z[0] - 1.224744871391589).abs() < 1e-12);
    }

    #[test]
    fn constant_channel_rejected() {
        let p = single_channel(vec![5.0; 10]);
        assert!(matches!(ChannelScaler::fit(&p, 0..10), Err(PanelError::ZeroVariance { .. })));
        assert!(matches!(ChannelScaler::fit(&p, 0..11), Err(PanelError::OutOfBounds { .. })));
    }

    #[test]
    fn eval_window_counts() {
        let plan = make_walk_forward_plan(5000, 2000, 500, 6, 500).unwrap();
        let w = enumerate_eval_windows(&plan, 0, 96, 96, 96).unwrap();
        let offsets: Vec<_> = w.iter().map(|w| w.target.start - 2000).collect();
        assert_eq!(offsets, [0, 96, 192, 288, 384]);
        assert_eq!(w[0].context, 1904..2000);
        assert_eq!(enumerate_eval_windows(&plan, 3, 96, 96, 1).unwrap().len(), 405);
        assert_eq!(enumerate_eval_windows(&plan, 5, 96, 500, 500).unwrap().len(), 1);
        assert!(matches!(
            enumerate_eval_windows(&plan, 0, 96, 501, 96),
            Err(PanelError::HorizonTooLong { .. })
        ));
    }

    proptest! {
        #[test]
        fn folds_tile_by_stride(train in 1usize..300, test in 1usize..200, n in 1usize..8, stride in 1usize..200, extra in 0usize..50) {
            let hours = train + (n - 1) * stride + test + extra;
            let plan = make_walk_forward_plan(hours, train, test, n, stride).unwrap();
            for w in plan.folds.windows(2) {
                prop_assert_eq!(w[1].train.start - w[0].train.start, stride);
            }
            for f in &plan.folds {
                prop_assert_eq!(f.train.end, f.test.start);
                prop_assert!(f.test.end <= hours);
            }
        }

        #[test]
        fn windows_stay_in_test_range(test in 1usize..300, horizon in 1usize..300, stride in 1usize..100, input in 1usize..100) {
            prop_assume!(horizon <= test);
            let plan = make_walk_forward_plan(100 + 2 * test, 100, test, 2, test).unwrap();
            for fold in 0..2 {
                let f = &plan.folds[fold];
                for w in enumerate_eval_windows(&plan, fold, input, horizon, stride).unwrap() {
                    prop_assert!(w.target.start >= f.test.start && w.target.end <= f.test.end);
                    prop_assert_eq!(w.context.end, w.target.start);
                    prop_assert_eq!(w.context.len(), input);
                    prop_assert_eq!(w.target.len(), horizon);
                }
            }
        }

        #[test]
        fn scaler_round_trip(vals in proptest::collection::vec(-500.0f64..500.0, 6..60)) {
            let n = vals.len() / 2 * 2;
            let p = PricePanel::new(t(0), vec!["A".into(), "B".into()], vals[..n].to_vec(), "p").unwrap();
            if let Ok(s) = ChannelScaler::fit(&p, 0..p.n_hours()) {
                let z = s.scale(p.values(), ScaleDirection::Forward).unwrap();
                let back = s.scale(&z, ScaleDirection::Inverse).unwrap();
                for (a, b) in back.iter().zip(p.values()) {
                    prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
                }
                for ch in 0..2 {
                    let col: Vec<f64> = z.iter().skip(ch).step_by(2).copied().collect();
                    let m = col.iter().sum::<f64>() / col.len() as f64;
                    let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / col.len() as f64).sqrt();
                    prop_assert!(m.abs() < 1e-9);
                    prop_assert!((sd - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
