//! Long-format ("tidy") hourly price CSV ingestion and gap repair.
//!
//! Expected layout: a header row and one row per `(datetime, country, price)`
//! observation. Datetimes are ISO 8601 (`2023-01-01T00:00:00Z`, offsets
//! allowed; naive values are read as UTC) and are normalized to UTC.

use chrono::{DateTime, FixedOffset, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::{build_panel, PanelError, PriceRecord, PricePanel};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing required column {0:?}")]
    MissingColumn(String),
    #[error("line {line}: cannot parse datetime {value:?}")]
    BadDatetime { line: u64, value: String },
    #[error("line {line}: cannot parse price {value:?}")]
    BadPrice { line: u64, value: String },
    #[error("line {line}: {source}")]
    Csv { line: u64, source: csv::Error },
    #[error("no rows left after filtering")]
    NoRows,
    #[error("{count} gap cell(s) present, first in channel {channel} at hour {hour}")]
    GapsPresent { count: usize, channel: String, hour: usize },
    #[error("channel {channel} starts with a gap; forward fill has no predecessor")]
    LeadingGap { channel: String },
    #[error("channel {channel} has no observations to interpolate from")]
    EmptyChannel { channel: String },
    #[error(transparent)]
    Panel(#[from] PanelError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapPolicy {
    #[default]
    Error,
    ForwardFill,
    LinearInterpolate,
}

impl std::str::FromStr for GapPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "error" => Ok(Self::Error),
            "forward_fill" | "ffill" => Ok(Self::ForwardFill),
            "linear_interpolate" | "linear" => Ok(Self::LinearInterpolate),
            other => Err(format!("unknown gap policy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestOptions {
    pub datetime_column: String,
    pub country_column: String,
    pub price_column: String,
    pub gap_policy: GapPolicy,
    /// Half-open `[start, end)` UTC slice.
    pub time_range: Option<(DateTime<Utc>, DateTime<Utc>)>,
    pub country_filter: Option<Vec<String>>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            datetime_column: "datetime".into(),
            country_column: "country".into(),
            price_column: "price".into(),
            gap_policy: GapPolicy::Error,
            time_range: None,
            country_filter: None,
        }
    }
}

pub fn parse_datetime(s: &str) -> Option<DateTime<FixedOffset>> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(naive.and_utc().fixed_offset());
        }
    }
    None
}

/// Parses the CSV, applies the filters, builds the panel and repairs gaps
/// according to `options.gap_policy`.
pub fn parse_price_csv(bytes: &[u8], options: &IngestOptions) -> Result<PricePanel, IngestError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = reader.headers().map_err(|source| IngestError::Csv { line: 1, source })?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let (dt_col, country_col, price_col) =
        (col(&options.datetime_column)?, col(&options.country_column)?, col(&options.price_column)?);

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|source| {
            let line = source.position().map_or(0, |p| p.line());
            IngestError::Csv { line, source }
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let raw_dt = row.get(dt_col).unwrap_or("");
        let ts = parse_datetime(raw_dt)
            .ok_or_else(|| IngestError::BadDatetime { line, value: raw_dt.to_string() })?;
        let country = row.get(country_col).unwrap_or("");
        let raw_price = row.get(price_col).unwrap_or("");
        let price: f64 = raw_price
            .parse()
            .ok()
            .filter(|p: &f64| p.is_finite())
            .ok_or_else(|| IngestError::BadPrice { line, value: raw_price.to_string() })?;

        if let Some((start, end)) = options.time_range {
            let utc = ts.with_timezone(&Utc);
            if utc < start || utc >= end {
                continue;
            }
        }
        if let Some(filter) = &options.country_filter {
            if !filter.iter().any(|c| c == country) {
                continue;
            }
        }
        records.push(PriceRecord::new(ts, country, price));
    }
    if records.is_empty() {
        return Err(IngestError::NoRows);
    }
    let mut panel = build_panel(&records)?;
    panel.set_provenance("csv");
    Ok(repair_gaps(&panel, options.gap_policy)?.panel)
}

/// A repaired panel plus the number of cells that were filled.
#[derive(Debug, Clone, PartialEq)]
pub struct Repaired {
    pub panel: PricePanel,
    pub repaired: usize,
}

pub fn repair_gaps(panel: &PricePanel, policy: GapPolicy) -> Result<Repaired, IngestError> {
    let gaps = panel.gap_count();
    if gaps == 0 {
        return Ok(Repaired { panel: panel.clone(), repaired: 0 });
    }
    let c = panel.n_channels();
    let n = panel.n_hours();
    let mut out = panel.clone();
    match policy {
        GapPolicy::Error => {
            let i = panel.values().iter().position(|v| !v.is_finite()).expect("gap counted");
            return Err(IngestError::GapsPresent {
                count: gaps,
                channel: panel.channels()[i % c].clone(),
                hour: i / c,
            });
        }
        GapPolicy::ForwardFill => {
            let vals = out.values_mut();
            for ch in 0..c {
                if !vals[ch].is_finite() {
                    return Err(IngestError::LeadingGap { channel: panel.channels()[ch].clone() });
                }
                for h in 1..n {
                    if !vals[h * c + ch].is_finite() {
                        vals[h * c + ch] = vals[(h - 1) * c + ch];
                    }
                }
            }
        }
        GapPolicy::LinearInterpolate => {
            let vals = out.values_mut();
            for ch in 0..c {
                let known: Vec<usize> = (0..n).filter(|&h| vals[h * c + ch].is_finite()).collect();
                let (&first, &last) = match (known.first(), known.last()) {
                    (Some(f), Some(l)) => (f, l),
                    _ => return Err(IngestError::EmptyChannel { channel: panel.channels()[ch].clone() }),
                };
                // edges are held flat at the nearest observation
                for h in 0..first {
                    vals[h * c + ch] = vals[first * c + ch];
                }
                for h in last + 1..n {
                    vals[h * c + ch] = vals[last * c + ch];
                }
                for pair in known.windows(2) {
                    let (a, b) = (pair[0], pair[1]);
                    let (va, vb) = (vals[a * c + ch], vals[b * c + ch]);
                    for h in a + 1..b {
                        let w = (h - a) as f64 / (b - a) as f64;
                        vals[h * c + ch] = va + w * (vb - va);
                    }
                }
            }
        }
    }
    Ok(Repaired { panel: out, repaired: gaps })
}

/// Formats a number with 6 significant digits, `%g` style.
pub fn format_sig6(x: f64) -> String {
    format_sig(x, 6)
}

pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let digits = digits.max(1);
    // round first so that e.g. 999999.7 picks the right exponent
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        return format!("{mantissa}e{exp}");
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Long-format CSV with `datetime,country,price` columns.
pub fn write_long_csv(panel: &PricePanel) -> String {
    let mut out = String::from("datetime,country,price\n");
    for h in 0..panel.n_hours() {
        let ts = panel.timestamp(h).format("%Y-%m-%dT%H:%M:%SZ");
        for (c, name) in panel.channels().iter().enumerate() {
            let v = panel.value(h, c);
            if v.is_finite() {
                out.push_str(&format!("{ts},{name},{}\n", format_sig6(v)));
            }
        }
    }
    out
}

/// Wide CSV (one column per channel) for inspection.
pub fn write_wide_csv(panel: &PricePanel) -> String {
    let mut out = String::from("datetime");
    for c in panel.channels() {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for h in 0..panel.n_hours() {
        out.push_str(&panel.timestamp(h).format("%Y-%m-%dT%H:%M:%SZ").to_string());
        for v in panel.row(h) {
            out.push(',');
            if v.is_finite() {
                out.push_str(&format_sig6(*v));
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone};
    use proptest::prelude::*;

    const GRID: &str = "datetime,country,price\n\
        2023-01-01T00:00:00Z,FR,10.5\n\
        2023-01-01T00:00:00Z,DE,-3.25\n\
        2023-01-01T01:00:00Z,FR,11\n\
        2023-01-01T01:00:00Z,DE,4\n";

    #[test]
    fn four_rows_make_two_by_two() {
        let p = parse_price_csv(GRID.as_bytes(), &IngestOptions::default()).unwrap();
        assert_eq!(p.channels(), ["DE", "FR"]);
        assert_eq!(p.values(), [-3.25, 10.5, 4.0, 11.0]);
        assert_eq!(p.start(), Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap());
    }

    #[test]
    fn bad_price_names_line() {
        let csv = "datetime,country,price\n2023-01-01T00:00:00Z,DE,1\n2023-01-01T01:00:00Z,DE,abc\n";
        match parse_price_csv(csv.as_bytes(), &IngestOptions::default()) {
            Err(IngestError::BadPrice { line, value }) => {
                assert_eq!(line, 3);
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_column() {
        let csv = "when,country,price\n2023-01-01T00:00:00Z,DE,1\n";
        assert!(matches!(
            parse_price_csv(csv.as_bytes(), &IngestOptions::default()),
            Err(IngestError::MissingColumn(c)) if c == "datetime"
        ));
    }

    #[test]
    fn duplicate_cell_surfaces() {
        let csv = "datetime,country,price\n2023-01-01T00:00:00Z,DE,1\n2023-01-01T00:00:00Z,DE,2\n";
        assert!(matches!(
            parse_price_csv(csv.as_bytes(), &IngestOptions::default()),
            Err(IngestError::Panel(PanelError::DuplicateCell { .. }))
        ));
    }

    #[test]
    fn offsets_normalize_to_utc() {
        let csv = "datetime,country,price\n2023-01-01T01:00:00+01:00,DE,1\n2023-01-01T02:00:00+01:00,DE,2\n";
        let p = parse_price_csv(csv.as_bytes(), &IngestOptions::default()).unwrap();
        assert_eq!(p.start(), Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap());
    }

    const GAPPY: &str = "datetime,country,price\n\
        2023-01-01T00:00:00Z,DE,10\n\
        2023-01-01T01:00:00Z,DE,20\n\
        2023-01-01T03:00:00Z,DE,40\n";

    #[test]
    fn forward_fill_matches_manual_fill() {
        let opts = IngestOptions { gap_policy: GapPolicy::ForwardFill, ..Default::default() };
        let p = parse_price_csv(GAPPY.as_bytes(), &opts).unwrap();
        assert_eq!(p.values(), [10.0, 20.0, 20.0, 40.0]);
        assert!(matches!(
            parse_price_csv(GAPPY.as_bytes(), &IngestOptions::default()),
            Err(IngestError::GapsPresent { count: 1, hour: 2, .. })
        ));
    }

    #[test]
    fn interpolation_uses_neighbours() {
        let start = Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap();
        let p = PricePanel::new(start, vec!["A".into()], vec![10.0, f64::NAN, 30.0], "t").unwrap();
        let r = repair_gaps(&p, GapPolicy::LinearInterpolate).unwrap();
        assert_eq!(r.repaired, 1);
        assert_eq!(r.panel.values(), [10.0, 20.0, 30.0]);
        let same = repair_gaps(&r.panel, GapPolicy::Error).unwrap();
        assert_eq!(same.repaired, 0);
        assert_eq!(same.panel, r.panel);
    }

    #[test]
    fn leading_gap_cannot_forward_fill() {
        let start = Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap();
        let p = PricePanel::new(start, vec!["A".into()], vec![f64::NAN, 1.0], "t").unwrap();
        assert!(matches!(repair_gaps(&p, GapPolicy::ForwardFill), Err(IngestError::LeadingGap { .. })));
    }

    #[test]
    fn filters_apply() {
        let start = Utc.with_ymd_and_hms(2023, 1, 1, 1, 0, 0).unwrap();
        let opts = IngestOptions {
            time_range: Some((start, start + Duration::hours(1))),
            country_filter: Some(vec!["FR".into()]),
            ..Default::default()
        };
        let p = parse_price_csv(GRID.as_bytes(), &opts).unwrap();
        assert_eq!(p.channels(), ["FR"]);
        assert_eq!(p.values(), [11.0]);
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(0.27), "0.27");
        assert_eq!(format_sig6(47.21), "47.21");
        assert_eq!(format_sig6(12984.28), "12984.3");
        assert_eq!(format_sig6(1.0 / 3.0), "0.333333");
        assert_eq!(format_sig6(-2.5), "-2.5");
        assert_eq!(format_sig6(1234567.0), "1.23457e6");
        assert_eq!(format_sig6(999999.7), "1e6");
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(100.0), "100");
    }

    proptest! {
        #[test]
        fn long_csv_round_trip(vals in proptest::collection::vec(-300.0f64..900.0, 3..40)) {
            let n = vals.len() / 3 * 3;
            let vals: Vec<f64> = vals[..n].iter().map(|v| format_sig6(*v).parse().unwrap()).collect();
            let start = Utc.with_ymd_and_hms(2024, 2, 28, 20, 0, 0).unwrap();
            let p = PricePanel::new(start, vec!["AT".into(), "BE".into(), "CZ".into()], vals, "csv").unwrap();
            let text = write_long_csv(&p);
            let back = parse_price_csv(text.as_bytes(), &IngestOptions::default()).unwrap();
            prop_assert_eq!(back, p);
        }
    }
}
