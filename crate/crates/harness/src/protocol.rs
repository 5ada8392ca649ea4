//! The line protocol spoken with external forecaster processes.
//!
//! Request: `GRIDCAST/1 FORECAST`, `context_len=<L> horizon=<H>`, `L` values,
//! `END`. Response: `H` values, `END`. Lines end in `\n`; decimals use `.`.

pub const HEADER: &str = "GRIDCAST/1 FORECAST";
pub const END: &str = "END";

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub context: Vec<f64>,
    pub horizon: usize,
}

/// Shortest representation that parses back to the same `f64`.
fn number(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_request(context: &[f64], horizon: usize) -> String {
    let mut s = format!("{HEADER}\ncontext_len={} horizon={horizon}\n", context.len());
    for &v in context {
        s.push_str(&number(v));
        s.push('\n');
    }
    s.push_str(END);
    s.push('\n');
    s
}

pub fn parse_request(text: &str) -> Result<Request, String> {
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        return Err("missing protocol header".into());
    }
    let dims = lines.next().ok_or("missing dimensions line")?;
    let mut context_len = None;
    let mut horizon = None;
    for part in dims.split_whitespace() {
        match part.split_once('=') {
            Some(("context_len", v)) => context_len = v.parse::<usize>().ok(),
            Some(("horizon", v)) => horizon = v.parse::<usize>().ok(),
            _ => return Err(format!("unexpected field {part:?}")),
        }
    }
    let (l, h) = context_len.zip(horizon).ok_or("bad dimensions line")?;
    let mut context = Vec::with_capacity(l);
    for _ in 0..l {
        let line = lines.next().ok_or("context ended early")?;
        context.push(line.trim().parse::<f64>().map_err(|_| format!("bad context value {line:?}"))?);
    }
    if lines.next() != Some(END) {
        return Err("missing END after context".into());
    }
    Ok(Request { context, horizon: h })
}

pub fn write_response(values: &[f64]) -> String {
    let mut s = String::new();
    for &v in values {
        s.push_str(&number(v));
        s.push('\n');
    }
    s.push_str(END);
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResponseError {
    /// Fewer than `horizon` values before `END` (or end of output).
    Short { got: usize },
    /// A line that is neither a number nor `END`, or values after `END`.
    Malformed { line: usize, text: String },
    MissingEnd,
    NonFinite { index: usize },
}

/// Parses exactly `horizon` values followed by `END`.
pub fn parse_response(text: &str, horizon: usize) -> Result<Vec<f64>, ResponseError> {
    let mut values = Vec::with_capacity(horizon);
    let mut lines = text.lines().enumerate();
    for (i, line) in lines.by_ref() {
        let line = line.trim_end_matches('\r');
        if line == END {
            if values.len() < horizon {
                return Err(ResponseError::Short { got: values.len() });
            }
            if let Some((j, rest)) = lines.find(|(_, l)| !l.trim().is_empty()) {
                return Err(ResponseError::Malformed { line: j + 1, text: rest.to_string() });
            }
            return Ok(values);
        }
        if values.len() == horizon {
            return Err(ResponseError::Malformed { line: i + 1, text: format!("extra value {line:?}") });
        }
        let v: f64 = line.trim().parse().map_err(|_| ResponseError::Malformed { line: i + 1, text: line.to_string() })?;
        if !v.is_finite() {
            return Err(ResponseError::NonFinite { index: values.len() });
        }
        values.push(v);
    }
    if values.len() < horizon {
        Err(ResponseError::Short { got: values.len() })
    } else {
        Err(ResponseError::MissingEnd)
    }
}
