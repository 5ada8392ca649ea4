//! Black-box forecasters run as child processes over the line protocol.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use wait_timeout::ChildExt;

use crate::protocol::{parse_response, write_request, ResponseError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    /// One child invocation per channel and window.
    #[default]
    Univariate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalForecasterSpec {
    /// Program followed by its arguments.
    pub command: Vec<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default)]
    pub channel_mode: ChannelMode,
}

fn default_timeout() -> f64 {
    60.0
}

impl ExternalForecasterSpec {
    pub fn new<S: Into<String>>(command: impl IntoIterator<Item = S>, timeout_secs: f64) -> Self {
        Self { command: command.into_iter().map(Into::into).collect(), timeout_secs, channel_mode: ChannelMode::Univariate }
    }

    pub fn validate(&self) -> Result<(), ExternalError> {
        if self.command.first().is_none_or(|p| p.is_empty()) {
            return Err(ExternalError::Spec("command must name a program".into()));
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(ExternalError::Spec(format!("timeout must be positive, got {}", self.timeout_secs)));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ExternalError {
    #[error("invalid external forecaster: {0}")]
    Spec(String),
    #[error("channel {channel}: cannot start {program}: {source}")]
    Spawn { channel: String, program: String, source: std::io::Error },
    #[error("channel {channel}: context contains a non-finite value at position {index}")]
    BadContext { channel: String, index: usize },
    #[error("channel {channel}: child exited with {status}: {stderr}")]
    ExitStatus { channel: String, status: String, stderr: String },
    #[error("channel {channel}: no response within {secs} s; child terminated")]
    Timeout { channel: String, secs: f64 },
    #[error("channel {channel}: short output, {got} of {expected} values")]
    ShortOutput { channel: String, expected: usize, got: usize },
    #[error("channel {channel}: malformed output at line {line}: {text}")]
    Malformed { channel: String, line: usize, text: String },
    #[error("channel {channel}: non-finite forecast value at step {index}")]
    NonFinite { channel: String, index: usize },
    #[error("channel {channel}: {source}")]
    Io { channel: String, source: std::io::Error },
}

/// Runs the child once for a single series.
pub fn forecast_series(
    spec: &ExternalForecasterSpec,
    channel: &str,
    context: &[f64],
    horizon: usize,
) -> Result<Vec<f64>, ExternalError> {
    spec.validate()?;
    if let Some(index) = context.iter().position(|v| !v.is_finite()) {
        return Err(ExternalError::BadContext { channel: channel.into(), index });
    }
    let io = |source| ExternalError::Io { channel: channel.into(), source };
    let mut child = Command::new(&spec.command[0])
        .args(&spec.command[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| ExternalError::Spawn { channel: channel.into(), program: spec.command[0].clone(), source })?;

    let request = write_request(context, horizon);
    let mut stdin = child.stdin.take().expect("piped");
    // A child that exits without reading makes this fail with a broken pipe;
    // its exit status is the more useful error, so the write result is ignored.
    let writer = thread::spawn(move || {
        let _ = stdin.write_all(request.as_bytes());
    });
    let mut stdout = child.stdout.take().expect("piped");
    let reader = thread::spawn(move || {
        let mut s = Vec::new();
        stdout.read_to_end(&mut s).map(|_| s)
    });
    let mut stderr = child.stderr.take().expect("piped");
    let err_reader = thread::spawn(move || {
        let mut s = Vec::new();
        let _ = stderr.read_to_end(&mut s);
        s
    });

    let status = match child.wait_timeout(Duration::from_secs_f64(spec.timeout_secs)).map_err(io)? {
        Some(status) => status,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(ExternalError::Timeout { channel: channel.into(), secs: spec.timeout_secs });
        }
    };
    let _ = writer.join();
    let out = reader.join().expect("reader thread").map_err(io)?;
    let err = err_reader.join().expect("stderr thread");
    if !status.success() {
        let stderr = String::from_utf8_lossy(&err).trim().chars().take(500).collect();
        return Err(ExternalError::ExitStatus { channel: channel.into(), status: status.to_string(), stderr });
    }
    let text = String::from_utf8(out).map_err(|_| ExternalError::Malformed {
        channel: channel.into(),
        line: 0,
        text: "output is not UTF-8".into(),
    })?;
    parse_response(&text, horizon).map_err(|e| match e {
        ResponseError::Short { got } => ExternalError::ShortOutput { channel: channel.into(), expected: horizon, got },
        ResponseError::Malformed { line, text } => ExternalError::Malformed { channel: channel.into(), line, text },
        ResponseError::MissingEnd => {
            ExternalError::Malformed { channel: channel.into(), line: horizon + 1, text: "missing END".into() }
        }
        ResponseError::NonFinite { index } => ExternalError::NonFinite { channel: channel.into(), index },
    })
}

/// Forecast `[H x C]` for a row-major `[L x C]` context, one invocation per
/// channel. Values are passed on the scale given (the benchmark passes raw
/// prices).
pub fn forecast_external(
    spec: &ExternalForecasterSpec,
    channels: &[String],
    context: &[f64],
    horizon: usize,
) -> Result<Vec<f64>, ExternalError> {
    let c = channels.len();
    if c == 0 || context.len() % c != 0 {
        return Err(ExternalError::Spec(format!("context of {} values does not split into {c} channels", context.len())));
    }
    let mut out = vec![0.0; horizon * c];
    for (ci, name) in channels.iter().enumerate() {
        let series: Vec<f64> = context.iter().skip(ci).step_by(c).copied().collect();
        for (h, v) in forecast_series(spec, name, &series, horizon)?.into_iter().enumerate() {
            out[h * c + ci] = v;
        }
    }
    Ok(out)
}
