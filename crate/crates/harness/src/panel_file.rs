//! Binary panel files.
//!
//! Layout (little-endian): magic `GPNL`, version `u32`, start as Unix seconds
//! `i64`, channel count `u32`, hour count `u64`, then each channel name as
//! `u16` length plus UTF-8 bytes, the provenance string the same way, and
//! finally `hours x channels` `f64` values in row-major order. Gaps are NaN.

use std::path::Path;

use chrono::DateTime;
use gridcast_core::PricePanel;

use crate::HarnessError;

pub const PANEL_MAGIC: &[u8; 4] = b"GPNL";
pub const PANEL_VERSION: u32 = 1;

fn put_str(out: &mut Vec<u8>, s: &str) -> Result<(), String> {
    let len = u16::try_from(s.len()).map_err(|_| format!("string too long: {s}"))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

pub fn encode_panel(panel: &PricePanel) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + panel.values().len() * 8);
    out.extend_from_slice(PANEL_MAGIC);
    out.extend_from_slice(&PANEL_VERSION.to_le_bytes());
    out.extend_from_slice(&panel.start().timestamp().to_le_bytes());
    out.extend_from_slice(&(panel.n_channels() as u32).to_le_bytes());
    out.extend_from_slice(&(panel.n_hours() as u64).to_le_bytes());
    for c in panel.channels() {
        put_str(&mut out, c).expect("channel names are short");
    }
    let provenance: String = panel.provenance().chars().take(4096).collect();
    put_str(&mut out, &provenance).expect("truncated");
    for v in panel.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or("truncated panel file")?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], String> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn string(&mut self) -> Result<String, String> {
        let len = u16::from_le_bytes(self.array()?) as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| "name is not UTF-8".to_string())
    }
}

pub fn decode_panel(bytes: &[u8]) -> Result<PricePanel, String> {
    let mut r = Cursor { bytes, pos: 0 };
    if r.take(4).map_err(|_| "not a panel file")? != PANEL_MAGIC {
        return Err("not a panel file (bad magic)".into());
    }
    let version = u32::from_le_bytes(r.array()?);
    if version != PANEL_VERSION {
        return Err(format!("unsupported panel version {version}"));
    }
    let start = i64::from_le_bytes(r.array()?);
    let start = DateTime::from_timestamp(start, 0).ok_or("start time out of range")?;
    let n_channels = u32::from_le_bytes(r.array()?) as usize;
    let n_hours = usize::try_from(u64::from_le_bytes(r.array()?)).map_err(|_| "hour count too large")?;
    let channels = (0..n_channels).map(|_| r.string()).collect::<Result<Vec<_>, _>>()?;
    let provenance = r.string()?;
    let n = n_hours.checked_mul(n_channels).and_then(|n| n.checked_mul(8)).ok_or("panel too large")?;
    let values = r.take(n)?.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    PricePanel::new(start, channels, values, provenance).map_err(|e| e.to_string())
}

pub fn write_panel(path: &Path, panel: &PricePanel) -> Result<(), HarnessError> {
    std::fs::write(path, encode_panel(panel)).map_err(|e| HarnessError::io(path, e))
}

pub fn read_panel(path: &Path) -> Result<PricePanel, HarnessError> {
    let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    decode_panel(&bytes).map_err(|msg| HarnessError::Format { path: path.to_path_buf(), msg })
}
