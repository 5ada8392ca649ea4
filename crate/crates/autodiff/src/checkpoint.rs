//! Flat binary parameter checkpoints.
//!
//! Layout: magic `GCKP`, version `u32`, tensor count `u32`, then for each
//! tensor: name length `u16`, UTF-8 name, rank `u8`, extents `u32` x rank,
//! little-endian values. All integers are little-endian.

use thiserror::Error;

use crate::{ParamSet, Scalar, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint truncated at byte {0}")]
    Truncated(usize),
    #[error("tensor name is not UTF-8")]
    BadName,
    #[error("{0} trailing bytes after the last tensor")]
    Trailing(usize),
    #[error("{0}")]
    Layout(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_checkpoint<T: Scalar>(params: &ParamSet<T>) -> Result<Vec<u8>, CheckpointError> {
    let mut out = Vec::with_capacity(16 + params.numel() * T::BYTES);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let count = u32::try_from(params.len()).map_err(|_| CheckpointError::Layout("too many tensors".into()))?;
    out.extend_from_slice(&count.to_le_bytes());
    for (name, t) in params.iter() {
        let len = u16::try_from(name.len()).map_err(|_| CheckpointError::Layout(format!("name too long: {name}")))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        let rank = u8::try_from(t.rank()).map_err(|_| CheckpointError::Layout(format!("rank too large: {name}")))?;
        out.push(rank);
        for &e in t.shape() {
            let e = u32::try_from(e).map_err(|_| CheckpointError::Layout(format!("extent too large: {name}")))?;
            out.extend_from_slice(&e.to_le_bytes());
        }
        for &v in t.data() {
            v.write_le(&mut out);
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(CheckpointError::Truncated(self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

/// Reads a checkpoint written with the same precision `T`.
pub fn read_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<ParamSet<T>, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).map_err(|_| CheckpointError::BadMagic)? != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version(version));
    }
    let count = r.u32()?;
    let mut params = ParamSet::new();
    for _ in 0..count {
        let len = u16::from_le_bytes(r.take(2)?.try_into().expect("2 bytes")) as usize;
        let name = std::str::from_utf8(r.take(len)?).map_err(|_| CheckpointError::BadName)?.to_string();
        if params.get(&name).is_some() {
            return Err(CheckpointError::Layout(format!("duplicate tensor {name}")));
        }
        let rank = r.take(1)?[0] as usize;
        let shape = (0..rank).map(|_| r.u32().map(|e| e as usize)).collect::<Result<Vec<_>, _>>()?;
        let n: usize = shape.iter().product();
        let payload = r.take(n.checked_mul(T::BYTES).ok_or(CheckpointError::Truncated(r.pos))?)?;
        let data = payload.chunks_exact(T::BYTES).map(T::read_le).collect();
        let t = Tensor::new(shape, data).map_err(|e| CheckpointError::Layout(e.to_string()))?;
        params.push(name, t);
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::Trailing(bytes.len() - r.pos));
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_matches_format() {
        let mut p = ParamSet::<f32>::new();
        p.push("w", Tensor::new(vec![1, 2], vec![1.0, -2.0]).unwrap());
        let b = write_checkpoint(&p).unwrap();
        let mut expected = b"GCKP".to_vec();
        expected.extend(1u32.to_le_bytes());
        expected.extend(1u32.to_le_bytes());
        expected.extend(1u16.to_le_bytes());
        expected.push(b'w');
        expected.push(2);
        expected.extend(1u32.to_le_bytes());
        expected.extend(2u32.to_le_bytes());
        expected.extend(1.0f32.to_le_bytes());
        expected.extend((-2.0f32).to_le_bytes());
        assert_eq!(b, expected);
    }

    #[test]
    fn rejects_corruption() {
        let mut p = ParamSet::<f64>::new();
        p.push("bias", Tensor::from_vec(vec![0.5; 3]));
        let b = write_checkpoint(&p).unwrap();
        assert!(matches!(read_checkpoint::<f64>(&b[..b.len() - 1]), Err(CheckpointError::Truncated(_))));
        assert!(matches!(read_checkpoint::<f64>(b"NOPE"), Err(CheckpointError::BadMagic)));
        let mut extra = b.clone();
        extra.push(0);
        assert!(matches!(read_checkpoint::<f64>(&extra), Err(CheckpointError::Trailing(1))));
        let mut v2 = b;
        v2[4] = 2;
        assert!(matches!(read_checkpoint::<f64>(&v2), Err(CheckpointError::Version(2))));
    }

    proptest! {
        #[test]
        fn round_trip_is_bitwise(
            tensors in prop::collection::vec(
                (prop::collection::vec(1usize..4, 0..4), any::<u64>()),
                0..5,
            )
        ) {
            let mut p = ParamSet::<f64>::new();
            for (i, (shape, seed)) in tensors.iter().enumerate() {
                let n: usize = shape.iter().product();
                let data = (0..n).map(|k| f64::from_bits(seed.wrapping_add(k as u64) % 0x7fe0_0000_0000_0000)).collect();
                p.push(format!("t{i}"), Tensor::new(shape.clone(), data).unwrap());
            }
            let back = read_checkpoint::<f64>(&write_checkpoint(&p).unwrap()).unwrap();
            prop_assert_eq!(back.names(), p.names());
            for (a, b) in back.tensors().iter().zip(p.tensors()) {
                prop_assert_eq!(a.shape(), b.shape());
                let ab: Vec<u64> = a.data().iter().map(|v| v.to_bits()).collect();
                let bb: Vec<u64> = b.data().iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(ab, bb);
            }
        }
    }
}
