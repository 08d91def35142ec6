//! FSEG weight container.
//!
//! Little-endian, no padding between records:
//!
//! ```text
//! "FSEG"            4 bytes magic
//! version: u32      = 1
//! count:   u32      number of tensors
//! count × {
//!     name_len: u16
//!     name:     name_len bytes of UTF-8
//!     rank:     u8
//!     dims:     rank × u64
//!     data:     Π dims × f32
//! }
//! ```

use alloc::string::String;
use alloc::vec::Vec;

pub const MAGIC: [u8; 4] = *b"FSEG";
pub const VERSION: u32 = 1;

/// A parameter tensor as stored on disk: name, logical shape and `f32` data.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl NamedTensor {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WeightsError {
    #[error("not an FSEG file (magic {0:02x?})")]
    BadMagic([u8; 4]),
    #[error("unsupported FSEG version {0} (expected {VERSION})")]
    UnsupportedVersion(u32),
    #[error(
        "truncated FSEG data: needed {needed} bytes at offset {offset}, {available} available"
    )]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("tensor #{index} has a name that is not valid UTF-8")]
    InvalidName { index: usize },
    #[error("tensor name `{0}` is longer than 65535 bytes")]
    NameTooLong(String),
    #[error("tensor `{0}` has rank above 255")]
    RankTooLarge(String),
    #[error("tensor `{name}`: shape implies {expected} values, buffer holds {found}")]
    DataLength {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("{0} trailing bytes after the last tensor")]
    TrailingBytes(usize),
    #[error("duplicate tensor `{0}`")]
    DuplicateTensor(String),
    #[error("unknown tensor `{0}` for this model configuration")]
    UnknownTensor(String),
    #[error("tensor `{name}` has shape {found:?}, model expects {expected:?}")]
    DimMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("missing tensors: {}", crate::error::join(.0))]
    MissingTensors(Vec<String>),
}

pub fn encode(tensors: &[NamedTensor]) -> Result<Vec<u8>, WeightsError> {
    let payload: usize = tensors
        .iter()
        .map(|t| 2 + t.name.len() + 1 + 8 * t.shape.len() + 4 * t.data.len())
        .sum();
    let mut out = Vec::with_capacity(12 + payload);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        let name_len =
            u16::try_from(t.name.len()).map_err(|_| WeightsError::NameTooLong(t.name.clone()))?;
        let rank =
            u8::try_from(t.shape.len()).map_err(|_| WeightsError::RankTooLarge(t.name.clone()))?;
        if t.numel() != t.data.len() {
            return Err(WeightsError::DataLength {
                name: t.name.clone(),
                expected: t.numel(),
                found: t.data.len(),
            });
        }
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.push(rank);
        for &d in &t.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WeightsError> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(WeightsError::Truncated {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], WeightsError> {
        Ok(self.take(N)?.try_into().expect("slice has length N"))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<NamedTensor>, WeightsError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.array()?;
    if magic != MAGIC {
        return Err(WeightsError::BadMagic(magic));
    }
    let version = u32::from_le_bytes(r.array()?);
    if version != VERSION {
        return Err(WeightsError::UnsupportedVersion(version));
    }
    let count = u32::from_le_bytes(r.array()?) as usize;
    let mut tensors: Vec<NamedTensor> = Vec::with_capacity(count.min(4096));
    for index in 0..count {
        let name_len = u16::from_le_bytes(r.array()?) as usize;
        let name = core::str::from_utf8(r.take(name_len)?)
            .map_err(|_| WeightsError::InvalidName { index })?
            .into();
        let rank = r.array::<1>()?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(u64::from_le_bytes(r.array()?) as usize);
        }
        let numel = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .ok_or(WeightsError::Truncated {
                offset: r.pos,
                needed: usize::MAX,
                available: bytes.len() - r.pos,
            })?;
        let raw = r.take(numel)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
            .collect();
        if tensors.iter().any(|t: &NamedTensor| t.name == name) {
            return Err(WeightsError::DuplicateTensor(name));
        }
        tensors.push(NamedTensor { name, shape, data });
    }
    if r.pos != bytes.len() {
        return Err(WeightsError::TrailingBytes(bytes.len() - r.pos));
    }
    Ok(tensors)
}
