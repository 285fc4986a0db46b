//! RDTF: the minimal binary tensor container shared with the exporter.
//!
//! Layout (all integers little-endian):
//!
//! | offset      | size       | field                                  |
//! |-------------|------------|----------------------------------------|
//! | 0           | 4          | magic `b"RDTF"`                        |
//! | 4           | 1          | version, currently `1`                 |
//! | 5           | 1          | `ndim`, 1..=4                          |
//! | 6           | 4 · ndim   | dims as `u32`, each ≥ 1                |
//! | 6 + 4·ndim  | 1          | dtype: `0` = f32, `1` = u8             |
//! | 7 + 4·ndim  | …          | payload, row-major, last dim fastest   |

use std::fs;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, Map, Mask};

pub const MAGIC: &[u8; 4] = b"RDTF";
pub const VERSION: u8 = 1;
pub const MAX_NDIM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    F32 = 0,
    U8 = 1,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::U8 => 1,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(DType::F32),
            1 => Ok(DType::U8),
            other => Err(Error::UnsupportedDtype(other)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    U8(Vec<u8>),
}

impl TensorData {
    pub fn dtype(&self) -> DType {
        match self {
            TensorData::F32(_) => DType::F32,
            TensorData::U8(_) => DType::U8,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// An n-dimensional (1 ≤ n ≤ 4) tensor with a validated shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: TensorData,
}

/// Shape and dtype of an RDTF file, read without touching the payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorHeader {
    pub dims: Vec<usize>,
    pub dtype: DType,
}

fn element_count(dims: &[usize]) -> Result<usize> {
    let as_u32 = || dims.iter().map(|&d| d as u32).collect::<Vec<_>>();
    if dims.is_empty() || dims.len() > MAX_NDIM || dims.contains(&0) {
        return Err(Error::DimOverflow(as_u32()));
    }
    if dims.iter().any(|&d| d > u32::MAX as usize) {
        return Err(Error::DimOverflow(as_u32()));
    }
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::DimOverflow(as_u32()))
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: TensorData) -> Result<Self> {
        let n = element_count(&dims)?;
        if n != data.len() {
            return Err(Error::DimMismatch(format!(
                "dims {:?} need {} values, got {}",
                dims,
                n,
                data.len()
            )));
        }
        Ok(Tensor { dims, data })
    }

    pub fn from_f32(dims: Vec<usize>, values: Vec<f32>) -> Result<Self> {
        Tensor::new(dims, TensorData::F32(values))
    }

    pub fn from_u8(dims: Vec<usize>, values: Vec<u8>) -> Result<Self> {
        Tensor::new(dims, TensorData::U8(values))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn into_data(self) -> TensorData {
        self.data
    }

    pub fn as_f32(&self) -> Option<&[f32]> {
        match &self.data {
            TensorData::F32(v) => Some(v),
            TensorData::U8(_) => None,
        }
    }

    pub fn as_u8(&self) -> Option<&[u8]> {
        match &self.data {
            TensorData::U8(v) => Some(v),
            TensorData::F32(_) => None,
        }
    }

    /// Serialize to the RDTF byte layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let header_len = 7 + 4 * self.dims.len();
        let mut out = Vec::with_capacity(header_len + self.data.len() * self.dtype().size());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.dims.len() as u8);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.push(self.dtype() as u8);
        match &self.data {
            TensorData::F32(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
            TensorData::U8(v) => out.extend_from_slice(v),
        }
        out
    }

    /// Parse RDTF bytes. `origin` is only used in error messages.
    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let (header, offset) = parse_header(bytes, origin)?;
        let payload = &bytes[offset..];
        let n = element_count(&header.dims)?;
        let expected = n as u64 * header.dtype.size() as u64;
        if payload.len() as u64 != expected {
            return Err(Error::TruncatedPayload {
                expected,
                found: payload.len() as u64,
            });
        }
        let data = match header.dtype {
            DType::F32 => TensorData::F32(
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            ),
            DType::U8 => TensorData::U8(payload.to_vec()),
        };
        Ok(Tensor {
            dims: header.dims,
            data,
        })
    }
}

fn parse_header(bytes: &[u8], origin: &Path) -> Result<(TensorHeader, usize)> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic(origin.to_path_buf()));
    }
    let short = |needed: usize| Error::TruncatedPayload {
        expected: needed as u64,
        found: bytes.len() as u64,
    };
    if bytes.len() < 6 {
        return Err(short(6));
    }
    if bytes[4] != VERSION {
        return Err(Error::UnsupportedVersion(bytes[4]));
    }
    let ndim = bytes[5] as usize;
    if ndim == 0 || ndim > MAX_NDIM {
        return Err(Error::DimOverflow(vec![]));
    }
    let dtype_at = 6 + 4 * ndim;
    if bytes.len() < dtype_at + 1 {
        return Err(short(dtype_at + 1));
    }
    let dims: Vec<usize> = bytes[6..dtype_at]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    element_count(&dims)?;
    let dtype = DType::from_tag(bytes[dtype_at])?;
    Ok((TensorHeader { dims, dtype }, dtype_at + 1))
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Tensor::from_bytes(&bytes, path)
}

pub fn save_tensor(tensor: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, tensor.to_bytes()).map_err(|e| Error::io(path, e))
}

/// Read and validate only the header, checking the file length against it.
pub fn read_header(path: impl AsRef<Path>) -> Result<TensorHeader> {
    let path = path.as_ref();
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let file_len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    let mut head = Vec::with_capacity(7 + 4 * MAX_NDIM);
    file.by_ref()
        .take((7 + 4 * MAX_NDIM) as u64)
        .read_to_end(&mut head)
        .map_err(|e| Error::io(path, e))?;
    let (header, offset) = parse_header(&head, path)?;
    let expected = element_count(&header.dims)? as u64 * header.dtype.size() as u64;
    let found = file_len - offset as u64;
    if found != expected {
        return Err(Error::TruncatedPayload { expected, found });
    }
    Ok(header)
}

impl From<&Map> for Tensor {
    fn from(map: &Map) -> Self {
        Tensor {
            dims: vec![map.width(), map.height()],
            data: TensorData::F32(map.as_slice().iter().map(|&v| v as f32).collect()),
        }
    }
}

impl From<&Mask> for Tensor {
    fn from(mask: &Mask) -> Self {
        Tensor {
            dims: vec![mask.width(), mask.height()],
            data: TensorData::U8(mask.as_slice().to_vec()),
        }
    }
}

impl Tensor {
    /// Interpret a 2-D u8 tensor as a binary mask.
    pub fn to_mask(&self) -> Result<Mask> {
        let values = self
            .as_u8()
            .ok_or_else(|| Error::DimMismatch("mask tensor must be u8".into()))?;
        if self.dims.len() != 2 {
            return Err(Error::DimMismatch(format!(
                "mask tensor must be 2-D, got {:?}",
                self.dims
            )));
        }
        let mask = Grid::from_vec(self.dims[0], self.dims[1], values.to_vec())?;
        if !mask.is_binary() {
            return Err(Error::NonBinaryMask("mask".into()));
        }
        Ok(mask)
    }

    /// Split a 3-D u8 tensor `P × W × H` into `P` binary masks.
    pub fn to_mask_stack(&self) -> Result<Vec<Mask>> {
        let values = self
            .as_u8()
            .ok_or_else(|| Error::DimMismatch("mask stack must be u8".into()))?;
        if self.dims.len() != 3 {
            return Err(Error::DimMismatch(format!(
                "mask stack must be 3-D, got {:?}",
                self.dims
            )));
        }
        let (w, h) = (self.dims[1], self.dims[2]);
        values
            .chunks_exact(w * h)
            .enumerate()
            .map(|(i, chunk)| {
                let mask = Grid::from_vec(w, h, chunk.to_vec())?;
                if !mask.is_binary() {
                    return Err(Error::NonBinaryMask(format!("proposal {i}")));
                }
                Ok(mask)
            })
            .collect()
    }

    /// Stack equally-sized masks into a `P × W × H` u8 tensor.
    pub fn from_mask_stack(masks: &[Mask]) -> Result<Self> {
        let first = masks.first().ok_or(Error::EmptyProposalSet)?;
        let mut values = Vec::with_capacity(masks.len() * first.len());
        for m in masks {
            first.ensure_same_dims(m)?;
            values.extend_from_slice(m.as_slice());
        }
        Tensor::from_u8(vec![masks.len(), first.width(), first.height()], values)
    }

    /// Rows of a 1-D (single row) or 2-D f32 tensor as `f64` vectors.
    pub fn to_rows(&self) -> Result<Vec<Vec<f64>>> {
        let values = self
            .as_f32()
            .ok_or_else(|| Error::DimMismatch("embedding tensor must be f32".into()))?;
        let width = match self.dims.as_slice() {
            [d] => *d,
            [_, d] => *d,
            other => {
                return Err(Error::DimMismatch(format!(
                    "embedding tensor must be 1-D or 2-D, got {other:?}"
                )))
            }
        };
        Ok(values
            .chunks_exact(width)
            .map(|row| row.iter().map(|&v| f64::from(v)).collect())
            .collect())
    }
}
