//! Binary tensor container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! offset 0   magic "TNSR" (4 bytes)
//! offset 4   u8 version = 1
//! offset 5   u8 order K
//! offset 6   6 reserved zero bytes
//! offset 12  K u64 dimensions
//! ...        prod(dims) f64 values, first-index-fastest
//! ```
//!
//! Round trips are bit-identical. Decoding failures report the byte offset
//! at which the file stopped making sense.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Mat};

const MAGIC: &[u8; 4] = b"TNSR";
const VERSION: u8 = 1;

pub fn write_tensor(path: &Path, t: &DenseTensor) -> Result<()> {
    let mut bytes = Vec::with_capacity(12 + 8 * t.order() + 8 * t.len());
    bytes.extend_from_slice(MAGIC);
    bytes.push(VERSION);
    bytes.push(t.order() as u8);
    bytes.extend_from_slice(&[0u8; 6]);
    for &d in t.dims() {
        bytes.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in t.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<DenseTensor> {
    let bytes = fs::read(path)?;
    decode_tensor(&bytes)
}

pub fn decode_tensor(bytes: &[u8]) -> Result<DenseTensor> {
    if bytes.len() < 4 {
        return Err(Error::format(bytes.len() as u64, "file truncated in magic"));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format(
            0,
            format!("bad magic {:?}, expected \"TNSR\"", &bytes[..4]),
        ));
    }
    if bytes.len() < 6 {
        return Err(Error::format(
            bytes.len() as u64,
            "file truncated in header",
        ));
    }
    if bytes[4] != VERSION {
        return Err(Error::format(
            4,
            format!("unsupported version {}", bytes[4]),
        ));
    }
    let order = bytes[5] as usize;
    if order == 0 {
        return Err(Error::format(5, "tensor order must be at least 1"));
    }
    let header = 12 + 8 * order;
    if bytes.len() < header {
        return Err(Error::format(
            bytes.len() as u64,
            format!("file truncated in dimension list (need {header} header bytes)"),
        ));
    }

    let mut dims = Vec::with_capacity(order);
    for k in 0..order {
        let at = 12 + 8 * k;
        let d = u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
        if d == 0 {
            return Err(Error::format(at as u64, format!("dimension {k} is zero")));
        }
        dims.push(d as usize);
    }
    let total = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::format(12, "dimension product overflows"))?;

    let expected = header + 8 * total;
    match bytes.len().cmp(&expected) {
        std::cmp::Ordering::Less => {
            let complete = (bytes.len() - header) / 8;
            return Err(Error::format(
                (header + 8 * complete) as u64,
                format!("payload truncated: expected {total} values, found {complete}"),
            ));
        }
        std::cmp::Ordering::Greater => {
            return Err(Error::format(
                expected as u64,
                format!("{} trailing bytes after payload", bytes.len() - expected),
            ));
        }
        std::cmp::Ordering::Equal => {}
    }

    let values: Vec<f64> = bytes[header..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    DenseTensor::new(dims, values)
}

/// Write a matrix as an order-2 tensor file.
pub fn write_matrix(path: &Path, m: &Mat) -> Result<()> {
    write_tensor(path, &DenseTensor::from_matrix(m))
}

/// Read an order-2 tensor file as a matrix.
pub fn read_matrix(path: &Path) -> Result<Mat> {
    read_tensor(path)?.to_matrix()
}
