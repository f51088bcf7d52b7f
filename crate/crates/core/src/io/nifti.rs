//! Minimal NIfTI-1 ingestion: uncompressed single-file volumes only.
//!
//! Supported: 348-byte header, magic `n+1\0`, `dim[0] == 3`, float32 or
//! float64 data, little-endian, no scaling (`scl_slope` 0 or 1 with zero
//! intercept). Everything else is rejected with a distinct error; this is an
//! ingestion path, not a neuroimaging stack.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

const HEADER_LEN: usize = 348;
const DT_FLOAT32: i16 = 16;
const DT_FLOAT64: i16 = 64;

/// A decoded volume plus voxel-spacing metadata.
#[derive(Debug, Clone)]
pub struct NiftiVolume {
    /// Order-3 tensor; NIfTI's x-fastest storage maps directly onto the
    /// first-index-fastest linearization.
    pub volume: DenseTensor,
    /// Voxel spacing from `pixdim[1..=3]`.
    pub pixdim: [f64; 3],
}

pub fn read_nifti1(path: &Path) -> Result<NiftiVolume> {
    let bytes = std::fs::read(path)?;
    decode_nifti1(&bytes)
}

pub fn decode_nifti1(bytes: &[u8]) -> Result<NiftiVolume> {
    if bytes.len() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b {
        return Err(Error::format(
            0,
            "compressed NIfTI (gzip) is unsupported; decompress to .nii first",
        ));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(
            bytes.len() as u64,
            format!("file shorter than the {HEADER_LEN}-byte NIfTI-1 header"),
        ));
    }

    let i32_at = |at: usize| i32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
    let i16_at = |at: usize| i16::from_le_bytes(bytes[at..at + 2].try_into().expect("2 bytes"));
    let f32_at = |at: usize| f32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));

    let sizeof_hdr = i32_at(0);
    if sizeof_hdr != HEADER_LEN as i32 {
        return Err(Error::format(
            0,
            format!("sizeof_hdr is {sizeof_hdr}, expected 348 (wrong format or byte order)"),
        ));
    }
    if &bytes[344..348] != b"n+1\0" {
        return Err(Error::format(344, "magic is not \"n+1\\0\""));
    }

    let ndim = i16_at(40);
    if ndim != 3 {
        return Err(Error::format(
            40,
            format!("only 3-dimensional volumes are supported, dim[0] = {ndim}"),
        ));
    }
    let dims = [i16_at(42) as i64, i16_at(44) as i64, i16_at(46) as i64];
    if dims.iter().any(|&d| d < 1) {
        return Err(Error::format(
            42,
            format!("non-positive dimensions {dims:?}"),
        ));
    }
    let dims = [dims[0] as usize, dims[1] as usize, dims[2] as usize];

    let datatype = i16_at(70);
    if datatype != DT_FLOAT32 && datatype != DT_FLOAT64 {
        return Err(Error::format(
            70,
            format!("unsupported datatype {datatype}; only float32 (16) and float64 (64)"),
        ));
    }

    let scl_slope = f32_at(112);
    let scl_inter = f32_at(116);
    if scl_slope != 0.0 && scl_slope != 1.0 {
        return Err(Error::format(
            112,
            format!("scl_slope {scl_slope} requires value scaling, which is unsupported"),
        ));
    }
    if scl_slope != 0.0 && scl_inter != 0.0 && !scl_inter.is_nan() {
        return Err(Error::format(
            116,
            format!("scl_inter {scl_inter} requires value scaling, which is unsupported"),
        ));
    }

    let vox_offset = f32_at(108);
    if !vox_offset.is_finite() || vox_offset < HEADER_LEN as f32 || vox_offset.fract() != 0.0 {
        return Err(Error::format(108, format!("bad vox_offset {vox_offset}")));
    }
    let start = vox_offset as usize;

    let n = dims[0] * dims[1] * dims[2];
    let elem = if datatype == DT_FLOAT32 { 4 } else { 8 };
    let need = start + n * elem;
    if bytes.len() < need {
        let complete = bytes.len().saturating_sub(start) / elem;
        return Err(Error::format(
            (start + complete * elem) as u64,
            format!("payload truncated: expected {n} values, found {complete}"),
        ));
    }

    let mut values = Vec::with_capacity(n);
    if datatype == DT_FLOAT32 {
        for c in bytes[start..need].chunks_exact(4) {
            values.push(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64);
        }
    } else {
        for c in bytes[start..need].chunks_exact(8) {
            values.push(f64::from_le_bytes(c.try_into().expect("8 bytes")));
        }
    }

    let pixdim = [f32_at(80) as f64, f32_at(84) as f64, f32_at(88) as f64];
    Ok(NiftiVolume {
        volume: DenseTensor::new(dims.to_vec(), values)?,
        pixdim,
    })
}

#[cfg(test)]
pub(crate) fn build_test_nifti(dims: [usize; 3], datatype: i16, values: &[f64]) -> Vec<u8> {
    let mut bytes = vec![0u8; HEADER_LEN + 4];
    bytes[0..4].copy_from_slice(&348i32.to_le_bytes());
    bytes[40..42].copy_from_slice(&3i16.to_le_bytes());
    bytes[42..44].copy_from_slice(&(dims[0] as i16).to_le_bytes());
    bytes[44..46].copy_from_slice(&(dims[1] as i16).to_le_bytes());
    bytes[46..48].copy_from_slice(&(dims[2] as i16).to_le_bytes());
    bytes[70..72].copy_from_slice(&datatype.to_le_bytes());
    let bitpix: i16 = if datatype == DT_FLOAT32 { 32 } else { 64 };
    bytes[72..74].copy_from_slice(&bitpix.to_le_bytes());
    for (k, pd) in [1.0f32, 2.0, 3.0].iter().enumerate() {
        bytes[80 + 4 * k..84 + 4 * k].copy_from_slice(&pd.to_le_bytes());
    }
    bytes[108..112].copy_from_slice(&352.0f32.to_le_bytes());
    bytes[112..116].copy_from_slice(&1.0f32.to_le_bytes());
    bytes[344..348].copy_from_slice(b"n+1\0");
    for &v in values {
        if datatype == DT_FLOAT32 {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        } else {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    bytes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_built_float32_volume() {
        let values: Vec<f64> = (1..=8).map(|v| v as f64).collect();
        let bytes = build_test_nifti([2, 2, 2], DT_FLOAT32, &values);
        let vol = decode_nifti1(&bytes).unwrap();
        assert_eq!(vol.volume.dims(), &[2, 2, 2]);
        assert_eq!(vol.volume.values(), values.as_slice());
        assert_eq!(vol.pixdim, [1.0, 2.0, 3.0]);
    }

    #[test]
    fn float64_payload() {
        let values: Vec<f64> = (0..6).map(|v| 0.1 * v as f64).collect();
        let bytes = build_test_nifti([3, 2, 1], DT_FLOAT64, &values);
        let vol = decode_nifti1(&bytes).unwrap();
        for (a, b) in vol.volume.values().iter().zip(&values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn gzip_magic_is_a_distinct_error() {
        let err = decode_nifti1(&[0x1f, 0x8b, 0x08, 0x00]).unwrap_err();
        assert!(err.to_string().contains("gzip"), "{err}");
    }

    #[test]
    fn int16_datatype_rejected() {
        let bytes = build_test_nifti([2, 2, 2], 4, &[0.0; 8]);
        let err = decode_nifti1(&bytes).unwrap_err();
        assert!(err.to_string().contains("datatype 4"), "{err}");
    }

    #[test]
    fn wrong_magic_and_wrong_sizeof_hdr_are_distinct() {
        let good = build_test_nifti([1, 1, 1], DT_FLOAT32, &[1.0]);

        let mut bad_magic = good.clone();
        bad_magic[344..348].copy_from_slice(b"ni1\0");
        let err = decode_nifti1(&bad_magic).unwrap_err();
        assert!(err.to_string().contains("magic"), "{err}");

        let mut bad_size = good.clone();
        bad_size[0..4].copy_from_slice(&500i32.to_le_bytes());
        let err = decode_nifti1(&bad_size).unwrap_err();
        assert!(err.to_string().contains("sizeof_hdr"), "{err}");
    }

    #[test]
    fn four_dimensional_file_rejected() {
        let mut bytes = build_test_nifti([2, 2, 2], DT_FLOAT32, &[0.0; 8]);
        bytes[40..42].copy_from_slice(&4i16.to_le_bytes());
        let err = decode_nifti1(&bytes).unwrap_err();
        assert!(err.to_string().contains("dim[0]"), "{err}");
    }

    #[test]
    fn scaled_data_rejected() {
        let mut bytes = build_test_nifti([1, 1, 1], DT_FLOAT32, &[1.0]);
        bytes[112..116].copy_from_slice(&2.0f32.to_le_bytes());
        let err = decode_nifti1(&bytes).unwrap_err();
        assert!(err.to_string().contains("scl_slope"), "{err}");
    }

    #[test]
    fn truncated_payload_offset() {
        let mut bytes = build_test_nifti([2, 2, 2], DT_FLOAT32, &[1.0; 8]);
        bytes.truncate(bytes.len() - 4);
        match decode_nifti1(&bytes) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 352 + 7 * 4),
            other => panic!("expected format error, got {other:?}"),
        }
    }
}
