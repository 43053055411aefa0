//! `GEMB` little-endian matrix container.
//!
//! | bytes | content |
//! |-------|---------|
//! | 0..4  | magic `GEMB` |
//! | 4..8  | version, `u32` = 1 |
//! | 8..12 | rows, `u32` |
//! | 12..16| cols, `u32` |
//! | 16..  | rows×cols `f32`, row-major |

use ndarray::Array2;

use crate::error::{dim_mismatch, Error, Result};
use crate::matrix::FeatureMatrix;

pub const MAGIC: [u8; 4] = *b"GEMB";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;

/// Raw decoded payload; entries may still be non-finite.
#[derive(Clone, Debug, PartialEq)]
pub struct RawMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

fn read_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("4-byte slice"))
}

pub fn decode(bytes: &[u8]) -> Result<RawMatrix> {
    if bytes.len() < 4 {
        return Err(Error::Truncated { offset: 0, expected: HEADER_LEN, found: bytes.len() });
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4-byte slice");
    if magic != MAGIC {
        return Err(Error::MagicMismatch { found: magic });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated { offset: 0, expected: HEADER_LEN, found: bytes.len() });
    }
    let version = read_u32(bytes, 4);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let rows = read_u32(bytes, 8) as usize;
    let cols = read_u32(bytes, 12) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| dim_mismatch(format!("{rows}x{cols} payload overflows")))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(Error::Truncated { offset: HEADER_LEN, expected, found: payload.len() });
    }
    if payload.len() > expected {
        return Err(Error::TrailingBytes { offset: HEADER_LEN + expected, count: payload.len() - expected });
    }
    let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk"))).collect();
    Ok(RawMatrix { rows, cols, data })
}

/// Decodes and validates into a [`FeatureMatrix`].
pub fn decode_matrix(bytes: &[u8]) -> Result<FeatureMatrix> {
    let raw = decode(bytes)?;
    raw.into_matrix()
}

impl RawMatrix {
    pub fn into_matrix(self) -> Result<FeatureMatrix> {
        if self.rows == 0 || self.cols == 0 {
            return Err(dim_mismatch(format!("matrix must be non-empty, got {}x{}", self.rows, self.cols)));
        }
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { row: i / self.cols, col: i % self.cols });
        }
        let values = Array2::from_shape_vec((self.rows, self.cols), self.data.into_iter().map(f64::from).collect())
            .map_err(|e| dim_mismatch(e.to_string()))?;
        FeatureMatrix::new(values)
    }
}

/// Encodes a matrix. Values are narrowed to `f32`; anything that overflows
/// `f32` is rejected rather than written as infinity.
pub fn encode(matrix: &FeatureMatrix) -> Result<Vec<u8>> {
    let (rows, cols) = (matrix.n_rows(), matrix.n_cols());
    let rows32 = u32::try_from(rows).map_err(|_| dim_mismatch(format!("{rows} rows exceed u32")))?;
    let cols32 = u32::try_from(cols).map_err(|_| dim_mismatch(format!("{cols} cols exceed u32")))?;
    let mut out = Vec::with_capacity(HEADER_LEN + rows * cols * 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&rows32.to_le_bytes());
    out.extend_from_slice(&cols32.to_le_bytes());
    for ((row, col), &v) in matrix.as_array().indexed_iter() {
        let narrowed = v as f32;
        if !narrowed.is_finite() {
            return Err(Error::NonFiniteValue { row, col });
        }
        out.extend_from_slice(&narrowed.to_le_bytes());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(rows: u32, cols: u32) -> Vec<u8> {
        let mut b = MAGIC.to_vec();
        b.extend_from_slice(&1u32.to_le_bytes());
        b.extend_from_slice(&rows.to_le_bytes());
        b.extend_from_slice(&cols.to_le_bytes());
        b
    }

    #[test]
    fn header_layout_is_exact() {
        let m = FeatureMatrix::from_rows(&[vec![1.0, -2.5]]).unwrap();
        let bytes = encode(&m).unwrap();
        assert_eq!(&bytes[..4], &[0x47, 0x45, 0x4D, 0x42]);
        assert_eq!(&bytes[4..16], &[1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[20..24], &(-2.5f32).to_le_bytes());
        assert_eq!(bytes.len(), 24);
    }

    #[test]
    fn rejects_bad_magic() {
        let mut b = header(1, 1);
        b[0] = b'X';
        b.extend_from_slice(&0f32.to_le_bytes());
        assert!(matches!(decode(&b), Err(Error::MagicMismatch { .. })));
    }

    #[test]
    fn rejects_truncation_and_trailing() {
        let mut b = header(2, 2);
        b.extend_from_slice(&[0u8; 12]);
        match decode(&b) {
            Err(Error::Truncated { offset, expected, found }) => {
                assert_eq!((offset, expected, found), (16, 16, 12));
            }
            other => panic!("{other:?}"),
        }
        b.extend_from_slice(&[0u8; 5]);
        assert!(matches!(decode(&b), Err(Error::TrailingBytes { offset: 32, count: 1 })));
        assert!(matches!(decode(&b[..7]), Err(Error::Truncated { .. })));
    }

    #[test]
    fn rejects_wrong_version_and_overflow() {
        let mut b = header(1, 1);
        b[4] = 2;
        assert!(matches!(decode(&b), Err(Error::UnsupportedVersion(2))));
        let b = header(u32::MAX, u32::MAX);
        // 64-bit usize does not overflow here, so this is a truncation
        assert!(decode(&b).is_err());
    }

    #[test]
    fn locates_nan() {
        let mut b = header(3, 2);
        for i in 0..6 {
            let v = if i == 5 { f32::NAN } else { i as f32 };
            b.extend_from_slice(&v.to_le_bytes());
        }
        assert!(matches!(decode_matrix(&b), Err(Error::NonFiniteValue { row: 2, col: 1 })));
    }

    #[test]
    fn zero_dims_are_rejected() {
        let b = header(0, 3);
        assert!(matches!(decode_matrix(&b), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn encode_rejects_f32_overflow() {
        let m = FeatureMatrix::from_rows(&[vec![1e300]]).unwrap();
        assert!(matches!(encode(&m), Err(Error::NonFiniteValue { row: 0, col: 0 })));
    }
}
