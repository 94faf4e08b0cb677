//! `O3DF` dense matrix container: magic, u32 version, u64 rows, u64 cols,
//! then rows*cols little-endian f32 values in row-major order.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"O3DF";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "matrix data",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    context: "matrix row",
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.rows as u64).to_le_bytes());
        out.extend_from_slice(&(self.cols as u64).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            let mut found = [0u8; 4];
            for (dst, src) in found.iter_mut().zip(bytes) {
                *dst = *src;
            }
            return Err(Error::BadMagic {
                path: path.to_owned(),
                found,
            });
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format {
                path: path.to_owned(),
                reason: "header shorter than 24 bytes".into(),
            });
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::UnsupportedVersion {
                path: path.to_owned(),
                version,
            });
        }
        let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let expected = rows.checked_mul(cols).ok_or_else(|| Error::Format {
            path: path.to_owned(),
            reason: format!("dimensions {rows}x{cols} overflow"),
        })?;
        let payload = &bytes[HEADER_LEN..];
        let found = (payload.len() / 4) as u64;
        if found < expected {
            return Err(Error::Truncated {
                path: path.to_owned(),
                expected,
                found,
            });
        }
        if payload.len() as u64 != expected * 4 {
            return Err(Error::Format {
                path: path.to_owned(),
                reason: format!("{} trailing bytes after payload", payload.len() as u64 - expected * 4),
            });
        }
        let mut data = Vec::with_capacity(expected as usize);
        for (i, chunk) in payload.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    path: path.to_owned(),
                    index: i as u64,
                });
            }
            data.push(v);
        }
        Ok(Matrix {
            rows: rows as usize,
            cols: cols as usize,
            data,
        })
    }
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Matrix::from_bytes(&bytes, path)
}

pub fn save_matrix(path: impl AsRef<Path>, matrix: &Matrix) -> Result<()> {
    let path = path.as_ref();
    if matrix.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "refusing to write non-finite values to {}",
            path.display()
        )));
    }
    super::bundle::ensure_parent(path)?;
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&matrix.to_bytes()).map_err(|e| Error::io(path, e))
}
