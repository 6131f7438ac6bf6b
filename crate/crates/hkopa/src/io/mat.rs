//! Binary matrix format: magic `KOPAMAT1`, little-endian u32 rows and cols,
//! then rows·cols little-endian IEEE-754 doubles in row-major order.
//! Round trips are bit-exact.

use std::fs;
use std::path::Path;

use crate::error::Error;
use crate::matrix::DenseMatrix;
use crate::Result;

const MAGIC: &[u8; 8] = b"KOPAMAT1";

pub fn write_matrix(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::with_capacity(16 + 8 * m.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for &x in m.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let bytes = fs::read(path)?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::Format("not a KOPAMAT1 file".to_string()));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::Format("matrix dimensions must be positive".to_string()));
    }
    let expected = 16 + 8 * rows * cols;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "payload size mismatch: expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let data = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    DenseMatrix::new(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::GaussianSource;
    use tempfile::tempdir;

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.mat");
        let mut src = GaussianSource::new(1);
        let m = src.gaussian_matrix(3, 5);
        write_matrix(&m, &path).unwrap();
        let back = read_matrix(&path).unwrap();
        let bits: Vec<u64> = m.data().iter().map(|x| x.to_bits()).collect();
        let back_bits: Vec<u64> = back.data().iter().map(|x| x.to_bits()).collect();
        assert_eq!(bits, back_bits);
        assert_eq!(back.rows(), 3);
        assert_eq!(back.cols(), 5);
    }

    #[test]
    fn wrong_magic_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.mat");
        std::fs::write(&path, b"NOTMAGIC\x01\x00\x00\x00\x01\x00\x00\x00").unwrap();
        assert!(matches!(read_matrix(&path), Err(Error::Format(_))));
    }

    #[test]
    fn zero_dimensions_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("zero.mat");
        let mut bytes = MAGIC.to_vec();
        bytes.extend_from_slice(&0u32.to_le_bytes());
        bytes.extend_from_slice(&3u32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(read_matrix(&path), Err(Error::Format(_))));
    }

    #[test]
    fn size_mismatch_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("short.mat");
        let mut bytes = MAGIC.to_vec();
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 24]); // 3 doubles instead of 4
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(read_matrix(&path), Err(Error::Format(_))));
    }
}
