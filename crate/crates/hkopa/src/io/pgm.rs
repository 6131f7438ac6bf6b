//! PGM (portable graymap) reading and writing.
//!
//! Reading accepts P2 (ASCII) and P5 (binary) with maxval up to 65535;
//! 16-bit P5 samples are big-endian per the format. Entries are scaled to
//! [0, 1] by dividing by maxval. Writing clamps to [0, 1], quantizes
//! round-half-away-from-zero to maxval 255, and emits P5.

use std::fs;
use std::path::Path;

use crate::error::Error;
use crate::matrix::DenseMatrix;
use crate::Result;

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

/// Pull the next whitespace-separated token, skipping `#` comments.
struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn skip_filler(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn next_token(&mut self) -> Result<&'a [u8]> {
        self.skip_filler();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(format_err("unexpected end of PGM header"));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn next_usize(&mut self, what: &str) -> Result<usize> {
        let tok = self.next_token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_err(format!("invalid PGM {what}")))
    }
}

/// Read a P2 or P5 graymap and scale its samples to [0, 1].
pub fn read_pgm(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let bytes = fs::read(path)?;
    let mut tokens = Tokens::new(&bytes);
    let magic = tokens.next_token()?;
    let binary = match magic {
        b"P2" => false,
        b"P5" => true,
        other => {
            return Err(format_err(format!(
                "not a PGM file (magic {:?})",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let cols = tokens.next_usize("width")?;
    let rows = tokens.next_usize("height")?;
    let maxval = tokens.next_usize("maxval")?;
    if rows == 0 || cols == 0 {
        return Err(format_err("PGM dimensions must be positive"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format_err(format!("PGM maxval {maxval} out of range")));
    }

    let maxval_f = maxval as f64;
    let count = rows * cols;
    let mut data = Vec::with_capacity(count);
    if binary {
        // exactly one whitespace byte separates the header from the payload
        if tokens.pos >= bytes.len() || !bytes[tokens.pos].is_ascii_whitespace() {
            return Err(format_err("missing separator before PGM payload"));
        }
        let payload = &bytes[tokens.pos + 1..];
        let wide = maxval > 255;
        let sample_size = if wide { 2 } else { 1 };
        if payload.len() < count * sample_size {
            return Err(format_err("truncated PGM payload"));
        }
        for i in 0..count {
            let value = if wide {
                u16::from_be_bytes([payload[2 * i], payload[2 * i + 1]]) as usize
            } else {
                payload[i] as usize
            };
            if value > maxval {
                return Err(format_err(format!("sample {value} exceeds maxval {maxval}")));
            }
            data.push(value as f64 / maxval_f);
        }
    } else {
        for _ in 0..count {
            let value = tokens.next_usize("sample")?;
            if value > maxval {
                return Err(format_err(format!("sample {value} exceeds maxval {maxval}")));
            }
            data.push(value as f64 / maxval_f);
        }
    }
    DenseMatrix::new(rows, cols, data)
}

/// Clamp to [0, 1], quantize to 8 bits (round half away from zero), write P5.
pub fn write_pgm(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::with_capacity(32 + m.rows() * m.cols());
    out.extend_from_slice(format!("P5\n{} {}\n255\n", m.cols(), m.rows()).as_bytes());
    for &x in m.data() {
        let clamped = x.clamp(0.0, 1.0);
        out.push((clamped * 255.0).round() as u8);
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use tempfile::tempdir;

    #[test]
    fn ascii_pgm_scales_by_maxval() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("a.pgm");
        std::fs::write(&path, "P2\n# comment\n2 2\n255\n0 255 128 64\n").unwrap();
        let m = read_pgm(&path).unwrap();
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.get(0, 1), 1.0);
        assert_relative_eq!(m.get(1, 0), 128.0 / 255.0, epsilon = 1e-15);
        assert_relative_eq!(m.get(1, 1), 64.0 / 255.0, epsilon = 1e-15);
    }

    #[test]
    fn binary_and_ascii_encodings_agree() {
        let dir = tempdir().unwrap();
        let ascii = dir.path().join("a.pgm");
        let binary = dir.path().join("b.pgm");
        std::fs::write(&ascii, "P2\n3 2\n255\n0 10 20 30 40 250\n").unwrap();
        let mut payload: Vec<u8> = b"P5\n3 2\n255\n".to_vec();
        payload.extend_from_slice(&[0, 10, 20, 30, 40, 250]);
        std::fs::write(&binary, payload).unwrap();
        assert_eq!(read_pgm(&ascii).unwrap(), read_pgm(&binary).unwrap());
    }

    #[test]
    fn sixteen_bit_samples_are_big_endian() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("w.pgm");
        let mut payload: Vec<u8> = b"P5\n2 1\n65535\n".to_vec();
        payload.extend_from_slice(&65535u16.to_be_bytes());
        payload.extend_from_slice(&256u16.to_be_bytes());
        std::fs::write(&path, payload).unwrap();
        let m = read_pgm(&path).unwrap();
        assert_eq!(m.get(0, 0), 1.0);
        assert_relative_eq!(m.get(0, 1), 256.0 / 65535.0, epsilon = 1e-15);
    }

    #[test]
    fn eight_bit_round_trip_is_identity_on_payload() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("rt.pgm");
        let values: Vec<f64> = (0..=255).map(|v| v as f64 / 255.0).collect();
        let m = DenseMatrix::new(16, 16, values).unwrap();
        write_pgm(&m, &path).unwrap();
        let back = read_pgm(&path).unwrap();
        assert_eq!(m, back);
        write_pgm(&back, dir.path().join("rt2.pgm")).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(dir.path().join("rt2.pgm")).unwrap()
        );
    }

    #[test]
    fn quantization_clamps_and_rounds() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("q.pgm");
        let m = DenseMatrix::new(1, 3, vec![1.7, -0.5, 0.5]).unwrap();
        write_pgm(&m, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let payload = &bytes[bytes.len() - 3..];
        assert_eq!(payload, &[255, 0, 128], "round(0.5·255) = 128");
    }

    #[test]
    fn malformed_inputs_rejected() {
        let dir = tempdir().unwrap();
        let bad_magic = dir.path().join("m.pgm");
        std::fs::write(&bad_magic, "P6\n1 1\n255\n0").unwrap();
        assert!(read_pgm(&bad_magic).is_err());

        let truncated = dir.path().join("t.pgm");
        std::fs::write(&truncated, b"P5\n4 4\n255\nab".to_vec()).unwrap();
        assert!(read_pgm(&truncated).is_err());

        let overflow = dir.path().join("o.pgm");
        std::fs::write(&overflow, "P2\n1 1\n100\n101\n").unwrap();
        assert!(read_pgm(&overflow).is_err());
    }
}
