//! Dense row-major matrix value type and the few primitives everything else
//! consumes: norms, trace products, Kronecker products, block access, and
//! seeded Gaussian noise.
//!
//! Reproducibility contract: all randomness in the crate flows through
//! [`GaussianSource`], which draws from a ChaCha8 stream keyed by
//! `seed_from_u64` and maps it to normals with the Box-Muller transform.
//! Uniform doubles are `(next_u64() >> 11) * 2^-53`, so fixed seeds give
//! bit-identical matrices on every platform.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::AmbientShape;
use crate::error::Error;
use crate::Result;

/// Dense real matrix, row-major, 64-bit entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimensions { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Build from nested row slices; rows must have equal lengths.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if r == 0 || c == 0 {
            return Err(Error::InvalidDimensions { rows: r, cols: c });
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::LengthMismatch {
                    expected: c,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(r, c, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> AmbientShape {
        AmbientShape {
            rows: self.rows,
            cols: self.cols,
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    /// tr(self · otherᵀ) = Σ_ij self[i,j]·other[i,j].
    pub fn trace_product(&self, other: &DenseMatrix) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum())
    }

    /// Kronecker product: block (i,j) of the result is self[i,j]·other.
    pub fn kron(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        let rows = self
            .rows
            .checked_mul(other.rows)
            .ok_or(Error::DimensionOverflow {
                rows: self.rows,
                cols: other.rows,
            })?;
        let cols = self
            .cols
            .checked_mul(other.cols)
            .ok_or(Error::DimensionOverflow {
                rows: self.cols,
                cols: other.cols,
            })?;
        rows.checked_mul(cols).ok_or(Error::DimensionOverflow { rows, cols })?;
        let mut out = DenseMatrix::zeros(rows, cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.data[i * self.cols + j];
                for k in 0..other.rows {
                    let dst = (i * other.rows + k) * cols + j * other.cols;
                    let src = k * other.cols;
                    for l in 0..other.cols {
                        out.data[dst + l] = a * other.data[src + l];
                    }
                }
            }
        }
        Ok(out)
    }

    /// self + factor · (a ⊗ b), written without materializing the product.
    pub fn add_scaled_kron(&mut self, factor: f64, a: &DenseMatrix, b: &DenseMatrix) -> Result<()> {
        if a.rows * b.rows != self.rows || a.cols * b.cols != self.cols {
            return Err(Error::ShapeMismatch {
                expected_rows: self.rows,
                expected_cols: self.cols,
                rows: a.rows * b.rows,
                cols: a.cols * b.cols,
            });
        }
        for i in 0..a.rows {
            for j in 0..a.cols {
                let s = factor * a.data[i * a.cols + j];
                if s == 0.0 {
                    continue;
                }
                for k in 0..b.rows {
                    let dst = (i * b.rows + k) * self.cols + j * b.cols;
                    let src = k * b.cols;
                    for l in 0..b.cols {
                        self.data[dst + l] += s * b.data[src + l];
                    }
                }
            }
        }
        Ok(())
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        DenseMatrix::new(self.rows, self.cols, data)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        DenseMatrix::new(self.rows, self.cols, data)
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn scale(&self, factor: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| factor * x).collect(),
        }
    }

    /// Copy of the `(bi, bj)`-th `block_rows`×`block_cols` block.
    pub fn block(&self, bi: usize, bj: usize, block_rows: usize, block_cols: usize) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(block_rows, block_cols);
        for k in 0..block_rows {
            let src = (bi * block_rows + k) * self.cols + bj * block_cols;
            out.data[k * block_cols..(k + 1) * block_cols]
                .copy_from_slice(&self.data[src..src + block_cols]);
        }
        out
    }

    /// Row-major index of the entry with the largest absolute value
    /// (first occurrence on ties).
    pub fn max_abs_index(&self) -> usize {
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for (i, x) in self.data.iter().enumerate() {
            if x.abs() > best_abs {
                best_abs = x.abs();
                best = i;
            }
        }
        best
    }

    /// self + σ·G with G drawn entrywise from the seeded Gaussian stream.
    /// σ = 0 returns the input unchanged.
    pub fn add_noise(&self, spec: &NoiseSpec) -> DenseMatrix {
        if spec.sigma == 0.0 {
            return self.clone();
        }
        let mut src = GaussianSource::new(spec.seed);
        let data = self
            .data
            .iter()
            .map(|x| x + spec.sigma * src.next_gaussian())
            .collect();
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    fn check_same_shape(&self, other: &DenseMatrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch {
                expected_rows: self.rows,
                expected_cols: self.cols,
                rows: other.rows,
                cols: other.cols,
            });
        }
        Ok(())
    }
}

/// Additive Gaussian noise specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise sigma must be nonnegative, got {sigma}"
            )));
        }
        Ok(Self { sigma, seed })
    }
}

/// Deterministic stream of standard normal deviates.
///
/// ChaCha8 keyed via `seed_from_u64`; uniforms are the top 53 bits of each
/// `next_u64`; normals come from the Box-Muller transform, consuming two
/// uniforms per pair and caching the second deviate.
pub struct GaussianSource {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianSource {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    fn uniform01(&mut self) -> f64 {
        // [0, 1), 53-bit resolution.
        (self.rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] so the log is finite.
        let u1 = 1.0 - self.uniform01();
        let u2 = self.uniform01();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Matrix with i.i.d. standard normal entries, filled row-major.
    pub fn gaussian_matrix(&mut self, rows: usize, cols: usize) -> DenseMatrix {
        let data = (0..rows * cols).map(|_| self.next_gaussian()).collect();
        DenseMatrix {
            rows,
            cols,
            data,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn kron_scalar_identity() {
        let a = m(&[&[1.0]]);
        let b = m(&[&[3.0, -1.0], &[0.5, 2.0]]);
        assert_eq!(a.kron(&b).unwrap(), b);
    }

    #[test]
    fn kron_block_expansion() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let expected = m(&[
            &[0.0, 1.0, 0.0, 2.0],
            &[1.0, 0.0, 2.0, 0.0],
            &[0.0, 3.0, 0.0, 4.0],
            &[3.0, 0.0, 4.0, 0.0],
        ]);
        assert_eq!(a.kron(&b).unwrap(), expected);
    }

    #[test]
    fn frobenius_examples() {
        assert_eq!(DenseMatrix::zeros(3, 2).frobenius_norm(), 0.0);
        assert_eq!(m(&[&[3.0, 4.0]]).frobenius_norm(), 5.0);
        assert_eq!(DenseMatrix::identity(4).frobenius_norm(), 2.0);
    }

    #[test]
    fn trace_product_examples() {
        let a = m(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let b = m(&[&[0.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(a.trace_product(&b).unwrap(), 0.0);

        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = m(&[&[4.0, 3.0], &[2.0, 1.0]]);
        assert_eq!(a.trace_product(&b).unwrap(), 20.0);

        let unit = a.scale(1.0 / a.frobenius_norm());
        assert_relative_eq!(unit.trace_product(&unit).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn trace_product_shape_mismatch() {
        let a = DenseMatrix::zeros(2, 2);
        let b = DenseMatrix::zeros(2, 3);
        assert!(a.trace_product(&b).is_err());
    }

    #[test]
    fn add_noise_sigma_zero_is_identity() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let spec = NoiseSpec::new(0.0, 7).unwrap();
        assert_eq!(a.add_noise(&spec), a);
    }

    #[test]
    fn add_noise_is_deterministic() {
        let a = DenseMatrix::zeros(5, 7);
        let spec = NoiseSpec::new(0.3, 42).unwrap();
        assert_eq!(a.add_noise(&spec), a.add_noise(&spec));
    }

    #[test]
    fn add_noise_sample_std_matches_sigma() {
        let a = DenseMatrix::zeros(512, 512);
        let spec = NoiseSpec::new(0.1, 1).unwrap();
        let noisy = a.add_noise(&spec);
        let n = noisy.data().len() as f64;
        let mean: f64 = noisy.data().iter().sum::<f64>() / n;
        let var: f64 = noisy.data().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let std = var.sqrt();
        assert!(
            (std - 0.1).abs() < 0.005,
            "sample std {std} too far from 0.1"
        );
    }

    #[test]
    fn gaussian_stream_moments() {
        let mut src = GaussianSource::new(3);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| src.next_gaussian()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "variance {var}");
    }

    #[test]
    fn kron_overflow_rejected() {
        // constructed directly so only the dimension check runs, no allocation
        let a = DenseMatrix {
            rows: usize::MAX / 2,
            cols: 1,
            data: vec![],
        };
        let b = DenseMatrix {
            rows: 3,
            cols: 1,
            data: vec![],
        };
        assert!(matches!(a.kron(&b), Err(Error::DimensionOverflow { .. })));
    }

    fn small_matrix(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
        proptest::collection::vec(-10.0f64..10.0, rows * cols)
            .prop_map(move |data| DenseMatrix::new(rows, cols, data).unwrap())
    }

    /// Entrywise relative distance; the two sides of the associativity
    /// identities group the scalar products differently, so they can differ
    /// in the last ulp but no more.
    fn max_rel_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-300))
            .fold(0.0, f64::max)
    }

    proptest! {
        #[test]
        fn kron_is_associative(
            a in small_matrix(2, 3), b in small_matrix(3, 2), c in small_matrix(2, 2),
        ) {
            let left = a.kron(&b).unwrap().kron(&c).unwrap();
            let right = a.kron(&b.kron(&c).unwrap()).unwrap();
            prop_assert!(max_rel_diff(&left, &right) <= 1e-15);
        }

        #[test]
        fn kron_mixed_identity(
            a in small_matrix(2, 2), b in small_matrix(3, 2), c in small_matrix(2, 3),
        ) {
            let left = a.kron(&c.kron(&b).unwrap()).unwrap();
            let right = a.kron(&c).unwrap().kron(&b).unwrap();
            prop_assert!(max_rel_diff(&left, &right) <= 1e-15);
        }

        #[test]
        fn kron_frobenius_multiplicative(
            a in small_matrix(3, 2), b in small_matrix(2, 5),
        ) {
            let k = a.kron(&b).unwrap();
            let expected = a.frobenius_norm() * b.frobenius_norm();
            prop_assert!((k.frobenius_norm() - expected).abs() <= 1e-12 * expected.max(1.0));
        }
    }
}
