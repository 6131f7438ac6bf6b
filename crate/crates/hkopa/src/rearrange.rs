//! The rearrangement operator and its inverse.
//!
//! For a configuration (p, q) of a P×Q matrix, view the matrix as a p×q grid
//! of (P/p)×(Q/q) blocks. Rearrangement sends block (i, j) to row i·q + j of
//! a (pq)×((P/p)(Q/q)) matrix, the row being the row-major flattening of the
//! block. The point of the permutation is the identity
//!
//! ```text
//! rearrange(A ⊗ B) = vec(A) vec(B)ᵀ,
//! ```
//!
//! which maps "closest Kronecker product of shape (p, q)" onto "closest
//! rank-one matrix", where the SVD takes over.
//!
//! `vec` is row-major throughout: with the blocks enumerated row-major, the
//! identity above forces the row-major reading on A, and B follows the same
//! convention for consistency. Any self-consistent choice yields the same
//! fitted Kronecker terms; the convention only pins the intermediate
//! representation.

use crate::config::Configuration;
use crate::error::Error;
use crate::matrix::DenseMatrix;
use crate::Result;

/// Row-major flattening into a column vector.
pub fn vec_matrix(m: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::new(m.rows() * m.cols(), 1, m.data().to_vec()).expect("non-empty matrix")
}

/// Inverse of [`vec_matrix`]: reshape a column vector into `rows`×`cols`.
pub fn unvec(v: &DenseMatrix, rows: usize, cols: usize) -> Result<DenseMatrix> {
    if v.cols() != 1 {
        return Err(Error::ShapeMismatch {
            expected_rows: rows * cols,
            expected_cols: 1,
            rows: v.rows(),
            cols: v.cols(),
        });
    }
    DenseMatrix::new(rows, cols, v.data().to_vec())
}

/// Reshape a raw slice into `rows`×`cols` (row-major).
pub fn unvec_slice(v: &[f64], rows: usize, cols: usize) -> Result<DenseMatrix> {
    DenseMatrix::new(rows, cols, v.to_vec())
}

/// Rearrange `y` under configuration `c`: block (i, j) becomes row i·q + j.
pub fn rearrange(y: &DenseMatrix, c: &Configuration) -> Result<DenseMatrix> {
    check_ambient(y, c)?;
    let (p, q) = (c.a_rows(), c.a_cols());
    let (br, bc) = (c.b_rows(), c.b_cols());
    let cols_y = y.cols();
    let mut out = DenseMatrix::zeros(p * q, br * bc);
    let src = y.data();
    {
        let dst = out.data_mut();
        for i in 0..p {
            for j in 0..q {
                let row_base = (i * q + j) * (br * bc);
                for k in 0..br {
                    let src_base = (i * br + k) * cols_y + j * bc;
                    dst[row_base + k * bc..row_base + (k + 1) * bc]
                        .copy_from_slice(&src[src_base..src_base + bc]);
                }
            }
        }
    }
    Ok(out)
}

/// Inverse of [`rearrange`]: exact round trip, entry for entry.
pub fn unrearrange(z: &DenseMatrix, c: &Configuration) -> Result<DenseMatrix> {
    let (p, q) = (c.a_rows(), c.a_cols());
    let (br, bc) = (c.b_rows(), c.b_cols());
    if z.rows() != p * q || z.cols() != br * bc {
        return Err(Error::ShapeMismatch {
            expected_rows: p * q,
            expected_cols: br * bc,
            rows: z.rows(),
            cols: z.cols(),
        });
    }
    let ambient = c.ambient();
    let mut out = DenseMatrix::zeros(ambient.rows, ambient.cols);
    let cols_y = ambient.cols;
    let src = z.data();
    {
        let dst = out.data_mut();
        for i in 0..p {
            for j in 0..q {
                let row_base = (i * q + j) * (br * bc);
                for k in 0..br {
                    let dst_base = (i * br + k) * cols_y + j * bc;
                    dst[dst_base..dst_base + bc]
                        .copy_from_slice(&src[row_base + k * bc..row_base + (k + 1) * bc]);
                }
            }
        }
    }
    Ok(out)
}

fn check_ambient(y: &DenseMatrix, c: &Configuration) -> Result<()> {
    let ambient = c.ambient();
    if y.rows() != ambient.rows || y.cols() != ambient.cols {
        return Err(Error::ShapeMismatch {
            expected_rows: ambient.rows,
            expected_cols: ambient.cols,
            rows: y.rows(),
            cols: y.cols(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{enumerate_configurations, AmbientShape};
    use crate::matrix::GaussianSource;
    use proptest::prelude::*;

    fn cfg(p: usize, q: usize, rows: usize, cols: usize) -> Configuration {
        Configuration::new(p, q, AmbientShape::new(rows, cols).unwrap()).unwrap()
    }

    #[test]
    fn vec_is_row_major() {
        let m = DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        assert_eq!(vec_matrix(&m).data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn unvec_examples() {
        let v = DenseMatrix::new(4, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = unvec(&v, 2, 2).unwrap();
        assert_eq!(m, DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap());

        let bad = DenseMatrix::new(6, 1, vec![0.0; 6]).unwrap();
        assert!(unvec(&bad, 2, 2).is_err());
    }

    /// Brute-force index map: out[(i·q+j), (k·bc+l)] = y[i·br+k, j·bc+l].
    fn rearrange_bruteforce(y: &DenseMatrix, c: &Configuration) -> DenseMatrix {
        let (p, q, br, bc) = (c.a_rows(), c.a_cols(), c.b_rows(), c.b_cols());
        let mut out = DenseMatrix::zeros(p * q, br * bc);
        for i in 0..p {
            for j in 0..q {
                for k in 0..br {
                    for l in 0..bc {
                        out.set(i * q + j, k * bc + l, y.get(i * br + k, j * bc + l));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn kron_maps_to_outer_product_exactly() {
        let mut src = GaussianSource::new(11);
        let a = src.gaussian_matrix(2, 4);
        let b = src.gaussian_matrix(4, 2);
        let c = cfg(2, 4, 8, 8);
        let left = rearrange(&a.kron(&b).unwrap(), &c).unwrap();
        let right = {
            let va = vec_matrix(&a);
            let vb = vec_matrix(&b);
            let mut out = DenseMatrix::zeros(8, 8);
            for i in 0..8 {
                for j in 0..8 {
                    out.set(i, j, va.get(i, 0) * vb.get(j, 0));
                }
            }
            out
        };
        assert_eq!(left, right);
    }

    #[test]
    fn matches_bruteforce_index_map() {
        let mut src = GaussianSource::new(5);
        for (p, q, rows, cols) in [(8, 1, 8, 4), (1, 2, 6, 4), (2, 4, 8, 8), (3, 2, 6, 4)] {
            let y = src.gaussian_matrix(rows, cols);
            let c = cfg(p, q, rows, cols);
            assert_eq!(rearrange(&y, &c).unwrap(), rearrange_bruteforce(&y, &c));
        }
    }

    #[test]
    fn round_trip_is_exact_for_all_8x8_configurations() {
        let mut src = GaussianSource::new(9);
        let y = src.gaussian_matrix(8, 8);
        for c in enumerate_configurations(AmbientShape::new(8, 8).unwrap()) {
            let z = rearrange(&y, &c).unwrap();
            assert_eq!(unrearrange(&z, &c).unwrap(), y);
        }
    }

    #[test]
    fn degenerate_one_row_rearrangement() {
        let mut src = GaussianSource::new(2);
        let y = src.gaussian_matrix(4, 6);
        let c = cfg(1, 2, 4, 6);
        let z = rearrange(&y, &c).unwrap();
        assert_eq!(z.rows(), 2);
        assert_eq!(z.cols(), 12);
        assert_eq!(z, rearrange_bruteforce(&y, &c));
        assert_eq!(unrearrange(&z, &c).unwrap(), y);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let y = DenseMatrix::zeros(4, 4);
        let c = cfg(2, 2, 8, 8);
        assert!(rearrange(&y, &c).is_err());
        assert!(unrearrange(&y, &c).is_err());
    }

    fn small_matrix(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
        proptest::collection::vec(-10.0f64..10.0, rows * cols)
            .prop_map(move |data| DenseMatrix::new(rows, cols, data).unwrap())
    }

    proptest! {
        #[test]
        fn rearrange_is_linear_and_norm_preserving(
            x in small_matrix(8, 8), y in small_matrix(8, 8),
            alpha in -3.0f64..3.0, beta in -3.0f64..3.0,
        ) {
            let c = cfg(2, 4, 8, 8);
            let combo = x.scale(alpha).add(&y.scale(beta)).unwrap();
            let lhs = rearrange(&combo, &c).unwrap();
            let rhs = rearrange(&x, &c).unwrap().scale(alpha)
                .add(&rearrange(&y, &c).unwrap().scale(beta)).unwrap();
            prop_assert_eq!(lhs, rhs);
            // permutation preserves the multiset of entries, hence the norm
            let mut a: Vec<u64> = x.data().iter().map(|v| v.to_bits()).collect();
            let mut b: Vec<u64> = rearrange(&x, &c).unwrap().data().iter().map(|v| v.to_bits()).collect();
            a.sort_unstable();
            b.sort_unstable();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn vec_unvec_round_trip(x in small_matrix(3, 5)) {
            prop_assert_eq!(unvec(&vec_matrix(&x), 3, 5).unwrap(), x);
        }
    }
}
