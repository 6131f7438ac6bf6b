//! Kronecker configurations over the divisor lattice of an ambient shape.
//!
//! A configuration names the shape (p, q) of the left factor A in a term
//! λ·A⊗B; the right factor B then has shape (P/p, Q/q). Only divisor pairs
//! are admissible, and the two trivial corners (1,1) and (P,Q) are excluded
//! from enumeration. For P = 2^M, Q = 2^N this recovers the familiar
//! {0..M}×{0..N} grid of exponents minus its corners.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Shape of the observed matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AmbientShape {
    pub rows: usize,
    pub cols: usize,
}

impl AmbientShape {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimensions { rows, cols });
        }
        Ok(Self { rows, cols })
    }

    /// Total number of entries, as f64 (the `T` of the information criterion).
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl std::fmt::Display for AmbientShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

/// Shape (p, q) of the left Kronecker factor within a fixed ambient shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Configuration {
    a_rows: usize,
    a_cols: usize,
    ambient: AmbientShape,
}

/// The two parameter-count conventions attached to a configuration.
///
/// `ic_count` is pq + (P/p)(Q/q) and enters the information criterion;
/// `report_count` subtracts one for the unit-norm constraint and is the
/// number quoted in comparison tables and curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParameterCount {
    pub ic_count: usize,
    pub report_count: usize,
}

impl Configuration {
    pub fn new(a_rows: usize, a_cols: usize, ambient: AmbientShape) -> Result<Self> {
        if a_rows == 0
            || a_cols == 0
            || ambient.rows % a_rows != 0
            || ambient.cols % a_cols != 0
        {
            return Err(Error::NotADivisor {
                a_rows,
                a_cols,
                rows: ambient.rows,
                cols: ambient.cols,
            });
        }
        Ok(Self {
            a_rows,
            a_cols,
            ambient,
        })
    }

    pub fn a_rows(&self) -> usize {
        self.a_rows
    }

    pub fn a_cols(&self) -> usize {
        self.a_cols
    }

    pub fn b_rows(&self) -> usize {
        self.ambient.rows / self.a_rows
    }

    pub fn b_cols(&self) -> usize {
        self.ambient.cols / self.a_cols
    }

    pub fn ambient(&self) -> AmbientShape {
        self.ambient
    }

    /// Number of rows of the rearranged matrix, p·q.
    pub fn a_len(&self) -> usize {
        self.a_rows * self.a_cols
    }

    /// Number of columns of the rearranged matrix, (P/p)·(Q/q).
    pub fn b_len(&self) -> usize {
        self.b_rows() * self.b_cols()
    }

    pub fn parameter_count(&self) -> ParameterCount {
        let ic_count = self.a_len() + self.b_len();
        ParameterCount {
            ic_count,
            report_count: ic_count - 1,
        }
    }

    /// Whether `self` is "smaller than" `other`: both factor dimensions of
    /// `self` divide the corresponding dimensions of `other`. This is the
    /// divisibility generalization of m_k ≤ m_l, n_k ≤ n_l and is exactly the
    /// condition under which the quotient matrix C of the orthogonalization
    /// machinery has integral shape. Reflexive: every configuration is nested
    /// in itself.
    pub fn is_nested_in(&self, other: &Configuration) -> bool {
        self.ambient == other.ambient
            && other.a_rows % self.a_rows == 0
            && other.a_cols % self.a_cols == 0
    }
}

impl std::fmt::Display for Configuration {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.a_rows, self.a_cols)
    }
}

fn divisors(n: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (1..=n).filter(|d| n % d == 0).collect();
    out.sort_unstable();
    out
}

/// Every divisor pair (p, q) of the ambient shape except the trivial (1,1)
/// and (P,Q), in ascending (p, q) order.
pub fn enumerate_configurations(shape: AmbientShape) -> Vec<Configuration> {
    let mut out = Vec::new();
    for &p in &divisors(shape.rows) {
        for &q in &divisors(shape.cols) {
            if (p, q) == (1, 1) || (p, q) == (shape.rows, shape.cols) {
                continue;
            }
            out.push(Configuration {
                a_rows: p,
                a_cols: q,
                ambient: shape,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn shape(rows: usize, cols: usize) -> AmbientShape {
        AmbientShape::new(rows, cols).unwrap()
    }

    #[test]
    fn enumerate_4x4() {
        let got: Vec<(usize, usize)> = enumerate_configurations(shape(4, 4))
            .iter()
            .map(|c| (c.a_rows(), c.a_cols()))
            .collect();
        assert_eq!(
            got,
            vec![(1, 2), (1, 4), (2, 1), (2, 2), (2, 4), (4, 1), (4, 2)]
        );
    }

    #[test]
    fn enumerate_512x512_has_98_configurations() {
        assert_eq!(enumerate_configurations(shape(512, 512)).len(), 98);
    }

    #[test]
    fn enumerate_2x1_is_empty() {
        assert!(enumerate_configurations(shape(2, 1)).is_empty());
    }

    #[test]
    fn enumeration_excludes_corners_and_respects_divisibility() {
        for (r, c) in [(6, 10), (8, 8), (12, 1), (7, 7)] {
            let s = shape(r, c);
            for cfg in enumerate_configurations(s) {
                assert!(!(cfg.a_rows() == 1 && cfg.a_cols() == 1));
                assert!(!(cfg.a_rows() == r && cfg.a_cols() == c));
                assert_eq!(r % cfg.a_rows(), 0);
                assert_eq!(c % cfg.a_cols(), 0);
            }
        }
    }

    #[test]
    fn power_of_two_count_formula() {
        // (M+1)(N+1) - 2 for P = 2^M, Q = 2^N.
        for (m, n) in [(2usize, 3usize), (5, 5), (1, 4)] {
            let s = shape(1 << m, 1 << n);
            assert_eq!(enumerate_configurations(s).len(), (m + 1) * (n + 1) - 2);
        }
    }

    #[test]
    fn parameter_counts_match_reported_values() {
        let s = shape(512, 512);
        let c = Configuration::new(64, 128, s).unwrap();
        assert_eq!(c.parameter_count().report_count, 8223);
        let c = Configuration::new(16, 32, s).unwrap();
        assert_eq!(c.parameter_count().report_count, 1023);
        let c = Configuration::new(2, 2, shape(4, 4)).unwrap();
        assert_eq!(c.parameter_count().ic_count, 8);
        assert_eq!(c.parameter_count().report_count, 7);
    }

    #[test]
    fn nesting_examples() {
        let s = shape(8, 8);
        let c22 = Configuration::new(2, 2, s).unwrap();
        let c44 = Configuration::new(4, 4, s).unwrap();
        let c24 = Configuration::new(2, 4, s).unwrap();
        let c42 = Configuration::new(4, 2, s).unwrap();
        assert!(c22.is_nested_in(&c44));
        assert!(!c24.is_nested_in(&c42));
        assert!(c22.is_nested_in(&c22));
    }

    #[test]
    fn invalid_configuration_rejected() {
        assert!(Configuration::new(3, 2, shape(8, 8)).is_err());
        assert!(Configuration::new(0, 2, shape(8, 8)).is_err());
    }

    fn divisor_of(n: usize) -> impl Strategy<Value = usize> {
        (1..=n).prop_filter("divisor", move |d| n % d == 0)
    }

    proptest! {
        #[test]
        fn ic_count_is_report_count_plus_one(
            p in divisor_of(24), q in divisor_of(36),
        ) {
            let c = Configuration::new(p, q, shape(24, 36)).unwrap();
            let pc = c.parameter_count();
            prop_assert_eq!(pc.ic_count, pc.report_count + 1);
        }

        #[test]
        fn nesting_is_a_partial_order(
            p1 in divisor_of(24), q1 in divisor_of(36),
            p2 in divisor_of(24), q2 in divisor_of(36),
            p3 in divisor_of(24), q3 in divisor_of(36),
        ) {
            let s = shape(24, 36);
            let a = Configuration::new(p1, q1, s).unwrap();
            let b = Configuration::new(p2, q2, s).unwrap();
            let c = Configuration::new(p3, q3, s).unwrap();
            // reflexive
            prop_assert!(a.is_nested_in(&a));
            // antisymmetric
            if a.is_nested_in(&b) && b.is_nested_in(&a) {
                prop_assert_eq!(a, b);
            }
            // transitive
            if a.is_nested_in(&b) && b.is_nested_in(&c) {
                prop_assert!(a.is_nested_in(&c));
            }
        }
    }
}
