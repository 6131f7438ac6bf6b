//! Kronecker terms and the multi-term model object.
//!
//! A term is λ·A⊗B with λ > 0 and ‖A‖_F = ‖B‖_F = 1; the scale lives in λ
//! and the sign ambiguity is resolved by making the largest-magnitude entry
//! of A nonnegative. A model is an ordered list of terms over a shared
//! ambient shape. Models whose terms additionally satisfy the nested/equal
//! orthogonality conditions are flagged `canonical`; greedy fits produce
//! non-canonical models until passed through the Gram-Schmidt process.

use serde::{Deserialize, Serialize};

use crate::config::{AmbientShape, Configuration};
use crate::error::Error;
use crate::matrix::DenseMatrix;
use crate::Result;

/// One Kronecker product term λ·A⊗B of a fixed configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KroneckerTerm {
    lambda: f64,
    a: DenseMatrix,
    b: DenseMatrix,
    config: Configuration,
}

impl KroneckerTerm {
    /// Normalize (λ, A, B) into the canonical parameterization: the returned
    /// term has λ > 0, unit-norm factors, a nonnegative largest-magnitude
    /// entry of A, and evaluates to exactly the same λ·A⊗B product.
    pub fn normalize(lambda: f64, a: DenseMatrix, b: DenseMatrix, config: Configuration) -> Result<Self> {
        if a.rows() != config.a_rows() || a.cols() != config.a_cols() {
            return Err(Error::ShapeMismatch {
                expected_rows: config.a_rows(),
                expected_cols: config.a_cols(),
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        if b.rows() != config.b_rows() || b.cols() != config.b_cols() {
            return Err(Error::ShapeMismatch {
                expected_rows: config.b_rows(),
                expected_cols: config.b_cols(),
                rows: b.rows(),
                cols: b.cols(),
            });
        }
        let na = a.frobenius_norm();
        let nb = b.frobenius_norm();
        if lambda == 0.0 || na == 0.0 || nb == 0.0 {
            return Err(Error::Degenerate(
                "cannot normalize a zero term".to_string(),
            ));
        }
        if !(lambda.is_finite() && a.all_finite() && b.all_finite()) {
            return Err(Error::NonFinite);
        }
        let new_lambda = lambda.abs() * na * nb;
        // sign of A fixed by its largest-magnitude entry; B absorbs the rest
        let sign_a = if a.data()[a.max_abs_index()] < 0.0 { -1.0 } else { 1.0 };
        let sign_b = lambda.signum() * sign_a;
        Ok(Self {
            lambda: new_lambda,
            a: a.scale(sign_a / na),
            b: b.scale(sign_b / nb),
            config,
        })
    }

    /// Rebuild a term from stored values without renormalizing, so that
    /// deserialized models evaluate bit-identically. Shapes and positivity
    /// are still enforced; factor norms may be off by up to 1e-8 to admit
    /// shortest-representation round trips.
    pub fn from_parts(
        lambda: f64,
        a: DenseMatrix,
        b: DenseMatrix,
        config: Configuration,
    ) -> Result<Self> {
        if a.rows() != config.a_rows() || a.cols() != config.a_cols() {
            return Err(Error::ShapeMismatch {
                expected_rows: config.a_rows(),
                expected_cols: config.a_cols(),
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        if b.rows() != config.b_rows() || b.cols() != config.b_cols() {
            return Err(Error::ShapeMismatch {
                expected_rows: config.b_rows(),
                expected_cols: config.b_cols(),
                rows: b.rows(),
                cols: b.cols(),
            });
        }
        if !(lambda > 0.0) || !lambda.is_finite() || !a.all_finite() || !b.all_finite() {
            return Err(Error::Degenerate(
                "term coefficient must be positive and finite".to_string(),
            ));
        }
        for (name, norm) in [("A", a.frobenius_norm()), ("B", b.frobenius_norm())] {
            if (norm - 1.0).abs() > 1e-8 {
                return Err(Error::Degenerate(format!(
                    "factor {name} is not unit norm (got {norm})"
                )));
            }
        }
        Ok(Self {
            lambda,
            a,
            b,
            config,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn b(&self) -> &DenseMatrix {
        &self.b
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    /// λ·A⊗B as a dense matrix.
    pub fn to_matrix(&self) -> DenseMatrix {
        let ambient = self.config.ambient();
        let mut out = DenseMatrix::zeros(ambient.rows, ambient.cols);
        out.add_scaled_kron(self.lambda, &self.a, &self.b)
            .expect("term shapes match ambient");
        out
    }
}

/// Ordered list of Kronecker terms over one ambient shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HKopaModel {
    ambient: AmbientShape,
    terms: Vec<KroneckerTerm>,
    canonical: bool,
}

impl HKopaModel {
    pub fn empty(ambient: AmbientShape) -> Self {
        Self {
            ambient,
            terms: Vec::new(),
            canonical: false,
        }
    }

    pub fn new(ambient: AmbientShape, terms: Vec<KroneckerTerm>) -> Result<Self> {
        for t in &terms {
            if t.config().ambient() != ambient {
                return Err(Error::ShapeMismatch {
                    expected_rows: ambient.rows,
                    expected_cols: ambient.cols,
                    rows: t.config().ambient().rows,
                    cols: t.config().ambient().cols,
                });
            }
        }
        Ok(Self {
            ambient,
            terms,
            canonical: false,
        })
    }

    pub fn ambient(&self) -> AmbientShape {
        self.ambient
    }

    pub fn terms(&self) -> &[KroneckerTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Whether the model has passed the Gram-Schmidt process since it was
    /// last modified.
    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    pub(crate) fn set_canonical(&mut self, canonical: bool) {
        self.canonical = canonical;
    }

    pub(crate) fn push(&mut self, term: KroneckerTerm) {
        self.terms.push(term);
        self.canonical = false;
    }

    /// Σ_k λ_k·A_k⊗B_k.
    pub fn evaluate(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.ambient.rows, self.ambient.cols);
        for t in &self.terms {
            out.add_scaled_kron(t.lambda, &t.a, &t.b)
                .expect("term shapes match ambient");
        }
        out
    }

    /// y − evaluate().
    pub fn residual(&self, y: &DenseMatrix) -> Result<DenseMatrix> {
        if y.rows() != self.ambient.rows || y.cols() != self.ambient.cols {
            return Err(Error::ShapeMismatch {
                expected_rows: self.ambient.rows,
                expected_cols: self.ambient.cols,
                rows: y.rows(),
                cols: y.cols(),
            });
        }
        y.sub(&self.evaluate())
    }

    /// Total ic-convention parameter count over all terms.
    pub fn ic_parameter_count(&self) -> usize {
        self.terms
            .iter()
            .map(|t| t.config().parameter_count().ic_count)
            .sum()
    }

    /// Total report-convention parameter count over all terms.
    pub fn report_parameter_count(&self) -> usize {
        self.terms
            .iter()
            .map(|t| t.config().parameter_count().report_count)
            .sum()
    }
}
