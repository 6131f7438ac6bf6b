//! Low-rank SVD baseline and the parameter-budget comparison against the
//! hybrid Kronecker fit. A rank-k truncation costs k·(P+Q−1) parameters; a
//! Kronecker term of configuration (p, q) costs pq + (P/p)(Q/q) − 1, so the
//! two methods are compared on a common parameter axis.

use crate::error::Error;
use crate::fit::{greedy_fit, stopping_threshold, FitOptions, StoppingRule};
use crate::lowrank::truncated_svd;
use crate::matrix::DenseMatrix;
use crate::Result;

/// Rank-k SVD truncation of `y` plus its parameter cost k·(P+Q−1).
pub fn svd_approximation(y: &DenseMatrix, k: usize) -> Result<(DenseMatrix, usize)> {
    let svd = truncated_svd(y, k)?;
    let params = k * (y.rows() + y.cols() - 1);
    Ok((svd.reconstruct(), params))
}

/// Relative squared error ‖truth − fitted‖_F² / ‖truth‖_F².
pub fn rse(truth: &DenseMatrix, fitted: &DenseMatrix) -> Result<f64> {
    let denom = truth.frobenius_norm_sq();
    if denom == 0.0 {
        return Err(Error::Degenerate(
            "relative squared error undefined for a zero reference".to_string(),
        ));
    }
    Ok(truth.sub(fitted)?.frobenius_norm_sq() / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Hkopa,
    Svd,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Hkopa => "hkopa",
            Method::Svd => "svd",
        }
    }
}

/// One point of a comparison curve.
#[derive(Debug, Clone)]
pub struct CurvePoint {
    pub method: Method,
    /// Number of terms (Kronecker terms or SVD rank).
    pub terms: usize,
    /// Cumulative parameter cost, report-count convention.
    pub params: usize,
    /// Error against the clean reference.
    pub rse_clean: f64,
    /// Error against the fitted (noisy) input.
    pub rse_input: f64,
}

/// Error-versus-parameters curves for both methods on one input.
#[derive(Debug, Clone)]
pub struct ComparisonCurve {
    pub points: Vec<CurvePoint>,
    /// Term count the stopping rule would have selected for the hybrid fit,
    /// evaluated post hoc on the recorded trajectory.
    pub hkopa_stopped_at: Option<usize>,
}

impl ComparisonCurve {
    pub fn method_points(&self, method: Method) -> impl Iterator<Item = &CurvePoint> {
        self.points.iter().filter(move |p| p.method == method)
    }
}

/// Fit `y_noisy` greedily (up to `opts.max_terms` terms, no early stop) and
/// with SVD truncations of rank 1..=`max_rank`, recording the error of each
/// prefix against both `y_clean` and `y_noisy`. When `max_rank` is `None`
/// the SVD curve runs until its parameter cost covers the hybrid fit's.
/// The stopping rule from `opts.stopping` (if any) is evaluated on the
/// recorded trajectory and marked, so the curve extends past the stopping
/// point.
pub fn compare(
    y_clean: &DenseMatrix,
    y_noisy: &DenseMatrix,
    opts: &FitOptions,
    max_rank: Option<usize>,
) -> Result<ComparisonCurve> {
    if y_clean.rows() != y_noisy.rows() || y_clean.cols() != y_noisy.cols() {
        return Err(Error::ShapeMismatch {
            expected_rows: y_clean.rows(),
            expected_cols: y_clean.cols(),
            rows: y_noisy.rows(),
            cols: y_noisy.cols(),
        });
    }
    let rank_cap = y_noisy.rows().min(y_noisy.cols());
    if let Some(r) = max_rank {
        if r == 0 || r > rank_cap {
            return Err(Error::RankOutOfRange {
                rank: r,
                rows: y_noisy.rows(),
                cols: y_noisy.cols(),
            });
        }
    }

    let mut run_opts = *opts;
    run_opts.stopping = StoppingRule::None;
    run_opts.refine = false;
    let (model, report) = greedy_fit(y_noisy, &run_opts)?;

    let mut points = Vec::new();
    let mut partial = DenseMatrix::zeros(y_noisy.rows(), y_noisy.cols());
    let mut params = 0usize;
    for (idx, term) in model.terms().iter().enumerate() {
        partial.add_scaled_kron(term.lambda(), term.a(), term.b())?;
        params += term.config().parameter_count().report_count;
        points.push(CurvePoint {
            method: Method::Hkopa,
            terms: idx + 1,
            params,
            rse_clean: rse(y_clean, &partial)?,
            rse_input: rse(y_noisy, &partial)?,
        });
    }

    // post-hoc stopping mark on the greedy trajectory
    let hkopa_stopped_at = match opts.stopping {
        StoppingRule::RandomMatrix { prob_bound } => {
            let t_len = y_noisy.shape().len() as f64;
            let mut fired_at = None;
            for row in &report.rows {
                let sigma_hat = row.residual_fro / t_len.sqrt();
                let threshold = stopping_threshold(sigma_hat, &row.config, prob_bound);
                if row.lambda <= threshold {
                    fired_at = Some(row.k - 1);
                    break;
                }
            }
            fired_at.or(Some(model.len()))
        }
        StoppingRule::TargetCpv { fraction } => report
            .rows
            .iter()
            .find(|row| row.cpv >= 100.0 * fraction)
            .map(|row| row.k)
            .or(Some(model.len())),
        StoppingRule::None => None,
    };

    let per_rank = y_noisy.rows() + y_noisy.cols() - 1;
    let max_rank = max_rank.unwrap_or_else(|| {
        // smallest rank whose parameter cost covers the hybrid curve
        (params.div_ceil(per_rank)).clamp(1, rank_cap)
    });
    for k in 1..=max_rank {
        let (recon, params) = svd_approximation(y_noisy, k)?;
        points.push(CurvePoint {
            method: Method::Svd,
            terms: k,
            params,
            rse_clean: rse(y_clean, &recon)?,
            rse_input: rse(y_noisy, &recon)?,
        });
    }

    Ok(ComparisonCurve {
        points,
        hkopa_stopped_at,
    })
}
