//! Identifiability machinery: projection coefficients between nested factor
//! shapes, the orthogonality check, and the Gram-Schmidt process that brings
//! a multi-term model into the canonical (identified) parameterization
//! without changing what it evaluates to.
//!
//! The algebra behind the process: if A_k is smaller than A_l (its shape
//! divides A_l's), then for any quotient matrix C
//!
//! ```text
//! λ_l·(A_l − A_k⊗C)⊗B_l + A_k⊗(λ_k·B_k + λ_l·C⊗B_l)
//!     = λ_k·A_k⊗B_k + λ_l·A_l⊗B_l,
//! ```
//!
//! so subtracting the projection of A_l onto the shifted copies of A_k and
//! letting B_k absorb the removed mass is an exact reparameterization. Terms
//! of equal configuration are orthogonalized jointly by re-extracting the
//! singular triplets of the rearranged sum Σ λ_i vec(A_i)vec(B_i)ᵀ, which
//! produces orthonormal factors on both sides by construction.
//!
//! Processing runs over terms sorted by ascending factor shape. A later
//! term's B-absorption can break the B-orthogonality of an earlier
//! equal-configuration group, so multi-term groups are re-extracted once
//! more after the main pass; the re-extraction rotates factors within the
//! group's span and therefore preserves every nested-orthogonality relation
//! already established.

use crate::config::Configuration;
use crate::error::Error;
use crate::lowrank::{least_squares, truncated_svd};
use crate::matrix::DenseMatrix;
use crate::rearrange::vec_matrix;
use crate::terms::{HKopaModel, KroneckerTerm};
use crate::Result;

/// Residual norms below this are treated as "fully explained by predecessors".
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Default tolerance for the orthogonality check.
pub const ORTHOGONALITY_TOL: f64 = 1e-8;

/// Joint solves larger than this many design-matrix entries fall back to
/// conjugate gradients on the normal equations.
const DENSE_SOLVE_LIMIT: usize = 8_000_000;

/// Least-squares coefficients C minimizing ‖a_large − a_small⊗C‖_F², computed
/// entrywise as [C]_{i,j} = Σ_{u,v} a_small[u,v]·a_large[u·h+i, v·w+j].
/// Requires unit Frobenius norm of `a_small` for the least-squares reading.
pub fn projection_coefficients(
    a_small: &DenseMatrix,
    a_large: &DenseMatrix,
) -> Result<DenseMatrix> {
    if a_large.rows() % a_small.rows() != 0 || a_large.cols() % a_small.cols() != 0 {
        return Err(Error::NotADivisor {
            a_rows: a_small.rows(),
            a_cols: a_small.cols(),
            rows: a_large.rows(),
            cols: a_large.cols(),
        });
    }
    let h = a_large.rows() / a_small.rows();
    let w = a_large.cols() / a_small.cols();
    let mut c = DenseMatrix::zeros(h, w);
    for u in 0..a_small.rows() {
        for v in 0..a_small.cols() {
            let s = a_small.get(u, v);
            if s == 0.0 {
                continue;
            }
            for i in 0..h {
                for j in 0..w {
                    c.set(i, j, c.get(i, j) + s * a_large.get(u * h + i, v * w + j));
                }
            }
        }
    }
    Ok(c)
}

/// One reported breach of the orthogonality assumption.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Index of the smaller (or first equal-config) term.
    pub smaller: usize,
    /// Index of the larger (or second equal-config) term.
    pub larger: usize,
    pub kind: ViolationKind,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// Some projection coefficient of A_larger onto shifted copies of
    /// A_smaller exceeds the tolerance.
    NestedProjection,
    /// tr[A_l A_kᵀ] too large for an equal-configuration pair.
    EqualConfigA,
    /// tr[B_l B_kᵀ] too large for an equal-configuration pair.
    EqualConfigB,
}

/// All violations of the orthogonality assumption at tolerance `tol`.
/// Empty iff the model is identified (given unit norms and λ ordering).
pub fn check_assumption2(model: &HKopaModel, tol: f64) -> Vec<Violation> {
    let terms = model.terms();
    let mut out = Vec::new();
    for k in 0..terms.len() {
        for l in 0..terms.len() {
            if k == l {
                continue;
            }
            let (ck, cl) = (terms[k].config(), terms[l].config());
            if ck == cl {
                if k < l {
                    let ta = terms[l].a().trace_product(terms[k].a()).expect("same shape");
                    if ta.abs() > tol {
                        out.push(Violation {
                            smaller: k,
                            larger: l,
                            kind: ViolationKind::EqualConfigA,
                            magnitude: ta.abs(),
                        });
                    }
                    let tb = terms[l].b().trace_product(terms[k].b()).expect("same shape");
                    if tb.abs() > tol {
                        out.push(Violation {
                            smaller: k,
                            larger: l,
                            kind: ViolationKind::EqualConfigB,
                            magnitude: tb.abs(),
                        });
                    }
                }
            } else if ck.is_nested_in(cl) {
                let c = projection_coefficients(terms[k].a(), terms[l].a())
                    .expect("nested shapes divide");
                let max = c.data().iter().fold(0.0f64, |m, x| m.max(x.abs()));
                if max > tol {
                    out.push(Violation {
                        smaller: k,
                        larger: l,
                        kind: ViolationKind::NestedProjection,
                        magnitude: max,
                    });
                }
            }
        }
    }
    out
}

/// What the Gram-Schmidt process did beyond reparameterizing.
#[derive(Debug, Clone, PartialEq)]
pub enum ChangeEvent {
    /// Input term (by input index) was fully explained by its predecessors
    /// and was absorbed into their B factors.
    TermMerged { original_index: usize },
    /// An equal-configuration group lost rank when re-extracted.
    GroupCollapsed {
        config: Configuration,
        before: usize,
        after: usize,
    },
}

/// Output of [`gram_schmidt`]: the canonicalized model plus a change log.
#[derive(Debug, Clone)]
pub struct GramSchmidtResult {
    pub model: HKopaModel,
    pub changes: Vec<ChangeEvent>,
}

/// Working representation during the process; factors stay unit-norm.
#[derive(Debug, Clone)]
struct Work {
    lambda: f64,
    a: DenseMatrix,
    b: DenseMatrix,
    config: Configuration,
}

/// Reparameterize `model` so that it satisfies the unit-norm/ordering and
/// orthogonality assumptions, preserving its evaluation exactly up to
/// floating-point error. Degenerate terms are merged into predecessors and
/// reported in the change log.
pub fn gram_schmidt(model: &HKopaModel) -> Result<GramSchmidtResult> {
    let ambient = model.ambient();
    let mut changes = Vec::new();

    // the shuffle: ascending factor shape, stable within equal configurations
    let mut order: Vec<usize> = (0..model.len()).collect();
    order.sort_by_key(|&i| {
        let c = model.terms()[i].config();
        (c.a_rows(), c.a_cols())
    });

    let mut processed: Vec<Work> = Vec::with_capacity(model.len());
    let mut idx = 0;
    while idx < order.len() {
        // maximal run of equal configurations
        let config = *model.terms()[order[idx]].config();
        let mut group_inputs = Vec::new();
        while idx < order.len() && *model.terms()[order[idx]].config() == config {
            group_inputs.push(order[idx]);
            idx += 1;
        }

        let preds: Vec<usize> = (0..processed.len())
            .filter(|&k| processed[k].config.is_nested_in(&config) && processed[k].config != config)
            .collect();

        let mut group_terms: Vec<Work> = Vec::new();
        for &input_index in &group_inputs {
            let term = &model.terms()[input_index];
            let (lambda_j, a_j, b_j) = (term.lambda(), term.a().clone(), term.b().clone());

            if preds.is_empty() {
                group_terms.push(Work {
                    lambda: lambda_j,
                    a: a_j,
                    b: b_j,
                    config,
                });
                continue;
            }

            let coeffs = solve_joint(&processed, &preds, &a_j)?;

            let mut a_res = a_j.clone();
            for (&k, c) in preds.iter().zip(&coeffs) {
                let mut shift = DenseMatrix::zeros(a_res.rows(), a_res.cols());
                shift.add_scaled_kron(1.0, &processed[k].a, c)?;
                a_res = a_res.sub(&shift)?;
            }
            let res_norm = a_res.frobenius_norm();

            // predecessors absorb the projected mass into their B factors
            for (&k, c) in preds.iter().zip(&coeffs) {
                if c.data().iter().all(|&x| x == 0.0) {
                    continue;
                }
                let mut combined = processed[k].b.scale(processed[k].lambda);
                combined.add_scaled_kron(lambda_j, c, &b_j)?;
                let nu = combined.frobenius_norm();
                if nu == 0.0 {
                    return Err(Error::Degenerate(
                        "predecessor term vanished during orthogonalization".to_string(),
                    ));
                }
                processed[k].b = combined.scale(1.0 / nu);
                processed[k].lambda = nu;
            }

            if res_norm < DEGENERACY_TOL {
                changes.push(ChangeEvent::TermMerged {
                    original_index: input_index,
                });
                continue;
            }
            group_terms.push(Work {
                lambda: lambda_j * res_norm,
                a: a_res.scale(1.0 / res_norm),
                b: b_j,
                config,
            });
        }

        // equal-configuration groups must have orthonormal A factors before
        // later terms treat them as predecessors
        if group_terms.len() >= 2 {
            let before = group_terms.len();
            group_terms = merge_equal_config(group_terms, &config)?;
            if group_terms.len() < before {
                changes.push(ChangeEvent::GroupCollapsed {
                    config,
                    before,
                    after: group_terms.len(),
                });
            }
        }
        processed.extend(group_terms);
    }

    // later absorptions can break B-orthogonality inside earlier groups;
    // one more extraction per multi-term group restores it without touching
    // any nested relation (the factors only rotate within the group's span)
    let mut final_terms: Vec<Work> = Vec::with_capacity(processed.len());
    let mut i = 0;
    while i < processed.len() {
        let config = processed[i].config;
        let mut group = Vec::new();
        while i < processed.len() && processed[i].config == config {
            group.push(processed[i].clone());
            i += 1;
        }
        if group.len() >= 2 {
            let before = group.len();
            group = merge_equal_config(group, &config)?;
            if group.len() < before {
                changes.push(ChangeEvent::GroupCollapsed {
                    config,
                    before,
                    after: group.len(),
                });
            }
        }
        final_terms.extend(group);
    }

    let mut terms: Vec<KroneckerTerm> = final_terms
        .into_iter()
        .map(|w| KroneckerTerm::normalize(w.lambda, w.a, w.b, w.config))
        .collect::<Result<_>>()?;
    terms.sort_by(|x, y| y.lambda().total_cmp(&x.lambda()));

    let mut model = HKopaModel::new(ambient, terms)?;
    model.set_canonical(true);
    Ok(GramSchmidtResult { model, changes })
}

/// Re-extract an equal-configuration group from the SVD of
/// Σ λ_i vec(A_i)vec(B_i)ᵀ. Singular values below [`DEGENERACY_TOL`] relative
/// to the leading one are dropped.
fn merge_equal_config(group: Vec<Work>, config: &Configuration) -> Result<Vec<Work>> {
    let mut t = DenseMatrix::zeros(config.a_len(), config.b_len());
    for w in &group {
        let va = vec_matrix(&w.a);
        let vb = vec_matrix(&w.b).transpose();
        t.add_scaled_kron(w.lambda, &va, &vb)?;
    }
    let max_rank = group.len().min(config.a_len()).min(config.b_len());
    let svd = truncated_svd(&t, max_rank)?;
    let s1 = svd.singular_values[0];
    let mut out = Vec::new();
    for (j, &s) in svd.singular_values.iter().enumerate() {
        if s <= DEGENERACY_TOL * s1 || s == 0.0 {
            break;
        }
        let a = crate::rearrange::unvec_slice(
            svd.left_vector(j).data(),
            config.a_rows(),
            config.a_cols(),
        )?;
        let b = crate::rearrange::unvec_slice(
            svd.right_vector(j).data(),
            config.b_rows(),
            config.b_cols(),
        )?;
        out.push(Work {
            lambda: s,
            a,
            b,
            config: *config,
        });
    }
    if out.is_empty() {
        return Err(Error::Degenerate(
            "equal-configuration group sums to zero".to_string(),
        ));
    }
    Ok(out)
}

/// Coefficients of the joint least squares
/// min ‖a_target − Σ_k A_k⊗C_k‖_F² over the predecessor terms.
///
/// Decouples into independent projections when the predecessors are pairwise
/// comparable: processing order guarantees nested pairs are orthogonal and
/// equal-configuration groups orthonormal, which makes their shifted copies
/// mutually orthogonal. Incomparable predecessors require the full solve.
fn solve_joint(
    processed: &[Work],
    preds: &[usize],
    a_target: &DenseMatrix,
) -> Result<Vec<DenseMatrix>> {
    let pairwise_comparable = preds.iter().enumerate().all(|(i, &k)| {
        preds[i + 1..].iter().all(|&l| {
            processed[k].config.is_nested_in(&processed[l].config)
                || processed[l].config.is_nested_in(&processed[k].config)
        })
    });
    if pairwise_comparable {
        return preds
            .iter()
            .map(|&k| projection_coefficients(&processed[k].a, a_target))
            .collect();
    }

    let rows = a_target.rows() * a_target.cols();
    let block_sizes: Vec<(usize, usize)> = preds
        .iter()
        .map(|&k| {
            (
                a_target.rows() / processed[k].a.rows(),
                a_target.cols() / processed[k].a.cols(),
            )
        })
        .collect();
    let n_unknowns: usize = block_sizes.iter().map(|(h, w)| h * w).sum();

    let x = if rows * n_unknowns <= DENSE_SOLVE_LIMIT {
        dense_joint_solve(processed, preds, &block_sizes, a_target, rows, n_unknowns)?
    } else {
        cg_joint_solve(processed, preds, &block_sizes, a_target, n_unknowns)?
    };

    let mut out = Vec::with_capacity(preds.len());
    let mut offset = 0;
    for &(h, w) in &block_sizes {
        out.push(crate::rearrange::unvec_slice(
            &x[offset..offset + h * w],
            h,
            w,
        )?);
        offset += h * w;
    }
    Ok(out)
}

/// Explicit design matrix (one column per shifted copy) + SVD least squares.
fn dense_joint_solve(
    processed: &[Work],
    preds: &[usize],
    block_sizes: &[(usize, usize)],
    a_target: &DenseMatrix,
    rows: usize,
    n_unknowns: usize,
) -> Result<Vec<f64>> {
    let mut design = DenseMatrix::zeros(rows, n_unknowns);
    let mut col = 0;
    for (&k, &(h, w)) in preds.iter().zip(block_sizes) {
        let a_k = &processed[k].a;
        for i in 0..h {
            for j in 0..w {
                for u in 0..a_k.rows() {
                    for v in 0..a_k.cols() {
                        let r = (u * h + i) * a_target.cols() + (v * w + j);
                        design.set(r, col, a_k.get(u, v));
                    }
                }
                col += 1;
            }
        }
    }
    least_squares(&design, a_target.data(), 1e-12)
}

/// Conjugate gradients on the normal equations with implicit operators;
/// used only when the explicit design matrix would be too large.
fn cg_joint_solve(
    processed: &[Work],
    preds: &[usize],
    block_sizes: &[(usize, usize)],
    a_target: &DenseMatrix,
    n_unknowns: usize,
) -> Result<Vec<f64>> {
    let apply = |x: &[f64]| -> Result<DenseMatrix> {
        let mut acc = DenseMatrix::zeros(a_target.rows(), a_target.cols());
        let mut offset = 0;
        for (&k, &(h, w)) in preds.iter().zip(block_sizes) {
            let c = crate::rearrange::unvec_slice(&x[offset..offset + h * w], h, w)?;
            acc.add_scaled_kron(1.0, &processed[k].a, &c)?;
            offset += h * w;
        }
        Ok(acc)
    };
    let adjoint = |y: &DenseMatrix| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n_unknowns);
        for &k in preds {
            let c = projection_coefficients(&processed[k].a, y)?;
            out.extend_from_slice(c.data());
        }
        Ok(out)
    };

    let b = adjoint(a_target)?;
    let mut x = vec![0.0; n_unknowns];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rs_old: f64 = r.iter().map(|v| v * v).sum();
    let b_norm = rs_old.sqrt();
    if b_norm == 0.0 {
        return Ok(x);
    }
    let max_iter = 10 * n_unknowns + 100;
    for _ in 0..max_iter {
        let ap = adjoint(&apply(&p)?)?;
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rs_old / pap;
        for i in 0..n_unknowns {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new: f64 = r.iter().map(|v| v * v).sum();
        if rs_new.sqrt() <= 1e-14 * b_norm {
            break;
        }
        let beta = rs_new / rs_old;
        for i in 0..n_unknowns {
            p[i] = r[i] + beta * p[i];
        }
        rs_old = rs_new;
    }
    Ok(x)
}
