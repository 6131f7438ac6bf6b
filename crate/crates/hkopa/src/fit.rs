//! The estimators: single-term fitting at a fixed configuration,
//! configuration selection by information criterion, backfitting for a known
//! configuration multiset, and the greedy multi-term algorithm with the
//! random-matrix stopping rule.
//!
//! Everything reduces to one primitive. For a configuration (p, q),
//!
//! ```text
//! ‖Y − λ·A⊗B‖_F² = ‖R[Y] − λ·vec(A)vec(B)ᵀ‖_F²,
//! ```
//!
//! so the best single term of that configuration is the leading singular
//! triplet of the rearranged matrix, and the best set of r equal-configured
//! terms is the top-r truncation.

use rayon::prelude::*;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{enumerate_configurations, AmbientShape, Configuration};
use crate::error::Error;
use crate::lowrank::truncated_svd;
use crate::matrix::DenseMatrix;
use crate::orthogonalize::gram_schmidt;
use crate::rearrange::{rearrange, unvec_slice};
use crate::terms::{HKopaModel, KroneckerTerm};
use crate::Result;

/// Penalty coefficient of the information criterion
/// IC_q = T·ln(residual²/T) + q·(number of parameters), T = P·Q.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ICSpec {
    q: f64,
}

impl ICSpec {
    /// q = 0: selection by mean squared error alone.
    pub fn mse() -> Self {
        Self { q: 0.0 }
    }

    /// q = 2, the Akaike criterion.
    pub fn aic() -> Self {
        Self { q: 2.0 }
    }

    /// q = ln(P·Q), the Bayes criterion ((M+N)·ln 2 for power-of-two shapes).
    pub fn bic(shape: AmbientShape) -> Self {
        Self {
            q: (shape.len() as f64).ln(),
        }
    }

    pub fn custom(q: f64) -> Result<Self> {
        if !(q >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "penalty coefficient must be nonnegative, got {q}"
            )));
        }
        Ok(Self { q })
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

/// When the greedy algorithm stops adding terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StoppingRule {
    /// Run to `max_terms`.
    None,
    /// Stop (and roll the candidate term back) once its coefficient falls
    /// below the spectral-norm level of pure Gaussian noise at the selected
    /// configuration, with tail probability `prob_bound`.
    RandomMatrix { prob_bound: f64 },
    /// Stop once the cumulated fraction of variance explained reaches
    /// `fraction` (the crossing term is kept).
    TargetCpv { fraction: f64 },
}

/// Knobs shared by the fitting routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_terms: usize,
    pub ic: ICSpec,
    pub stopping: StoppingRule,
    pub backfit_tol: f64,
    pub backfit_max_rounds: usize,
    /// Run the backfitting refinement on the selected configurations after
    /// the greedy pass.
    pub refine: bool,
    /// Number of backfitting restarts; restarts beyond the first shuffle the
    /// group update order, seeded from `seed`.
    pub restarts: usize,
    pub seed: u64,
}

impl FitOptions {
    pub fn new(shape: AmbientShape) -> Self {
        Self {
            max_terms: 20,
            ic: ICSpec::bic(shape),
            stopping: StoppingRule::None,
            backfit_tol: 1e-10,
            backfit_max_rounds: 200,
            refine: false,
            restarts: 1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_terms == 0 {
            return Err(Error::InvalidParameter("max_terms must be positive".into()));
        }
        if !(self.backfit_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "backfit_tol must be positive".into(),
            ));
        }
        if self.backfit_max_rounds == 0 {
            return Err(Error::InvalidParameter(
                "backfit_max_rounds must be positive".into(),
            ));
        }
        match self.stopping {
            StoppingRule::RandomMatrix { prob_bound } => {
                if !(prob_bound > 0.0 && prob_bound < 1.0) {
                    return Err(Error::InvalidParameter(
                        "stopping probability bound must lie in (0,1)".into(),
                    ));
                }
            }
            StoppingRule::TargetCpv { fraction } => {
                if !(fraction > 0.0 && fraction <= 1.0) {
                    return Err(Error::InvalidParameter(
                        "target explained-variance fraction must lie in (0,1]".into(),
                    ));
                }
            }
            StoppingRule::None => {}
        }
        Ok(())
    }
}

/// Why a fit ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopCause {
    MaxTerms,
    RandomMatrix,
    TargetCpv,
    ExactFit,
    Converged,
}

impl StopCause {
    pub fn label(&self) -> &'static str {
        match self {
            StopCause::MaxTerms => "max_terms",
            StopCause::RandomMatrix => "rmt",
            StopCause::TargetCpv => "cpv",
            StopCause::ExactFit => "exact",
            StopCause::Converged => "converged",
        }
    }
}

/// One per-term record of a fit.
#[derive(Debug, Clone)]
pub struct FitRow {
    /// 1-based term index.
    pub k: usize,
    pub config: Configuration,
    pub lambda: f64,
    /// Single-term criterion value at selection time; `None` marks an exact
    /// fit (criterion conceptually −∞).
    pub ic_value: Option<f64>,
    /// Overall criterion of the model up to this term (diagnostic only,
    /// ic-count convention).
    pub overall_ic: Option<f64>,
    /// Cumulated percentage of variance explained, 0..=100.
    pub cpv: f64,
    /// Frobenius norm of the residual after this term.
    pub residual_fro: f64,
    pub ic_count: usize,
    pub report_count: usize,
}

/// Per-term rows plus run-level diagnostics.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub rows: Vec<FitRow>,
    pub stopped_by: StopCause,
    /// ‖y − ŷ‖² after each backfitting round (empty for pure greedy runs).
    pub round_objectives: Vec<f64>,
    pub refined: bool,
}

/// Best single Kronecker term of a fixed configuration.
#[derive(Debug, Clone)]
pub struct SingleFit {
    pub term: KroneckerTerm,
    /// ‖y‖² − λ̂², clamped at zero.
    pub residual_sq: f64,
}

/// Least-squares fit of one term λ·A⊗B with configuration `c` to `y`.
pub fn fit_single_given_config(y: &DenseMatrix, c: &Configuration) -> Result<SingleFit> {
    if !y.all_finite() {
        return Err(Error::NonFinite);
    }
    let norm_sq = y.frobenius_norm_sq();
    if norm_sq == 0.0 {
        return Err(Error::Degenerate(
            "cannot fit a Kronecker term to the zero matrix".to_string(),
        ));
    }
    let z = rearrange(y, c)?;
    let svd = truncated_svd(&z, 1)?;
    let s1 = svd.singular_values[0];
    if s1 == 0.0 {
        return Err(Error::Degenerate("rearranged matrix is zero".to_string()));
    }
    let a = unvec_slice(svd.left_vector(0).data(), c.a_rows(), c.a_cols())?;
    let b = unvec_slice(svd.right_vector(0).data(), c.b_rows(), c.b_cols())?;
    let term = KroneckerTerm::normalize(s1, a, b, *c)?;
    Ok(SingleFit {
        term,
        residual_sq: (norm_sq - s1 * s1).max(0.0),
    })
}

/// IC_q value for a single-term fit leaving `residual_sq`; errors when the
/// fit is exact (callers treat that as −∞ and select it directly).
pub fn ic_value(residual_sq: f64, c: &Configuration, ic: &ICSpec) -> Result<f64> {
    if residual_sq <= 0.0 {
        return Err(Error::Degenerate(
            "exact fit: information criterion is unbounded below".to_string(),
        ));
    }
    let t = c.ambient().len() as f64;
    Ok(t * (residual_sq / t).ln() + ic.q() * c.parameter_count().ic_count as f64)
}

/// Spectral-norm level of pure Gaussian noise at configuration `c`:
/// σ̂·(√(pq) + √(PQ/(pq)) + t) with t = √(2·ln(1/prob_bound)).
pub fn stopping_threshold(sigma_hat: f64, c: &Configuration, prob_bound: f64) -> f64 {
    let t = (2.0 * (1.0 / prob_bound).ln()).sqrt();
    let d = c.a_len() as f64;
    let rest = (c.ambient().len() as f64) / d;
    sigma_hat * (d.sqrt() + rest.sqrt() + t)
}

/// Winner of a configuration search.
#[derive(Debug, Clone)]
pub struct SelectedFit {
    pub term: KroneckerTerm,
    pub residual_sq: f64,
    /// `None` marks an exact fit.
    pub ic_value: Option<f64>,
}

/// Fit every enumerable configuration of `y`'s shape and keep the
/// IC-minimizing one.
pub fn fit_single_select_config(y: &DenseMatrix, ic: &ICSpec) -> Result<SelectedFit> {
    fit_single_select_among(y, &enumerate_configurations(y.shape()), ic)
}

/// Same as [`fit_single_select_config`] over an explicit candidate list.
/// Ties break toward fewer parameters, then lexicographic (p, q); the
/// parallel search reduces in list order, so results are deterministic.
pub fn fit_single_select_among(
    y: &DenseMatrix,
    configs: &[Configuration],
    ic: &ICSpec,
) -> Result<SelectedFit> {
    if configs.is_empty() {
        return Err(Error::EmptyConfigs);
    }
    for c in configs {
        if c.ambient() != y.shape() {
            return Err(Error::ShapeMismatch {
                expected_rows: y.rows(),
                expected_cols: y.cols(),
                rows: c.ambient().rows,
                cols: c.ambient().cols,
            });
        }
    }
    let candidates: Vec<(SingleFit, Option<f64>)> = configs
        .par_iter()
        .map(|c| {
            let fit = fit_single_given_config(y, c)?;
            let ic_val = if fit.residual_sq == 0.0 {
                None
            } else {
                Some(ic_value(fit.residual_sq, c, ic)?)
            };
            Ok((fit, ic_val))
        })
        .collect::<Result<_>>()?;

    let best = candidates
        .into_iter()
        .min_by(|(fa, ia), (fb, ib)| {
            let key = |fit: &SingleFit, icv: &Option<f64>| {
                let pc = fit.term.config().parameter_count().ic_count;
                (
                    icv.unwrap_or(f64::NEG_INFINITY),
                    pc,
                    fit.term.config().a_rows(),
                    fit.term.config().a_cols(),
                )
            };
            let (va, pa, ra, ca) = key(fa, ia);
            let (vb, pb, rb, cb) = key(fb, ib);
            va.total_cmp(&vb)
                .then(pa.cmp(&pb))
                .then(ra.cmp(&rb))
                .then(ca.cmp(&cb))
        })
        .expect("nonempty candidates");
    Ok(SelectedFit {
        residual_sq: best.0.residual_sq,
        ic_value: best.1,
        term: best.0.term,
    })
}

/// Greedy hybrid fit over the full configuration lattice of `y`'s shape.
pub fn greedy_fit(y: &DenseMatrix, opts: &FitOptions) -> Result<(HKopaModel, FitReport)> {
    greedy_fit_among(y, &enumerate_configurations(y.shape()), opts)
}

/// Greedy hybrid fit restricted to `configs`: one IC-selected term per
/// iteration on the running residual, with optional stopping rule and
/// optional backfitting refinement.
pub fn greedy_fit_among(
    y: &DenseMatrix,
    configs: &[Configuration],
    opts: &FitOptions,
) -> Result<(HKopaModel, FitReport)> {
    opts.validate()?;
    if !y.all_finite() {
        return Err(Error::NonFinite);
    }
    let shape = y.shape();
    let norm_y_sq = y.frobenius_norm_sq();
    let t_len = shape.len() as f64;

    let mut model = HKopaModel::empty(shape);
    let mut rows = Vec::new();
    let mut residual = y.clone();
    let mut cumulative_ic_count = 0usize;
    let mut stopped_by = StopCause::MaxTerms;

    for k in 1..=opts.max_terms {
        if residual.frobenius_norm_sq() == 0.0 {
            stopped_by = StopCause::ExactFit;
            break;
        }
        let selected = fit_single_select_among(&residual, configs, &opts.ic)?;
        let next_residual = residual.sub(&selected.term.to_matrix())?;
        let next_norm = next_residual.frobenius_norm();

        if let StoppingRule::RandomMatrix { prob_bound } = opts.stopping {
            let sigma_hat = next_norm / t_len.sqrt();
            let threshold = stopping_threshold(sigma_hat, selected.term.config(), prob_bound);
            // candidates at the floating-point floor are never significant,
            // even though an exactly-fit residual makes σ̂ collapse to zero
            let floor = 1e-14 * norm_y_sq.sqrt();
            if selected.term.lambda() <= threshold.max(floor) {
                stopped_by = StopCause::RandomMatrix;
                break;
            }
        }

        let cpv = 100.0 * (1.0 - next_norm * next_norm / norm_y_sq);
        let pc = selected.term.config().parameter_count();
        cumulative_ic_count += pc.ic_count;
        let overall_ic = if next_norm > 0.0 {
            Some(
                t_len * (next_norm * next_norm / t_len).ln()
                    + opts.ic.q() * cumulative_ic_count as f64,
            )
        } else {
            None
        };
        rows.push(FitRow {
            k,
            config: *selected.term.config(),
            lambda: selected.term.lambda(),
            ic_value: selected.ic_value,
            overall_ic,
            cpv,
            residual_fro: next_norm,
            ic_count: pc.ic_count,
            report_count: pc.report_count,
        });
        model.push(selected.term);
        residual = next_residual;

        if let StoppingRule::TargetCpv { fraction } = opts.stopping {
            if cpv >= 100.0 * fraction {
                stopped_by = StopCause::TargetCpv;
                break;
            }
        }
    }

    let mut report = FitReport {
        rows,
        stopped_by,
        round_objectives: Vec::new(),
        refined: false,
    };

    if opts.refine && !model.is_empty() {
        let selected_configs: Vec<Configuration> =
            model.terms().iter().map(|t| *t.config()).collect();
        let (refined, backfit_report) = backfit(y, &selected_configs, opts)?;
        report.refined = true;
        report.round_objectives = backfit_report.round_objectives;
        return Ok((refined, report));
    }
    Ok((model, report))
}

/// Backfitting (alternating least squares) for a known configuration
/// multiset. Terms sharing a configuration are refit simultaneously from the
/// top-r singular triplets of the shared residual; each round ends with the
/// Gram-Schmidt canonicalization, which leaves the objective unchanged.
pub fn backfit(
    y: &DenseMatrix,
    configs: &[Configuration],
    opts: &FitOptions,
) -> Result<(HKopaModel, FitReport)> {
    backfit_observed(y, configs, opts, |_, _| {})
}

/// [`backfit`] with a per-round observer; the model passed to the observer
/// is the canonicalized state at the end of each round.
pub fn backfit_observed(
    y: &DenseMatrix,
    configs: &[Configuration],
    opts: &FitOptions,
    mut observer: impl FnMut(usize, &HKopaModel),
) -> Result<(HKopaModel, FitReport)> {
    opts.validate()?;
    if configs.is_empty() {
        return Err(Error::EmptyConfigs);
    }
    for c in configs {
        if c.ambient() != y.shape() {
            return Err(Error::ShapeMismatch {
                expected_rows: y.rows(),
                expected_cols: y.cols(),
                rows: c.ambient().rows,
                cols: c.ambient().cols,
            });
        }
    }
    if !y.all_finite() {
        return Err(Error::NonFinite);
    }

    // group repeated configurations, keeping first-occurrence order
    let mut groups: Vec<(Configuration, usize)> = Vec::new();
    for c in configs {
        match groups.iter_mut().find(|(g, _)| g == c) {
            Some((_, count)) => *count += 1,
            None => groups.push((*c, 1)),
        }
    }

    let restarts = opts.restarts.max(1);
    let mut best: Option<(f64, HKopaModel, Vec<f64>)> = None;
    for restart in 0..restarts {
        let mut order: Vec<usize> = (0..groups.len()).collect();
        if restart > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(restart as u64));
            for i in (1..order.len()).rev() {
                let j = (rng.next_u64() % (i as u64 + 1)) as usize;
                order.swap(i, j);
            }
        }
        let shuffled: Vec<(Configuration, usize)> = order.iter().map(|&i| groups[i]).collect();
        // only the first restart drives the observer, so observed traces
        // refer to the documented update order
        let (model, objectives) = if restart == 0 {
            single_backfit(y, &shuffled, opts, &mut observer)?
        } else {
            single_backfit(y, &shuffled, opts, &mut |_, _| {})?
        };
        let obj = *objectives.last().expect("at least one round");
        let better = match &best {
            None => true,
            Some((prev, _, _)) => obj < *prev,
        };
        if better {
            best = Some((obj, model, objectives));
        }
    }
    let (_, model, round_objectives) = best.expect("at least one restart");

    let norm_y_sq = y.frobenius_norm_sq();
    let mut rows = Vec::new();
    let mut partial = DenseMatrix::zeros(y.rows(), y.cols());
    for (k, term) in model.terms().iter().enumerate() {
        partial.add_scaled_kron(term.lambda(), term.a(), term.b())?;
        let resid = y.sub(&partial)?.frobenius_norm();
        let pc = term.config().parameter_count();
        rows.push(FitRow {
            k: k + 1,
            config: *term.config(),
            lambda: term.lambda(),
            ic_value: None,
            overall_ic: None,
            cpv: if norm_y_sq > 0.0 {
                100.0 * (1.0 - resid * resid / norm_y_sq)
            } else {
                0.0
            },
            residual_fro: resid,
            ic_count: pc.ic_count,
            report_count: pc.report_count,
        });
    }
    let stopped_by = if round_objectives.len() < opts.backfit_max_rounds {
        StopCause::Converged
    } else {
        StopCause::MaxTerms
    };
    Ok((
        model,
        FitReport {
            rows,
            stopped_by,
            round_objectives,
            refined: false,
        },
    ))
}

fn single_backfit(
    y: &DenseMatrix,
    groups: &[(Configuration, usize)],
    opts: &FitOptions,
    observer: &mut dyn FnMut(usize, &HKopaModel),
) -> Result<(HKopaModel, Vec<f64>)> {
    let shape = y.shape();
    let norm_y_sq = y.frobenius_norm_sq();
    let mut group_terms: Vec<Vec<KroneckerTerm>> = vec![Vec::new(); groups.len()];
    let mut prev_obj = norm_y_sq;
    let mut objectives = Vec::new();
    let mut model = HKopaModel::empty(shape);

    for round in 1..=opts.backfit_max_rounds {
        for gi in 0..groups.len() {
            let (config, r) = groups[gi];
            let mut partial_residual = y.clone();
            for (gj, terms) in group_terms.iter().enumerate() {
                if gj == gi {
                    continue;
                }
                for t in terms {
                    partial_residual.add_scaled_kron(-t.lambda(), t.a(), t.b())?;
                }
            }
            let z = rearrange(&partial_residual, &config)?;
            let rank = r.min(z.rows()).min(z.cols());
            let svd = truncated_svd(&z, rank)?;
            let mut new_terms = Vec::with_capacity(rank);
            for j in 0..rank {
                let s = svd.singular_values[j];
                if s <= 0.0 {
                    break;
                }
                let a = unvec_slice(svd.left_vector(j).data(), config.a_rows(), config.a_cols())?;
                let b = unvec_slice(svd.right_vector(j).data(), config.b_rows(), config.b_cols())?;
                new_terms.push(KroneckerTerm::normalize(s, a, b, config)?);
            }
            group_terms[gi] = new_terms;
        }

        let flat: Vec<KroneckerTerm> = group_terms.iter().flatten().cloned().collect();
        let canonical = gram_schmidt(&HKopaModel::new(shape, flat)?)?.model;
        // redistribute into group slots so the next round refits per group
        for (gi, (config, _)) in groups.iter().enumerate() {
            group_terms[gi] = canonical
                .terms()
                .iter()
                .filter(|t| t.config() == config)
                .cloned()
                .collect();
        }
        let obj = y.sub(&canonical.evaluate())?.frobenius_norm_sq();
        objectives.push(obj);
        observer(round, &canonical);
        model = canonical;

        // relative to the current objective, so noiseless fits run down to
        // the floating-point floor instead of stalling near ‖y‖²·tol
        if obj == 0.0 || prev_obj - obj < opts.backfit_tol * prev_obj {
            break;
        }
        prev_obj = obj;
    }
    Ok((model, objectives))
}
