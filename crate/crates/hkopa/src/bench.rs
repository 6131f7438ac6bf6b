//! Two-term simulation generator and experiment driver.
//!
//! The generated instance is Y = λ₁·A₁⊗B₁ + λ₂·A₂⊗B₂ + σE with the first
//! configuration nested in the second, the A factors orthogonalized in the
//! nested sense, and the linear dependence of B₁ on B₂ controlled by a
//! mixing weight α:
//!
//! ```text
//! B₁ = (B̃₁ + α·1⊗B̃₂) / √(1 + α²·(p₂q₂)/(p₁q₁)),   σ = σ₀/√(P·Q).
//! ```
//!
//! At α = 0 the B factors are independent and backfitting converges in one
//! round; as α grows B₁ collapses onto 1⊗B₂ and convergence slows. The
//! driver runs backfitting with the known configurations and records
//! per-round component errors (sign-aligned Frobenius distances, matched by
//! configuration).

use crate::config::{AmbientShape, Configuration};
use crate::error::Error;
use crate::fit::{backfit_observed, FitOptions, FitReport};
use crate::matrix::{DenseMatrix, GaussianSource};
use crate::orthogonalize::{gram_schmidt, projection_coefficients};
use crate::terms::{HKopaModel, KroneckerTerm};
use crate::Result;

/// Ground-truth construction parameters for one simulated instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSpec {
    pub shape: AmbientShape,
    /// Configuration of the first term; must be nested in `config2`.
    pub config1: Configuration,
    pub config2: Configuration,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Linear-dependence weight between the B factors.
    pub alpha: f64,
    /// Normalized noise level; the entrywise deviation is σ₀/√(P·Q).
    pub sigma0: f64,
    pub seed: u64,
}

impl SimulationSpec {
    /// 128×128 with factor shapes 8×8 and 16×16; small enough for tests.
    pub fn desk(alpha: f64, sigma0: f64, seed: u64) -> Self {
        let shape = AmbientShape::new(128, 128).expect("static shape");
        Self {
            shape,
            config1: Configuration::new(8, 8, shape).expect("static config"),
            config2: Configuration::new(16, 16, shape).expect("static config"),
            lambda1: 1.0,
            lambda2: 1.0,
            alpha,
            sigma0,
            seed,
        }
    }

    /// 512×512 with factor shapes 16×16 and 32×32.
    pub fn paper(alpha: f64, sigma0: f64, seed: u64) -> Self {
        let shape = AmbientShape::new(512, 512).expect("static shape");
        Self {
            shape,
            config1: Configuration::new(16, 16, shape).expect("static config"),
            config2: Configuration::new(32, 32, shape).expect("static config"),
            lambda1: 1.0,
            lambda2: 1.0,
            alpha,
            sigma0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.config1.ambient() != self.shape || self.config2.ambient() != self.shape {
            return Err(Error::InvalidParameter(
                "simulation configurations must live in the simulation shape".into(),
            ));
        }
        if !self.config1.is_nested_in(&self.config2) || self.config1 == self.config2 {
            return Err(Error::InvalidParameter(
                "config1 must be strictly nested in config2".into(),
            ));
        }
        if !(self.lambda1 > 0.0 && self.lambda2 > 0.0) {
            return Err(Error::InvalidParameter("lambdas must be positive".into()));
        }
        if !(self.alpha >= 0.0) || !(self.sigma0 >= 0.0) {
            return Err(Error::InvalidParameter(
                "alpha and sigma0 must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Simulated observation plus the ground truth it came from.
#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub y: DenseMatrix,
    pub truth: HKopaModel,
}

fn unit_gaussian(src: &mut GaussianSource, rows: usize, cols: usize) -> DenseMatrix {
    let m = src.gaussian_matrix(rows, cols);
    let norm = m.frobenius_norm();
    m.scale(1.0 / norm)
}

/// Residualize `larger` against the shifted copies of `smaller` and
/// renormalize, so the projection coefficients of the result are zero.
fn orthogonalized_against(larger: &DenseMatrix, smaller: &DenseMatrix) -> Result<DenseMatrix> {
    let coeff = projection_coefficients(smaller, larger)?;
    let mut shift = DenseMatrix::zeros(larger.rows(), larger.cols());
    shift.add_scaled_kron(1.0, smaller, &coeff)?;
    let resid = larger.sub(&shift)?;
    let norm = resid.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::Degenerate(
            "drawn factor lies entirely in the nested span".to_string(),
        ));
    }
    Ok(resid.scale(1.0 / norm))
}

/// Mirror-side residualization: remove the best C⊗`smaller` from `larger`
/// (smaller factor trailing) and renormalize. The B₁ mixing term is
/// 1⊗B̃₂, so exactness of the mixing normalizer needs orthogonality against
/// the trailing copies, block (i,j) of `larger` against `smaller`.
fn orthogonalized_against_trailing(
    larger: &DenseMatrix,
    smaller: &DenseMatrix,
) -> Result<DenseMatrix> {
    if larger.rows() % smaller.rows() != 0 || larger.cols() % smaller.cols() != 0 {
        return Err(Error::NotADivisor {
            a_rows: smaller.rows(),
            a_cols: smaller.cols(),
            rows: larger.rows(),
            cols: larger.cols(),
        });
    }
    let h = larger.rows() / smaller.rows();
    let w = larger.cols() / smaller.cols();
    let mut coeff = DenseMatrix::zeros(h, w);
    for i in 0..h {
        for j in 0..w {
            let block = larger.block(i, j, smaller.rows(), smaller.cols());
            coeff.set(i, j, block.trace_product(smaller)?);
        }
    }
    let mut shift = DenseMatrix::zeros(larger.rows(), larger.cols());
    shift.add_scaled_kron(1.0, &coeff, smaller)?;
    let resid = larger.sub(&shift)?;
    let norm = resid.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::Degenerate(
            "drawn factor lies entirely in the trailing span".to_string(),
        ));
    }
    Ok(resid.scale(1.0 / norm))
}

/// Draw one instance: normalized Gaussian factors, nested orthogonalization
/// on both sides, the α mixing on B₁, and seeded noise.
pub fn generate(spec: &SimulationSpec) -> Result<GeneratedInstance> {
    spec.validate()?;
    let mut src = GaussianSource::new(spec.seed);
    let (c1, c2) = (spec.config1, spec.config2);

    let a1 = unit_gaussian(&mut src, c1.a_rows(), c1.a_cols());
    let a2_raw = unit_gaussian(&mut src, c2.a_rows(), c2.a_cols());
    let a2 = orthogonalized_against(&a2_raw, &a1)?;

    let b1_raw = unit_gaussian(&mut src, c1.b_rows(), c1.b_cols());
    let b2 = unit_gaussian(&mut src, c2.b_rows(), c2.b_cols());
    let b1_tilde = orthogonalized_against_trailing(&b1_raw, &b2)?;

    let ones = DenseMatrix::new(
        c2.a_rows() / c1.a_rows(),
        c2.a_cols() / c1.a_cols(),
        vec![1.0; (c2.a_rows() / c1.a_rows()) * (c2.a_cols() / c1.a_cols())],
    )?;
    let blowup = (c2.a_len() as f64) / (c1.a_len() as f64);
    let normalizer = (1.0 + spec.alpha * spec.alpha * blowup).sqrt();
    let mut b1 = b1_tilde.clone();
    b1.add_scaled_kron(spec.alpha, &ones, &b2)?;
    let b1 = b1.scale(1.0 / normalizer);

    let term1 = KroneckerTerm::normalize(spec.lambda1, a1, b1, c1)?;
    let term2 = KroneckerTerm::normalize(spec.lambda2, a2, b2, c2)?;
    let truth = HKopaModel::new(spec.shape, vec![term1, term2])?;

    let mut y = truth.evaluate();
    if spec.sigma0 > 0.0 {
        let sigma = spec.sigma0 / (spec.shape.len() as f64).sqrt();
        let noise = src.gaussian_matrix(spec.shape.rows, spec.shape.cols);
        y = y.add(&noise.scale(sigma))?;
    }
    Ok(GeneratedInstance { y, truth })
}

/// Sign-aligned per-round distances between the fit and the truth.
#[derive(Debug, Clone, Copy)]
pub struct ComponentErrors {
    /// 1-based backfitting round.
    pub iter: usize,
    /// ‖Y − Ŷ‖_F / ‖Y‖_F against the observed matrix.
    pub err_y: f64,
    pub err_a1: f64,
    pub err_a2: f64,
    pub err_b1: f64,
    pub err_b2: f64,
    /// Absolute coefficient errors.
    pub err_lambda1: f64,
    pub err_lambda2: f64,
}

impl ComponentErrors {
    /// (metric name, value) pairs in emission order.
    pub fn metrics(&self) -> [(&'static str, f64); 7] {
        [
            ("err_y", self.err_y),
            ("err_A1", self.err_a1),
            ("err_A2", self.err_a2),
            ("err_B1", self.err_b1),
            ("err_B2", self.err_b2),
            ("err_lambda1", self.err_lambda1),
            ("err_lambda2", self.err_lambda2),
        ]
    }
}

/// One grid cell: the spec it ran with and its per-round error trace.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub alpha: f64,
    pub sigma0: f64,
    pub seed: u64,
    pub rounds: Vec<ComponentErrors>,
    pub report: FitReport,
}

fn sign_aligned_distance(estimate: &DenseMatrix, truth: &DenseMatrix) -> f64 {
    let minus = estimate.sub(truth).map(|d| d.frobenius_norm());
    let plus = estimate.add(truth).map(|d| d.frobenius_norm());
    match (minus, plus) {
        (Ok(a), Ok(b)) => a.min(b),
        _ => f64::NAN,
    }
}

fn component_errors(
    round: usize,
    y: &DenseMatrix,
    model: &HKopaModel,
    truth: &HKopaModel,
) -> ComponentErrors {
    let err_y = match model.residual(y) {
        Ok(r) => r.frobenius_norm() / y.frobenius_norm(),
        Err(_) => f64::NAN,
    };
    let mut per_term = [(f64::NAN, f64::NAN, f64::NAN); 2];
    for (slot, true_term) in truth.terms().iter().enumerate().take(2) {
        let matched = model
            .terms()
            .iter()
            .find(|t| t.config() == true_term.config());
        per_term[slot] = match matched {
            Some(t) => (
                sign_aligned_distance(t.a(), true_term.a()),
                sign_aligned_distance(t.b(), true_term.b()),
                (t.lambda() - true_term.lambda()).abs(),
            ),
            // a merged-away term is maximally wrong: unit factors, zero λ
            None => (1.0, 1.0, true_term.lambda()),
        };
    }
    ComponentErrors {
        iter: round,
        err_y,
        err_a1: per_term[0].0,
        err_b1: per_term[0].1,
        err_lambda1: per_term[0].2,
        err_a2: per_term[1].0,
        err_b2: per_term[1].1,
        err_lambda2: per_term[1].2,
    }
}

/// Generate one instance and backfit it with the known configurations,
/// recording component errors after every round.
pub fn run_cell(spec: &SimulationSpec, opts: &FitOptions) -> Result<CellResult> {
    let instance = generate(spec)?;
    // comparison happens in the identified parameterization
    let truth = if spec.alpha > 0.0 {
        gram_schmidt(&instance.truth)?.model
    } else {
        instance.truth.clone()
    };
    let mut rounds = Vec::new();
    let y = &instance.y;
    let (_, report) = backfit_observed(
        y,
        &[spec.config1, spec.config2],
        opts,
        |round, model| rounds.push(component_errors(round, y, model, &truth)),
    )?;
    Ok(CellResult {
        alpha: spec.alpha,
        sigma0: spec.sigma0,
        seed: spec.seed,
        rounds,
        report,
    })
}

/// Run every (α, σ₀) cell of the grid with the template's shape,
/// configurations and seed.
pub fn run_grid(
    alphas: &[f64],
    sigmas: &[f64],
    template: &SimulationSpec,
    opts: &FitOptions,
) -> Result<Vec<CellResult>> {
    let mut out = Vec::with_capacity(alphas.len() * sigmas.len());
    for &alpha in alphas {
        for &sigma0 in sigmas {
            let spec = SimulationSpec {
                alpha,
                sigma0,
                ..*template
            };
            out.push(run_cell(&spec, opts)?);
        }
    }
    Ok(out)
}
