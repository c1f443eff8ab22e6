//! Outer estimation loop: alternate the coefficient step and the
//! inverse-covariance step, select the lag order by BIC, and search penalty
//! grids.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::flt;
use crate::jgl::{admm_fgl, residual_covariances, AdmmOptions};
use crate::mat::Mat;
use crate::model::{objective, FitDiagnostics, MultiClassVarFit, PenaltyConfig};
use crate::panel::{build_lagged_design, LaggedDesign, ReturnPanel};
use crate::spg::{spg_fit_grams, GlsGrams, SpgOptions};

/// Standardization slack accepted on input panels.
const STANDARDIZATION_TOL: f64 = 1e-6;

/// Tolerance under which cross-class coefficient values are merged when
/// counting degrees of freedom.
pub const FUSION_MERGE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub outer_max: usize,
    /// Relative-change tolerance on both blocks, checked per outer iteration.
    pub outer_tol: f64,
    pub spg: SpgOptions,
    pub admm: AdmmOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            outer_max: 25,
            outer_tol: 1e-4,
            spg: SpgOptions::default(),
            admm: AdmmOptions::default(),
        }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<()> {
        if self.outer_tol.is_nan() || self.outer_tol <= 0.0 || self.outer_max == 0 {
            return Err(Error::InvalidParameter(
                "outer tolerance and cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Fits the multi-class VAR at fixed penalties.
///
/// Starts from identity inverse covariances, then alternates the smoothing
/// proximal gradient coefficient step (warm-started) with the fused joint
/// graphical lasso on residual covariances until the larger of the two
/// relative block changes falls below `outer_tol`.
pub fn fit(
    panel: &ReturnPanel,
    p: usize,
    penalty: &PenaltyConfig,
    opts: &FitOptions,
) -> Result<MultiClassVarFit> {
    panel.verify_standardized(STANDARDIZATION_TOL)?;
    let designs = build_lagged_design(panel, p)?;
    let grams: Vec<GlsGrams> = designs.iter().map(GlsGrams::new).collect();
    let (b, omega, diagnostics) = fit_alternation(&designs, &grams, penalty, opts, None)?;
    Ok(MultiClassVarFit {
        classes: panel.classes.clone(),
        series: panel.series.clone(),
        p,
        b,
        omega,
        penalty: *penalty,
        diagnostics,
    })
}

/// One run of the outer alternation, optionally warm-started.
fn fit_alternation(
    designs: &[LaggedDesign],
    grams: &[GlsGrams],
    penalty: &PenaltyConfig,
    opts: &FitOptions,
    warm: Option<(&[Mat], &[Mat])>,
) -> Result<(Vec<Mat>, Vec<Mat>, FitDiagnostics)> {
    opts.validate()?;
    let k_n = designs.len();
    let j = designs[0].responses.cols();

    let (mut b, mut omega) = match warm {
        Some((wb, womega)) => (wb.to_vec(), womega.to_vec()),
        None => (
            (0..k_n)
                .map(|_| Mat::zeros(j, designs[0].predictors.cols()))
                .collect(),
            (0..k_n).map(|_| Mat::eye(j)).collect::<Vec<_>>(),
        ),
    };

    let mut trace = Vec::new();
    let mut converged = false;
    let mut outer_iterations = 0;

    for _outer in 0..opts.outer_max {
        outer_iterations += 1;

        let spg = spg_fit_grams(
            grams,
            &omega,
            penalty.lambda1,
            penalty.lambda2,
            &opts.spg,
            Some(&b),
        )?;
        let b_new = spg.b;

        let covs = residual_covariances(&b_new, designs);
        let s: Vec<Mat> = covs.iter().map(|(m, _)| m.clone()).collect();
        let n: Vec<usize> = covs.iter().map(|(_, n)| *n).collect();
        // the objective's fusion runs over ordered class pairs; the ADMM
        // solver counts unordered pairs, hence the factor two
        let jgl = admm_fgl(&s, &n, penalty.lambda3, 2.0 * penalty.lambda4, &opts.admm)?;

        // monotone safeguard: never let the omega block increase the
        // objective (also rejects a non-positive-definite consensus iterate
        // from a capped ADMM run)
        let g_old = omega_block_objective(&omega, &s, &n, penalty);
        let g_new = omega_block_objective(&jgl.omega, &s, &n, penalty);
        let omega_new = match (g_new, g_old) {
            (Some(new), Some(old)) if new <= old => jgl.omega,
            (Some(_), None) | (None, None) => jgl.omega,
            _ => omega.clone(),
        };

        let obj = objective(&b_new, &omega_new, designs, penalty)?;
        if !obj.is_finite() {
            return Err(Error::NonFiniteObjective {
                iteration: outer_iterations,
            });
        }
        trace.push(obj);

        let rel_b = relative_change(&b_new, &b);
        let rel_omega = relative_change(&omega_new, &omega);
        b = b_new;
        omega = omega_new;
        if rel_b.max(rel_omega) < opts.outer_tol {
            converged = true;
            break;
        }
    }

    Ok((
        b,
        omega,
        FitDiagnostics {
            objective_trace: trace,
            outer_iterations,
            converged,
        },
    ))
}

/// The omega-dependent part of the generalized objective at fixed residual
/// covariances; `None` when a log-determinant is undefined.
fn omega_block_objective(
    omega: &[Mat],
    s: &[Mat],
    n: &[usize],
    penalty: &PenaltyConfig,
) -> Option<f64> {
    let mut acc = 0.0;
    for k in 0..omega.len() {
        let nk = n[k] as f64;
        let log_det = omega[k].log_det_pd()?;
        acc += nk * (s[k].trace_product(&omega[k]) - log_det);
        if penalty.lambda3 > 0.0 {
            for i in 0..omega[k].rows() {
                for jj in 0..omega[k].cols() {
                    if i != jj {
                        acc += penalty.lambda3 * omega[k][(i, jj)].abs();
                    }
                }
            }
        }
    }
    if penalty.lambda4 > 0.0 {
        for k in 0..omega.len() {
            for k2 in (k + 1)..omega.len() {
                for (x, y) in omega[k].as_slice().iter().zip(omega[k2].as_slice()) {
                    acc += 2.0 * penalty.lambda4 * (x - y).abs();
                }
            }
        }
    }
    Some(acc)
}

fn relative_change(new: &[Mat], old: &[Mat]) -> f64 {
    let mut worst = 0.0f64;
    for (a, b) in new.iter().zip(old) {
        let denom = 1.0 + b.frob_norm();
        worst = worst.max(a.sub(b).frob_norm() / denom);
    }
    worst
}

/// Smallest lasso weight at which the coefficient step returns exactly zero
/// (with identity omega and no fusion): the largest absolute entry of the
/// smooth-loss gradient at `B = 0`, which is `2 max |X'Y|`.
pub fn lambda1_max(panel: &ReturnPanel, p: usize) -> Result<f64> {
    let designs = build_lagged_design(panel, p)?;
    Ok(designs
        .iter()
        .map(|d| 2.0 * d.predictors.tr_matmul(&d.responses).max_abs())
        .fold(0.0, f64::max))
}

/// Analogous anchor for the inverse-covariance lasso: the largest absolute
/// off-diagonal entry of `n * S` at `B = 0`, the likelihood gradient scale
/// at the diagonal solution.
pub fn lambda3_max(panel: &ReturnPanel, p: usize) -> Result<f64> {
    let designs = build_lagged_design(panel, p)?;
    let mut worst = 0.0f64;
    for d in &designs {
        let gyy = d.responses.tr_matmul(&d.responses);
        for i in 0..gyy.rows() {
            for j in 0..gyy.cols() {
                if i != j {
                    worst = worst.max(gyy[(i, j)].abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Selects the VAR order by BIC over unpenalized per-class least-squares
/// fits, all evaluated on the common effective sample of `T - p_max` rows.
/// Ties break toward the smaller order.
pub fn select_order(panel: &ReturnPanel, p_max: usize) -> Result<usize> {
    if p_max == 0 {
        return Err(Error::InvalidParameter("p_max must be at least 1".into()));
    }
    let t = panel.n_obs();
    if t <= p_max {
        return Err(Error::InsufficientObservations { t, p: p_max });
    }
    let j = panel.n_series();
    let n_common = t - p_max;
    let mut best: Option<(f64, usize)> = None;
    for p in 1..=p_max {
        let designs = build_lagged_design(panel, p)?;
        let mut bic = 0.0;
        for d in &designs {
            let skip = d.n - n_common;
            let responses = Mat::from_fn(n_common, j, |r, c| d.responses[(skip + r, c)]);
            let predictors = Mat::from_fn(n_common, d.predictors.cols(), |r, c| {
                d.predictors[(skip + r, c)]
            });
            let gxx = predictors.tr_matmul(&predictors);
            let gxy = predictors.tr_matmul(&responses);
            let bt = gxx
                .inverse_pd()
                .ok_or_else(|| Error::SingularRegression("order-selection design".into()))?
                .matmul(&gxy);
            let fitted = predictors.matmul(&bt);
            let resid = responses.sub(&fitted);
            let mut sigma = resid.tr_matmul(&resid);
            sigma.scale(1.0 / n_common as f64);
            let log_det = sigma.log_det_pd().ok_or_else(|| {
                Error::SingularRegression("degenerate residual covariance".into())
            })?;
            bic += n_common as f64 * log_det + flt::ln(n_common as f64) * (j * j * p) as f64;
        }
        if best.is_none_or(|(b, _)| bic < b) {
            best = Some((bic, p));
        }
    }
    Ok(best.expect("p_max >= 1").1)
}

/// Penalty grid: absolute ladders for the two lasso weights and relative
/// factors for the fusion weights (`lambda2 = factor * lambda1`,
/// `lambda4 = factor * lambda3`).
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyGrid {
    pub lambda1: Vec<f64>,
    pub lambda2_factors: Vec<f64>,
    pub lambda3: Vec<f64>,
    pub lambda4_factors: Vec<f64>,
}

impl PenaltyGrid {
    /// A single fixed penalty configuration.
    ///
    /// Fusion weights ride on the grid as multiples of their lasso partner,
    /// so a fusion-only configuration (zero lasso weight, positive fusion
    /// weight) is not representable here; fit such configurations directly
    /// through [`fit`].
    pub fn single(penalty: PenaltyConfig) -> Self {
        assert!(
            (penalty.lambda1 > 0.0 || penalty.lambda2 == 0.0)
                && (penalty.lambda3 > 0.0 || penalty.lambda4 == 0.0),
            "fusion-only penalties cannot ride a lasso-anchored grid"
        );
        PenaltyGrid {
            lambda1: alloc::vec![penalty.lambda1],
            lambda2_factors: alloc::vec![if penalty.lambda1 > 0.0 {
                penalty.lambda2 / penalty.lambda1
            } else {
                0.0
            }],
            lambda3: alloc::vec![penalty.lambda3],
            lambda4_factors: alloc::vec![if penalty.lambda3 > 0.0 {
                penalty.lambda4 / penalty.lambda3
            } else {
                0.0
            }],
        }
    }

    /// Default search space anchored at the data-driven maxima: ten
    /// log-spaced lasso weights down to 1% of the maximum, fusion factors
    /// `{0, 0.25, 0.5, 1, 2}`.
    pub fn default_for(panel: &ReturnPanel, p: usize) -> Result<Self> {
        let l1 = lambda1_max(panel, p)?;
        let l3 = lambda3_max(panel, p)?;
        Ok(PenaltyGrid {
            lambda1: log_spaced(0.01 * l1, l1, 10),
            lambda2_factors: alloc::vec![0.0, 0.25, 0.5, 1.0, 2.0],
            lambda3: log_spaced(0.01 * l3, l3, 10),
            lambda4_factors: alloc::vec![0.0, 0.25, 0.5, 1.0, 2.0],
        })
    }

    fn validate(&self) -> Result<()> {
        if self.lambda1.is_empty()
            || self.lambda2_factors.is_empty()
            || self.lambda3.is_empty()
            || self.lambda4_factors.is_empty()
        {
            return Err(Error::InvalidParameter(
                "penalty grid must be non-empty".into(),
            ));
        }
        Ok(())
    }
}

/// Descending log-spaced ladder from `hi` to `lo`.
fn log_spaced(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 || lo <= 0.0 || hi <= 0.0 || lo >= hi {
        return alloc::vec![hi];
    }
    let (llo, lhi) = (flt::ln(lo), flt::ln(hi));
    (0..points)
        .map(|i| flt::exp(lhi + (llo - lhi) * i as f64 / (points - 1) as f64))
        .collect()
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub penalty: PenaltyConfig,
    pub bic: f64,
    pub df: usize,
    pub nonzero_b: usize,
    pub nonzero_omega_offdiag: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub penalty: PenaltyConfig,
    pub fit: MultiClassVarFit,
    pub table: Vec<GridRow>,
}

/// BIC of a fitted model together with its degree-of-freedom bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BicBreakdown {
    pub bic: f64,
    pub df: usize,
    pub nonzero_b: usize,
    pub nonzero_omega_offdiag: usize,
}

/// Multi-class BIC: `sum_k N log|Sigma_hat_k| + log(N) * df`, where
/// `Sigma_hat_k` is the residual covariance at the fitted coefficients and
/// `df` counts unique nonzero values across classes — cross-class values
/// within [`FUSION_MERGE_TOL`] of each other (fused groups) count once.
/// Coefficients, off-diagonal and diagonal inverse-covariance entries all
/// contribute.
pub fn multiclass_bic(b: &[Mat], omega: &[Mat], designs: &[LaggedDesign]) -> Result<BicBreakdown> {
    let covs = residual_covariances(b, designs);
    let mut likelihood = 0.0;
    for (s, n) in &covs {
        let log_det = s
            .log_det_pd()
            .ok_or_else(|| Error::SingularRegression("degenerate residual covariance".into()))?;
        likelihood += *n as f64 * log_det;
    }

    let k_n = b.len();
    let mut df = 0usize;
    let mut nonzero_b = 0usize;
    let mut values = Vec::with_capacity(k_n);
    for idx in 0..b[0].as_slice().len() {
        values.clear();
        for bk in b {
            let v = bk.as_slice()[idx];
            if v != 0.0 {
                values.push(v);
                nonzero_b += 1;
            }
        }
        df += merged_group_count(&mut values);
    }

    let j = omega[0].rows();
    let mut nonzero_omega_offdiag = 0usize;
    for i in 0..j {
        for jj in i..j {
            values.clear();
            for om in omega {
                let v = om[(i, jj)];
                if v != 0.0 {
                    values.push(v);
                    if i != jj {
                        nonzero_omega_offdiag += 1;
                    }
                }
            }
            df += merged_group_count(&mut values);
        }
    }

    let n = covs[0].1 as f64;
    Ok(BicBreakdown {
        bic: likelihood + flt::ln(n) * df as f64,
        df,
        nonzero_b,
        nonzero_omega_offdiag,
    })
}

/// Number of clusters after merging sorted values closer than the merge
/// tolerance.
fn merged_group_count(values: &mut [f64]) -> usize {
    if values.is_empty() {
        return 0;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let mut groups = 1;
    for w in values.windows(2) {
        if (w[1] - w[0]).abs() >= FUSION_MERGE_TOL {
            groups += 1;
        }
    }
    groups
}

/// Grid search over penalty configurations minimizing the multi-class BIC.
///
/// The lasso path per `(lambda3, lambda4, lambda2)` combination runs from
/// the largest `lambda1` down, warm-starting each fit from its predecessor.
/// Grid points whose BIC is undefined (degenerate residual covariance) are
/// kept in the table with an infinite score.
pub fn select_penalties(
    panel: &ReturnPanel,
    p: usize,
    grid: &PenaltyGrid,
    opts: &FitOptions,
) -> Result<SelectionResult> {
    grid.validate()?;
    panel.verify_standardized(STANDARDIZATION_TOL)?;
    let designs = build_lagged_design(panel, p)?;
    let grams: Vec<GlsGrams> = designs.iter().map(GlsGrams::new).collect();

    let mut lambda1_path = grid.lambda1.clone();
    lambda1_path.sort_by(|a, b| b.total_cmp(a));

    struct Incumbent {
        bic: f64,
        penalty: PenaltyConfig,
        b: Vec<Mat>,
        omega: Vec<Mat>,
        diagnostics: FitDiagnostics,
    }
    let mut table = Vec::new();
    let mut best: Option<Incumbent> = None;

    for &l3 in &grid.lambda3 {
        for &f4 in &grid.lambda4_factors {
            for &f2 in &grid.lambda2_factors {
                let mut warm: Option<(Vec<Mat>, Vec<Mat>)> = None;
                for &l1 in &lambda1_path {
                    let penalty = PenaltyConfig::new(l1, f2 * l1, l3, f4 * l3)?;
                    let (b, omega, diag) = fit_alternation(
                        &designs,
                        &grams,
                        &penalty,
                        opts,
                        warm.as_ref().map(|(b, o)| (b.as_slice(), o.as_slice())),
                    )?;
                    let row = match multiclass_bic(&b, &omega, &designs) {
                        Ok(score) => GridRow {
                            penalty,
                            bic: score.bic,
                            df: score.df,
                            nonzero_b: score.nonzero_b,
                            nonzero_omega_offdiag: score.nonzero_omega_offdiag,
                            converged: diag.converged,
                        },
                        Err(_) => GridRow {
                            penalty,
                            bic: f64::INFINITY,
                            df: 0,
                            nonzero_b: 0,
                            nonzero_omega_offdiag: 0,
                            converged: diag.converged,
                        },
                    };
                    if row.bic.is_finite() && best.as_ref().is_none_or(|cur| row.bic < cur.bic) {
                        best = Some(Incumbent {
                            bic: row.bic,
                            penalty,
                            b: b.clone(),
                            omega: omega.clone(),
                            diagnostics: diag,
                        });
                    }
                    table.push(row);
                    warm = Some((b, omega));
                }
            }
        }
    }

    let chosen = best
        .ok_or_else(|| Error::SingularRegression("no grid point produced a finite BIC".into()))?;
    Ok(SelectionResult {
        penalty: chosen.penalty,
        fit: MultiClassVarFit {
            classes: panel.classes.clone(),
            series: panel.series.clone(),
            p,
            b: chosen.b,
            omega: chosen.omega,
            penalty: chosen.penalty,
            diagnostics: chosen.diagnostics,
        },
        table,
    })
}
