//! Multi-class VAR model objects and the generalized penalized objective.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::panel::{LaggedDesign, SeriesInfo};

/// The four regularization weights.
///
/// `lambda1`/`lambda2` act on the autoregressive coefficients (lasso /
/// cross-class fusion), `lambda3`/`lambda4` on the inverse error covariances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
}

impl PenaltyConfig {
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64, lambda4: f64) -> Result<Self> {
        for (name, v) in [
            ("lambda1", lambda1),
            ("lambda2", lambda2),
            ("lambda3", lambda3),
            ("lambda4", lambda4),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and >= 0"
                )));
            }
        }
        Ok(PenaltyConfig {
            lambda1,
            lambda2,
            lambda3,
            lambda4,
        })
    }

    pub fn zero() -> Self {
        PenaltyConfig {
            lambda1: 0.0,
            lambda2: 0.0,
            lambda3: 0.0,
            lambda4: 0.0,
        }
    }
}

/// Solver trail recorded by the outer alternation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitDiagnostics {
    /// Generalized objective after every outer iteration.
    pub objective_trace: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
}

/// A fitted multi-class VAR.
///
/// `b[k]` is the `J x (J*P)` coefficient matrix of class `k`, lag blocks side
/// by side; entry `(j, i)` of lag block `p` is the lag-`p` effect of series
/// `i` on series `j`. `omega[k]` is the `J x J` inverse error covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiClassVarFit {
    pub classes: Vec<String>,
    pub series: Vec<SeriesInfo>,
    pub p: usize,
    pub b: Vec<Mat>,
    pub omega: Vec<Mat>,
    pub penalty: PenaltyConfig,
    pub diagnostics: FitDiagnostics,
}

impl MultiClassVarFit {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn n_series(&self) -> usize {
        self.series.len()
    }

    /// Lag-`p` effect of series `i` on series `j` in class `k` (`p` is
    /// 1-based).
    pub fn coeff(&self, k: usize, p: usize, j: usize, i: usize) -> f64 {
        self.b[k][(j, (p - 1) * self.n_series() + i)]
    }

    /// Checks dimension consistency, symmetry and positive definiteness.
    pub fn validate(&self) -> Result<()> {
        let (k_n, j_n) = (self.classes.len(), self.series.len());
        if self.b.len() != k_n || self.omega.len() != k_n {
            return Err(Error::DimensionMismatch("class count".into()));
        }
        for k in 0..k_n {
            if self.b[k].rows() != j_n || self.b[k].cols() != j_n * self.p {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient matrix of class {k}"
                )));
            }
            if self.omega[k].rows() != j_n || self.omega[k].cols() != j_n {
                return Err(Error::DimensionMismatch(format!("omega of class {k}")));
            }
            if !self.omega[k].is_symmetric(1e-10) {
                return Err(Error::NotPositiveDefinite(format!(
                    "omega of class {k} not symmetric"
                )));
            }
            if self.omega[k].cholesky().is_none() {
                return Err(Error::NotPositiveDefinite(format!("omega of class {k}")));
            }
        }
        Ok(())
    }
}

/// Number of free parameters of the model: `(K * J^2 * P)` autoregressive
/// coefficients and `K * J * (J + 1) / 2` unique inverse-covariance elements.
pub fn count_parameters(j: usize, k: usize, p: usize) -> (usize, usize) {
    (k * j * j * p, k * j * (j + 1) / 2)
}

/// The generalized penalized least-squares criterion.
///
/// Sum over classes and time of the omega-weighted squared residual minus
/// `log|omega|` (so the log-determinant is weighted by the effective sample
/// size), plus the lasso penalty on coefficients, the coefficient fusion
/// penalty over ordered class pairs, the lasso penalty on off-diagonal
/// inverse-covariance elements, and the inverse-covariance fusion penalty
/// over ordered class pairs.
pub fn objective(
    b: &[Mat],
    omega: &[Mat],
    designs: &[LaggedDesign],
    penalty: &PenaltyConfig,
) -> Result<f64> {
    let k_n = b.len();
    if omega.len() != k_n || designs.len() != k_n {
        return Err(Error::DimensionMismatch(
            "objective needs one B, omega, design per class".into(),
        ));
    }
    let mut total = 0.0;
    for k in 0..k_n {
        let log_det = omega[k]
            .log_det_pd()
            .ok_or_else(|| Error::NotPositiveDefinite(format!("omega of class {k}")))?;
        total += gls_loss(&b[k], &omega[k], &designs[k]);
        total -= designs[k].n as f64 * log_det;
    }
    total += penalty.lambda1
        * b.iter()
            .map(|m| m.as_slice().iter().map(|x| x.abs()).sum::<f64>())
            .sum::<f64>();
    if penalty.lambda2 > 0.0 {
        let mut fusion = 0.0;
        for k in 0..k_n {
            for k2 in (k + 1)..k_n {
                for (x, y) in b[k].as_slice().iter().zip(b[k2].as_slice()) {
                    fusion += (x - y).abs();
                }
            }
        }
        // ordered pairs: each unordered pair counts twice
        total += penalty.lambda2 * 2.0 * fusion;
    }
    if penalty.lambda3 > 0.0 {
        let mut lasso = 0.0;
        for om in omega {
            for i in 0..om.rows() {
                for j in 0..om.cols() {
                    if i != j {
                        lasso += om[(i, j)].abs();
                    }
                }
            }
        }
        total += penalty.lambda3 * lasso;
    }
    if penalty.lambda4 > 0.0 {
        let mut fusion = 0.0;
        for k in 0..k_n {
            for k2 in (k + 1)..k_n {
                for (x, y) in omega[k].as_slice().iter().zip(omega[k2].as_slice()) {
                    fusion += (x - y).abs();
                }
            }
        }
        total += penalty.lambda4 * 2.0 * fusion;
    }
    Ok(total)
}

/// `sum_t (y_t - B Y_t)' Omega (y_t - B Y_t)` for one class.
pub(crate) fn gls_loss(b: &Mat, omega: &Mat, design: &LaggedDesign) -> f64 {
    let residuals = residual_matrix(b, design);
    let mut acc = 0.0;
    for t in 0..residuals.rows() {
        let e = residuals.row(t);
        for i in 0..omega.rows() {
            let mut oe = 0.0;
            for j in 0..omega.cols() {
                oe += omega[(i, j)] * e[j];
            }
            acc += e[i] * oe;
        }
    }
    acc
}

/// `E = Y_resp - X B'`, the `N x J` residual matrix of one class.
pub(crate) fn residual_matrix(b: &Mat, design: &LaggedDesign) -> Mat {
    let fitted = design.predictors.matmul_transb(b);
    design.responses.sub(&fitted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{build_lagged_design, ReturnPanel, Scaling};
    use crate::rng::Rng;
    use alloc::borrow::ToOwned;
    use alloc::vec;

    #[test]
    fn parameter_counts() {
        assert_eq!(count_parameters(14, 3, 1), (588, 315));
        assert_eq!(count_parameters(17, 5, 1), (1445, 765));
        assert_eq!(count_parameters(1, 1, 1), (1, 1));
    }

    fn random_panel(k_n: usize, j_n: usize, t: usize, seed: u64) -> ReturnPanel {
        let mut rng = Rng::new(seed);
        let values: Vec<f64> = (0..k_n * j_n * t).map(|_| rng.standard_normal()).collect();
        ReturnPanel::from_values(
            (0..k_n).map(|k| format!("c{k}")).collect(),
            (0..j_n)
                .map(|j| SeriesInfo {
                    id: format!("s{j}"),
                    kind: "metal".to_owned(),
                })
                .collect(),
            (0..t).map(|i| format!("d{i:04}")).collect(),
            values,
            vec![Scaling { mean: 0.0, sd: 1.0 }; k_n * j_n],
        )
        .unwrap()
    }

    #[test]
    fn zero_fit_identity_omega_reduces_to_total_sum_of_squares() {
        let panel = random_panel(2, 3, 20, 11);
        let designs = build_lagged_design(&panel, 1).unwrap();
        let b = vec![Mat::zeros(3, 3); 2];
        let omega = vec![Mat::eye(3); 2];
        let got = objective(&b, &omega, &designs, &PenaltyConfig::zero()).unwrap();
        let mut want = 0.0;
        for d in &designs {
            for t in 0..d.n {
                for &y in d.responses.row(t) {
                    want += y * y;
                }
            }
        }
        assert!((got - want).abs() < 1e-10);
    }

    /// Term-by-term re-summation with plain loops, kept deliberately naive.
    fn objective_brute(
        b: &[Mat],
        omega: &[Mat],
        designs: &[LaggedDesign],
        pen: &PenaltyConfig,
    ) -> f64 {
        let k_n = b.len();
        let j_n = omega[0].rows();
        let mut total = 0.0;
        for k in 0..k_n {
            let d = &designs[k];
            let jp = b[k].cols();
            for t in 0..d.n {
                let mut e = vec![0.0; j_n];
                for j in 0..j_n {
                    let mut fitted = 0.0;
                    for c in 0..jp {
                        fitted += b[k][(j, c)] * d.predictors[(t, c)];
                    }
                    e[j] = d.responses[(t, j)] - fitted;
                }
                for i in 0..j_n {
                    for j in 0..j_n {
                        total += e[i] * omega[k][(i, j)] * e[j];
                    }
                }
                total -= omega[k].log_det_pd().unwrap();
            }
            for v in b[k].as_slice() {
                total += pen.lambda1 * v.abs();
            }
            for i in 0..j_n {
                for j in 0..j_n {
                    if i != j {
                        total += pen.lambda3 * omega[k][(i, j)].abs();
                    }
                }
            }
        }
        for k in 0..k_n {
            for k2 in 0..k_n {
                if k == k2 {
                    continue;
                }
                for (x, y) in b[k].as_slice().iter().zip(b[k2].as_slice()) {
                    total += pen.lambda2 * (x - y).abs();
                }
                for (x, y) in omega[k].as_slice().iter().zip(omega[k2].as_slice()) {
                    total += pen.lambda4 * (x - y).abs();
                }
            }
        }
        total
    }

    #[test]
    fn objective_matches_brute_force_summation() {
        let mut rng = Rng::new(3);
        let panel = random_panel(2, 2, 7, 5);
        let designs = build_lagged_design(&panel, 1).unwrap();
        let b: Vec<Mat> = (0..2)
            .map(|_| Mat::from_fn(2, 2, |_, _| 0.3 * rng.standard_normal()))
            .collect();
        let omega: Vec<Mat> = (0..2)
            .map(|_| {
                let x = rng.standard_normal() * 0.2;
                Mat::from_vec(2, 2, vec![1.3, x, x, 1.1])
            })
            .collect();
        let pen = PenaltyConfig::new(0.7, 0.3, 0.2, 0.1).unwrap();
        let got = objective(&b, &omega, &designs, &pen).unwrap();
        let want = objective_brute(&b, &omega, &designs, &pen);
        assert!((got - want).abs() < 1e-10, "got {got}, want {want}");
    }

    #[test]
    fn objective_decouples_without_fusion() {
        let panel = random_panel(3, 2, 15, 9);
        let designs = build_lagged_design(&panel, 1).unwrap();
        let mut rng = Rng::new(21);
        let b: Vec<Mat> = (0..3)
            .map(|_| Mat::from_fn(2, 2, |_, _| 0.2 * rng.standard_normal()))
            .collect();
        let omega: Vec<Mat> = (0..3)
            .map(|_| {
                let x = 0.1 * rng.standard_normal();
                Mat::from_vec(2, 2, vec![1.4, x, x, 0.9])
            })
            .collect();
        let pen = PenaltyConfig::new(0.5, 0.0, 0.3, 0.0).unwrap();
        let joint = objective(&b, &omega, &designs, &pen).unwrap();
        let mut separate = 0.0;
        for k in 0..3 {
            separate +=
                objective(&b[k..k + 1], &omega[k..k + 1], &designs[k..k + 1], &pen).unwrap();
        }
        assert!((joint - separate).abs() < 1e-10);
    }

    #[test]
    fn objective_invariant_under_series_permutation() {
        let panel = random_panel(2, 3, 12, 17);
        let designs = build_lagged_design(&panel, 1).unwrap();
        let mut rng = Rng::new(2);
        let b: Vec<Mat> = (0..2)
            .map(|_| Mat::from_fn(3, 3, |_, _| 0.2 * rng.standard_normal()))
            .collect();
        let omega: Vec<Mat> = (0..2)
            .map(|_| {
                let x = 0.1 * rng.standard_normal();
                let y = 0.05 * rng.standard_normal();
                Mat::from_vec(3, 3, vec![1.5, x, y, x, 1.2, 0.0, y, 0.0, 1.1])
            })
            .collect();
        let pen = PenaltyConfig::new(0.4, 0.2, 0.3, 0.1).unwrap();
        let base = objective(&b, &omega, &designs, &pen).unwrap();

        // permutation (0 1 2) -> (2 0 1)
        let perm = [2usize, 0, 1];
        let pb: Vec<Mat> = b
            .iter()
            .map(|m| Mat::from_fn(3, 3, |r, c| m[(perm[r], perm[c])]))
            .collect();
        let pomega: Vec<Mat> = omega
            .iter()
            .map(|m| Mat::from_fn(3, 3, |r, c| m[(perm[r], perm[c])]))
            .collect();
        let pdesigns: Vec<LaggedDesign> = designs
            .iter()
            .map(|d| LaggedDesign {
                responses: Mat::from_fn(d.n, 3, |t, j| d.responses[(t, perm[j])]),
                predictors: Mat::from_fn(d.n, 3, |t, j| d.predictors[(t, perm[j])]),
                n: d.n,
                p: d.p,
            })
            .collect();
        let permuted = objective(&pb, &pomega, &pdesigns, &pen).unwrap();
        assert!((base - permuted).abs() < 1e-9);
    }

    #[test]
    fn fit_validation_checks_symmetry_and_definiteness() {
        let mut fit = MultiClassVarFit {
            classes: vec!["a".into(), "b".into()],
            series: vec![
                SeriesInfo {
                    id: "s1".into(),
                    kind: "metal".into(),
                },
                SeriesInfo {
                    id: "s2".into(),
                    kind: "metal".into(),
                },
            ],
            p: 1,
            b: vec![Mat::zeros(2, 2); 2],
            omega: vec![Mat::eye(2); 2],
            penalty: PenaltyConfig::zero(),
            diagnostics: FitDiagnostics::default(),
        };
        fit.validate().unwrap();

        fit.omega[1][(0, 1)] = 0.3; // symmetry broken
        assert!(matches!(fit.validate(), Err(Error::NotPositiveDefinite(_))));

        fit.omega[1][(1, 0)] = 0.3; // symmetric again but indefinite below
        fit.omega[1][(0, 0)] = -1.0;
        assert!(matches!(fit.validate(), Err(Error::NotPositiveDefinite(_))));

        fit.omega.pop();
        assert!(matches!(fit.validate(), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn objective_rejects_indefinite_omega() {
        let panel = random_panel(1, 2, 10, 1);
        let designs = build_lagged_design(&panel, 1).unwrap();
        let b = vec![Mat::zeros(2, 2)];
        let omega = vec![Mat::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0])];
        assert!(matches!(
            objective(&b, &omega, &designs, &PenaltyConfig::zero()),
            Err(Error::NotPositiveDefinite(_))
        ));
    }
}
