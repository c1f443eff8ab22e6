//! Fused joint graphical lasso on VAR residual covariances, solved by the
//! alternating directions method of multipliers.
//!
//! Minimizes over symmetric positive-definite `Theta^k`
//!
//! ```text
//!   sum_k n_k (tr(S^k Theta^k) - log|Theta^k|)
//!     + lambda3 * sum_k sum_{i != j} |Theta^k_ij|
//!     + lambda4 * sum_{k < k'} sum_ij |Theta^k_ij - Theta^k'_ij|
//! ```
//!
//! The likelihood block is handled per class by an eigendecomposition update,
//! the penalty block element-wise by the exact fusion proximal operator
//! followed by soft-thresholding (off-diagonal only).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::flt;
use crate::mat::Mat;
use crate::model::residual_matrix;
use crate::panel::LaggedDesign;
use crate::spg::soft_threshold;

#[derive(Debug, Clone, Copy)]
pub struct AdmmOptions {
    /// Augmented Lagrangian penalty parameter.
    pub rho: f64,
    pub max_iter: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// Optional over-relaxation factor, typically in [1.0, 1.8].
    pub over_relaxation: Option<f64>,
    /// Residual balancing: double/halve rho when primal and dual residuals
    /// drift apart by more than a factor of 10.
    pub adaptive_rho: bool,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        AdmmOptions {
            rho: 1.0,
            max_iter: 1000,
            eps_abs: 1e-8,
            eps_rel: 1e-8,
            over_relaxation: None,
            adaptive_rho: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct JglFit {
    /// Sparse estimates (the consensus variable, with exact zeros).
    pub omega: Vec<Mat>,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Residual sample covariances `S^k = E'E / N` for each class, together with
/// the effective sample sizes.
pub fn residual_covariances(b: &[Mat], designs: &[LaggedDesign]) -> Vec<(Mat, usize)> {
    b.iter()
        .zip(designs)
        .map(|(bk, d)| {
            let e = residual_matrix(bk, d);
            let mut s = e.tr_matmul(&e);
            s.scale(1.0 / d.n as f64);
            (s, d.n)
        })
        .collect()
}

/// The unique positive-definite solution of `rho * Theta - Theta^{-1} = rho * A`.
///
/// A is eigendecomposed and each eigenvalue is mapped through the positive
/// root of `rho t^2 - rho d t - 1 = 0`.
pub fn eigen_theta_update(a: &Mat, rho: f64) -> Mat {
    assert!(rho > 0.0, "rho must be positive");
    let n = a.rows();
    let (d, v) = a.sym_eigen();
    let c = 4.0 / rho;
    let mut theta = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut acc = 0.0;
            for (idx, dv) in d.iter().enumerate() {
                let root = if *dv >= 0.0 {
                    0.5 * (dv + flt::sqrt(dv * dv + c))
                } else {
                    // stable form for negative eigenvalues
                    0.5 * c / (flt::sqrt(dv * dv + c) - dv)
                };
                acc += v[(i, idx)] * root * v[(j, idx)];
            }
            theta[(i, j)] = acc;
            theta[(j, i)] = acc;
        }
    }
    theta
}

/// Exact proximal operator of the complete-graph fusion penalty:
///
/// `argmin_x rho/2 * sum_k (x_k - a_k)^2 + lambda_fuse * sum_{k<k'} |x_k - x_k'|`
///
/// The minimizer preserves the input order, so after sorting it is a
/// non-decreasing step function over consecutive blocks; all `2^(K-1)` block
/// compositions are enumerated and the best candidate under the original
/// objective is returned. Class counts here are small, so enumeration is
/// cheaper than it looks and trivially exact.
pub fn fused_prox_k(a: &[f64], lambda_fuse: f64, rho: f64) -> Vec<f64> {
    assert!(rho > 0.0, "rho must be positive");
    assert!(lambda_fuse >= 0.0, "lambda_fuse must be >= 0");
    let k = a.len();
    if k <= 1 || lambda_fuse == 0.0 {
        return a.to_vec();
    }
    assert!(k <= 20, "fused_prox_k supports up to 20 classes");
    let gamma = lambda_fuse / rho;

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| a[i].total_cmp(&a[j]));
    let sorted: Vec<f64> = order.iter().map(|&i| a[i]).collect();

    // boundary weight between sorted positions m-1 and m (1-based m): m * (K - m)
    let weight = |m: usize| (m * (k - m)) as f64;

    let objective = |x: &[f64]| {
        let mut obj = 0.0;
        for (xi, ai) in x.iter().zip(&sorted) {
            obj += 0.5 * (xi - ai) * (xi - ai);
        }
        for i in 0..k {
            for j in (i + 1)..k {
                obj += gamma * (x[i] - x[j]).abs();
            }
        }
        obj
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    // bit m of mask set => block boundary after sorted position m
    for mask in 0u32..(1u32 << (k - 1)) {
        let mut x = vec![0.0; k];
        let mut start = 0;
        while start < k {
            let mut end = start;
            while end < k - 1 && mask & (1 << end) == 0 {
                end += 1;
            }
            // block covers sorted positions start..=end
            let size = (end - start + 1) as f64;
            let mean = sorted[start..=end].iter().sum::<f64>() / size;
            let w_left = if start == 0 { 0.0 } else { weight(start) };
            let w_right = if end == k - 1 { 0.0 } else { weight(end + 1) };
            let value = mean + gamma * (w_right - w_left) / size;
            for slot in &mut x[start..=end] {
                *slot = value;
            }
            start = end + 1;
        }
        let obj = objective(&x);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, x));
        }
    }

    let solution_sorted = best.expect("at least one composition").1;
    let mut out = vec![0.0; k];
    for (pos, &orig) in order.iter().enumerate() {
        out[orig] = solution_sorted[pos];
    }
    out
}

/// Fused joint graphical lasso solver.
///
/// `s` are symmetric positive semi-definite covariance estimates, `n` the
/// per-class sample sizes weighting the likelihood terms. Returns the
/// consensus estimates, which carry exact zeros; on hitting the iteration
/// cap the best iterate is returned with `converged = false`.
pub fn admm_fgl(
    s: &[Mat],
    n: &[usize],
    lambda3: f64,
    lambda4: f64,
    opts: &AdmmOptions,
) -> Result<JglFit> {
    let k_n = s.len();
    if k_n == 0 || n.len() != k_n {
        return Err(Error::DimensionMismatch(
            "need one covariance and sample size per class".into(),
        ));
    }
    if lambda3 < 0.0 || lambda4 < 0.0 {
        return Err(Error::InvalidParameter(
            "penalty weights must be >= 0".into(),
        ));
    }
    if opts.rho.is_nan() || opts.rho <= 0.0 {
        return Err(Error::InvalidParameter("rho must be > 0".into()));
    }
    let j = s[0].rows();
    for (k, sk) in s.iter().enumerate() {
        if sk.rows() != j || sk.cols() != j {
            return Err(Error::DimensionMismatch(format!("covariance of class {k}")));
        }
        if !sk.is_symmetric(1e-8) {
            return Err(Error::InvalidParameter(format!(
                "covariance of class {k} is not symmetric"
            )));
        }
    }

    let mut rho = opts.rho;
    let alpha = opts.over_relaxation.unwrap_or(1.0);
    if !(0.0..=2.0).contains(&alpha) || alpha == 0.0 {
        return Err(Error::InvalidParameter(
            "over-relaxation factor must be in (0, 2]".into(),
        ));
    }

    // start at the diagonal estimate
    let mut z: Vec<Mat> = s
        .iter()
        .map(|sk| {
            Mat::from_fn(j, j, |r, c| {
                if r == c {
                    let d = sk[(r, r)];
                    if d > 1e-12 {
                        1.0 / d
                    } else {
                        1.0
                    }
                } else {
                    0.0
                }
            })
        })
        .collect();
    let mut theta = z.clone();
    let mut u: Vec<Mat> = (0..k_n).map(|_| Mat::zeros(j, j)).collect();

    let mut iterations = 0;
    let mut converged = false;
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let total_dim = flt::sqrt((k_n * j * j) as f64);

    for iter in 1..=opts.max_iter {
        iterations = iter;

        for k in 0..k_n {
            let nk = n[k] as f64;
            let mut a = z[k].sub(&u[k]);
            a.axpy(-nk / rho, &s[k]);
            theta[k] = eigen_theta_update(&a, rho / nk);
        }

        let z_old: Vec<Mat> = z.clone();

        // relaxed Theta used in the Z and dual updates
        let theta_hat: Vec<Mat> = if alpha != 1.0 {
            theta
                .iter()
                .zip(&z_old)
                .map(|(t, zo)| {
                    let mut h = t.clone();
                    h.scale(alpha);
                    h.axpy(1.0 - alpha, zo);
                    h
                })
                .collect()
        } else {
            theta.clone()
        };

        // element-wise consensus update: fuse across classes, then shrink
        // off-diagonal entries
        let mut stage = vec![0.0; k_n];
        for r in 0..j {
            for c in r..j {
                for k in 0..k_n {
                    stage[k] = theta_hat[k][(r, c)] + u[k][(r, c)];
                }
                let fused = fused_prox_k(&stage, lambda4, rho);
                for k in 0..k_n {
                    let v = if r == c {
                        fused[k]
                    } else {
                        soft_threshold(fused[k], lambda3 / rho)
                    };
                    z[k][(r, c)] = v;
                    z[k][(c, r)] = v;
                }
            }
        }

        let mut r_norm2 = 0.0;
        let mut s_norm2 = 0.0;
        let mut theta_norm2 = 0.0;
        let mut z_norm2 = 0.0;
        let mut u_norm2 = 0.0;
        for k in 0..k_n {
            let diff = theta_hat[k].sub(&z[k]);
            u[k].axpy(1.0, &diff);
            r_norm2 += {
                let d = theta[k].sub(&z[k]);
                let f = d.frob_norm();
                f * f
            };
            let dz = z[k].sub(&z_old[k]);
            let f = dz.frob_norm();
            s_norm2 += f * f;
            let tf = theta[k].frob_norm();
            theta_norm2 += tf * tf;
            let zf = z[k].frob_norm();
            z_norm2 += zf * zf;
            let uf = u[k].frob_norm();
            u_norm2 += uf * uf;
        }
        primal = flt::sqrt(r_norm2);
        dual = rho * flt::sqrt(s_norm2);
        let eps_pri = total_dim * opts.eps_abs
            + opts.eps_rel * flt::sqrt(theta_norm2).max(flt::sqrt(z_norm2));
        let eps_dual = total_dim * opts.eps_abs + opts.eps_rel * rho * flt::sqrt(u_norm2);
        if primal <= eps_pri && dual <= eps_dual {
            converged = true;
            break;
        }

        if opts.adaptive_rho {
            if primal > 10.0 * dual {
                rho *= 2.0;
                for uk in &mut u {
                    uk.scale(0.5);
                }
            } else if dual > 10.0 * primal {
                rho *= 0.5;
                for uk in &mut u {
                    uk.scale(2.0);
                }
            }
        }
    }

    Ok(JglFit {
        omega: z,
        iterations,
        converged,
        primal_residual: primal,
        dual_residual: dual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_spd(j: usize, rng: &mut Rng) -> Mat {
        let g = Mat::from_fn(j + 2, j, |_, _| rng.standard_normal());
        let mut s = g.tr_matmul(&g);
        s.scale(1.0 / (j + 2) as f64);
        for i in 0..j {
            s[(i, i)] += 0.5;
        }
        s
    }

    #[test]
    fn theta_update_at_zero_gives_identity() {
        let theta = eigen_theta_update(&Mat::zeros(3, 3), 1.0);
        assert!(theta.sub(&Mat::eye(3)).max_abs() < 1e-12);
    }

    #[test]
    fn theta_update_at_identity_gives_golden_ratio() {
        let phi = 0.5 * (1.0 + 5.0_f64.sqrt());
        let theta = eigen_theta_update(&Mat::eye(2), 1.0);
        let mut want = Mat::eye(2);
        want.scale(phi);
        assert!(theta.sub(&want).max_abs() < 1e-12);
    }

    #[test]
    fn theta_update_satisfies_defining_equation() {
        let mut rng = Rng::new(31);
        for trial in 0..20 {
            let j = 2 + trial % 4;
            let a = {
                let m = Mat::from_fn(j, j, |_, _| rng.standard_normal());
                let mut sym = m.clone();
                sym.axpy(1.0, &m.transpose());
                sym.scale(0.5);
                sym
            };
            let rho = [0.3, 1.0, 4.0][trial % 3];
            let theta = eigen_theta_update(&a, rho);
            let inv = theta.inverse_pd().expect("theta must be positive definite");
            // rho*Theta - Theta^{-1} - rho*A
            let mut resid = theta.clone();
            resid.scale(rho);
            resid.axpy(-1.0, &inv);
            let mut ra = a.clone();
            ra.scale(rho);
            resid.axpy(-1.0, &ra);
            assert!(resid.frob_norm() < 1e-8, "residual {}", resid.frob_norm());
        }
    }

    #[test]
    fn fused_prox_two_class_closed_forms() {
        // |a1 - a2| > 2 gamma: move each toward the other by gamma
        let x = fused_prox_k(&[3.0, 1.0], 0.5, 1.0);
        assert!((x[0] - 2.5).abs() < 1e-12 && (x[1] - 1.5).abs() < 1e-12);
        // |a1 - a2| <= 2 gamma: fuse at the mean
        let x = fused_prox_k(&[3.0, 1.0], 2.0, 1.0);
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fused_prox_fixed_point_on_equal_inputs() {
        for lambda in [0.0, 0.7, 100.0] {
            let x = fused_prox_k(&[1.3, 1.3, 1.3, 1.3], lambda, 2.0);
            assert_eq!(x, vec![1.3; 4]);
        }
    }

    #[test]
    fn fused_prox_preserves_order_and_shrinks_spread() {
        let mut rng = Rng::new(8);
        for _ in 0..200 {
            let k = 2 + (rng.next_u64() % 4) as usize;
            let a: Vec<f64> = (0..k).map(|_| 3.0 * rng.standard_normal()).collect();
            let x = fused_prox_k(&a, 0.4, 1.0);
            for i in 0..k {
                for j in 0..k {
                    // monotone prox: order of outputs follows order of inputs
                    if a[i] < a[j] {
                        assert!(x[i] <= x[j] + 1e-12);
                    }
                }
            }
            let spread_in = a.iter().cloned().fold(f64::MIN, f64::max)
                - a.iter().cloned().fold(f64::MAX, f64::min);
            let spread_out = x.iter().cloned().fold(f64::MIN, f64::max)
                - x.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread_out <= spread_in + 1e-12);
        }
    }

    #[test]
    fn unpenalized_single_class_recovers_inverse() {
        let mut rng = Rng::new(77);
        let s = random_spd(4, &mut rng);
        let fit = admm_fgl(
            core::slice::from_ref(&s),
            &[50],
            0.0,
            0.0,
            &AdmmOptions::default(),
        )
        .unwrap();
        assert!(fit.converged);
        let want = s.inverse_pd().unwrap();
        assert!(
            fit.omega[0].sub(&want).max_abs() < 1e-6,
            "deviation {}",
            fit.omega[0].sub(&want).max_abs()
        );
    }

    #[test]
    fn huge_fusion_forces_identical_omegas() {
        let mut rng = Rng::new(5);
        let s = random_spd(3, &mut rng);
        let fit = admm_fgl(
            &[s.clone(), s.clone()],
            &[40, 40],
            0.1,
            1e6,
            &AdmmOptions::default(),
        )
        .unwrap();
        let diff = fit.omega[0].sub(&fit.omega[1]).max_abs();
        assert!(diff < 1e-6, "max cross-class difference {diff}");
    }

    #[test]
    fn large_lasso_kills_off_diagonal_exactly() {
        let s = Mat::from_vec(2, 2, vec![1.0, 0.5, 0.5, 1.0]);
        let n = 30;
        let lambda3 = n as f64 * 0.5;
        let fit = admm_fgl(&[s], &[n], lambda3, 0.0, &AdmmOptions::default()).unwrap();
        assert_eq!(fit.omega[0][(0, 1)], 0.0);
        assert_eq!(fit.omega[0][(1, 0)], 0.0);
        // decoupled scalar problems: theta_ii = 1/S_ii = 1
        assert!((fit.omega[0][(0, 0)] - 1.0).abs() < 1e-6);
        assert!((fit.omega[0][(1, 1)] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn no_fusion_decouples_into_single_class_solves() {
        let mut rng = Rng::new(100);
        let s: Vec<Mat> = (0..3).map(|_| random_spd(3, &mut rng)).collect();
        let ns = [40usize, 55, 70];
        let joint = admm_fgl(&s, &ns, 6.0, 0.0, &AdmmOptions::default()).unwrap();
        for k in 0..3 {
            let single = admm_fgl(
                &s[k..k + 1],
                &ns[k..k + 1],
                6.0,
                0.0,
                &AdmmOptions::default(),
            )
            .unwrap();
            assert!(joint.omega[k].sub(&single.omega[0]).max_abs() < 1e-6);
        }
    }

    #[test]
    fn returned_omegas_are_symmetric_positive_definite() {
        let mut rng = Rng::new(9);
        for trial in 0..10 {
            let j = 2 + trial % 3;
            let s: Vec<Mat> = (0..3).map(|_| random_spd(j, &mut rng)).collect();
            let fit = admm_fgl(&s, &[60, 60, 60], 3.0, 1.5, &AdmmOptions::default()).unwrap();
            for om in &fit.omega {
                assert!(om.is_symmetric(1e-10));
                let (w, _) = om.sym_eigen();
                assert!(w[0] > 0.0, "smallest eigenvalue {}", w[0]);
            }
        }
    }

    #[test]
    fn non_symmetric_covariance_rejected() {
        let s = Mat::from_vec(2, 2, vec![1.0, 0.4, 0.1, 1.0]);
        assert!(matches!(
            admm_fgl(&[s], &[10], 0.1, 0.0, &AdmmOptions::default()),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn over_relaxation_reaches_the_same_solution() {
        let mut rng = Rng::new(17);
        let s: Vec<Mat> = (0..2).map(|_| random_spd(3, &mut rng)).collect();
        let plain = admm_fgl(&s, &[40, 40], 2.0, 1.0, &AdmmOptions::default()).unwrap();
        let relaxed = admm_fgl(
            &s,
            &[40, 40],
            2.0,
            1.0,
            &AdmmOptions {
                over_relaxation: Some(1.5),
                ..AdmmOptions::default()
            },
        )
        .unwrap();
        assert!(relaxed.converged);
        for (a, b) in plain.omega.iter().zip(&relaxed.omega) {
            assert!(a.sub(b).max_abs() < 1e-6);
        }
    }

    #[test]
    fn residual_covariance_shapes_and_exact_fit() {
        use crate::panel::{build_lagged_design, ReturnPanel, Scaling, SeriesInfo};
        use alloc::borrow::ToOwned;
        use alloc::string::ToString;

        // single series following y_t = 0.5 y_{t-1} exactly: residuals vanish
        let mut values = vec![1.0f64];
        for _ in 1..6 {
            let last = *values.last().unwrap();
            values.push(0.5 * last);
        }
        let panel = ReturnPanel::from_values(
            vec!["c".to_owned()],
            vec![SeriesInfo {
                id: "s".to_owned(),
                kind: "metal".to_string(),
            }],
            (0..6).map(|i| format!("d{i}")).collect(),
            values,
            vec![Scaling { mean: 0.0, sd: 1.0 }],
        )
        .unwrap();
        let designs = build_lagged_design(&panel, 1).unwrap();
        let b = vec![Mat::from_vec(1, 1, vec![0.5])];
        let covs = residual_covariances(&b, &designs);
        assert_eq!(covs.len(), 1);
        assert_eq!(covs[0].1, 5);
        assert!(covs[0].0[(0, 0)].abs() < 1e-15);

        // scalar variance when B = 0
        let zero = vec![Mat::from_vec(1, 1, vec![0.0])];
        let covs = residual_covariances(&zero, &designs);
        let resp = &designs[0].responses;
        let want = (0..5).map(|t| resp[(t, 0)] * resp[(t, 0)]).sum::<f64>() / 5.0;
        assert!((covs[0].0[(0, 0)] - want).abs() < 1e-15);
    }
}
