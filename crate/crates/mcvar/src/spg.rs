//! Smoothing proximal gradient solver for the coefficient step.
//!
//! Minimizes, over the stacked per-class coefficient matrices `B`,
//!
//! ```text
//!   sum_k sum_t (y_t - B^k Y_t)' Omega^k (y_t - B^k Y_t)
//!     + lambda1 * sum |B|
//!     + lambda2 * sum_{k != k'} sum |B^k - B^k'|
//! ```
//!
//! The non-separable fusion term is Nesterov-smoothed (dual variable clipped
//! to the unit box), the lasso term is handled exactly inside the proximal
//! step, and the accelerated iteration backtracks its step size. The
//! monotone variant of the accelerated method is used so the (smoothed)
//! objective never increases along accepted iterates.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::flt;
use crate::mat::Mat;
use crate::panel::LaggedDesign;

#[derive(Debug, Clone, Copy)]
pub struct SpgOptions {
    /// Smoothing parameter of the fusion term.
    pub mu: f64,
    pub max_iter: usize,
    /// Relative change of the objective below which iteration stops.
    pub tol: f64,
    pub initial_step: f64,
    /// Multiplicative step decrease during backtracking, in (0, 1).
    pub step_shrink: f64,
}

impl Default for SpgOptions {
    fn default() -> Self {
        SpgOptions {
            mu: 1e-4,
            max_iter: 5000,
            tol: 1e-6,
            initial_step: 1.0,
            step_shrink: 0.5,
        }
    }
}

impl SpgOptions {
    fn validate(&self) -> Result<()> {
        if self.mu.is_nan() || self.mu <= 0.0 {
            return Err(Error::InvalidParameter(
                "smoothing parameter mu must be > 0".into(),
            ));
        }
        if self.step_shrink.is_nan() || self.step_shrink <= 0.0 || self.step_shrink >= 1.0 {
            return Err(Error::InvalidParameter(
                "step_shrink must lie in (0, 1)".into(),
            ));
        }
        if self.tol.is_nan()
            || self.tol <= 0.0
            || self.initial_step.is_nan()
            || self.initial_step <= 0.0
        {
            return Err(Error::InvalidParameter(
                "tol and initial_step must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// One row of the solver trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpgTraceRow {
    pub iteration: usize,
    /// Smoothed objective at the accepted iterate.
    pub objective: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct SpgFit {
    pub b: Vec<Mat>,
    pub iterations: usize,
    /// Final smoothed objective value.
    pub objective: f64,
    pub converged: bool,
    pub trace: Vec<SpgTraceRow>,
}

/// `sign(v) * max(|v| - t, 0)`
#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Cross products of one class design: `X'X`, `X'Y` and `Y'Y`.
#[derive(Debug, Clone)]
pub(crate) struct GlsGrams {
    pub gxx: Mat,
    pub gxy: Mat,
    pub gyy: Mat,
}

impl GlsGrams {
    pub fn new(design: &LaggedDesign) -> Self {
        GlsGrams {
            gxx: design.predictors.tr_matmul(&design.predictors),
            gxy: design.predictors.tr_matmul(&design.responses),
            gyy: design.responses.tr_matmul(&design.responses),
        }
    }
}

/// Smoothed fusion penalty and its gradient.
///
/// The fusion penalty over ordered class pairs is written as a maximum over
/// a dual variable in the unit box; smoothing subtracts `mu/2` times the
/// squared dual norm. The optimal dual is the clipped scaled difference,
/// which yields both the smoothed value and the gradient in closed form.
pub fn smooth_fusion_value_grad(b: &[Mat], lambda2: f64, mu: f64) -> (f64, Vec<Mat>) {
    assert!(mu > 0.0, "smoothing parameter must be positive");
    let k_n = b.len();
    let mut grads: Vec<Mat> = b.iter().map(|m| Mat::zeros(m.rows(), m.cols())).collect();
    let mut value = 0.0;
    if lambda2 == 0.0 || k_n < 2 {
        return (0.0, grads);
    }
    for k in 0..k_n {
        for k2 in (k + 1)..k_n {
            let (head, tail) = grads.split_at_mut(k2);
            let ga = head[k].as_mut_slice();
            let gb = tail[0].as_mut_slice();
            for (idx, (x, y)) in b[k].as_slice().iter().zip(b[k2].as_slice()).enumerate() {
                let d = x - y;
                let a = (d / mu).clamp(-1.0, 1.0);
                // both ordered pairs (k, k2) and (k2, k) contribute
                value += 2.0 * lambda2 * (a * d - 0.5 * mu * a * a);
                ga[idx] += 2.0 * lambda2 * a;
                gb[idx] -= 2.0 * lambda2 * a;
            }
        }
    }
    (value, grads)
}

/// Exact (non-smoothed) fusion penalty over ordered class pairs.
pub fn fusion_penalty(b: &[Mat], lambda2: f64) -> f64 {
    let k_n = b.len();
    let mut acc = 0.0;
    for k in 0..k_n {
        for k2 in (k + 1)..k_n {
            for (x, y) in b[k].as_slice().iter().zip(b[k2].as_slice()) {
                acc += (x - y).abs();
            }
        }
    }
    2.0 * lambda2 * acc
}

/// Gradient of the generalized least-squares loss with respect to each
/// per-class coefficient matrix: `2 Omega^k (B^k X'X - (X'Y)')`.
pub fn gls_grad(b: &[Mat], designs: &[LaggedDesign], omega: &[Mat]) -> Vec<Mat> {
    let grams: Vec<GlsGrams> = designs.iter().map(GlsGrams::new).collect();
    b.iter()
        .zip(&grams)
        .zip(omega)
        .map(|((bk, g), om)| gls_grad_one(bk, g, om))
        .collect()
}

fn gls_grad_one(b: &Mat, grams: &GlsGrams, omega: &Mat) -> Mat {
    // 2 * Omega * (B G_xx - G_xy')
    let mut inner = b.matmul(&grams.gxx);
    let gyx = grams.gxy.transpose();
    inner.axpy(-1.0, &gyx);
    let mut g = omega.matmul(&inner);
    g.scale(2.0);
    g
}

/// GLS loss evaluated through the precomputed cross products:
/// `tr(Omega G_yy) - 2 tr(Omega B G_xy) + tr(Omega B G_xx B')`.
fn gls_value_one(b: &Mat, grams: &GlsGrams, omega: &Mat) -> f64 {
    let bgxy = b.matmul(&grams.gxy); // J x J
    let bgxx = b.matmul(&grams.gxx); // J x JP
    let bgxxbt = bgxx.matmul_transb(b); // J x J
    let mut acc = 0.0;
    for i in 0..omega.rows() {
        for j in 0..omega.cols() {
            acc += omega[(i, j)] * (grams.gyy[(j, i)] - 2.0 * bgxy[(j, i)] + bgxxbt[(j, i)]);
        }
    }
    acc
}

struct SmoothObjective<'a> {
    grams: &'a [GlsGrams],
    omega: &'a [Mat],
    lambda2: f64,
    mu: f64,
}

impl SmoothObjective<'_> {
    fn value(&self, b: &[Mat]) -> f64 {
        let mut f = 0.0;
        for ((bk, g), om) in b.iter().zip(self.grams).zip(self.omega) {
            f += gls_value_one(bk, g, om);
        }
        if self.lambda2 > 0.0 {
            let k_n = b.len();
            for k in 0..k_n {
                for k2 in (k + 1)..k_n {
                    for (x, y) in b[k].as_slice().iter().zip(b[k2].as_slice()) {
                        let d = x - y;
                        let a = (d / self.mu).clamp(-1.0, 1.0);
                        f += 2.0 * self.lambda2 * (a * d - 0.5 * self.mu * a * a);
                    }
                }
            }
        }
        f
    }

    fn value_grad(&self, b: &[Mat]) -> (f64, Vec<Mat>) {
        let mut f = 0.0;
        let mut grads = Vec::with_capacity(b.len());
        for ((bk, g), om) in b.iter().zip(self.grams).zip(self.omega) {
            f += gls_value_one(bk, g, om);
            grads.push(gls_grad_one(bk, g, om));
        }
        if self.lambda2 > 0.0 {
            let (fv, fg) = smooth_fusion_value_grad(b, self.lambda2, self.mu);
            f += fv;
            for (g, addend) in grads.iter_mut().zip(&fg) {
                g.axpy(1.0, addend);
            }
        }
        (f, grads)
    }
}

fn l1_norm(b: &[Mat]) -> f64 {
    b.iter()
        .map(|m| m.as_slice().iter().map(|x| x.abs()).sum::<f64>())
        .sum()
}

fn stack_dot(a: &[Mat], b: &[Mat]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| crate::mat::dot(x.as_slice(), y.as_slice()))
        .sum()
}

fn stack_sub(a: &[Mat], b: &[Mat]) -> Vec<Mat> {
    a.iter().zip(b).map(|(x, y)| x.sub(y)).collect()
}

/// Solves the coefficient step given fixed inverse error covariances.
///
/// The lasso is applied exactly in the proximal step, so returned
/// coefficients contain exact zeros. Warm starts resume from a previous
/// solution; a converged warm start returns after one iteration.
pub fn spg_fit(
    designs: &[LaggedDesign],
    omega: &[Mat],
    lambda1: f64,
    lambda2: f64,
    opts: &SpgOptions,
    warm: Option<&[Mat]>,
) -> Result<SpgFit> {
    let grams: Vec<GlsGrams> = designs.iter().map(GlsGrams::new).collect();
    spg_fit_grams(&grams, omega, lambda1, lambda2, opts, warm)
}

pub(crate) fn spg_fit_grams(
    grams: &[GlsGrams],
    omega: &[Mat],
    lambda1: f64,
    lambda2: f64,
    opts: &SpgOptions,
    warm: Option<&[Mat]>,
) -> Result<SpgFit> {
    opts.validate()?;
    if lambda1 < 0.0 || lambda2 < 0.0 {
        return Err(Error::InvalidParameter(
            "penalty weights must be >= 0".into(),
        ));
    }
    if grams.len() != omega.len() || grams.is_empty() {
        return Err(Error::DimensionMismatch(
            "need one design and one omega per class".into(),
        ));
    }
    let j = grams[0].gxy.cols();
    let jp = grams[0].gxx.rows();

    let objective = SmoothObjective {
        grams,
        omega,
        lambda2,
        mu: opts.mu,
    };

    let mut x: Vec<Mat> = match warm {
        Some(b0) => {
            if b0.len() != grams.len() || b0.iter().any(|m| m.rows() != j || m.cols() != jp) {
                return Err(Error::DimensionMismatch(
                    "warm start has wrong shape".into(),
                ));
            }
            b0.to_vec()
        }
        None => (0..grams.len()).map(|_| Mat::zeros(j, jp)).collect(),
    };
    let mut y = x.clone();

    let mut f_best = objective.value(&x) + lambda1 * l1_norm(&x);
    if !f_best.is_finite() {
        return Err(Error::NonFiniteObjective { iteration: 0 });
    }

    let mut step = opts.initial_step;
    let mut t_momentum = 1.0f64;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=opts.max_iter {
        iterations = iter;
        let (fy, grad) = objective.value_grad(&y);

        // backtracking line search on the smooth part
        let z = loop {
            let mut cand: Vec<Mat> = Vec::with_capacity(x.len());
            for (yk, gk) in y.iter().zip(&grad) {
                let mut m = Mat::zeros(j, jp);
                let thr = step * lambda1;
                for ((out, &yv), &gv) in m
                    .as_mut_slice()
                    .iter_mut()
                    .zip(yk.as_slice())
                    .zip(gk.as_slice())
                {
                    *out = soft_threshold(yv - step * gv, thr);
                }
                cand.push(m);
            }
            let fz = objective.value(&cand);
            let dz = stack_sub(&cand, &y);
            let quad = fy + stack_dot(&grad, &dz) + stack_dot(&dz, &dz) / (2.0 * step);
            if fz.is_finite() && fz <= quad + 1e-10 * (1.0 + quad.abs()) {
                break cand;
            }
            step *= opts.step_shrink;
            if step < 1e-18 {
                return Err(Error::NonFiniteObjective { iteration: iter });
            }
        };

        let f_z = objective.value(&z) + lambda1 * l1_norm(&z);
        let t_next = 0.5 * (1.0 + flt::sqrt(1.0 + 4.0 * t_momentum * t_momentum));

        if f_z <= f_best {
            // accept: monotone step. y = z + ((t-1)/t_next)(z - x_old);
            // with the candidate accepted, the incumbent x is the previous
            // iterate of the momentum recursion.
            let x_new = z;
            let beta = (t_momentum - 1.0) / t_next;
            for k in 0..x.len() {
                let mut yk = x_new[k].clone();
                let mut diff = x_new[k].sub(&x[k]);
                diff.scale(beta);
                yk.axpy(1.0, &diff);
                y[k] = yk;
            }
            x = x_new;
            t_momentum = t_next;

            let rel = (f_best - f_z).abs() / f_best.abs().max(1.0);
            trace.push(SpgTraceRow {
                iteration: iter,
                objective: f_z,
                step,
            });
            f_best = f_z;
            if rel < opts.tol {
                converged = true;
                break;
            }
        } else {
            // candidate worse than the incumbent: restart momentum at x
            t_momentum = 1.0;
            y = x.clone();
            trace.push(SpgTraceRow {
                iteration: iter,
                objective: f_best,
                step,
            });
        }
    }

    Ok(SpgFit {
        b: x,
        iterations,
        objective: f_best,
        converged,
        trace,
    })
}
