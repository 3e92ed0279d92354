//! Matérn 5/2 kernel with ARD lengthscales, plus the partial derivatives
//! needed for marginal-likelihood gradients.

use nalgebra::DMatrix;

use super::{GpError, KernelParams};
use crate::space::Candidate;

const SQRT_5: f64 = 2.236_067_977_499_79;

/// `k(a, b) = sv * (1 + sqrt(5) r + 5 r^2 / 3) * exp(-sqrt(5) r)` with
/// `r^2 = sum_i ((a_i - b_i) / l_i)^2`.
pub fn kernel_eval(params: &KernelParams, a: &Candidate, b: &Candidate) -> Result<f64, GpError> {
    let d = params.lengthscales.len();
    if a.len() != d || b.len() != d {
        return Err(GpError::DimensionMismatch {
            expected: d,
            got: a.len().max(b.len()),
        });
    }
    Ok(eval_scaled(
        params.signal_variance,
        scaled_dist(params, a, b),
    ))
}

pub(super) fn scaled_dist(params: &KernelParams, a: &Candidate, b: &Candidate) -> f64 {
    let mut r_sq = 0.0;
    for ((&x, &y), &l) in a.coords().iter().zip(b.coords()).zip(&params.lengthscales) {
        let diff = (x - y) / l;
        r_sq += diff * diff;
    }
    r_sq.sqrt()
}

#[inline]
pub(super) fn eval_scaled(signal_variance: f64, r: f64) -> f64 {
    let sr = SQRT_5 * r;
    signal_variance * (1.0 + sr + 5.0 / 3.0 * r * r) * (-sr).exp()
}

/// Gram matrix of the signal part (no noise on the diagonal).
pub(super) fn gram(params: &KernelParams, x: &[Candidate]) -> DMatrix<f64> {
    let n = x.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = params.signal_variance;
        for j in 0..i {
            let v = eval_scaled(params.signal_variance, scaled_dist(params, &x[i], &x[j]));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cross-covariance between training points and queries: `n x m`.
pub(super) fn cross(params: &KernelParams, x: &[Candidate], q: &[Candidate]) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(x.len(), q.len());
    for (j, qj) in q.iter().enumerate() {
        for (i, xi) in x.iter().enumerate() {
            k[(i, j)] = eval_scaled(params.signal_variance, scaled_dist(params, xi, qj));
        }
    }
    k
}

/// Derivative of the kernel w.r.t. lengthscale `l_dim`, given the pair,
/// the scaled distance `r` and the raw coordinate difference on that axis.
///
/// `dk/dl = sv * 5/3 * (1 + sqrt(5) r) * exp(-sqrt(5) r) * diff^2 / l^3`
/// (smooth at r = 0).
#[inline]
pub(super) fn dk_dlengthscale(signal_variance: f64, r: f64, diff: f64, l: f64) -> f64 {
    signal_variance * (5.0 / 3.0) * (1.0 + SQRT_5 * r) * (-SQRT_5 * r).exp() * diff * diff
        / (l * l * l)
}
