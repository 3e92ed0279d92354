//! Gaussian-process regression with a Matérn 5/2 ARD kernel: exact posterior
//! via Cholesky factorization, Gaussian log marginal likelihood with analytic
//! gradients in log-parameter space, and type-II MLE fitting with restarts.
//!
//! The posterior at a query `q` given observations `(X, y)` is
//!
//! ```text
//! mean(q) = m + k(q, X) (K + sn I)^-1 (y - m)
//! var(q)  = k(q, q) - k(q, X) (K + sn I)^-1 k(X, q)
//! ```
//!
//! with `m` a constant prior mean and `sn` the noise variance. Factorizations
//! that fail climb a fixed jitter ladder (1e-10 .. 1e-4, x10 per rung) before
//! giving up.

mod fit;
mod kernel;

pub use fit::{fit, fit_with, FitOptions, DEFAULT_RESTARTS};
pub use kernel::kernel_eval;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

use crate::space::Candidate;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("covariance factorization failed after exhausting the jitter ladder")]
    FactorizationFailure,
    #[error("need at least {need} observations, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid kernel parameters: {0}")]
    BadParams(String),
}

/// Kernel hyperparameters plus the constant prior mean.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    /// Covariance scale; `k(a, a) = signal_variance`.
    pub signal_variance: f64,
    /// One positive ARD lengthscale per input dimension.
    pub lengthscales: Vec<f64>,
    /// Observation noise variance added to the Gram diagonal.
    pub noise_variance: f64,
    /// Constant prior mean.
    pub mean_const: f64,
}

impl KernelParams {
    pub fn validate(&self) -> Result<(), GpError> {
        if !(self.signal_variance > 0.0) {
            return Err(GpError::BadParams(format!(
                "signal_variance must be > 0, got {}",
                self.signal_variance
            )));
        }
        if self.lengthscales.is_empty() || self.lengthscales.iter().any(|&l| !(l > 0.0)) {
            return Err(GpError::BadParams("lengthscales must all be > 0".into()));
        }
        if !(self.noise_variance >= 0.0) {
            return Err(GpError::BadParams(format!(
                "noise_variance must be >= 0, got {}",
                self.noise_variance
            )));
        }
        if !self.mean_const.is_finite() {
            return Err(GpError::BadParams("mean_const must be finite".into()));
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.lengthscales.len()
    }
}

const JITTER_LADDER: [f64; 7] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

/// Cholesky of `k` as given, then with increasing diagonal jitter.
fn cholesky_with_jitter(k: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64), GpError> {
    if let Some(ch) = Cholesky::new(k.clone()) {
        return Ok((ch, 0.0));
    }
    for &jitter in &JITTER_LADDER {
        let mut jittered = k.clone();
        for i in 0..k.nrows() {
            jittered[(i, i)] += jitter;
        }
        if let Some(ch) = Cholesky::new(jittered) {
            return Ok((ch, jitter));
        }
    }
    Err(GpError::FactorizationFailure)
}

/// A fitted (or directly constructed) GP posterior.
///
/// Holds the conditioning set, the lower-triangular factor of
/// `K + noise_variance I` and the pre-solved dual weights, so predictions are
/// `O(n)` for the mean and `O(n^2)` for the variance per query. Immutable.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    params: KernelParams,
    train_points: Vec<Candidate>,
    train_values: Vec<f64>,
    /// `None` when the conditioning set is empty (pure prior).
    chol: Option<Cholesky<f64, Dyn>>,
    alpha: DVector<f64>,
    jitter: f64,
}

impl GpPosterior {
    /// Conditions the prior defined by `params` on `(x, y)`. An empty
    /// conditioning set yields the prior itself.
    pub fn new(params: KernelParams, x: &[Candidate], y: &[f64]) -> Result<Self, GpError> {
        params.validate()?;
        if x.len() != y.len() {
            return Err(GpError::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        for c in x {
            if c.len() != params.dims() {
                return Err(GpError::DimensionMismatch {
                    expected: params.dims(),
                    got: c.len(),
                });
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(GpError::NonFinite("train_values"));
        }
        if x.is_empty() {
            return Ok(Self {
                params,
                train_points: Vec::new(),
                train_values: Vec::new(),
                chol: None,
                alpha: DVector::zeros(0),
                jitter: 0.0,
            });
        }
        let mut gram = kernel::gram(&params, x);
        for i in 0..x.len() {
            gram[(i, i)] += params.noise_variance;
        }
        let (chol, jitter) = cholesky_with_jitter(&gram)?;
        let centered = DVector::from_iterator(y.len(), y.iter().map(|v| v - params.mean_const));
        let mut alpha = chol.solve(&centered);
        // One step of iterative refinement; keeps training-point interpolation
        // accurate even when the fitted kernel is badly conditioned.
        let residual = &centered - &gram * &alpha;
        alpha += chol.solve(&residual);
        Ok(Self {
            params,
            train_points: x.to_vec(),
            train_values: y.to_vec(),
            chol: Some(chol),
            alpha,
            jitter,
        })
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn train_len(&self) -> usize {
        self.train_points.len()
    }

    pub fn train_points(&self) -> &[Candidate] {
        &self.train_points
    }

    pub fn train_values(&self) -> &[f64] {
        &self.train_values
    }

    /// Diagonal jitter that was needed to factorize, 0 when none.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Posterior means and variances at the queries. Variances are clamped at
    /// zero from below.
    pub fn predict(&self, queries: &[Candidate]) -> Result<(Vec<f64>, Vec<f64>), GpError> {
        for q in queries {
            if q.len() != self.params.dims() {
                return Err(GpError::DimensionMismatch {
                    expected: self.params.dims(),
                    got: q.len(),
                });
            }
        }
        let m = queries.len();
        let Some(chol) = &self.chol else {
            return Ok((
                vec![self.params.mean_const; m],
                vec![self.params.signal_variance; m],
            ));
        };
        let k_cross = kernel::cross(&self.params, &self.train_points, queries);
        // v = L^-1 K_cross, so var_j = k(q, q) - ||v_j||^2
        let mut v = k_cross.clone();
        let solved = chol.l_dirty().solve_lower_triangular_mut(&mut v);
        debug_assert!(solved, "Cholesky factor has a positive diagonal");
        let mut means = Vec::with_capacity(m);
        let mut vars = Vec::with_capacity(m);
        for j in 0..m {
            let mean = self.params.mean_const + k_cross.column(j).dot(&self.alpha);
            let var = self.params.signal_variance - v.column(j).norm_squared();
            means.push(mean);
            vars.push(var.max(0.0));
        }
        Ok((means, vars))
    }

    pub fn predict_one(&self, q: &Candidate) -> Result<(f64, f64), GpError> {
        let (means, vars) = self.predict(std::slice::from_ref(q))?;
        Ok((means[0], vars[0]))
    }
}

/// Gaussian log marginal likelihood of `y` (centered by `params.mean_const`)
/// under the kernel: `-1/2 y' K^-1 y - 1/2 log|K| - n/2 log 2pi` with
/// `K = gram + noise_variance I`.
pub fn log_marginal_likelihood(
    params: &KernelParams,
    x: &[Candidate],
    y: &[f64],
) -> Result<f64, GpError> {
    lml_with_gradient(params, x, y).map(|(value, _)| value)
}

/// Log marginal likelihood and its gradient with respect to the
/// log-parameters, ordered `[ln signal_variance, ln lengthscales.., ln noise_variance]`.
pub fn lml_with_gradient(
    params: &KernelParams,
    x: &[Candidate],
    y: &[f64],
) -> Result<(f64, Vec<f64>), GpError> {
    params.validate()?;
    let n = x.len();
    if n == 0 || n != y.len() {
        return Err(GpError::TooFewPoints { need: 1, got: n });
    }
    for c in x {
        if c.len() != params.dims() {
            return Err(GpError::DimensionMismatch {
                expected: params.dims(),
                got: c.len(),
            });
        }
    }
    let d = params.dims();
    let gram_signal = kernel::gram(params, x);
    let mut k = gram_signal.clone();
    for i in 0..n {
        k[(i, i)] += params.noise_variance;
    }
    let (chol, jitter) = cholesky_with_jitter(&k)?;
    let centered = DVector::from_iterator(n, y.iter().map(|v| v - params.mean_const));
    let alpha = chol.solve(&centered);

    let log_det = 2.0 * (0..n).map(|i| chol.l_dirty()[(i, i)].ln()).sum::<f64>();
    let value = -0.5 * centered.dot(&alpha)
        - 0.5 * log_det
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    if !value.is_finite() {
        return Err(GpError::NonFinite("log marginal likelihood"));
    }

    // dL/dtheta = 1/2 tr((alpha alpha' - K^-1) dK/dtheta); chain rule gives the
    // log-parameter gradient as theta * dL/dtheta.
    let k_inv = chol.inverse();
    let w = &alpha * alpha.transpose() - k_inv;
    let _ = jitter; // jitter enters K only through the diagonal; dK/dnoise is unchanged

    let mut grad = vec![0.0; d + 2];
    // signal variance: dK/d(ln sv) = sv * gram_signal / sv = gram_signal
    let mut trace_sv = 0.0;
    for i in 0..n {
        for j in 0..n {
            trace_sv += w[(i, j)] * gram_signal[(i, j)];
        }
    }
    grad[0] = 0.5 * trace_sv;
    // lengthscales
    for dim in 0..d {
        let l = params.lengthscales[dim];
        let mut trace = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let r = kernel::scaled_dist(params, &x[i], &x[j]);
                let diff = x[i].coords()[dim] - x[j].coords()[dim];
                trace += w[(i, j)] * kernel::dk_dlengthscale(params.signal_variance, r, diff, l);
            }
        }
        grad[1 + dim] = 0.5 * trace * l;
    }
    // noise variance: dK/dnoise = I
    let trace_noise: f64 = (0..n).map(|i| w[(i, i)]).sum();
    grad[1 + d] = 0.5 * trace_noise * params.noise_variance;

    Ok((value, grad))
}
