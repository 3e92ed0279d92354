//! Type-II MLE hyperparameter fitting.
//!
//! Targets are standardized to zero mean and unit variance before fitting,
//! the log marginal likelihood is maximized over log-parameters with a
//! box-bounded BFGS (analytic gradients, Armijo backtracking, projection onto
//! the bounds), and the best of `restarts` random initializations wins with
//! ties broken by the lowest restart index. The returned posterior is
//! de-standardized, so its predictions live on the original scale of `y`.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{lml_with_gradient, GpError, GpPosterior, KernelParams};
use crate::space::{Candidate, SearchSpace};

/// Optimization bounds in natural (non-log) space. The noise floor leaves
/// enough headroom for near-noiseless targets to be interpolated to ~1e-7.
const LENGTHSCALE_BOUNDS: (f64, f64) = (1e-3, 1e3);
const SIGNAL_BOUNDS: (f64, f64) = (1e-6, 1e5);
const NOISE_BOUNDS: (f64, f64) = (1e-10, 1.0);

pub const DEFAULT_RESTARTS: usize = 5;

#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Random initializations per fit; the first one is a fixed heuristic.
    pub restarts: usize,
    /// BFGS iteration cap per restart.
    pub max_opt_iters: usize,
    /// Convergence tolerance on the projected gradient max-norm.
    pub grad_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: DEFAULT_RESTARTS,
            max_opt_iters: 200,
            grad_tol: 1e-6,
        }
    }
}

/// Fits kernel hyperparameters by type-II MLE with the default options.
pub fn fit(
    space: &SearchSpace,
    x: &[Candidate],
    y: &[f64],
    restarts: usize,
    stream: &mut ChaCha8Rng,
) -> Result<GpPosterior, GpError> {
    fit_with(
        space,
        x,
        y,
        &FitOptions {
            restarts,
            ..FitOptions::default()
        },
        stream,
    )
}

pub fn fit_with(
    space: &SearchSpace,
    x: &[Candidate],
    y: &[f64],
    opts: &FitOptions,
    stream: &mut ChaCha8Rng,
) -> Result<GpPosterior, GpError> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return Err(GpError::TooFewPoints {
            need: 2,
            got: n.min(y.len()),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(GpError::NonFinite("train_values"));
    }
    let d = space.dim_count();
    for c in x {
        if c.len() != d {
            return Err(GpError::DimensionMismatch {
                expected: d,
                got: c.len(),
            });
        }
    }

    let y_mean = y.iter().sum::<f64>() / n as f64;
    let y_var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
    let y_std = y_var.sqrt();

    // Constant targets: no signal to fit. Collapse to a flat model whose mean
    // is the constant and whose variance sits at the floor.
    if y_std == 0.0 || !y_std.is_finite() {
        let params = KernelParams {
            signal_variance: 1e-12,
            lengthscales: vec![1.0; d],
            noise_variance: 1e-12,
            mean_const: y_mean,
        };
        return GpPosterior::new(params, x, y);
    }

    let y_standardized: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_std).collect();

    let lo = [
        SIGNAL_BOUNDS.0.ln(),
        LENGTHSCALE_BOUNDS.0.ln(),
        NOISE_BOUNDS.0.ln(),
    ];
    let hi = [
        SIGNAL_BOUNDS.1.ln(),
        LENGTHSCALE_BOUNDS.1.ln(),
        NOISE_BOUNDS.1.ln(),
    ];
    let bound_of = |idx: usize| -> (f64, f64) {
        if idx == 0 {
            (lo[0], hi[0])
        } else if idx <= d {
            (lo[1], hi[1])
        } else {
            (lo[2], hi[2])
        }
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    for restart in 0..opts.restarts.max(1) {
        let theta0: Vec<f64> = if restart == 0 {
            // Heuristic start: unit signal, mid-range lengthscales, small noise.
            let mut t = vec![0.0; d + 2];
            for item in t.iter_mut().take(d + 1).skip(1) {
                *item = 0.5f64.ln();
            }
            t[d + 1] = 1e-3f64.ln();
            t
        } else {
            let mut t = Vec::with_capacity(d + 2);
            t.push(stream.gen_range(0.1f64.ln()..10f64.ln()));
            for _ in 0..d {
                t.push(stream.gen_range(0.05f64.ln()..5f64.ln()));
            }
            t.push(stream.gen_range(1e-8f64.ln()..0.1f64.ln()));
            t
        };
        if let Some((value, theta)) = maximize_lml(&theta0, d, x, &y_standardized, opts, &bound_of)
        {
            // Strict improvement only, so earlier restarts win ties.
            let better = match &best {
                None => true,
                Some((best_value, _)) => value > *best_value,
            };
            if better {
                best = Some((value, theta));
            }
        }
    }

    let (_, theta) = best.ok_or(GpError::FactorizationFailure)?;
    let std_params = params_from_theta(&theta, d, 0.0);

    // De-standardize: scaling y by s scales both variances by s^2 and shifts
    // the mean, leaving lengthscales untouched.
    let params = KernelParams {
        signal_variance: std_params.signal_variance * y_var,
        lengthscales: std_params.lengthscales,
        noise_variance: std_params.noise_variance * y_var,
        mean_const: y_mean,
    };
    GpPosterior::new(params, x, y)
}

fn params_from_theta(theta: &[f64], d: usize, mean_const: f64) -> KernelParams {
    KernelParams {
        signal_variance: theta[0].exp(),
        lengthscales: theta[1..=d].iter().map(|t| t.exp()).collect(),
        noise_variance: theta[d + 1].exp(),
        mean_const,
    }
}

/// Box-bounded BFGS maximization of the LML over log-parameters. Returns the
/// best point found, or `None` when even the start point fails to factorize.
fn maximize_lml(
    theta0: &[f64],
    d: usize,
    x: &[Candidate],
    y_standardized: &[f64],
    opts: &FitOptions,
    bound_of: &dyn Fn(usize) -> (f64, f64),
) -> Option<(f64, Vec<f64>)> {
    let dim = theta0.len();
    let project = |theta: &mut [f64]| {
        for (i, t) in theta.iter_mut().enumerate() {
            let (lo, hi) = bound_of(i);
            *t = t.clamp(lo, hi);
        }
    };
    // Objective is the negated LML (we minimize).
    let eval = |theta: &[f64]| -> Option<(f64, DVector<f64>)> {
        let params = params_from_theta(theta, d, 0.0);
        match lml_with_gradient(&params, x, y_standardized) {
            Ok((value, grad)) if value.is_finite() => Some((-value, -DVector::from_vec(grad))),
            _ => None,
        }
    };

    let mut theta = theta0.to_vec();
    project(&mut theta);
    let (mut f, mut g) = eval(&theta)?;
    let mut h = nalgebra::DMatrix::<f64>::identity(dim, dim);

    for _ in 0..opts.max_opt_iters {
        // Projected gradient: ignore components that push against an active bound.
        let mut projected_norm: f64 = 0.0;
        for i in 0..dim {
            let (lo, hi) = bound_of(i);
            let at_lo = theta[i] <= lo && g[i] > 0.0;
            let at_hi = theta[i] >= hi && g[i] < 0.0;
            if !(at_lo || at_hi) {
                projected_norm = projected_norm.max(g[i].abs());
            }
        }
        if projected_norm <= opts.grad_tol {
            break;
        }

        let mut direction = -(&h * &g);
        if direction.dot(&g) >= 0.0 {
            // Curvature got corrupted; reset to steepest descent.
            h = nalgebra::DMatrix::identity(dim, dim);
            direction = -g.clone();
        }

        // Backtracking Armijo line search on the projected step.
        let slope = g.dot(&direction);
        let mut alpha = 1.0;
        let mut accepted: Option<(Vec<f64>, f64, DVector<f64>)> = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = theta
                .iter()
                .zip(direction.iter())
                .map(|(t, s)| t + alpha * s)
                .collect();
            project(&mut trial);
            if let Some((f_trial, g_trial)) = eval(&trial) {
                if f_trial <= f + 1e-4 * alpha * slope || f_trial < f {
                    accepted = Some((trial, f_trial, g_trial));
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < 1e-14 {
                break;
            }
        }
        let Some((theta_new, f_new, g_new)) = accepted else {
            break;
        };

        let s = DVector::from_iterator(dim, theta_new.iter().zip(&theta).map(|(a, b)| a - b));
        let yk = &g_new - &g;
        let sy = s.dot(&yk);
        if sy > 1e-12 * s.norm() * yk.norm() {
            // BFGS inverse update: H <- (I - s y'/sy) H (I - y s'/sy) + s s'/sy
            let rho = 1.0 / sy;
            let hy = &h * &yk;
            let yhy = yk.dot(&hy);
            h = h.clone() - (&hy * s.transpose() + &s * hy.transpose()) * rho
                + &s * s.transpose() * (rho * (1.0 + rho * yhy));
        }
        theta = theta_new;
        f = f_new;
        g = g_new;
    }
    Some((-f, theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::log_marginal_likelihood;
    use crate::space::DimensionSpec;
    use approx::assert_relative_eq;

    fn space_1d() -> SearchSpace {
        SearchSpace::new(vec![DimensionSpec::linear("x", 0.0, 1.0)], 0).unwrap()
    }

    fn cand(v: f64) -> Candidate {
        Candidate::new(vec![v]).unwrap()
    }

    #[test]
    fn constant_targets_collapse_to_flat_model() {
        let space = space_1d();
        let x: Vec<Candidate> = (0..5).map(|i| cand(i as f64 / 4.0)).collect();
        let y = vec![0.37; 5];
        let mut rng = crate::rng::stream(0, &[]);
        let gp = fit(&space, &x, &y, 3, &mut rng).unwrap();
        let (mean, var) = gp.predict_one(&cand(0.61)).unwrap();
        assert_relative_eq!(mean, 0.37, epsilon = 1e-9);
        assert!(var <= 1e-10);
    }

    #[test]
    fn noiseless_linear_data_is_interpolated() {
        let space = space_1d();
        let x: Vec<Candidate> = (0..8).map(|i| cand(i as f64 / 7.0)).collect();
        let y: Vec<f64> = x.iter().map(|c| 2.0 * c.coords()[0] - 0.5).collect();
        let mut rng = crate::rng::stream(5, &[]);
        let gp = fit(&space, &x, &y, 5, &mut rng).unwrap();
        let (means, _) = gp.predict(&x).unwrap();
        for (m, target) in means.iter().zip(&y) {
            assert!((m - target).abs() < 1e-6, "{m} vs {target}");
        }
    }

    #[test]
    fn fit_is_deterministic_given_the_stream() {
        let space = space_1d();
        let x: Vec<Candidate> = vec![cand(0.1), cand(0.35), cand(0.6), cand(0.8), cand(0.95)];
        let y = vec![0.3, -0.2, 0.9, 0.1, -0.4];
        let gp1 = fit(&space, &x, &y, 4, &mut crate::rng::stream(9, &[])).unwrap();
        let gp2 = fit(&space, &x, &y, 4, &mut crate::rng::stream(9, &[])).unwrap();
        assert_eq!(gp1.params(), gp2.params());
        assert_eq!(
            gp1.params().signal_variance.to_bits(),
            gp2.params().signal_variance.to_bits()
        );
        assert_eq!(
            gp1.params().noise_variance.to_bits(),
            gp2.params().noise_variance.to_bits()
        );
        for (a, b) in gp1
            .params()
            .lengthscales
            .iter()
            .zip(&gp2.params().lengthscales)
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn too_few_points_is_an_error() {
        let space = space_1d();
        let mut rng = crate::rng::stream(0, &[]);
        assert!(matches!(
            fit(&space, &[cand(0.5)], &[1.0], 2, &mut rng),
            Err(GpError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn fitted_model_beats_heuristic_start_on_likelihood() {
        // Sanity check that optimization actually improves the objective.
        let space = space_1d();
        let x: Vec<Candidate> = (0..10).map(|i| cand(i as f64 / 9.0)).collect();
        let y: Vec<f64> = x.iter().map(|c| (6.0 * c.coords()[0]).sin()).collect();
        let mut rng = crate::rng::stream(2, &[]);
        let gp = fit(&space, &x, &y, 5, &mut rng).unwrap();

        let y_mean = y.iter().sum::<f64>() / y.len() as f64;
        let y_var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / y.len() as f64;
        let y_std: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_var.sqrt()).collect();
        let start = KernelParams {
            signal_variance: 1.0,
            lengthscales: vec![0.5],
            noise_variance: 1e-3,
            mean_const: 0.0,
        };
        let baseline = log_marginal_likelihood(&start, &x, &y_std).unwrap();
        let fitted_std = KernelParams {
            signal_variance: gp.params().signal_variance / y_var,
            lengthscales: gp.params().lengthscales.clone(),
            noise_variance: gp.params().noise_variance / y_var,
            mean_const: 0.0,
        };
        let fitted = log_marginal_likelihood(&fitted_std, &x, &y_std).unwrap();
        assert!(fitted >= baseline, "fitted {fitted} < start {baseline}");
    }
}
