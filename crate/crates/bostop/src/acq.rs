//! Acquisition functions for minimization (expected improvement, probability
//! of improvement) and their maximization over the search space.
//!
//! With incumbent `y*`, posterior mean `mu` and standard deviation `sigma`,
//! and `z = (y* - mu) / sigma`:
//!
//! ```text
//! EI = (y* - mu) Phi(z) + sigma phi(z)        PI = Phi(z)
//! ```
//!
//! The inner maximizer sweeps uniform candidates from the caller's stream and
//! polishes the top [`POLISH_STARTS`] by coordinate pattern search; ties go to
//! the earliest candidate, so results are reproducible given the stream.

use rand_chacha::ChaCha8Rng;

use thiserror::Error;

use crate::gp::{GpError, GpPosterior};
use crate::pattern::pattern_search_max;
use crate::space::{Candidate, SearchSpace, SpaceError};

pub const DEFAULT_SWEEP_BUDGET: usize = 2048;
pub const POLISH_STARTS: usize = 5;
pub const POLISH_STEPS: usize = 50;

#[derive(Debug, Error)]
pub enum AcqError {
    #[error("variance must be nonnegative, got {0}")]
    NegativeVariance(f64),
    #[error("incumbent value must be finite, got {0}")]
    NonFiniteIncumbent(f64),
    #[error("candidate budget must be at least 1")]
    EmptyBudget,
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcqKind {
    ExpectedImprovement,
    ProbabilityOfImprovement,
}

#[derive(Debug, Clone, Copy)]
pub struct AcquisitionSpec {
    pub kind: AcqKind,
    /// Best observed objective value so far (minimization).
    pub incumbent_value: f64,
}

impl AcquisitionSpec {
    pub fn new(kind: AcqKind, incumbent_value: f64) -> Result<Self, AcqError> {
        if !incumbent_value.is_finite() {
            return Err(AcqError::NonFiniteIncumbent(incumbent_value));
        }
        Ok(Self {
            kind,
            incumbent_value,
        })
    }
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal CDF via the complementary error function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Acquisition value at a posterior `(mean, variance)` pair.
pub fn acq_value(spec: &AcquisitionSpec, mean: f64, variance: f64) -> Result<f64, AcqError> {
    if variance < 0.0 || variance.is_nan() {
        return Err(AcqError::NegativeVariance(variance));
    }
    let improvement = spec.incumbent_value - mean;
    let sigma = variance.sqrt();
    Ok(match spec.kind {
        AcqKind::ExpectedImprovement => {
            if sigma == 0.0 {
                improvement.max(0.0)
            } else {
                let z = improvement / sigma;
                (improvement * normal_cdf(z) + sigma * normal_pdf(z)).max(0.0)
            }
        }
        AcqKind::ProbabilityOfImprovement => {
            if sigma == 0.0 {
                f64::from(improvement > 0.0)
            } else {
                normal_cdf(improvement / sigma)
            }
        }
    })
}

fn acq_batch(
    gp: &GpPosterior,
    spec: &AcquisitionSpec,
    candidates: &[Candidate],
) -> Result<Vec<f64>, AcqError> {
    let (means, vars) = gp.predict(candidates)?;
    means
        .iter()
        .zip(&vars)
        .map(|(&m, &v)| acq_value(spec, m, v))
        .collect()
}

/// Maximizes the acquisition over `budget` uniform candidates plus pattern
/// polish from the [`POLISH_STARTS`] best; returns the maximizer and value.
pub fn propose(
    gp: &GpPosterior,
    space: &SearchSpace,
    spec: &AcquisitionSpec,
    budget: usize,
    stream: &mut ChaCha8Rng,
) -> Result<(Candidate, f64), AcqError> {
    if budget == 0 {
        return Err(AcqError::EmptyBudget);
    }
    let sweep = space.sample_candidates(budget, stream)?;
    let values = acq_batch(gp, spec, &sweep)?;

    // Best sweep candidate, earliest index on ties.
    let mut best_idx = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best_idx] {
            best_idx = i;
        }
    }
    let mut best = sweep[best_idx].clone();
    let mut best_value = values[best_idx];

    // Polish from the top starts, in rank order (earliest index on rank ties).
    let mut order: Vec<usize> = (0..sweep.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));
    for &start in order.iter().take(POLISH_STARTS) {
        let mut err = None;
        let (coords, value) = pattern_search_max(
            sweep[start].coords(),
            values[start],
            POLISH_STEPS,
            |batch| {
                let cands: Vec<Candidate> = batch
                    .iter()
                    .map(|c| Candidate::clamped(c.clone()))
                    .collect();
                match acq_batch(gp, spec, &cands) {
                    Ok(v) => v,
                    Err(e) => {
                        err = Some(e);
                        vec![f64::NEG_INFINITY; batch.len()]
                    }
                }
            },
        );
        if let Some(e) = err {
            return Err(e);
        }
        if value > best_value {
            best = Candidate::clamped(coords);
            best_value = value;
        }
    }
    Ok((best, best_value))
}

/// Exact maximization over an explicit finite pool; ties resolve to the
/// earliest pool index. Returns `(index, value)`.
pub fn propose_from_pool(
    gp: &GpPosterior,
    pool: &[Candidate],
    spec: &AcquisitionSpec,
) -> Result<(usize, f64), AcqError> {
    if pool.is_empty() {
        return Err(AcqError::EmptyBudget);
    }
    let values = acq_batch(gp, spec, pool)?;
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    Ok((best, values[best]))
}

/// Maximal acquisition value over the space; same search as [`propose`].
/// Used by the EI-/PI-threshold stopping rules.
pub fn max_acq_over_space(
    gp: &GpPosterior,
    space: &SearchSpace,
    spec: &AcquisitionSpec,
    budget: usize,
    stream: &mut ChaCha8Rng,
) -> Result<f64, AcqError> {
    propose(gp, space, spec, budget, stream).map(|(_, value)| value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::KernelParams;
    use crate::space::DimensionSpec;
    use approx::assert_relative_eq;

    fn ei(incumbent: f64) -> AcquisitionSpec {
        AcquisitionSpec::new(AcqKind::ExpectedImprovement, incumbent).unwrap()
    }

    fn pi(incumbent: f64) -> AcquisitionSpec {
        AcquisitionSpec::new(AcqKind::ProbabilityOfImprovement, incumbent).unwrap()
    }

    #[test]
    fn degenerate_sigma_cases() {
        assert_eq!(acq_value(&ei(1.0), 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(acq_value(&ei(1.0), 0.25, 0.0).unwrap(), 0.75);
        assert_eq!(acq_value(&ei(1.0), 2.0, 0.0).unwrap(), 0.0);
        assert_eq!(acq_value(&pi(1.0), 0.5, 0.0).unwrap(), 1.0);
        assert_eq!(acq_value(&pi(1.0), 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(acq_value(&pi(1.0), 1.5, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn pi_at_incumbent_mean_is_half() {
        assert_relative_eq!(acq_value(&pi(0.3), 0.3, 4.0).unwrap(), 0.5);
    }

    #[test]
    fn ei_frozen_fixture() {
        // y* = 1, mu = 0, sigma = 1: EI = Phi(1) + phi(1).
        let v = acq_value(&ei(1.0), 0.0, 1.0).unwrap();
        assert_relative_eq!(v, 1.083_315_470_587_686_3, epsilon = 1e-12);
    }

    #[test]
    fn normal_cdf_reference_values() {
        // Frozen from a 40-digit evaluation; target abs error 1e-12.
        let cases = [
            (0.0, 0.5),
            (0.5, 0.691_462_461_274_013_1),
            (-0.5, 0.308_537_538_725_986_9),
            (1.0, 0.841_344_746_068_542_9),
            (-1.0, 0.158_655_253_931_457_05),
            (3.0, 0.998_650_101_968_369_9),
            (-3.0, 1.349_898_031_630_094_5e-3),
            (6.0, 0.999_999_999_013_412_35),
            (-6.0, 9.865_876_450_376_981e-10),
        ];
        for (z, want) in cases {
            assert!((normal_cdf(z) - want).abs() < 1e-12, "Phi({z})");
        }
    }

    #[test]
    fn negative_variance_rejected() {
        assert!(matches!(
            acq_value(&ei(0.0), 0.0, -1e-3),
            Err(AcqError::NegativeVariance(_))
        ));
    }

    #[test]
    fn ei_nondecreasing_in_sigma() {
        let spec = ei(0.5);
        for &mean in &[-1.0, 0.5, 2.0] {
            let mut prev = -1.0;
            for step in 0..60 {
                let sigma = step as f64 * 0.05;
                let v = acq_value(&spec, mean, sigma * sigma).unwrap();
                assert!(
                    v >= prev - 1e-12,
                    "EI decreased at mean {mean}, sigma {sigma}"
                );
                prev = v;
            }
        }
    }

    #[test]
    fn pi_bounds_and_tail() {
        let spec = pi(0.0);
        for step in -50..=50 {
            let v = acq_value(&spec, step as f64 * 0.2, 1.0).unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
        assert!(acq_value(&spec, -40.0, 1.0).unwrap() > 1.0 - 1e-12);
    }

    fn space_1d() -> SearchSpace {
        SearchSpace::new(vec![DimensionSpec::linear("x", 0.0, 1.0)], 0).unwrap()
    }

    fn toy_gp() -> GpPosterior {
        let params = KernelParams {
            signal_variance: 1.0,
            lengthscales: vec![0.2],
            noise_variance: 1e-6,
            mean_const: 0.0,
        };
        let x = [
            Candidate::new(vec![0.1]).unwrap(),
            Candidate::new(vec![0.5]).unwrap(),
            Candidate::new(vec![0.9]).unwrap(),
        ];
        GpPosterior::new(params, &x, &[0.4, -0.7, 0.2]).unwrap()
    }

    #[test]
    fn pool_proposal_matches_manual_argmax() {
        let gp = toy_gp();
        let spec = ei(-0.7);
        let pool: Vec<Candidate> = (0..101)
            .map(|i| Candidate::new(vec![i as f64 / 100.0]).unwrap())
            .collect();
        let (idx, value) = propose_from_pool(&gp, &pool, &spec).unwrap();

        let mut best_idx = 0;
        let mut best_v = f64::NEG_INFINITY;
        for (i, c) in pool.iter().enumerate() {
            let (m, v) = gp.predict_one(c).unwrap();
            let a = acq_value(&spec, m, v).unwrap();
            if a > best_v {
                best_v = a;
                best_idx = i;
            }
        }
        assert_eq!(idx, best_idx);
        assert_relative_eq!(value, best_v);
    }

    #[test]
    fn constant_posterior_ties_break_to_first_candidate() {
        // Empty conditioning set: the acquisition is identical everywhere, so
        // propose must return the first swept candidate even with budget 1.
        let params = KernelParams {
            signal_variance: 0.5,
            lengthscales: vec![0.3],
            noise_variance: 0.0,
            mean_const: 0.2,
        };
        let gp = GpPosterior::new(params, &[], &[]).unwrap();
        let space = space_1d();
        let spec = ei(0.0);
        let mut s1 = space.candidate_stream(3);
        let first = space.sample_candidates(1, &mut s1).unwrap().remove(0);

        let mut s2 = space.candidate_stream(3);
        let (picked, value) = propose(&gp, &space, &spec, 1, &mut s2).unwrap();
        assert_eq!(picked, first);
        let (m, v) = gp.predict_one(&first).unwrap();
        assert_relative_eq!(value, acq_value(&spec, m, v).unwrap());
    }

    #[test]
    fn max_acq_agrees_with_propose() {
        let gp = toy_gp();
        let space = space_1d();
        let spec = ei(-0.7);
        let (_, v1) = propose(&gp, &space, &spec, 64, &mut space.candidate_stream(17)).unwrap();
        let v2 =
            max_acq_over_space(&gp, &space, &spec, 64, &mut space.candidate_stream(17)).unwrap();
        assert_eq!(v1, v2);
    }

    #[test]
    fn zero_variance_posterior_with_mean_above_incumbent_has_zero_max_ei() {
        // Degenerate flat fit: sv at the floor, mean above the incumbent.
        let params = KernelParams {
            signal_variance: 1e-12,
            lengthscales: vec![1.0],
            noise_variance: 0.0,
            mean_const: 1.0,
        };
        let gp = GpPosterior::new(params, &[], &[]).unwrap();
        let space = space_1d();
        let spec = ei(0.0);
        let v = max_acq_over_space(&gp, &space, &spec, 32, &mut space.candidate_stream(0)).unwrap();
        assert!(v < 1e-9, "max EI {v}");
    }
}
