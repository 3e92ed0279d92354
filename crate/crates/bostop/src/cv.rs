//! k-fold cross-validation bookkeeping and the corrected variance estimate of
//! the fold-mean, which supplies the variance-based stopping threshold.
//!
//! The raw fold statistics use the 1/k (biased) sample variance
//! `s2_cv = 1/k sum_i (mean - y_i)^2`; the corrected estimate rescales it by
//! the Nadeau-Bengio factor `1/k + |D_i| / |D_-i|`, which for 10 equal folds
//! is about 0.21.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CvError {
    #[error("fold count {k} invalid for {n} samples (need 2 <= k <= n)")]
    BadFoldCount { n: usize, k: usize },
    #[error("expected {expected} fold values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("fold values must be finite")]
    NonFinite,
}

/// Assignment of `n` sample indices to `k` folds whose sizes differ by at
/// most one.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FoldSpec {
    pub n: usize,
    pub k: usize,
    /// `assignment[i]` is the fold id of sample `i`.
    pub assignment: Vec<usize>,
}

impl FoldSpec {
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn indices_of(&self, fold: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    /// Typical fold size and its complement, used for the variance correction.
    pub fn correction_sizes(&self) -> (usize, usize) {
        let fold = self.n / self.k;
        (fold, self.n - fold)
    }
}

/// Shuffles `0..n` with the stream and splits it into `k` contiguous blocks;
/// the first `n % k` folds take the extra sample.
pub fn make_folds(n: usize, k: usize, stream: &mut impl Rng) -> Result<FoldSpec, CvError> {
    if k < 2 || k > n {
        return Err(CvError::BadFoldCount { n, k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(stream);
    let base = n / k;
    let remainder = n % k;
    let mut assignment = vec![0usize; n];
    let mut cursor = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < remainder);
        for &idx in &order[cursor..cursor + size] {
            assignment[idx] = fold;
        }
        cursor += size;
    }
    Ok(FoldSpec { n, k, assignment })
}

/// Nadeau-Bengio post-correction factor `1/k + fold_size / rest_size`.
pub fn correction_factor(k: usize, fold_size: usize, rest_size: usize) -> f64 {
    1.0 / k as f64 + fold_size as f64 / rest_size as f64
}

/// Fold-level statistics of one cross-validated evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct CvStats {
    pub fold_values: Vec<f64>,
    /// Sample mean of the fold values (the reported objective value).
    pub mean: f64,
    /// `s2_cv` with 1/k normalization.
    pub sample_variance: f64,
    /// `correction_factor * sample_variance`, the variance estimate of the mean.
    pub corrected_variance: f64,
    pub correction_factor: f64,
}

/// Computes [`CvStats`] with the default 1/k variance normalization.
pub fn cv_stats(
    fold_values: &[f64],
    k: usize,
    fold_size: usize,
    rest_size: usize,
) -> Result<CvStats, CvError> {
    cv_stats_with(fold_values, k, fold_size, rest_size, false)
}

/// As [`cv_stats`]; `unbiased` switches the sample variance to 1/(k-1).
pub fn cv_stats_with(
    fold_values: &[f64],
    k: usize,
    fold_size: usize,
    rest_size: usize,
    unbiased: bool,
) -> Result<CvStats, CvError> {
    if fold_values.len() != k {
        return Err(CvError::LengthMismatch {
            expected: k,
            got: fold_values.len(),
        });
    }
    if k < 2 || fold_size < 1 || rest_size < 1 {
        return Err(CvError::BadFoldCount {
            n: fold_size + rest_size,
            k,
        });
    }
    if fold_values.iter().any(|v| !v.is_finite()) {
        return Err(CvError::NonFinite);
    }
    // Identical folds must give exactly their value and zero variance, not a
    // rounding residue.
    let all_equal = fold_values.iter().all(|&v| v == fold_values[0]);
    let mean = if all_equal {
        fold_values[0]
    } else {
        fold_values.iter().sum::<f64>() / k as f64
    };
    let sum_sq: f64 = if all_equal {
        0.0
    } else {
        fold_values.iter().map(|v| (mean - v) * (mean - v)).sum()
    };
    let denom = if unbiased { k - 1 } else { k } as f64;
    let sample_variance = sum_sq / denom;
    let factor = correction_factor(k, fold_size, rest_size);
    Ok(CvStats {
        fold_values: fold_values.to_vec(),
        mean,
        sample_variance,
        corrected_variance: factor * sample_variance,
        correction_factor: factor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn equal_folds_partition_all_indices() {
        let mut rng = crate::rng::stream(1, &[]);
        let spec = make_folds(100, 10, &mut rng).unwrap();
        assert_eq!(spec.fold_sizes(), vec![10; 10]);
        let mut seen = vec![false; 100];
        for fold in 0..10 {
            for idx in spec.indices_of(fold) {
                assert!(!seen[idx]);
                seen[idx] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn leave_one_out_and_remainder_splits() {
        let mut rng = crate::rng::stream(2, &[]);
        let loo = make_folds(10, 10, &mut rng).unwrap();
        assert_eq!(loo.fold_sizes(), vec![1; 10]);

        let uneven = make_folds(11, 10, &mut rng).unwrap();
        let mut sizes = uneven.fold_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 1, 1, 1, 1, 1, 1, 1, 1, 2]);
    }

    #[test]
    fn bad_fold_counts_rejected() {
        let mut rng = crate::rng::stream(3, &[]);
        assert!(matches!(
            make_folds(5, 1, &mut rng),
            Err(CvError::BadFoldCount { .. })
        ));
        assert!(matches!(
            make_folds(5, 6, &mut rng),
            Err(CvError::BadFoldCount { .. })
        ));
    }

    #[test]
    fn folds_are_deterministic_given_the_stream() {
        let a = make_folds(30, 7, &mut crate::rng::stream(9, &[])).unwrap();
        let b = make_folds(30, 7, &mut crate::rng::stream(9, &[])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn correction_factor_values() {
        // 10-fold with equal folds: 1/10 + 1/9, which rounds to 0.21.
        let f = correction_factor(10, 1, 9);
        assert_relative_eq!(f, 0.211_111_111_111_111_1, epsilon = 1e-15);
        assert_eq!(format!("{f:.2}"), "0.21");
        assert_relative_eq!(correction_factor(2, 1, 1), 1.5);
        assert_relative_eq!(correction_factor(5, 1, 4), 0.45);
    }

    #[test]
    fn stats_hand_fixture() {
        // mean 0.2, s2 = 0.02/3, corrected = (1/3 + 1/2) * s2.
        let stats = cv_stats(&[0.1, 0.2, 0.3], 3, 1, 2).unwrap();
        assert_relative_eq!(stats.mean, 0.2, epsilon = 1e-15);
        assert_relative_eq!(stats.sample_variance, 0.02 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(stats.correction_factor, 1.0 / 3.0 + 0.5, epsilon = 1e-15);
        assert_relative_eq!(
            stats.corrected_variance,
            (1.0 / 3.0 + 0.5) * 0.02 / 3.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn constant_folds_have_zero_variance() {
        let stats = cv_stats(&[0.4; 10], 10, 1, 9).unwrap();
        assert_eq!(stats.sample_variance, 0.0);
        assert_eq!(stats.corrected_variance, 0.0);
    }

    #[test]
    fn unbiased_option_rescales() {
        let biased = cv_stats(&[0.1, 0.2, 0.3], 3, 1, 2).unwrap();
        let unbiased = cv_stats_with(&[0.1, 0.2, 0.3], 3, 1, 2, true).unwrap();
        assert_relative_eq!(unbiased.sample_variance, biased.sample_variance * 3.0 / 2.0);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(matches!(
            cv_stats(&[0.1, 0.2], 3, 1, 2),
            Err(CvError::LengthMismatch {
                expected: 3,
                got: 2
            })
        ));
    }

    proptest! {
        #[test]
        fn variance_matches_loop_oracle(values in proptest::collection::vec(-10.0f64..10.0, 2..12)) {
            let k = values.len();
            let stats = cv_stats(&values, k, 1, k - 1).unwrap();
            let mean = values.iter().sum::<f64>() / k as f64;
            let mut acc = 0.0;
            for v in &values {
                acc += (mean - v) * (mean - v);
            }
            prop_assert!((stats.sample_variance - acc / k as f64).abs() < 1e-12);
            prop_assert!(stats.sample_variance >= 0.0);
        }

        #[test]
        fn permutation_invariance(values in proptest::collection::vec(-5.0f64..5.0, 4..8), seed in 0u64..100) {
            let k = values.len();
            let stats = cv_stats(&values, k, 1, k - 1).unwrap();
            let mut shuffled = values.clone();
            shuffled.shuffle(&mut crate::rng::stream(seed, &[]));
            let stats2 = cv_stats(&shuffled, k, 1, k - 1).unwrap();
            prop_assert!((stats.mean - stats2.mean).abs() < 1e-12);
            prop_assert!((stats.sample_variance - stats2.sample_variance).abs() < 1e-12);
        }

        #[test]
        fn correction_no_smaller_than_sample_iff_factor_at_least_one(
            k in 2usize..12, fold in 1usize..5, rest in 1usize..20,
        ) {
            let factor = correction_factor(k, fold, rest);
            let stats = cv_stats_with(&vec![0.3; k], k, fold, rest, false).unwrap();
            prop_assert_eq!(stats.correction_factor, factor);
            // with a nonzero-variance example
            let mut vals: Vec<f64> = (0..k).map(|i| i as f64).collect();
            vals[0] += 0.5;
            let s = cv_stats(&vals, k, fold, rest).unwrap();
            if factor >= 1.0 {
                prop_assert!(s.corrected_variance >= s.sample_variance);
            } else {
                prop_assert!(s.corrected_variance <= s.sample_variance);
            }
        }
    }
}
