//! The corrected cross-validation variance that supplies the automatic
//! stopping threshold.
//!
//! Run with: `cargo run --example cv_variance`

use bostop::cv::{correction_factor, cv_stats, make_folds};
use rand::{Rng, SeedableRng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // The plain sample variance of k fold scores underestimates the variance
    // of their mean because training sets overlap; the correction rescales it.
    println!("correction factors (1/k + fold/rest):");
    for (k, fold, rest) in [(2usize, 1usize, 1usize), (5, 1, 4), (10, 1, 9)] {
        println!("  {k:>2}-fold: {:.4}", correction_factor(k, fold, rest));
    }

    // Ten noisy fold scores of one hyperparameter evaluation.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let fold_values: Vec<f64> = (0..10).map(|_| 0.23 + 0.02 * rng.gen::<f64>()).collect();
    let stats = cv_stats(&fold_values, 10, 1, 9)?;
    println!("\nfold values:  {fold_values:.4?}");
    println!("mean          {:.5}", stats.mean);
    println!("s2_cv         {:.3e}", stats.sample_variance);
    println!("corrected     {:.3e}  (factor {:.4})", stats.corrected_variance, stats.correction_factor);
    println!("threshold     {:.5}  (sqrt of corrected variance)", stats.corrected_variance.sqrt());

    // Fold assignment for an actual dataset, as sent to external objectives.
    let spec = make_folds(23, 5, &mut rng)?;
    println!("\nfold sizes for n=23, k=5: {:?}", spec.fold_sizes());
    Ok(())
}
