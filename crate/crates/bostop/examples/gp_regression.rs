//! Fit a GP to noisy 1-D observations and inspect the posterior.
//!
//! Run with: `cargo run --example gp_regression`

use bostop::gp;
use bostop::space::{Candidate, DimensionSpec, SearchSpace};
use rand::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let space = SearchSpace::new(vec![DimensionSpec::linear("x", 0.0, 1.0)], 0)?;

    // Noisy samples of a smooth function.
    let truth = |x: f64| (6.0 * x).sin() + 0.5 * x;
    let mut stream = space.candidate_stream(42);
    let x_train: Vec<Candidate> = space.sample_candidates(12, &mut stream)?;
    let y_train: Vec<f64> = x_train
        .iter()
        .map(|c| truth(c.coords()[0]) + 0.05 * (stream.gen::<f64>() - 0.5))
        .collect();

    let gp = gp::fit(&space, &x_train, &y_train, 5, &mut stream)?;
    println!("fitted kernel: {:#?}", gp.params());

    println!("\n    x      truth    mean     std");
    let queries: Vec<Candidate> = (0..=10)
        .map(|i| Candidate::new(vec![i as f64 / 10.0]).unwrap())
        .collect();
    let (means, vars) = gp.predict(&queries)?;
    for ((q, mean), var) in queries.iter().zip(&means).zip(&vars) {
        let x = q.coords()[0];
        println!("{x:>6.2} {:>8.3} {mean:>8.3} {:>8.3}", truth(x), var.sqrt());
    }

    let lml = gp::log_marginal_likelihood(gp.params(), &x_train, &y_train)?;
    println!("\nlog marginal likelihood at the fitted parameters: {lml:.3}");
    Ok(())
}
