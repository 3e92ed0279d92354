//! Expected improvement and probability of improvement, plus the inner
//! maximizer that proposes the next candidate.
//!
//! Run with: `cargo run --example acquisition`

use bostop::acq::{acq_value, propose, AcqKind, AcquisitionSpec};
use bostop::gp::{GpPosterior, KernelParams};
use bostop::space::{Candidate, DimensionSpec, SearchSpace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A small posterior over three observations of a 1-D objective.
    let params = KernelParams {
        signal_variance: 1.0,
        lengthscales: vec![0.2],
        noise_variance: 1e-4,
        mean_const: 0.0,
    };
    let x = [
        Candidate::new(vec![0.15])?,
        Candidate::new(vec![0.5])?,
        Candidate::new(vec![0.85])?,
    ];
    let y = [0.3, -0.6, 0.1];
    let gp = GpPosterior::new(params, &x, &y)?;
    let incumbent = y.iter().cloned().fold(f64::INFINITY, f64::min);

    println!("  acquisition values along the axis (incumbent {incumbent}):\n");
    println!("    x      mean     std       EI        PI");
    for i in 0..=10 {
        let q = Candidate::new(vec![i as f64 / 10.0])?;
        let (mean, var) = gp.predict_one(&q)?;
        let ei = acq_value(
            &AcquisitionSpec::new(AcqKind::ExpectedImprovement, incumbent)?,
            mean,
            var,
        )?;
        let pi = acq_value(
            &AcquisitionSpec::new(AcqKind::ProbabilityOfImprovement, incumbent)?,
            mean,
            var,
        )?;
        println!(
            "{:>6.2} {mean:>8.3} {:>8.3} {ei:>9.5} {pi:>9.5}",
            q.coords()[0],
            var.sqrt()
        );
    }

    let space = SearchSpace::new(vec![DimensionSpec::linear("x", 0.0, 1.0)], 0)?;
    let spec = AcquisitionSpec::new(AcqKind::ExpectedImprovement, incumbent)?;
    let (next, value) = propose(&gp, &space, &spec, 2048, &mut space.candidate_stream(7))?;
    println!("\nproposed next candidate: x = {:.4} with EI = {value:.5}", next.coords()[0]);
    Ok(())
}
