//! The high-probability upper bound on simple regret, step by step: fit a GP
//! on the best half of the observations, compute confidence bounds, and take
//! `min ucb (evaluated) - min lcb (domain)`.
//!
//! Run with: `cargo run --example regret_bound`

use bostop::engine::{Observation, ObservationLog};
use bostop::gp;
use bostop::space::{DimensionSpec, SearchSpace};
use bostop::stop::{filter_top_q, regret_upper_bound, BetaSchedule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let space = SearchSpace::new(vec![DimensionSpec::linear("x", 0.0, 1.0)], 0)?;
    let objective = |x: f64| (x - 0.73).powi(2) * 4.0 + 0.05 * (25.0 * x).sin();

    let mut stream = space.candidate_stream(11);
    let mut log = ObservationLog::new();
    let schedule = BetaSchedule::for_space(&space);
    let mut fit_stream = space.candidate_stream(12);

    println!("  t   best y    beta_t   min_ucb   min_lcb     r_bar");
    for t in 1..=20 {
        let candidate = space.sample_candidates(1, &mut stream)?.remove(0);
        let y = objective(candidate.coords()[0]);
        log.push(Observation {
            iteration: t,
            candidate: Some(candidate),
            y,
            fold_values: None,
            eval_seconds: 1.0,
        })?;
        if t < 3 {
            continue;
        }

        // Surrogate over the best half, bound over all evaluated points.
        let filtered = filter_top_q(&log, 0.5)?;
        let gp = gp::fit(
            &space,
            &filtered.candidates().unwrap(),
            &filtered.values(),
            3,
            &mut fit_stream,
        )?;
        let evaluated = log.candidates().unwrap();
        let bound =
            regret_upper_bound(&gp, &space, &evaluated, t, &schedule, 1024, &mut stream)?;
        let best = log.values().into_iter().fold(f64::INFINITY, f64::min);
        println!(
            "{t:>3} {best:>8.4} {:>9.3} {:>9.4} {:>9.4} {:>9.4}",
            bound.beta_t, bound.min_ucb, bound.min_lcb, bound.r_bar
        );
    }
    println!("\nthe bound shrinks as the incumbent region gets resolved;");
    println!("stopping triggers once it falls below the chosen tolerance.");
    Ok(())
}
