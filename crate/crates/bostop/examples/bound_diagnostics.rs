//! Bound-quality study: compare the regret upper bound against the true
//! regret along a run and count how often the bound fails.
//!
//! Run with: `cargo run --example bound_diagnostics`

use bostop::acq::AcqKind;
use bostop::engine::{run, ObjectiveAdapter, Proposer, RunMode, RunSettings, SyntheticObjective};
use bostop::metrics::bound_gap_series;
use bostop::stop::{CriterionConfig, CriterionKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let objective = SyntheticObjective::by_name("gp_surface_b", None, 0.0, None, 1.0, 9)?;
    let space = objective.space().clone();
    let mut adapter = ObjectiveAdapter::Synthetic(objective.clone());

    // Run to the full budget with the bound recorded at every iteration.
    let mut settings = RunSettings::new(40, 9);
    settings.mode = RunMode::RecordOnly;
    settings.always_compute_bound = true;
    settings.fit_restarts = 3;
    let record = run(
        &space,
        &mut adapter,
        &Proposer::gpbo(AcqKind::ExpectedImprovement),
        &CriterionConfig::new(CriterionKind::ConvI { i: 1000 }),
        &settings,
    )?;

    let series = bound_gap_series(&record, &objective)?;
    println!("  t     r_bar   true_regret      diff");
    for p in &series.points {
        let marker = if p.negative { "  <-- bound failed" } else { "" };
        println!("{:>3} {:>9.4} {:>12.6} {:>9.4}{marker}", p.t, p.r_bar, p.true_regret, p.diff);
    }
    println!(
        "\n{} of {} iterations had a negative difference",
        series.negatives,
        series.points.len()
    );
    println!(
        "difference quantiles: 20% {:.4}, 50% {:.4}, 80% {:.4}",
        series.q20, series.q50, series.q80
    );
    Ok(())
}
