//! Score finished runs: RYC (relative test-error change) and RTC (relative
//! time change) per run, aggregated per criterion.
//!
//! Run with: `cargo run --example score_runs`

use bostop::acq::AcqKind;
use bostop::engine::{run, ObjectiveAdapter, Proposer, RunMode, RunSettings, SyntheticObjective};
use bostop::metrics::{aggregate, score_record};
use bostop::stop::{CriterionConfig, CriterionKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let criteria = vec![
        CriterionConfig::new(CriterionKind::ConvI { i: 10 }),
        CriterionConfig::new(CriterionKind::RegretFixed { threshold: 0.01 }),
        CriterionConfig::new(CriterionKind::RegretFixed { threshold: 0.001 }),
    ];

    let mut rows = Vec::new();
    for criterion in &criteria {
        for seed in 0..4u64 {
            let objective =
                SyntheticObjective::by_name("gp_surface_a", None, 0.0, None, 60.0, seed)?;
            let space = objective.space().clone();
            let mut adapter = ObjectiveAdapter::Synthetic(objective);
            // Record-only mode: the run continues to the budget, so the same
            // record yields both the early-stop and full-budget solutions.
            let mut settings = RunSettings::new(45, seed);
            settings.mode = RunMode::RecordOnly;
            settings.fit_restarts = 3;
            settings.bound_search_budget = 512;
            let record = run(
                &space,
                &mut adapter,
                &Proposer::gpbo(AcqKind::ExpectedImprovement),
                criterion,
                &settings,
            )?;
            let label = criterion.label();
            rows.push(score_record(
                &record,
                &format!("{label}-seed{seed}"),
                "gp_surface_a",
                &label,
                seed,
                None,
            )?);
        }
    }

    println!("per-run scores:");
    for row in &rows {
        println!(
            "  {:<24} stop={:<4} ryc={:>7.4} rtc={:>6.3}",
            row.run_id,
            row.stop_iteration.map(|t| t.to_string()).unwrap_or_else(|| "-".into()),
            row.ryc,
            row.rtc
        );
    }

    println!("\naggregates (criterion: ryc mean+-std, rtc mean+-std, positive ryc):");
    for g in aggregate(&rows).groups {
        println!(
            "  {:<18} ryc {:>7.4} +- {:.4}   rtc {:>6.3} +- {:.3}   +ryc {}/{}",
            g.criterion, g.ryc_mean, g.ryc_std, g.rtc_mean, g.rtc_std, g.positive_ryc, g.n_runs
        );
    }
    Ok(())
}
