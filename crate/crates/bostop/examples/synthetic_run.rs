//! Full optimization runs with automatic termination on synthetic objectives:
//! a fixed regret tolerance on Branin, and the CV-variance threshold on a
//! noisy sphere with simulated 10-fold evaluations.
//!
//! Run with: `cargo run --example synthetic_run`

use bostop::acq::AcqKind;
use bostop::engine::{run, ObjectiveAdapter, Proposer, RunSettings, SyntheticObjective};
use bostop::stop::{CriterionConfig, CriterionKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // 1. Fixed tolerance: stop once the regret bound drops below 0.01.
    let objective = SyntheticObjective::by_name("branin_scaled", None, 0.0, None, 1.0, 3)?;
    let space = objective.space().clone();
    let mut adapter = ObjectiveAdapter::Synthetic(objective);
    let mut criterion = CriterionConfig::new(CriterionKind::RegretFixed { threshold: 0.01 });
    criterion.warmup_iters = 20;
    let record = run(
        &space,
        &mut adapter,
        &Proposer::gpbo(AcqKind::ExpectedImprovement),
        &criterion,
        &RunSettings::new(60, 3),
    )?;
    println!("branin + regret_fixed(0.01): {}", record.summary.reason);
    if let Some(t) = record.summary.stop_iteration {
        let last = record.rows.last().unwrap();
        println!(
            "  stopped at t={t}: r_bar {:.5} < 0.01, true regret {:.5}",
            last.r_bar.unwrap(),
            last.true_regret.unwrap()
        );
    }
    let incumbent = record.summary.final_incumbent.unwrap();
    println!("  incumbent {:?} with value {:.5}\n", incumbent.candidate, incumbent.value);

    // 2. CV-variance threshold: stop once no plausible improvement exceeds
    //    the noise of the estimate itself.
    let objective = SyntheticObjective::by_name("sphere", Some(2), 0.05, Some(10), 1.0, 5)?;
    let space = objective.space().clone();
    let mut adapter = ObjectiveAdapter::Synthetic(objective);
    let criterion = CriterionConfig::new(CriterionKind::RegretCv { var_scale: None });
    let record = run(
        &space,
        &mut adapter,
        &Proposer::gpbo(AcqKind::ExpectedImprovement),
        &criterion,
        &RunSettings::new(60, 5),
    )?;
    println!("noisy sphere + regret_cv: {}", record.summary.reason);
    if let Some(t) = record.summary.stop_iteration {
        let row = &record.rows[t - 1];
        println!(
            "  stopped at t={t}: r_bar {:.5} < sqrt(Var f) = {:.5}",
            row.stop_statistic.unwrap(),
            row.stop_threshold.unwrap()
        );
    } else {
        println!("  criterion did not fire within the budget");
    }
    Ok(())
}
