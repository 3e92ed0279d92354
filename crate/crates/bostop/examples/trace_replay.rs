//! Replay a recorded optimizer trace through the stopping machinery: no
//! objective is evaluated, only the criteria run.
//!
//! Run with: `cargo run --example trace_replay`

use bostop::engine::{run, ObjectiveAdapter, Proposer, ReplayObjective, RunSettings, TraceRow};
use bostop::space::{DimensionSpec, SearchSpace};
use bostop::stop::{CriterionConfig, CriterionKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A synthetic trace: steady improvement that flattens out at t = 18.
    let rows: Vec<TraceRow> = (1..=60)
        .map(|t| TraceRow {
            iteration: t,
            y: if t <= 18 { 1.0 / (t as f64).sqrt() } else { 1.0 / 18f64.sqrt() },
            test_metric: None,
            fold_metrics: None,
            eval_seconds: 30.0,
            candidate: None,
        })
        .collect();

    let space = SearchSpace::new(vec![DimensionSpec::linear("x", 0.0, 1.0)], 0)?;
    for i in [10usize, 30] {
        let mut adapter = ObjectiveAdapter::Replay(ReplayObjective::new(rows.clone()));
        let criterion = CriterionConfig::new(CriterionKind::ConvI { i });
        let record = run(
            &space,
            &mut adapter,
            &Proposer::RandomSearch,
            &criterion,
            &RunSettings::new(rows.len(), 0),
        )?;
        match record.summary.stop_iteration {
            Some(t) => {
                let saved = rows.len() as f64 * 30.0 - record.rows.last().unwrap().cum_seconds;
                println!("conv_{i:<2} stops at t={t:<3} saving {saved:>6.0}s of trace time");
            }
            None => println!("conv_{i:<2} never fires within the trace"),
        }
    }
    Ok(())
}
