//! Drive an external objective over the line protocol: one JSON request on
//! the child's stdin, one JSON response on its stdout.
//!
//! Run with: `cargo run --example subprocess_objective`

use bostop::engine::{run, ObjectiveAdapter, Proposer, RunSettings, SubprocessObjective};
use bostop::space::{DimensionSpec, SearchSpace};
use bostop::stop::{CriterionConfig, CriterionKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let space = SearchSpace::new(
        vec![
            DimensionSpec::log("learning_rate", 1e-6, 1.0),
            DimensionSpec::linear("subsample", 0.5, 1.0),
        ],
        0,
    )?;

    // A shell stub standing in for a real training job: it reads the request,
    // extracts learning_rate with python, and reports a deterministic score.
    let script = r#"
read line
python3 - "$line" <<'PY'
import json, math, sys
req = json.loads(sys.argv[1])
lr = req["candidate"]["learning_rate"]
sub = req["candidate"]["subsample"]
y = abs(math.log10(lr) + 3.0) / 3.0 + (1.0 - sub)
print(json.dumps({"y": y, "eval_seconds": 12.5}))
PY
"#;
    let mut adapter = ObjectiveAdapter::Subprocess(SubprocessObjective {
        command: vec!["/bin/sh".into(), "-c".into(), script.into()],
        seed: 17,
        fold_spec: None,
    });

    let record = run(
        &space,
        &mut adapter,
        &Proposer::RandomSearch,
        &CriterionConfig::new(CriterionKind::ConvI { i: 6 }),
        &RunSettings::new(15, 17),
    )?;
    for row in &record.rows {
        println!(
            "t={:<2} y={:.4} best={:.4} lr={:.2e}",
            row.t,
            row.y,
            row.incumbent_value,
            row.candidate["learning_rate"]
        );
    }
    println!("\n{}", record.summary.reason);
    Ok(())
}
