//! End-to-end tests of the batch commands through the library entry points
//! the binary wraps.

use std::fs;
use std::path::Path;

use bostop::cli::{
    cmd_diagnose, cmd_run, cmd_score, load_record_file, DiagnoseArgs, RunArgs, ScoreArgs,
};

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

const MINIMAL: &str = r#"{
    "objective": {"kind": "synthetic", "name": "sphere", "dims": 2, "noise_std": 0.05, "folds": 5},
    "proposer": {"kind": "random_search"},
    "criteria": ["conv:i=4"],
    "seeds": [1],
    "max_iters": 10,
    "bound_search_budget": 64,
    "fit_restarts": 2
}"#;

#[test]
fn run_writes_record_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), MINIMAL);
    let out = dir.path().join("out");
    let code = cmd_run(&RunArgs {
        config,
        out: out.clone(),
        seeds: None,
        max_iters: None,
        criteria: None,
    });
    assert_eq!(code, 0);
    assert!(out.join("manifest.json").exists());
    let record_path = out.join("sphere__conv_4__seed1.jsonl");
    assert!(record_path.exists());
    let (meta, record) = load_record_file(&record_path).unwrap();
    assert_eq!(meta.task, "sphere");
    assert_eq!(meta.criterion, "conv_4");
    assert_eq!(record.rows.len(), 10); // record-only mode runs to budget
}

#[test]
fn unknown_criterion_exits_one_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = MINIMAL.replace("conv:i=4", "bogus:i=4");
    let config = write_config(dir.path(), &bad);
    let code = cmd_run(&RunArgs {
        config,
        out: dir.path().join("out"),
        seeds: None,
        max_iters: None,
        criteria: None,
    });
    assert_eq!(code, 1);
}

#[test]
fn criteria_times_seeds_fan_out() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), MINIMAL);
    let out = dir.path().join("out");
    let code = cmd_run(&RunArgs {
        config,
        out: out.clone(),
        seeds: Some(vec![1, 2]),
        max_iters: Some(6),
        criteria: Some(vec![
            "conv:i=3".to_string(),
            "regret_fixed:threshold=0.01,warmup=3".to_string(),
            "regret_cv:warmup=3".to_string(),
        ]),
    });
    assert_eq!(code, 0);
    let records: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.ends_with(".jsonl")
        })
        .collect();
    assert_eq!(records.len(), 6);
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), MINIMAL);
    let out1 = dir.path().join("out1");
    let out2 = dir.path().join("out2");
    for out in [&out1, &out2] {
        let code = cmd_run(&RunArgs {
            config: config.clone(),
            out: out.clone(),
            seeds: None,
            max_iters: None,
            criteria: None,
        });
        assert_eq!(code, 0);
    }
    let name = "sphere__conv_4__seed1.jsonl";
    let a = fs::read(out1.join(name)).unwrap();
    let b = fs::read(out2.join(name)).unwrap();
    assert_eq!(a, b);
    let ma = fs::read(out1.join("manifest.json")).unwrap();
    let mb = fs::read(out2.join("manifest.json")).unwrap();
    assert_eq!(ma, mb);
}

#[test]
fn score_emits_metrics_and_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), MINIMAL);
    let out = dir.path().join("out");
    assert_eq!(
        cmd_run(&RunArgs {
            config,
            out: out.clone(),
            seeds: Some(vec![1, 2, 3]),
            max_iters: None,
            criteria: Some(vec!["conv:i=2".to_string()]),
        }),
        0
    );
    let scores = dir.path().join("scores");
    assert_eq!(
        cmd_score(&ScoreArgs { records: out.clone(), out: scores.clone(), budget: None }),
        0
    );
    let metrics = fs::read_to_string(scores.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("run_id,task,criterion,seed,stop_iteration,y_T,y_es,t_T,t_es,ryc,rtc"));
    assert_eq!(metrics.lines().count(), 4); // header + 3 seeds
    let aggregates = fs::read_to_string(scores.join("aggregates.csv")).unwrap();
    assert_eq!(aggregates.lines().count(), 2); // header + one (task, criterion)
    assert!(aggregates.lines().nth(1).unwrap().starts_with("sphere,conv_2,3,"));

    // determinism of the emitted CSVs
    let scores2 = dir.path().join("scores2");
    assert_eq!(cmd_score(&ScoreArgs { records: out, out: scores2.clone(), budget: None }), 0);
    assert_eq!(
        fs::read(scores.join("metrics.csv")).unwrap(),
        fs::read(scores2.join("metrics.csv")).unwrap()
    );
}

#[test]
fn score_handles_never_fired_runs_with_zero_scores() {
    let dir = tempfile::tempdir().unwrap();
    // conv horizon longer than the budget: the criterion never fires.
    let config = write_config(dir.path(), &MINIMAL.replace("conv:i=4", "conv:i=50"));
    let out = dir.path().join("out");
    assert_eq!(
        cmd_run(&RunArgs {
            config,
            out: out.clone(),
            seeds: None,
            max_iters: None,
            criteria: None
        }),
        0
    );
    let scores = dir.path().join("scores");
    assert_eq!(cmd_score(&ScoreArgs { records: out, out: scores.clone(), budget: None }), 0);
    let metrics = fs::read_to_string(scores.join("metrics.csv")).unwrap();
    let row = metrics.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    // stop_iteration empty, ryc and rtc exactly zero
    assert_eq!(fields[4], "");
    assert_eq!(fields[9].parse::<f64>().unwrap(), 0.0);
    assert_eq!(fields[10].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn diagnose_needs_true_regret() {
    let dir = tempfile::tempdir().unwrap();

    // Synthetic run with diagnostics on: bound columns and true regret exist.
    let with_diag = MINIMAL.replace("\"fit_restarts\": 2", "\"fit_restarts\": 2, \"diagnostics\": true");
    let config = write_config(dir.path(), &with_diag);
    let out = dir.path().join("out");
    assert_eq!(
        cmd_run(&RunArgs {
            config,
            out: out.clone(),
            seeds: None,
            max_iters: None,
            criteria: None
        }),
        0
    );
    let diag = dir.path().join("diag");
    assert_eq!(cmd_diagnose(&DiagnoseArgs { records: out, out: diag.clone() }), 0);
    let gap = fs::read_to_string(diag.join("bound_gap.csv")).unwrap();
    assert!(gap.lines().count() > 1);
    assert!(gap.starts_with("run_id,t,r_bar,true_regret,diff,negative"));
    let summary = fs::read_to_string(diag.join("bound_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);

    // A trace replay has no true regret: diagnose must refuse.
    let trace_path = dir.path().join("trace.jsonl");
    let mut trace = String::new();
    for t in 1..=8 {
        trace.push_str(&format!(
            "{{\"iteration\": {t}, \"y\": {}, \"eval_seconds\": 1.0}}\n",
            1.0 / t as f64
        ));
    }
    fs::write(&trace_path, trace).unwrap();
    let replay_config = format!(
        r#"{{
            "objective": {{"kind": "trace", "path": "trace.jsonl"}},
            "proposer": {{"kind": "random_search"}},
            "criteria": ["conv:i=3"],
            "seeds": [1],
            "max_iters": 8
        }}"#
    );
    let config2 = dir.path().join("config2.json");
    fs::write(&config2, replay_config).unwrap();
    let out2 = dir.path().join("out2");
    assert_eq!(
        cmd_run(&RunArgs {
            config: config2,
            out: out2.clone(),
            seeds: None,
            max_iters: None,
            criteria: None
        }),
        0
    );
    assert_eq!(cmd_diagnose(&DiagnoseArgs { records: out2, out: dir.path().join("diag2") }), 1);
}

#[test]
fn subprocess_objective_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let space_path = dir.path().join("space.json");
    fs::write(
        &space_path,
        r#"{"dims": [{"name": "x", "lower": 0.0, "upper": 1.0, "scale": "linear"}]}"#,
    )
    .unwrap();
    let config_body = r#"{
        "space": "space.json",
        "objective": {"kind": "subprocess", "command": ["/bin/sh", "-c", "exit 9"]},
        "proposer": {"kind": "random_search"},
        "criteria": ["conv:i=3"],
        "seeds": [1],
        "max_iters": 4
    }"#;
    let config = write_config(dir.path(), config_body);
    let code = cmd_run(&RunArgs {
        config,
        out: dir.path().join("out"),
        seeds: None,
        max_iters: None,
        criteria: None,
    });
    assert_eq!(code, 2);
}

#[test]
fn subprocess_stub_round_trips_through_run_and_score() {
    let dir = tempfile::tempdir().unwrap();
    let space_path = dir.path().join("space.json");
    fs::write(
        &space_path,
        r#"{"dims": [
            {"name": "lr", "lower": 1e-6, "upper": 1.0, "scale": "log"},
            {"name": "depth", "lower": 2.0, "upper": 32.0, "scale": "log"}
        ]}"#,
    )
    .unwrap();
    // Deterministic stub: y derived from the candidate's lr value via python.
    let stub = r#"import sys, json
req = json.loads(sys.stdin.readline())
lr = req["candidate"]["lr"]
folds = req.get("fold_spec")
k = folds["k"] if folds else 0
y = abs(-6.0 - __import__("math").log10(lr)) / 6.0
out = {"y": y, "eval_seconds": 2.0}
if k:
    out["fold_values"] = [y] * k
print(json.dumps(out))
"#;
    let stub_path = dir.path().join("objective.py");
    fs::write(&stub_path, stub).unwrap();
    let config_body = format!(
        r#"{{
            "space": "space.json",
            "objective": {{"kind": "subprocess",
                           "command": ["python3", "{}"],
                           "dataset_size": 50, "folds": 5}},
            "proposer": {{"kind": "random_search"}},
            "criteria": ["regret_cv:warmup=3"],
            "seeds": [7],
            "max_iters": 6,
            "bound_search_budget": 64,
            "fit_restarts": 2
        }}"#,
        stub_path.display()
    );
    let config = write_config(dir.path(), &config_body);
    let out = dir.path().join("out");
    assert_eq!(
        cmd_run(&RunArgs {
            config,
            out: out.clone(),
            seeds: None,
            max_iters: None,
            criteria: None
        }),
        0
    );
    let files: Vec<_> = fs::read_dir(&out).unwrap().filter_map(|e| e.ok()).collect();
    assert!(files.iter().any(|f| f.file_name().to_string_lossy().ends_with(".jsonl")));
    assert_eq!(
        cmd_score(&ScoreArgs { records: out, out: dir.path().join("scores"), budget: None }),
        0
    );
}
