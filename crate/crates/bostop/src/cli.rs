//! Batch front end: `run` executes an experiment config across criteria and
//! seeds, `score` turns record directories into RYC/RTC tables, `diagnose`
//! emits bound-quality series for synthetic runs.
//!
//! Seeds fan out across worker threads (`RAYON_NUM_THREADS` caps the pool);
//! each run's record is written atomically, so reruns with the same config
//! are byte-identical.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{parse_criterion, ConfigError, ExperimentConfig, ObjectiveSpec};
use crate::engine::{self, EngineError, RunRecord, RunSettings};
use crate::metrics::{
    self, aggregate, bound_gap_series_from_record, score_record, MetricsRow,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_OBJECTIVE: i32 = 2;

/// Per-run entry of the manifest written next to the records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub run_id: String,
    pub task: String,
    pub criterion: String,
    pub seed: u64,
    pub file: String,
    pub stop_iteration: Option<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub max_iters: usize,
    pub runs: Vec<ManifestEntry>,
}

/// Meta line prepended to each record file, so `score` can key rows without
/// the original config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordMeta {
    pub kind: String,
    pub run_id: String,
    pub task: String,
    pub criterion: String,
    pub seed: u64,
    pub config_hash: String,
}

pub struct RunArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seeds: Option<Vec<u64>>,
    pub max_iters: Option<usize>,
    pub criteria: Option<Vec<String>>,
}

fn task_name(config: &ExperimentConfig) -> String {
    match &config.objective {
        ObjectiveSpec::Synthetic { name, .. } => name.clone(),
        ObjectiveSpec::Subprocess { command, .. } => {
            let stem = Path::new(&command[0])
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| command[0].clone());
            format!("subprocess_{stem}")
        }
        ObjectiveSpec::Trace { path } => {
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "trace".to_string());
            format!("trace_{stem}")
        }
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)
}

fn fail(code: i32, message: impl std::fmt::Display) -> i32 {
    eprintln!("error: {message}");
    code
}

/// Executes every (criterion, seed) combination of the config and writes one
/// record file per run plus `manifest.json`.
pub fn cmd_run(args: &RunArgs) -> i32 {
    let mut config = match ExperimentConfig::from_json_file(&args.config) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    if let Some(seeds) = &args.seeds {
        config.seeds = seeds.clone();
    }
    if let Some(max_iters) = args.max_iters {
        config.max_iters = max_iters;
    }
    if let Some(criteria) = &args.criteria {
        config.criteria = criteria.clone();
    }
    if let Err(e) = config.validate() {
        return fail(EXIT_CONFIG, e);
    }
    let base_dir = args.config.parent().unwrap_or(Path::new(".")).to_path_buf();
    let space = match config.load_space(&base_dir) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let criteria: Vec<_> = match config
        .criteria
        .iter()
        .map(|spec| parse_criterion(spec).map(|c| (spec.clone(), c)))
        .collect::<Result<Vec<_>, ConfigError>>()
    {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    if let Err(e) = fs::create_dir_all(&args.out) {
        return fail(EXIT_CONFIG, format!("cannot create {}: {e}", args.out.display()));
    }

    let task = task_name(&config);
    let config_hash = config.hash();
    let mut jobs = Vec::new();
    for (spec, criterion) in &criteria {
        for &seed in &config.seeds {
            jobs.push((spec.clone(), criterion.clone(), seed));
        }
    }

    let results: Vec<Result<ManifestEntry, (i32, String)>> = jobs
        .par_iter()
        .map(|(_, criterion, seed)| {
            let mut objective = config
                .build_objective(&base_dir, *seed)
                .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
            let settings = RunSettings {
                max_iters: config.max_iters,
                seed: *seed,
                mode: config.mode,
                bound_search_budget: config.bound_search_budget,
                fit_restarts: config.fit_restarts,
                always_compute_bound: config.diagnostics,
            };
            let run_id = format!("{task}__{}__seed{seed}", criterion.label());
            let record =
                match engine::run(&space, &mut objective, &config.proposer, criterion, &settings) {
                    Ok(record) => record,
                    Err(
                        EngineError::Objective { t, source, partial }
                    ) => {
                        // Keep the partial record on disk for inspection.
                        let _ = write_record(
                            &args.out, &run_id, &task, criterion.label(), *seed, &config_hash,
                            &partial,
                        );
                        return Err((
                            EXIT_OBJECTIVE,
                            format!("run {run_id} failed at t={t}: {source}"),
                        ));
                    }
                    Err(EngineError::ReplayExhausted { t, partial }) => {
                        let _ = write_record(
                            &args.out, &run_id, &task, criterion.label(), *seed, &config_hash,
                            &partial,
                        );
                        return Err((
                            EXIT_OBJECTIVE,
                            format!("run {run_id}: trace exhausted at t={t} (budget too large)"),
                        ));
                    }
                    Err(e) => return Err((EXIT_OBJECTIVE, format!("run {run_id}: {e}"))),
                };
            let file = write_record(
                &args.out, &run_id, &task, criterion.label(), *seed, &config_hash, &record,
            )
            .map_err(|e| (EXIT_OBJECTIVE, format!("run {run_id}: cannot write record: {e}")))?;
            Ok(ManifestEntry {
                run_id,
                task: task.clone(),
                criterion: criterion.label(),
                seed: *seed,
                file,
                stop_iteration: record.summary.stop_iteration,
                reason: record.summary.reason.clone(),
            })
        })
        .collect();

    let mut entries = Vec::new();
    for result in results {
        match result {
            Ok(entry) => entries.push(entry),
            Err((code, message)) => return fail(code, message),
        }
    }
    entries.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    let manifest =
        Manifest { config_hash, max_iters: config.max_iters, runs: entries };
    let manifest_json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    if let Err(e) = atomic_write(&args.out.join("manifest.json"), &manifest_json) {
        return fail(EXIT_OBJECTIVE, format!("cannot write manifest: {e}"));
    }
    println!("wrote {} records to {}", manifest.runs.len(), args.out.display());
    EXIT_OK
}

fn write_record(
    out: &Path,
    run_id: &str,
    task: &str,
    criterion: String,
    seed: u64,
    config_hash: &str,
    record: &RunRecord,
) -> std::io::Result<String> {
    let meta = RecordMeta {
        kind: "meta".to_string(),
        run_id: run_id.to_string(),
        task: task.to_string(),
        criterion,
        seed,
        config_hash: config_hash.to_string(),
    };
    let mut bytes = serde_json::to_vec(&meta).expect("meta serializes");
    bytes.push(b'\n');
    record.write_jsonl(&mut bytes)?;
    let filename = format!("{run_id}.jsonl");
    atomic_write(&out.join(&filename), &bytes)?;
    Ok(filename)
}

/// Loads a record file written by [`cmd_run`]: the meta line plus the record.
pub fn load_record_file(path: &Path) -> Result<(RecordMeta, RunRecord), String> {
    let file = fs::File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    std::io::BufRead::read_line(&mut reader, &mut first)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let meta: RecordMeta = serde_json::from_str(&first)
        .map_err(|e| format!("{}: bad meta line: {e}", path.display()))?;
    let record = RunRecord::read_jsonl(reader)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    Ok((meta, record))
}

fn record_files(dir: &Path) -> Result<Vec<PathBuf>, String> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|ext| ext == "jsonl")
                && p.file_name().is_some_and(|n| n != "manifest.json")
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(format!("{} contains no .jsonl record files", dir.display()));
    }
    Ok(files)
}

pub struct ScoreArgs {
    pub records: PathBuf,
    pub out: PathBuf,
    /// Full-budget horizon `T`; defaults to each record's length.
    pub budget: Option<usize>,
}

/// Scores every record in a directory and writes `metrics.csv` plus
/// `aggregates.csv`.
pub fn cmd_score(args: &ScoreArgs) -> i32 {
    let files = match record_files(&args.records) {
        Ok(f) => f,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let mut rows: Vec<MetricsRow> = Vec::new();
    for path in &files {
        let (meta, record) = match load_record_file(path) {
            Ok(r) => r,
            Err(e) => return fail(EXIT_CONFIG, e),
        };
        match score_record(
            &record,
            &meta.run_id,
            &meta.task,
            &meta.criterion,
            meta.seed,
            args.budget,
        ) {
            Ok(row) => rows.push(row),
            Err(e) => return fail(EXIT_CONFIG, format!("{}: {e}", path.display())),
        }
    }
    if let Err(e) = fs::create_dir_all(&args.out) {
        return fail(EXIT_CONFIG, format!("cannot create {}: {e}", args.out.display()));
    }
    let mut metrics_bytes = Vec::new();
    if let Err(e) = metrics::write_metrics_csv(&mut metrics_bytes, &rows) {
        return fail(EXIT_CONFIG, e);
    }
    if let Err(e) = atomic_write(&args.out.join("metrics.csv"), &metrics_bytes) {
        return fail(EXIT_CONFIG, e);
    }
    let report = aggregate(&rows);
    let mut agg_bytes = Vec::new();
    if let Err(e) = metrics::write_aggregate_csv(&mut agg_bytes, &report) {
        return fail(EXIT_CONFIG, e);
    }
    if let Err(e) = atomic_write(&args.out.join("aggregates.csv"), &agg_bytes) {
        return fail(EXIT_CONFIG, e);
    }
    println!("scored {} runs into {}", rows.len(), args.out.display());
    EXIT_OK
}

pub struct DiagnoseArgs {
    pub records: PathBuf,
    pub out: PathBuf,
}

/// Emits the bound-gap series (`bound_gap.csv`) and per-run summary
/// (`bound_summary.csv`) for synthetic-run records carrying true regret.
pub fn cmd_diagnose(args: &DiagnoseArgs) -> i32 {
    let files = match record_files(&args.records) {
        Ok(f) => f,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let mut series = Vec::new();
    for path in &files {
        let (meta, record) = match load_record_file(path) {
            Ok(r) => r,
            Err(e) => return fail(EXIT_CONFIG, e),
        };
        match bound_gap_series_from_record(&record) {
            Ok(s) => series.push((meta.run_id, s)),
            Err(e) => {
                return fail(
                    EXIT_CONFIG,
                    format!("{}: {e} (diagnose needs synthetic runs with the bound enabled)", path.display()),
                )
            }
        }
    }
    if let Err(e) = fs::create_dir_all(&args.out) {
        return fail(EXIT_CONFIG, format!("cannot create {}: {e}", args.out.display()));
    }
    let mut gap_bytes = Vec::new();
    if let Err(e) = metrics::write_bound_gap_csv(&mut gap_bytes, &series) {
        return fail(EXIT_CONFIG, e);
    }
    if let Err(e) = atomic_write(&args.out.join("bound_gap.csv"), &gap_bytes) {
        return fail(EXIT_CONFIG, e);
    }
    let mut summary_bytes = Vec::new();
    if let Err(e) = metrics::write_bound_summary_csv(&mut summary_bytes, &series) {
        return fail(EXIT_CONFIG, e);
    }
    if let Err(e) = atomic_write(&args.out.join("bound_summary.csv"), &summary_bytes) {
        return fail(EXIT_CONFIG, e);
    }
    let negatives: usize = series.iter().map(|(_, s)| s.negatives).sum();
    let total: usize = series.iter().map(|(_, s)| s.points.len()).sum();
    println!(
        "diagnosed {} runs ({total} bound points, {negatives} negative differences)",
        series.len()
    );
    EXIT_OK
}
