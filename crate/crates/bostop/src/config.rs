//! Experiment configuration: the JSON config file for batch runs, the
//! `name:key=val,...` criterion syntax used on the command line, and config
//! hashing for output provenance.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::{
    ObjectiveAdapter, Proposer, ReplayObjective, RunMode, SubprocessObjective, SyntheticObjective,
};
use crate::rng;
use crate::space::SearchSpace;
use crate::stop::{BetaSchedule, CriterionConfig, CriterionKind, DEFAULT_WARMUP_ITERS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("cannot read `{path}`: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.to_string(), reason: reason.into() }
}

/// What gets optimized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveSpec {
    /// Named closed-form function; `folds` simulates k-fold evaluations.
    Synthetic {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dims: Option<usize>,
        #[serde(default)]
        noise_std: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        folds: Option<usize>,
        #[serde(default = "default_eval_seconds")]
        eval_seconds: f64,
    },
    /// External command speaking the one-line JSON protocol.
    Subprocess {
        command: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dataset_size: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        folds: Option<usize>,
    },
    /// Recorded trace replayed through the stop criteria.
    Trace { path: PathBuf },
}

fn default_eval_seconds() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Path to a search-space JSON file; optional for synthetic objectives,
    /// which carry their canonical space.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<PathBuf>,
    pub objective: ObjectiveSpec,
    pub proposer: Proposer,
    /// Criterion spec strings, e.g. `"regret_cv:warmup=20"`.
    pub criteria: Vec<String>,
    pub seeds: Vec<u64>,
    pub max_iters: usize,
    #[serde(default = "default_mode")]
    pub mode: RunMode,
    #[serde(default = "default_bound_budget")]
    pub bound_search_budget: usize,
    #[serde(default = "default_fit_restarts")]
    pub fit_restarts: usize,
    /// Record the bound series even for criteria that do not consume it.
    #[serde(default)]
    pub diagnostics: bool,
}

fn default_mode() -> RunMode {
    RunMode::RecordOnly
}

fn default_bound_budget() -> usize {
    crate::acq::DEFAULT_SWEEP_BUDGET
}

fn default_fit_restarts() -> usize {
    crate::gp::DEFAULT_RESTARTS
}

impl ExperimentConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let config: Self = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "at least one seed is required"));
        }
        if self.max_iters < 1 {
            return Err(invalid("max_iters", "must be at least 1"));
        }
        if self.criteria.is_empty() {
            return Err(invalid("criteria", "at least one criterion is required"));
        }
        for spec in &self.criteria {
            parse_criterion(spec)?;
        }
        match &self.objective {
            ObjectiveSpec::Synthetic { name, .. } => {
                // Fail early on unknown names.
                SyntheticObjective::by_name(name, None, 0.0, None, 1.0, 0)
                    .map_err(|e| invalid("objective.name", e.to_string()))?;
            }
            ObjectiveSpec::Subprocess { command, dataset_size, folds } => {
                if command.is_empty() {
                    return Err(invalid("objective.command", "must not be empty"));
                }
                if self.space.is_none() {
                    return Err(invalid("space", "required for subprocess objectives"));
                }
                if let (Some(n), Some(k)) = (dataset_size, folds) {
                    if *k < 2 || k > n {
                        return Err(invalid("objective.folds", "need 2 <= folds <= dataset_size"));
                    }
                }
            }
            ObjectiveSpec::Trace { .. } => {}
        }
        Ok(())
    }

    /// Resolves the search space: explicit file first, otherwise the
    /// synthetic objective's canonical space.
    pub fn load_space(&self, base_dir: &Path) -> Result<SearchSpace, ConfigError> {
        if let Some(rel) = &self.space {
            let path = base_dir.join(rel);
            let space = SearchSpace::from_json_file(&path)
                .map_err(|e| invalid("space", format!("{}: {e}", path.display())))?;
            if let ObjectiveSpec::Synthetic { name, dims, .. } = &self.objective {
                let canonical = SyntheticObjective::by_name(name, *dims, 0.0, None, 1.0, 0)
                    .map_err(|e| invalid("objective.name", e.to_string()))?;
                if canonical.space().dim_count() != space.dim_count() {
                    return Err(invalid(
                        "space",
                        format!(
                            "dimension count {} does not match synthetic objective `{name}` ({})",
                            space.dim_count(),
                            canonical.space().dim_count()
                        ),
                    ));
                }
            }
            return Ok(space);
        }
        match &self.objective {
            ObjectiveSpec::Synthetic { name, dims, .. } => {
                let objective = SyntheticObjective::by_name(name, *dims, 0.0, None, 1.0, 0)
                    .map_err(|e| invalid("objective.name", e.to_string()))?;
                Ok(objective.space().clone())
            }
            // Traces of bare values need no geometry; a placeholder axis keeps
            // the engine well-formed. Candidate-carrying traces should ship a
            // real space file.
            ObjectiveSpec::Trace { .. } => Ok(SearchSpace::new(
                vec![crate::space::DimensionSpec::linear("x", 0.0, 1.0)],
                0,
            )
            .expect("placeholder space is valid")),
            ObjectiveSpec::Subprocess { .. } => {
                Err(invalid("space", "required for subprocess objectives"))
            }
        }
    }

    /// Instantiates the objective adapter for one seeded run.
    pub fn build_objective(
        &self,
        base_dir: &Path,
        seed: u64,
    ) -> Result<ObjectiveAdapter, ConfigError> {
        match &self.objective {
            ObjectiveSpec::Synthetic { name, dims, noise_std, folds, eval_seconds } => {
                let objective = SyntheticObjective::by_name(
                    name,
                    *dims,
                    *noise_std,
                    *folds,
                    *eval_seconds,
                    seed,
                )
                .map_err(|e| invalid("objective", e.to_string()))?;
                Ok(ObjectiveAdapter::Synthetic(objective))
            }
            ObjectiveSpec::Subprocess { command, dataset_size, folds } => {
                let fold_spec = match (dataset_size, folds) {
                    (Some(n), Some(k)) => Some(
                        crate::cv::make_folds(*n, *k, &mut rng::stream(seed, &[rng::LABEL_FOLDS]))
                            .map_err(|e| invalid("objective.folds", e.to_string()))?,
                    ),
                    _ => None,
                };
                Ok(ObjectiveAdapter::Subprocess(SubprocessObjective {
                    command: command.clone(),
                    seed,
                    fold_spec,
                }))
            }
            ObjectiveSpec::Trace { path } => {
                let full = base_dir.join(path);
                let replay = ReplayObjective::from_file(&full)
                    .map_err(|e| invalid("objective.path", format!("{}: {e}", full.display())))?;
                Ok(ObjectiveAdapter::Replay(replay))
            }
        }
    }

    /// Hash of the canonical JSON serialization, for output provenance.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn take_f64(keys: &mut BTreeMap<String, String>, key: &str) -> Result<Option<f64>, ConfigError> {
    match keys.remove(key) {
        Some(raw) => raw
            .parse::<f64>()
            .map(Some)
            .map_err(|_| invalid("criterion", format!("`{key}` must be a number, got `{raw}`"))),
        None => Ok(None),
    }
}

/// Parses `name:key=val,...`. Names: `regret_cv`, `regret_fixed`, `conv`,
/// `ei`, `pi`. Keys: `threshold`, `i`, `warmup`, `top`, `delta`,
/// `scale_down`, `var_scale`, `inclusive`.
pub fn parse_criterion(spec: &str) -> Result<CriterionConfig, ConfigError> {
    let (name, rest) = match spec.split_once(':') {
        Some((n, r)) => (n.trim(), r.trim()),
        None => (spec.trim(), ""),
    };
    let mut keys: BTreeMap<String, String> = BTreeMap::new();
    if !rest.is_empty() {
        for pair in rest.split(',') {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| invalid("criterion", format!("expected key=val, got `{pair}`")))?;
            keys.insert(k.trim().to_string(), v.trim().to_string());
        }
    }

    let threshold = take_f64(&mut keys, "threshold")?;
    let need_threshold = |kind: &str| {
        threshold
            .ok_or_else(|| invalid("criterion", format!("`{kind}` requires threshold=<value>")))
    };
    let kind = match name {
        "regret_cv" => CriterionKind::RegretCv { var_scale: take_f64(&mut keys, "var_scale")? },
        "regret_fixed" => CriterionKind::RegretFixed { threshold: need_threshold("regret_fixed")? },
        "conv" => {
            let raw = keys
                .remove("i")
                .ok_or_else(|| invalid("criterion", "`conv` requires i=<count>"))?;
            let i = raw
                .parse::<usize>()
                .map_err(|_| invalid("criterion", format!("`i` must be an integer, got `{raw}`")))?;
            CriterionKind::ConvI { i }
        }
        "ei" => CriterionKind::EiThreshold { threshold: need_threshold("ei")? },
        "pi" => CriterionKind::PiThreshold { threshold: need_threshold("pi")? },
        other => {
            return Err(invalid(
                "criterion",
                format!(
                    "unknown criterion `{other}` (expected regret_cv, regret_fixed, conv, ei or pi)"
                ),
            ))
        }
    };

    let mut config = CriterionConfig::new(kind);
    if let Some(w) = keys.remove("warmup") {
        config.warmup_iters = w
            .parse()
            .map_err(|_| invalid("criterion", format!("`warmup` must be an integer, got `{w}`")))?;
    } else {
        config.warmup_iters = DEFAULT_WARMUP_ITERS;
    }
    if let Some(top) = take_f64(&mut keys, "top")? {
        config.top_fraction = top;
    }
    if let Some(delta) = take_f64(&mut keys, "delta")? {
        config.beta_delta = delta;
    } else {
        config.beta_delta = BetaSchedule::DEFAULT_DELTA;
    }
    if let Some(scale) = take_f64(&mut keys, "scale_down")? {
        config.beta_scale_down = scale;
    }
    if let Some(inclusive) = keys.remove("inclusive") {
        config.inclusive = inclusive.parse().map_err(|_| {
            invalid("criterion", format!("`inclusive` must be true/false, got `{inclusive}`"))
        })?;
    }
    if let Some(stray) = keys.keys().next() {
        return Err(invalid("criterion", format!("unknown key `{stray}` for `{name}`")));
    }
    config.validate().map_err(|e| invalid("criterion", e.to_string()))?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_criterion_kind() {
        let cv = parse_criterion("regret_cv").unwrap();
        assert_eq!(cv.kind, CriterionKind::RegretCv { var_scale: None });
        assert_eq!(cv.warmup_iters, 20);
        assert_eq!(cv.top_fraction, 0.5);
        assert!(!cv.inclusive);

        let scaled = parse_criterion("regret_cv:var_scale=0.5,warmup=10").unwrap();
        assert_eq!(scaled.kind, CriterionKind::RegretCv { var_scale: Some(0.5) });
        assert_eq!(scaled.warmup_iters, 10);

        let fixed = parse_criterion("regret_fixed:threshold=0.01,top=1.0,inclusive=true").unwrap();
        assert_eq!(fixed.kind, CriterionKind::RegretFixed { threshold: 0.01 });
        assert_eq!(fixed.top_fraction, 1.0);
        assert!(fixed.inclusive);

        assert_eq!(
            parse_criterion("conv:i=30").unwrap().kind,
            CriterionKind::ConvI { i: 30 }
        );
        assert_eq!(
            parse_criterion("ei:threshold=1e-9,warmup=20").unwrap().kind,
            CriterionKind::EiThreshold { threshold: 1e-9 }
        );
        assert_eq!(
            parse_criterion("pi:threshold=1e-5").unwrap().kind,
            CriterionKind::PiThreshold { threshold: 1e-5 }
        );
    }

    #[test]
    fn rejects_unknown_names_and_keys() {
        let err = parse_criterion("bogus").unwrap_err();
        assert!(err.to_string().contains("criterion"), "{err}");
        assert!(err.to_string().contains("bogus"));
        assert!(parse_criterion("conv").is_err());
        assert!(parse_criterion("regret_fixed").is_err());
        assert!(parse_criterion("conv:i=3,oops=1").is_err());
        assert!(parse_criterion("regret_fixed:threshold=-1").is_err());
    }

    #[test]
    fn beta_keys_feed_the_schedule() {
        let cfg = parse_criterion("regret_fixed:threshold=0.1,delta=0.05,scale_down=2").unwrap();
        assert_eq!(cfg.beta_delta, 0.05);
        assert_eq!(cfg.beta_scale_down, 2.0);
    }

    fn minimal_config() -> ExperimentConfig {
        ExperimentConfig {
            space: None,
            objective: ObjectiveSpec::Synthetic {
                name: "sphere".into(),
                dims: Some(2),
                noise_std: 0.0,
                folds: None,
                eval_seconds: 1.0,
            },
            proposer: Proposer::RandomSearch,
            criteria: vec!["conv:i=5".into()],
            seeds: vec![1],
            max_iters: 3,
            mode: RunMode::RecordOnly,
            bound_search_budget: 64,
            fit_restarts: 2,
            diagnostics: false,
        }
    }

    #[test]
    fn validates_and_hashes_stably() {
        let config = minimal_config();
        config.validate().unwrap();
        assert_eq!(config.hash(), config.hash());
        assert_eq!(config.hash().len(), 64);

        let mut bad = config.clone();
        bad.seeds.clear();
        assert!(matches!(bad.validate(), Err(ConfigError::Invalid { field, .. }) if field == "seeds"));

        let mut unknown = config;
        unknown.objective = ObjectiveSpec::Synthetic {
            name: "mystery".into(),
            dims: None,
            noise_std: 0.0,
            folds: None,
            eval_seconds: 1.0,
        };
        let err = unknown.validate().unwrap_err();
        assert!(err.to_string().contains("objective.name"), "{err}");
    }

    #[test]
    fn synthetic_space_is_canonical_when_unset() {
        let config = minimal_config();
        let space = config.load_space(Path::new(".")).unwrap();
        assert_eq!(space.dim_count(), 2);
        assert_eq!(space.dims()[0].name, "x0");
    }

    #[test]
    fn config_json_round_trip() {
        let config = minimal_config();
        let json = serde_json::to_string_pretty(&config).unwrap();
        let parsed: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, config);
    }
}
