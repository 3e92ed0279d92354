//! Stopping machinery: the confidence-width schedule `beta_t`, the
//! high-probability upper bound on simple regret, top-fraction observation
//! filtering for the bound surrogate, and the stop criteria (variance-based,
//! fixed-threshold, convergence, EI/PI thresholds).
//!
//! The bound at iteration `t` is
//!
//! ```text
//! r_bar_t = min over evaluated of ucb_t  -  min over the domain of lcb_t
//! ```
//!
//! with `lcb/ucb = mu -/+ sqrt(beta_t) sigma`. The domain minimum is
//! approximated by a uniform sweep plus pattern polish, with the evaluated
//! points always included in the pool — which is what guarantees
//! `r_bar_t >= 0`.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Observation, ObservationLog};
use crate::gp::{GpError, GpPosterior};
use crate::pattern::pattern_search_max;
use crate::space::{Candidate, SearchSpace, SpaceError};

#[derive(Debug, Error)]
pub enum StopError {
    #[error("criterion `{criterion}` needs input `{field}` at iteration {t}")]
    MissingInput {
        criterion: &'static str,
        field: &'static str,
        t: usize,
    },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("observation log is empty")]
    EmptyLog,
    #[error("top fraction must be in (0, 1], got {0}")]
    BadFraction(f64),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Schedule `beta_t = 2 log(|G| t^2 pi^2 / (6 delta)) / scale_down`, the
/// scaled-down confidence width from GP-bandit analysis with `|G|` fixed to
/// the number of search dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSchedule {
    /// Confidence level parameter in (0, 1).
    pub delta: f64,
    /// Domain-cardinality stand-in; the number of search dimensions.
    pub gamma_cardinality: usize,
    /// Practical scale-down of the theoretical width.
    pub scale_down: f64,
}

impl BetaSchedule {
    pub const DEFAULT_DELTA: f64 = 0.1;
    pub const DEFAULT_SCALE_DOWN: f64 = 5.0;

    pub fn new(delta: f64, gamma_cardinality: usize, scale_down: f64) -> Result<Self, StopError> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(StopError::BadConfig(format!(
                "delta must be in (0,1), got {delta}"
            )));
        }
        if gamma_cardinality == 0 {
            return Err(StopError::BadConfig(
                "gamma_cardinality must be positive".into(),
            ));
        }
        if !(scale_down > 0.0) {
            return Err(StopError::BadConfig(format!(
                "scale_down must be > 0, got {scale_down}"
            )));
        }
        Ok(Self {
            delta,
            gamma_cardinality,
            scale_down,
        })
    }

    pub fn for_space(space: &SearchSpace) -> Self {
        Self {
            delta: Self::DEFAULT_DELTA,
            gamma_cardinality: space.dim_count(),
            scale_down: Self::DEFAULT_SCALE_DOWN,
        }
    }

    pub fn beta(&self, t: usize) -> f64 {
        assert!(t >= 1, "beta_t is defined for t >= 1");
        let g = self.gamma_cardinality as f64;
        let t = t as f64;
        2.0 * (g * t * t * std::f64::consts::PI.powi(2) / (6.0 * self.delta)).ln() / self.scale_down
    }
}

/// Keeps the `ceil(q * t)` observations with the smallest objective values
/// (ties broken by earliest iteration), preserving log order.
pub fn filter_top_q(log: &ObservationLog, q: f64) -> Result<ObservationLog, StopError> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(StopError::BadFraction(q));
    }
    if log.is_empty() {
        return Err(StopError::EmptyLog);
    }
    let t = log.len();
    let keep = ((q * t as f64).ceil() as usize).clamp(1, t);
    let mut order: Vec<usize> = (0..t).collect();
    order.sort_by(|&a, &b| {
        let (ya, yb) = (log.records()[a].y, log.records()[b].y);
        ya.partial_cmp(&yb).unwrap().then(a.cmp(&b))
    });
    let mut selected: Vec<bool> = vec![false; t];
    for &i in order.iter().take(keep) {
        selected[i] = true;
    }
    let records: Vec<Observation> = log
        .records()
        .iter()
        .enumerate()
        .filter(|(i, _)| selected[*i])
        .map(|(_, r)| r.clone())
        .collect();
    Ok(ObservationLog::from_records(records).expect("filtered records stay valid"))
}

/// The computed bound `r_bar_t` with its ingredients and both minimizers.
#[derive(Debug, Clone)]
pub struct RegretBound {
    pub beta_t: f64,
    /// `min over evaluated of ucb_t`.
    pub min_ucb: f64,
    /// `min over the candidate pool of lcb_t`.
    pub min_lcb: f64,
    /// `min_ucb - min_lcb`; nonnegative because the pool contains the
    /// evaluated points.
    pub r_bar: f64,
    pub argmin_ucb: Candidate,
    pub argmin_lcb: Candidate,
}

fn confidence_bounds(
    gp: &GpPosterior,
    points: &[Candidate],
    sqrt_beta: f64,
) -> Result<(Vec<f64>, Vec<f64>), StopError> {
    let (means, vars) = gp.predict(points)?;
    let mut lcb = Vec::with_capacity(points.len());
    let mut ucb = Vec::with_capacity(points.len());
    for (m, v) in means.iter().zip(&vars) {
        let width = sqrt_beta * v.sqrt();
        lcb.push(m - width);
        ucb.push(m + width);
    }
    Ok((lcb, ucb))
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Bound over an explicit candidate pool: the lcb minimum is taken over
/// `evaluated` plus `pool`, exactly. Used for finite domains and as the core
/// of the sampled search.
pub fn regret_upper_bound_on_pool(
    gp: &GpPosterior,
    evaluated: &[Candidate],
    t: usize,
    schedule: &BetaSchedule,
    pool: &[Candidate],
) -> Result<RegretBound, StopError> {
    if evaluated.is_empty() {
        return Err(StopError::EmptyLog);
    }
    let beta_t = schedule.beta(t);
    let sqrt_beta = beta_t.sqrt();

    let (eval_lcb, eval_ucb) = confidence_bounds(gp, evaluated, sqrt_beta)?;
    let ucb_idx = argmin(&eval_ucb);
    let min_ucb = eval_ucb[ucb_idx];

    let (pool_lcb, _) = confidence_bounds(gp, pool, sqrt_beta)?;
    let mut min_lcb = eval_lcb[argmin(&eval_lcb)];
    let mut argmin_lcb = evaluated[argmin(&eval_lcb)].clone();
    if !pool.is_empty() {
        let pi = argmin(&pool_lcb);
        if pool_lcb[pi] < min_lcb {
            min_lcb = pool_lcb[pi];
            argmin_lcb = pool[pi].clone();
        }
    }

    Ok(RegretBound {
        beta_t,
        min_ucb,
        min_lcb,
        r_bar: min_ucb - min_lcb,
        argmin_ucb: evaluated[ucb_idx].clone(),
        argmin_lcb,
    })
}

/// Bound with the domain minimum approximated by `search_budget` uniform
/// candidates plus pattern polish from the five lowest-lcb starts; the
/// evaluated points are always part of the pool.
pub fn regret_upper_bound(
    gp: &GpPosterior,
    space: &SearchSpace,
    evaluated: &[Candidate],
    t: usize,
    schedule: &BetaSchedule,
    search_budget: usize,
    stream: &mut ChaCha8Rng,
) -> Result<RegretBound, StopError> {
    if evaluated.is_empty() {
        return Err(StopError::EmptyLog);
    }
    let mut pool = if search_budget > 0 {
        space.sample_candidates(search_budget, stream)?
    } else {
        Vec::new()
    };

    // Polish the most promising lcb minimizers and add the refined points.
    let beta_t = schedule.beta(t);
    let sqrt_beta = beta_t.sqrt();
    let mut seeds: Vec<Candidate> = evaluated.to_vec();
    seeds.extend(pool.iter().cloned());
    let (seed_lcb, _) = confidence_bounds(gp, &seeds, sqrt_beta)?;
    let mut order: Vec<usize> = (0..seeds.len()).collect();
    order.sort_by(|&a, &b| {
        seed_lcb[a]
            .partial_cmp(&seed_lcb[b])
            .unwrap()
            .then(a.cmp(&b))
    });
    for &start in order.iter().take(crate::acq::POLISH_STARTS) {
        let mut err = None;
        let (coords, _) = pattern_search_max(
            seeds[start].coords(),
            -seed_lcb[start],
            crate::acq::POLISH_STEPS,
            |batch| {
                let cands: Vec<Candidate> = batch
                    .iter()
                    .map(|c| Candidate::clamped(c.clone()))
                    .collect();
                match confidence_bounds(gp, &cands, sqrt_beta) {
                    Ok((lcb, _)) => lcb.into_iter().map(|v| -v).collect(),
                    Err(e) => {
                        err = Some(e);
                        vec![f64::NEG_INFINITY; batch.len()]
                    }
                }
            },
        );
        if let Some(e) = err {
            return Err(e);
        }
        pool.push(Candidate::clamped(coords));
    }

    regret_upper_bound_on_pool(gp, evaluated, t, schedule, &pool)
}

/// Which rule decides termination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CriterionKind {
    /// Stop once `r_bar < sqrt(Var f_hat)` at the incumbent, the variance
    /// estimated from its cross-validation folds. `var_scale` replaces the
    /// Nadeau-Bengio correction with a fixed multiplier of `s2_cv` when set.
    RegretCv {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        var_scale: Option<f64>,
    },
    /// Stop once `r_bar < threshold`.
    RegretFixed { threshold: f64 },
    /// Stop after `i` consecutive iterations without strict incumbent
    /// improvement.
    ConvI { i: usize },
    /// Stop once the maximal expected improvement drops below `threshold`.
    EiThreshold { threshold: f64 },
    /// Stop once the maximal probability of improvement drops below
    /// `threshold`.
    PiThreshold { threshold: f64 },
}

impl CriterionKind {
    pub fn name(&self) -> &'static str {
        match self {
            CriterionKind::RegretCv { .. } => "regret_cv",
            CriterionKind::RegretFixed { .. } => "regret_fixed",
            CriterionKind::ConvI { .. } => "conv",
            CriterionKind::EiThreshold { .. } => "ei_threshold",
            CriterionKind::PiThreshold { .. } => "pi_threshold",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionConfig {
    pub kind: CriterionKind,
    /// Threshold-style rules are inert for the first `warmup_iters` iterations.
    pub warmup_iters: usize,
    /// Fraction of best observations the bound surrogate is fit on.
    pub top_fraction: f64,
    /// Use `<=` instead of the default strict `<` for threshold comparisons.
    pub inclusive: bool,
    /// `delta` of the beta schedule.
    pub beta_delta: f64,
    /// `scale_down` of the beta schedule.
    pub beta_scale_down: f64,
}

pub const DEFAULT_WARMUP_ITERS: usize = 20;
pub const DEFAULT_TOP_FRACTION: f64 = 0.5;

impl CriterionConfig {
    pub fn new(kind: CriterionKind) -> Self {
        Self {
            kind,
            warmup_iters: DEFAULT_WARMUP_ITERS,
            top_fraction: DEFAULT_TOP_FRACTION,
            inclusive: false,
            beta_delta: BetaSchedule::DEFAULT_DELTA,
            beta_scale_down: BetaSchedule::DEFAULT_SCALE_DOWN,
        }
    }

    pub fn validate(&self) -> Result<(), StopError> {
        match &self.kind {
            CriterionKind::RegretCv { var_scale } => {
                if let Some(s) = var_scale {
                    if !(*s > 0.0) {
                        return Err(StopError::BadConfig("var_scale must be > 0".into()));
                    }
                }
            }
            CriterionKind::RegretFixed { threshold }
            | CriterionKind::EiThreshold { threshold }
            | CriterionKind::PiThreshold { threshold } => {
                if !(*threshold > 0.0) {
                    return Err(StopError::BadConfig(format!(
                        "threshold must be > 0, got {threshold}"
                    )));
                }
            }
            CriterionKind::ConvI { i } => {
                if *i < 1 {
                    return Err(StopError::BadConfig("conv parameter i must be >= 1".into()));
                }
            }
        }
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return Err(StopError::BadFraction(self.top_fraction));
        }
        if !(self.beta_delta > 0.0 && self.beta_delta < 1.0) {
            return Err(StopError::BadConfig("delta must be in (0,1)".into()));
        }
        if !(self.beta_scale_down > 0.0) {
            return Err(StopError::BadConfig("scale_down must be > 0".into()));
        }
        Ok(())
    }

    /// Stable label for file names and report keys, e.g. `regret_fixed_0.01`.
    pub fn label(&self) -> String {
        match &self.kind {
            CriterionKind::RegretCv { var_scale: None } => "regret_cv".to_string(),
            CriterionKind::RegretCv { var_scale: Some(s) } => format!("regret_cv_{s}"),
            CriterionKind::RegretFixed { threshold } => format!("regret_fixed_{threshold}"),
            CriterionKind::ConvI { i } => format!("conv_{i}"),
            CriterionKind::EiThreshold { threshold } => format!("ei_{threshold:e}"),
            CriterionKind::PiThreshold { threshold } => format!("pi_{threshold:e}"),
        }
    }
}

/// Verdict of one criterion check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopDecision {
    pub should_stop: bool,
    pub criterion: String,
    /// The tracked value, when it was available at this iteration.
    pub statistic: Option<f64>,
    /// The value it is compared against.
    pub threshold: Option<f64>,
    pub iteration: usize,
}

/// Inputs the engine hands to a criterion at iteration `t`.
#[derive(Debug, Clone, Copy)]
pub struct CheckInputs<'a> {
    pub t: usize,
    pub r_bar: Option<f64>,
    /// Corrected CV variance attached to the current incumbent.
    pub cv_var_at_incumbent: Option<f64>,
    /// Incumbent values for iterations `1..=t`.
    pub best_history: &'a [f64],
    /// Maximal acquisition value over the space under the current model.
    pub max_acq: Option<f64>,
}

/// Per-run mutable state of one criterion.
#[derive(Debug, Clone)]
pub struct CriterionState {
    config: CriterionConfig,
    non_improving: usize,
    last_best: Option<f64>,
}

impl CriterionState {
    pub fn new(config: CriterionConfig) -> Result<Self, StopError> {
        config.validate()?;
        Ok(Self {
            config,
            non_improving: 0,
            last_best: None,
        })
    }

    pub fn config(&self) -> &CriterionConfig {
        &self.config
    }

    fn below(&self, statistic: f64, threshold: f64) -> bool {
        if self.config.inclusive {
            statistic <= threshold
        } else {
            statistic < threshold
        }
    }

    /// Evaluates the criterion at iteration `inputs.t`. Must be called once
    /// per iteration in order: the convergence counter advances on each call.
    pub fn check(&mut self, inputs: &CheckInputs) -> Result<StopDecision, StopError> {
        let t = inputs.t;
        let name = self.config.kind.name();
        let warm = t > self.config.warmup_iters;

        let mut decision = StopDecision {
            should_stop: false,
            criterion: self.config.label(),
            statistic: None,
            threshold: None,
            iteration: t,
        };

        match &self.config.kind {
            CriterionKind::ConvI { i } => {
                let current = *inputs.best_history.last().ok_or(StopError::MissingInput {
                    criterion: name,
                    field: "best_history",
                    t,
                })?;
                match self.last_best {
                    Some(prev) if !(current < prev) => self.non_improving += 1,
                    _ => self.non_improving = 0,
                }
                self.last_best = Some(current);
                decision.statistic = Some(self.non_improving as f64);
                decision.threshold = Some(*i as f64);
                decision.should_stop = self.non_improving >= *i;
            }
            CriterionKind::RegretFixed { threshold } => {
                decision.threshold = Some(*threshold);
                decision.statistic = inputs.r_bar;
                if warm {
                    let r_bar = inputs.r_bar.ok_or(StopError::MissingInput {
                        criterion: name,
                        field: "r_bar",
                        t,
                    })?;
                    decision.should_stop = self.below(r_bar, *threshold);
                }
            }
            CriterionKind::RegretCv { .. } => {
                decision.statistic = inputs.r_bar;
                decision.threshold = inputs.cv_var_at_incumbent.map(f64::sqrt);
                if warm {
                    let r_bar = inputs.r_bar.ok_or(StopError::MissingInput {
                        criterion: name,
                        field: "r_bar",
                        t,
                    })?;
                    let var = inputs.cv_var_at_incumbent.ok_or(StopError::MissingInput {
                        criterion: name,
                        field: "cv_var_at_incumbent",
                        t,
                    })?;
                    decision.should_stop = self.below(r_bar, var.sqrt());
                }
            }
            CriterionKind::EiThreshold { threshold } | CriterionKind::PiThreshold { threshold } => {
                decision.threshold = Some(*threshold);
                decision.statistic = inputs.max_acq;
                if warm {
                    let max_acq = inputs.max_acq.ok_or(StopError::MissingInput {
                        criterion: name,
                        field: "max_acq",
                        t,
                    })?;
                    decision.should_stop = self.below(max_acq, *threshold);
                }
            }
        }
        Ok(decision)
    }
}
