//! The optimization loop: propose, evaluate, update the incumbent and its CV
//! statistics, refit the surrogates, compute the regret bound, and check the
//! stop criterion — plus objective adapters and run recording.

mod objective;
mod record;

pub use objective::{
    Evaluation, ObjectiveAdapter, ObjectiveError, ReplayObjective, SubprocessObjective,
    SyntheticObjective, WireRequest, WireResponse,
};
pub use record::{
    read_trace, write_trace, FinalIncumbent, IterationRow, Observation, ObservationLog, RunRecord,
    RunSummary, TraceRow,
};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::acq::{self, AcqError, AcqKind, AcquisitionSpec};
use crate::cv::{self, CvError, CvStats};
use crate::gp::{self, GpError, GpPosterior};
use crate::rng;
use crate::space::{Candidate, SearchSpace, SpaceError};
use crate::stop::{
    self, BetaSchedule, CheckInputs, CriterionConfig, CriterionKind, CriterionState, StopError,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("bad input: {0}")]
    BadInput(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Stop(#[from] StopError),
    #[error(transparent)]
    Acq(#[from] AcqError),
    #[error(transparent)]
    Cv(#[from] CvError),
    #[error("objective failed at iteration {t}: {source}")]
    Objective {
        t: usize,
        source: ObjectiveError,
        partial: Box<RunRecord>,
    },
    #[error("replay trace exhausted at iteration {t}")]
    ReplayExhausted { t: usize, partial: Box<RunRecord> },
}

/// How the next candidate is chosen.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Proposer {
    /// GP surrogate over the full log with an acquisition maximizer.
    GpBo {
        acq: AcqKind,
        /// Sweep budget of the acquisition maximizer.
        #[serde(default = "default_acq_budget")]
        acq_budget: usize,
        /// Random evaluations before the first model-based proposal.
        #[serde(default = "default_init_points")]
        init_points: usize,
    },
    RandomSearch,
}

fn default_acq_budget() -> usize {
    acq::DEFAULT_SWEEP_BUDGET
}

fn default_init_points() -> usize {
    3
}

impl Proposer {
    pub fn gpbo(kind: AcqKind) -> Self {
        Proposer::GpBo {
            acq: kind,
            acq_budget: default_acq_budget(),
            init_points: default_init_points(),
        }
    }
}

/// Whether a firing criterion halts the loop or is only recorded while the
/// run continues to the full budget (the evaluation-protocol mode, which
/// makes both the early-stop and full-budget solutions available from a
/// single record).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    HaltAtStop,
    RecordOnly,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunSettings {
    pub max_iters: usize,
    pub seed: u64,
    pub mode: RunMode,
    /// Sweep budget of the lcb minimizer inside the regret bound.
    pub bound_search_budget: usize,
    /// Restarts for every GP hyperparameter fit.
    pub fit_restarts: usize,
    /// Compute the regret bound even when the criterion does not need it
    /// (for bound-quality diagnostics).
    pub always_compute_bound: bool,
}

impl RunSettings {
    pub fn new(max_iters: usize, seed: u64) -> Self {
        Self {
            max_iters,
            seed,
            mode: RunMode::HaltAtStop,
            bound_search_budget: acq::DEFAULT_SWEEP_BUDGET,
            fit_restarts: gp::DEFAULT_RESTARTS,
            always_compute_bound: false,
        }
    }
}

/// Best-so-far state. Updated on strict improvement only, so ties keep the
/// earlier candidate; the CV statistics are the ones computed when the
/// incumbent was found.
#[derive(Debug, Clone)]
pub struct Incumbent {
    pub candidate: Option<Candidate>,
    pub value: f64,
    pub iteration_found: usize,
    pub cv_stats: Option<CvStats>,
}

struct LoopState {
    log: ObservationLog,
    incumbent: Option<Incumbent>,
    best_history: Vec<f64>,
    cum_seconds: f64,
    rows: Vec<IterationRow>,
    stop_iteration: Option<usize>,
}

impl LoopState {
    fn partial_record(&self, space: &SearchSpace, reason: String) -> RunRecord {
        RunRecord {
            rows: self.rows.clone(),
            summary: RunSummary {
                stop_iteration: self.stop_iteration,
                final_incumbent: self.incumbent.as_ref().map(|inc| FinalIncumbent {
                    candidate: inc
                        .candidate
                        .as_ref()
                        .map(|c| external_map(space, c))
                        .unwrap_or_default(),
                    value: inc.value,
                    iteration_found: inc.iteration_found,
                }),
                reason,
            },
        }
    }
}

fn external_map(space: &SearchSpace, c: &Candidate) -> BTreeMap<String, f64> {
    let external = space.from_internal(c).expect("candidate matches space");
    space
        .dims()
        .iter()
        .zip(external)
        .map(|(d, v)| (d.name.clone(), v))
        .collect()
}

/// Fold sizes used for the variance correction of `fold_values`.
fn correction_sizes(objective: &ObjectiveAdapter, k: usize) -> (usize, usize) {
    match objective {
        ObjectiveAdapter::Subprocess(sub) => sub
            .fold_spec
            .as_ref()
            .map(|spec| spec.correction_sizes())
            .unwrap_or((1, k.saturating_sub(1).max(1))),
        // Simulated folds and trace fold metrics: equal-size folds, so the
        // size ratio reduces to 1 / (k - 1).
        _ => (1, k.saturating_sub(1).max(1)),
    }
}

/// Runs Algorithm-style BO (or random search, or trace replay) under one stop
/// criterion. Fully deterministic given the settings.
pub fn run(
    space: &SearchSpace,
    objective: &mut ObjectiveAdapter,
    proposer: &Proposer,
    criterion: &CriterionConfig,
    settings: &RunSettings,
) -> Result<RunRecord, EngineError> {
    if settings.max_iters < 1 {
        return Err(EngineError::BadInput("max_iters must be at least 1".into()));
    }
    if let Proposer::GpBo { init_points, .. } = proposer {
        if *init_points < 1 {
            return Err(EngineError::BadInput(
                "init_points must be at least 1".into(),
            ));
        }
    }
    let mut criterion_state = CriterionState::new(criterion.clone())?;
    let schedule = BetaSchedule::new(
        criterion.beta_delta,
        space.dim_count(),
        criterion.beta_scale_down,
    )?;

    let needs_bound = settings.always_compute_bound
        || matches!(
            criterion.kind,
            CriterionKind::RegretCv { .. } | CriterionKind::RegretFixed { .. }
        );
    let acq_criterion_kind = match criterion.kind {
        CriterionKind::EiThreshold { .. } => Some(AcqKind::ExpectedImprovement),
        CriterionKind::PiThreshold { .. } => Some(AcqKind::ProbabilityOfImprovement),
        _ => None,
    };
    let needs_full_gp = matches!(proposer, Proposer::GpBo { .. }) || acq_criterion_kind.is_some();

    let salt = space.seed_salt();
    let seed = settings.seed;
    let mut init_stream = space.candidate_stream(seed);
    let mut proposal_fit_stream = rng::stream(seed, &[salt, rng::LABEL_PROPOSAL_FIT]);
    let mut bound_fit_stream = rng::stream(seed, &[salt, rng::LABEL_BOUND_FIT]);
    let mut acq_stream = rng::stream(seed, &[salt, rng::LABEL_ACQ_SEARCH]);
    let mut bound_stream = rng::stream(seed, &[salt, rng::LABEL_BOUND_SEARCH]);

    let mut state = LoopState {
        log: ObservationLog::new(),
        incumbent: None,
        best_history: Vec::new(),
        cum_seconds: 0.0,
        rows: Vec::new(),
        stop_iteration: None,
    };
    // Model over the full log from the end of the previous iteration; drives
    // proposals and the EI/PI stop statistics.
    let mut full_gp: Option<GpPosterior> = None;

    for t in 1..=settings.max_iters {
        // -- propose ---------------------------------------------------
        let mut candidate_known = true;
        let candidate = if let ObjectiveAdapter::Replay(replay) = &*objective {
            match replay.peek_candidate(space) {
                Ok(Some(c)) => c,
                Ok(None) => {
                    // Trace without candidate information: the stop logic
                    // only sees values, the GP machinery stays off.
                    candidate_known = false;
                    Candidate::clamped(vec![0.5; space.dim_count()])
                }
                Err(ObjectiveError::ReplayExhausted(_)) => {
                    return Err(EngineError::ReplayExhausted {
                        t,
                        partial: Box::new(state.partial_record(space, "replay_exhausted".into())),
                    });
                }
                Err(source) => {
                    return Err(EngineError::Objective {
                        t,
                        source,
                        partial: Box::new(state.partial_record(space, "objective_failure".into())),
                    });
                }
            }
        } else {
            match (proposer, &full_gp) {
                (
                    Proposer::GpBo {
                        acq: kind,
                        acq_budget,
                        init_points,
                    },
                    Some(gp),
                ) if t > *init_points => {
                    let incumbent_value = state
                        .incumbent
                        .as_ref()
                        .map(|i| i.value)
                        .expect("log is non-empty");
                    let spec = AcquisitionSpec::new(*kind, incumbent_value)?;
                    let (c, _) = acq::propose(gp, space, &spec, *acq_budget, &mut acq_stream)?;
                    c
                }
                _ => space
                    .sample_candidates(1, &mut init_stream)?
                    .pop()
                    .expect("one candidate requested"),
            }
        };

        // -- evaluate --------------------------------------------------
        let evaluation = match objective.evaluate(space, &candidate) {
            Ok(e) => e,
            Err(ObjectiveError::ReplayExhausted(_)) => {
                return Err(EngineError::ReplayExhausted {
                    t,
                    partial: Box::new(state.partial_record(space, "replay_exhausted".into())),
                });
            }
            Err(source) => {
                return Err(EngineError::Objective {
                    t,
                    source,
                    partial: Box::new(
                        state.partial_record(space, format!("objective_failure at t={t}")),
                    ),
                });
            }
        };
        let logged_candidate = candidate_known.then(|| candidate.clone());
        state.log.push(Observation {
            iteration: t,
            candidate: logged_candidate.clone(),
            y: evaluation.y,
            fold_values: evaluation.fold_values.clone(),
            eval_seconds: evaluation.eval_seconds,
        })?;
        state.cum_seconds += evaluation.eval_seconds;

        // -- incumbent and its CV statistics ----------------------------
        let improved = state
            .incumbent
            .as_ref()
            .is_none_or(|inc| evaluation.y < inc.value);
        if improved {
            let cv_stats = match &evaluation.fold_values {
                Some(folds) if folds.len() >= 2 => {
                    let k = folds.len();
                    let (fold_size, rest_size) = correction_sizes(objective, k);
                    Some(cv::cv_stats(folds, k, fold_size, rest_size)?)
                }
                _ => None,
            };
            state.incumbent = Some(Incumbent {
                candidate: logged_candidate.clone(),
                value: evaluation.y,
                iteration_found: t,
                cv_stats,
            });
        }
        let incumbent = state.incumbent.as_ref().expect("set on first iteration");
        state.best_history.push(incumbent.value);

        // -- refit models ------------------------------------------------
        let log_candidates = state.log.candidates();
        if needs_full_gp && state.log.len() >= 2 {
            if let Some(cands) = &log_candidates {
                full_gp = Some(gp::fit(
                    space,
                    cands,
                    &state.log.values(),
                    settings.fit_restarts,
                    &mut proposal_fit_stream,
                )?);
            }
        }

        let mut r_bar = None;
        let mut beta_t = None;
        if needs_bound && state.log.len() >= 2 {
            if let Some(cands) = &log_candidates {
                let filtered = stop::filter_top_q(&state.log, criterion.top_fraction)?;
                // The filtered set must itself support a fit.
                if filtered.len() >= 2 {
                    let bound_gp = if filtered.len() == state.log.len() && full_gp.is_some() {
                        full_gp.clone().expect("checked above")
                    } else {
                        let filtered_cands = filtered
                            .candidates()
                            .expect("filtered subset of a full log");
                        gp::fit(
                            space,
                            &filtered_cands,
                            &filtered.values(),
                            settings.fit_restarts,
                            &mut bound_fit_stream,
                        )?
                    };
                    let bound = stop::regret_upper_bound(
                        &bound_gp,
                        space,
                        cands,
                        t,
                        &schedule,
                        settings.bound_search_budget,
                        &mut bound_stream,
                    )?;
                    r_bar = Some(bound.r_bar);
                    beta_t = Some(bound.beta_t);
                }
            }
        }

        let max_acq = match (acq_criterion_kind, &full_gp) {
            (Some(kind), Some(gp)) => {
                let spec = AcquisitionSpec::new(kind, incumbent.value)?;
                let budget = match proposer {
                    Proposer::GpBo { acq_budget, .. } => *acq_budget,
                    Proposer::RandomSearch => settings.bound_search_budget,
                };
                Some(acq::max_acq_over_space(
                    gp,
                    space,
                    &spec,
                    budget,
                    &mut acq_stream,
                )?)
            }
            // No model yet: the maximal improvement is unbounded, which can
            // never be below a threshold.
            (Some(_), None) => Some(f64::INFINITY),
            _ => None,
        };

        // -- stop check --------------------------------------------------
        let cv_var_at_incumbent = incumbent
            .cv_stats
            .as_ref()
            .map(|stats| match &criterion.kind {
                CriterionKind::RegretCv {
                    var_scale: Some(scale),
                } => scale * stats.sample_variance,
                _ => stats.corrected_variance,
            });
        let decision = criterion_state.check(&CheckInputs {
            t,
            r_bar,
            cv_var_at_incumbent,
            best_history: &state.best_history,
            max_acq,
        })?;

        let first_trigger = decision.should_stop && state.stop_iteration.is_none();
        if first_trigger {
            state.stop_iteration = Some(t);
        }
        state.rows.push(IterationRow {
            t,
            candidate: logged_candidate
                .as_ref()
                .map(|c| external_map(space, c))
                .unwrap_or_default(),
            y: evaluation.y,
            incumbent_value: incumbent.value,
            r_bar,
            beta_t,
            stop_statistic: decision.statistic,
            stop_threshold: decision.threshold,
            stopped: first_trigger,
            cum_seconds: state.cum_seconds,
            true_regret: incumbent
                .candidate
                .as_ref()
                .and_then(|c| objective.true_regret(c).ok()),
            test_metric: evaluation.test_metric,
        });

        if first_trigger && settings.mode == RunMode::HaltAtStop {
            let reason = format!("stopped:{}", criterion.label());
            return Ok(state.partial_record(space, reason));
        }
    }

    let reason = match state.stop_iteration {
        Some(t) => format!(
            "stopped:{} (recorded at t={t}, run continued)",
            criterion.label()
        ),
        None => "budget_exhausted".to_string(),
    };
    Ok(state.partial_record(space, reason))
}

/// Checks the generalization-gap decomposition on a finite domain: with
/// `gamma*_t` the argmin of `fhat` over the first `t_index` entries,
///
/// ```text
/// f(gamma*_t) - min f  <=  2 max|fhat - f| + (fhat(gamma*_t) - min fhat)
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prop1Gap {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn proposition1_gap_check(
    f_values: &[f64],
    fhat_values: &[f64],
    t_index: usize,
) -> Result<Prop1Gap, EngineError> {
    if f_values.len() != fhat_values.len() {
        return Err(EngineError::BadInput(format!(
            "length mismatch: {} vs {}",
            f_values.len(),
            fhat_values.len()
        )));
    }
    if f_values.is_empty() || t_index < 1 || t_index > f_values.len() {
        return Err(EngineError::BadInput(format!(
            "t_index {t_index} out of range for {} entries",
            f_values.len()
        )));
    }
    let mut star_t = 0;
    for i in 1..t_index {
        if fhat_values[i] < fhat_values[star_t] {
            star_t = i;
        }
    }
    let min_f = f_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let min_fhat = fhat_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let eps_st = f_values
        .iter()
        .zip(fhat_values)
        .map(|(f, fh)| (f - fh).abs())
        .fold(0.0f64, f64::max);
    let lhs = f_values[star_t] - min_f;
    let rhs = 2.0 * eps_st + (fhat_values[star_t] - min_fhat);
    Ok(Prop1Gap {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12,
    })
}
