//! Objective adapters: synthetic closed-form functions with registered
//! optima, an external-command protocol, and replay of recorded traces.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Command, Stdio};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cv::FoldSpec;
use crate::gp::{kernel_eval, KernelParams};
use crate::pattern::pattern_search_max;
use crate::rng;
use crate::space::{Candidate, DimensionSpec, SearchSpace, SpaceError};

use super::record::TraceRow;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("unknown synthetic objective `{0}`")]
    UnknownSynthetic(String),
    #[error("objective command failed (exit {code:?}): {stderr}")]
    Subprocess { code: Option<i32>, stderr: String },
    #[error("objective command produced unreadable output: {0}")]
    BadResponse(String),
    #[error("replay trace is exhausted at iteration {0}")]
    ReplayExhausted(usize),
    #[error("replayed candidate disagrees with the trace at iteration {t}: {detail}")]
    ReplayMismatch { t: usize, detail: String },
    #[error("true regret is only available for synthetic objectives")]
    NotAvailable,
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// What one evaluation produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub y: f64,
    pub fold_values: Option<Vec<f64>>,
    pub eval_seconds: f64,
    /// Held-out test metric, when the objective reports one (traces).
    pub test_metric: Option<f64>,
}

// ---------------------------------------------------------------------------
// Synthetic objectives
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum SyntheticFn {
    /// `sum x_i^2` on `[-1, 1]^d`; optimum 0 at the origin.
    Sphere,
    /// Branin on `[-5, 10] x [0, 15]`, shifted to minimum 0 and scaled by 1/50.
    BraninScaled,
    /// Noiseless kernel interpolant through GP-prior draws at fixed anchors.
    Interpolant {
        anchors: Vec<Candidate>,
        weights: DVector<f64>,
        params: KernelParams,
    },
}

/// A closed-form objective with a registered global minimizer, optional
/// Gaussian observation noise, and optional simulated k-fold evaluations.
#[derive(Debug, Clone)]
pub struct SyntheticObjective {
    name: String,
    space: SearchSpace,
    f: SyntheticFn,
    gamma_star: Candidate,
    f_star: f64,
    noise_std: f64,
    folds: Option<usize>,
    eval_seconds: f64,
    noise_stream: ChaCha8Rng,
}

fn branin(x1: f64, x2: f64) -> f64 {
    use std::f64::consts::PI;
    let a = 1.0;
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let r = 6.0;
    let s = 10.0;
    let t = 1.0 / (8.0 * PI);
    a * (x2 - b * x1 * x1 + c * x1 - r).powi(2) + s * (1.0 - t) * x1.cos() + s
}

/// Minimum of the Branin function: `10 / (8 pi)` at `(pi, 2.275)`.
const BRANIN_MIN: f64 = 1.25 / std::f64::consts::PI;
const BRANIN_SCALE: f64 = 50.0;

impl SyntheticObjective {
    /// Builds a named synthetic objective. Known names: `sphere` (any `dims`),
    /// `branin_scaled`, `gp_surface_a`, `gp_surface_b`, `gp_surface_c`.
    pub fn by_name(
        name: &str,
        dims: Option<usize>,
        noise_std: f64,
        folds: Option<usize>,
        eval_seconds: f64,
        seed: u64,
    ) -> Result<Self, ObjectiveError> {
        let noise_stream = rng::stream(seed, &[rng::LABEL_NOISE]);
        let (space, f, gamma_star) = match name {
            "sphere" => {
                let d = dims.unwrap_or(2);
                let dims_spec: Vec<DimensionSpec> = (0..d)
                    .map(|i| DimensionSpec::linear(&format!("x{i}"), -1.0, 1.0))
                    .collect();
                let space = SearchSpace::new(dims_spec, 0)?;
                let star = space.to_internal(&vec![0.0; d])?;
                (space, SyntheticFn::Sphere, star)
            }
            "branin_scaled" => {
                let space = SearchSpace::new(
                    vec![
                        DimensionSpec::linear("x1", -5.0, 10.0),
                        DimensionSpec::linear("x2", 0.0, 15.0),
                    ],
                    0,
                )?;
                let star = space.to_internal(&[std::f64::consts::PI, 2.275])?;
                (space, SyntheticFn::BraninScaled, star)
            }
            "gp_surface_a" => Self::gp_surface(101, 0.12)?,
            "gp_surface_b" => Self::gp_surface(137, 0.2)?,
            "gp_surface_c" => Self::gp_surface(173, 0.08)?,
            other => return Err(ObjectiveError::UnknownSynthetic(other.to_string())),
        };
        let mut objective = Self {
            name: name.to_string(),
            space,
            f,
            gamma_star,
            f_star: 0.0,
            noise_std,
            folds,
            eval_seconds,
            noise_stream,
        };
        objective.f_star = objective.true_value(&objective.gamma_star.clone());
        Ok(objective)
    }

    /// A 1-D surface drawn from a Matérn 5/2 prior at fixed anchors, extended
    /// to the whole interval by noiseless kernel interpolation. The optimum is
    /// located by a dense grid scan refined with pattern search.
    fn gp_surface(
        construction_seed: u64,
        lengthscale: f64,
    ) -> Result<(SearchSpace, SyntheticFn, Candidate), ObjectiveError> {
        let space = SearchSpace::new(vec![DimensionSpec::linear("x", 0.0, 1.0)], 0)?;
        let params = KernelParams {
            signal_variance: 1.0,
            lengthscales: vec![lengthscale],
            noise_variance: 0.0,
            mean_const: 0.0,
        };
        let mut stream = rng::stream(construction_seed, &[0xa11c]);
        let m = 48;
        let anchors: Vec<Candidate> = (0..m)
            .map(|i| {
                // jittered grid keeps anchors well separated
                let base = i as f64 / (m - 1) as f64;
                Candidate::clamped(vec![base + 0.004 * (stream.gen::<f64>() - 0.5)])
            })
            .collect();
        let mut k = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                k[(i, j)] = kernel_eval(&params, &anchors[i], &anchors[j]).expect("same dims");
            }
            k[(i, i)] += 1e-10;
        }
        let chol = nalgebra::Cholesky::new(k.clone()).expect("anchor Gram is positive definite");
        let z = DVector::from_iterator(
            m,
            (0..m).map(|_| {
                // Box-Muller from the construction stream
                let u1: f64 = stream.gen::<f64>().max(1e-12);
                let u2: f64 = stream.gen();
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            }),
        );
        let sample = chol.l() * z;
        let weights = chol.solve(&sample);
        let f = SyntheticFn::Interpolant {
            anchors,
            weights,
            params,
        };

        // Register the global minimizer: dense scan plus local refinement.
        let value_at = |x: f64| -> f64 {
            let c = Candidate::clamped(vec![x]);
            interpolant_value(&f, &c)
        };
        let grid_n = 20_001;
        let mut best_x = 0.0;
        let mut best_v = f64::INFINITY;
        for i in 0..grid_n {
            let x = i as f64 / (grid_n - 1) as f64;
            let v = value_at(x);
            if v < best_v {
                best_v = v;
                best_x = x;
            }
        }
        let (coords, _) = pattern_search_max(&[best_x], -best_v, 200, |batch| {
            batch.iter().map(|p| -value_at(p[0])).collect()
        });
        Ok((space, f, Candidate::clamped(coords)))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn folds(&self) -> Option<usize> {
        self.folds
    }

    /// Registered global minimizer and its value.
    pub fn optimum(&self) -> (&Candidate, f64) {
        (&self.gamma_star, self.f_star)
    }

    /// Noiseless objective value.
    pub fn true_value(&self, c: &Candidate) -> f64 {
        match &self.f {
            SyntheticFn::Sphere => {
                let external = self.space.from_internal(c).expect("candidate fits space");
                external.iter().map(|x| x * x).sum()
            }
            SyntheticFn::BraninScaled => {
                let external = self.space.from_internal(c).expect("candidate fits space");
                (branin(external[0], external[1]) - BRANIN_MIN) / BRANIN_SCALE
            }
            f @ SyntheticFn::Interpolant { .. } => interpolant_value(f, c),
        }
    }

    /// Simple regret against the registered optimum: `f(c) - f(gamma*)`.
    pub fn true_regret(&self, c: &Candidate) -> f64 {
        self.true_value(c) - self.f_star
    }

    fn evaluate(&mut self, c: &Candidate) -> Evaluation {
        let truth = self.true_value(c);
        let draw = |stream: &mut ChaCha8Rng| -> f64 {
            if self.noise_std == 0.0 {
                return truth;
            }
            let u1: f64 = stream.gen::<f64>().max(1e-12);
            let u2: f64 = stream.gen();
            truth
                + self.noise_std * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        let mut stream = self.noise_stream.clone();
        let (y, fold_values) = match self.folds {
            Some(k) if k >= 2 => {
                let folds: Vec<f64> = (0..k).map(|_| draw(&mut stream)).collect();
                let mean = folds.iter().sum::<f64>() / k as f64;
                (mean, Some(folds))
            }
            _ => (draw(&mut stream), None),
        };
        self.noise_stream = stream;
        Evaluation {
            y,
            fold_values,
            eval_seconds: self.eval_seconds,
            test_metric: None,
        }
    }
}

fn interpolant_value(f: &SyntheticFn, c: &Candidate) -> f64 {
    let SyntheticFn::Interpolant {
        anchors,
        weights,
        params,
    } = f
    else {
        unreachable!("only called for interpolants")
    };
    anchors
        .iter()
        .zip(weights.iter())
        .map(|(a, w)| kernel_eval(params, a, c).expect("same dims") * w)
        .sum()
}

// ---------------------------------------------------------------------------
// Subprocess objective
// ---------------------------------------------------------------------------

/// Request line written to the child's stdin.
#[derive(Debug, Serialize, Deserialize)]
pub struct WireRequest {
    pub candidate: BTreeMap<String, f64>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold_spec: Option<FoldSpec>,
}

/// Response line read from the child's stdout.
#[derive(Debug, Serialize, Deserialize)]
pub struct WireResponse {
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold_values: Option<Vec<f64>>,
    #[serde(default)]
    pub eval_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_metric: Option<f64>,
}

/// Evaluates candidates by spawning an external command once per evaluation:
/// one JSON request line on stdin, one JSON response line on stdout, nonzero
/// exit status means failure.
#[derive(Debug, Clone)]
pub struct SubprocessObjective {
    pub command: Vec<String>,
    pub seed: u64,
    pub fold_spec: Option<FoldSpec>,
}

impl SubprocessObjective {
    fn evaluate(&self, space: &SearchSpace, c: &Candidate) -> Result<Evaluation, ObjectiveError> {
        let external = space.from_internal(c)?;
        let candidate: BTreeMap<String, f64> = space
            .dims()
            .iter()
            .zip(&external)
            .map(|(d, &v)| (d.name.clone(), v))
            .collect();
        let request = WireRequest {
            candidate,
            seed: self.seed,
            fold_spec: self.fold_spec.clone(),
        };

        let (program, args) = self
            .command
            .split_first()
            .ok_or_else(|| ObjectiveError::BadResponse("empty objective command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()?;
        {
            let stdin = child.stdin.as_mut().expect("stdin was piped");
            serde_json::to_writer(&mut *stdin, &request)
                .map_err(|e| ObjectiveError::BadResponse(e.to_string()))?;
            stdin.write_all(b"\n")?;
        }
        let output = child.wait_with_output()?;
        if !output.status.success() {
            let stderr = String::from_utf8_lossy(&output.stderr);
            return Err(ObjectiveError::Subprocess {
                code: output.status.code(),
                stderr: stderr.chars().take(400).collect(),
            });
        }
        let stdout = BufReader::new(output.stdout.as_slice());
        let line = stdout
            .lines()
            .next()
            .ok_or_else(|| ObjectiveError::BadResponse("no output line".into()))??;
        let response: WireResponse = serde_json::from_str(&line)
            .map_err(|e| ObjectiveError::BadResponse(format!("{e} in {line:?}")))?;
        if !response.y.is_finite() {
            return Err(ObjectiveError::BadResponse(format!(
                "non-finite y {}",
                response.y
            )));
        }
        Ok(Evaluation {
            y: response.y,
            fold_values: response.fold_values,
            eval_seconds: response.eval_seconds,
            test_metric: response.test_metric,
        })
    }
}

// ---------------------------------------------------------------------------
// Trace replay
// ---------------------------------------------------------------------------

/// Replays a recorded evaluation sequence; the engine follows the trace's
/// candidates and only exercises the stopping machinery.
#[derive(Debug, Clone)]
pub struct ReplayObjective {
    rows: Vec<TraceRow>,
    cursor: usize,
}

impl ReplayObjective {
    pub fn new(rows: Vec<TraceRow>) -> Self {
        Self { rows, cursor: 0 }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ObjectiveError> {
        let file = std::fs::File::open(path)?;
        let rows = super::record::read_trace(BufReader::new(file))
            .map_err(|e| ObjectiveError::BadResponse(e.to_string()))?;
        Ok(Self::new(rows))
    }

    pub fn remaining(&self) -> usize {
        self.rows.len() - self.cursor
    }

    /// External coordinates of the next trace row, if the trace stores them.
    pub fn peek_candidate(&self, space: &SearchSpace) -> Result<Option<Candidate>, ObjectiveError> {
        let Some(row) = self.rows.get(self.cursor) else {
            return Err(ObjectiveError::ReplayExhausted(self.cursor + 1));
        };
        let Some(map) = &row.candidate else {
            return Ok(None);
        };
        let external = external_in_order(space, map, self.cursor + 1)?;
        Ok(Some(space.to_internal(&external)?))
    }

    fn evaluate(
        &mut self,
        space: &SearchSpace,
        c: &Candidate,
    ) -> Result<Evaluation, ObjectiveError> {
        let t = self.cursor + 1;
        let Some(row) = self.rows.get(self.cursor).cloned() else {
            return Err(ObjectiveError::ReplayExhausted(t));
        };
        if let Some(map) = &row.candidate {
            let external = external_in_order(space, map, t)?;
            let expected = space.to_internal(&external)?;
            for (dim, (a, b)) in expected.coords().iter().zip(c.coords()).enumerate() {
                if (a - b).abs() > 1e-9 {
                    return Err(ObjectiveError::ReplayMismatch {
                        t,
                        detail: format!("coordinate {dim}: trace {a} vs engine {b}"),
                    });
                }
            }
        }
        self.cursor += 1;
        Ok(Evaluation {
            y: row.y,
            fold_values: row.fold_metrics,
            eval_seconds: row.eval_seconds,
            test_metric: row.test_metric,
        })
    }
}

fn external_in_order(
    space: &SearchSpace,
    map: &BTreeMap<String, f64>,
    t: usize,
) -> Result<Vec<f64>, ObjectiveError> {
    space
        .dims()
        .iter()
        .map(|d| {
            map.get(&d.name)
                .copied()
                .ok_or_else(|| ObjectiveError::ReplayMismatch {
                    t,
                    detail: format!("trace candidate lacks dimension `{}`", d.name),
                })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Adapter
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum ObjectiveAdapter {
    Synthetic(SyntheticObjective),
    Subprocess(SubprocessObjective),
    Replay(ReplayObjective),
}

impl ObjectiveAdapter {
    pub fn evaluate(
        &mut self,
        space: &SearchSpace,
        c: &Candidate,
    ) -> Result<Evaluation, ObjectiveError> {
        match self {
            ObjectiveAdapter::Synthetic(obj) => Ok(obj.evaluate(c)),
            ObjectiveAdapter::Subprocess(obj) => obj.evaluate(space, c),
            ObjectiveAdapter::Replay(obj) => obj.evaluate(space, c),
        }
    }

    /// Simple regret of `c` against the registered optimum; synthetic only.
    pub fn true_regret(&self, c: &Candidate) -> Result<f64, ObjectiveError> {
        match self {
            ObjectiveAdapter::Synthetic(obj) => Ok(obj.true_regret(c)),
            _ => Err(ObjectiveError::NotAvailable),
        }
    }

    pub fn as_synthetic(&self) -> Option<&SyntheticObjective> {
        match self {
            ObjectiveAdapter::Synthetic(obj) => Some(obj),
            _ => None,
        }
    }

    pub fn as_replay(&self) -> Option<&ReplayObjective> {
        match self {
            ObjectiveAdapter::Replay(obj) => Some(obj),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_at_origin_is_zero() {
        let mut obj = SyntheticObjective::by_name("sphere", Some(2), 0.0, None, 1.0, 0).unwrap();
        let origin = obj.space().to_internal(&[0.0, 0.0]).unwrap();
        assert_eq!(obj.evaluate(&origin).y, 0.0);
        assert_eq!(obj.true_regret(&origin), 0.0);
    }

    #[test]
    fn sphere_regret_is_squared_distance() {
        let obj = SyntheticObjective::by_name("sphere", Some(2), 0.0, None, 1.0, 0).unwrap();
        let c = obj.space().to_internal(&[0.3, 0.4]).unwrap();
        assert_relative_eq!(obj.true_regret(&c), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn branin_registered_optimum_matches_dense_grid() {
        let obj = SyntheticObjective::by_name("branin_scaled", None, 0.0, None, 1.0, 0).unwrap();
        let (star, f_star) = obj.optimum();
        // The registered optimizer round-trips through internal coordinates,
        // so its value is zero only up to that round-trip.
        assert!(f_star.abs() < 1e-14, "f_star = {f_star}");
        assert_eq!(obj.true_regret(star), 0.0);
        // 1000 x 1000 grid scan must not find anything meaningfully below the
        // registered optimum.
        let mut best = f64::INFINITY;
        for i in 0..1000 {
            for j in 0..1000 {
                let c = Candidate::clamped(vec![i as f64 / 999.0, j as f64 / 999.0]);
                best = best.min(obj.true_value(&c));
            }
        }
        assert!(
            best >= f_star - 1e-3,
            "grid found {best} below registered {f_star}"
        );
        assert!(
            best <= f_star + 1e-3,
            "grid min {best} far above registered {f_star}"
        );
    }

    #[test]
    fn gp_surfaces_have_consistent_registered_optima() {
        for name in ["gp_surface_a", "gp_surface_b", "gp_surface_c"] {
            let obj = SyntheticObjective::by_name(name, None, 0.0, None, 1.0, 7).unwrap();
            let (_, f_star) = obj.optimum();
            for i in 0..5000 {
                let c = Candidate::clamped(vec![i as f64 / 4999.0]);
                assert!(
                    obj.true_regret(&c) >= -1e-9,
                    "{name}: regret below zero at grid point {i}"
                );
            }
            assert!(f_star.is_finite());
        }
    }

    #[test]
    fn synthetic_folds_with_zero_noise_are_constant() {
        let mut obj =
            SyntheticObjective::by_name("sphere", Some(2), 0.0, Some(10), 1.0, 3).unwrap();
        let c = obj.space().to_internal(&[0.5, -0.2]).unwrap();
        let eval = obj.evaluate(&c);
        let folds = eval.fold_values.unwrap();
        assert_eq!(folds.len(), 10);
        assert!(folds.iter().all(|&v| v == folds[0]));
        assert_relative_eq!(eval.y, folds[0]);
    }

    #[test]
    fn synthetic_noise_is_reproducible_per_seed() {
        let c = Candidate::clamped(vec![0.25, 0.75]);
        let mut a = SyntheticObjective::by_name("sphere", Some(2), 0.1, None, 1.0, 5).unwrap();
        let mut b = SyntheticObjective::by_name("sphere", Some(2), 0.1, None, 1.0, 5).unwrap();
        assert_eq!(a.evaluate(&c).y, b.evaluate(&c).y);
        let mut other = SyntheticObjective::by_name("sphere", Some(2), 0.1, None, 1.0, 6).unwrap();
        assert_ne!(a.evaluate(&c).y, other.evaluate(&c).y);
    }

    #[test]
    fn unknown_synthetic_name_is_an_error() {
        assert!(matches!(
            SyntheticObjective::by_name("rosenbrock", None, 0.0, None, 1.0, 0),
            Err(ObjectiveError::UnknownSynthetic(_))
        ));
    }

    #[test]
    fn replay_returns_rows_and_checks_candidates() {
        let space = SearchSpace::new(vec![DimensionSpec::linear("x", 0.0, 1.0)], 0).unwrap();
        let rows = vec![
            TraceRow {
                iteration: 1,
                y: 0.5,
                test_metric: Some(0.6),
                fold_metrics: None,
                eval_seconds: 2.0,
                candidate: Some([("x".to_string(), 0.25)].into()),
            },
            TraceRow {
                iteration: 2,
                y: 0.4,
                test_metric: None,
                fold_metrics: Some(vec![0.35, 0.45]),
                eval_seconds: 3.0,
                candidate: Some([("x".to_string(), 0.75)].into()),
            },
        ];
        let mut replay = ReplayObjective::new(rows);
        let c1 = replay.peek_candidate(&space).unwrap().unwrap();
        let eval = replay.evaluate(&space, &c1).unwrap();
        assert_eq!(eval.y, 0.5);
        assert_eq!(eval.test_metric, Some(0.6));

        // wrong candidate for row 2
        let wrong = Candidate::clamped(vec![0.2]);
        assert!(matches!(
            replay.evaluate(&space, &wrong),
            Err(ObjectiveError::ReplayMismatch { t: 2, .. })
        ));
    }

    #[test]
    fn replay_exhaustion_is_reported() {
        let space = SearchSpace::new(vec![DimensionSpec::linear("x", 0.0, 1.0)], 0).unwrap();
        let mut replay = ReplayObjective::new(vec![]);
        assert!(matches!(
            replay.evaluate(&space, &Candidate::clamped(vec![0.5])),
            Err(ObjectiveError::ReplayExhausted(1))
        ));
    }

    #[test]
    fn subprocess_round_trips_a_stub() {
        let space = SearchSpace::new(vec![DimensionSpec::linear("x", 0.0, 2.0)], 0).unwrap();
        let stub = SubprocessObjective {
            command: vec![
                "/bin/sh".to_string(),
                "-c".to_string(),
                // fixed payload regardless of input
                r#"read line; echo '{"y": 0.125, "fold_values": [0.1, 0.15], "eval_seconds": 3.5, "test_metric": 0.2}'"#
                    .to_string(),
            ],
            seed: 9,
            fold_spec: None,
        };
        let eval = stub
            .evaluate(&space, &Candidate::clamped(vec![0.5]))
            .unwrap();
        assert_eq!(
            eval,
            Evaluation {
                y: 0.125,
                fold_values: Some(vec![0.1, 0.15]),
                eval_seconds: 3.5,
                test_metric: Some(0.2),
            }
        );
    }

    #[test]
    fn subprocess_nonzero_exit_is_a_failure() {
        let space = SearchSpace::new(vec![DimensionSpec::linear("x", 0.0, 1.0)], 0).unwrap();
        let stub = SubprocessObjective {
            command: vec![
                "/bin/sh".to_string(),
                "-c".to_string(),
                "read line; echo boom >&2; exit 3".to_string(),
            ],
            seed: 0,
            fold_spec: None,
        };
        match stub.evaluate(&space, &Candidate::clamped(vec![0.5])) {
            Err(ObjectiveError::Subprocess {
                code: Some(3),
                stderr,
            }) => {
                assert!(stderr.contains("boom"));
            }
            other => panic!("unexpected result: {other:?}"),
        }
    }
}
