//! Bayesian optimization with automatic termination.
//!
//! The engine runs GP-based Bayesian optimization (or random search, or a
//! replayed optimizer trace), maintains a high-probability upper bound on the
//! simple regret from GP confidence bounds, and stops once that bound falls
//! below a threshold: either the cross-validation variance of the objective
//! estimate at the incumbent, or a user-supplied tolerance. Convergence and
//! EI/PI-threshold baselines, RYC/RTC scoring and bound-quality diagnostics
//! are included.
//!
//! Start with the runnable examples:
//!
//! ```bash
//! cargo run --example synthetic_run       # full loop with automatic stopping
//! cargo run --example gp_regression       # fit and predict
//! cargo run --example acquisition         # EI/PI and the inner maximizer
//! cargo run --example regret_bound        # the bound r_bar over iterations
//! cargo run --example cv_variance         # corrected CV variance threshold
//! cargo run --example trace_replay        # stop criteria over a recorded trace
//! cargo run --example subprocess_objective# external objectives over stdin/stdout
//! cargo run --example score_runs          # RYC/RTC scoring and aggregation
//! cargo run --example bound_diagnostics   # bound-vs-true-regret study
//! ```
//!
//! The `bostop` binary wraps the same machinery for batch experiments
//! (`run`, `score`, `diagnose`).

pub mod acq;
pub mod cli;
pub mod config;
pub mod cv;
pub mod engine;
pub mod gp;
pub mod metrics;
pub(crate) mod pattern;
pub(crate) mod rng;
pub mod space;
pub mod stop;
