//! Search-space definition: dimension specs with linear/log scaling, candidate
//! points in internal unit-cube coordinates, and uniform candidate generation.
//!
//! All model-facing code works on [`Candidate`]s whose coordinates live in
//! `[0, 1]^d`; the mapping to the user-facing ranges (including log scaling)
//! happens only at the objective boundary via [`SearchSpace::to_internal`] and
//! [`SearchSpace::from_internal`].

use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("search space must have at least one dimension")]
    EmptySpace,
    #[error("dimension `{name}`: {reason}")]
    InvalidDimension { name: String, reason: String },
    #[error("value {value} out of bounds for dimension `{dim}`")]
    OutOfBounds { dim: String, value: f64 },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("coordinate {index} = {value} outside [0, 1]")]
    BadCoordinate { index: usize, value: f64 },
    #[error("candidate count must be at least 1")]
    BadSampleCount,
    #[error("failed to read space file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse space file: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Axis scaling applied before normalization to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
}

/// One hyperparameter axis: closed range `[lower, upper]` plus its scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimensionSpec {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub scale: Scale,
}

impl DimensionSpec {
    pub fn linear(name: &str, lower: f64, upper: f64) -> Self {
        Self {
            name: name.to_string(),
            lower,
            upper,
            scale: Scale::Linear,
        }
    }

    pub fn log(name: &str, lower: f64, upper: f64) -> Self {
        Self {
            name: name.to_string(),
            lower,
            upper,
            scale: Scale::Log,
        }
    }

    fn validate(&self) -> Result<(), SpaceError> {
        let fail = |reason: &str| SpaceError::InvalidDimension {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        if !self.lower.is_finite() || !self.upper.is_finite() {
            return Err(fail("bounds must be finite"));
        }
        if self.lower >= self.upper {
            return Err(fail("lower must be strictly below upper"));
        }
        if self.scale == Scale::Log && self.lower <= 0.0 {
            return Err(fail("log-scaled dimension needs lower > 0"));
        }
        Ok(())
    }

    /// Maps an in-range external value to `[0, 1]`.
    fn encode(&self, x: f64) -> f64 {
        match self.scale {
            Scale::Linear => (x - self.lower) / (self.upper - self.lower),
            Scale::Log => (x.ln() - self.lower.ln()) / (self.upper.ln() - self.lower.ln()),
        }
    }

    /// Inverse of `encode`, clamped back into the range to absorb float drift.
    /// Unit-interval endpoints map to the bounds exactly.
    fn decode(&self, c: f64) -> f64 {
        if c == 0.0 {
            return self.lower;
        }
        if c == 1.0 {
            return self.upper;
        }
        let x = match self.scale {
            Scale::Linear => self.lower + c * (self.upper - self.lower),
            Scale::Log => (self.lower.ln() + c * (self.upper.ln() - self.lower.ln())).exp(),
        };
        x.clamp(self.lower, self.upper)
    }
}

/// A point in internal unit-cube coordinates.
///
/// Invariant: every coordinate lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    coords: Vec<f64>,
}

impl Candidate {
    pub fn new(coords: Vec<f64>) -> Result<Self, SpaceError> {
        for (index, &value) in coords.iter().enumerate() {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(SpaceError::BadCoordinate { index, value });
            }
        }
        Ok(Self { coords })
    }

    /// Builds a candidate by clamping each coordinate into `[0, 1]`.
    pub fn clamped(coords: Vec<f64>) -> Self {
        Self {
            coords: coords.into_iter().map(|c| c.clamp(0.0, 1.0)).collect(),
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c:.6}")?;
        }
        write!(f, "]")
    }
}

/// The search domain: an ordered list of dimensions plus a salt that keys all
/// candidate streams derived from this space.
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone, Serialize)]
pub struct SearchSpace {
    dims: Vec<DimensionSpec>,
    seed_salt: u64,
}

#[derive(Deserialize)]
struct SpaceFile {
    #[serde(default)]
    seed_salt: u64,
    dims: Vec<DimensionSpec>,
}

impl SearchSpace {
    pub fn new(dims: Vec<DimensionSpec>, seed_salt: u64) -> Result<Self, SpaceError> {
        if dims.is_empty() {
            return Err(SpaceError::EmptySpace);
        }
        for dim in &dims {
            dim.validate()?;
        }
        for (i, dim) in dims.iter().enumerate() {
            if dims[..i].iter().any(|d| d.name == dim.name) {
                return Err(SpaceError::InvalidDimension {
                    name: dim.name.clone(),
                    reason: "duplicate dimension name".to_string(),
                });
            }
        }
        Ok(Self { dims, seed_salt })
    }

    /// Loads a space from a JSON file of the form
    /// `{"seed_salt": 0, "dims": [{"name", "lower", "upper", "scale"}, ...]}`.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, SpaceError> {
        let text = std::fs::read_to_string(path)?;
        let file: SpaceFile = serde_json::from_str(&text)?;
        Self::new(file.dims, file.seed_salt)
    }

    pub fn dims(&self) -> &[DimensionSpec] {
        &self.dims
    }

    pub fn dim_count(&self) -> usize {
        self.dims.len()
    }

    pub fn seed_salt(&self) -> u64 {
        self.seed_salt
    }

    /// Deterministic RNG stream keyed by `(seed_salt, seed)`.
    pub fn candidate_stream(&self, seed: u64) -> ChaCha8Rng {
        rng::stream(seed, &[self.seed_salt, rng::LABEL_CANDIDATES])
    }

    /// Maps external values (one per dimension, each within its range) to a
    /// unit-cube candidate. Linear dims map affinely; log dims map through
    /// `ln` first.
    pub fn to_internal(&self, external: &[f64]) -> Result<Candidate, SpaceError> {
        if external.len() != self.dims.len() {
            return Err(SpaceError::LengthMismatch {
                expected: self.dims.len(),
                got: external.len(),
            });
        }
        let mut coords = Vec::with_capacity(external.len());
        for (dim, &x) in self.dims.iter().zip(external) {
            if !x.is_finite() || x < dim.lower || x > dim.upper {
                return Err(SpaceError::OutOfBounds {
                    dim: dim.name.clone(),
                    value: x,
                });
            }
            coords.push(dim.encode(x).clamp(0.0, 1.0));
        }
        Ok(Candidate { coords })
    }

    /// Inverse of [`to_internal`](Self::to_internal); output stays within each
    /// dimension's bounds.
    pub fn from_internal(&self, c: &Candidate) -> Result<Vec<f64>, SpaceError> {
        if c.len() != self.dims.len() {
            return Err(SpaceError::LengthMismatch {
                expected: self.dims.len(),
                got: c.len(),
            });
        }
        Ok(self
            .dims
            .iter()
            .zip(c.coords())
            .map(|(dim, &coord)| dim.decode(coord))
            .collect())
    }

    /// Draws `n` candidates with coordinates uniform on `[0, 1]`.
    ///
    /// The output sequence is a pure function of the stream state, so callers
    /// get reproducible sweeps from [`candidate_stream`](Self::candidate_stream).
    pub fn sample_candidates(
        &self,
        n: usize,
        stream: &mut impl Rng,
    ) -> Result<Vec<Candidate>, SpaceError> {
        if n == 0 {
            return Err(SpaceError::BadSampleCount);
        }
        Ok((0..n)
            .map(|_| Candidate {
                coords: (0..self.dims.len()).map(|_| stream.gen::<f64>()).collect(),
            })
            .collect())
    }
}
