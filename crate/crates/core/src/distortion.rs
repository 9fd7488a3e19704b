//! The unscented transform as a functional on sigma-point space, and how far
//! it is from an isometry.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::momentset::{sample_set, BoundingBox, SemialgebraicSet, SigmaPointSet};

/// Pairs closer than this are skipped.
pub const MIN_PAIR_DISTANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TestFunction {
    Sin,
    Cos,
    Exp,
    Identity,
    /// Coefficients in ascending degree.
    Poly(Vec<f64>),
}

impl TestFunction {
    pub fn poly(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation(vec!["f: polynomial coefficients must be finite".into()]));
        }
        Ok(TestFunction::Poly(coeffs))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TestFunction::Sin => x.sin(),
            TestFunction::Cos => x.cos(),
            TestFunction::Exp => x.exp(),
            TestFunction::Identity => x,
            TestFunction::Poly(c) => c.iter().rev().fold(0.0, |acc, &a| acc * x + a),
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Sin => f.write_str("sin"),
            TestFunction::Cos => f.write_str("cos"),
            TestFunction::Exp => f.write_str("exp"),
            TestFunction::Identity => f.write_str("identity"),
            TestFunction::Poly(c) => {
                let parts: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                write!(f, "poly:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sin" => Ok(TestFunction::Sin),
            "cos" => Ok(TestFunction::Cos),
            "exp" => Ok(TestFunction::Exp),
            "identity" => Ok(TestFunction::Identity),
            _ => {
                let bad = || Error::Validation(vec![format!("f: unknown test function {s:?}")]);
                let body = s.strip_prefix("poly:").ok_or_else(bad)?;
                let coeffs = body
                    .split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
                    .collect::<Result<Vec<_>>>()?;
                TestFunction::poly(coeffs)
            }
        }
    }
}

impl TryFrom<String> for TestFunction {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TestFunction> for String {
    fn from(f: TestFunction) -> String {
        f.to_string()
    }
}

/// `Σ w_i f(z_i)`
pub fn ut_eval(s: &SigmaPointSet, f: &TestFunction) -> f64 {
    s.z().iter().zip(s.w()).map(|(&z, &w)| w * f.eval(z)).sum()
}

/// Smallest `D` with `(1 - D) r <= s <= (1 + D) r`, where `r` is the distance
/// between `x` and `y` and `s` the difference of their transforms; `None`
/// for coincident points.
pub fn pair_distortion(x: &[f64], y: &[f64], f: &TestFunction, n_sigma: usize) -> Result<Option<f64>> {
    for v in [x, y] {
        if v.len() != 2 * n_sigma {
            return Err(Error::DimensionMismatch {
                expected: 2 * n_sigma,
                found: v.len(),
            });
        }
    }
    let r = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if r < MIN_PAIR_DISTANCE {
        return Ok(None);
    }
    let (sx, sy) = (SigmaPointSet::from_vector(x)?, SigmaPointSet::from_vector(y)?);
    let s = (ut_eval(&sx, f) - ut_eval(&sy, f)).abs();
    Ok(Some((s / r - 1.0).abs()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionEstimate {
    pub d_max: f64,
    pub per_pair: Vec<f64>,
    pub n_pairs: usize,
    pub skipped: usize,
    pub acceptance_rate: f64,
}

/// Largest pairwise distortion over `n_pairs` pairs of members drawn
/// uniformly from `set`.
pub fn estimate_distortion(
    set: &SemialgebraicSet,
    bbox: &BoundingBox,
    f: &TestFunction,
    n_pairs: usize,
    seed: u64,
) -> Result<DistortionEstimate> {
    if n_pairs == 0 {
        return Err(Error::Validation(vec!["n_distortion_pairs: must be at least 1".into()]));
    }
    let batch = sample_set(set, bbox, 2 * n_pairs, seed)?;
    let ns = set.n_sigma();
    let results: Vec<Option<f64>> = batch
        .points
        .par_chunks(2)
        .map(|p| pair_distortion(&p[0], &p[1], f, ns))
        .collect::<Result<_>>()?;
    let per_pair: Vec<f64> = results.iter().flatten().copied().collect();
    let skipped = n_pairs - per_pair.len();
    Ok(DistortionEstimate {
        d_max: per_pair.iter().copied().fold(0.0, f64::max),
        per_pair,
        n_pairs,
        skipped,
        acceptance_rate: batch.acceptance_rate,
    })
}
