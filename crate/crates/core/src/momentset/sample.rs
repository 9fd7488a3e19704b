use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{membership, BoundingBox, SemialgebraicSet};
use crate::error::{Error, Result};

/// Proposals drawn before a low acceptance rate is declared a failure.
pub const MAX_PROPOSALS: u64 = 10_000_000;
pub const MIN_ACCEPTANCE: f64 = 1e-5;

const MEMBER_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleBatch {
    pub points: Vec<Vec<f64>>,
    pub proposals: u64,
    pub acceptance_rate: f64,
}

/// Rejection sampling, uniform on the set.
///
/// Proposals are uniform over the box with the last weight dropped; it is
/// recovered from `Σ w = 1`, so the proposal density is uniform on the
/// weight hyperplane.
pub fn sample_set(set: &SemialgebraicSet, bbox: &BoundingBox, count: usize, seed: u64) -> Result<SampleBatch> {
    let n = set.n_vars();
    if bbox.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bbox.dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (bbox.lower(), bbox.upper());
    let mut points = Vec::with_capacity(count);
    let mut proposals = 0u64;
    let mut x = vec![0.0; n];
    while points.len() < count {
        proposals += 1;
        for i in 0..n - 1 {
            x[i] = lo[i] + (hi[i] - lo[i]) * rng.random::<f64>();
        }
        x[n - 1] = 1.0 - x[set.n_sigma()..n - 1].iter().sum::<f64>();
        if bbox.contains(&x, 0.0) && membership(&x, set, MEMBER_TOL)? {
            points.push(x.clone());
        }
        if proposals >= MAX_PROPOSALS && (points.len() as f64) < MIN_ACCEPTANCE * proposals as f64 {
            return Err(Error::Sampling(format!(
                "accepted {} of {proposals} proposals; use a tighter box or a hit-and-run sampler (not implemented)",
                points.len()
            )));
        }
    }
    let acceptance_rate = if proposals == 0 {
        0.0
    } else {
        points.len() as f64 / proposals as f64
    };
    Ok(SampleBatch {
        points,
        proposals,
        acceptance_rate,
    })
}
