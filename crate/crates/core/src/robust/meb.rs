//! Exact minimum enclosing ball of a finite point set (Welzl).
//!
//! Points are first projected onto their affine hull so that the support
//! sets stay affinely independent when, as for sigma points, every sample
//! satisfies `Σ w = 1`.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ChebyshevResult, Method};
use crate::error::{Error, Result};

const HULL_TOL: f64 = 1e-10;
const SHUFFLE_SEED: u64 = 0x5eed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Clone, Debug)]
struct LocalBall {
    c: DVector<f64>,
    r: f64,
}

impl LocalBall {
    fn contains(&self, p: &DVector<f64>) -> bool {
        (p - &self.c).norm() <= self.r * (1.0 + 1e-12) + 1e-12
    }
}

/// Smallest ball with every point of `support` on its boundary, within the
/// affine hull of `support`.
fn circumball(support: &[DVector<f64>]) -> Option<LocalBall> {
    let p0 = support.first()?;
    if support.len() == 1 {
        return Some(LocalBall { c: p0.clone(), r: 0.0 });
    }
    let k = support.len() - 1;
    let q = DMatrix::from_fn(p0.len(), k, |i, j| support[j + 1][i] - p0[i]);
    let g = q.transpose() * &q;
    let rhs = DVector::from_fn(k, |j, _| 0.5 * g[(j, j)]);
    let lambda = g.svd(true, true).solve(&rhs, 1e-14).ok()?;
    let c = p0 + &q * lambda;
    let r = support.iter().map(|p| (p - &c).norm()).fold(0.0, f64::max);
    Some(LocalBall { c, r })
}

fn welzl(pts: &[DVector<f64>], support: &mut Vec<DVector<f64>>, dim: usize) -> Option<LocalBall> {
    let mut ball = circumball(support);
    if support.len() == dim + 1 {
        return ball;
    }
    for (i, p) in pts.iter().enumerate() {
        if ball.as_ref().is_some_and(|b| b.contains(p)) {
            continue;
        }
        support.push(p.clone());
        ball = welzl(&pts[..i], support, dim);
        support.pop();
    }
    ball
}

pub fn min_enclosing_ball(points: &[Vec<f64>]) -> Result<Ball> {
    let first = points
        .first()
        .ok_or_else(|| Error::InvalidProblem("no points to enclose".into()))?;
    let d = first.len();
    if let Some(bad) = points.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.len(),
        });
    }
    let p0 = DVector::from_column_slice(first);
    let diffs = DMatrix::from_fn(d, points.len(), |i, j| points[j][i] - p0[i]);
    let svd = diffs.clone().svd(true, false);
    let smax = svd.singular_values.max();
    let u = svd.u.expect("left singular vectors requested");
    let cols: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| smax > 0.0 && svd.singular_values[i] > HULL_TOL * smax)
        .collect();
    let basis = u.select_columns(&cols);
    let k = cols.len();
    let mut local: Vec<DVector<f64>> = (0..points.len())
        .map(|j| basis.transpose() * diffs.column(j))
        .collect();
    local.shuffle(&mut ChaCha8Rng::seed_from_u64(SHUFFLE_SEED));
    let lb = welzl(&local, &mut Vec::with_capacity(k + 1), k).expect("nonempty input");
    let center = p0 + &basis * lb.c;
    let radius = points
        .iter()
        .map(|p| (DVector::from_column_slice(p) - &center).norm())
        .fold(0.0, f64::max);
    Ok(Ball {
        center: center.as_slice().to_vec(),
        radius,
    })
}

/// Enclosing ball of sampled members, reported as a center in `(z, w)` layout.
pub fn mc_oracle_center(samples: &[Vec<f64>]) -> Result<ChebyshevResult> {
    if samples.first().is_some_and(|p| p.len() % 2 != 0) {
        return Err(Error::InvalidProblem("samples must have (z, w) layout".into()));
    }
    let ball = min_enclosing_ball(samples)?;
    let mut r = ChebyshevResult::from_center(Method::McOracle, &ball.center, Some(ball.radius));
    r.diagnostics.notes.push(format!("{} samples", samples.len()));
    Ok(r)
}
