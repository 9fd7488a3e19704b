//! Sets of sigma points and weights whose moments match a partially known
//! distribution.
//!
//! A point of the set is laid out as `(z_1, ..., z_n, w_1, ..., w_n)`.

mod sample;

pub use sample::{sample_set, SampleBatch, MAX_PROPOSALS, MIN_ACCEPTANCE};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lasserre::{Pop, Sense};
use crate::poly::Polynomial;

/// Moment information: exact values for some orders, intervals for others.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSpec {
    pub n_sigma: usize,
    pub epsilon: f64,
    #[serde(default)]
    pub known: BTreeMap<u32, f64>,
    #[serde(default)]
    pub intervals: BTreeMap<u32, (f64, f64)>,
}

impl MomentSpec {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.n_sigma == 0 {
            errs.push("n_sigma: must be positive".to_string());
        }
        if !(self.epsilon > 0.0 && self.epsilon * (self.n_sigma as f64) < 1.0) {
            errs.push(format!(
                "epsilon: {} must lie strictly between 0 and 1/n_sigma",
                self.epsilon
            ));
        }
        for (&k, &v) in &self.known {
            if k == 0 {
                errs.push("known.0: moment orders start at 1".into());
            }
            if !v.is_finite() {
                errs.push(format!("known.{k}: value is not finite"));
            }
            if self.intervals.contains_key(&k) {
                errs.push(format!("known.{k}: order also appears in intervals"));
            }
            if k % 2 == 0 && v < 0.0 {
                errs.push(format!("known.{k}: even-order moment is negative"));
            }
        }
        for (&k, &(lo, hi)) in &self.intervals {
            if k == 0 {
                errs.push("intervals.0: moment orders start at 1".into());
            }
            if !(lo.is_finite() && hi.is_finite()) {
                errs.push(format!("intervals.{k}: bounds are not finite"));
            } else if lo > hi {
                errs.push(format!("intervals.{k}: lower bound {lo} exceeds upper bound {hi}"));
            }
            if k % 2 == 0 && hi < 0.0 {
                errs.push(format!("intervals.{k}: even-order upper bound is negative"));
            }
        }
        if self.even_upper_bounds().next().is_none() {
            errs.push("intervals: no even-order moment has an upper bound, so the set is unbounded".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    fn even_upper_bounds(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        let known = self.known.iter().map(|(&k, &v)| (k, v));
        let ivl = self.intervals.iter().map(|(&k, &(_, hi))| (k, hi));
        known.chain(ivl).filter(|&(k, _)| k > 0 && k % 2 == 0)
    }

    /// Highest moment order mentioned.
    pub fn max_order(&self) -> u32 {
        self.known.keys().chain(self.intervals.keys()).copied().max().unwrap_or(0)
    }

    /// `(lo, hi)` for order `k`, collapsed for exact moments.
    pub fn range(&self, k: u32) -> Option<(f64, f64)> {
        self.known
            .get(&k)
            .map(|&v| (v, v))
            .or_else(|| self.intervals.get(&k).copied())
    }

    /// Midpoint of the information on order `k`.
    pub fn midpoint(&self, k: u32) -> Option<f64> {
        self.range(k).map(|(lo, hi)| 0.5 * (lo + hi))
    }

    /// Widest interval, 0 when every moment is exact.
    pub fn max_gap(&self) -> f64 {
        self.intervals.values().map(|&(lo, hi)| hi - lo).fold(0.0, f64::max)
    }

    /// A box guaranteed to contain the set: `w_i >= eps` together with an
    /// even moment bound `Σ z^k w <= U` gives `|z_i| <= (U / eps)^(1/k)`.
    pub fn prior_box(&self) -> Result<BoundingBox> {
        self.validate()?;
        let n = self.n_sigma;
        let zmax = self
            .even_upper_bounds()
            .map(|(k, u)| (u / self.epsilon).powf(1.0 / k as f64))
            .fold(f64::INFINITY, f64::min);
        let wmax = 1.0 - (n as f64 - 1.0) * self.epsilon;
        let mut lower = vec![-zmax; n];
        let mut upper = vec![zmax; n];
        lower.extend(std::iter::repeat_n(self.epsilon, n));
        upper.extend(std::iter::repeat_n(wmax, n));
        BoundingBox::new(lower, upper)
    }
}

/// Axis-aligned box `lower <= x <= upper`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l.is_finite() && u.is_finite() && l <= u)) {
            return Err(Error::InvalidProblem("box bounds must be finite with lower <= upper".into()));
        }
        Ok(BoundingBox { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) * (u - l))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol)
    }

    pub fn ranges(&self) -> Vec<(f64, f64)> {
        self.lower.iter().copied().zip(self.upper.iter().copied()).collect()
    }
}

/// Tolerance on `Σ w = 1` accepted by [`SigmaPointSet::new`].
pub const WEIGHT_SUM_TOL: f64 = 1e-6;

/// Nodes and weights of a discrete distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaPointSet {
    z: Vec<f64>,
    w: Vec<f64>,
}

impl SigmaPointSet {
    pub fn new(z: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if z.len() != w.len() {
            return Err(Error::DimensionMismatch {
                expected: z.len(),
                found: w.len(),
            });
        }
        if z.is_empty() || z.iter().chain(&w).any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("sigma points must be finite and nonempty".into()));
        }
        if w.iter().any(|&v| v < -1e-9) {
            return Err(Error::InvalidProblem("weights must be nonnegative".into()));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidProblem(format!("weights sum to {sum}, not 1")));
        }
        Ok(SigmaPointSet { z, w })
    }

    /// Splits `(z, w)` in half.
    pub fn from_vector(x: &[f64]) -> Result<Self> {
        if !x.len().is_multiple_of(2) {
            return Err(Error::InvalidProblem(format!("odd vector length {}", x.len())));
        }
        let (z, w) = x.split_at(x.len() / 2);
        Self::new(z.to_vec(), w.to_vec())
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn to_vector(&self) -> Vec<f64> {
        self.z.iter().chain(&self.w).copied().collect()
    }

    /// `Σ w_i z_i^k`
    pub fn moment(&self, k: i32) -> f64 {
        self.z.iter().zip(&self.w).map(|(z, w)| w * z.powi(k)).sum()
    }
}

/// The weight-floored feasibility set of a [`MomentSpec`].
#[derive(Clone, Debug)]
pub struct SemialgebraicSet {
    spec: MomentSpec,
    inequalities: Vec<Polynomial>,
    equalities: Vec<Polynomial>,
    hint: BoundingBox,
}

/// `Σ_i z_i^k w_i` in the `(z, w)` layout.
pub fn moment_polynomial(n_sigma: usize, k: u32) -> Polynomial {
    let n = 2 * n_sigma;
    (0..n_sigma).fold(Polynomial::zero(n), |acc, i| {
        &acc + &(&Polynomial::var(n, i).pow(k) * &Polynomial::var(n, n_sigma + i))
    })
}

pub fn build_set(spec: &MomentSpec) -> Result<SemialgebraicSet> {
    spec.validate()?;
    let ns = spec.n_sigma;
    let n = 2 * ns;
    let mut inequalities: Vec<Polynomial> = (0..ns)
        .map(|j| &Polynomial::var(n, ns + j) - &Polynomial::constant(n, spec.epsilon))
        .collect();
    let weight_sum = (0..ns).fold(Polynomial::constant(n, -1.0), |acc, j| &acc + &Polynomial::var(n, ns + j));
    let mut equalities = vec![weight_sum];
    for (&k, &v) in &spec.known {
        equalities.push(&moment_polynomial(ns, k) - &Polynomial::constant(n, v));
    }
    for (&k, &(lo, hi)) in &spec.intervals {
        let m = moment_polynomial(ns, k);
        inequalities.push(&Polynomial::constant(n, hi) - &m);
        inequalities.push(&m - &Polynomial::constant(n, lo));
    }
    Ok(SemialgebraicSet {
        hint: spec.prior_box()?,
        spec: spec.clone(),
        inequalities,
        equalities,
    })
}

impl SemialgebraicSet {
    pub fn spec(&self) -> &MomentSpec {
        &self.spec
    }

    pub fn n_sigma(&self) -> usize {
        self.spec.n_sigma
    }

    pub fn n_vars(&self) -> usize {
        2 * self.spec.n_sigma
    }

    /// `g(x) >= 0`
    pub fn inequalities(&self) -> &[Polynomial] {
        &self.inequalities
    }

    /// `h(x) = 0`
    pub fn equalities(&self) -> &[Polynomial] {
        &self.equalities
    }

    /// A box known to contain the set before any optimization.
    pub fn prior_box(&self) -> &BoundingBox {
        &self.hint
    }

    /// Optimize `objective` over the set, with variables scaled by `scaling`.
    pub fn to_pop(&self, objective: Polynomial, sense: Sense, scaling: &BoundingBox) -> Pop {
        let mut pop = Pop::new(objective, sense).with_scaling(scaling.ranges());
        pop.inequalities = self.inequalities.clone();
        pop.equalities = self.equalities.clone();
        pop
    }
}

pub fn membership(x: &[f64], set: &SemialgebraicSet, tol: f64) -> Result<bool> {
    if x.len() != set.n_vars() {
        return Err(Error::DimensionMismatch {
            expected: set.n_vars(),
            found: x.len(),
        });
    }
    for h in &set.equalities {
        if h.eval_unchecked(x).abs() > tol {
            return Ok(false);
        }
    }
    for g in &set.inequalities {
        if g.eval_unchecked(x) < -tol {
            return Ok(false);
        }
    }
    Ok(true)
}
