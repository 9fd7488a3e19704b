//! Moment relaxations of polynomial optimization problems.
//!
//! A [`Pop`] optimizes a polynomial over `{x : g_i(x) >= 0, h_j(x) = 0}`.
//! [`build_relaxation`] produces its order-`t` moment relaxation as an SDP,
//! [`pop_bound`] solves it and [`certify`] checks whether the extracted
//! point attains the bound.

mod relaxation;

pub use relaxation::{build_relaxation, extract_point, MomentRelaxation};

use relaxation::extract_from_moments;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::sdp::{sdp_solve, SdpStatus, SolverOptions};

/// Default relaxation order.
pub const DEFAULT_ORDER: u32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Min,
    Max,
}

/// Polynomial optimization problem.
#[derive(Clone, Debug)]
pub struct Pop {
    pub n_vars: usize,
    pub objective: Polynomial,
    pub sense: Sense,
    /// `g(x) >= 0`
    pub inequalities: Vec<Polynomial>,
    /// `h(x) = 0`
    pub equalities: Vec<Polynomial>,
    /// Optional `(lo, hi)` range per variable, used only to rescale the
    /// variables onto `[-1, 1]` before relaxing.
    pub scaling: Option<Vec<(f64, f64)>>,
}

impl Pop {
    pub fn new(objective: Polynomial, sense: Sense) -> Self {
        Pop {
            n_vars: objective.n_vars(),
            objective,
            sense,
            inequalities: Vec::new(),
            equalities: Vec::new(),
            scaling: None,
        }
    }

    pub fn minimize(objective: Polynomial) -> Self {
        Self::new(objective, Sense::Min)
    }

    pub fn maximize(objective: Polynomial) -> Self {
        Self::new(objective, Sense::Max)
    }

    pub fn with_inequality(mut self, g: Polynomial) -> Self {
        self.inequalities.push(g);
        self
    }

    pub fn with_equality(mut self, h: Polynomial) -> Self {
        self.equalities.push(h);
        self
    }

    pub fn with_scaling(mut self, ranges: Vec<(f64, f64)>) -> Self {
        self.scaling = Some(ranges);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_vars == 0 {
            return Err(Error::InvalidProblem("a pop needs at least one variable".into()));
        }
        let all = std::iter::once(&self.objective)
            .chain(&self.inequalities)
            .chain(&self.equalities);
        for p in all {
            if p.n_vars() != self.n_vars {
                return Err(Error::DimensionMismatch {
                    expected: self.n_vars,
                    found: p.n_vars(),
                });
            }
        }
        if let Some(r) = &self.scaling {
            if r.len() != self.n_vars {
                return Err(Error::DimensionMismatch {
                    expected: self.n_vars,
                    found: r.len(),
                });
            }
            if r.iter().any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
                return Err(Error::InvalidProblem("scaling ranges must be finite with lo <= hi".into()));
            }
        }
        Ok(())
    }

    /// Smallest order whose moment matrix covers every polynomial's degree.
    pub fn minimal_order(&self) -> u32 {
        std::iter::once(&self.objective)
            .chain(&self.inequalities)
            .chain(&self.equalities)
            .map(|p| p.degree().div_ceil(2))
            .max()
            .unwrap_or(0)
            .max(1)
    }

    /// Largest constraint violation at `x` (0 when feasible).
    pub fn violation(&self, x: &[f64]) -> Result<f64> {
        let mut worst = 0.0f64;
        for g in &self.inequalities {
            worst = worst.max(-g.eval(x)?);
        }
        for h in &self.equalities {
            worst = worst.max(h.eval(x)?.abs());
        }
        Ok(worst)
    }
}

#[derive(Clone, Debug)]
pub struct PopOptions {
    pub sdp: SolverOptions,
    /// Singular values below `rank_tol * largest` count as zero.
    pub rank_tol: f64,
    pub feas_tol: f64,
    pub cert_tol: f64,
    /// Retry once at `order + 1` when the first solve is not certified.
    pub retry_higher_order: bool,
}

impl Default for PopOptions {
    fn default() -> Self {
        PopOptions {
            sdp: SolverOptions::default(),
            rank_tol: 1e-6,
            feas_tol: 1e-6,
            cert_tol: 1e-6,
            retry_higher_order: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PopResult {
    /// Lower bound (minimization) or upper bound (maximization) on the
    /// optimum; `None` when the relaxation did not solve to optimality.
    pub bound: Option<f64>,
    pub point: Option<Vec<f64>>,
    pub certified: bool,
    pub order_used: u32,
    /// `(rank M_t, rank M_{t-1})`
    pub flatness_ranks: (usize, usize),
    pub solver_status: SdpStatus,
    pub iterations: usize,
}

impl PopResult {
    pub fn is_flat(&self) -> bool {
        self.flatness_ranks.0 == self.flatness_ranks.1
    }
}

fn solve_at(pop: &Pop, order: u32, opts: &PopOptions) -> Result<PopResult> {
    let rel = match build_relaxation(pop, order) {
        Ok(r) => r,
        Err(Error::Infeasible(_)) => {
            return Ok(PopResult {
                bound: None,
                point: None,
                certified: false,
                order_used: order,
                flatness_ranks: (0, 0),
                solver_status: SdpStatus::Infeasible,
                iterations: 0,
            })
        }
        Err(e) => return Err(e),
    };
    let Some(sdp) = rel.sdp() else {
        return Ok(fixed_moments(pop, &rel, opts));
    };
    let sol = sdp_solve(sdp, &opts.sdp)?;
    let mut result = PopResult {
        bound: None,
        point: None,
        certified: false,
        order_used: order,
        flatness_ranks: (0, 0),
        solver_status: sol.status,
        iterations: sol.iterations,
    };
    // The SDP is the dual of a minimization of <C, X>; a primal-infeasible
    // SDP means the moment side is unbounded and vice versa.
    result.solver_status = match sol.status {
        SdpStatus::Infeasible => SdpStatus::Unbounded,
        SdpStatus::Unbounded => SdpStatus::Infeasible,
        s => s,
    };
    if sol.status != SdpStatus::Optimal {
        return Ok(result);
    }
    // the relaxation optimum lies between dual_obj and primal_obj; take the
    // conservative end
    let opt = sol.primal_obj.max(sol.dual_obj);
    let offset = rel.objective_offset();
    result.bound = Some(match pop.sense {
        Sense::Min => offset - opt,
        Sense::Max => offset + opt,
    });
    let (point, ranks) = extract_point(&sol, &rel, opts.rank_tol);
    result.point = Some(point);
    result.flatness_ranks = ranks;
    result.certified = certify_with(&result, pop, opts.feas_tol, opts.cert_tol);
    Ok(result)
}

/// Equalities pin every moment: the relaxation is feasible exactly when the
/// pinned blocks are positive semidefinite.
fn fixed_moments(pop: &Pop, rel: &MomentRelaxation, opts: &PopOptions) -> PopResult {
    let y = rel.moments(&[]);
    let psd = rel.blocks_at(&y).iter().all(|b| {
        let scale = b.amax().max(1.0);
        b.clone().symmetric_eigenvalues().min() >= -opts.feas_tol * scale
    });
    let mut result = PopResult {
        bound: None,
        point: None,
        certified: false,
        order_used: rel.order(),
        flatness_ranks: (0, 0),
        solver_status: SdpStatus::Infeasible,
        iterations: 0,
    };
    if psd {
        let (point, ranks) = extract_from_moments(&y, rel, opts.rank_tol);
        result.solver_status = SdpStatus::Optimal;
        result.bound = Some(rel.objective_offset());
        result.point = Some(point);
        result.flatness_ranks = ranks;
        result.certified = certify_with(&result, pop, opts.feas_tol, opts.cert_tol);
    }
    result
}

/// Solves the order-`order` relaxation and extracts a candidate point.
pub fn pop_bound(pop: &Pop, order: u32, opts: &PopOptions) -> Result<PopResult> {
    let first = solve_at(pop, order, opts)?;
    if opts.retry_higher_order && !first.certified {
        return solve_at(pop, order + 1, opts);
    }
    Ok(first)
}

fn certify_with(result: &PopResult, pop: &Pop, feas_tol: f64, cert_tol: f64) -> bool {
    if result.solver_status != SdpStatus::Optimal {
        return false;
    }
    let (Some(bound), Some(x)) = (result.bound, result.point.as_ref()) else {
        return false;
    };
    let Ok(viol) = pop.violation(x) else {
        return false;
    };
    let Ok(val) = pop.objective.eval(x) else {
        return false;
    };
    viol <= feas_tol && (val - bound).abs() <= cert_tol * (1.0 + bound.abs())
}

/// True when the extracted point is feasible and attains the relaxation
/// bound, which proves it globally optimal.
pub fn certify(result: &PopResult, pop: &Pop) -> bool {
    let d = PopOptions::default();
    certify_with(result, pop, d.feas_tol, d.cert_tol)
}
