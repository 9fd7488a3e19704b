//! Dense block-diagonal semidefinite programming.
//!
//! Problems are stated in standard primal form
//!
//! ```text
//!   minimize    <C, X>
//!   subject to  <A_i, X> = b_i,   i = 1..m
//!               X ⪰ 0  (block diagonal)
//! ```
//!
//! with dual `maximize b'y  s.t.  C - Σ y_i A_i = S ⪰ 0`. Blocks of
//! dimension one encode nonnegative scalars.

mod sdpa;
mod solver;

pub use sdpa::write_sdpa;
pub use solver::sdp_solve;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense symmetric matrix; writes always mirror across the diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct SymBlock {
    m: DMatrix<f64>,
}

impl SymBlock {
    pub fn zeros(dim: usize) -> Self {
        SymBlock {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        SymBlock {
            m: DMatrix::identity(dim, dim),
        }
    }

    /// Symmetrizes `m` as `(m + m') / 2`.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidProblem(format!(
                "block is {}x{}, not square",
                m.nrows(),
                m.ncols()
            )));
        }
        let s = (&m + m.transpose()) * 0.5;
        Ok(SymBlock { m: s })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.m[(i, j)] = v;
        self.m[(j, i)] = v;
    }

    /// Adds `v` at `(i, j)` and, off the diagonal, at `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.m[(i, j)] += v;
        if i != j {
            self.m[(j, i)] += v;
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn is_zero(&self) -> bool {
        self.m.iter().all(|&v| v == 0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        SymmetricEigen::new(self.m.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// One equality constraint `<A, X> = b`.
#[derive(Clone, Debug)]
pub struct SdpConstraint {
    pub a: Vec<SymBlock>,
    pub b: f64,
}

#[derive(Clone, Debug)]
pub struct SdpProblem {
    block_dims: Vec<usize>,
    c: Vec<SymBlock>,
    constraints: Vec<SdpConstraint>,
}

impl SdpProblem {
    pub fn new(block_dims: Vec<usize>, c: Vec<SymBlock>, constraints: Vec<SdpConstraint>) -> Result<Self> {
        if block_dims.is_empty() || block_dims.contains(&0) {
            return Err(Error::InvalidProblem("block dimensions must be positive".into()));
        }
        if constraints.is_empty() {
            return Err(Error::InvalidProblem("at least one constraint is required".into()));
        }
        let conforms = |blocks: &[SymBlock]| {
            blocks.len() == block_dims.len() && blocks.iter().zip(&block_dims).all(|(b, &d)| b.dim() == d)
        };
        if !conforms(&c) {
            return Err(Error::InvalidProblem("objective does not match block dimensions".into()));
        }
        for (i, con) in constraints.iter().enumerate() {
            if !conforms(&con.a) {
                return Err(Error::InvalidProblem(format!(
                    "constraint {i} does not match block dimensions"
                )));
            }
            if !con.b.is_finite() {
                return Err(Error::InvalidProblem(format!("constraint {i} has non-finite rhs")));
            }
        }
        Ok(SdpProblem {
            block_dims,
            c,
            constraints,
        })
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn objective(&self) -> &[SymBlock] {
        &self.c
    }

    pub fn constraints(&self) -> &[SdpConstraint] {
        &self.constraints
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdpStatus {
    Optimal,
    /// The primal problem has no feasible point.
    Infeasible,
    /// The primal objective is unbounded below.
    Unbounded,
    NumericalTrouble,
    IterLimit,
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub gap_tol: f64,
    /// When the iteration stalls, the best iterate seen is still reported
    /// as optimal if its residuals and gap are below this.
    pub reduced_tol: f64,
    pub max_iter: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    /// When set, the problem is written in SDPA sparse format before solving.
    pub dump_path: Option<std::path::PathBuf>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            reduced_tol: 1e-5,
            max_iter: 200,
            step_fraction: 0.98,
            dump_path: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub x: Vec<SymBlock>,
    pub y: Vec<f64>,
    pub s: Vec<SymBlock>,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub status: SdpStatus,
    pub iterations: usize,
}

/// Residuals of the optimality conditions at a solution.
#[derive(Clone, Copy, Debug)]
pub struct KktReport {
    /// max_i |<A_i, X> - b_i|
    pub primal_residual: f64,
    /// max entry of |C - Σ y_i A_i - S| divided by 1 + max |C|
    pub dual_residual: f64,
    /// <X, S> divided by the total block size
    pub complementarity: f64,
    pub min_eig_x: f64,
    pub min_eig_s: f64,
}

pub(crate) fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

impl SdpSolution {
    pub fn kkt(&self, p: &SdpProblem) -> KktReport {
        let primal_residual = p
            .constraints
            .iter()
            .map(|con| {
                let ax: f64 = con.a.iter().zip(&self.x).map(|(a, x)| inner(&a.m, &x.m)).sum();
                (ax - con.b).abs()
            })
            .fold(0.0, f64::max);
        let c_scale = 1.0
            + p.c
                .iter()
                .flat_map(|b| b.m.iter())
                .fold(0.0f64, |acc, v| acc.max(v.abs()));
        let mut dual_residual = 0.0f64;
        for k in 0..p.block_dims.len() {
            let mut r = &p.c[k].m - &self.s[k].m;
            for (con, &yi) in p.constraints.iter().zip(&self.y) {
                r -= &con.a[k].m * yi;
            }
            dual_residual = dual_residual.max(r.amax() / c_scale);
        }
        let n_total: usize = p.block_dims.iter().sum();
        let xs: f64 = self.x.iter().zip(&self.s).map(|(x, s)| inner(&x.m, &s.m)).sum();
        KktReport {
            primal_residual,
            dual_residual,
            complementarity: xs / n_total as f64,
            min_eig_x: self.x.iter().map(SymBlock::min_eigenvalue).fold(f64::INFINITY, f64::min),
            min_eig_s: self.s.iter().map(SymBlock::min_eigenvalue).fold(f64::INFINITY, f64::min),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symblock_mirrors_writes() {
        let mut b = SymBlock::zeros(3);
        b.add(0, 2, 1.5);
        b.add(1, 1, 2.0);
        b.set(2, 1, -1.0);
        assert_eq!(b.get(2, 0), 1.5);
        assert_eq!(b.get(1, 1), 2.0);
        assert_eq!(b.get(1, 2), -1.0);
        assert_eq!(b.matrix(), &b.matrix().transpose());
    }

    #[test]
    fn rejects_nonconforming_blocks() {
        let c = vec![SymBlock::zeros(2)];
        let bad = SdpConstraint {
            a: vec![SymBlock::zeros(3)],
            b: 1.0,
        };
        assert!(SdpProblem::new(vec![2], c.clone(), vec![bad]).is_err());
        assert!(SdpProblem::new(vec![2], c, vec![]).is_err());
    }
}
