//! Infeasible-start primal-dual interior-point method.
//!
//! Search direction is the HKM one (`X ΔS S^{-1}` symmetrized), with a
//! Mehrotra predictor-corrector step and separate primal/dual step lengths.
//! The Schur complement `M_ij = tr(A_i X A_j S^{-1})` is assembled from the
//! sparsity pattern of each `A_i` and factored densely.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use super::{inner, SdpProblem, SdpSolution, SdpStatus, SolverOptions, SymBlock};
use crate::error::{Error, Result};

/// Consecutive near-zero steps tolerated before giving up.
const MAX_STALLS: usize = 3;
const STALL_STEP: f64 = 1e-9;
const SCHUR_REG: f64 = 1e-12;
const SCHUR_REG_MAX: f64 = 1e-6;
const REFINE_STEPS: usize = 2;

/// Nonzeros of one constraint matrix restricted to one block.
struct ConBlock {
    con: usize,
    /// (row, col, value) for both triangles.
    entries: Vec<(usize, usize, f64)>,
    cols: Vec<usize>,
}

struct BlockData {
    dim: usize,
    c: DMatrix<f64>,
    cons: Vec<ConBlock>,
}

#[derive(Clone)]
struct Iterate {
    x: Vec<DMatrix<f64>>,
    s: Vec<DMatrix<f64>>,
    y: DVector<f64>,
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dy: DVector<f64>,
    ds: Vec<DMatrix<f64>>,
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest `alpha` with `x + alpha dx ⪰ 0`, or `None` when `x` itself is not
/// numerically positive definite.
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> Option<f64> {
    if x.nrows() == 1 {
        let (v, d) = (x[(0, 0)], dx[(0, 0)]);
        if v <= 0.0 {
            return None;
        }
        return Some(if d < 0.0 { -v / d } else { f64::INFINITY });
    }
    let chol = Cholesky::new(x.clone())?;
    let l = chol.l();
    let a = l.solve_lower_triangular(dx)?;
    let w = l.solve_lower_triangular(&a.transpose())?;
    let lmin = SymmetricEigen::new(sym(&w))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Some(if lmin < 0.0 { -1.0 / lmin } else { f64::INFINITY })
}

fn inverse_spd(s: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if s.nrows() == 1 {
        let v = s[(0, 0)];
        return (v > 0.0).then(|| DMatrix::from_element(1, 1, 1.0 / v));
    }
    let chol = Cholesky::new(s.clone())?;
    Some(sym(&chol.inverse()))
}

/// Cholesky factor of the (possibly regularized) Schur complement, kept
/// with the original matrix for iterative refinement.
struct SchurFactor {
    mat: DMatrix<f64>,
    chol: Cholesky<f64, nalgebra::Dyn>,
}

impl SchurFactor {
    fn new(mat: DMatrix<f64>) -> Option<Self> {
        if let Some(chol) = Cholesky::new(mat.clone()) {
            return Some(SchurFactor { mat, chol });
        }
        let scale = mat.diagonal().iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let mut shift = SCHUR_REG;
        while shift <= SCHUR_REG_MAX {
            let mut reg = mat.clone();
            for i in 0..reg.nrows() {
                reg[(i, i)] += shift * scale;
            }
            if let Some(chol) = Cholesky::new(reg) {
                return Some(SchurFactor { mat, chol });
            }
            shift *= 100.0;
        }
        None
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut x = self.chol.solve(rhs);
        for _ in 0..REFINE_STEPS {
            let r = rhs - &self.mat * &x;
            x += self.chol.solve(&r);
        }
        x
    }
}

struct Workspace {
    blocks: Vec<BlockData>,
    b: DVector<f64>,
    m: usize,
    n_total: usize,
}

impl Workspace {
    fn new(p: &SdpProblem) -> Self {
        let m = p.n_constraints();
        let blocks = p
            .block_dims()
            .iter()
            .enumerate()
            .map(|(k, &dim)| {
                let cons = p
                    .constraints()
                    .iter()
                    .enumerate()
                    .filter_map(|(i, con)| {
                        let a = con.a[k].matrix();
                        let mut entries = Vec::new();
                        for q in 0..dim {
                            for r in 0..dim {
                                let v = a[(r, q)];
                                if v != 0.0 {
                                    entries.push((r, q, v));
                                }
                            }
                        }
                        if entries.is_empty() {
                            return None;
                        }
                        let mut cols: Vec<usize> = entries.iter().map(|e| e.1).collect();
                        cols.dedup();
                        Some(ConBlock { con: i, entries, cols })
                    })
                    .collect();
                BlockData {
                    dim,
                    c: p.objective()[k].matrix().clone(),
                    cons,
                }
            })
            .collect();
        Workspace {
            blocks,
            b: DVector::from_iterator(m, p.constraints().iter().map(|c| c.b)),
            m,
            n_total: p.block_dims().iter().sum(),
        }
    }

    /// `A(X)_i = Σ_k <A_i^k, X_k>`
    fn a_op(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for (blk, xk) in self.blocks.iter().zip(x) {
            for cb in &blk.cons {
                out[cb.con] += cb.entries.iter().map(|&(r, q, v)| v * xk[(r, q)]).sum::<f64>();
            }
        }
        out
    }

    /// `Σ_i y_i A_i^k` for block `k`.
    fn a_adj(&self, k: usize, y: &DVector<f64>) -> DMatrix<f64> {
        let blk = &self.blocks[k];
        let mut out = DMatrix::zeros(blk.dim, blk.dim);
        for cb in &blk.cons {
            let yi = y[cb.con];
            if yi != 0.0 {
                for &(r, q, v) in &cb.entries {
                    out[(r, q)] += yi * v;
                }
            }
        }
        out
    }

    fn initial_point(&self) -> Iterate {
        let mut x = Vec::with_capacity(self.blocks.len());
        let mut s = Vec::with_capacity(self.blocks.len());
        for blk in &self.blocks {
            let n = blk.dim as f64;
            let mut xi = 10.0f64.max(n.sqrt());
            let mut eta = 10.0f64.max(n.sqrt()).max(blk.c.norm());
            for cb in &blk.cons {
                let a_norm = cb.entries.iter().map(|e| e.2 * e.2).sum::<f64>().sqrt();
                xi = xi.max(n.sqrt() * (1.0 + self.b[cb.con].abs()) / (1.0 + a_norm));
                eta = eta.max(a_norm);
            }
            x.push(DMatrix::identity(blk.dim, blk.dim) * xi);
            s.push(DMatrix::identity(blk.dim, blk.dim) * eta);
        }
        Iterate {
            x,
            s,
            y: DVector::zeros(self.m),
        }
    }

    fn schur(&self, it: &Iterate, sinv: &[DMatrix<f64>]) -> DMatrix<f64> {
        let mut mat = DMatrix::zeros(self.m, self.m);
        for (k, blk) in self.blocks.iter().enumerate() {
            let n = blk.dim;
            let x = &it.x[k];
            let si = &sinv[k];
            if n == 1 {
                let f = x[(0, 0)] * si[(0, 0)];
                for (jj, cj) in blk.cons.iter().enumerate() {
                    let aj = cj.entries[0].2;
                    for ci in &blk.cons[..=jj] {
                        mat[(ci.con, cj.con)] += ci.entries[0].2 * aj * f;
                    }
                }
                continue;
            }
            let mut xa = DMatrix::zeros(n, n);
            let mut g = DMatrix::zeros(n, n);
            for (jj, cj) in blk.cons.iter().enumerate() {
                xa.fill(0.0);
                for &(p, q, a) in &cj.entries {
                    for r in 0..n {
                        xa[(r, q)] += a * x[(r, p)];
                    }
                }
                g.fill(0.0);
                for &q in &cj.cols {
                    for s in 0..n {
                        let sv = si[(q, s)];
                        if sv == 0.0 {
                            continue;
                        }
                        for r in 0..n {
                            g[(r, s)] += xa[(r, q)] * sv;
                        }
                    }
                }
                for ci in &blk.cons[..=jj] {
                    let v: f64 = ci.entries.iter().map(|&(p, q, a)| a * g[(q, p)]).sum();
                    mat[(ci.con, cj.con)] += v;
                }
            }
        }
        // only the upper triangle (row <= col in block order) was filled;
        // constraint indices may be out of order, so fold both halves
        for i in 0..self.m {
            for j in (i + 1)..self.m {
                let v = mat[(i, j)] + mat[(j, i)];
                mat[(i, j)] = v;
                mat[(j, i)] = v;
            }
        }
        mat
    }

    fn direction(
        &self,
        schur: &SchurFactor,
        it: &Iterate,
        sinv: &[DMatrix<f64>],
        rp: &DVector<f64>,
        rd: &[DMatrix<f64>],
        p_mat: &[DMatrix<f64>],
    ) -> Direction {
        let mut rhs = rp.clone();
        for (k, blk) in self.blocks.iter().enumerate() {
            let t = &p_mat[k] - &it.x[k] * &rd[k] * &sinv[k];
            for cb in &blk.cons {
                rhs[cb.con] -= cb.entries.iter().map(|&(r, q, v)| v * t[(r, q)]).sum::<f64>();
            }
        }
        let dy = schur.solve(&rhs);
        let mut dx = Vec::with_capacity(self.blocks.len());
        let mut ds = Vec::with_capacity(self.blocks.len());
        for k in 0..self.blocks.len() {
            let dsk = &rd[k] - self.a_adj(k, &dy);
            let dxk = &p_mat[k] - sym(&(&it.x[k] * &dsk * &sinv[k]));
            dx.push(dxk);
            ds.push(dsk);
        }
        Direction { dx, dy, ds }
    }

    fn step_lengths(&self, it: &Iterate, d: &Direction) -> Option<(f64, f64)> {
        let mut ap = f64::INFINITY;
        let mut ad = f64::INFINITY;
        for k in 0..self.blocks.len() {
            ap = ap.min(max_step(&it.x[k], &d.dx[k])?);
            ad = ad.min(max_step(&it.s[k], &d.ds[k])?);
        }
        Some((ap, ad))
    }

    fn run(&self, opts: &SolverOptions) -> SdpSolution {
        let nb = self.blocks.len();
        let b_norm = self.b.norm();
        let c_norm = self.blocks.iter().map(|b| b.c.norm_squared()).sum::<f64>().sqrt();
        let mut it = self.initial_point();
        let mut status = SdpStatus::IterLimit;
        let mut stalls = 0;
        let mut iterations = 0;
        let (mut pobj, mut dobj) = (f64::NAN, f64::NAN);
        // (merit, iterate, pobj, dobj) of the best reduced-accuracy iterate
        let mut best: Option<(f64, Iterate, f64, f64)> = None;

        for iter in 0..=opts.max_iter {
            iterations = iter;
            let rp = &self.b - self.a_op(&it.x);
            let rd: Vec<DMatrix<f64>> = (0..nb)
                .map(|k| &self.blocks[k].c - &it.s[k] - self.a_adj(k, &it.y))
                .collect();
            pobj = (0..nb).map(|k| inner(&self.blocks[k].c, &it.x[k])).sum();
            dobj = self.b.dot(&it.y);
            let xs: f64 = (0..nb).map(|k| inner(&it.x[k], &it.s[k])).sum();
            let mu = xs / self.n_total as f64;
            let rd_norm = rd.iter().map(|r| r.norm_squared()).sum::<f64>().sqrt();
            let pinf = rp.norm() / (1.0 + b_norm);
            let dinf = rd_norm / (1.0 + c_norm);
            let gap = (pobj - dobj).abs() / (1.0 + pobj.abs());
            let comp = xs / (1.0 + pobj.abs() + dobj.abs());

            if !(pobj.is_finite() && dobj.is_finite() && mu.is_finite()) {
                status = SdpStatus::NumericalTrouble;
                break;
            }
            if pinf <= opts.feas_tol && dinf <= opts.feas_tol && gap <= opts.gap_tol && comp <= opts.gap_tol {
                status = SdpStatus::Optimal;
                break;
            }
            let merit = pinf.max(dinf).max(gap).max(comp);
            if merit <= opts.reduced_tol && best.as_ref().is_none_or(|b| merit < b.0) {
                best = Some((merit, it.clone(), pobj, dobj));
            }
            // certificates: b'y > 0 with A*(y) ⪯ 0, or <C,X> < 0 with A(X) = 0
            if dobj > 0.0 {
                let aty_plus_s: f64 = (0..nb)
                    .map(|k| (&self.blocks[k].c - &rd[k]).norm_squared())
                    .sum::<f64>()
                    .sqrt();
                if aty_plus_s / dobj < opts.feas_tol {
                    status = SdpStatus::Infeasible;
                    break;
                }
            }
            if pobj < 0.0 && (&self.b - &rp).norm() / -pobj < opts.feas_tol {
                status = SdpStatus::Unbounded;
                break;
            }
            if iter == opts.max_iter {
                break;
            }

            let Some(sinv) = (0..nb).map(|k| inverse_spd(&it.s[k])).collect::<Option<Vec<_>>>() else {
                status = SdpStatus::NumericalTrouble;
                break;
            };
            let Some(chol) = SchurFactor::new(self.schur(&it, &sinv)) else {
                status = SdpStatus::NumericalTrouble;
                break;
            };

            // predictor
            let p_aff: Vec<DMatrix<f64>> = it.x.iter().map(|x| -x).collect();
            let aff = self.direction(&chol, &it, &sinv, &rp, &rd, &p_aff);
            let Some((ap, ad)) = self.step_lengths(&it, &aff) else {
                status = SdpStatus::NumericalTrouble;
                break;
            };
            let (ap, ad) = (ap.min(1.0), ad.min(1.0));
            let mu_aff: f64 = (0..nb)
                .map(|k| inner(&(&it.x[k] + &aff.dx[k] * ap), &(&it.s[k] + &aff.ds[k] * ad)))
                .sum::<f64>()
                / self.n_total as f64;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            // corrector
            let p_cor: Vec<DMatrix<f64>> = (0..nb)
                .map(|k| {
                    let second = &aff.dx[k] * &aff.ds[k] * &sinv[k];
                    &sinv[k] * (sigma * mu) - &it.x[k] - sym(&second)
                })
                .collect();
            let dir = self.direction(&chol, &it, &sinv, &rp, &rd, &p_cor);
            let Some((ap, ad)) = self.step_lengths(&it, &dir) else {
                status = SdpStatus::NumericalTrouble;
                break;
            };
            let ap = (opts.step_fraction * ap).min(1.0);
            let ad = (opts.step_fraction * ad).min(1.0);
            if ap < STALL_STEP && ad < STALL_STEP {
                stalls += 1;
                if stalls >= MAX_STALLS {
                    status = SdpStatus::NumericalTrouble;
                    break;
                }
            } else {
                stalls = 0;
            }
            for k in 0..nb {
                it.x[k] = sym(&(&it.x[k] + &dir.dx[k] * ap));
                it.s[k] = sym(&(&it.s[k] + &dir.ds[k] * ad));
            }
            it.y += &dir.dy * ad;
        }

        let stalled = matches!(status, SdpStatus::NumericalTrouble | SdpStatus::IterLimit);
        if let (true, Some((_, b, p, d))) = (stalled, best) {
            (it, pobj, dobj, status) = (b, p, d, SdpStatus::Optimal);
        }
        SdpSolution {
            x: it.x.into_iter().map(|m| SymBlock { m }).collect(),
            y: it.y.iter().copied().collect(),
            s: it.s.into_iter().map(|m| SymBlock { m }).collect(),
            primal_obj: pobj,
            dual_obj: dobj,
            status,
            iterations,
        }
    }
}

/// Solves `p`; solver breakdowns are reported through the status, never as
/// an `Err`. Errors are reserved for invalid options or a failed dump.
pub fn sdp_solve(p: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    if !(opts.feas_tol > 0.0 && opts.gap_tol > 0.0) {
        return Err(Error::InvalidProblem("solver tolerances must be positive".into()));
    }
    if !(opts.step_fraction > 0.0 && opts.step_fraction < 1.0) {
        return Err(Error::InvalidProblem("step fraction must lie in (0, 1)".into()));
    }
    if let Some(path) = &opts.dump_path {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        super::write_sdpa(p, &mut f)?;
    }
    Ok(Workspace::new(p).run(opts))
}
