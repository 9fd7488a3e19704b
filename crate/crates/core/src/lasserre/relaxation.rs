use nalgebra::DMatrix;

use super::{Pop, Sense};
use crate::error::{Error, Result};
use crate::poly::{basis, basis_len, monomial_index, AffineReduction, Monomial, Polynomial};
use crate::sdp::{SdpConstraint, SdpProblem, SdpSolution, SymBlock};

/// Pivot magnitude below which an equality row counts as dependent.
const PIVOT_TOL: f64 = 1e-10;
/// Residual of a dependent equality row above which the moment equalities
/// are inconsistent.
const INCONSISTENT_TOL: f64 = 1e-8;
/// Relative eigenvalue of `K K'` below which a direction is outside the kernel.
const FACE_TOL: f64 = 1e-12;

/// `(row, col, moment index, coefficient)` with `row <= col`.
type BlockTerm = (usize, usize, usize, f64);

/// The order-`t` moment relaxation of a [`Pop`].
///
/// Internally the problem is rewritten before relaxing: variables fixed by
/// affine equalities are substituted away and the survivors are mapped
/// affinely onto `[-1, 1]` when the pop carries variable ranges. The moment
/// sequence `y` is indexed by `basis(n_reduced, 2t)` in those coordinates,
/// and the remaining (nonlinear) equalities become linear constraints on `y`
/// that are eliminated before the SDP is formed. The SDP's dual vector holds
/// the free moments.
#[derive(Clone, Debug)]
pub struct MomentRelaxation {
    order: u32,
    pop: Pop,
    n_red: usize,
    /// Original coordinates as affine polynomials in the scaled reduced ones.
    lift: Vec<Polynomial>,
    /// Per reduced variable: (original index, center, half-width).
    coords: Vec<(usize, f64, f64)>,
    moment_basis: Vec<Monomial>,
    /// `y = y_const + Σ_j y_lin[α][j] z_j`
    y_const: Vec<f64>,
    y_lin: Vec<Vec<(usize, f64)>>,
    n_free: usize,
    /// Objective coefficients per moment, in scaled reduced coordinates.
    objective: Vec<f64>,
    block_terms: Vec<Vec<BlockTerm>>,
    block_dims: Vec<usize>,
    /// Equality rows `Σ_α row[α] y_α = 0`, kept for residual checks.
    equality_rows: Vec<Vec<(usize, f64)>>,
    sdp: Option<SdpProblem>,
}

fn normalized(p: &Polynomial) -> Polynomial {
    let m = p.terms().fold(0.0f64, |a, (_, c)| a.max(c.abs()));
    if m > 0.0 {
        p.scale(1.0 / m)
    } else {
        p.clone()
    }
}

/// Sparse row `(moment index, coefficient)` pairs.
type SparseRow = Vec<(usize, f64)>;

/// Reduced row echelon elimination of `rows · y = 0` with `y_0 = 1` fixed.
/// Returns `(y_const, y_lin, n_free)`.
fn eliminate(rows: &[SparseRow], n_moments: usize) -> Result<(Vec<f64>, Vec<SparseRow>, usize)> {
    // dense rows over moments 1..n, plus a rhs column
    let mut mat: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    let mut rhs: Vec<f64> = Vec::with_capacity(rows.len());
    for row in rows {
        let mut dense = vec![0.0; n_moments];
        let mut r = 0.0;
        for &(a, v) in row {
            if a == 0 {
                r -= v;
            } else {
                dense[a] += v;
            }
        }
        mat.push(dense);
        rhs.push(r);
    }
    let mut pivot_of_row: Vec<Option<usize>> = vec![None; mat.len()];
    let mut is_pivot = vec![false; n_moments];
    for r in 0..mat.len() {
        let max = (1..n_moments).map(|c| mat[r][c].abs()).fold(0.0, f64::max);
        if max < PIVOT_TOL {
            if rhs[r].abs() > INCONSISTENT_TOL {
                return Err(Error::Infeasible("moment equalities are inconsistent".into()));
            }
            continue;
        }
        // prefer the highest-degree column among the well-sized candidates
        let col = (1..n_moments)
            .rev()
            .find(|&c| !is_pivot[c] && mat[r][c].abs() >= 0.5 * max)
            .expect("a pivot column exists");
        let pv = mat[r][col];
        for v in mat[r].iter_mut() {
            *v /= pv;
        }
        rhs[r] /= pv;
        let pivot_row = mat[r].clone();
        for q in 0..mat.len() {
            if q == r {
                continue;
            }
            let f = mat[q][col];
            if f != 0.0 {
                for (dst, &src) in mat[q].iter_mut().zip(&pivot_row) {
                    *dst -= f * src;
                }
                mat[q][col] = 0.0;
                rhs[q] -= f * rhs[r];
            }
        }
        pivot_of_row[r] = Some(col);
        is_pivot[col] = true;
    }
    let mut free_index = vec![usize::MAX; n_moments];
    let mut n_free = 0;
    for (c, fi) in free_index.iter_mut().enumerate().skip(1) {
        if !is_pivot[c] {
            *fi = n_free;
            n_free += 1;
        }
    }
    let mut y_const = vec![0.0; n_moments];
    let mut y_lin: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_moments];
    y_const[0] = 1.0;
    for c in 1..n_moments {
        if !is_pivot[c] {
            y_lin[c].push((free_index[c], 1.0));
        }
    }
    for (r, piv) in pivot_of_row.iter().enumerate() {
        let Some(p) = *piv else { continue };
        y_const[p] = rhs[r];
        for c in 1..n_moments {
            let v = mat[r][c];
            if c != p && v.abs() > 1e-15 {
                debug_assert!(!is_pivot[c]);
                y_lin[p].push((free_index[c], -v));
            }
        }
    }
    Ok((y_const, y_lin, n_free))
}

/// Every block `B` with basis of degree `tg` satisfies `B v = 0` for the
/// coefficient vectors `v` of `h·m`, `deg(h·m) <= tg`, once the equality rows
/// hold. Returns an orthonormal basis of the complement of those vectors, or
/// `None` when there are none, so that the SDP can be posed on the face where
/// a strictly feasible point exists.
fn face_basis(equalities: &[Polynomial], n_red: usize, tg: u32, dim: usize) -> Option<DMatrix<f64>> {
    let mut kernel: Vec<Vec<f64>> = Vec::new();
    for h in equalities {
        let dh = h.degree();
        if dh > tg {
            continue;
        }
        for m in basis(n_red, tg - dh) {
            let mut v = vec![0.0; dim];
            for (g, c) in h.terms() {
                v[monomial_index(&g.mul(&m), tg).expect("degree within block")] += c;
            }
            kernel.push(v);
        }
    }
    if kernel.is_empty() {
        return None;
    }
    let k = DMatrix::from_fn(dim, kernel.len(), |i, j| kernel[j][i]);
    // the complement is the null space of K K'
    let eig = (&k * k.transpose()).symmetric_eigen();
    let emax = eig.eigenvalues.max();
    let cols: Vec<usize> = (0..dim)
        .filter(|&i| eig.eigenvalues[i] <= FACE_TOL * emax)
        .collect();
    Some(eig.eigenvectors.select_columns(&cols))
}

fn project(b: &SymBlock, q: &DMatrix<f64>) -> SymBlock {
    let mut m = q.transpose() * b.matrix() * q;
    let scale = m.amax();
    m.iter_mut().filter(|v| v.abs() <= 1e-14 * scale).for_each(|v| *v = 0.0);
    SymBlock::from_matrix(m).expect("square by construction")
}

/// Builds the order-`order` moment relaxation of `pop`.
pub fn build_relaxation(pop: &Pop, order: u32) -> Result<MomentRelaxation> {
    pop.validate()?;
    let minimal = pop.minimal_order();
    if order < minimal {
        return Err(Error::OrderTooSmall { given: order, minimal });
    }
    let (reduction, rest_eqs) = AffineReduction::from_equalities(pop.n_vars, &pop.equalities)?;
    let n_red = reduction.n_reduced();

    // u_i in [-1, 1] maps to x_kept[i] = center + half * u_i
    let coords: Vec<(usize, f64, f64)> = reduction
        .kept()
        .iter()
        .map(|&orig| match &pop.scaling {
            Some(r) => {
                let (lo, hi) = r[orig];
                let h = 0.5 * (hi - lo);
                (orig, 0.5 * (hi + lo), if h > 1e-12 { h } else { 1.0 })
            }
            None => (orig, 0.0, 1.0),
        })
        .collect();
    let subs: Vec<Polynomial> = coords
        .iter()
        .enumerate()
        .map(|(i, &(_, c, h))| &Polynomial::constant(n_red, c) + &Polynomial::var(n_red, i).scale(h))
        .collect();
    let lift: Vec<Polynomial> = reduction
        .map()
        .iter()
        .map(|p| p.compose(&subs))
        .collect::<Result<_>>()?;
    let to_scaled = |p: &Polynomial| p.compose(&lift);

    let objective_poly = to_scaled(&pop.objective)?;
    let mut inequalities = Vec::new();
    for g in &pop.inequalities {
        let g = to_scaled(g)?;
        if g.degree() == 0 {
            let c = g.coeff(&Monomial::one(n_red));
            if c < -INCONSISTENT_TOL {
                return Err(Error::Infeasible(format!("constant inequality {c:e} >= 0")));
            }
            continue;
        }
        inequalities.push(normalized(&g));
    }
    let equalities: Vec<Polynomial> = rest_eqs
        .iter()
        .map(|h| h.compose(&subs).map(|p| normalized(&p)))
        .collect::<Result<_>>()?;

    let two_t = 2 * order;
    let moment_basis = basis(n_red, two_t);
    let n_moments = moment_basis.len();
    let idx = |m: &Monomial| monomial_index(m, two_t).expect("degree within relaxation");

    let mut equality_rows = Vec::new();
    for h in &equalities {
        let dh = h.degree();
        for delta in basis(n_red, two_t - dh) {
            let row: Vec<(usize, f64)> = h.terms().map(|(g, c)| (idx(&g.mul(&delta)), c)).collect();
            equality_rows.push(row);
        }
    }
    let (y_const, y_lin, n_free) = eliminate(&equality_rows, n_moments)?;

    let mut objective = vec![0.0; n_moments];
    for (m, c) in objective_poly.terms() {
        objective[idx(m)] += c;
    }

    // moment matrix first, then one localizing matrix per inequality
    let mut block_terms: Vec<Vec<BlockTerm>> = Vec::new();
    let mut block_dims = Vec::new();
    let mut faces = Vec::new();
    let localizers = std::iter::once(Polynomial::constant(n_red, 1.0)).chain(inequalities.iter().cloned());
    for g in localizers {
        let tg = order - g.degree().div_ceil(2);
        let rows = basis(n_red, tg);
        faces.push(face_basis(&equalities, n_red, tg, rows.len()));
        let mut terms = Vec::new();
        for (a, ba) in rows.iter().enumerate() {
            for (b, bb) in rows.iter().enumerate().skip(a) {
                let ab = ba.mul(bb);
                for (m, c) in g.terms() {
                    terms.push((a, b, idx(&ab.mul(m)), c));
                }
            }
        }
        block_dims.push(rows.len());
        block_terms.push(terms);
    }

    // C = F_0 and A_j = -F_j where M(y) = F_0 + Σ_j z_j F_j
    let mut c_blocks: Vec<SymBlock> = block_dims.iter().map(|&d| SymBlock::zeros(d)).collect();
    let mut a_blocks: Vec<Vec<SymBlock>> = (0..n_free)
        .map(|_| block_dims.iter().map(|&d| SymBlock::zeros(d)).collect())
        .collect();
    for (k, terms) in block_terms.iter().enumerate() {
        for &(a, b, m, c) in terms {
            if y_const[m] != 0.0 {
                c_blocks[k].add(a, b, c * y_const[m]);
            }
            for &(j, v) in &y_lin[m] {
                a_blocks[j][k].add(a, b, -c * v);
            }
        }
    }
    let sign = match pop.sense {
        Sense::Min => -1.0,
        Sense::Max => 1.0,
    };
    let mut b = vec![0.0; n_free];
    for (m, &f) in objective.iter().enumerate() {
        if f != 0.0 {
            for &(j, v) in &y_lin[m] {
                b[j] += sign * f * v;
            }
        }
    }
    let kept: Vec<usize> = (0..faces.len())
        .filter(|&k| faces[k].as_ref().is_none_or(|q| q.ncols() > 0))
        .collect();
    let restrict = |blocks: Vec<SymBlock>| -> Vec<SymBlock> {
        kept.iter()
            .map(|&k| match &faces[k] {
                Some(q) => project(&blocks[k], q),
                None => blocks[k].clone(),
            })
            .collect()
    };
    let sdp_dims: Vec<usize> = kept
        .iter()
        .map(|&k| faces[k].as_ref().map_or(block_dims[k], |q| q.ncols()))
        .collect();
    let c_blocks = restrict(c_blocks);
    let constraints = a_blocks
        .into_iter()
        .zip(b)
        .map(|(a, b)| SdpConstraint { a: restrict(a), b })
        .collect();
    // with every moment fixed there is nothing to optimize over
    let sdp = if n_free == 0 {
        None
    } else {
        Some(SdpProblem::new(sdp_dims, c_blocks, constraints)?)
    };

    Ok(MomentRelaxation {
        order,
        pop: pop.clone(),
        n_red,
        lift,
        coords,
        moment_basis,
        y_const,
        y_lin,
        n_free,
        objective,
        block_terms,
        block_dims,
        equality_rows,
        sdp,
    })
}

impl MomentRelaxation {
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn pop(&self) -> &Pop {
        &self.pop
    }

    /// `None` when the equalities fix every moment.
    pub fn sdp(&self) -> Option<&SdpProblem> {
        self.sdp.as_ref()
    }

    /// Variables left after substituting affine equalities.
    pub fn n_reduced(&self) -> usize {
        self.n_red
    }

    /// `basis(n_reduced, 2 * order)`; position `k` holds the monomial of `y[k]`.
    pub fn moment_basis(&self) -> &[Monomial] {
        &self.moment_basis
    }

    pub fn moment_index(&self, m: &Monomial) -> Result<usize> {
        monomial_index(m, 2 * self.order)
    }

    pub fn n_free_moments(&self) -> usize {
        self.n_free
    }

    /// Dimension of the moment matrix, `C(n_reduced + t, t)`.
    pub fn moment_matrix_dim(&self) -> usize {
        self.block_dims[0]
    }

    /// Full moment vector from the SDP dual vector.
    pub fn moments(&self, free: &[f64]) -> Vec<f64> {
        self.y_const
            .iter()
            .zip(&self.y_lin)
            .map(|(&c, lin)| c + lin.iter().map(|&(j, v)| v * free[j]).sum::<f64>())
            .collect()
    }

    /// `Σ_α f_α y_α` for the (scaled, reduced) objective.
    pub fn objective_value(&self, y: &[f64]) -> f64 {
        self.objective.iter().zip(y).map(|(f, v)| f * v).sum()
    }

    /// Objective value at the fixed part of the moment parametrization.
    pub(crate) fn objective_offset(&self) -> f64 {
        self.objective_value(&self.y_const)
    }

    /// Scaled reduced coordinates of an original point.
    pub fn scaled_coordinates(&self, x: &[f64]) -> Vec<f64> {
        self.coords.iter().map(|&(orig, c, h)| (x[orig] - c) / h).collect()
    }

    /// Maps scaled reduced coordinates back to the original variables.
    pub fn lift_point(&self, u: &[f64]) -> Vec<f64> {
        self.lift.iter().map(|p| p.eval_unchecked(u)).collect()
    }

    /// Moment vector of the Dirac measure at an original point.
    pub fn moments_of_point(&self, x: &[f64]) -> Vec<f64> {
        let u = self.scaled_coordinates(x);
        self.moment_basis.iter().map(|m| m.eval(&u)).collect()
    }

    /// Largest violation of the linear equality constraints on `y`.
    pub fn equality_residual(&self, y: &[f64]) -> f64 {
        self.equality_rows
            .iter()
            .map(|row| row.iter().map(|&(a, v)| v * y[a]).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    /// Moment matrix followed by the localizing matrices, evaluated at `y`.
    pub fn blocks_at(&self, y: &[f64]) -> Vec<DMatrix<f64>> {
        self.block_terms
            .iter()
            .zip(&self.block_dims)
            .map(|(terms, &d)| {
                let mut b = SymBlock::zeros(d);
                for &(r, c, m, v) in terms {
                    b.add(r, c, v * y[m]);
                }
                b.matrix().clone()
            })
            .collect()
    }

    /// `M_t(y)`; `M_{t-1}(y)` is its leading principal submatrix of size
    /// `basis_len(n_reduced, t - 1)`.
    pub fn moment_matrix(&self, y: &[f64]) -> DMatrix<f64> {
        let rows = basis(self.n_red, self.order);
        let mut m = DMatrix::zeros(rows.len(), rows.len());
        for (a, ba) in rows.iter().enumerate() {
            for (b, bb) in rows.iter().enumerate() {
                m[(a, b)] = y[monomial_index(&ba.mul(bb), 2 * self.order).expect("in range")];
            }
        }
        m
    }

    pub(crate) fn lower_block_len(&self) -> usize {
        basis_len(self.n_red, self.order - 1)
    }
}

fn numerical_rank(m: &DMatrix<f64>, rank_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rank_tol * max).count()
}

/// Candidate minimizer from the degree-one moments and the ranks of
/// `(M_t, M_{t-1})`.
pub fn extract_point(sol: &SdpSolution, rel: &MomentRelaxation, rank_tol: f64) -> (Vec<f64>, (usize, usize)) {
    extract_from_moments(&rel.moments(&sol.y), rel, rank_tol)
}

pub(crate) fn extract_from_moments(y: &[f64], rel: &MomentRelaxation, rank_tol: f64) -> (Vec<f64>, (usize, usize)) {
    let n = rel.n_reduced();
    let u: Vec<f64> = (0..n)
        .map(|i| y[monomial_index(&Monomial::var(n, i), 2 * rel.order()).expect("degree one")])
        .collect();
    let mt = rel.moment_matrix(y);
    let k = rel.lower_block_len();
    let mt1 = mt.view((0, 0), (k, k)).into_owned();
    (
        rel.lift_point(&u),
        (numerical_rank(&mt, rank_tol), numerical_rank(&mt1, rank_tol)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elimination_recovers_affine_family() {
        // y1 + y2 - y0 = 0, i.e. y2 = 1 - y1 over three moments
        let rows = vec![vec![(1, 1.0), (2, 1.0), (0, -1.0)]];
        let (c, lin, n_free) = eliminate(&rows, 3).unwrap();
        assert_eq!(n_free, 1);
        assert_eq!(c[0], 1.0);
        // pivot is the higher index
        assert_eq!(c[2], 1.0);
        assert_eq!(lin[2], vec![(0, -1.0)]);
        assert_eq!(lin[1], vec![(0, 1.0)]);
    }

    #[test]
    fn elimination_flags_inconsistency() {
        let rows = vec![vec![(1, 1.0)], vec![(1, 1.0), (0, 1.0)]];
        assert!(matches!(eliminate(&rows, 2), Err(Error::Infeasible(_))));
    }
}
