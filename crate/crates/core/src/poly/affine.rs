use super::{Monomial, Polynomial};
use crate::error::{Error, Result};

/// Residual size below which an equality that collapsed to a constant is
/// considered satisfied.
const CONSTANT_TOL: f64 = 1e-9;

/// Removes variables fixed by affine equalities `a·x + c = 0` through
/// substitution.
///
/// The remaining ("reduced") variables are a subset of the original ones and
/// every original coordinate is an affine function of them.
#[derive(Clone, Debug)]
pub struct AffineReduction {
    n_orig: usize,
    kept: Vec<usize>,
    map: Vec<Polynomial>,
}

impl AffineReduction {
    pub fn identity(n_vars: usize) -> Self {
        AffineReduction {
            n_orig: n_vars,
            kept: (0..n_vars).collect(),
            map: (0..n_vars).map(|i| Polynomial::var(n_vars, i)).collect(),
        }
    }

    /// Eliminates one variable per affine equality and returns the remaining
    /// (nonlinear) equalities expressed in the reduced variables. At least
    /// one variable is always kept.
    pub fn from_equalities(n_vars: usize, equalities: &[Polynomial]) -> Result<(Self, Vec<Polynomial>)> {
        let mut red = Self::identity(n_vars);
        let mut eqs: Vec<Polynomial> = equalities.to_vec();
        loop {
            eqs = red.drop_constants(eqs)?;
            if red.kept.len() <= 1 {
                break;
            }
            let Some(pos) = eqs.iter().position(|h| h.degree() == 1) else {
                break;
            };
            let h = eqs.remove(pos);
            let n_cur = red.kept.len();
            let (k, a_k) = (0..n_cur)
                .map(|i| (i, h.coeff(&Monomial::var(n_cur, i))))
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .expect("at least one variable");
            // x_k = -(h - a_k x_k) / a_k, written in the n_cur - 1 survivors
            let rest = &h - &Polynomial::var(n_cur, k).scale(a_k);
            let expr = rest.scale(-1.0 / a_k);
            let shrink: Vec<Polynomial> = (0..n_cur)
                .map(|i| match i.cmp(&k) {
                    std::cmp::Ordering::Less => Polynomial::var(n_cur - 1, i),
                    std::cmp::Ordering::Greater => Polynomial::var(n_cur - 1, i - 1),
                    // placeholder; k never appears in `expr`
                    std::cmp::Ordering::Equal => Polynomial::zero(n_cur - 1),
                })
                .collect();
            let expr = expr.compose(&shrink)?;
            let mut subs = shrink;
            subs[k] = expr;
            red.map = red
                .map
                .iter()
                .map(|p| p.compose(&subs))
                .collect::<Result<_>>()?;
            eqs = eqs.iter().map(|p| p.compose(&subs)).collect::<Result<_>>()?;
            red.kept.remove(k);
        }
        Ok((red, eqs))
    }

    fn drop_constants(&self, eqs: Vec<Polynomial>) -> Result<Vec<Polynomial>> {
        let mut out = Vec::with_capacity(eqs.len());
        for h in eqs {
            if h.degree() == 0 {
                let c = h.coeff(&Monomial::one(h.n_vars()));
                if c.abs() > CONSTANT_TOL {
                    return Err(Error::Infeasible(format!(
                        "affine equalities are inconsistent (residual {c:e})"
                    )));
                }
            } else {
                out.push(h);
            }
        }
        Ok(out)
    }

    pub fn n_original(&self) -> usize {
        self.n_orig
    }

    pub fn n_reduced(&self) -> usize {
        self.kept.len()
    }

    /// Original indices of the reduced variables, in order.
    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    /// Original coordinates as affine polynomials in the reduced variables.
    pub fn map(&self) -> &[Polynomial] {
        &self.map
    }

    /// Rewrites a polynomial in original variables over the reduced ones.
    pub fn apply(&self, p: &Polynomial) -> Result<Polynomial> {
        p.compose(&self.map)
    }

    /// Maps a reduced point back to the original coordinates.
    pub fn lift(&self, reduced: &[f64]) -> Vec<f64> {
        self.map.iter().map(|p| p.eval_unchecked(reduced)).collect()
    }

    /// Projects an original point onto the reduced coordinates.
    pub fn project(&self, original: &[f64]) -> Vec<f64> {
        self.kept.iter().map(|&i| original[i]).collect()
    }
}
