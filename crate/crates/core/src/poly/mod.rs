//! Dense-exponent multivariate polynomials over `f64`.
//!
//! Monomials are ordered graded-lexicographically: first by total degree,
//! then by the exponent of `x_1` (larger first), then `x_2`, and so on. With
//! two variables and degree 2 this gives `1, x1, x2, x1^2, x1*x2, x2^2`.

mod affine;
mod basis;

pub use affine::AffineReduction;
pub use basis::{basis, basis_len, monomial_index};

use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Coefficients with magnitude below this are dropped after arithmetic.
pub const COEFF_EPS: f64 = 1e-14;

/// Exponent vector `x^alpha`, one entry per variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn one(n_vars: usize) -> Self {
        Monomial(vec![0; n_vars])
    }

    /// The monomial `x_i`.
    pub fn var(n_vars: usize, i: usize) -> Self {
        let mut e = vec![0; n_vars];
        e[i] = 1;
        Monomial(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn n_vars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Product of monomials, i.e. exponent-wise sum.
    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.0.len(), other.0.len());
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(point)
            .filter(|(&e, _)| e > 0)
            .map(|(&e, &x)| x.powi(e as i32))
            .product()
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            // larger leading exponents come first within a degree
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A polynomial in `n_vars` variables stored as a sparse term map.
///
/// Canonical form: no stored coefficient is zero (or below [`COEFF_EPS`]).
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    n_vars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(n_vars: usize) -> Self {
        Polynomial {
            n_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n_vars: usize, c: f64) -> Self {
        let mut p = Self::zero(n_vars);
        p.add_term(Monomial::one(n_vars), c);
        p
    }

    /// The coordinate polynomial `x_i`.
    pub fn var(n_vars: usize, i: usize) -> Self {
        let mut p = Self::zero(n_vars);
        p.add_term(Monomial::var(n_vars, i), 1.0);
        p
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs; repeated
    /// monomials are summed.
    pub fn from_terms<I>(n_vars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let mut p = Self::zero(n_vars);
        for (e, c) in terms {
            if e.len() != n_vars {
                return Err(Error::DimensionMismatch {
                    expected: n_vars,
                    found: e.len(),
                });
            }
            p.add_term(Monomial(e), c);
        }
        Ok(p)
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn add_term(&mut self, m: Monomial, c: f64) {
        debug_assert_eq!(m.n_vars(), self.n_vars);
        match self.terms.entry(m) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().abs() < COEFF_EPS {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                if c.abs() >= COEFF_EPS {
                    v.insert(c);
                }
            }
        }
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut out = Self::zero(self.n_vars);
        for (m, c) in self.terms() {
            out.add_term(m.clone(), c * s);
        }
        out
    }

    /// Raises to a non-negative integer power by repeated squaring.
    pub fn pow(&self, mut k: u32) -> Polynomial {
        let mut base = self.clone();
        let mut acc = Polynomial::constant(self.n_vars, 1.0);
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.n_vars {
            return Err(Error::DimensionMismatch {
                expected: self.n_vars,
                found: point.len(),
            });
        }
        Ok(self.eval_unchecked(point))
    }

    pub(crate) fn eval_unchecked(&self, point: &[f64]) -> f64 {
        self.terms().map(|(m, c)| c * m.eval(point)).sum()
    }

    /// Substitutes `x_i -> subs[i]`; every substitute must share one
    /// variable count, which becomes the result's.
    pub fn compose(&self, subs: &[Polynomial]) -> Result<Polynomial> {
        if subs.len() != self.n_vars {
            return Err(Error::DimensionMismatch {
                expected: self.n_vars,
                found: subs.len(),
            });
        }
        let target = subs.first().map(|p| p.n_vars).unwrap_or(0);
        if let Some(bad) = subs.iter().find(|p| p.n_vars != target) {
            return Err(Error::DimensionMismatch {
                expected: target,
                found: bad.n_vars,
            });
        }
        let max_deg = self.degree();
        // powers[i][k] = subs[i]^k, built lazily up to the needed degree
        let mut powers: Vec<Vec<Polynomial>> = subs
            .iter()
            .map(|s| vec![Polynomial::constant(target, 1.0), s.clone()])
            .collect();
        for (i, pw) in powers.iter_mut().enumerate() {
            let need = self.terms.keys().map(|m| m.0[i]).max().unwrap_or(0).min(max_deg);
            while (pw.len() as u32) <= need {
                let next = &pw[pw.len() - 1] * &subs[i];
                pw.push(next);
            }
        }
        let mut out = Polynomial::zero(target);
        for (m, c) in self.terms() {
            let mut t = Polynomial::constant(target, c);
            for (i, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    t = &t * &powers[i][e as usize];
                }
            }
            out = &out + &t;
        }
        Ok(out)
    }

    fn check_same(&self, other: &Polynomial) {
        assert_eq!(
            self.n_vars, other.n_vars,
            "polynomial variable counts differ"
        );
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.check_same(rhs);
        let mut out = self.clone();
        for (m, c) in rhs.terms() {
            out.add_term(m.clone(), c);
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.check_same(rhs);
        let mut out = self.clone();
        for (m, c) in rhs.terms() {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.check_same(rhs);
        let mut acc: BTreeMap<Monomial, f64> = BTreeMap::new();
        for (ma, ca) in self.terms() {
            for (mb, cb) in rhs.terms() {
                *acc.entry(ma.mul(mb)).or_insert(0.0) += ca * cb;
            }
        }
        acc.retain(|_, c| c.abs() >= COEFF_EPS);
        Polynomial {
            n_vars: self.n_vars,
            terms: acc,
        }
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $method(self, rhs: Polynomial) -> Polynomial {
                (&self).$method(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}")?;
            for (i, &e) in m.0.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*x{}", i + 1)?,
                    _ => write!(f, "*x{}^{}", i + 1, e)?,
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x(n: usize, i: usize) -> Polynomial {
        Polynomial::var(n, i)
    }

    #[test]
    fn eval_product_plus_one() {
        let p = &(&x(2, 0) * &x(2, 1)) + &Polynomial::constant(2, 1.0);
        assert_eq!(p.eval(&[2.0, 3.0]).unwrap(), 7.0);
    }

    #[test]
    fn difference_of_squares() {
        let one = Polynomial::constant(1, 1.0);
        let p = &(&x(1, 0) + &one) * &(&x(1, 0) - &one);
        let expected = &x(1, 0).pow(2) - &one;
        assert_eq!(p, expected);
        assert_eq!(p.n_terms(), 2);
    }

    #[test]
    fn additive_inverse_is_empty() {
        let p = Polynomial::from_terms(2, [(vec![1, 0], 2.5), (vec![0, 3], -1.0)]).unwrap();
        let z = &p + &(-&p);
        assert!(z.is_zero());
        assert_eq!(z.n_terms(), 0);
    }

    #[test]
    fn eval_dimension_mismatch() {
        let p = x(3, 1);
        assert!(matches!(
            p.eval(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn compose_affine_shift() {
        // (x + 1)^2 with x -> 2u - 1 gives 4u^2
        let one = Polynomial::constant(1, 1.0);
        let p = (&x(1, 0) + &one).pow(2);
        let sub = &x(1, 0).scale(2.0) - &one;
        let q = p.compose(&[sub]).unwrap();
        assert_eq!(q, x(1, 0).pow(2).scale(4.0));
    }

    #[test]
    fn monomial_order_is_graded() {
        let a = Monomial::new(vec![2, 0]);
        let b = Monomial::new(vec![1, 1]);
        let c = Monomial::new(vec![0, 2]);
        let d = Monomial::new(vec![0, 1]);
        assert!(d < a && a < b && b < c);
    }

    fn arb_poly(n: usize) -> impl Strategy<Value = Polynomial> {
        prop::collection::vec((prop::collection::vec(0u32..3, n), -2.0f64..2.0), 0..6)
            .prop_map(move |ts| Polynomial::from_terms(n, ts).unwrap())
    }

    proptest! {
        #[test]
        fn eval_is_ring_homomorphism(
            p in arb_poly(3),
            q in arb_poly(3),
            v in prop::collection::vec(-1.5f64..1.5, 3),
        ) {
            let pq = (&p * &q).eval(&v).unwrap();
            let direct = p.eval(&v).unwrap() * q.eval(&v).unwrap();
            prop_assert!((pq - direct).abs() <= 1e-10 * (1.0 + direct.abs()));
            let s = (&p + &q).eval(&v).unwrap();
            prop_assert!((s - p.eval(&v).unwrap() - q.eval(&v).unwrap()).abs() <= 1e-10 * (1.0 + s.abs()));
        }
    }
}
