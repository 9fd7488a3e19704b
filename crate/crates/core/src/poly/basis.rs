use super::Monomial;
use crate::error::{Error, Result};

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Number of monomials of total degree `<= max_degree` in `n_vars` variables.
pub fn basis_len(n_vars: usize, max_degree: u32) -> usize {
    binomial(n_vars + max_degree as usize, max_degree as usize)
}

/// Number of exponent vectors of length `vars` summing exactly to `sum`.
fn compositions(sum: u32, vars: usize) -> usize {
    if vars == 0 {
        return usize::from(sum == 0);
    }
    binomial(sum as usize + vars - 1, vars - 1)
}

fn push_degree(n_vars: usize, degree: u32, prefix: &mut Vec<u32>, out: &mut Vec<Monomial>) {
    let i = prefix.len();
    let used: u32 = prefix.iter().sum();
    let rest = degree - used;
    if i + 1 == n_vars {
        prefix.push(rest);
        out.push(Monomial::new(prefix.clone()));
        prefix.pop();
        return;
    }
    for e in (0..=rest).rev() {
        prefix.push(e);
        push_degree(n_vars, degree, prefix, out);
        prefix.pop();
    }
}

/// All monomials of degree `<= max_degree`, graded-lex ordered, constant first.
pub fn basis(n_vars: usize, max_degree: u32) -> Vec<Monomial> {
    assert!(n_vars >= 1, "basis needs at least one variable");
    let mut out = Vec::with_capacity(basis_len(n_vars, max_degree));
    let mut prefix = Vec::with_capacity(n_vars);
    for d in 0..=max_degree {
        push_degree(n_vars, d, &mut prefix, &mut out);
    }
    out
}

/// Position of `m` in `basis(m.n_vars(), max_degree)`, computed by counting.
pub fn monomial_index(m: &Monomial, max_degree: u32) -> Result<usize> {
    let n = m.n_vars();
    let deg = m.degree();
    if deg > max_degree {
        return Err(Error::OutOfRange(format!(
            "monomial of degree {deg} exceeds basis degree {max_degree}"
        )));
    }
    let mut rank = if deg == 0 { 0 } else { basis_len(n, deg - 1) };
    let mut remaining = deg;
    for (i, &a) in m.exponents().iter().enumerate() {
        let tail_vars = n - i - 1;
        for e in (a + 1)..=remaining {
            rank += compositions(remaining - e, tail_vars);
        }
        remaining -= a;
    }
    Ok(rank)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Enumerates every exponent tuple in `[0, d]^n` and keeps those of
    /// total degree `<= d`.
    fn brute_force_count(n: usize, d: u32) -> usize {
        let mut count = 0;
        let total = (d as usize + 1).pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let mut s = 0;
            for _ in 0..n {
                s += (c % (d as usize + 1)) as u32;
                c /= d as usize + 1;
            }
            if s <= d {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn small_bases() {
        let b = basis(1, 2);
        assert_eq!(
            b,
            vec![
                Monomial::new(vec![0]),
                Monomial::new(vec![1]),
                Monomial::new(vec![2])
            ]
        );
        let b = basis(2, 1);
        assert_eq!(b.len(), 3);
        assert_eq!(b[1], Monomial::new(vec![1, 0]));
        assert_eq!(b[2], Monomial::new(vec![0, 1]));
    }

    #[test]
    fn lengths_match_enumeration() {
        assert_eq!(brute_force_count(4, 2), 15);
        for n in 1..=5 {
            for d in 0..=4 {
                assert_eq!(basis(n, d).len(), brute_force_count(n, d), "n={n} d={d}");
                assert_eq!(basis_len(n, d), brute_force_count(n, d));
            }
        }
    }

    #[test]
    fn strictly_increasing_without_duplicates() {
        for n in 1..=4 {
            let b = basis(n, 4);
            assert!(b.windows(2).all(|w| w[0] < w[1]));
            assert!(b[0].is_constant());
        }
    }

    #[test]
    fn index_examples() {
        assert_eq!(monomial_index(&Monomial::one(2), 2).unwrap(), 0);
        assert_eq!(monomial_index(&Monomial::new(vec![1, 0]), 2).unwrap(), 1);
        // basis(2,2) = [1, x1, x2, x1^2, x1 x2, x2^2]
        assert_eq!(monomial_index(&Monomial::new(vec![0, 2]), 2).unwrap(), 5);
    }

    #[test]
    fn index_inverts_basis() {
        for n in 1..=5 {
            for (k, m) in basis(n, 5).iter().enumerate() {
                assert_eq!(monomial_index(m, 5).unwrap(), k);
            }
        }
    }

    #[test]
    fn index_rejects_overflow() {
        assert!(matches!(
            monomial_index(&Monomial::new(vec![2, 1]), 2),
            Err(Error::OutOfRange(_))
        ));
    }
}
