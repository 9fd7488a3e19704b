use rayon::prelude::*;

use super::{ChebyshevResult, Diagnostics, Method, ProblemReport};
use crate::error::{Error, Result};
use crate::lasserre::{certify, pop_bound, Pop, PopOptions, PopResult, Sense};
use crate::momentset::{BoundingBox, SemialgebraicSet};
use crate::poly::Polynomial;
use crate::sdp::SdpStatus;

/// Box sides narrower than this are treated as a single value.
const FLAT_SIDE: f64 = 1e-9;

fn coordinate_name(n_sigma: usize, i: usize) -> String {
    if i < n_sigma {
        format!("z{}", i + 1)
    } else {
        format!("w{}", i - n_sigma + 1)
    }
}

fn report(problem: String, r: &PopResult) -> ProblemReport {
    ProblemReport {
        problem,
        status: r.solver_status,
        bound: r.bound,
        certified: r.certified,
        flatness_ranks: r.flatness_ranks,
        iterations: r.iterations,
    }
}

/// Bounds every coordinate from below and above by relaxation bounds.
///
/// The box is outer even when relaxations are not exact, since a lower
/// bound on a minimum and an upper bound on a maximum can only widen it.
pub fn outer_box(set: &SemialgebraicSet, order: u32, opts: &PopOptions) -> Result<(BoundingBox, Diagnostics)> {
    let n = set.n_vars();
    let scaling = set.prior_box();
    let jobs: Vec<(usize, Sense)> = (0..n).flat_map(|i| [(i, Sense::Min), (i, Sense::Max)]).collect();
    let results: Vec<Result<(String, PopResult)>> = jobs
        .par_iter()
        .map(|&(i, sense)| {
            let name = format!(
                "{} {}",
                if sense == Sense::Min { "min" } else { "max" },
                coordinate_name(set.n_sigma(), i)
            );
            let pop = set.to_pop(Polynomial::var(n, i), sense, scaling);
            pop_bound(&pop, order, opts).map(|r| (name, r))
        })
        .collect();
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut diag = Diagnostics {
        relaxation_order: Some(order),
        ..Diagnostics::default()
    };
    for (res, &(i, sense)) in results.into_iter().zip(&jobs) {
        let (name, r) = res?;
        let bound = match (r.solver_status, r.bound) {
            (SdpStatus::Optimal, Some(b)) => b,
            _ => {
                return Err(Error::Solver {
                    problem: name,
                    status: r.solver_status,
                })
            }
        };
        match sense {
            Sense::Min => lower[i] = bound,
            Sense::Max => upper[i] = bound,
        }
        diag.problems.push(report(name, &r));
    }
    for i in 0..n {
        // a point set gives lower == upper up to solver accuracy
        if lower[i] > upper[i] {
            let mid = 0.5 * (lower[i] + upper[i]);
            lower[i] = mid;
            upper[i] = mid;
        }
    }
    Ok((BoundingBox::new(lower, upper)?, diag))
}

/// Midpoint of the box, with the half-diagonal as radius.
pub fn box_center(b: &BoundingBox) -> ChebyshevResult {
    ChebyshevResult::from_center(Method::OuterBox, &b.center(), Some(0.5 * b.diameter()))
}

/// Relaxes `min r  s.t.  r >= |x - c|^2,  x in S,  c in B` over `(x, c, r)`
/// and reads `c` and `sqrt(r)` from the degree-one moments.
pub fn min_ball_center(set: &SemialgebraicSet, b: &BoundingBox, order: u32, opts: &PopOptions) -> Result<ChebyshevResult> {
    let m = set.n_vars();
    if b.dim() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: b.dim(),
        });
    }
    let n = 2 * m + 1;
    let var = |i| Polynomial::var(n, i);
    let embed: Vec<Polynomial> = (0..m).map(var).collect();
    let lift = |p: &Polynomial| p.compose(&embed);
    let r = var(2 * m);
    let diam2 = b.diameter().powi(2);

    let dist2 = (0..m).fold(Polynomial::zero(n), |acc, i| &acc + &(&var(i) - &var(m + i)).pow(2));
    let mut pop = Pop::minimize(r.clone()).with_inequality(&r - &dist2);
    for g in set.inequalities() {
        pop = pop.with_inequality(lift(g)?);
    }
    for h in set.equalities() {
        pop = pop.with_equality(lift(h)?);
    }
    for (i, (lo, hi)) in b.ranges().into_iter().enumerate() {
        let c = var(m + i);
        // a flat side has no interior; pin the coordinate instead
        if hi - lo <= FLAT_SIDE {
            pop = pop.with_equality(&c - &Polynomial::constant(n, 0.5 * (lo + hi)));
        } else {
            pop = pop
                .with_inequality(&c - &Polynomial::constant(n, lo))
                .with_inequality(&Polynomial::constant(n, hi) - &c);
        }
    }
    pop = pop.with_inequality(&Polynomial::constant(n, diam2) - &r);
    let mut scaling = b.ranges();
    scaling.extend(b.ranges());
    scaling.push((0.0, diam2.max(1e-12)));
    pop = pop.with_scaling(scaling);

    let res = pop_bound(&pop, order, opts)?;
    let name = "min-ball".to_string();
    let point = match (res.solver_status, &res.point) {
        (SdpStatus::Optimal, Some(p)) => p.clone(),
        _ => {
            return Err(Error::Solver {
                problem: name,
                status: res.solver_status,
            })
        }
    };
    let radius = point[2 * m].max(0.0).sqrt();
    let mut out = ChebyshevResult::from_center(Method::MinBall, &point[m..2 * m], Some(radius));
    out.certified = certify(&res, &pop);
    out.diagnostics.relaxation_order = Some(res.order_used);
    out.diagnostics.problems = vec![report(name, &res)];
    out.diagnostics.witness = Some(point[..m].to_vec());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::momentset::{build_set, membership, sample_set, MomentSpec};
    use crate::robust::mc_oracle_center;

    fn section6() -> SemialgebraicSet {
        build_set(&MomentSpec {
            n_sigma: 2,
            epsilon: 0.01,
            known: BTreeMap::new(),
            intervals: BTreeMap::from([(1, (-3.0, 4.0)), (2, (0.0, 5.0))]),
        })
        .unwrap()
    }

    #[test]
    fn unit_box_center() {
        let b = BoundingBox::new(vec![0.0; 4], vec![1.0; 4]).unwrap();
        let r = box_center(&b);
        assert_eq!(r.center(), vec![0.5; 4]);
        assert!((r.radius.unwrap() - 1.0).abs() < 1e-15);
        assert!(r.diagnostics.notes.is_empty());
        let p = BoundingBox::new(vec![2.0, 3.0, 0.25, 0.75], vec![2.0, 3.0, 0.25, 0.75]).unwrap();
        assert_eq!(box_center(&p).radius, Some(0.0));
        assert_eq!(box_center(&p).center(), vec![2.0, 3.0, 0.25, 0.75]);
    }

    #[test]
    fn box_center_weights_are_projected() {
        let b = BoundingBox::new(vec![-1.0, -1.0, 0.2, 0.2], vec![1.0, 1.0, 0.4, 0.4]).unwrap();
        let r = box_center(&b);
        assert_eq!(r.z, vec![0.0, 0.0]);
        assert!((r.w[0] - 0.5).abs() < 1e-15 && (r.w[1] - 0.5).abs() < 1e-15);
        assert_eq!(r.diagnostics.notes.len(), 1);
        assert!(r.sigma_points().is_ok());
    }

    #[test]
    fn outer_box_contains_samples() {
        let set = section6();
        let (b, diag) = outer_box(&set, 2, &PopOptions::default()).unwrap();
        assert_eq!(diag.problems.len(), 8);
        assert!(diag.problems.iter().all(|p| p.status == SdpStatus::Optimal));
        // |z| <= sqrt(u2 / eps), and the weights live in [eps, 1 - eps]
        let zmax = 500f64.sqrt();
        for i in 0..2 {
            assert!(b.upper()[i] <= zmax + 1e-4 && b.lower()[i] >= -zmax - 1e-4);
            assert!(b.lower()[2 + i] >= 0.01 - 1e-6 && b.upper()[2 + i] <= 0.99 + 1e-6);
        }
        let samples = sample_set(&set, set.prior_box(), 1000, 1).unwrap();
        for p in &samples.points {
            assert!(b.contains(p, 1e-9));
        }
        let smax = samples.points.iter().map(|p| p[0]).fold(f64::MIN, f64::max);
        assert!(smax <= b.upper()[0]);
    }

    #[test]
    fn min_ball_point_is_a_member() {
        let set = section6();
        let (b, _) = outer_box(&set, 2, &PopOptions::default()).unwrap();
        let r = min_ball_center(&set, &b, 2, &PopOptions::default()).unwrap();
        assert!(b.contains(&r.center(), 1e-6), "{r:?}");
        let x = r.diagnostics.witness.as_ref().unwrap();
        assert!(membership(x, &set, 1e-4).unwrap(), "{x:?}");
        assert!(r.sigma_points().is_ok());
    }

    #[test]
    fn singleton_min_ball() {
        // n_sigma = 1 forces w = 1, so z is pinned by the first moment
        let set = build_set(&MomentSpec {
            n_sigma: 1,
            epsilon: 0.5,
            known: BTreeMap::from([(1, 2.0), (2, 4.0)]),
            intervals: BTreeMap::new(),
        })
        .unwrap();
        let (b, _) = outer_box(&set, 2, &PopOptions::default()).unwrap();
        assert!(b.diameter() < 1e-4, "{b:?}");
        let r = min_ball_center(&set, &b, 2, &PopOptions::default()).unwrap();
        assert!((r.z[0] - 2.0).abs() < 1e-4 && (r.w[0] - 1.0).abs() < 1e-4);
        assert!(r.radius.unwrap() < 1e-3);
    }

    #[test]
    fn two_point_set_oracle_and_min_ball() {
        // z^2 = 1 with w = 1: the set is {(-1, 1), (1, 1)}
        let set = build_set(&MomentSpec {
            n_sigma: 1,
            epsilon: 0.5,
            known: BTreeMap::from([(2, 1.0)]),
            intervals: BTreeMap::new(),
        })
        .unwrap();
        let oracle = mc_oracle_center(&[vec![-1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(oracle.z[0].abs() < 1e-12 && (oracle.radius.unwrap() - 1.0).abs() < 1e-12);

        let (b, _) = outer_box(&set, 2, &PopOptions::default()).unwrap();
        assert!((b.upper()[0] - 1.0).abs() < 1e-5 && (b.lower()[0] + 1.0).abs() < 1e-5);
        assert!(box_center(&b).z[0].abs() < 1e-5);
        // the joint minimization lets x and the center coincide
        let r = min_ball_center(&set, &b, 2, &PopOptions::default()).unwrap();
        assert!(b.contains(&r.center(), 1e-6));
        assert!(r.radius.unwrap() < 1e-3);
    }
}
