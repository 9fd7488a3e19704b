//! Robust sigma points: centers of the feasible set of nodes and weights.
//!
//! * [`naive_center`] plugs interval midpoints into the two-point formula.
//! * [`outer_box`] + [`box_center`] bound every coordinate by a relaxation
//!   and take the midpoint of the resulting box.
//! * [`min_ball_center`] relaxes the enclosing-ball problem directly.
//! * [`mc_oracle_center`] is the exact enclosing ball of a finite sample,
//!   used as a reference.

mod chebyshev;
mod meb;

pub use chebyshev::{box_center, min_ball_center, outer_box};
pub use meb::{mc_oracle_center, min_enclosing_ball, Ball};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::momentset::{MomentSpec, SigmaPointSet};
use crate::sdp::SdpStatus;

/// Below this interval width every method falls back to [`naive_center`].
pub const SMALL_GAP: f64 = 1e-3;

const PROJECTION_NOTE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Naive,
    OuterBox,
    MinBall,
    McOracle,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Naive, Method::OuterBox, Method::MinBall, Method::McOracle];

    pub fn name(self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::OuterBox => "outer-box",
            Method::MinBall => "min-ball",
            Method::McOracle => "mc-oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Validation(vec![format!("methods: unknown method {s:?}")]))
    }
}

/// Outcome of one polynomial optimization problem inside a method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemReport {
    pub problem: String,
    pub status: SdpStatus,
    pub bound: Option<f64>,
    pub certified: bool,
    pub flatness_ranks: (usize, usize),
    pub iterations: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub relaxation_order: Option<u32>,
    pub problems: Vec<ProblemReport>,
    /// Point of the set returned alongside the center, when there is one.
    pub witness: Option<Vec<f64>>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevResult {
    pub method: Method,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    pub radius: Option<f64>,
    pub certified: bool,
    pub diagnostics: Diagnostics,
}

impl ChebyshevResult {
    /// Splits a `(z, w)` center, projecting `w` onto `Σ w = 1`. Every member
    /// of the set lies on that hyperplane, so the projection only moves the
    /// center closer to each of them and `radius` stays an upper bound.
    pub(crate) fn from_center(method: Method, center: &[f64], radius: Option<f64>) -> Self {
        let (z, w) = center.split_at(center.len() / 2);
        let shift = (1.0 - w.iter().sum::<f64>()) / w.len().max(1) as f64;
        let mut diagnostics = Diagnostics::default();
        if shift.abs() > PROJECTION_NOTE_TOL {
            diagnostics.notes.push(format!("weights shifted by {shift:e} onto the unit-sum hyperplane"));
        }
        ChebyshevResult {
            method,
            z: z.to_vec(),
            w: w.iter().map(|v| v + shift).collect(),
            radius,
            certified: false,
            diagnostics,
        }
    }

    /// `(z, w)` concatenated.
    pub fn center(&self) -> Vec<f64> {
        self.z.iter().chain(&self.w).copied().collect()
    }

    pub fn sigma_points(&self) -> Result<SigmaPointSet> {
        SigmaPointSet::new(self.z.clone(), self.w.clone())
    }
}

/// Two equally weighted nodes with mean `mu` and second moment `v`.
pub fn two_point_sigma_points(mu: f64, v: f64) -> Result<SigmaPointSet> {
    let var = v - mu * mu;
    if var.is_nan() || var < 0.0 {
        return Err(Error::Domain(format!(
            "(mean {mu}, second moment {v}) is not a valid moment pair"
        )));
    }
    let s = var.sqrt();
    SigmaPointSet::new(vec![mu + s, mu - s], vec![0.5, 0.5])
}

/// Two-point sigma points at the midpoints of the first two moments.
pub fn naive_center(spec: &MomentSpec) -> Result<SigmaPointSet> {
    spec.validate()?;
    if spec.n_sigma != 2 {
        return Err(Error::Validation(vec![format!(
            "n_sigma: the naive method needs n_sigma = 2, got {}",
            spec.n_sigma
        )]));
    }
    let (Some(mu), Some(v)) = (spec.midpoint(1), spec.midpoint(2)) else {
        return Err(Error::Validation(vec![
            "intervals: the naive method needs moment orders 1 and 2".into(),
        ]));
    };
    if v - mu * mu < 0.0 {
        return Err(Error::Domain(
            "midpoint moments are not a valid (mean, second-moment) pair".into(),
        ));
    }
    two_point_sigma_points(mu, v)
}

pub fn naive_result(spec: &MomentSpec) -> Result<ChebyshevResult> {
    let s = naive_center(spec)?;
    Ok(ChebyshevResult::from_center(Method::Naive, &s.to_vector(), None))
}

/// Whether intervals are narrow enough that the naive method is used for
/// every method.
pub fn use_naive_fallback(spec: &MomentSpec) -> bool {
    spec.max_gap() < SMALL_GAP
}

/// [`naive_result`] relabelled as `method`.
pub fn naive_fallback(spec: &MomentSpec, method: Method) -> Result<ChebyshevResult> {
    let mut r = naive_result(spec)?;
    r.method = method;
    r.diagnostics.notes.push("naive-fallback".into());
    Ok(r)
}

/// Three-point sigma points matching the first four moments of `N(mu, variance)`.
pub fn normal_sigma_points(mu: f64, variance: f64) -> Result<SigmaPointSet> {
    if variance.is_nan() || variance < 0.0 {
        return Err(Error::Domain(format!("variance {variance} is negative")));
    }
    let h = (3.0 * variance).sqrt();
    SigmaPointSet::new(vec![mu - h, mu, mu + h], vec![1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0])
}

/// Center of the three-point nodes when the variance is only known to lie
/// in `[v_lo, v_hi]`.
pub fn normal_interval_center(mu: f64, v_lo: f64, v_hi: f64) -> Result<SigmaPointSet> {
    if !(0.0 <= v_lo && v_lo <= v_hi) {
        return Err(Error::Domain(format!("need 0 <= v_lo <= v_hi, got [{v_lo}, {v_hi}]")));
    }
    let h = 0.5 * 3f64.sqrt() * (v_lo.sqrt() + v_hi.sqrt());
    SigmaPointSet::new(vec![mu - h, mu, mu + h], vec![1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0])
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use proptest::prelude::*;

    use super::*;

    fn spec(known: &[(u32, f64)], intervals: &[(u32, (f64, f64))]) -> MomentSpec {
        MomentSpec {
            n_sigma: 2,
            epsilon: 0.01,
            known: known.iter().copied().collect(),
            intervals: intervals.iter().copied().collect::<BTreeMap<_, _>>(),
        }
    }

    #[test]
    fn naive_examples() {
        let s = naive_center(&spec(&[], &[(1, (-3.0, 4.0)), (2, (0.0, 5.0))])).unwrap();
        assert_eq!(s.z(), &[2.0, -1.0]);
        assert_eq!(s.w(), &[0.5, 0.5]);
        let s = naive_center(&spec(&[(1, 0.0), (2, 1.0)], &[])).unwrap();
        assert_eq!(s.z(), &[1.0, -1.0]);
        let s = naive_center(&spec(&[(1, 0.5), (2, 0.25)], &[])).unwrap();
        assert_eq!(s.z(), &[0.5, 0.5]);
    }

    #[test]
    fn naive_rejects_invalid_midpoints() {
        match naive_center(&spec(&[], &[(1, (2.0, 4.0)), (2, (0.0, 5.0))])) {
            Err(Error::Domain(m)) => assert!(m.contains("not a valid")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn normal_examples() {
        let r3 = 3f64.sqrt();
        let s = normal_sigma_points(0.0, 1.0).unwrap();
        assert_eq!(s.z(), &[-r3, 0.0, r3]);
        assert_eq!(s.w(), &[1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]);
        assert_eq!(normal_sigma_points(5.0, 0.0).unwrap().z(), &[5.0; 3]);
        let s = normal_sigma_points(1.0, 4.0).unwrap();
        assert!((s.z()[0] - (1.0 - 2.0 * r3)).abs() < 1e-15);
        assert!((s.z()[2] - (1.0 + 2.0 * r3)).abs() < 1e-15);
        assert!(normal_sigma_points(0.0, -1.0).is_err());
    }

    #[test]
    fn interval_center_examples() {
        let r3 = 3f64.sqrt();
        let (a, b) = (normal_interval_center(0.7, 2.0, 2.0).unwrap(), normal_sigma_points(0.7, 2.0).unwrap());
        assert!(a.z().iter().zip(b.z()).all(|(x, y)| (x - y).abs() < 1e-14));
        assert_eq!(a.w(), b.w());
        assert!((normal_interval_center(0.0, 1.0, 4.0).unwrap().z()[0] + 1.5 * r3).abs() < 1e-15);
        assert!((normal_interval_center(0.0, 0.0, 4.0).unwrap().z()[0] + r3).abs() < 1e-15);
        assert!(normal_interval_center(0.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
        assert!("box".parse::<Method>().is_err());
    }

    #[test]
    fn fallback_is_tagged() {
        let s = spec(&[], &[(1, (0.0, 1e-4)), (2, (1.0, 1.0 + 1e-4))]);
        assert!(use_naive_fallback(&s));
        let r = naive_fallback(&s, Method::OuterBox).unwrap();
        assert_eq!(r.method, Method::OuterBox);
        assert_eq!(r.diagnostics.notes, vec!["naive-fallback".to_string()]);
    }

    proptest! {
        #[test]
        fn two_point_matches_moments(mu in -10.0f64..10.0, extra in 0.0f64..20.0) {
            let v = mu * mu + extra;
            let s = two_point_sigma_points(mu, v).unwrap();
            prop_assert!((s.moment(1) - mu).abs() < 1e-9);
            prop_assert!((s.moment(2) - v).abs() < 1e-9 * (1.0 + v));
        }

        #[test]
        fn normal_points_match_gaussian_moments(mu in -10.0f64..10.0, v in 0.0f64..10.0) {
            let s = normal_sigma_points(mu, v).unwrap();
            let c = |k: i32| s.z().iter().zip(s.w()).map(|(z, w)| w * (z - mu).powi(k)).sum::<f64>();
            prop_assert!((s.moment(1) - mu).abs() < 1e-9);
            prop_assert!((c(2) - v).abs() < 1e-9);
            prop_assert!(c(3).abs() < 1e-9);
            prop_assert!((c(4) - 3.0 * v * v).abs() < 1e-9);
        }
    }
}
