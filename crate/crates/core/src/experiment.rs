//! Configured runs: sigma points per method, mean transform errors over
//! random moment draws, and the distortion estimate.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::distortion::{estimate_distortion, ut_eval, DistortionEstimate, TestFunction};
use crate::error::{Error, ErrorCategory, Result};
use crate::lasserre::{PopOptions, DEFAULT_ORDER};
use crate::momentset::{build_set, sample_set, BoundingBox, MomentSpec, SemialgebraicSet};
use crate::robust::{
    box_center, mc_oracle_center, min_ball_center, naive_fallback, naive_result, outer_box,
    two_point_sigma_points, use_naive_fallback, ChebyshevResult, Diagnostics, Method,
};

pub const DEFAULT_MOMENT_SAMPLES: usize = 100;
pub const DEFAULT_DISTORTION_PAIRS: usize = 500;
pub const DEFAULT_ORACLE_SAMPLES: usize = 1000;
/// Cap on (mean, second moment) draws, counting rejected ones.
pub const MAX_MOMENT_DRAWS: u64 = 1_000_000;

const SPEC_KEYS: [&str; 4] = ["n_sigma", "epsilon", "known", "intervals"];
const RUN_KEYS: [&str; 7] = [
    "methods",
    "relaxation_order",
    "n_moment_samples",
    "n_distortion_pairs",
    "n_oracle_samples",
    "f",
    "seed",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub spec: MomentSpec,
    pub methods: Vec<Method>,
    pub relaxation_order: u32,
    pub n_moment_samples: usize,
    pub n_distortion_pairs: usize,
    pub n_oracle_samples: usize,
    pub f: TestFunction,
    pub seed: u64,
}

fn field<T: DeserializeOwned>(obj: &Map<String, Value>, key: &str) -> Result<Option<T>> {
    obj.get(key)
        .map(|v| {
            serde_json::from_value(v.clone()).map_err(|e| Error::Config {
                path: key.to_string(),
                message: e.to_string(),
            })
        })
        .transpose()
}

impl ExperimentConfig {
    /// Experiment defaults around `spec`.
    pub fn new(spec: MomentSpec) -> Self {
        ExperimentConfig {
            spec,
            methods: Method::ALL.to_vec(),
            relaxation_order: DEFAULT_ORDER,
            n_moment_samples: DEFAULT_MOMENT_SAMPLES,
            n_distortion_pairs: DEFAULT_DISTORTION_PAIRS,
            n_oracle_samples: DEFAULT_ORACLE_SAMPLES,
            f: TestFunction::Sin,
            seed: 0,
        }
    }

    /// Parses a flat JSON object holding the moment spec and, optionally,
    /// the run fields. Unknown keys are rejected.
    pub fn from_json(value: &Value) -> Result<Self> {
        let obj = value.as_object().ok_or_else(|| Error::Config {
            path: "$".into(),
            message: "expected a JSON object".into(),
        })?;
        if let Some(k) = obj.keys().find(|k| !SPEC_KEYS.contains(&k.as_str()) && !RUN_KEYS.contains(&k.as_str())) {
            return Err(Error::Config {
                path: k.clone(),
                message: "unknown field".into(),
            });
        }
        let required = |key: &str| Error::Config {
            path: key.into(),
            message: "missing field".into(),
        };
        let spec = MomentSpec {
            n_sigma: field(obj, "n_sigma")?.ok_or_else(|| required("n_sigma"))?,
            epsilon: field(obj, "epsilon")?.ok_or_else(|| required("epsilon"))?,
            known: field(obj, "known")?.unwrap_or_default(),
            intervals: field(obj, "intervals")?.unwrap_or_default(),
        };
        let mut cfg = ExperimentConfig::new(spec);
        if let Some(m) = field(obj, "methods")? {
            cfg.methods = m;
        }
        if let Some(v) = field(obj, "relaxation_order")? {
            cfg.relaxation_order = v;
        }
        if let Some(v) = field(obj, "n_moment_samples")? {
            cfg.n_moment_samples = v;
        }
        if let Some(v) = field(obj, "n_distortion_pairs")? {
            cfg.n_distortion_pairs = v;
        }
        if let Some(v) = field(obj, "n_oracle_samples")? {
            cfg.n_oracle_samples = v;
        }
        if let Some(v) = field(obj, "f")? {
            cfg.f = v;
        }
        if let Some(v) = field(obj, "seed")? {
            cfg.seed = v;
        }
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = match self.spec.validate() {
            Ok(()) => Vec::new(),
            Err(Error::Validation(v)) => v,
            Err(e) => return Err(e),
        };
        if self.methods.is_empty() {
            errs.push("methods: at least one method is required".into());
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                errs.push(format!("methods.{i}: {m} is listed twice"));
            }
        }
        if self.relaxation_order == 0 {
            errs.push("relaxation_order: must be at least 1".into());
        }
        for (name, v) in [
            ("n_moment_samples", self.n_moment_samples),
            ("n_distortion_pairs", self.n_distortion_pairs),
            ("n_oracle_samples", self.n_oracle_samples),
        ] {
            if v == 0 {
                errs.push(format!("{name}: must be at least 1"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    fn distortion_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodError {
    pub category: ErrorCategory,
    pub message: String,
}

impl From<&Error> for MethodError {
    fn from(e: &Error) -> Self {
        MethodError {
            category: e.category(),
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub result: Option<ChebyshevResult>,
    pub error: Option<MethodError>,
    /// Mean of `|truth - UT_f|` over the moment samples.
    pub mean_error: Option<f64>,
}

/// One draw of (mean, second moment) and the per-method errors, in the
/// order of the successful methods.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleRow {
    pub mu: f64,
    pub v: f64,
    pub truth: f64,
    pub errors: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub naive_fallback: bool,
    pub outer_box: Option<BoundingBox>,
    pub methods: Vec<MethodReport>,
    pub moment_draws: Option<u64>,
    pub distortion: Option<DistortionEstimate>,
    pub sampler_acceptance_rate: Option<f64>,
    pub notes: Vec<String>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
    #[serde(skip)]
    pub samples: Vec<SampleRow>,
}

impl ExperimentReport {
    pub fn to_json(&self, with_timings: bool) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if !with_timings {
            if let Some(obj) = v.as_object_mut() {
                obj.remove("timings");
            }
        }
        Ok(serde_json::to_string_pretty(&v)?)
    }

    pub fn result(&self, method: Method) -> Option<&ChebyshevResult> {
        self.methods.iter().find(|m| m.method == method)?.result.as_ref()
    }

    pub fn mean_error(&self, method: Method) -> Option<f64> {
        self.methods.iter().find(|m| m.method == method)?.mean_error
    }

    /// Category of the first method that failed, if any.
    pub fn first_failure(&self) -> Option<ErrorCategory> {
        self.methods.iter().find_map(|m| m.error.as_ref().map(|e| e.category))
    }

    /// `sample_index,mu,v,truth,<method>...` with one column per method that
    /// produced sigma points.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let names: Vec<&str> = self
            .methods
            .iter()
            .filter(|m| m.result.is_some())
            .map(|m| m.method.name())
            .collect();
        write!(out, "sample_index,mu,v,truth")?;
        for n in &names {
            write!(out, ",{n}")?;
        }
        writeln!(out)?;
        for (i, row) in self.samples.iter().enumerate() {
            write!(out, "{i},{},{},{}", row.mu, row.v, row.truth)?;
            for e in &row.errors {
                write!(out, ",{e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn timed<T>(timings: &mut BTreeMap<String, f64>, key: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    timings.insert(key.to_string(), start.elapsed().as_secs_f64());
    out
}

fn check_valid(r: ChebyshevResult) -> Result<ChebyshevResult> {
    r.sigma_points()?;
    Ok(r)
}

fn solve_method(
    cfg: &ExperimentConfig,
    set: &SemialgebraicSet,
    method: Method,
    fallback: bool,
    outer: Option<&std::result::Result<(BoundingBox, Diagnostics), Error>>,
    opts: &PopOptions,
) -> std::result::Result<ChebyshevResult, MethodError> {
    let from_box = || -> std::result::Result<&(BoundingBox, Diagnostics), MethodError> {
        match outer.expect("outer box computed for box-based methods") {
            Ok(b) => Ok(b),
            Err(e) => Err(e.into()),
        }
    };
    let res = match method {
        Method::Naive => naive_result(&cfg.spec),
        _ if fallback => naive_fallback(&cfg.spec, method),
        Method::OuterBox => {
            let (b, diag) = from_box()?;
            let mut r = box_center(b);
            r.certified = diag.problems.iter().all(|p| p.certified);
            r.diagnostics.relaxation_order = diag.relaxation_order;
            r.diagnostics.problems = diag.problems.clone();
            Ok(r)
        }
        Method::MinBall => {
            let (b, _) = from_box()?;
            min_ball_center(set, b, cfg.relaxation_order, opts)
        }
        Method::McOracle => {
            // sample from the outer box when there is one
            let bbox = match outer {
                Some(Ok((b, _))) => b,
                _ => set.prior_box(),
            };
            sample_set(set, bbox, cfg.n_oracle_samples, cfg.seed).and_then(|batch| {
                let mut r = mc_oracle_center(&batch.points)?;
                r.diagnostics
                    .notes
                    .push(format!("acceptance rate {}", batch.acceptance_rate));
                Ok(r)
            })
        }
    };
    res.and_then(check_valid).map_err(|e| MethodError::from(&e))
}

/// Sigma points for every configured method. Failures are recorded per
/// method; only an invalid configuration is an `Err`.
pub fn run_solve(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let total = Instant::now();
    let set = build_set(&cfg.spec)?;
    let mut timings = BTreeMap::new();
    let fallback = use_naive_fallback(&cfg.spec);
    let opts = PopOptions::default();
    let needs_box = !fallback && cfg.methods.iter().any(|&m| m != Method::Naive);
    let outer = needs_box.then(|| timed(&mut timings, "outer_box", || outer_box(&set, cfg.relaxation_order, &opts)));

    let mut methods = Vec::with_capacity(cfg.methods.len());
    for &m in &cfg.methods {
        let res = timed(&mut timings, &format!("method.{m}"), || {
            solve_method(cfg, &set, m, fallback, outer.as_ref(), &opts)
        });
        let (result, error) = match res {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e)),
        };
        methods.push(MethodReport {
            method: m,
            result,
            error,
            mean_error: None,
        });
    }
    let mut notes = Vec::new();
    if fallback {
        notes.push(format!(
            "every interval is narrower than {}; all methods use the naive sigma points",
            crate::robust::SMALL_GAP
        ));
    }
    timings.insert("total".into(), total.elapsed().as_secs_f64());
    let sampler_acceptance_rate = None;
    Ok(ExperimentReport {
        config: cfg.clone(),
        naive_fallback: fallback,
        outer_box: outer.and_then(|o| o.ok()).map(|(b, _)| b),
        methods,
        moment_draws: None,
        distortion: None,
        sampler_acceptance_rate,
        notes,
        timings,
        samples: Vec::new(),
    })
}

/// Draws `n` pairs `(mu, v)` uniformly from the first- and second-order
/// moment information, redrawing pairs with `v < mu^2`. Returns the pairs
/// and the number of draws.
pub fn draw_moments(spec: &MomentSpec, n: usize, seed: u64) -> Result<(Vec<(f64, f64)>, u64)> {
    let missing = |k: u32| Error::Validation(vec![format!("intervals.{k}: the experiment needs moment order {k}")]);
    let (l1, u1) = spec.range(1).ok_or_else(|| missing(1))?;
    let (l2, u2) = spec.range(2).ok_or_else(|| missing(2))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // keep this stream apart from the set sampler, which uses stream 0
    rng.set_stream(1);
    let mut out = Vec::with_capacity(n);
    let mut draws = 0u64;
    while out.len() < n {
        if draws >= MAX_MOMENT_DRAWS {
            return Err(Error::Sampling(format!(
                "only {} of {n} valid (mean, second moment) pairs after {draws} draws",
                out.len()
            )));
        }
        draws += 1;
        let mu = l1 + (u1 - l1) * rng.random::<f64>();
        let v = l2 + (u2 - l2) * rng.random::<f64>();
        if v >= mu * mu {
            out.push((mu, v));
        }
    }
    Ok((out, draws))
}

/// [`run_solve`], then mean transform errors against the two-point
/// transform at random true moments, and the distortion estimate.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let (draws, n_draws) = draw_moments(&cfg.spec, cfg.n_moment_samples, cfg.seed)?;
    let mut report = run_solve(cfg)?;
    let start = Instant::now();
    let points: Vec<_> = report
        .methods
        .iter()
        .map(|m| m.result.as_ref().map(|r| r.sigma_points()).transpose())
        .collect::<Result<_>>()?;
    let mut sums = vec![0.0; points.len()];
    for &(mu, v) in &draws {
        let truth = ut_eval(&two_point_sigma_points(mu, v)?, &cfg.f);
        let mut errors = Vec::new();
        for (k, p) in points.iter().enumerate() {
            if let Some(p) = p {
                let e = (truth - ut_eval(p, &cfg.f)).abs();
                sums[k] += e;
                errors.push(e);
            }
        }
        report.samples.push(SampleRow { mu, v, truth, errors });
    }
    for (m, (s, p)) in report.methods.iter_mut().zip(sums.iter().zip(&points)) {
        if p.is_some() {
            m.mean_error = Some(s / draws.len() as f64);
        }
    }
    report.moment_draws = Some(n_draws);
    report.timings.insert("mean_errors".into(), start.elapsed().as_secs_f64());

    if report.naive_fallback {
        report
            .notes
            .push("distortion not estimated: the set is too thin to sample".into());
    } else {
        let start = Instant::now();
        let set = build_set(&cfg.spec)?;
        let bbox = report.outer_box.clone().unwrap_or_else(|| set.prior_box().clone());
        let est = estimate_distortion(&set, &bbox, &cfg.f, cfg.n_distortion_pairs, cfg.distortion_seed())?;
        report.sampler_acceptance_rate = Some(est.acceptance_rate);
        report.distortion = Some(est);
        report.timings.insert("distortion".into(), start.elapsed().as_secs_f64());
    }
    Ok(report)
}

/// Distortion of the transform over the set, sampled inside the outer box.
pub fn run_distortion(cfg: &ExperimentConfig) -> Result<DistortionEstimate> {
    cfg.validate()?;
    let set = build_set(&cfg.spec)?;
    let (bbox, _) = outer_box(&set, cfg.relaxation_order, &PopOptions::default())?;
    estimate_distortion(&set, &bbox, &cfg.f, cfg.n_distortion_pairs, cfg.distortion_seed())
}
