//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line
//! before asserting.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robust_ut::experiment::{run_experiment, run_solve, ExperimentConfig};
use robust_ut::lasserre::{pop_bound, Pop, PopOptions};
use robust_ut::momentset::{build_set, membership, MomentSpec};
use robust_ut::poly::{basis, Polynomial};
use robust_ut::robust::{min_ball_center, naive_result, normal_sigma_points, outer_box, Method};
use robust_ut::sdp::{sdp_solve, SdpConstraint, SdpProblem, SdpSolution, SdpStatus, SolverOptions, SymBlock};
use robust_ut::Error;

fn verdict(n: u32, pass: bool, detail: String) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n}: {detail}");
}

fn baseline() -> MomentSpec {
    MomentSpec {
        n_sigma: 2,
        epsilon: 0.01,
        known: BTreeMap::new(),
        intervals: BTreeMap::from([(1, (-3.0, 4.0)), (2, (0.0, 5.0))]),
    }
}

/// Intervals around the first two moments of a random distribution, so
/// the set is nonempty.
fn random_spec(rng: &mut ChaCha8Rng) -> MomentSpec {
    let n_sigma = rng.random_range(2..=3);
    let mu: f64 = rng.random_range(-1.0..1.0);
    let var: f64 = rng.random_range(0.5..2.0);
    let a: f64 = rng.random_range(0.1..1.0);
    let b: f64 = rng.random_range(0.2..1.5);
    let m2 = mu * mu + var;
    MomentSpec {
        n_sigma,
        epsilon: rng.random_range(0.02..0.2),
        known: BTreeMap::new(),
        intervals: BTreeMap::from([(1, (mu - a, mu + a)), (2, (m2 - b, m2 + b))]),
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[test]
fn criterion_01_naive_reproduction() {
    let spec = baseline();
    let start = Instant::now();
    let r = naive_result(&spec).unwrap();
    let elapsed = start.elapsed();
    let err = dist(&r.z, &[2.0, -1.0]).max(dist(&r.w, &[0.5, 0.5]));
    verdict(
        1,
        err <= 1e-9 && elapsed.as_secs_f64() < 1e-3,
        format!("z={:?} w={:?} error={err:e} runtime={elapsed:?}", r.z, r.w),
    );
}

#[test]
fn criterion_02_outer_box_reproduction() {
    let set = build_set(&baseline()).unwrap();
    let start = Instant::now();
    let (b, diag) = outer_box(&set, 2, &PopOptions::default()).unwrap();
    let elapsed = start.elapsed();
    let center = b.center();
    let err = dist(&center, &[0.0, 0.0, 0.5, 0.5]);
    let optimal = diag.problems.iter().filter(|p| p.status == SdpStatus::Optimal).count();
    verdict(
        2,
        err <= 1e-2 && diag.problems.len() == 8 && optimal == 8 && elapsed.as_secs_f64() < 30.0,
        format!(
            "center={center:?} error={err:e} optimal={optimal}/{} runtime={elapsed:?}",
            diag.problems.len()
        ),
    );
}

#[test]
fn criterion_03_min_ball_point() {
    let set = build_set(&baseline()).unwrap();
    let opts = PopOptions::default();
    let (b, _) = outer_box(&set, 2, &opts).unwrap();
    let r = min_ball_center(&set, &b, 2, &opts).unwrap();
    let point = r.center();
    let member = membership(&point, &set, 1e-4).unwrap();
    let inside = b.contains(&point, 1e-6);
    verdict(3, member && inside, format!("point={point:?} member={member} inside_box={inside}"));
}

#[test]
fn criterion_04_error_ranking() {
    let mut lines = Vec::new();
    let mut ranked = true;
    let mut tenfold = true;
    for seed in 0..5 {
        let cfg = ExperimentConfig {
            methods: vec![Method::Naive, Method::OuterBox],
            seed,
            ..ExperimentConfig::new(baseline())
        };
        let r = run_experiment(&cfg).unwrap();
        let naive = r.mean_error(Method::Naive).unwrap();
        let m1 = r.mean_error(Method::OuterBox).unwrap();
        ranked &= m1 < naive;
        tenfold &= m1 < 0.1 * naive;
        lines.push(format!("seed {seed}: naive={naive:.4e} method1={m1:.4e}"));
    }
    verdict(
        4,
        ranked && tenfold,
        format!("below_naive={ranked} below_tenth={tenfold} [{}]", lines.join(", ")),
    );
}

#[test]
fn criterion_05_distortion() {
    let mut d = Vec::new();
    for seed in 0..5 {
        let cfg = ExperimentConfig {
            methods: vec![Method::OuterBox],
            n_moment_samples: 1,
            seed,
            ..ExperimentConfig::new(baseline())
        };
        d.push(run_experiment(&cfg).unwrap().distortion.unwrap().d_max);
    }
    let pass = d.iter().all(|v| (0.9..=1.05).contains(v));
    verdict(5, pass, format!("d_max per seed {d:?}"));
}

#[test]
fn criterion_06_box_center_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut specs = vec![baseline()];
    specs.extend((0..3).map(|_| random_spec(&mut rng)));
    let mut pass = true;
    let mut lines = Vec::new();
    for (i, spec) in specs.into_iter().enumerate() {
        let cfg = ExperimentConfig {
            methods: vec![Method::OuterBox, Method::McOracle],
            n_oracle_samples: 1000,
            seed: i as u64,
            ..ExperimentConfig::new(spec)
        };
        let r = run_solve(&cfg).unwrap();
        let b = r.outer_box.as_ref().unwrap();
        let (Some(bc), Some(mc)) = (r.result(Method::OuterBox), r.result(Method::McOracle)) else {
            pass = false;
            lines.push(format!("spec {i}: a method failed {:?}", r.methods));
            continue;
        };
        let gap = dist(&bc.center(), &mc.center());
        let bound = b.diameter() / 2.0 + 1e-6;
        pass &= gap <= bound;
        lines.push(format!("spec {i}: distance={gap:.4} bound={bound:.4}"));
    }
    verdict(6, pass, lines.join(", "));
}

#[test]
fn criterion_07_boundedness() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut specs = vec![baseline()];
    specs.extend((0..4).map(|_| random_spec(&mut rng)));
    let mut finite = true;
    for spec in &specs {
        let set = build_set(spec).unwrap();
        let (b, _) = outer_box(&set, 2, &PopOptions::default()).unwrap();
        finite &= b.lower().iter().chain(b.upper()).all(|v| v.is_finite());
    }
    let unbounded = [
        BTreeMap::from([(1, (-1.0, 1.0))]),
        BTreeMap::from([(1, (-1.0, 1.0)), (3, (-2.0, 2.0))]),
    ];
    let rejected = unbounded.into_iter().all(|intervals| {
        let spec = MomentSpec {
            intervals,
            ..baseline()
        };
        matches!(spec.validate(), Err(Error::Validation(_)))
    });
    verdict(
        7,
        finite && rejected,
        format!("finite bounds on {} specs: {finite}; odd-only specs rejected: {rejected}", specs.len()),
    );
}

#[test]
fn criterion_08_normal_sigma_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mu: f64 = rng.random_range(-5.0..5.0);
        let v: f64 = rng.random_range(0.01..4.0);
        let s = normal_sigma_points(mu, v).unwrap();
        let central = |k: i32| s.z().iter().zip(s.w()).map(|(z, w)| w * (z - mu).powi(k)).sum::<f64>();
        let expected = [0.0, v, 0.0, 3.0 * v * v];
        for (k, e) in (1..=4).zip(expected) {
            worst = worst.max((central(k) - e).abs());
        }
    }
    verdict(8, worst <= 1e-9, format!("max central-moment error {worst:e}"));
}

/// Grid minimum over [-1, 1]^n, refined by compass search from the best
/// grid points.
fn box_minimum(p: &Polynomial, n: usize) -> f64 {
    let steps = match n {
        1 => 2000,
        2 => 200,
        _ => 40,
    };
    let h = 2.0 / steps as f64;
    let total = (steps + 1usize).pow(n as u32);
    let mut pts: Vec<(f64, Vec<f64>)> = (0..total)
        .map(|mut idx| {
            let x: Vec<f64> = (0..n)
                .map(|_| {
                    let i = idx % (steps + 1);
                    idx /= steps + 1;
                    -1.0 + h * i as f64
                })
                .collect();
            (p.eval(&x).unwrap(), x)
        })
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = pts[0].0;
    for (mut fx, mut x) in pts.into_iter().take(10) {
        let mut step = h;
        while step > 1e-10 {
            let mut moved = false;
            for i in 0..n {
                for dir in [-1.0, 1.0] {
                    let mut y = x.clone();
                    y[i] = (y[i] + dir * step).clamp(-1.0, 1.0);
                    let fy = p.eval(&y).unwrap();
                    if fy < fx {
                        (fx, x, moved) = (fy, y, true);
                    }
                }
            }
            if !moved {
                step /= 2.0;
            }
        }
        best = best.min(fx);
    }
    best
}

#[test]
fn criterion_09_lasserre_soundness() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let opts = PopOptions::default();
    let mut pass = true;
    let mut certified = 0;
    let mut worst_bound = f64::NEG_INFINITY;
    let mut worst_cert = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(1..=3);
        let terms: Vec<_> = basis(n, 4)
            .into_iter()
            .map(|m| (m.exponents().to_vec(), rng.random_range(-1.0..1.0)))
            .collect();
        let objective = Polynomial::from_terms(n, terms).unwrap();
        let mut pop = Pop::minimize(objective.clone());
        for i in 0..n {
            let xi = Polynomial::var(n, i);
            pop = pop.with_inequality(Polynomial::constant(n, 1.0) - &xi * &xi);
        }
        let r = pop_bound(&pop, 2, &opts).unwrap();
        let grid = box_minimum(&objective, n);
        let Some(bound) = r.bound else {
            pass = false;
            continue;
        };
        worst_bound = worst_bound.max(bound - grid);
        pass &= bound <= grid + 1e-4;
        if r.certified {
            certified += 1;
            worst_cert = worst_cert.max((bound - grid).abs());
            pass &= (bound - grid).abs() <= 1e-4;
        }
    }
    verdict(
        9,
        pass,
        format!("max(bound - grid)={worst_bound:e}; certified {certified}/20 with max deviation {worst_cert:e}"),
    );
}

fn unit(dim: usize, i: usize, j: usize) -> SymBlock {
    let mut b = SymBlock::zeros(dim);
    b.set(i, j, 1.0);
    b
}

fn scalar(v: f64) -> SymBlock {
    let mut b = SymBlock::zeros(1);
    b.set(0, 0, v);
    b
}

fn unit_diagonal(c: SymBlock) -> SdpProblem {
    SdpProblem::new(
        vec![2],
        vec![c],
        vec![
            SdpConstraint { a: vec![unit(2, 0, 0)], b: 1.0 },
            SdpConstraint { a: vec![unit(2, 1, 1)], b: 1.0 },
        ],
    )
    .unwrap()
}

/// Best of `f` over the correlation parameter `r` in [-1, 1].
fn correlation_grid(f: impl Fn(f64) -> f64, maximize: bool) -> f64 {
    let vals = (0..=20_000).map(|k| f(-1.0 + 2.0 * k as f64 / 20_000.0));
    if maximize {
        vals.fold(f64::NEG_INFINITY, f64::max)
    } else {
        vals.fold(f64::INFINITY, f64::min)
    }
}

#[test]
fn criterion_10_sdp_solver() {
    let mut off_diag = SymBlock::zeros(2);
    off_diag.add(0, 1, -1.0);
    let problems = [
        (
            "scalar cone boundary",
            SdpProblem::new(vec![1], vec![scalar(1.0)], vec![SdpConstraint { a: vec![scalar(0.0)], b: 0.0 }]).unwrap(),
        ),
        ("trace with unit diagonal", unit_diagonal(SymBlock::identity(2))),
        ("maximize off-diagonal", unit_diagonal(off_diag)),
        (
            "two-block LP",
            SdpProblem::new(
                vec![1, 1],
                vec![scalar(1.0), scalar(2.0)],
                vec![SdpConstraint { a: vec![scalar(1.0), scalar(1.0)], b: 1.0 }],
            )
            .unwrap(),
        ),
    ];
    let mut pass = true;
    let mut lines = Vec::new();
    let mut solutions: Vec<SdpSolution> = Vec::new();
    for (name, p) in &problems {
        let sol = sdp_solve(p, &SolverOptions::default()).unwrap();
        let k = sol.kkt(p);
        let worst = k.primal_residual.max(k.dual_residual).max(k.complementarity.abs());
        pass &= sol.status == SdpStatus::Optimal && worst <= 1e-6 && k.min_eig_x >= -1e-6 && k.min_eig_s >= -1e-6;
        lines.push(format!("{name}: {:?} residual {worst:e}", sol.status));
        solutions.push(sol);
    }
    let trace_err = (solutions[1].primal_obj - correlation_grid(|_| 2.0, false)).abs();
    let offdiag_err = (-solutions[2].primal_obj - correlation_grid(|r| 2.0 * r, true)).abs();
    pass &= trace_err <= 1e-6 && offdiag_err <= 1e-6;
    lines.push(format!("brute-force gaps {trace_err:e}, {offdiag_err:e}"));
    verdict(10, pass, lines.join("; "));
}

#[test]
fn criterion_11_determinism() {
    let cfg = ExperimentConfig {
        seed: 11,
        n_distortion_pairs: 100,
        ..ExperimentConfig::new(baseline())
    };
    let a = run_experiment(&cfg).unwrap().to_json(false).unwrap();
    let b = run_experiment(&cfg).unwrap().to_json(false).unwrap();
    let other = run_experiment(&ExperimentConfig { seed: 12, ..cfg.clone() })
        .unwrap()
        .to_json(false)
        .unwrap();
    verdict(
        11,
        a == b && a != other,
        format!("identical={} seed-sensitive={} bytes={}", a == b, a != other, a.len()),
    );
}
