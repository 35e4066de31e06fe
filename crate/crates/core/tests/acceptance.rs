//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use online_gne::bandit::estimate_gradients;
use online_gne::bregman::{check_triangle, mirror_step, FeasibleSet, MirrorKind, MirrorMap, SetKind};
use online_gne::config::{preset, Built, ExperimentConfig};
use online_gne::experiment::{run_seed, FIT_EPSILON};
use online_gne::game::{
    cournot_equilibrium_coordinate, limit_gne_bruteforce_from, CournotVariant, GameOracle, NashCournot,
};
use online_gne::metrics::{
    consensus_residual, horizon_grid, loglog_fit_between, max_regret, offset_by, regret_all, tracking_error, violation,
};
use online_gne::trajectory::{Direction, TrajectoryLog};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn at(horizons: &[usize], values: &[f64], h: usize) -> f64 {
    values[horizons.iter().position(|&x| x == h).expect("horizon on grid")]
}

fn run_full(cfg: &ExperimentConfig) -> (Built, TrajectoryLog, Duration) {
    let built = cfg.build().expect("preset builds");
    let start = Instant::now();
    let log = run_seed(cfg, &built, cfg.seeds[0]).expect("run succeeds");
    (built, log, start.elapsed())
}

fn benchmark_bounds_and_growth() -> (Outcome, Outcome, Outcome) {
    let mut cfg = preset("cournot-regret").unwrap();
    cfg.parallel = false;
    cfg.check_invariants = true;
    let (built, log, elapsed) = run_full(&cfg);
    let bounds = *built.game.bounds();

    let mut dual_violations = 0;
    for rec in &log.rounds {
        let cap = bounds.l / rec.beta * (1.0 + 1e-9);
        for (lam, mix) in rec.duals.iter().zip(&rec.mixed_duals) {
            let n = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
            dual_violations += usize::from(!(n(lam) <= cap)) + usize::from(!(n(mix) <= cap));
        }
    }
    let curve = consensus_residual(&log, built.graph.sigma(), &bounds);
    let consensus = curve.violations();
    let c1 = outcome(
        dual_violations == 0 && consensus == 0 && elapsed < Duration::from_secs(60),
        format!(
            "dual-bound violations {dual_violations}, consensus violations {consensus}, {} rounds in {:.2}s single-threaded",
            log.len(),
            elapsed.as_secs_f64()
        ),
    );

    let horizons = horizon_grid(100, 5000);
    let reg = max_regret(&regret_all(&log, built.game.as_ref(), &horizons).unwrap());
    let per = |h| at(&horizons, &reg, h) / h as f64;
    let ratio = per(5000) / per(500);
    let fit = loglog_fit_between(&horizons, &reg, 1000, 5000).unwrap();
    let c2 = outcome(
        ratio < 0.5 && fit.slope <= 0.95 && fit.r2 >= 0.9,
        format!(
            "Reg/T ratio 5000:500 = {ratio:.4} (< 0.5), slope {:.4} (<= 0.95), r2 {:.4} (>= 0.9)",
            fit.slope, fit.r2
        ),
    );

    let vio = violation(&log, &horizons).unwrap().values;
    let zero = vio.iter().all(|v| *v == 0.0);
    let vals = if vio.iter().any(|v| *v <= 0.0) { offset_by(&vio, FIT_EPSILON) } else { vio };
    let vratio = (at(&horizons, &vals, 5000) / 5000.0) / (at(&horizons, &vals, 500) / 500.0);
    let vfit = loglog_fit_between(&horizons, &vals, 1000, 5000).unwrap();
    let c3 = outcome(
        vratio < 0.5 && vfit.slope <= 0.9,
        format!(
            "R_g/T ratio 5000:500 = {vratio:.4} (< 0.5), slope {:.4} (<= 0.9){}",
            vfit.slope,
            if zero { format!(", R_g identically zero, fitted with +{FIT_EPSILON:e}") } else { String::new() }
        ),
    );
    (c1, c2, c3)
}

fn tracking() -> Outcome {
    let cfg = preset("cournot-tracking").unwrap();
    let (built, log, _) = run_full(&cfg);
    let limit = built.limit.as_ref().expect("converging market has a limit");
    let err = tracking_error(&log, limit.as_ref(), false).unwrap();
    let t_end = log.len();
    let ratio = err[t_end - 1] / err[200 - 1];
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let first = mean(&err[..10]);
    let last = mean(&err[t_end / 10..]);

    // the closed form at s = 0 against the saddle solver from five starts
    let n = limit.n_players();
    let closed: Vec<f64> = (0..n).map(|i| cournot_equilibrium_coordinate(n, i, 0.0)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for probe in 0..5 {
        let start: Vec<Vec<f64>> = match probe {
            0 => vec![vec![0.0]; n],
            1 => vec![vec![30.0]; n],
            _ => (0..n).map(|_| vec![rng.gen_range(0.0..30.0)]).collect(),
        };
        let solved = limit_gne_bruteforce_from(limit.as_ref(), 1e-10, start).unwrap();
        for (c, s) in closed.iter().zip(&solved.point) {
            worst = worst.max((c - s[0]).abs());
        }
    }
    let stored = limit.gne().unwrap();
    for (c, s) in closed.iter().zip(&stored) {
        worst = worst.max((c - s[0]).abs());
    }
    outcome(
        ratio <= 0.1 && last < first && worst <= 1e-5,
        format!(
            "|x_T - x*| / |x_200 - x*| = {ratio:.4} (<= 0.1), last-decade mean {last:.4} < first-decade mean {first:.4}, x* cross-check max diff {worst:.1e} (<= 1e-5)"
        ),
    )
}

fn averaged_rate() -> Outcome {
    let cfg = preset("cournot-averaged").unwrap();
    let (built, log, _) = run_full(&cfg);
    let err = tracking_error(&log, built.limit.as_ref().unwrap().as_ref(), true).unwrap();
    let horizons = horizon_grid(200, log.len());
    let vals: Vec<f64> = horizons.iter().map(|&h| err[h - 1]).collect();
    let fit = loglog_fit_between(&horizons, &vals, 2000, 20000).unwrap();
    let (b1, b2, p, q) = (0.6f64, 0.2f64, 1.0f64, 1.0f64);
    let order = (1.0 - b1).min(b1 - 2.0 * b2).min(b2).min(p).min(q - b2);
    let cap = -order + 0.15;
    outcome(
        fit.slope <= cap,
        format!("slope of |xbar_T - x*|^2 over [2000, 20000] = {:.4} (<= {cap:.2})", fit.slope),
    )
}

fn bandit() -> (Outcome, f64) {
    let cfg = preset("cournot-bandit").unwrap();
    assert_eq!(cfg.seeds.len(), 10);
    let built = cfg.build().unwrap();
    let horizons = horizon_grid(100, 5000);
    let start = Instant::now();
    let logs: Vec<TrajectoryLog> = cfg.seeds.iter().map(|&s| run_seed(&cfg, &built, s).unwrap()).collect();
    let elapsed = start.elapsed();

    let k = logs.len() as f64;
    let mut reg = vec![0.0; horizons.len()];
    let mut vio = vec![0.0; horizons.len()];
    let mut worst_ratio: f64 = 0.0;
    let l = built.game.bounds().l;
    for log in &logs {
        for (acc, v) in reg.iter_mut().zip(max_regret(&regret_all(log, built.game.as_ref(), &horizons).unwrap())) {
            *acc += v / k;
        }
        for (acc, v) in vio.iter_mut().zip(violation(log, &horizons).unwrap().values) {
            *acc += v / k;
        }
        for rec in &log.rounds {
            let b = rec.bandit.as_ref().expect("bandit log");
            for i in 0..log.n_players() {
                let n = log.dims[i];
                let (grad, _) = estimate_gradients(rec.costs[i], &rec.constraints[i], n, b.deltas[i], b.directions[i]);
                let norm = grad.iter().map(|a| a * a).sum::<f64>().sqrt();
                worst_ratio = worst_ratio.max(norm / (n as f64 * l / b.deltas[i]));
            }
        }
    }
    let vals = |v: &[f64]| if v.iter().any(|x| *x <= 0.0) { offset_by(v, FIT_EPSILON) } else { v.to_vec() };
    let (reg, vio) = (vals(&reg), vals(&vio));
    let ratio = |c: &[f64]| (at(&horizons, c, 5000) / 5000.0) / (at(&horizons, c, 500) / 500.0);
    let (rr, vr) = (ratio(&reg), ratio(&vio));
    let rs = loglog_fit_between(&horizons, &reg, 1000, 5000).unwrap().slope;
    let vs = loglog_fit_between(&horizons, &vio, 1000, 5000).unwrap().slope;
    (
        outcome(
            rr < 0.6 && vr < 0.6 && rs <= 0.95 && vs <= 0.95 && elapsed < Duration::from_secs(600),
            format!(
                "10 seeds: Reg/T ratio {rr:.4}, R_g/T ratio {vr:.4} (< 0.6); slopes {rs:.4}, {vs:.4} (<= 0.95); {:.1}s",
                elapsed.as_secs_f64()
            ),
        ),
        worst_ratio,
    )
}

/// Average of `(n/δ) f(x + δw) w` over all `2n` signed coordinate directions.
fn full_direction_average(f: &dyn Fn(&[f64]) -> f64, x: &[f64], delta: f64) -> Vec<f64> {
    let n = x.len();
    let mut acc = vec![0.0; n];
    for coord in 0..n {
        for positive in [true, false] {
            let w = Direction { coord, positive };
            let mut q = x.to_vec();
            q[coord] += delta * w.sign();
            let (g, _) = estimate_gradients(f(&q), &[], n, delta, w);
            for (a, v) in acc.iter_mut().zip(g) {
                *a += v / (2 * n) as f64;
            }
        }
    }
    acc
}

fn central_difference(f: &dyn Fn(&[f64]) -> f64, x: &[f64], delta: f64) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let (mut up, mut down) = (x.to_vec(), x.to_vec());
            up[j] += delta;
            down[j] -= delta;
            (f(&up) - f(&down)) / (2.0 * delta)
        })
        .collect()
}

fn estimator_identity(round_ratio: f64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let sq = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>();
    let market = NashCournot::new(CournotVariant::Oscillating, 20).unwrap();
    for _ in 0..20 {
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let delta = rng.gen_range(0.01..1.0);
        let (a, b) = (full_direction_average(&sq, &x, delta), central_difference(&sq, &x, delta));
        worst = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(worst, f64::max);

        let profile: Vec<Vec<f64>> = (0..20).map(|_| vec![rng.gen_range(1.0..29.0)]).collect();
        let i = rng.gen_range(0..20);
        let t = rng.gen_range(1..5000);
        let cost = |y: &[f64]| {
            let mut p = profile.clone();
            p[i] = y.to_vec();
            market.cost_value(i, t, &p)
        };
        let (a, b) = (full_direction_average(&cost, &profile[i], delta), central_difference(&cost, &profile[i], delta));
        worst = a.iter().zip(&b).map(|(p, q)| (p - q).abs() / q.abs().max(1.0)).fold(worst, f64::max);
    }
    outcome(
        worst <= 1e-9 && round_ratio <= 1.0 + 1e-12,
        format!("max estimator-vs-central-difference gap {worst:.1e} (<= 1e-9), max |grad estimate| / (n L / delta) over all bandit rounds {round_ratio:.4} (<= 1)"),
    )
}

fn grid_minimize_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let steps = 2000;
    let h = (hi - lo) / steps as f64;
    let best = (0..=steps).map(|k| lo + k as f64 * h).min_by(|a, b| f(*a).total_cmp(&f(*b))).unwrap();
    // ternary refinement around the best grid point
    let (mut a, mut b) = ((best - h).max(lo), (best + h).min(hi));
    for _ in 0..200 {
        let (m1, m2) = (a + (b - a) / 3.0, b - (b - a) / 3.0);
        if f(m1) <= f(m2) { b = m2 } else { a = m1 }
    }
    0.5 * (a + b)
}

fn simplex_projection(v: &[f64], r: f64) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, uk) in u.iter().enumerate() {
        cum += uk;
        let cand = (cum - r) / (k + 1) as f64;
        if uk - cand > 0.0 {
            theta = cand;
        }
    }
    v.iter().map(|a| (a - theta).max(0.0)).collect()
}

/// Projected gradient with Armijo backtracking on `α⟨y, g⟩ + KL(y, x)`.
fn entropy_step_oracle(x: &[f64], g: &[f64], alpha: f64, r: f64) -> Vec<f64> {
    let obj = |y: &[f64]| -> f64 {
        y.iter()
            .zip(x)
            .zip(g)
            .map(|((yj, xj), gj)| alpha * gj * yj + if *yj > 0.0 { yj * (yj / xj).ln() } else { 0.0 } - yj + xj)
            .sum()
    };
    let mut y = x.to_vec();
    for _ in 0..200_000 {
        let grad: Vec<f64> = y.iter().zip(x).zip(g).map(|((yj, xj), gj)| alpha * gj + (yj.max(1e-300) / xj).ln()).collect();
        let f0 = obj(&y);
        let mut eta = 1.0;
        let next = loop {
            let cand = simplex_projection(&y.iter().zip(&grad).map(|(a, d)| a - eta * d).collect::<Vec<_>>(), r);
            let dec: f64 = grad.iter().zip(&cand).zip(&y).map(|((d, c), a)| d * (c - a)).sum();
            let dist: f64 = cand.iter().zip(&y).map(|(c, a)| (c - a).powi(2)).sum();
            if obj(&cand) <= f0 + dec + dist / (2.0 * eta) || eta < 1e-12 {
                break cand;
            }
            eta *= 0.5;
        };
        let moved: f64 = next.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        y = next;
        if moved < 1e-14 {
            break;
        }
    }
    y
}

fn mirror_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut box_gap: f64 = 0.0;
    for _ in 0..100 {
        let dim = rng.gen_range(1..4);
        let lower: Vec<f64> = (0..dim).map(|_| rng.gen_range(-5.0..0.0)).collect();
        let upper: Vec<f64> = lower.iter().map(|l| l + rng.gen_range(0.5..10.0)).collect();
        let set = FeasibleSet::new(SetKind::Box { lower: lower.clone(), upper: upper.clone() }).unwrap();
        let map = MirrorMap::for_set(MirrorKind::SquaredNorm, &set).unwrap();
        let x: Vec<f64> = lower.iter().zip(&upper).map(|(l, u)| rng.gen_range(*l..*u)).collect();
        let g: Vec<f64> = (0..dim).map(|_| rng.gen_range(-20.0..20.0)).collect();
        let alpha = rng.gen_range(0.01..2.0);
        let y = mirror_step(&map, &set, &x, &g, alpha).unwrap();
        for j in 0..dim {
            let yj = grid_minimize_1d(|v| alpha * g[j] * v + (v - x[j]).powi(2), lower[j], upper[j]);
            box_gap = box_gap.max((yj - y[j]).abs());
        }
    }

    let mut simplex_gap: f64 = 0.0;
    for _ in 0..100 {
        let dim = rng.gen_range(2..5);
        let r = rng.gen_range(0.5..3.0);
        let set = FeasibleSet::new(SetKind::Simplex { radius: r, dim }).unwrap();
        let map = MirrorMap::for_set(MirrorKind::NegativeEntropy, &set).unwrap();
        let raw: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let x: Vec<f64> = raw.iter().map(|v| r * v / s).collect();
        let g: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let alpha = rng.gen_range(0.05..1.0);
        let y = mirror_step(&map, &set, &x, &g, alpha).unwrap();
        let z = entropy_step_oracle(&x, &g, alpha, r);
        simplex_gap = y.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(simplex_gap, f64::max);
    }

    let mut triangle: f64 = 0.0;
    let set = FeasibleSet::new(SetKind::Box { lower: vec![-3.0; 3], upper: vec![3.0; 3] }).unwrap();
    let euclid = MirrorMap::for_set(MirrorKind::SquaredNorm, &set).unwrap();
    let simplex = FeasibleSet::new(SetKind::Simplex { radius: 1.0, dim: 3 }).unwrap();
    let entropy = MirrorMap::for_set(MirrorKind::NegativeEntropy, &simplex).unwrap();
    for _ in 0..1000 {
        let mut pt = |s: &FeasibleSet| s.sample(&mut rng);
        let (a, b, c) = (pt(&set), pt(&set), pt(&set));
        triangle = triangle.max(check_triangle(&euclid, &a, &b, &c).unwrap().abs());
        let (a, b, c) = (pt(&simplex), pt(&simplex), pt(&simplex));
        if [&a, &b, &c].iter().all(|v| v.iter().all(|x| *x > 1e-6)) {
            triangle = triangle.max(check_triangle(&entropy, &a, &b, &c).unwrap().abs());
        }
    }
    outcome(
        box_gap <= 1e-6 && simplex_gap <= 1e-6 && triangle <= 1e-9,
        format!("box vs grid search {box_gap:.1e}, simplex vs projected gradient {simplex_gap:.1e} (<= 1e-6), three-point residual {triangle:.1e} (<= 1e-9)"),
    )
}

fn determinism() -> Outcome {
    let mut mismatches = Vec::new();
    for name in ["cournot-regret", "cournot-bandit", "cournot-tracking", "cournot-averaged"] {
        let mut cfg = preset(name).unwrap();
        let seed = cfg.seeds[0];
        let built = cfg.build().unwrap();
        let mut logs = Vec::new();
        for parallel in [false, false, true] {
            cfg.parallel = parallel;
            logs.push(run_seed(&cfg, &built, seed).unwrap().to_csv_bytes().unwrap());
        }
        if logs.windows(2).any(|w| w[0] != w[1]) {
            mismatches.push(name);
        }
    }
    outcome(
        mismatches.is_empty(),
        format!("4 presets x (sequential, sequential, parallel) byte-identical; mismatches: {mismatches:?}"),
    )
}

fn main() -> ExitCode {
    let (c1, c2, c3) = benchmark_bounds_and_growth();
    let c4 = tracking();
    let c5 = averaged_rate();
    let (c6, round_ratio) = bandit();
    let c7 = estimator_identity(round_ratio);
    let c8 = mirror_oracles();
    let c9 = determinism();

    let names = [
        "dual and consensus bounds",
        "sublinear regret",
        "sublinear violation",
        "equilibrium tracking",
        "averaged-iterate rate",
        "bandit regret and violation",
        "one-point estimator",
        "mirror-step oracles",
        "determinism",
    ];
    let mut failed = 0;
    for (k, (name, o)) in names.iter().zip([c1, c2, c3, c4, c5, c6, c7, c8, c9]).enumerate() {
        println!("{} {}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, k + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
