//! Performance measures computed from trajectory logs alone (plus the game
//! oracle where a comparator must be evaluated).
//!
//! Regret uses, for each horizon `T`, its own best fixed action in
//! hindsight over `∩_{t≤T} {y ∈ Ω_i : g_{i,t}(y) ≤ −Σ_{j≠i} g_{j,t}(x_{j,t})}`.
//! For a payoff-based log every quantity refers to the played actions.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bregman::{dot, norm, FeasibleSet};
use crate::error::{Error, Result};
use crate::game::{GameBounds, GameOracle, LimitGame};
use crate::trajectory::TrajectoryLog;

/// First-order stopping tolerance of the comparator solve.
pub const COMPARATOR_TOL: f64 = 1e-8;
const FEASIBILITY_TOL: f64 = 1e-7;

/// `aᵀy ≤ b`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    pub normal: Vec<f64>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparator {
    pub point: Vec<f64>,
    /// The hindsight feasible set was empty and `Ω_i` was used instead, so
    /// the reported regret upper-bounds the defined one.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub player: usize,
    pub horizons: Vec<usize>,
    pub regret: Vec<f64>,
    pub comparators: Vec<Comparator>,
}

impl RegretReport {
    pub fn averaged(&self) -> Vec<f64> {
        self.horizons
            .iter()
            .zip(&self.regret)
            .map(|(&t, r)| r / t as f64)
            .collect()
    }

    pub fn any_fallback(&self) -> bool {
        self.comparators.iter().any(|c| c.fallback)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub horizons: Vec<usize>,
    /// `R_g(T) = ‖[Σ_{t≤T} g_t(x_t)]_+‖`.
    pub values: Vec<f64>,
    /// `Σ_{t≤T} g_t(x_t)` before the positive part.
    pub cumulative: Vec<Vec<f64>>,
}

impl ViolationReport {
    pub fn averaged(&self) -> Vec<f64> {
        self.horizons
            .iter()
            .zip(&self.values)
            .map(|(&t, r)| r / t as f64)
            .collect()
    }
}

fn check_horizons(horizons: &[usize], len: usize) -> Result<()> {
    let mut prev = 0;
    for &h in horizons {
        if h == 0 || h > len || h <= prev {
            return Err(Error::BadHorizon { horizon: h, len });
        }
        prev = h;
    }
    Ok(())
}

/// `step, 2·step, …` up to and including `max` when it is a multiple.
pub fn horizon_grid(step: usize, max: usize) -> Vec<usize> {
    (1..=max / step.max(1)).map(|k| k * step.max(1)).collect()
}

/// Accumulated own-cost data for one player up to some horizon.
#[derive(Debug, Clone)]
struct Accumulator {
    quad: Vec<Vec<f64>>,
    linear: Vec<f64>,
    constant: f64,
    rows: BTreeMap<Vec<u64>, (Vec<f64>, f64)>,
    actual: f64,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Self {
            quad: vec![vec![0.0; n]; n],
            linear: vec![0.0; n],
            constant: 0.0,
            rows: BTreeMap::new(),
            actual: 0.0,
        }
    }

    fn halfspaces(&self) -> Vec<HalfSpace> {
        self.rows
            .values()
            .map(|(normal, rhs)| HalfSpace {
                normal: normal.clone(),
                rhs: *rhs,
            })
            .collect()
    }

    fn add_row(&mut self, normal: Vec<f64>, rhs: f64) {
        let key = normal.iter().map(|v| v.to_bits()).collect();
        self.rows
            .entry(key)
            .and_modify(|e| e.1 = e.1.min(rhs))
            .or_insert((normal, rhs));
    }
}

/// Hindsight rows `∇g_{i,t}ᵀ y ≤ ∇g_{i,t}ᵀ x_{i,t} − g_t(x_t)` for round `r`.
fn round_rows(log: &TrajectoryLog, oracle: &dyn GameOracle, i: usize, r: usize) -> Vec<(Vec<f64>, f64)> {
    let rec = &log.rounds[r];
    let played = rec.played();
    let jac = oracle.constraint_jacobian(i, rec.t, &played[i]);
    (0..log.m)
        .map(|k| {
            let normal: Vec<f64> = jac.iter().map(|row| row[k]).collect();
            let total: f64 = rec.constraints.iter().map(|c| c[k]).sum();
            let rhs = dot(&normal, &played[i]) - total;
            (normal, rhs)
        })
        .collect()
}

fn quadratic_value(quad: &[Vec<f64>], linear: &[f64], constant: f64, y: &[f64]) -> f64 {
    let qy: f64 = quad
        .iter()
        .zip(y)
        .map(|(row, yi)| yi * dot(row, y))
        .sum();
    qy + dot(linear, y) + constant
}

fn quadratic_grad(quad: &[Vec<f64>], linear: &[f64], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|r| (0..n).map(|c| (quad[r][c] + quad[c][r]) * y[c]).sum::<f64>() + linear[r])
        .collect()
}

/// Euclidean projection onto `set ∩ halfspaces` by Dykstra's method.
/// Returns the point and whether it satisfies every piece to tolerance.
pub fn project_intersection(set: &FeasibleSet, halfspaces: &[HalfSpace], y: &[f64]) -> (Vec<f64>, bool) {
    let feasible = |x: &[f64]| {
        set.contains(x, FEASIBILITY_TOL)
            && halfspaces
                .iter()
                .all(|h| dot(&h.normal, x) <= h.rhs + FEASIBILITY_TOL * (1.0 + h.rhs.abs()))
    };
    if halfspaces.is_empty() {
        return (set.project(y), true);
    }
    let n = y.len();
    let k = halfspaces.len() + 1;
    let mut x = y.to_vec();
    let mut incr = vec![vec![0.0; n]; k];
    for _ in 0..20_000 {
        let before = x.clone();
        for (p, inc) in incr.iter_mut().enumerate() {
            let z: Vec<f64> = x.iter().zip(inc.iter()).map(|(a, b)| a + b).collect();
            let proj = if p == 0 {
                set.project(&z)
            } else {
                let h = &halfspaces[p - 1];
                let nn = dot(&h.normal, &h.normal);
                let excess = dot(&h.normal, &z) - h.rhs;
                if nn == 0.0 || excess <= 0.0 {
                    z.clone()
                } else {
                    z.iter().zip(&h.normal).map(|(a, b)| a - excess / nn * b).collect()
                }
            };
            *inc = z.iter().zip(&proj).map(|(a, b)| a - b).collect();
            x = proj;
        }
        let moved: f64 = x.iter().zip(&before).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if moved < 1e-14 * (1.0 + norm(&x)) {
            break;
        }
    }
    let ok = feasible(&x);
    (x, ok)
}

/// `min f` over `set ∩ halfspaces` by projected gradient. The step is
/// backtracked on a local curvature estimate,
/// `⟨∇f(y) − ∇f(x), y − x⟩ ≤ ‖y − x‖²/η`, which avoids differencing large
/// objective values.
fn projected_gradient<G>(set: &FeasibleSet, halfspaces: &[HalfSpace], start: &[f64], grad: G) -> Result<Vec<f64>>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    const MAX_ITER: usize = 100_000;
    let proj = |y: &[f64]| project_intersection(set, halfspaces, y).0;
    let mut x = proj(start);
    let mut g = grad(&x);
    let mut eta = 1.0;
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITER {
        loop {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - eta * b).collect();
            let y = proj(&trial);
            let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            let dd = dot(&d, &d);
            let gy = grad(&y);
            let curvature: f64 = gy.iter().zip(&g).zip(&d).map(|((a, b), c)| (a - b) * c).sum();
            if curvature <= dd / eta || eta < 1e-300 {
                residual = dd.sqrt() / eta;
                x = y;
                g = gy;
                break;
            }
            eta *= 0.5;
        }
        if residual <= COMPARATOR_TOL {
            return Ok(x);
        }
        eta *= 1.5;
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITER,
        residual,
    })
}

/// Exact minimiser of `q y² + l y` on `[lo, hi]`.
fn scalar_vertex(q: f64, l: f64, lo: f64, hi: f64) -> f64 {
    if q > 0.0 {
        (-l / (2.0 * q)).clamp(lo, hi)
    } else if l > 0.0 {
        lo
    } else {
        hi
    }
}

/// Feasible interval of a one-dimensional player, `None` when empty.
fn scalar_interval(set: &FeasibleSet, halfspaces: &[HalfSpace]) -> Option<(f64, f64)> {
    const FAR: f64 = 1e15;
    let mut lo = set.project(&[-FAR])[0];
    let mut hi = set.project(&[FAR])[0];
    for h in halfspaces {
        let a = h.normal[0];
        if a > 0.0 {
            hi = hi.min(h.rhs / a);
        } else if a < 0.0 {
            lo = lo.max(h.rhs / a);
        } else if h.rhs < 0.0 {
            return None;
        }
    }
    (lo <= hi + FEASIBILITY_TOL).then_some((lo, hi.max(lo)))
}

fn solve_quadratic(set: &FeasibleSet, acc: &Accumulator, start: &[f64]) -> Result<Comparator> {
    let rows = acc.halfspaces();
    if set.dim() == 1 {
        let (interval, fallback) = match scalar_interval(set, &rows) {
            Some(iv) => (iv, false),
            None => (scalar_interval(set, &[]).expect("nonempty set"), true),
        };
        let point = vec![scalar_vertex(acc.quad[0][0], acc.linear[0], interval.0, interval.1)];
        return Ok(Comparator { point, fallback });
    }
    let (_, feasible) = project_intersection(set, &rows, start);
    let rows = if feasible { rows } else { Vec::new() };
    let g = |y: &[f64]| quadratic_grad(&acc.quad, &acc.linear, y);
    let point = projected_gradient(set, &rows, start, g)?;
    Ok(Comparator {
        point,
        fallback: !feasible,
    })
}

/// Regret of player `i` at each horizon, one comparator solve per horizon.
pub fn regret(log: &TrajectoryLog, oracle: &dyn GameOracle, i: usize, horizons: &[usize]) -> Result<RegretReport> {
    check_horizons(horizons, log.len())?;
    if log.m > 0 && !oracle.constraints_affine() {
        return Err(Error::NonAffineConstraint);
    }
    let set = oracle.feasible_set(i);
    let n = oracle.action_dim(i);
    let quadratic = log
        .rounds
        .first()
        .is_some_and(|r| oracle.own_cost_quadratic(i, r.t, r.played()).is_some());
    let mut acc = Accumulator::new(n);
    let mut report = RegretReport {
        player: i,
        horizons: horizons.to_vec(),
        regret: Vec::with_capacity(horizons.len()),
        comparators: Vec::with_capacity(horizons.len()),
    };
    let mut next = 0;
    for (r, rec) in log.rounds.iter().enumerate() {
        acc.actual += rec.costs[i];
        if quadratic {
            let q = oracle
                .own_cost_quadratic(i, rec.t, rec.played())
                .ok_or_else(|| Error::InvalidGame("own-cost quadratic form disappeared mid-log".into()))?;
            for (a, b) in acc.quad.iter_mut().flatten().zip(q.quad.iter().flatten()) {
                *a += b;
            }
            for (a, b) in acc.linear.iter_mut().zip(&q.linear) {
                *a += b;
            }
            acc.constant += q.constant;
        }
        for (normal, rhs) in round_rows(log, oracle, i, r) {
            acc.add_row(normal, rhs);
        }
        if next < horizons.len() && horizons[next] == r + 1 {
            let start = &rec.played()[i];
            let (comparator, value) = if quadratic {
                let c = solve_quadratic(set, &acc, start)?;
                let v = quadratic_value(&acc.quad, &acc.linear, acc.constant, &c.point);
                (c, v)
            } else {
                general_comparator(log, oracle, i, r + 1, set, &acc, start)?
            };
            report.regret.push(acc.actual - value);
            report.comparators.push(comparator);
            next += 1;
        }
    }
    Ok(report)
}

fn general_comparator(
    log: &TrajectoryLog,
    oracle: &dyn GameOracle,
    i: usize,
    horizon: usize,
    set: &FeasibleSet,
    acc: &Accumulator,
    start: &[f64],
) -> Result<(Comparator, f64)> {
    let with = |y: &[f64], r: usize| {
        let mut x = log.rounds[r].played().to_vec();
        x[i] = y.to_vec();
        x
    };
    let f = |y: &[f64]| {
        (0..horizon)
            .map(|r| oracle.cost_value(i, log.rounds[r].t, &with(y, r)))
            .sum::<f64>()
    };
    let g = |y: &[f64]| {
        let mut total = vec![0.0; y.len()];
        for r in 0..horizon {
            for (a, b) in total.iter_mut().zip(oracle.cost_grad(i, log.rounds[r].t, &with(y, r))) {
                *a += b;
            }
        }
        total
    };
    let rows = acc.halfspaces();
    let (_, feasible) = project_intersection(set, &rows, start);
    let rows = if feasible { rows } else { Vec::new() };
    let point = projected_gradient(set, &rows, start, g)?;
    let value = f(&point);
    Ok((
        Comparator {
            point,
            fallback: !feasible,
        },
        value,
    ))
}

/// Best fixed action in hindsight for player `i` over the first `horizon`
/// rounds.
pub fn hindsight_comparator(log: &TrajectoryLog, oracle: &dyn GameOracle, i: usize, horizon: usize) -> Result<Comparator> {
    let mut report = regret(log, oracle, i, &[horizon])?;
    Ok(report.comparators.remove(0))
}

/// Regret reports for every player, computed in parallel.
pub fn regret_all(log: &TrajectoryLog, oracle: &dyn GameOracle, horizons: &[usize]) -> Result<Vec<RegretReport>> {
    (0..log.n_players())
        .into_par_iter()
        .map(|i| regret(log, oracle, i, horizons))
        .collect()
}

/// `max_i Reg_i(T)` per horizon.
pub fn max_regret(reports: &[RegretReport]) -> Vec<f64> {
    let k = reports.first().map_or(0, |r| r.regret.len());
    (0..k)
        .map(|h| reports.iter().map(|r| r.regret[h]).fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

pub fn violation(log: &TrajectoryLog, horizons: &[usize]) -> Result<ViolationReport> {
    check_horizons(horizons, log.len())?;
    let mut sum = vec![0.0; log.m];
    let mut report = ViolationReport {
        horizons: horizons.to_vec(),
        values: Vec::with_capacity(horizons.len()),
        cumulative: Vec::with_capacity(horizons.len()),
    };
    let mut next = 0;
    for (r, rec) in log.rounds.iter().enumerate() {
        for c in &rec.constraints {
            for (a, b) in sum.iter_mut().zip(c) {
                *a += b;
            }
        }
        if next < horizons.len() && horizons[next] == r + 1 {
            let pos: Vec<f64> = sum.iter().map(|v| v.max(0.0)).collect();
            report.values.push(norm(&pos));
            report.cumulative.push(sum.clone());
            next += 1;
        }
    }
    Ok(report)
}

fn stacked_distance_sq(x: &[Vec<f64>], target: &[Vec<f64>]) -> f64 {
    x.iter()
        .flatten()
        .zip(target.iter().flatten())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Per round `‖x_t − x*‖`, or `‖x̄_T − x*‖²` for the running average when
/// `averaged`.
pub fn tracking_error_to(log: &TrajectoryLog, x_star: &[Vec<f64>], averaged: bool) -> Vec<f64> {
    let mut sum: Vec<Vec<f64>> = x_star.iter().map(|v| vec![0.0; v.len()]).collect();
    log.rounds
        .iter()
        .enumerate()
        .map(|(r, rec)| {
            if averaged {
                for (s, x) in sum.iter_mut().zip(&rec.actions) {
                    for (a, b) in s.iter_mut().zip(x) {
                        *a += b;
                    }
                }
                let k = (r + 1) as f64;
                let mean: Vec<Vec<f64>> = sum.iter().map(|v| v.iter().map(|a| a / k).collect()).collect();
                stacked_distance_sq(&mean, x_star)
            } else {
                stacked_distance_sq(&rec.actions, x_star).sqrt()
            }
        })
        .collect()
}

pub fn tracking_error(log: &TrajectoryLog, limit: &dyn LimitGame, averaged: bool) -> Result<Vec<f64>> {
    let x_star = limit.gne().ok_or(Error::MissingGne)?;
    Ok(tracking_error_to(log, &x_star, averaged))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusCurve {
    pub residual: Vec<f64>,
    pub bound: Vec<f64>,
}

impl ConsensusCurve {
    pub fn violations(&self) -> usize {
        self.residual
            .iter()
            .zip(&self.bound)
            .filter(|(r, b)| !(**r <= **b * (1.0 + 1e-9)))
            .count()
    }
}

/// `max_i ‖λ̃_{i,t} − λ̄_t‖` next to `2√N L Σ_{s<t} σ^s γ_{t−1−s}`, with
/// `γ_0 = 1` and the later `γ_t` read from the log.
pub fn consensus_residual(log: &TrajectoryLog, sigma: f64, bounds: &GameBounds) -> ConsensusCurve {
    let scale = 2.0 * (log.n_players() as f64).sqrt() * bounds.l;
    let mut c = 1.0;
    let mut curve = ConsensusCurve {
        residual: Vec::with_capacity(log.len()),
        bound: Vec::with_capacity(log.len()),
    };
    for rec in &log.rounds {
        curve.residual.push(crate::learner::consensus_spread(&rec.mixed_duals).1);
        curve.bound.push(scale * c);
        c = sigma * c + rec.gamma;
    }
    curve
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares line through `(log x, log y)`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<LogLogFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            context: "fit abscissae vs ordinates",
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: xs.len(),
        });
    }
    for (index, &value) in xs.iter().chain(ys).enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::NonPositiveValues {
                index: index % xs.len(),
                value,
            });
        }
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LogLogFit {
        slope,
        intercept: my - slope * mx,
        r2,
    })
}

/// Growth exponent of a cumulative metric over the last half of the grid.
pub fn sublinearity_fit(horizons: &[usize], values: &[f64]) -> Result<LogLogFit> {
    if horizons.len() < 5 {
        return Err(Error::TooFewPoints {
            needed: 5,
            got: horizons.len(),
        });
    }
    let start = horizons.len() / 2;
    let xs: Vec<f64> = horizons[start..].iter().map(|&h| h as f64).collect();
    loglog_fit(&xs, &values[start..])
}

/// Fit restricted to horizons in `[lo, hi]`.
pub fn loglog_fit_between(horizons: &[usize], values: &[f64], lo: usize, hi: usize) -> Result<LogLogFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = horizons
        .iter()
        .zip(values)
        .filter(|(&h, _)| h >= lo && h <= hi)
        .map(|(&h, &v)| (h as f64, v))
        .unzip();
    loglog_fit(&xs, &ys)
}

/// `values + ε`, for fitting metrics that touch zero. Callers report `ε`.
pub fn offset_by(values: &[f64], eps: f64) -> Vec<f64> {
    values.iter().map(|v| v + eps).collect()
}
