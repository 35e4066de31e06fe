//! Payoff-based variant: players see only cost and constraint values at a
//! perturbed query action and estimate gradients from them.
//!
//! Player `i` keeps a base iterate `x_i`, plays
//! `x̂_i = (1 − δ/r_i) x_i + (δ/r_i)(p_i + r_i w_i)` for a uniformly drawn
//! `w_i ∈ {±e_1, …, ±e_{n_i}}`, and uses `(n_i/δ) Ĵ_i w_i` in place of the
//! gradient. Because `x̂_i` is a convex combination of `x_i` and a point of
//! the ball `B_{r_i}(p_i) ⊆ Ω_i`, every query is feasible.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bregman::FeasibleSet;
use crate::error::{Error, Result};
use crate::game::{check_profile, GameBounds, GameOracle, OwnQuadratic};
use crate::learner::{assemble, init_state, FullInfoLearner, InitMode, InvariantMonitor, LearnerState};
use crate::trajectory::{BanditRound, Direction, RoundRecord, TrajectoryLog};

/// Name and derivation rule of the perturbation stream, for manifests.
pub const DIRECTION_RNG: &str =
    "ChaCha8Rng::seed_from_u64(seed), stream = player, word position = 64·t, one gen_range(0..2n) per draw";

/// Default query-radius constant as a fraction of the interior radius.
pub const DEFAULT_RADIUS_FRACTION: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct BanditConfig {
    d3: f64,
    /// `c_i` in `δ_{i,t} = min(0.99 r_i, c_i t^{-d3})`.
    scales: Vec<f64>,
    interiors: Vec<(Vec<f64>, f64)>,
    seed: u64,
}

impl BanditConfig {
    /// Uses the interior balls declared on the oracle's feasible sets and
    /// `c_i = 0.99 r_i`.
    pub fn new(oracle: &dyn GameOracle, d3: f64, seed: u64) -> Result<Self> {
        if !(d3.is_finite() && d3 > 0.0) {
            return Err(Error::InvalidBandit(format!("radius exponent {d3} must be positive")));
        }
        let mut interiors = Vec::new();
        for i in 0..oracle.n_players() {
            let set = oracle.feasible_set(i);
            if !set.is_full_dimensional() {
                return Err(Error::InvalidBandit(format!(
                    "player {i}: a {} has no full-dimensional interior ball",
                    set.kind_name()
                )));
            }
            interiors.push((set.interior_point().to_vec(), set.interior_radius()));
        }
        let scales = interiors.iter().map(|(_, r)| DEFAULT_RADIUS_FRACTION * r).collect();
        Ok(Self {
            d3,
            scales,
            interiors,
            seed,
        })
    }

    pub fn with_scales(mut self, scales: Vec<f64>) -> Result<Self> {
        if scales.len() != self.interiors.len() {
            return Err(Error::DimensionMismatch {
                context: "number of query-radius constants",
                expected: self.interiors.len(),
                got: scales.len(),
            });
        }
        for (i, (&c, (_, r))) in scales.iter().zip(&self.interiors).enumerate() {
            if !(c > 0.0 && c < *r) {
                return Err(Error::InvalidBandit(format!(
                    "player {i}: radius constant {c} must lie in (0, r_i = {r})"
                )));
            }
        }
        self.scales = scales;
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn radius_exponent(&self) -> f64 {
        self.d3
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn interior(&self, i: usize) -> (&[f64], f64) {
        let (p, r) = &self.interiors[i];
        (p, *r)
    }

    pub fn delta(&self, i: usize, t: u64) -> f64 {
        let r = self.interiors[i].1;
        let t = t.max(1) as f64;
        (DEFAULT_RADIUS_FRACTION * r).min(self.scales[i] * t.powf(-self.d3))
    }

    pub fn direction(&self, i: usize, t: u64, dim: usize) -> Direction {
        draw_direction(self.seed, i, t, dim)
    }
}

/// Counter-based draw: the result depends only on `(seed, player, t)`.
pub fn draw_direction(seed: u64, player: usize, t: u64, dim: usize) -> Direction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(player as u64);
    rng.set_word_pos(t as u128 * 64);
    let k = rng.gen_range(0..2 * dim);
    Direction {
        coord: k / 2,
        positive: k % 2 == 0,
    }
}

/// `(1 − δ/r) x + (δ/r)(p + r w)`.
pub fn query_point(x: &[f64], delta: f64, r: f64, p: &[f64], w: Direction) -> Result<Vec<f64>> {
    if !(delta > 0.0 && delta < r) {
        return Err(Error::RadiusViolation { delta, radius: r });
    }
    let s = delta / r;
    Ok(x.iter()
        .zip(p)
        .enumerate()
        .map(|(j, (xj, pj))| {
            let wj = if j == w.coord { w.sign() } else { 0.0 };
            (1.0 - s) * xj + s * (pj + r * wj)
        })
        .collect())
}

/// One-point estimates `(n/δ) Ĵ w` and, row-wise, `(n/δ) ĝ_k w`.
pub fn estimate_gradients(j_hat: f64, g_hat: &[f64], n: usize, delta: f64, w: Direction) -> (Vec<f64>, Vec<Vec<f64>>) {
    let scale = n as f64 / delta * w.sign();
    let mut grad = vec![0.0; n];
    let mut jac = vec![vec![0.0; g_hat.len()]; n];
    grad[w.coord] = scale * j_hat;
    jac[w.coord] = g_hat.iter().map(|g| scale * g).collect();
    (grad, jac)
}

#[derive(Debug, Clone)]
pub struct BanditLearner {
    pub base: FullInfoLearner,
    pub config: BanditConfig,
}

impl BanditLearner {
    pub fn new(base: FullInfoLearner, config: BanditConfig) -> Result<Self> {
        if base.sets.len() != config.interiors.len() {
            return Err(Error::DimensionMismatch {
                context: "bandit config players",
                expected: base.sets.len(),
                got: config.interiors.len(),
            });
        }
        if let Some(d3) = base.schedule.radius_exponent() {
            if d3 != config.d3 {
                return Err(Error::InvalidBandit(format!(
                    "schedule radius exponent {d3} differs from bandit config {}",
                    config.d3
                )));
            }
        }
        Ok(Self { base, config })
    }

    /// One round: draw directions, query values at `x̂_t`, update.
    pub fn step_bandit(&self, state: &LearnerState, oracle: &dyn GameOracle) -> Result<(LearnerState, RoundRecord)> {
        let t = state.t;
        let base = &self.base;
        base.schedule.check_round(t)?;
        let n = state.actions.len();
        let mut directions = Vec::with_capacity(n);
        let mut deltas = Vec::with_capacity(n);
        let mut played = Vec::with_capacity(n);
        for i in 0..n {
            let w = self.config.direction(i, t, state.actions[i].len());
            let delta = self.config.delta(i, t);
            let (p, r) = self.config.interior(i);
            played.push(query_point(&state.actions[i], delta, r, p, w)?);
            directions.push(w);
            deltas.push(delta);
        }
        let costs: Vec<f64> = (0..n).map(|i| oracle.cost_value(i, t, &played)).collect();
        let constraints: Vec<Vec<f64>> = (0..n).map(|i| oracle.constraint_value(i, t, &played[i])).collect();
        let mixed = base.graph.mix(&state.duals)?;

        let update = |i: usize| {
            let (grad, jac) =
                estimate_gradients(costs[i], &constraints[i], state.actions[i].len(), deltas[i], directions[i]);
            base.update_player(i, state, &mixed[i], &grad, &jac, &constraints[i])
                .map(|r| (i, r))
        };
        let results: Vec<_> = if base.options.parallel {
            (0..n).into_par_iter().map(update).collect::<Result<_>>()?
        } else {
            (0..n).map(update).collect::<Result<_>>()?
        };
        let next = assemble(state, results);
        let record = RoundRecord {
            t,
            actions: state.actions.clone(),
            duals: state.duals.clone(),
            mixed_duals: mixed,
            costs,
            constraints,
            alpha: base.schedule.alpha(t),
            beta: base.schedule.beta(t),
            gamma: base.schedule.gamma(t),
            bandit: Some(BanditRound {
                directions,
                deltas,
                played,
            }),
        };
        Ok((next, record))
    }

    pub fn run_bandit(&self, oracle: &dyn GameOracle, horizon: u64, init: InitMode) -> Result<TrajectoryLog> {
        let mut state = init_state(oracle, self.config.seed, init);
        check_profile(oracle, &state.actions)?;
        let dims = (0..oracle.n_players()).map(|i| oracle.action_dim(i)).collect();
        let mut log = TrajectoryLog::new(dims, oracle.constraint_dim());
        let base = &self.base;
        let mut monitor = InvariantMonitor::new(oracle.bounds().l, base.graph.sigma(), oracle.n_players(), &base.schedule);
        for _ in 0..horizon {
            let t = state.t;
            let (next, record) = self.step_bandit(&state, oracle)?;
            if base.options.check_invariants {
                monitor.check(&state, &record.mixed_duals, &base.sets, base.schedule.beta(t))?;
                check_queries(&record, &base.sets)?;
            }
            monitor.advance(base.schedule.gamma(t));
            log.rounds.push(record);
            state = next;
        }
        Ok(log)
    }
}

fn check_queries(record: &RoundRecord, sets: &[FeasibleSet]) -> Result<()> {
    let Some(b) = &record.bandit else { return Ok(()) };
    for (i, xh) in b.played.iter().enumerate() {
        if !sets[i].contains(xh, 1e-10) {
            return Err(Error::InvariantViolation {
                invariant: crate::learner::Invariant::Feasibility,
                t: record.t,
                player: i,
                value: f64::NAN,
                bound: 0.0,
            });
        }
    }
    Ok(())
}

/// Wraps an oracle and counts derivative queries; a payoff-based run must
/// leave both counters at zero.
pub struct CountingOracle<'a> {
    inner: &'a dyn GameOracle,
    grad_calls: AtomicUsize,
    jacobian_calls: AtomicUsize,
}

impl<'a> CountingOracle<'a> {
    pub fn new(inner: &'a dyn GameOracle) -> Self {
        Self {
            inner,
            grad_calls: AtomicUsize::new(0),
            jacobian_calls: AtomicUsize::new(0),
        }
    }

    pub fn grad_calls(&self) -> usize {
        self.grad_calls.load(Ordering::Relaxed)
    }

    pub fn jacobian_calls(&self) -> usize {
        self.jacobian_calls.load(Ordering::Relaxed)
    }
}

impl GameOracle for CountingOracle<'_> {
    fn n_players(&self) -> usize {
        self.inner.n_players()
    }
    fn action_dim(&self, i: usize) -> usize {
        self.inner.action_dim(i)
    }
    fn constraint_dim(&self) -> usize {
        self.inner.constraint_dim()
    }
    fn cost_value(&self, i: usize, t: u64, x: &[Vec<f64>]) -> f64 {
        self.inner.cost_value(i, t, x)
    }
    fn cost_grad(&self, i: usize, t: u64, x: &[Vec<f64>]) -> Vec<f64> {
        self.grad_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.cost_grad(i, t, x)
    }
    fn constraint_value(&self, i: usize, t: u64, xi: &[f64]) -> Vec<f64> {
        self.inner.constraint_value(i, t, xi)
    }
    fn constraint_jacobian(&self, i: usize, t: u64, xi: &[f64]) -> Vec<Vec<f64>> {
        self.jacobian_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.constraint_jacobian(i, t, xi)
    }
    fn feasible_set(&self, i: usize) -> &FeasibleSet {
        self.inner.feasible_set(i)
    }
    fn bounds(&self) -> &GameBounds {
        self.inner.bounds()
    }
    fn own_cost_quadratic(&self, i: usize, t: u64, x: &[Vec<f64>]) -> Option<OwnQuadratic> {
        self.inner.own_cost_quadratic(i, t, x)
    }
    fn constraints_affine(&self) -> bool {
        self.inner.constraints_affine()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bregman::MirrorKind;
    use crate::game::{CournotVariant, NashCournot};
    use crate::graph::CommGraph;
    use crate::learner::LearnerOptions;
    use crate::schedule::StepSchedule;
    use approx::assert_abs_diff_eq;

    fn cournot(n: usize) -> NashCournot {
        NashCournot::new(CournotVariant::Oscillating, n)
            .unwrap()
            .with_interior(3.0, 1.5)
            .unwrap()
    }

    fn learner(game: &NashCournot, seed: u64) -> BanditLearner {
        let n = game.n_players();
        let schedule = StepSchedule::bandit(0.75, 0.25, 0.5).unwrap();
        let base = FullInfoLearner::uniform(
            game,
            CommGraph::ring(n).unwrap(),
            schedule,
            MirrorKind::SquaredNorm,
            LearnerOptions::default(),
        )
        .unwrap();
        BanditLearner::new(base, BanditConfig::new(game, 0.5, seed).unwrap()).unwrap()
    }

    #[test]
    fn query_point_examples() {
        let up = Direction { coord: 0, positive: true };
        let x = query_point(&[30.0], 0.5, 1.5, &[3.0], up).unwrap();
        assert_abs_diff_eq!(x[0], 21.5, epsilon = 1e-12);
        let x = query_point(&[3.0, 3.0], 0.75, 1.5, &[3.0, 3.0], Direction { coord: 1, positive: false }).unwrap();
        assert_eq!(x, vec![3.0, 2.25]);
        assert!(matches!(query_point(&[1.0], 1.5, 1.5, &[3.0], up), Err(Error::RadiusViolation { .. })));
    }

    #[test]
    fn estimator_examples() {
        let down = Direction { coord: 0, positive: false };
        let (g, j) = estimate_gradients(2.0, &[0.5], 1, 0.1, down);
        assert_abs_diff_eq!(g[0], -20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(j[0][0], -5.0, epsilon = 1e-12);
        let (g, _) = estimate_gradients(0.0, &[], 3, 0.1, down);
        assert_eq!(g, vec![0.0; 3]);
    }

    /// Averaging the estimator over all `2n` directions gives the central
    /// difference.
    #[test]
    fn direction_average_is_central_difference() {
        let f = |y: &[f64]| y.iter().map(|v| v * v).sum::<f64>();
        let y = [0.3, -1.2, 2.5];
        let delta = 0.07;
        let n = y.len();
        let mut avg = vec![0.0; n];
        for coord in 0..n {
            for positive in [true, false] {
                let w = Direction { coord, positive };
                let mut z = y.to_vec();
                z[coord] += delta * w.sign();
                let (g, _) = estimate_gradients(f(&z), &[], n, delta, w);
                for (a, b) in avg.iter_mut().zip(g) {
                    *a += b / (2 * n) as f64;
                }
            }
        }
        for j in 0..n {
            let mut plus = y.to_vec();
            let mut minus = y.to_vec();
            plus[j] += delta;
            minus[j] -= delta;
            let cd = (f(&plus) - f(&minus)) / (2.0 * delta);
            assert_abs_diff_eq!(avg[j], cd, epsilon = 1e-9);
        }
    }

    #[test]
    fn queries_stay_feasible() {
        let set = FeasibleSet::interval(0.0, 30.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100_000 {
            let x: f64 = rng.gen_range(0.0..=30.0);
            let delta: f64 = rng.gen_range(1e-9..1.5);
            let w = Direction {
                coord: 0,
                positive: rng.gen(),
            };
            let q = query_point(&[x], delta.min(1.5 - 1e-12), 1.5, &[3.0], w).unwrap();
            assert!(set.contains(&q, 0.0), "{x} {delta} -> {q:?}");
        }
    }

    #[test]
    fn direction_frequencies() {
        let dim = 3;
        let draws = 60_000;
        let mut counts = [0usize; 6];
        for t in 1..=draws {
            let w = draw_direction(17, 2, t, dim);
            counts[2 * w.coord + usize::from(!w.positive)] += 1;
        }
        let p = 1.0 / 6.0;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 * p).abs() < 5.0 * sd, "{counts:?}");
        }
        // independent of call order
        assert_eq!(draw_direction(17, 2, 99, dim), draw_direction(17, 2, 99, dim));
        assert_ne!(
            (1..50).map(|t| draw_direction(17, 0, t, dim)).collect::<Vec<_>>(),
            (1..50).map(|t| draw_direction(17, 1, t, dim)).collect::<Vec<_>>()
        );
    }

    #[test]
    fn radius_schedule() {
        let game = cournot(3);
        let cfg = BanditConfig::new(&game, 0.5, 0).unwrap();
        assert_abs_diff_eq!(cfg.delta(0, 1), 0.99 * 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(cfg.delta(0, 100), 0.99 * 1.5 / 10.0, epsilon = 1e-15);
        assert!(cfg.clone().with_scales(vec![1.5; 3]).is_err());
        assert!(cfg.with_scales(vec![1.0; 3]).is_ok());
    }

    #[test]
    fn zeroth_order_only() {
        let game = cournot(4);
        let counting = CountingOracle::new(&game);
        let log = learner(&game, 3).run_bandit(&counting, 500, InitMode::Zero).unwrap();
        assert_eq!(counting.grad_calls(), 0);
        assert_eq!(counting.jacobian_calls(), 0);
        assert_eq!(log.len(), 500);
        assert!(log.is_bandit());
    }

    #[test]
    fn seeded_runs_repeat_and_parallel_agrees() {
        let game = cournot(5);
        let a = learner(&game, 11).run_bandit(&game, 300, InitMode::RandomFeasible).unwrap();
        let mut par = learner(&game, 11);
        par.base.options.parallel = true;
        let b = par.run_bandit(&game, 300, InitMode::RandomFeasible).unwrap();
        assert_eq!(a, b);
        let c = learner(&game, 12).run_bandit(&game, 300, InitMode::RandomFeasible).unwrap();
        assert_ne!(a, c);
    }

    /// With zero payoffs and zero constraints the base point never moves.
    #[test]
    fn silent_game_keeps_base_point() {
        struct Silent(FeasibleSet, GameBounds);
        impl GameOracle for Silent {
            fn n_players(&self) -> usize {
                2
            }
            fn action_dim(&self, _: usize) -> usize {
                1
            }
            fn constraint_dim(&self) -> usize {
                1
            }
            fn cost_value(&self, _: usize, _: u64, _: &[Vec<f64>]) -> f64 {
                0.0
            }
            fn cost_grad(&self, _: usize, _: u64, _: &[Vec<f64>]) -> Vec<f64> {
                vec![0.0]
            }
            fn constraint_value(&self, _: usize, _: u64, _: &[f64]) -> Vec<f64> {
                vec![0.0]
            }
            fn constraint_jacobian(&self, _: usize, _: u64, _: &[f64]) -> Vec<Vec<f64>> {
                vec![vec![0.0]]
            }
            fn feasible_set(&self, _: usize) -> &FeasibleSet {
                &self.0
            }
            fn bounds(&self) -> &GameBounds {
                &self.1
            }
        }
        let game = Silent(
            FeasibleSet::interval(0.0, 30.0).unwrap().with_interior(vec![3.0], 1.5).unwrap(),
            GameBounds::new(31.0, 1.0, 0.0, 1.0).unwrap(),
        );
        let base = FullInfoLearner::uniform(
            &game,
            CommGraph::complete(2).unwrap(),
            StepSchedule::bandit(0.75, 0.25, 0.5).unwrap(),
            MirrorKind::SquaredNorm,
            LearnerOptions::default(),
        )
        .unwrap();
        let bl = BanditLearner::new(base, BanditConfig::new(&game, 0.5, 0).unwrap()).unwrap();
        let log = bl.run_bandit(&game, 50, InitMode::RandomFeasible).unwrap();
        assert!(log.rounds.iter().all(|r| r.actions == log.rounds[0].actions));
    }

    #[test]
    fn simplex_players_are_rejected() {
        use crate::bregman::SetKind;
        let set = FeasibleSet::new(SetKind::Simplex { radius: 1.0, dim: 3 }).unwrap();
        assert!(!set.is_full_dimensional());
    }
}
