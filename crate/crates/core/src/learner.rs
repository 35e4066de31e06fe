//! Decentralized online primal-dual dynamic mirror descent with gradient
//! feedback.
//!
//! Each round every player mixes its neighbours' multipliers,
//! `λ̃_i = Σ_j a_ij λ_j`, takes a mirror step on `V_i + G_i λ̃_i`, and then
//! moves its multiplier along the regularised constraint value
//! `λ_i ← [λ̃_i + γ_t (C_i − β_t λ̃_i)]_+`. Rounds are synchronous: every
//! player reads round `t` and writes round `t + 1`.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bregman::{mirror_step, norm, FeasibleSet, MirrorMap};
use crate::error::{Error, Result};
use crate::game::{check_profile, ActionProfile, GameOracle};
use crate::graph::CommGraph;
use crate::schedule::StepSchedule;
use crate::trajectory::{RoundRecord, TrajectoryLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// Projection of the origin onto each set.
    #[default]
    Zero,
    /// Seeded uniform draw from each set.
    RandomFeasible,
}

/// The online checks performed while a learner runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Invariant {
    /// `‖λ_{i,t}‖ ≤ L/β_t`.
    DualBound,
    /// `‖λ̃_{i,t}‖ ≤ L/β_t`.
    MixedDualBound,
    /// `max_i ‖λ̃_{i,t} − λ̄_t‖ ≤ 2√N L Σ_{s<t} σ^s γ_{t−1−s}`.
    ConsensusBound,
    /// `x_{i,t} ∈ Ω_i` and `λ_{i,t} ≥ 0`.
    Feasibility,
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Invariant::DualBound => "dual bound ‖λ_i,t‖ ≤ L/β_t",
            Invariant::MixedDualBound => "mixed dual bound ‖λ̃_i,t‖ ≤ L/β_t",
            Invariant::ConsensusBound => "consensus bound on ‖λ̃_i,t − λ̄_t‖",
            Invariant::Feasibility => "primal/dual feasibility",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub t: u64,
    pub actions: ActionProfile,
    pub duals: Vec<Vec<f64>>,
}

/// What player `i` observes at round `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Feedback {
    /// `R_{i,t} = J_{i,t}(x_t)`.
    pub cost: f64,
    /// `C_{i,t} = g_{i,t}(x_{i,t})`.
    pub constraint: Vec<f64>,
    /// `V_{i,t} = ∇_i J_{i,t}(x_t)`.
    pub grad: Vec<f64>,
    /// `G_{i,t} = ∇g_{i,t}(x_{i,t})`, `n_i × m`.
    pub jacobian: Vec<Vec<f64>>,
}

pub fn init_state(oracle: &dyn GameOracle, seed: u64, init: InitMode) -> LearnerState {
    let n = oracle.n_players();
    let actions = match init {
        InitMode::Zero => (0..n)
            .map(|i| {
                let set = oracle.feasible_set(i);
                set.project(&vec![0.0; set.dim()])
            })
            .collect(),
        InitMode::RandomFeasible => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|i| oracle.feasible_set(i).sample(&mut rng)).collect()
        }
    };
    LearnerState {
        t: 1,
        actions,
        duals: vec![vec![0.0; oracle.constraint_dim()]; n],
    }
}

pub fn collect_feedback(oracle: &dyn GameOracle, state: &LearnerState) -> Vec<Feedback> {
    let t = state.t;
    let x = &state.actions;
    (0..oracle.n_players())
        .map(|i| Feedback {
            cost: oracle.cost_value(i, t, x),
            constraint: oracle.constraint_value(i, t, &x[i]),
            grad: oracle.cost_grad(i, t, x),
            jacobian: oracle.constraint_jacobian(i, t, &x[i]),
        })
        .collect()
}

/// `V + G λ̃` with `G` stored as `n_i` rows of length `m`.
pub(crate) fn primal_direction(grad: &[f64], jacobian: &[Vec<f64>], mixed: &[f64]) -> Vec<f64> {
    grad.iter()
        .zip(jacobian)
        .map(|(v, row)| v + row.iter().zip(mixed).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

pub(crate) fn dual_update(mixed: &[f64], constraint: &[f64], beta: f64, gamma: f64) -> Vec<f64> {
    mixed
        .iter()
        .zip(constraint)
        .map(|(l, c)| (l + gamma * (c - beta * l)).max(0.0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LearnerOptions {
    pub check_invariants: bool,
    /// Update players on the rayon pool. Results are identical either way.
    pub parallel: bool,
}

impl Default for LearnerOptions {
    fn default() -> Self {
        Self {
            check_invariants: true,
            parallel: false,
        }
    }
}

/// Relative slack on the analytical bounds, for rounding only.
const BOUND_RTOL: f64 = 1e-9;
const SET_TOL: f64 = 1e-10;

/// Dual-bound and consensus checks evaluated online.
#[derive(Debug, Clone)]
pub(crate) struct InvariantMonitor {
    l: f64,
    sigma: f64,
    n: usize,
    /// `c_t = Σ_{s<t} σ^s γ_{t−1−s}`, advanced as `c_{t+1} = σ c_t + γ_t`.
    c: f64,
}

impl InvariantMonitor {
    pub(crate) fn new(l: f64, sigma: f64, n: usize, schedule: &StepSchedule) -> Self {
        Self {
            l,
            sigma,
            n,
            c: schedule.gamma(0),
        }
    }

    pub(crate) fn consensus_bound(&self) -> f64 {
        2.0 * (self.n as f64).sqrt() * self.l * self.c
    }

    pub(crate) fn advance(&mut self, gamma_t: f64) {
        self.c = self.sigma * self.c + gamma_t;
    }

    pub(crate) fn check(
        &self,
        state: &LearnerState,
        mixed: &[Vec<f64>],
        sets: &[FeasibleSet],
        beta_t: f64,
    ) -> Result<()> {
        let t = state.t;
        let violation = |invariant, player, value: f64, bound: f64| Error::InvariantViolation {
            invariant,
            t,
            player,
            value,
            bound,
        };
        let dual_bound = self.l / beta_t;
        let over = |v: f64, b: f64| !(v <= b * (1.0 + BOUND_RTOL));
        for (i, (lam, mix)) in state.duals.iter().zip(mixed).enumerate() {
            if !sets[i].contains(&state.actions[i], SET_TOL) {
                return Err(violation(Invariant::Feasibility, i, f64::NAN, 0.0));
            }
            if let Some(&neg) = lam.iter().find(|v| !(**v >= 0.0)) {
                return Err(violation(Invariant::Feasibility, i, neg, 0.0));
            }
            let v = norm(lam);
            if over(v, dual_bound) {
                return Err(violation(Invariant::DualBound, i, v, dual_bound));
            }
            let v = norm(mix);
            if over(v, dual_bound) {
                return Err(violation(Invariant::MixedDualBound, i, v, dual_bound));
            }
        }
        let (player, residual) = consensus_spread(mixed);
        let bound = self.consensus_bound();
        if over(residual, bound) {
            return Err(violation(Invariant::ConsensusBound, player, residual, bound));
        }
        Ok(())
    }
}

/// `(argmax_i, max_i ‖λ̃_i − mean‖)`.
pub(crate) fn consensus_spread(mixed: &[Vec<f64>]) -> (usize, f64) {
    let n = mixed.len();
    let m = mixed.first().map_or(0, Vec::len);
    let mean: Vec<f64> = (0..m)
        .map(|k| mixed.iter().map(|v| v[k]).sum::<f64>() / n as f64)
        .collect();
    mixed
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let d: Vec<f64> = v.iter().zip(&mean).map(|(a, b)| a - b).collect();
            (i, norm(&d))
        })
        .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best })
}

/// Static wiring of one learner: graph, step sizes and per-player geometry.
#[derive(Debug, Clone)]
pub struct FullInfoLearner {
    pub graph: CommGraph,
    pub schedule: StepSchedule,
    pub maps: Vec<MirrorMap>,
    pub sets: Vec<FeasibleSet>,
    pub options: LearnerOptions,
}

impl FullInfoLearner {
    pub fn new(
        oracle: &dyn GameOracle,
        graph: CommGraph,
        schedule: StepSchedule,
        maps: Vec<MirrorMap>,
        options: LearnerOptions,
    ) -> Result<Self> {
        let n = oracle.n_players();
        if graph.n_players() != n {
            return Err(Error::DimensionMismatch {
                context: "graph size vs number of players",
                expected: n,
                got: graph.n_players(),
            });
        }
        if maps.len() != n {
            return Err(Error::DimensionMismatch {
                context: "number of mirror maps",
                expected: n,
                got: maps.len(),
            });
        }
        for (i, map) in maps.iter().enumerate() {
            if map.dim() != oracle.action_dim(i) {
                return Err(Error::DimensionMismatch {
                    context: "mirror map dimension",
                    expected: oracle.action_dim(i),
                    got: map.dim(),
                });
            }
        }
        let sets = (0..n).map(|i| oracle.feasible_set(i).clone()).collect();
        Ok(Self {
            graph,
            schedule,
            maps,
            sets,
            options,
        })
    }

    /// Every player with the same kind of mirror map.
    pub fn uniform(
        oracle: &dyn GameOracle,
        graph: CommGraph,
        schedule: StepSchedule,
        kind: crate::bregman::MirrorKind,
        options: LearnerOptions,
    ) -> Result<Self> {
        let maps = (0..oracle.n_players())
            .map(|i| MirrorMap::for_set(kind, oracle.feasible_set(i)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(oracle, graph, schedule, maps, options)
    }

    pub(crate) fn update_player(
        &self,
        i: usize,
        state: &LearnerState,
        mixed: &[f64],
        grad: &[f64],
        jacobian: &[Vec<f64>],
        constraint: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let t = state.t;
        let g = primal_direction(grad, jacobian, mixed);
        let x = mirror_step(&self.maps[i], &self.sets[i], &state.actions[i], &g, self.schedule.alpha(t))?;
        let lam = dual_update(mixed, constraint, self.schedule.beta(t), self.schedule.gamma(t));
        Ok((x, lam))
    }

    /// One synchronous round; returns the next state and the mixed duals of
    /// round `t`.
    pub fn step(&self, state: &LearnerState, feedback: &[Feedback]) -> Result<(LearnerState, Vec<Vec<f64>>)> {
        let order: Vec<usize> = (0..state.actions.len()).collect();
        self.step_in_order(state, feedback, &order)
    }

    pub(crate) fn step_in_order(
        &self,
        state: &LearnerState,
        feedback: &[Feedback],
        order: &[usize],
    ) -> Result<(LearnerState, Vec<Vec<f64>>)> {
        self.schedule.check_round(state.t)?;
        let mixed = self.graph.mix(&state.duals)?;
        let update = |&i: &usize| {
            let f = &feedback[i];
            self.update_player(i, state, &mixed[i], &f.grad, &f.jacobian, &f.constraint)
                .map(|r| (i, r))
        };
        let results: Vec<_> = if self.options.parallel {
            order.par_iter().map(update).collect::<Result<_>>()?
        } else {
            order.iter().map(update).collect::<Result<_>>()?
        };
        Ok((assemble(state, results), mixed))
    }

    pub fn run(&self, oracle: &dyn GameOracle, horizon: u64, seed: u64, init: InitMode) -> Result<TrajectoryLog> {
        let state = init_state(oracle, seed, init);
        self.run_from(oracle, state, horizon)
    }

    pub fn run_from(&self, oracle: &dyn GameOracle, mut state: LearnerState, horizon: u64) -> Result<TrajectoryLog> {
        check_profile(oracle, &state.actions)?;
        let dims = (0..oracle.n_players()).map(|i| oracle.action_dim(i)).collect();
        let mut log = TrajectoryLog::new(dims, oracle.constraint_dim());
        let mut monitor = InvariantMonitor::new(oracle.bounds().l, self.graph.sigma(), oracle.n_players(), &self.schedule);
        let end = state.t + horizon;
        while state.t < end {
            let t = state.t;
            let feedback = collect_feedback(oracle, &state);
            let (next, mixed) = self.step(&state, &feedback)?;
            if self.options.check_invariants {
                monitor.check(&state, &mixed, &self.sets, self.schedule.beta(t))?;
            }
            monitor.advance(self.schedule.gamma(t));
            log.rounds.push(RoundRecord {
                t,
                actions: state.actions,
                duals: state.duals,
                mixed_duals: mixed,
                costs: feedback.iter().map(|f| f.cost).collect(),
                constraints: feedback.into_iter().map(|f| f.constraint).collect(),
                alpha: self.schedule.alpha(t),
                beta: self.schedule.beta(t),
                gamma: self.schedule.gamma(t),
                bandit: None,
            });
            state = next;
        }
        Ok(log)
    }
}

type PlayerUpdate = (usize, (Vec<f64>, Vec<f64>));

pub(crate) fn assemble(state: &LearnerState, results: Vec<PlayerUpdate>) -> LearnerState {
    let n = state.actions.len();
    let mut actions = vec![Vec::new(); n];
    let mut duals = vec![Vec::new(); n];
    for (i, (x, lam)) in results {
        actions[i] = x;
        duals[i] = lam;
    }
    LearnerState {
        t: state.t + 1,
        actions,
        duals,
    }
}
