//! Time-varying games with coupled inequality constraints.
//!
//! A game at round `t` hands out, for every player `i`, the cost
//! `J_{i,t}(x)`, its partial gradient in the player's own action, and the
//! player's local constraint contribution `g_{i,t}(x_i)`. The coupled
//! constraint is the sum `g_t(x) = Σ_i g_{i,t}(x_i) ≤ 0`.
//!
//! Players are indexed from 0 in code. Formulas that number firms from 1
//! (the Nash-Cournot market) use `k = i + 1` internally.

mod cournot;
mod limit;
mod quadratic;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use cournot::{cournot_equilibrium_coordinate, CournotVariant, NashCournot, NashCournotLimit, COURNOT_CAPACITY};
pub use limit::{
    limit_gne_bruteforce, limit_gne_bruteforce_from, stabilization_gaps, vi_residual, BruteForceGne, LimitGame,
    DEFAULT_GAP_SAMPLES,
};
pub use quadratic::{QuadraticGame, QuadraticPlayer, TimeProfile};

use crate::bregman::FeasibleSet;
use crate::error::{Error, Result};

/// Joint action `x = (x_1, …, x_N)`, one block per player.
pub type ActionProfile = Vec<Vec<f64>>;

/// Uniform bounds on actions, values and gradients over the feasible sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameBounds {
    /// `‖x_i‖ < L`, `|J_{i,t}| ≤ L`, `‖g_{i,t}‖ ≤ L`.
    pub l: f64,
    /// `‖∇_i J_{i,t}‖ ≤ M`, `‖∇g_{i,t}‖ ≤ M`.
    pub m: f64,
    /// Strong-monotonicity modulus of the limit game, 0 when there is none.
    pub mu_limit: f64,
    /// Diagnostic bound on the optimal multiplier. Never used by the learners.
    pub lambda: f64,
}

impl GameBounds {
    pub fn new(l: f64, m: f64, mu_limit: f64, lambda: f64) -> Result<Self> {
        let ok = l.is_finite() && l > 0.0 && m.is_finite() && m > 0.0 && mu_limit >= 0.0 && lambda > 0.0;
        if !ok {
            return Err(Error::InvalidGame(format!(
                "bounds need L > 0, M > 0, mu >= 0, Lambda > 0 (got {l}, {m}, {mu_limit}, {lambda})"
            )));
        }
        Ok(Self {
            l,
            m,
            mu_limit,
            lambda,
        })
    }
}

/// `J(y) = yᵀ Q y + ⟨linear, y⟩ + constant` as a function of one player's
/// own action with the others held fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct OwnQuadratic {
    pub quad: Vec<Vec<f64>>,
    pub linear: Vec<f64>,
    pub constant: f64,
}

/// Time-indexed first-order oracle of the game.
pub trait GameOracle: Send + Sync {
    fn n_players(&self) -> usize;
    fn action_dim(&self, i: usize) -> usize;
    fn constraint_dim(&self) -> usize;
    fn cost_value(&self, i: usize, t: u64, x: &[Vec<f64>]) -> f64;
    fn cost_grad(&self, i: usize, t: u64, x: &[Vec<f64>]) -> Vec<f64>;
    fn constraint_value(&self, i: usize, t: u64, xi: &[f64]) -> Vec<f64>;
    /// `∇g_{i,t}(x_i)` as `n_i` rows of length `m`.
    fn constraint_jacobian(&self, i: usize, t: u64, xi: &[f64]) -> Vec<Vec<f64>>;
    fn feasible_set(&self, i: usize) -> &FeasibleSet;
    fn bounds(&self) -> &GameBounds;

    /// Exact quadratic form of `J_{i,t}(·, x_{-i})` when the cost is
    /// quadratic in the player's own action.
    fn own_cost_quadratic(&self, _i: usize, _t: u64, _x: &[Vec<f64>]) -> Option<OwnQuadratic> {
        None
    }

    /// Whether every `g_{i,t}` is affine in `x_i`.
    fn constraints_affine(&self) -> bool {
        false
    }
}

/// `g_t(x) = Σ_i g_{i,t}(x_i)`.
pub fn coupled_constraint(oracle: &dyn GameOracle, t: u64, x: &[Vec<f64>]) -> Vec<f64> {
    let mut total = vec![0.0; oracle.constraint_dim()];
    for (i, xi) in x.iter().enumerate() {
        for (acc, v) in total.iter_mut().zip(oracle.constraint_value(i, t, xi)) {
            *acc += v;
        }
    }
    total
}

pub fn check_profile(oracle: &dyn GameOracle, x: &[Vec<f64>]) -> Result<()> {
    if x.len() != oracle.n_players() {
        return Err(Error::DimensionMismatch {
            context: "number of players in profile",
            expected: oracle.n_players(),
            got: x.len(),
        });
    }
    for (i, xi) in x.iter().enumerate() {
        if xi.len() != oracle.action_dim(i) {
            return Err(Error::DimensionMismatch {
                context: "player action dimension",
                expected: oracle.action_dim(i),
                got: xi.len(),
            });
        }
    }
    Ok(())
}

pub fn sample_profile<R: Rng + ?Sized>(oracle: &dyn GameOracle, rng: &mut R) -> ActionProfile {
    (0..oracle.n_players())
        .map(|i| oracle.feasible_set(i).sample(rng))
        .collect()
}

/// Worst central-difference discrepancy of the oracle's derivatives at
/// one `(t, x)`, as `(cost gradient error, constraint Jacobian error)`.
pub fn finite_difference_error(oracle: &dyn GameOracle, t: u64, x: &[Vec<f64>], h: f64) -> (f64, f64) {
    let mut cost_err = 0.0_f64;
    let mut cons_err = 0.0_f64;
    for i in 0..oracle.n_players() {
        let grad = oracle.cost_grad(i, t, x);
        let jac = oracle.constraint_jacobian(i, t, &x[i]);
        for j in 0..oracle.action_dim(i) {
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[i][j] += h;
            minus[i][j] -= h;
            let fd = (oracle.cost_value(i, t, &plus) - oracle.cost_value(i, t, &minus)) / (2.0 * h);
            cost_err = cost_err.max((fd - grad[j]).abs());
            let gp = oracle.constraint_value(i, t, &plus[i]);
            let gm = oracle.constraint_value(i, t, &minus[i]);
            for k in 0..oracle.constraint_dim() {
                let fd = (gp[k] - gm[k]) / (2.0 * h);
                cons_err = cons_err.max((fd - jac[j][k]).abs());
            }
        }
    }
    (cost_err, cons_err)
}

/// Largest observed violation of the declared `L`/`M` bounds over sampled
/// profiles; positive means a bound is wrong.
pub fn bounds_excess<R: Rng + ?Sized>(
    oracle: &dyn GameOracle,
    rounds: &[u64],
    samples: usize,
    rng: &mut R,
) -> f64 {
    let b = *oracle.bounds();
    let mut excess = f64::NEG_INFINITY;
    for _ in 0..samples {
        let x = sample_profile(oracle, rng);
        for &t in rounds {
            for i in 0..oracle.n_players() {
                let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
                excess = excess.max(norm(&x[i]) - b.l);
                excess = excess.max(oracle.cost_value(i, t, &x).abs() - b.l);
                excess = excess.max(norm(&oracle.constraint_value(i, t, &x[i])) - b.l);
                excess = excess.max(norm(&oracle.cost_grad(i, t, &x)) - b.m);
                let jac = oracle.constraint_jacobian(i, t, &x[i]);
                let fro = jac.iter().flatten().map(|a| a * a).sum::<f64>().sqrt();
                excess = excess.max(fro - b.m);
            }
        }
    }
    excess
}
