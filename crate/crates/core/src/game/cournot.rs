//! Time-varying Nash-Cournot market with a shared capacity constraint.
//!
//! Firm `k = i + 1` produces `x_k ∈ [0, 30]`, pays `x_k (s_t + 1)` and
//! sells at `22 + k/9 − 0.5·k·s_t − Σ_j x_j`. Each firm owns a share
//! `b_{k,t} = 2 + s_t` of the market capacity, so the coupled constraint is
//! `Σ_k x_k ≤ Σ_k b_{k,t}`.

use serde::{Deserialize, Serialize};

use super::limit::LimitGame;
use super::{GameBounds, GameOracle, OwnQuadratic};
use crate::bregman::FeasibleSet;
use crate::error::{Error, Result};

/// Upper production limit of every firm.
pub const COURNOT_CAPACITY: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CournotVariant {
    /// `s_t = sin(t/12)`, never settles.
    Oscillating,
    /// `s_t = sin(12/t)`, settles to the static market as `t → ∞`.
    Converging,
}

#[derive(Debug, Clone)]
pub struct NashCournot {
    variant: CournotVariant,
    n: usize,
    sets: Vec<FeasibleSet>,
    bounds: GameBounds,
}

impl NashCournot {
    pub fn new(variant: CournotVariant, n_players: usize) -> Result<Self> {
        Self::with_lambda(variant, n_players, 1.0)
    }

    pub fn with_lambda(variant: CournotVariant, n_players: usize, lambda: f64) -> Result<Self> {
        if n_players < 2 {
            return Err(Error::InvalidGame(format!(
                "Nash-Cournot needs at least 2 firms, got {n_players}"
            )));
        }
        let set = FeasibleSet::interval(0.0, COURNOT_CAPACITY)?;
        let sets = vec![set; n_players];
        Ok(Self {
            variant,
            n: n_players,
            sets,
            bounds: cournot_bounds(n_players, lambda)?,
        })
    }

    pub fn variant(&self) -> CournotVariant {
        self.variant
    }

    /// Replaces every firm's inner ball, e.g. `p = 3`, `r = 1.5`.
    pub fn with_interior(mut self, point: f64, radius: f64) -> Result<Self> {
        self.sets = self
            .sets
            .into_iter()
            .map(|s| s.with_interior(vec![point], radius))
            .collect::<Result<_>>()?;
        Ok(self)
    }

    /// The periodic driver `s_t`.
    pub fn season(&self, t: u64) -> f64 {
        let t = t as f64;
        match self.variant {
            CournotVariant::Oscillating => (t / 12.0).sin(),
            CournotVariant::Converging => (12.0 / t).sin(),
        }
    }

    fn firm(i: usize) -> f64 {
        (i + 1) as f64
    }

    /// Sale price intercept of firm `i` before subtracting total output.
    fn price_intercept(i: usize, s: f64) -> f64 {
        let k = Self::firm(i);
        22.0 + k / 9.0 - 0.5 * k * s
    }

    /// `b_{i,t} = 2 + s_t`.
    pub fn capacity_share(&self, t: u64) -> f64 {
        2.0 + self.season(t)
    }

    /// Closed-form GNE coordinate of firm `i` at round `t`, the projection
    /// onto `[0, 30]` of the interior equilibrium
    /// `ξ = (21 − s) + k(1/9 − s/2) − S(s)` with `S` the equilibrium total
    /// output. For 20 firms this is `ξ = (k − 1)/9 + (5 − 1/21 − k/2)·s`.
    pub fn closed_form_gne(&self, i: usize, t: u64) -> f64 {
        cournot_equilibrium_coordinate(self.n, i, self.season(t))
    }

    pub fn closed_form_profile(&self, t: u64) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| vec![self.closed_form_gne(i, t)]).collect()
    }

    /// Static market reached as `s_t → 0` (only meaningful for the
    /// converging variant).
    pub fn limit(&self) -> NashCournotLimit {
        NashCournotLimit {
            n: self.n,
            sets: self.sets.clone(),
        }
    }
}

/// Interior equilibrium of the `n`-firm market at driver value `s`,
/// projected onto the production interval.
pub fn cournot_equilibrium_coordinate(n: usize, i: usize, s: f64) -> f64 {
    let nf = n as f64;
    let k = (i + 1) as f64;
    let slope = 1.0 / 9.0 - 0.5 * s;
    let total = (nf * (21.0 - s) + slope * nf * (nf + 1.0) / 2.0) / (nf + 1.0);
    let xi = 21.0 - s + k * slope - total;
    xi.clamp(0.0, COURNOT_CAPACITY)
}

fn cournot_bounds(n: usize, lambda: f64) -> Result<GameBounds> {
    let nf = n as f64;
    let cap = COURNOT_CAPACITY;
    // |s| ≤ 1 and k ≤ N on the box [0, 30]^N
    let price = 22.0 + nf / 9.0 + 0.5 * nf + cap * nf;
    let cost = cap * 2.0 + cap * price;
    let grad = 2.0 + price + cap;
    let constraint = (cap - 1.0).max(3.0);
    GameBounds::new((1.01 * cap).max(cost).max(constraint), grad.max(1.0), 1.0, lambda)
}

impl GameOracle for NashCournot {
    fn n_players(&self) -> usize {
        self.n
    }

    fn action_dim(&self, _i: usize) -> usize {
        1
    }

    fn constraint_dim(&self) -> usize {
        1
    }

    fn cost_value(&self, i: usize, t: u64, x: &[Vec<f64>]) -> f64 {
        let s = self.season(t);
        let total: f64 = x.iter().map(|v| v[0]).sum();
        let xi = x[i][0];
        xi * (s + 1.0) - xi * (Self::price_intercept(i, s) - total)
    }

    fn cost_grad(&self, i: usize, t: u64, x: &[Vec<f64>]) -> Vec<f64> {
        let s = self.season(t);
        let total: f64 = x.iter().map(|v| v[0]).sum();
        vec![(s + 1.0) - (Self::price_intercept(i, s) - total) + x[i][0]]
    }

    fn constraint_value(&self, _i: usize, t: u64, xi: &[f64]) -> Vec<f64> {
        vec![xi[0] - self.capacity_share(t)]
    }

    fn constraint_jacobian(&self, _i: usize, _t: u64, _xi: &[f64]) -> Vec<Vec<f64>> {
        vec![vec![1.0]]
    }

    fn feasible_set(&self, i: usize) -> &FeasibleSet {
        &self.sets[i]
    }

    fn bounds(&self) -> &GameBounds {
        &self.bounds
    }

    fn own_cost_quadratic(&self, i: usize, t: u64, x: &[Vec<f64>]) -> Option<OwnQuadratic> {
        let s = self.season(t);
        let others: f64 = x
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, v)| v[0])
            .sum();
        Some(OwnQuadratic {
            quad: vec![vec![1.0]],
            linear: vec![(s + 1.0) - Self::price_intercept(i, s) + others],
            constant: 0.0,
        })
    }

    fn constraints_affine(&self) -> bool {
        true
    }
}

/// Static market `J_k(x) = x_k − x_k(22 + k/9 − Σ_j x_j)` with
/// `Σ_k x_k ≤ 2N`.
#[derive(Debug, Clone)]
pub struct NashCournotLimit {
    n: usize,
    sets: Vec<FeasibleSet>,
}

impl NashCournotLimit {
    pub fn cost(&self, i: usize, x: &[Vec<f64>]) -> f64 {
        let total: f64 = x.iter().map(|v| v[0]).sum();
        let k = (i + 1) as f64;
        x[i][0] - x[i][0] * (22.0 + k / 9.0 - total)
    }
}

impl LimitGame for NashCournotLimit {
    fn n_players(&self) -> usize {
        self.n
    }

    fn action_dim(&self, _i: usize) -> usize {
        1
    }

    fn constraint_dim(&self) -> usize {
        1
    }

    fn partial_grad(&self, i: usize, x: &[Vec<f64>]) -> Vec<f64> {
        let total: f64 = x.iter().map(|v| v[0]).sum();
        let k = (i + 1) as f64;
        vec![1.0 - (22.0 + k / 9.0 - total) + x[i][0]]
    }

    fn local_constraint(&self, _i: usize, xi: &[f64]) -> Vec<f64> {
        vec![xi[0] - 2.0]
    }

    fn local_jacobian(&self, _i: usize, _xi: &[f64]) -> Vec<Vec<f64>> {
        vec![vec![1.0]]
    }

    fn feasible_set(&self, i: usize) -> &FeasibleSet {
        &self.sets[i]
    }

    /// `⟨F(x) − F(y), x − y⟩ = (x−y)ᵀ(I + 11ᵀ)(x−y) ≥ ‖x − y‖²`.
    fn strong_monotonicity(&self) -> f64 {
        1.0
    }

    fn gne(&self) -> Option<Vec<Vec<f64>>> {
        Some(
            (0..self.n)
                .map(|i| vec![cournot_equilibrium_coordinate(self.n, i, 0.0)])
                .collect(),
        )
    }
}
