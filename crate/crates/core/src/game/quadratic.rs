//! Declarative quadratic games with affine local constraints.
//!
//! Player `i` pays
//! `J_{i,t}(x) = x_iᵀ Q_i x_i + x_iᵀ (q_i + a_t·q̂_i) + x_iᵀ C_i x_{-i}`
//! and contributes `g_{i,t}(x_i) = A_i x_i − (b_i + a_t·b̂_i)` to the coupled
//! constraint, where `a_t` is the game's [`TimeProfile`] and `x_{-i}`
//! stacks the other players' actions in player order.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::limit::LimitGame;
use super::{GameBounds, GameOracle, OwnQuadratic};
use crate::bregman::FeasibleSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TimeProfile {
    /// `a_t = 0`.
    Static,
    /// `a_t = sin(t / period)`.
    Oscillating { period: f64 },
    /// `a_t = sin(scale / t)`, vanishing as `t → ∞`.
    Converging { scale: f64 },
}

impl TimeProfile {
    pub fn amplitude(&self, t: u64) -> f64 {
        match *self {
            TimeProfile::Static => 0.0,
            TimeProfile::Oscillating { period } => (t as f64 / period).sin(),
            TimeProfile::Converging { scale } => (scale / t as f64).sin(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadraticPlayer {
    pub set: FeasibleSet,
    /// `n_i × n_i`.
    pub quad: Vec<Vec<f64>>,
    pub linear: Vec<f64>,
    pub linear_amp: Vec<f64>,
    /// `n_i × (n − n_i)`, empty rows allowed when there is no coupling.
    pub coupling: Vec<Vec<f64>>,
    /// `m × n_i`.
    pub constraint_matrix: Vec<Vec<f64>>,
    pub constraint_offset: Vec<f64>,
    pub constraint_amp: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct QuadraticGame {
    players: Vec<QuadraticPlayer>,
    time: TimeProfile,
    m: usize,
    bounds: GameBounds,
}

fn fro(rows: &[Vec<f64>]) -> f64 {
    rows.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

fn vnorm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn mat_vec(rows: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    rows.iter()
        .map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

impl QuadraticGame {
    pub fn new(players: Vec<QuadraticPlayer>, time: TimeProfile, lambda: f64) -> Result<Self> {
        if players.is_empty() {
            return Err(Error::InvalidGame("quadratic game needs at least one player".into()));
        }
        let total: usize = players.iter().map(|p| p.set.dim()).sum();
        let m = players[0].constraint_offset.len();
        for (i, p) in players.iter().enumerate() {
            let n = p.set.dim();
            let bad = |what: &str| Err(Error::InvalidGame(format!("player {i}: {what} has the wrong shape")));
            if p.quad.len() != n || p.quad.iter().any(|r| r.len() != n) {
                return bad("quad");
            }
            if p.linear.len() != n || p.linear_amp.len() != n {
                return bad("linear");
            }
            let others = total - n;
            let coupling_ok = (p.coupling.is_empty() && others == 0)
                || (p.coupling.len() == n && p.coupling.iter().all(|r| r.len() == others));
            if !coupling_ok && !p.coupling.is_empty() {
                return bad("coupling");
            }
            if p.constraint_matrix.len() != m
                || p.constraint_matrix.iter().any(|r| r.len() != n)
                || p.constraint_offset.len() != m
                || p.constraint_amp.len() != m
            {
                return bad("constraint");
            }
            let finite = p
                .quad
                .iter()
                .chain(&p.coupling)
                .chain(&p.constraint_matrix)
                .flatten()
                .chain(&p.linear)
                .chain(&p.linear_amp)
                .chain(&p.constraint_offset)
                .chain(&p.constraint_amp)
                .all(|v| v.is_finite());
            if !finite {
                return Err(Error::InvalidGame(format!("player {i}: non-finite coefficient")));
            }
            // convexity of J_i in x_i
            let n = p.quad.len();
            let sym = DMatrix::from_fn(n, n, |a, b| 0.5 * (p.quad[a][b] + p.quad[b][a]));
            let min_eig = SymmetricEigen::new(sym).eigenvalues.min();
            if min_eig < -1e-12 {
                return Err(Error::InvalidGame(format!(
                    "player {i}: cost is not convex in its own action (eigenvalue {min_eig})"
                )));
            }
        }
        let mut game = Self {
            players,
            time,
            m,
            bounds: GameBounds::new(1.0, 1.0, 0.0, lambda)?,
        };
        game.bounds = game.compute_bounds(lambda)?;
        Ok(game)
    }

    pub fn time_profile(&self) -> TimeProfile {
        self.time
    }

    pub fn players(&self) -> &[QuadraticPlayer] {
        &self.players
    }

    fn others(&self, i: usize, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, v)| v.iter().copied())
            .collect()
    }

    /// Linear coefficient of player `i`'s own action at amplitude `a`.
    fn own_linear(&self, i: usize, a: f64, x: &[Vec<f64>]) -> Vec<f64> {
        let p = &self.players[i];
        let cross = if p.coupling.is_empty() {
            vec![0.0; p.linear.len()]
        } else {
            mat_vec(&p.coupling, &self.others(i, x))
        };
        p.linear
            .iter()
            .zip(&p.linear_amp)
            .zip(cross)
            .map(|((l, la), c)| l + a * la + c)
            .collect()
    }

    fn grad_at(&self, i: usize, a: f64, x: &[Vec<f64>]) -> Vec<f64> {
        let p = &self.players[i];
        let n = p.quad.len();
        let lin = self.own_linear(i, a, x);
        (0..n)
            .map(|r| {
                let sym: f64 = (0..n).map(|c| (p.quad[r][c] + p.quad[c][r]) * x[i][c]).sum();
                sym + lin[r]
            })
            .collect()
    }

    fn constraint_at(&self, i: usize, a: f64, xi: &[f64]) -> Vec<f64> {
        let p = &self.players[i];
        mat_vec(&p.constraint_matrix, xi)
            .into_iter()
            .zip(p.constraint_offset.iter().zip(&p.constraint_amp))
            .map(|(v, (b, ba))| v - (b + a * ba))
            .collect()
    }

    fn jacobian(&self, i: usize) -> Vec<Vec<f64>> {
        let p = &self.players[i];
        let n = p.quad.len();
        (0..n)
            .map(|r| (0..self.m).map(|k| p.constraint_matrix[k][r]).collect())
            .collect()
    }

    /// Stacked matrix `H` with `F(x) = Hx + c` for the limit pseudo-gradient.
    fn pseudo_gradient_matrix(&self) -> DMatrix<f64> {
        let dims: Vec<usize> = self.players.iter().map(|p| p.set.dim()).collect();
        let offsets: Vec<usize> = dims
            .iter()
            .scan(0, |acc, d| {
                let o = *acc;
                *acc += d;
                Some(o)
            })
            .collect();
        let total: usize = dims.iter().sum();
        let mut h = DMatrix::zeros(total, total);
        for (i, p) in self.players.iter().enumerate() {
            let n = dims[i];
            for r in 0..n {
                for c in 0..n {
                    h[(offsets[i] + r, offsets[i] + c)] = p.quad[r][c] + p.quad[c][r];
                }
                if p.coupling.is_empty() {
                    continue;
                }
                let mut col = 0;
                for (j, &dj) in dims.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    for c in 0..dj {
                        h[(offsets[i] + r, offsets[j] + c)] = p.coupling[r][col];
                        col += 1;
                    }
                }
            }
        }
        h
    }

    fn compute_bounds(&self, lambda: f64) -> Result<GameBounds> {
        let radii: Vec<f64> = self.players.iter().map(|p| p.set.max_norm()).collect();
        let all = radii.iter().map(|r| r * r).sum::<f64>().sqrt();
        let amp = match self.time {
            TimeProfile::Static => 0.0,
            _ => 1.0,
        };
        let mut l = 1.01 * radii.iter().cloned().fold(0.0, f64::max);
        let mut m = 0.0_f64;
        for (i, p) in self.players.iter().enumerate() {
            let r = radii[i];
            let r_others = (all * all - r * r).max(0.0).sqrt();
            let lin = vnorm(&p.linear) + amp * vnorm(&p.linear_amp);
            let cost = fro(&p.quad) * r * r + lin * r + fro(&p.coupling) * r * r_others;
            let cons = fro(&p.constraint_matrix) * r + vnorm(&p.constraint_offset) + amp * vnorm(&p.constraint_amp);
            let grad = 2.0 * fro(&p.quad) * r + lin + fro(&p.coupling) * r_others;
            l = l.max(cost).max(cons);
            m = m.max(grad).max(fro(&p.constraint_matrix));
        }
        let h = self.pseudo_gradient_matrix();
        let sym = (&h + h.transpose()) * 0.5;
        let mu = SymmetricEigen::new(sym).eigenvalues.min().max(0.0);
        GameBounds::new(l, m.max(1e-12), mu, lambda)
    }
}

impl GameOracle for QuadraticGame {
    fn n_players(&self) -> usize {
        self.players.len()
    }

    fn action_dim(&self, i: usize) -> usize {
        self.players[i].set.dim()
    }

    fn constraint_dim(&self) -> usize {
        self.m
    }

    fn cost_value(&self, i: usize, t: u64, x: &[Vec<f64>]) -> f64 {
        let q = self.own_cost_quadratic(i, t, x).expect("quadratic game");
        let y = &x[i];
        let quad: f64 = mat_vec(&q.quad, y).iter().zip(y).map(|(a, b)| a * b).sum();
        quad + q.linear.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() + q.constant
    }

    fn cost_grad(&self, i: usize, t: u64, x: &[Vec<f64>]) -> Vec<f64> {
        self.grad_at(i, self.time.amplitude(t), x)
    }

    fn constraint_value(&self, i: usize, t: u64, xi: &[f64]) -> Vec<f64> {
        self.constraint_at(i, self.time.amplitude(t), xi)
    }

    fn constraint_jacobian(&self, i: usize, _t: u64, _xi: &[f64]) -> Vec<Vec<f64>> {
        self.jacobian(i)
    }

    fn feasible_set(&self, i: usize) -> &FeasibleSet {
        &self.players[i].set
    }

    fn bounds(&self) -> &GameBounds {
        &self.bounds
    }

    fn own_cost_quadratic(&self, i: usize, t: u64, x: &[Vec<f64>]) -> Option<OwnQuadratic> {
        Some(OwnQuadratic {
            quad: self.players[i].quad.clone(),
            linear: self.own_linear(i, self.time.amplitude(t), x),
            constant: 0.0,
        })
    }

    fn constraints_affine(&self) -> bool {
        true
    }
}

/// The limit drops the time-varying amplitude. An oscillating game has no
/// limit; evaluating it anyway gives the `a_t = 0` game.
impl LimitGame for QuadraticGame {
    fn n_players(&self) -> usize {
        self.players.len()
    }

    fn action_dim(&self, i: usize) -> usize {
        self.players[i].set.dim()
    }

    fn constraint_dim(&self) -> usize {
        self.m
    }

    fn partial_grad(&self, i: usize, x: &[Vec<f64>]) -> Vec<f64> {
        self.grad_at(i, 0.0, x)
    }

    fn local_constraint(&self, i: usize, xi: &[f64]) -> Vec<f64> {
        self.constraint_at(i, 0.0, xi)
    }

    fn local_jacobian(&self, i: usize, _xi: &[f64]) -> Vec<Vec<f64>> {
        self.jacobian(i)
    }

    fn feasible_set(&self, i: usize) -> &FeasibleSet {
        &self.players[i].set
    }

    fn strong_monotonicity(&self) -> f64 {
        self.bounds.mu_limit
    }
}
