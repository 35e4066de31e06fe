//! Strongly monotone limit games and their variational GNE.

use super::GameOracle;
use crate::bregman::{norm, FeasibleSet, SetKind};
use crate::error::{Error, Result};

/// Default number of low-discrepancy samples for gap estimation.
pub const DEFAULT_GAP_SAMPLES: usize = 1024;
/// Corners of box sets are enumerated only up to this total dimension.
const MAX_CORNER_DIM: usize = 12;
const BRUTE_FORCE_MAX_ITERS: usize = 2_000_000;

/// The static game a time-varying game settles to.
pub trait LimitGame: Send + Sync {
    fn n_players(&self) -> usize;
    fn action_dim(&self, i: usize) -> usize;
    fn constraint_dim(&self) -> usize;
    /// `∇_i J_i(x)`.
    fn partial_grad(&self, i: usize, x: &[Vec<f64>]) -> Vec<f64>;
    fn local_constraint(&self, i: usize, xi: &[f64]) -> Vec<f64>;
    /// `∇g_i(x_i)` as `n_i` rows of length `m`.
    fn local_jacobian(&self, i: usize, xi: &[f64]) -> Vec<Vec<f64>>;
    fn feasible_set(&self, i: usize) -> &FeasibleSet;
    fn strong_monotonicity(&self) -> f64;

    /// Known variational GNE, if any.
    fn gne(&self) -> Option<Vec<Vec<f64>>> {
        None
    }

    /// Pseudo-gradient `F(x) = (∇_1 J_1(x), …, ∇_N J_N(x))`.
    fn pseudo_gradient(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        (0..self.n_players()).map(|i| self.partial_grad(i, x)).collect()
    }

    /// `g(x) = Σ_i g_i(x_i)`.
    fn constraint(&self, x: &[Vec<f64>]) -> Vec<f64> {
        let mut total = vec![0.0; self.constraint_dim()];
        for (i, xi) in x.iter().enumerate() {
            for (acc, v) in total.iter_mut().zip(self.local_constraint(i, xi)) {
                *acc += v;
            }
        }
        total
    }
}

#[derive(Debug, Clone)]
pub struct BruteForceGne {
    pub point: Vec<Vec<f64>>,
    pub multipliers: Vec<f64>,
    /// Natural-map residual of the KKT system at the returned pair.
    pub residual: f64,
    pub iterations: usize,
}

struct Saddle<'a> {
    game: &'a dyn LimitGame,
}

impl Saddle<'_> {
    /// Monotone operator `(F(x) + ∇g(x)λ, −g(x))` of the Lagrangian saddle.
    fn operator(&self, x: &[Vec<f64>], lambda: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut fx = self.game.pseudo_gradient(x);
        for (i, block) in fx.iter_mut().enumerate() {
            let jac = self.game.local_jacobian(i, &x[i]);
            for (j, v) in block.iter_mut().enumerate() {
                *v += jac[j].iter().zip(lambda).map(|(a, l)| a * l).sum::<f64>();
            }
        }
        let g = self.game.constraint(x).into_iter().map(|v| -v).collect();
        (fx, g)
    }

    fn project_step(
        &self,
        x: &[Vec<f64>],
        lambda: &[f64],
        dir: &(Vec<Vec<f64>>, Vec<f64>),
        eta: f64,
    ) -> (Vec<Vec<f64>>, Vec<f64>) {
        let nx = x
            .iter()
            .zip(&dir.0)
            .enumerate()
            .map(|(i, (xi, di))| {
                let target: Vec<f64> = xi.iter().zip(di).map(|(a, d)| a - eta * d).collect();
                self.game.feasible_set(i).project(&target)
            })
            .collect();
        let nl = lambda
            .iter()
            .zip(&dir.1)
            .map(|(l, d)| (l - eta * d).max(0.0))
            .collect();
        (nx, nl)
    }

    fn residual(&self, x: &[Vec<f64>], lambda: &[f64]) -> f64 {
        let dir = self.operator(x, lambda);
        let (px, pl) = self.project_step(x, lambda, &dir, 1.0);
        distance(x, lambda, &px, &pl)
    }
}

fn distance(x: &[Vec<f64>], l: &[f64], y: &[Vec<f64>], m: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (a, b) in x.iter().zip(y) {
        acc += a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
    }
    acc += l.iter().zip(m).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
    acc.sqrt()
}

fn op_distance(a: &(Vec<Vec<f64>>, Vec<f64>), b: &(Vec<Vec<f64>>, Vec<f64>)) -> f64 {
    distance(&a.0, &a.1, &b.0, &b.1)
}

/// Natural-map residual `‖z − P(z − T(z))‖` of the KKT system of the
/// variational inequality at `(x, λ)`.
pub fn vi_residual(game: &dyn LimitGame, x: &[Vec<f64>], lambda: &[f64]) -> f64 {
    Saddle { game }.residual(x, lambda)
}

/// Solves the variational GNE with an extragradient method on the
/// Lagrangian saddle, shrinking the step whenever the local Lipschitz
/// test fails. Serves as an independent check on closed-form equilibria.
pub fn limit_gne_bruteforce(game: &dyn LimitGame, tol: f64) -> Result<BruteForceGne> {
    let start: Vec<Vec<f64>> = (0..game.n_players())
        .map(|i| game.feasible_set(i).interior_point().to_vec())
        .collect();
    limit_gne_bruteforce_from(game, tol, start)
}

pub fn limit_gne_bruteforce_from(
    game: &dyn LimitGame,
    tol: f64,
    start: Vec<Vec<f64>>,
) -> Result<BruteForceGne> {
    if game.strong_monotonicity() <= 0.0 {
        return Err(Error::InvalidGame(
            "brute-force GNE needs a strongly monotone limit game".into(),
        ));
    }
    let saddle = Saddle { game };
    let mut x: Vec<Vec<f64>> = start
        .iter()
        .enumerate()
        .map(|(i, xi)| game.feasible_set(i).project(xi))
        .collect();
    let mut lambda = vec![0.0; game.constraint_dim()];
    let mut eta = 1.0;
    let mut residual = saddle.residual(&x, &lambda);
    for iteration in 0..BRUTE_FORCE_MAX_ITERS {
        if residual <= tol {
            return Ok(BruteForceGne {
                point: x,
                multipliers: lambda,
                residual,
                iterations: iteration,
            });
        }
        let dir = saddle.operator(&x, &lambda);
        let (half_x, half_l) = loop {
            let (hx, hl) = saddle.project_step(&x, &lambda, &dir, eta);
            let moved = distance(&x, &lambda, &hx, &hl);
            let dir_half = saddle.operator(&hx, &hl);
            if eta * op_distance(&dir, &dir_half) <= 0.9 * moved || moved == 0.0 {
                break (hx, hl);
            }
            eta *= 0.5;
            if eta < 1e-14 {
                return Err(Error::NoConvergence {
                    iterations: iteration,
                    residual,
                });
            }
        };
        let dir_half = saddle.operator(&half_x, &half_l);
        let (nx, nl) = saddle.project_step(&x, &lambda, &dir_half, eta);
        x = nx;
        lambda = nl;
        residual = saddle.residual(&x, &lambda);
    }
    Err(Error::NoConvergence {
        iterations: BRUTE_FORCE_MAX_ITERS,
        residual,
    })
}

/// Sampled maxima `(max_i H_{i,t}, K_t)` of the gradient and constraint gaps
/// between the round-`t` game and its limit. Sampling gives a lower bound
/// on the true maxima; for gaps that are constant in `x` it is exact.
pub fn stabilization_gaps(
    oracle: &dyn GameOracle,
    limit: &dyn LimitGame,
    t: u64,
    n_samples: usize,
) -> (f64, f64) {
    let mut h_max = 0.0_f64;
    let mut k_max = 0.0_f64;
    for x in gap_sample_points(oracle, n_samples) {
        for i in 0..oracle.n_players() {
            let diff: Vec<f64> = oracle
                .cost_grad(i, t, &x)
                .iter()
                .zip(limit.partial_grad(i, &x))
                .map(|(a, b)| a - b)
                .collect();
            h_max = h_max.max(norm(&diff));
        }
        let gt = super::coupled_constraint(oracle, t, &x);
        let gl = limit.constraint(&x);
        let diff: Vec<f64> = gt.iter().zip(&gl).map(|(a, b)| a - b).collect();
        k_max = k_max.max(norm(&diff));
    }
    (h_max, k_max)
}

fn gap_sample_points(oracle: &dyn GameOracle, n_samples: usize) -> Vec<Vec<Vec<f64>>> {
    let dims: Vec<usize> = (0..oracle.n_players()).map(|i| oracle.action_dim(i)).collect();
    let total: usize = dims.iter().sum();
    let primes = first_primes(total);
    let mut points = Vec::with_capacity(n_samples + 2);
    for s in 1..=n_samples {
        let u: Vec<f64> = primes.iter().map(|&p| radical_inverse(s as u64, p)).collect();
        points.push(unit_to_profile(oracle, &dims, &u));
    }
    points.push(
        (0..oracle.n_players())
            .map(|i| oracle.feasible_set(i).interior_point().to_vec())
            .collect(),
    );
    let corners = if total <= MAX_CORNER_DIM {
        (0..(1u64 << total))
            .map(|mask| (0..total).map(|b| ((mask >> b) & 1) as f64).collect::<Vec<_>>())
            .collect()
    } else {
        vec![vec![0.0; total], vec![1.0; total]]
    };
    for u in corners {
        points.push(unit_to_profile(oracle, &dims, &u));
    }
    points
}

fn unit_to_profile(oracle: &dyn GameOracle, dims: &[usize], u: &[f64]) -> Vec<Vec<f64>> {
    let mut offset = 0;
    dims.iter()
        .enumerate()
        .map(|(i, &d)| {
            let ui = &u[offset..offset + d];
            offset += d;
            let set = oracle.feasible_set(i);
            let raw: Vec<f64> = match set.kind() {
                SetKind::Box { lower, upper } => ui
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(v, (l, h))| l + v * (h - l))
                    .collect(),
                SetKind::Ball { center, radius } => ui
                    .iter()
                    .zip(center)
                    .map(|(v, c)| c + radius * (2.0 * v - 1.0))
                    .collect(),
                SetKind::Simplex { radius, .. } => ui.iter().map(|v| v * radius).collect(),
            };
            set.project(&raw)
        })
        .collect()
}

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut result = 0.0;
    let mut scale = 1.0 / base as f64;
    while index > 0 {
        result += (index % base) as f64 * scale;
        index /= base;
        scale /= base as f64;
    }
    result
}

fn first_primes(count: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while primes.len() < count {
        if primes.iter().take_while(|&&p| p * p <= candidate).all(|&p| !candidate.is_multiple_of(p)) {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{CournotVariant, NashCournot};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert_eq!(first_primes(5), vec![2, 3, 5, 7, 11]);
    }

    #[test]
    fn cournot_constraint_gap_is_exact() {
        let game = NashCournot::new(CournotVariant::Converging, 20).unwrap();
        let limit = game.limit();
        for t in [1u64, 10, 100, 1000, 10_000] {
            let (h, k) = stabilization_gaps(&game, &limit, t, 64);
            let s = (12.0 / t as f64).sin();
            assert_abs_diff_eq!(k, 20.0 * s.abs(), epsilon = 1e-9);
            // ∇_k J_{k,t} − ∇_k J_k = s (1 + k/2), largest at k = N
            assert_abs_diff_eq!(h, s.abs() * 11.0, epsilon = 1e-9);
        }
        let (h1, k1) = stabilization_gaps(&game, &limit, 1_000, 16);
        let (h2, k2) = stabilization_gaps(&game, &limit, 10_000, 16);
        assert!(h2 < h1 && k2 < k1);
        assert!(k2 <= 20.0 * 12.0 / 10_000.0);
    }

    #[test]
    fn cournot_limit_is_strongly_monotone() {
        let game = NashCournot::new(CournotVariant::Converging, 8).unwrap();
        let limit = game.limit();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let x: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.gen_range(0.0..30.0)]).collect();
            let y: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.gen_range(0.0..30.0)]).collect();
            let fx = limit.pseudo_gradient(&x);
            let fy = limit.pseudo_gradient(&y);
            let mut inner = 0.0;
            let mut dist = 0.0;
            for i in 0..8 {
                let d = x[i][0] - y[i][0];
                inner += (fx[i][0] - fy[i][0]) * d;
                dist += d * d;
            }
            assert!(inner >= limit.strong_monotonicity() * dist - 1e-9);
        }
    }

    #[test]
    fn cournot_closed_form_gne_solves_the_vi() {
        let game = NashCournot::new(CournotVariant::Converging, 20).unwrap();
        let limit = game.limit();
        let gne = limit.gne().unwrap();
        let f = limit.pseudo_gradient(&gne);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let x: Vec<Vec<f64>> = (0..20).map(|_| vec![rng.gen_range(0.0..2.0)]).collect();
            if limit.constraint(&x)[0] > 0.0 {
                continue;
            }
            let v: f64 = (0..20).map(|i| f[i][0] * (x[i][0] - gne[i][0])).sum();
            assert!(v >= -1e-6);
        }
        assert!(limit.constraint(&gne)[0] <= 1e-9);
    }

    #[test]
    fn bruteforce_reports_no_convergence_without_monotonicity() {
        struct Flat(FeasibleSet);
        impl LimitGame for Flat {
            fn n_players(&self) -> usize {
                1
            }
            fn action_dim(&self, _i: usize) -> usize {
                1
            }
            fn constraint_dim(&self) -> usize {
                0
            }
            fn partial_grad(&self, _i: usize, _x: &[Vec<f64>]) -> Vec<f64> {
                vec![0.0]
            }
            fn local_constraint(&self, _i: usize, _xi: &[f64]) -> Vec<f64> {
                vec![]
            }
            fn local_jacobian(&self, _i: usize, _xi: &[f64]) -> Vec<Vec<f64>> {
                vec![vec![]]
            }
            fn feasible_set(&self, _i: usize) -> &FeasibleSet {
                &self.0
            }
            fn strong_monotonicity(&self) -> f64 {
                0.0
            }
        }
        let flat = Flat(FeasibleSet::interval(0.0, 1.0).unwrap());
        assert!(limit_gne_bruteforce(&flat, 1e-9).is_err());
    }
}
