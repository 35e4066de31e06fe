//! Fixed undirected communication graph with doubly stochastic weights.
//!
//! Players only exchange dual multipliers with their neighbours; the
//! exchange is the linear mixing `λ̃_i = Σ_j a_ij λ_j`. The contraction
//! factor of that mixing towards the network mean is `σ = ‖A − 11ᵀ/N‖`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Tolerance for the symmetry and row-sum checks.
pub const WEIGHT_TOL: f64 = 1e-12;
/// Off-diagonal entries above this count as edges.
pub const EDGE_TOL: f64 = 1e-12;

/// Validated weight matrix of a connected undirected graph.
#[derive(Debug, Clone, PartialEq)]
pub struct CommGraph {
    weights: DMatrix<f64>,
    sigma: f64,
}

impl CommGraph {
    /// Validates `weights` against the connectivity and double
    /// stochasticity assumptions and caches `σ`.
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = weights.shape();
        if rows != cols || rows == 0 {
            return Err(Error::NotSquare { rows, cols });
        }
        let n = rows;
        for i in 0..n {
            for j in 0..n {
                if !weights[(i, j)].is_finite() {
                    return Err(Error::NonFiniteWeight { row: i, col: j });
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let diff = weights[(i, j)] - weights[(j, i)];
                if diff.abs() > WEIGHT_TOL {
                    return Err(Error::NotSymmetric { i, j, diff });
                }
            }
        }
        for i in 0..n {
            let sum: f64 = weights.row(i).iter().sum();
            if (sum - 1.0).abs() > WEIGHT_TOL {
                return Err(Error::NotStochastic { row: i, sum });
            }
        }
        for i in 0..n {
            for j in 0..n {
                if weights[(i, j)] < 0.0 {
                    return Err(Error::NegativeWeight {
                        i,
                        j,
                        value: weights[(i, j)],
                    });
                }
            }
            if weights[(i, i)] <= 0.0 {
                return Err(Error::ZeroDiagonal { i });
            }
        }
        if let Some(unreachable) = first_unreachable(&weights) {
            return Err(Error::Disconnected { unreachable });
        }
        let sigma = spectral_gap_norm(&weights);
        Ok(Self { weights, sigma })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::NotSquare {
                rows: n,
                cols: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, cols, |i, j| rows[i][j]))
    }

    /// Uniform averaging `11ᵀ/N`; mixing reaches consensus in one round.
    pub fn complete(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::GraphTooSmall {
                name: "complete",
                min: 1,
                n,
            });
        }
        Self::new(DMatrix::from_element(n, n, 1.0 / n as f64))
    }

    /// Cycle `0 - 1 - … - (n-1) - 0` with Metropolis-Hastings weights.
    pub fn ring(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::GraphTooSmall {
                name: "ring",
                min: 2,
                n,
            });
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::metropolis(n, &edges)
    }

    /// Star centred on node 0 with Metropolis-Hastings weights.
    pub fn star(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::GraphTooSmall {
                name: "star-metropolis",
                min: 2,
                n,
            });
        }
        let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
        Self::metropolis(n, &edges)
    }

    /// Metropolis-Hastings weights `a_ij = 1 / (1 + max(d_i, d_j))` on the
    /// given undirected edge list. Self-loops and duplicate edges are ignored.
    pub fn metropolis(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacent = vec![vec![false; n]; n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::DimensionMismatch {
                    context: "edge endpoint",
                    expected: n,
                    got: a.max(b),
                });
            }
            if a != b {
                adjacent[a][b] = true;
                adjacent[b][a] = true;
            }
        }
        let degree: Vec<usize> = adjacent
            .iter()
            .map(|row| row.iter().filter(|&&e| e).count())
            .collect();
        let mut weights = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if adjacent[i][j] {
                    weights[(i, j)] = 1.0 / (1 + degree[i].max(degree[j])) as f64;
                }
            }
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| weights[(i, j)]).sum();
            weights[(i, i)] = 1.0 - off;
        }
        Self::new(weights)
    }

    pub fn n_players(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    /// `σ = ‖A − 11ᵀ/N‖₂`, in `[0, 1)` for a connected graph.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Mixed multipliers `λ̃_i = Σ_j a_ij λ_j`.
    pub fn mix(&self, duals: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let n = self.n_players();
        if duals.len() != n {
            return Err(Error::DimensionMismatch {
                context: "number of dual vectors",
                expected: n,
                got: duals.len(),
            });
        }
        let m = duals[0].len();
        if let Some(bad) = duals.iter().find(|d| d.len() != m) {
            return Err(Error::DimensionMismatch {
                context: "dual vector length",
                expected: m,
                got: bad.len(),
            });
        }
        Ok((0..n).map(|i| self.mix_one(i, duals)).collect())
    }

    /// Row `i` of the mixing, without dimension checks.
    pub(crate) fn mix_one(&self, i: usize, duals: &[Vec<f64>]) -> Vec<f64> {
        let m = duals[i].len();
        let mut out = vec![0.0; m];
        for (j, dual) in duals.iter().enumerate() {
            let a = self.weights[(i, j)];
            if a == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(dual) {
                *o += a * v;
            }
        }
        out
    }
}

fn first_unreachable(weights: &DMatrix<f64>) -> Option<usize> {
    let n = weights.nrows();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if v != u && !seen[v] && weights[(u, v)] > EDGE_TOL {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen.iter().position(|&s| !s)
}

fn spectral_gap_norm(weights: &DMatrix<f64>) -> f64 {
    let n = weights.nrows();
    let centred = weights - DMatrix::from_element(n, n, 1.0 / n as f64);
    let centred = (&centred + centred.transpose()) * 0.5;
    SymmetricEigen::new(centred)
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ring4_half() -> CommGraph {
        CommGraph::from_rows(&[
            vec![0.5, 0.25, 0.0, 0.25],
            vec![0.25, 0.5, 0.25, 0.0],
            vec![0.0, 0.25, 0.5, 0.25],
            vec![0.25, 0.0, 0.25, 0.5],
        ])
        .unwrap()
    }

    // Independent route to σ: power iteration on (A - J)² restricted away from 1.
    fn sigma_by_power_iteration(g: &CommGraph) -> f64 {
        let n = g.n_players();
        let a = g.weights();
        let mut v: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
        let mut est = 0.0;
        for _ in 0..5000 {
            let mean = v.iter().sum::<f64>() / n as f64;
            v.iter_mut().for_each(|x| *x -= mean);
            let w: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| a[(i, j)] * v[j]).sum())
                .collect();
            let norm_v = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let norm_w = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm_v == 0.0 {
                return 0.0;
            }
            est = norm_w / norm_v;
            if norm_w == 0.0 {
                return 0.0;
            }
            v = w.iter().map(|x| x / norm_w).collect();
        }
        est
    }

    #[test]
    fn complete_graph_has_zero_sigma() {
        let g = CommGraph::complete(4).unwrap();
        assert_abs_diff_eq!(g.sigma(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ring_of_four_sigma_is_half() {
        let g = ring4_half();
        assert_abs_diff_eq!(g.sigma(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(sigma_by_power_iteration(&g), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn metropolis_ring_matches_power_iteration() {
        let g = CommGraph::ring(20).unwrap();
        // circulant: 1/3 + (2/3) cos(2πk/20), largest off-mean modulus at k = 1
        let expected = 1.0 / 3.0 + 2.0 / 3.0 * (std::f64::consts::PI / 10.0).cos();
        assert_abs_diff_eq!(g.sigma(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(sigma_by_power_iteration(&g), expected, epsilon = 1e-6);
    }

    #[test]
    fn identity_is_disconnected() {
        let err = CommGraph::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::Disconnected { unreachable: 1 }));
    }

    #[test]
    fn rejects_each_failed_assumption() {
        let asym = CommGraph::from_rows(&[vec![0.6, 0.4], vec![0.3, 0.7]]);
        assert!(matches!(asym, Err(Error::NotSymmetric { .. })));
        let not_stoch = CommGraph::from_rows(&[vec![0.5, 0.4], vec![0.4, 0.5]]);
        assert!(matches!(not_stoch, Err(Error::NotStochastic { .. })));
        let zero_diag = CommGraph::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(matches!(zero_diag, Err(Error::ZeroDiagonal { i: 0 })));
        let ragged = CommGraph::from_rows(&[vec![1.0, 0.0], vec![1.0]]);
        assert!(matches!(ragged, Err(Error::NotSquare { .. })));
    }

    #[test]
    fn mixing_examples() {
        let g = CommGraph::complete(3).unwrap();
        let out = g
            .mix(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]])
            .unwrap();
        for o in &out {
            assert_abs_diff_eq!(o[0], 1.0 / 3.0, epsilon = 1e-15);
            assert_abs_diff_eq!(o[1], 1.0 / 3.0, epsilon = 1e-15);
        }

        let out = ring4_half()
            .mix(&[vec![1.0], vec![0.0], vec![0.0], vec![0.0]])
            .unwrap();
        let flat: Vec<f64> = out.into_iter().map(|v| v[0]).collect();
        assert_eq!(flat, vec![0.5, 0.25, 0.0, 0.25]);

        let constant = vec![vec![0.3, 2.0]; 4];
        let out = ring4_half().mix(&constant).unwrap();
        for o in out {
            assert_abs_diff_eq!(o[0], 0.3, epsilon = 1e-15);
            assert_abs_diff_eq!(o[1], 2.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn mix_rejects_ragged_duals() {
        let g = CommGraph::complete(2).unwrap();
        assert!(matches!(
            g.mix(&[vec![1.0], vec![1.0, 2.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            g.mix(&[vec![1.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn star_is_connected_and_contracting() {
        let g = CommGraph::star(5).unwrap();
        assert!(g.sigma() > 0.0 && g.sigma() < 1.0);
        assert_abs_diff_eq!(g.sigma(), sigma_by_power_iteration(&g), epsilon = 1e-6);
    }
}
