use std::path::PathBuf;

use thiserror::Error;

use crate::learner::Invariant;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // communication graph
    #[error("weight matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("weight matrix has a non-finite entry at ({row}, {col})")]
    NonFiniteWeight { row: usize, col: usize },
    #[error("graph weights are not symmetric: a[{i}][{j}] - a[{j}][{i}] = {diff:e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },
    #[error("graph weights are not row-stochastic: row {row} sums to {sum}")]
    NotStochastic { row: usize, sum: f64 },
    #[error("graph weight a[{i}][{j}] = {value} is negative")]
    NegativeWeight { i: usize, j: usize, value: f64 },
    #[error("graph self-weight a[{i}][{i}] must be positive")]
    ZeroDiagonal { i: usize },
    #[error("communication graph is not connected (node {unreachable} unreachable from node 0)")]
    Disconnected { unreachable: usize },
    #[error("graph generator `{name}` needs at least {min} nodes, got {n}")]
    GraphTooSmall {
        name: &'static str,
        min: usize,
        n: usize,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("point outside the mirror map domain: {0}")]
    DomainViolation(String),
    #[error("no exact inner solver for mirror map {map} on a {set} set")]
    NoClosedForm {
        map: &'static str,
        set: &'static str,
    },
    #[error("invalid feasible set: {0}")]
    InvalidSet(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid game: {0}")]
    InvalidGame(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid step schedule: {0}")]
    InvalidSchedule(String),
    #[error("round {t} exceeds the declared horizon {horizon}")]
    ScheduleExhausted { t: u64, horizon: u64 },
    #[error("query radius {delta} must be strictly below the interior radius {radius}")]
    RadiusViolation { delta: f64, radius: f64 },
    #[error("invalid bandit configuration: {0}")]
    InvalidBandit(String),
    #[error("invariant violated at round {t}, player {player}: {invariant} ({value:e} > {bound:e})")]
    InvariantViolation {
        invariant: Invariant,
        t: u64,
        player: usize,
        value: f64,
        bound: f64,
    },

    #[error("limit game has no known variational GNE")]
    MissingGne,
    #[error("comparator requires constraints that are affine in the player's own action")]
    NonAffineConstraint,
    #[error("log-log fit needs positive values, found {value} at index {index}")]
    NonPositiveValues { index: usize, value: f64 },
    #[error("log-log fit needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("horizon {horizon} is outside the log (length {len}) or the grid is unsorted")]
    BadHorizon { horizon: usize, len: usize },

    #[error("config error: {0}")]
    Config(String),
    #[error("corrupt run directory {path}: {reason}")]
    CorruptRun { path: PathBuf, reason: String },
    #[error("hash mismatch for {path}: manifest {expected}, file {actual}")]
    HashMismatch {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
