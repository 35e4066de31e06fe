// `!(v <= bound)` is used on purpose so that NaN counts as a violation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandit;
pub mod bregman;
pub mod config;
pub mod error;
pub mod experiment;
pub mod game;
pub mod graph;
pub mod learner;
pub mod metrics;
pub mod schedule;
pub mod trajectory;
