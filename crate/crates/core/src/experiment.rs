//! Config-driven runs: execute every seed, persist logs with a hashed
//! manifest, and recompute metric reports from persisted logs.
//!
//! A run directory holds
//! - `config.toml`: the effective config after command-line overrides,
//! - `log-seed-<seed>.csv`: one trajectory per seed,
//! - `manifest.json`: hashes, bounds, σ and the RNG derivation rule,
//! - `report.json`, `curves.csv`: metrics derived from the logs alone.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bandit::{DEFAULT_RADIUS_FRACTION, DIRECTION_RNG};
use crate::config::{Built, ExperimentConfig, LearnerKind};
use crate::error::{Error, Result};
use crate::game::{finite_difference_error, limit_gne_bruteforce, sample_profile, GameBounds};
use crate::metrics::{
    consensus_residual, loglog_fit, loglog_fit_between, max_regret, offset_by, regret_all, sublinearity_fit,
    tracking_error_to, violation, LogLogFit,
};
use crate::trajectory::TrajectoryLog;

pub const CSV_SCHEMA_VERSION: u32 = 1;
/// Added to a cumulative metric before fitting when it touches zero.
pub const FIT_EPSILON: f64 = 1e-9;
const FD_STEP: f64 = 1e-5;
const FD_TOL: f64 = 1e-4;
const FD_PROBES: usize = 10;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seed: u64,
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub library_version: String,
    pub csv_schema: u32,
    pub config_file: String,
    pub config_sha256: String,
    pub logs: Vec<LogEntry>,
    pub sigma: f64,
    pub bounds: GameBounds,
    pub invariant_checks: bool,
    pub init_rng: String,
    pub direction_rng: Option<String>,
    pub radius_rule: Option<String>,
}

/// A cumulative metric with its per-round average and growth fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthSummary {
    pub curve: Vec<f64>,
    pub averaged: Vec<f64>,
    pub fit: Option<LogLogFit>,
    /// Offset added before fitting because some value was `≤ 0`.
    pub fit_epsilon: Option<f64>,
    pub identically_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingSummary {
    pub gne: Vec<Vec<f64>>,
    /// `‖x_T − x*‖` at each horizon, mean over seeds.
    pub last_iterate: Vec<f64>,
    /// `‖x̄_T − x*‖²` at each horizon, mean over seeds.
    pub averaged: Vec<f64>,
    pub averaged_fit: Option<LogLogFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub seeds: Vec<u64>,
    pub horizons: Vec<usize>,
    /// Mean over seeds of `max_i Reg_i(T)`; absent for non-affine constraints.
    pub regret: Option<GrowthSummary>,
    /// Number of (seed, player, horizon) comparators that used the `Ω_i` fallback.
    pub comparator_fallbacks: usize,
    pub comparator_solves: usize,
    /// Mean over seeds of `R_g(T)`.
    pub violation: GrowthSummary,
    pub tracking: Option<TrackingSummary>,
    /// Rounds, over all seeds, where the consensus residual exceeded its bound.
    pub consensus_violations: usize,
    pub max_consensus_ratio: f64,
}

fn mean_curves(curves: &[Vec<f64>]) -> Vec<f64> {
    let k = curves[0].len();
    (0..k)
        .map(|h| curves.iter().map(|c| c[h]).sum::<f64>() / curves.len() as f64)
        .collect()
}

fn growth(horizons: &[usize], curve: Vec<f64>, fit_from: Option<usize>) -> GrowthSummary {
    let averaged = curve.iter().zip(horizons).map(|(v, &h)| v / h as f64).collect();
    let identically_zero = curve.iter().all(|v| *v == 0.0);
    let needs_eps = curve.iter().any(|v| *v <= 0.0);
    let values = if needs_eps { offset_by(&curve, FIT_EPSILON) } else { curve.clone() };
    let hi = horizons.last().copied().unwrap_or(0);
    let fit = match fit_from {
        Some(lo) => loglog_fit_between(horizons, &values, lo, hi),
        None => sublinearity_fit(horizons, &values),
    }
    .ok();
    GrowthSummary {
        curve,
        averaged,
        fit,
        fit_epsilon: needs_eps.then_some(FIT_EPSILON),
        identically_zero,
    }
}

/// Metrics of a set of logs; depends on nothing but the logs and the config.
pub fn compute_report(config: &ExperimentConfig, built: &Built, logs: &[(u64, TrajectoryLog)]) -> Result<RunReport> {
    let game = built.game.as_ref();
    let horizons = config.horizons();
    let fit_from = config.metrics.fit_from;

    let regrets: Vec<_> = logs
        .par_iter()
        .map(|(_, log)| regret_all(log, game, &horizons))
        .collect();
    let mut fallbacks = 0;
    let mut solves = 0;
    let regret = match regrets.into_iter().collect::<Result<Vec<_>>>() {
        Ok(per_seed) => {
            for reports in &per_seed {
                for r in reports {
                    solves += r.comparators.len();
                    fallbacks += r.comparators.iter().filter(|c| c.fallback).count();
                }
            }
            let curves: Vec<Vec<f64>> = per_seed.iter().map(|r| max_regret(r)).collect();
            Some(growth(&horizons, mean_curves(&curves), fit_from))
        }
        Err(Error::NonAffineConstraint) => None,
        Err(e) => return Err(e),
    };

    let violations = logs
        .iter()
        .map(|(_, log)| violation(log, &horizons).map(|v| v.values))
        .collect::<Result<Vec<_>>>()?;
    let violation = growth(&horizons, mean_curves(&violations), fit_from);

    let tracking = match &built.limit {
        Some(limit) => {
            let gne = match limit.gne() {
                Some(x) => x,
                None => limit_gne_bruteforce(limit.as_ref(), 1e-9)?.point,
            };
            let at = |curve: Vec<f64>| horizons.iter().map(|&h| curve[h - 1]).collect::<Vec<f64>>();
            let last: Vec<Vec<f64>> = logs.iter().map(|(_, l)| at(tracking_error_to(l, &gne, false))).collect();
            let avg: Vec<Vec<f64>> = logs.iter().map(|(_, l)| at(tracking_error_to(l, &gne, true))).collect();
            let averaged = mean_curves(&avg);
            let hi = *horizons.last().unwrap();
            let xs: Vec<f64> = horizons.iter().map(|&h| h as f64).collect();
            let averaged_fit = match fit_from {
                Some(lo) => loglog_fit_between(&horizons, &averaged, lo, hi),
                None => loglog_fit(&xs, &averaged),
            }
            .ok();
            Some(TrackingSummary {
                gne,
                last_iterate: mean_curves(&last),
                averaged,
                averaged_fit,
            })
        }
        None => None,
    };

    let mut consensus_violations = 0;
    let mut max_ratio: f64 = 0.0;
    for (_, log) in logs {
        let c = consensus_residual(log, built.graph.sigma(), game.bounds());
        consensus_violations += c.violations();
        for (r, b) in c.residual.iter().zip(&c.bound) {
            max_ratio = max_ratio.max(r / b);
        }
    }

    Ok(RunReport {
        name: config.name.clone(),
        seeds: logs.iter().map(|(s, _)| *s).collect(),
        horizons,
        regret,
        comparator_fallbacks: fallbacks,
        comparator_solves: solves,
        violation,
        tracking,
        consensus_violations,
        max_consensus_ratio: max_ratio,
    })
}

/// Runs one seed of a built config.
pub fn run_seed(config: &ExperimentConfig, built: &Built, seed: u64) -> Result<TrajectoryLog> {
    let game = built.game.as_ref();
    match config.learner.kind {
        LearnerKind::Full => built.full_info(config)?.run(game, config.horizon, seed, config.init),
        LearnerKind::Bandit => built.bandit(config, seed)?.run_bandit(game, config.horizon, config.init),
    }
}

fn log_file(seed: u64) -> String {
    format!("log-seed-{seed}.csv")
}

pub fn curves_csv(report: &RunReport) -> String {
    let mut out = String::from(
        "horizon,regret_max,regret_max_per_round,violation,violation_per_round,tracking_last,tracking_averaged\n",
    );
    for (k, h) in report.horizons.iter().enumerate() {
        let cell = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        let reg = report.regret.as_ref();
        let tr = report.tracking.as_ref();
        let _ = writeln!(
            out,
            "{h},{},{},{},{},{},{}",
            cell(reg.map(|r| r.curve[k])),
            cell(reg.map(|r| r.averaged[k])),
            report.violation.curve[k],
            report.violation.averaged[k],
            cell(tr.map(|t| t.last_iterate[k])),
            cell(tr.map(|t| t.averaged[k])),
        );
    }
    out
}

fn write_report(dir: &Path, report: &RunReport) -> Result<()> {
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)? + "\n")?;
    std::fs::write(dir.join("curves.csv"), curves_csv(report))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub report: RunReport,
}

/// Executes every seed and writes the run directory. Fails with
/// [`Error::InvariantViolation`] as soon as any seed breaks an online check.
pub fn cmd_run(config: &ExperimentConfig, out: Option<&Path>) -> Result<RunOutcome> {
    let built = config.build()?;
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(&config.name));
    std::fs::create_dir_all(&dir)?;

    let logs: Vec<(u64, TrajectoryLog)> = config
        .seeds
        .par_iter()
        .map(|&seed| run_seed(config, &built, seed).map(|log| (seed, log)))
        .collect::<Result<_>>()?;

    let config_text = config.to_toml();
    std::fs::write(dir.join("config.toml"), &config_text)?;
    let mut entries = Vec::new();
    for (seed, log) in &logs {
        let bytes = log.to_csv_bytes()?;
        let file = log_file(*seed);
        std::fs::write(dir.join(&file), &bytes)?;
        entries.push(LogEntry {
            seed: *seed,
            file,
            sha256: sha256_hex(&bytes),
        });
    }
    let bandit = config.learner.kind == LearnerKind::Bandit;
    let manifest = Manifest {
        name: config.name.clone(),
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        csv_schema: CSV_SCHEMA_VERSION,
        config_file: "config.toml".into(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        logs: entries,
        sigma: built.graph.sigma(),
        bounds: *built.game.bounds(),
        invariant_checks: config.check_invariants,
        init_rng: "ChaCha8Rng::seed_from_u64(seed), players sampled in index order".into(),
        direction_rng: bandit.then(|| DIRECTION_RNG.to_string()),
        radius_rule: bandit.then(|| match config.learner.radius_constant {
            Some(c) => format!("delta_i,t = min({DEFAULT_RADIUS_FRACTION}·r_i, {c}·t^-d3)"),
            None => format!("delta_i,t = min({DEFAULT_RADIUS_FRACTION}·r_i, {DEFAULT_RADIUS_FRACTION}·r_i·t^-d3)"),
        }),
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;

    let report = compute_report(config, &built, &logs)?;
    write_report(&dir, &report)?;
    Ok(RunOutcome { dir, manifest, report })
}

/// Reloads a run directory, verifies every hash and recomputes the report.
pub fn cmd_report(dir: &Path) -> Result<RunReport> {
    let corrupt = |reason: String| Error::CorruptRun {
        path: dir.to_path_buf(),
        reason,
    };
    let manifest_path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| corrupt(format!("cannot read manifest: {e}")))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| corrupt(format!("bad manifest: {e}")))?;
    if manifest.csv_schema != CSV_SCHEMA_VERSION {
        return Err(corrupt(format!("unsupported log schema {}", manifest.csv_schema)));
    }

    let verify = |file: &str, expected: &str| -> Result<Vec<u8>> {
        let path = dir.join(file);
        let bytes = std::fs::read(&path).map_err(|e| corrupt(format!("cannot read {file}: {e}")))?;
        let actual = sha256_hex(&bytes);
        if actual != expected {
            return Err(Error::HashMismatch {
                path,
                expected: expected.to_string(),
                actual,
            });
        }
        Ok(bytes)
    };
    let config_bytes = verify(&manifest.config_file, &manifest.config_sha256)?;
    let config_text = String::from_utf8(config_bytes).map_err(|_| corrupt("config is not UTF-8".into()))?;
    let config = ExperimentConfig::from_toml(&config_text)?;
    if manifest.logs.is_empty() {
        return Err(corrupt("manifest lists no logs".into()));
    }
    let mut logs = Vec::new();
    for entry in &manifest.logs {
        let bytes = verify(&entry.file, &entry.sha256)?;
        let log = TrajectoryLog::read_csv(&bytes[..]).map_err(|e| match e {
            Error::CorruptRun { reason, .. } => Error::CorruptRun {
                path: dir.join(&entry.file),
                reason,
            },
            other => other,
        })?;
        if log.len() as u64 != config.horizon {
            return Err(corrupt(format!("{} has {} rounds, expected {}", entry.file, log.len(), config.horizon)));
        }
        logs.push((entry.seed, log));
    }
    let built = config.build()?;
    let report = compute_report(&config, &built, &logs)?;
    write_report(dir, &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    pub checks: Vec<String>,
}

/// Dry run: builds everything a run would need and probes the oracle's
/// derivatives, without producing a trajectory.
pub fn cmd_validate(config: &ExperimentConfig) -> Result<Validation> {
    let mut checks = Vec::new();
    let schedule = config.schedule()?;
    checks.push(format!(
        "schedule {:?}: step-size chain holds for t <= {}",
        schedule.exponents(),
        config.horizon
    ));
    let graph = config.graph()?;
    checks.push(format!("graph: {} players, sigma = {:.6}", graph.n_players(), graph.sigma()));
    let built = config.build()?;
    let game = built.game.as_ref();
    checks.push(format!("game: bounds {:?}", game.bounds()));
    match config.learner.kind {
        LearnerKind::Full => {
            built.full_info(config)?;
        }
        LearnerKind::Bandit => {
            built.bandit(config, config.seeds[0])?;
        }
    }
    checks.push("learner wiring".into());

    let mut rng = ChaCha8Rng::seed_from_u64(config.seeds[0]);
    for probe in 0..FD_PROBES {
        let t = 1 + (probe as u64 * 997) % config.horizon;
        let x = sample_profile(game, &mut rng);
        let (cost, cons) = finite_difference_error(game, t, &x, FD_STEP);
        if !(cost <= FD_TOL && cons <= FD_TOL) {
            return Err(Error::InvalidGame(format!(
                "finite-difference probe {probe} at t = {t}: gradient error {cost:e}, Jacobian error {cons:e}"
            )));
        }
    }
    checks.push(format!("{FD_PROBES} finite-difference probes within {FD_TOL:e}"));
    Ok(Validation { checks })
}

/// Process exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvariantViolation { .. } => 1,
        _ => 2,
    }
}

pub fn summary_table(report: &RunReport) -> String {
    let mut s = String::new();
    let t = report.horizons.last().copied().unwrap_or(0);
    let _ = writeln!(s, "run {} ({} seed(s), T = {t})", report.name, report.seeds.len());
    let fit = |f: &Option<LogLogFit>| match f {
        Some(f) => format!("slope {:.3} (r2 {:.3})", f.slope, f.r2),
        None => "slope n/a".into(),
    };
    if let Some(r) = &report.regret {
        let _ = writeln!(
            s,
            "  max_i Reg_i(T)/T   {:>12.6}   {}   comparator fallbacks {}/{}",
            r.averaged.last().unwrap(),
            fit(&r.fit),
            report.comparator_fallbacks,
            report.comparator_solves
        );
    } else {
        let _ = writeln!(s, "  regret             n/a (non-affine constraints)");
    }
    let v = &report.violation;
    let _ = writeln!(
        s,
        "  R_g(T)/T           {:>12.6}   {}{}",
        v.averaged.last().unwrap(),
        fit(&v.fit),
        if v.identically_zero { "   (identically zero)" } else { "" }
    );
    if let Some(tr) = &report.tracking {
        let _ = writeln!(s, "  ||x_T - x*||       {:>12.6}", tr.last_iterate.last().unwrap());
        let _ = writeln!(
            s,
            "  ||xbar_T - x*||^2  {:>12.6}   {}",
            tr.averaged.last().unwrap(),
            fit(&tr.averaged_fit)
        );
    }
    let _ = writeln!(
        s,
        "  consensus bound    {} violation(s), max residual/bound {:.3e}",
        report.consensus_violations, report.max_consensus_ratio
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::preset;

    fn small(name: &str, horizon: u64) -> ExperimentConfig {
        let mut cfg = preset(name).unwrap();
        cfg.horizon = horizon;
        cfg.seeds.truncate(2);
        cfg.metrics.horizon_step = 50;
        cfg.metrics.fit_from = None;
        cfg
    }

    #[test]
    fn run_then_report_agree() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small("cournot-bandit", 300);
        let outcome = cmd_run(&cfg, Some(dir.path())).unwrap();
        assert_eq!(outcome.manifest.logs.len(), 2);
        assert!(outcome.manifest.direction_rng.is_some());
        let report = cmd_report(dir.path()).unwrap();
        assert_eq!(report, outcome.report);
    }

    #[test]
    fn tampering_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small("cournot-regret", 120);
        let outcome = cmd_run(&cfg, Some(dir.path())).unwrap();
        let log = dir.path().join(&outcome.manifest.logs[0].file);
        let text = std::fs::read_to_string(&log).unwrap();
        std::fs::write(&log, text.replacen("\n1,0,", "\n1,0,1", 1)).unwrap();
        assert!(matches!(cmd_report(dir.path()), Err(Error::HashMismatch { .. })));
    }

    #[test]
    fn empty_directory_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let err = cmd_report(dir.path()).unwrap_err();
        assert!(matches!(err, Error::CorruptRun { .. }));
        assert_eq!(exit_code(&err), 2);
    }

    #[test]
    fn validate_presets_and_reject_bad_exponents() {
        for (name, _) in crate::config::PRESETS {
            cmd_validate(&preset(name).unwrap()).unwrap();
        }
        let mut cfg = preset("cournot-regret").unwrap();
        cfg.learner.schedule = crate::config::ScheduleSpec::Regret { a1: 0.5, a2: 0.3 };
        assert!(cmd_validate(&cfg).is_err());
    }

    #[test]
    fn tracking_report_for_converging_market() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small("cournot-tracking", 400);
        let outcome = cmd_run(&cfg, Some(dir.path())).unwrap();
        let tr = outcome.report.tracking.clone().unwrap();
        assert_eq!(tr.gne.len(), 20);
        assert!(tr.last_iterate.iter().all(|v| v.is_finite()));
        assert!(summary_table(&outcome.report).contains("x*"));
    }
}
