//! The config-driven pipeline: run a shortened preset into a temporary
//! directory, then recompute the report from the persisted logs.

use online_gne::config::preset;
use online_gne::experiment::{cmd_report, cmd_run, cmd_validate, summary_table};

fn main() -> online_gne::error::Result<()> {
    let mut cfg = preset("cournot-regret")?;
    cfg.horizon = 1000;
    cfg.metrics.fit_from = Some(200);
    for check in cmd_validate(&cfg)?.checks {
        println!("ok  {check}");
    }
    let dir = std::env::temp_dir().join("online-gne-example-run");
    let outcome = cmd_run(&cfg, Some(&dir))?;
    print!("{}", summary_table(&outcome.report));
    let again = cmd_report(&dir)?;
    println!("report recomputed from logs matches: {}", again == outcome.report);
    println!("manifest: {}", dir.join("manifest.json").display());
    Ok(())
}
