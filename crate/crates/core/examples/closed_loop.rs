//! Run the double-well learning scenario end to end: 40 clean iterations,
//! then dark spots on the output optics for 40 more.
//!
//! cargo run --release --example closed_loop -- [lut.json] [out_dir] [config.json]

use std::path::Path;

use bec_ilc::harness::{
    converged_from, error_ratios, export_records, hidden_region_ratio, monotonicity_violations, run_closed_loop, Design,
    ScenarioConfig,
};
use bec_ilc::inputmap::Lut;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cfg = match args.get(2) {
        Some(p) => ScenarioConfig::load(p.as_ref())?,
        None => ScenarioConfig::default(),
    };
    let lut = match args.first().filter(|p| Path::new(p).exists()) {
        Some(p) => Lut::from_json(&std::fs::read_to_string(p)?)?,
        None => {
            println!("building LUT ...");
            cfg.build_lut()?
        }
    };

    let design = Design::new(&cfg)?;
    println!(
        "mu_d = {:.4} rad/ms, alpha_bar = {:.4}, kernel width {} samples",
        design.desired_state.mu,
        design.gain.alpha_bar,
        design.kernel.kernel.grid().len()
    );

    let (records, abort) = match run_closed_loop(&cfg, &design, &lut) {
        Ok(r) => (r, None),
        Err(a) => (a.records, Some(a.error)),
    };
    let ratios = error_ratios(&records);
    println!("{:>4} {:>12} {:>11} {:>9} {:>7} {:>6}", "n", "|e|", "ratio", "mu", "steps", "clamp");
    for (r, q) in records.iter().zip(&ratios) {
        println!(
            "{:>4} {:>12.5e} {:>11.4e} {:>9.4} {:>7} {:>6}",
            r.n, r.error_norm, q, r.mu, r.solver_steps, r.clamped
        );
    }
    let onset = cfg.disturbances.first().map_or(records.len(), |d| d.iteration);
    println!("monotonicity violations before onset: {:?}", monotonicity_violations(&records, onset.saturating_sub(1), 1e-3));
    if let Some(from) = converged_from(&records, onset, 2.0) {
        if let Some(h) = hidden_region_ratio(&records, &design.rho_desired, 1e-4, from, records.len()) {
            println!("hidden/occupied |dnu| ratio from n = {from} on: {h:.4}");
        }
    }

    if let Some(dir) = args.get(1).filter(|d| !d.is_empty()) {
        export_records(&records, &cfg, Some(&design), Some(&lut), abort.as_ref(), dir.as_ref())?;
        println!("exported to {dir}");
    }
    if let Some(e) = abort {
        return Err(e.into());
    }
    Ok(())
}
