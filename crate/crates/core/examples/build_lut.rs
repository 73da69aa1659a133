//! Build the quantized input look-up table for the default optics and
//! report how close every entry gets to its target.
//!
//! cargo run --release --example build_lut -- [out.json] [config.json]

use std::time::Instant;

use bec_ilc::harness::ScenarioConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = args.first().map_or("lut.json", String::as_str);
    let cfg = match args.get(1) {
        Some(p) => ScenarioConfig::load(p.as_ref())?,
        None => ScenarioConfig::default(),
    };

    let t = Instant::now();
    let lut = cfg.build_lut()?;
    let elapsed = t.elapsed();

    let step = 1.0 / (lut.n_nu() - 1) as f64;
    println!("{:>4} {:>8} {:>10} {:>12} {:>11}", "k", "nu", "achieved", "err/step", "residual");
    for (k, e) in lut.entries.iter().enumerate() {
        println!(
            "{k:>4} {:>8.4} {:>10.6} {:>12.4} {:>11.3e}",
            e.nu,
            e.achieved,
            (e.achieved - e.nu) / step,
            e.residual
        );
    }
    let tight = lut.entries.iter().filter(|e| (e.achieved - e.nu).abs() <= 0.05 * step).count();
    println!(
        "{tight}/{} entries within 5% of a step, worst {:.3} steps, built in {:.1?}",
        lut.n_nu(),
        lut.max_entry_error() / step,
        elapsed
    );
    std::fs::write(out, lut.to_json())?;
    println!("wrote {out}");
    Ok(())
}
