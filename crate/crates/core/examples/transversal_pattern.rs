//! Solve the binary transversal pattern for a few virtual inputs and show
//! the field it produces across the column.
//!
//! cargo run --release --example transversal_pattern -- [nu ...]

use bec_ilc::harness::ScenarioConfig;
use bec_ilc::inputmap::{solve_pattern, transversal_field, Algorithm, OptimizerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let targets: Vec<f64> = {
        let v: Vec<f64> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
        if v.is_empty() { vec![0.2, 0.4, 0.6, 0.8, 1.0] } else { v }
    };
    let cfg = ScenarioConfig::default();
    let model = cfg.transversal_model()?;
    let oc = &cfg.optics;

    for algorithm in [Algorithm::Genetic, Algorithm::BitflipLocalSearch] {
        let opt = OptimizerConfig { algorithm, ..cfg.lut.optimizer };
        println!("{algorithm:?}:");
        for &nu in &targets {
            let sol = solve_pattern(nu, &opt, &model)?;
            println!(
                "  nu {nu:.3}: achieved {:.5} ({:+.3} steps of 1/50), residual {:.3e}",
                sol.achieved,
                (sol.achieved - nu) * 50.0,
                sol.residual
            );
            println!("    {}", sol.pattern.to_bit_string());
            if algorithm == Algorithm::Genetic {
                let profile: Vec<String> = (-8..=8)
                    .step_by(2)
                    .map(|y| format!("{:.3}", transversal_field(&sol.pattern, &oc.psf, &oc.beam, oc.dmd.pitch, y as f64)))
                    .collect();
                println!("    E(y = -8..8 step 2): {}", profile.join(" "));
            }
        }
    }
    Ok(())
}
