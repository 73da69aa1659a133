//! Design the regularized inverse learning kernel for the double-well
//! scenario and iterate it against the linearized plant, where every
//! spatial mode must shrink by exactly its predicted factor.
//!
//! cargo run --release --example learning_kernel -- [kernel.csv]

use bec_ilc::field::RealField1D;
use bec_ilc::harness::{Design, ScenarioConfig};
use bec_ilc::ilc::{mode_magnitudes, update, LinearSurrogate};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let cfg = ScenarioConfig::default();
    let design = Design::new(&cfg)?;
    let model = &design.model;
    let kernel = &design.kernel;
    println!(
        "alpha_bar = {:.5}, gamma = {:.4e} (1e-2 max|G|^2), kernel {} samples over {:.1} um",
        model.alpha_bar,
        kernel.gamma,
        kernel.kernel.grid().len(),
        kernel.kernel.grid().length()
    );

    let k = model.transfer.wavenumbers();
    let q = model.contraction(kernel.gamma);
    println!("{:>10} {:>12} {:>12}", "k [1/um]", "|G|", "contraction");
    for i in (0..k.len() / 2).step_by(k.len() / 40) {
        println!("{:>10.4} {:>12.5e} {:>12.6}", k[i], model.transfer.values()[i].norm(), q[i]);
    }

    // the linear surrogate plant on the field grid, driven from a compact
    // deviation so that no correction reaches the domain edges
    let grid = design.grid;
    let nu_d = RealField1D::constant(grid, 0.5);
    let plant = LinearSurrogate::new(model.alpha_bar, &cfg.optics.psf, nu_d.clone());
    let mut nu = RealField1D::from_fn(grid, |z| 0.5 + 0.2 * (-(z / 15.0).powi(2)).exp() * (0.3 * z).cos());
    let mut e = plant.error(&nu)?;
    println!("{:>4} {:>12} {:>16}", "n", "|e|", "max mode dev.");
    for n in 0..6 {
        let next = update(&nu, &e, kernel)?.nu;
        let e_next = plant.error(&next)?;
        let (a, b) = (mode_magnitudes(&e, &k), mode_magnitudes(&e_next, &k));
        let peak = a.iter().copied().fold(0.0, f64::max);
        let dev = a
            .iter()
            .zip(&b)
            .zip(&q)
            .filter(|((x, _), _)| **x > 1e-3 * peak)
            .map(|((x, y), p)| (y / x - p).abs())
            .fold(0.0, f64::max);
        println!("{n:>4} {:>12.5e} {:>16.3e}", e.l2_norm(), dev);
        nu = next;
        e = e_next;
    }

    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, kernel.to_csv())?;
        println!("wrote {path}");
    }
    Ok(())
}
