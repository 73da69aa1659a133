//! Ground states of the quasi-1D condensate: the linear harmonic limit
//! against its closed form, then the double well of the learning scenario
//! next to its Thomas–Fermi profile.
//!
//! cargo run --release --example ground_state

use std::time::Instant;

use bec_ilc::condensate::{ground_state, thomas_fermi_density, CondensateParams, SolverConfig};
use bec_ilc::field::{integrate, RealField1D, SpatialGrid1D};
use bec_ilc::harness::desired_potential;
use bec_ilc::harness::DesiredPotentialSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let grid = SpatialGrid1D::default();
    let params = CondensateParams::default();

    // linear limit in the weak longitudinal trap
    let omega = 2.0 * std::f64::consts::PI * 0.007;
    let v = RealField1D::from_fn(grid, |z| 0.5 * params.mass * omega * omega * z * z);
    let cfg = SolverConfig { dtau: 0.05, ..SolverConfig::default() };
    let t = Instant::now();
    let gs = ground_state(&v, &params.non_interacting(), &cfg, None)?;
    let var = 1.0 / (2.0 * params.mass * omega);
    let exact = RealField1D::from_fn(grid, |z| (-z * z / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt());
    let diff = gs.density().zip_with(&exact, |a, b| (a - b).powi(2))?;
    println!("harmonic, a_s = 0:");
    println!("  mu = {:.8} rad/ms, omega/2 = {:.8}, rel. error {:.2e}", gs.mu, omega / 2.0, (gs.mu / (omega / 2.0) - 1.0).abs());
    println!("  density L2 error {:.2e}, {} steps in {:.2?}", integrate(&diff)?.sqrt(), gs.steps, t.elapsed());

    // interacting double well
    let vd = desired_potential(&DesiredPotentialSpec::default(), grid)?;
    let t = Instant::now();
    let full = ground_state(&vd, &params, &SolverConfig::default(), None)?;
    let (tf, mu_tf) = thomas_fermi_density(&vd, &params)?;
    println!("double well:");
    println!("  mu = {:.5} rad/ms (Thomas-Fermi {:.5}), {} steps in {:.2?}", full.mu, mu_tf, full.steps, t.elapsed());
    println!("  peak 2 a_s N rho = {:.3}", full.peak_interaction_parameter(&params));

    let rho = full.density();
    let inside = |vi: f64| full.mu - vi > 0.1 * params.omega_perp;
    let (mut num, mut den) = (0.0, 0.0);
    for ((&a, &b), &vi) in rho.values().iter().zip(tf.values()).zip(vd.values()) {
        if inside(vi) {
            num += (a.sqrt() - b.sqrt()).powi(2);
            den += a;
        }
    }
    println!("  |sqrt(rho_TF) - sqrt(rho)| / |sqrt(rho)| inside the cloud: {:.4}", (num / den).sqrt());

    println!("{:>8} {:>10} {:>12} {:>12}", "z", "V", "rho", "rho_TF");
    for i in (0..grid.len()).step_by(32) {
        println!("{:>8.2} {:>10.4} {:>12.5e} {:>12.5e}", grid.z(i), vd.values()[i], rho.values()[i], tf.values()[i]);
    }
    Ok(())
}
