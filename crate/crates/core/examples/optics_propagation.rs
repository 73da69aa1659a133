//! Push DMD patterns through the optical chain: the exact pixel-by-pixel
//! model against the separable shortcut, then a dark spot on the output
//! optics.
//!
//! cargo run --release --example optics_propagation

use std::time::Instant;

use bec_ilc::field::RealField1D;
use bec_ilc::harness::ScenarioConfig;
use bec_ilc::optics::{potential_from_field, DarkSpot, DmdPattern, OpticalSystem, TransmissionDisturbance};

fn rel_diff(a: &RealField1D, b: &RealField1D) -> f64 {
    let scale = a.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let cfg = ScenarioConfig::default();
    let oc = &cfg.optics;
    let t = Instant::now();
    let unit = OpticalSystem::new(oc.dmd, oc.beam.with_amplitude(1.0), oc.psf, cfg.grid)?;
    let amplitude = unit.calibrated_amplitude(oc.headroom * cfg.desired.v_max, oc.alpha_v);
    let optics = unit.with_amplitude(amplitude)?;
    println!("tabulated {} columns x {} samples in {:.2?}", oc.dmd.n_l, cfg.grid.len(), t.elapsed());
    println!("E_perp_max = {:.5}, alpha_V E_perp_max^2 = {:.4} rad/ms", optics.e_perp_max(), oc.alpha_v * optics.e_perp_max().powi(2));

    let geo = optics.geometry();
    let all_on = DmdPattern::ones(geo.n_t, geo.n_l);
    let full = potential_from_field(&optics.propagate_full(&all_on)?, oc.alpha_v, None)?;
    let cols = RealField1D::constant(geo.column_grid(), 1.0);
    let sep = optics.propagate_separable(&cols, oc.alpha_v)?;
    println!("all-on pattern: full vs separable, max relative difference {:.2e}", rel_diff(&full, &sep));

    // a column-dependent pattern: every column shares one transversal profile,
    // so the separable path still applies with nu = that profile's E(0)
    let mut stripes = DmdPattern::zeros(geo.n_t, geo.n_l);
    for j in (0..geo.n_l).filter(|j| (j / 10) % 2 == 0) {
        for i in 0..geo.n_t {
            stripes.set(i, j, true);
        }
    }
    let nu = RealField1D::from_fn(geo.column_grid(), |z| {
        let j = ((z - geo.column_grid().start()) / geo.pitch).round() as usize;
        if (j / 10) % 2 == 0 { 1.0 } else { 0.0 }
    });
    let full = potential_from_field(&optics.propagate_full(&stripes)?, oc.alpha_v, None)?;
    let sep = optics.propagate_separable(&nu, oc.alpha_v)?;
    println!("10 um stripes: full vs separable, max relative difference {:.2e}", rel_diff(&full, &sep));

    let spots = TransmissionDisturbance { spots: vec![DarkSpot { center: 0.0, width: 4.0, depth: 0.3 }] };
    let dark = potential_from_field(&optics.propagate_full(&all_on)?, oc.alpha_v, Some(&spots))?;
    let clean = potential_from_field(&optics.propagate_full(&all_on)?, oc.alpha_v, None)?;
    println!("{:>8} {:>10} {:>10} {:>8}", "z", "V_opt", "dark", "ratio");
    for i in (0..cfg.grid.len()).step_by(8).filter(|&i| cfg.grid.z(i).abs() < 12.0) {
        let (a, b) = (clean.values()[i], dark.values()[i]);
        println!("{:>8.2} {:>10.4} {:>10.4} {:>8.4}", cfg.grid.z(i), a, b, b / a);
    }
    Ok(())
}
