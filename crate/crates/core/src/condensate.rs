//! Stationary condensate physics for the quasi-1D non-polynomial
//! Schrödinger equation: ground state by imaginary-time evolution,
//! chemical potential, energy, Thomas–Fermi density and measurement.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::CondensateError;
use crate::field::{integrate, ComplexField1D, RealField1D, SpatialGrid1D};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CondensateParams {
    /// Normalized mass, ms/µm².
    pub mass: f64,
    /// Transversal scattering length, µm.
    pub scattering_length: f64,
    pub atom_number: f64,
    /// Transversal trap frequency, rad/ms.
    pub omega_perp: f64,
}

impl Default for CondensateParams {
    fn default() -> Self {
        CondensateParams {
            mass: 1.368,
            scattering_length: 5.2e-3,
            atom_number: 5000.0,
            omega_perp: 2.0 * std::f64::consts::PI * 1.4,
        }
    }
}

impl CondensateParams {
    pub fn validate(&self) -> Result<(), CondensateError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.mass) || !ok(self.omega_perp) || !ok(self.atom_number) {
            return Err(CondensateError::InvalidParameter(
                "mass, omega_perp and atom_number must be positive".into(),
            ));
        }
        if !(self.scattering_length.is_finite() && self.scattering_length >= 0.0) {
            return Err(CondensateError::InvalidParameter("scattering length must be non-negative".into()));
        }
        Ok(())
    }

    /// `a_s N`, µm.
    pub fn interaction_length(&self) -> f64 {
        self.scattering_length * self.atom_number
    }

    /// Linear limit without interactions.
    pub fn non_interacting(self) -> Self {
        CondensateParams { scattering_length: 0.0, ..self }
    }
}

fn h_unchecked(rho: f64, p: &CondensateParams) -> f64 {
    let x = p.interaction_length() * rho;
    let s = (1.0 + 2.0 * x).sqrt();
    // (1+3x)/s − 1 rewritten to avoid cancellation at small x
    p.omega_perp * (3.0 * x - 2.0 * x / (1.0 + s)) / s
}

/// npSE interaction term `ω⊥((1+3a_sNρ)/√(1+2a_sNρ) − 1)`.
pub fn nonlinearity(rho: f64, params: &CondensateParams) -> Result<f64, CondensateError> {
    if rho < 0.0 || rho.is_nan() {
        return Err(CondensateError::NegativeDensity { index: 0, value: rho });
    }
    Ok(h_unchecked(rho, params))
}

/// Interaction energy density whose derivative in ρ is [`nonlinearity`].
fn interaction_energy_density(rho: f64, p: &CondensateParams) -> f64 {
    let x = p.interaction_length() * rho;
    p.omega_perp * rho * ((1.0 + 2.0 * x).sqrt() - 1.0)
}

/// Local density solving `nonlinearity(ρ) = d` for `d ≥ 0`, in closed form.
fn inverse_nonlinearity(d: f64, p: &CondensateParams) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    // s = √(1 + 2x) solves 3s² − 2(1 + δ)s − 1 = 0; s − 1 is formed without
    // cancellation so that small depths keep full precision
    let delta = d / p.omega_perp;
    let r = ((1.0 + delta) * (1.0 + delta) + 3.0).sqrt();
    let s_minus_1 = (delta + delta * (2.0 + delta) / (r + 2.0)) / 3.0;
    let x = 0.5 * s_minus_1 * (s_minus_1 + 2.0);
    x / p.interaction_length()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Imaginary time step, ms.
    pub dtau: f64,
    /// Relative change of μ per step below which the state counts as converged.
    pub tolerance: f64,
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { dtau: 1e-3, tolerance: 1e-10, max_steps: 400_000 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), CondensateError> {
        if !(self.dtau > 0.0 && self.dtau.is_finite()) || !(self.tolerance > 0.0) || self.max_steps == 0 {
            return Err(CondensateError::InvalidParameter(
                "dtau, tolerance and max_steps must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    pub phi: ComplexField1D,
    /// Chemical potential from the expectation value, rad/ms.
    pub mu: f64,
    /// Chemical potential from the norm decay of the last step.
    pub mu_decay: f64,
    pub steps: usize,
    pub converged: bool,
}

impl GroundState {
    pub fn density(&self) -> RealField1D {
        self.phi.norm_sqr()
    }

    /// Peak of `2 a_s N ρ`; values below one keep the local interaction in the
    /// weakly nonlinear regime.
    pub fn peak_interaction_parameter(&self, params: &CondensateParams) -> f64 {
        2.0 * params.interaction_length() * self.density().max()
    }
}

/// Spectral machinery shared by the solver, μ and energy evaluation.
struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    k2: Vec<f64>,
    scratch: Vec<Complex64>,
}

impl Spectral {
    fn new(grid: &SpatialGrid1D) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.len();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Spectral {
            forward,
            inverse,
            k2: grid.wavenumbers().iter().map(|k| k * k).collect(),
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    /// Multiply by `factor(k²)` in wavenumber space.
    fn apply(&mut self, buf: &mut [Complex64], factor: impl Fn(f64) -> f64) {
        let n = buf.len() as f64;
        self.forward.process_with_scratch(buf, &mut self.scratch);
        for (b, &k2) in buf.iter_mut().zip(&self.k2) {
            *b *= factor(k2) / n;
        }
        self.inverse.process_with_scratch(buf, &mut self.scratch);
    }
}

fn trapezoid_norm(values: &[Complex64], dz: f64) -> f64 {
    let n = values.len();
    let sum: f64 = values.iter().map(|c| c.norm_sqr()).sum();
    dz * (sum - 0.5 * (values[0].norm_sqr() + values[n - 1].norm_sqr()))
}

fn check_potential(v: &RealField1D, grid: &SpatialGrid1D) -> Result<(), CondensateError> {
    if v.grid() != grid {
        return Err(crate::error::FieldError::GridMismatch.into());
    }
    Ok(())
}

/// Expectation-value chemical potential with a spectral second derivative.
pub fn chemical_potential(
    phi: &ComplexField1D,
    v: &RealField1D,
    params: &CondensateParams,
) -> Result<f64, CondensateError> {
    check_potential(v, phi.grid())?;
    let mut spectral = Spectral::new(phi.grid());
    Ok(mu_expectation(&mut spectral, phi.values(), v.values(), phi.grid().dz(), params))
}

fn mu_expectation(sp: &mut Spectral, phi: &[Complex64], v: &[f64], dz: f64, p: &CondensateParams) -> f64 {
    let mut lap = phi.to_vec();
    sp.apply(&mut lap, |k2| k2 / (2.0 * p.mass));
    let terms: Vec<f64> = phi
        .iter()
        .zip(&lap)
        .zip(v)
        .map(|((f, t), &vi)| (f.conj() * t).re + (vi + h_unchecked(f.norm_sqr(), p)) * f.norm_sqr())
        .collect();
    trapezoid_sum(&terms, dz)
}

fn trapezoid_sum(values: &[f64], dz: f64) -> f64 {
    let n = values.len();
    dz * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1]))
}

/// npSE energy functional `∫ |∂φ|²/2m + V|φ|² + ε(|φ|²) dz`.
pub fn energy(phi: &ComplexField1D, v: &RealField1D, params: &CondensateParams) -> Result<f64, CondensateError> {
    check_potential(v, phi.grid())?;
    let mut sp = Spectral::new(phi.grid());
    Ok(energy_with(&mut sp, phi.values(), v.values(), phi.grid().dz(), params))
}

fn energy_with(sp: &mut Spectral, phi: &[Complex64], v: &[f64], dz: f64, p: &CondensateParams) -> f64 {
    let mut lap = phi.to_vec();
    sp.apply(&mut lap, |k2| k2 / (2.0 * p.mass));
    let terms: Vec<f64> = phi
        .iter()
        .zip(&lap)
        .zip(v)
        .map(|((f, t), &vi)| {
            let rho = f.norm_sqr();
            (f.conj() * t).re + vi * rho + interaction_energy_density(rho, p)
        })
        .collect();
    trapezoid_sum(&terms, dz)
}

/// Largest spacing that resolves the healing length of `v` at chemical potential `mu`.
pub fn resolution_limit(v: &RealField1D, mu: f64, params: &CondensateParams) -> f64 {
    let depth = v.values().iter().map(|&vi| mu - vi).fold(params.omega_perp, f64::max);
    0.5 / (2.0 * params.mass * depth).sqrt()
}

/// Ground state of the npSE in potential `v` by split-step imaginary-time
/// evolution. Starts from `initial` when given, else from the Thomas–Fermi
/// profile (or a Gaussian in the linear limit).
pub fn ground_state(
    v: &RealField1D,
    params: &CondensateParams,
    cfg: &SolverConfig,
    initial: Option<&ComplexField1D>,
) -> Result<GroundState, CondensateError> {
    params.validate()?;
    cfg.validate()?;
    let grid = *v.grid();
    let dz = grid.dz();
    let n = grid.len();

    let mut phi: Vec<Complex64> = match initial {
        Some(init) => {
            check_potential(v, init.grid())?;
            init.values().to_vec()
        }
        None if params.interaction_length() > 0.0 => thomas_fermi_density(v, params)?
            .0
            .values()
            .iter()
            .map(|r| Complex64::new(r.sqrt(), 0.0))
            .collect(),
        None => (0..n).map(|i| Complex64::new((-(grid.z(i) / 10.0).powi(2) / 2.0).exp(), 0.0)).collect(),
    };
    let norm0 = trapezoid_norm(&phi, dz);
    if !(norm0 > 0.0 && norm0.is_finite()) {
        return Err(CondensateError::InvalidParameter("initial state has zero norm".into()));
    }
    let s = norm0.sqrt().recip();
    phi.iter_mut().for_each(|c| *c *= s);

    let mut sp = Spectral::new(&grid);
    let dtau = cfg.dtau;
    let half_kinetic = |k2: f64| (-k2 * dtau / (4.0 * params.mass)).exp();
    let vals = v.values();

    let mut mu_prev = f64::NAN;
    let mut mu_decay = f64::NAN;
    let mut converged = false;
    let mut steps = 0;
    while steps < cfg.max_steps {
        steps += 1;
        sp.apply(&mut phi, half_kinetic);
        for (c, &vi) in phi.iter_mut().zip(vals) {
            *c *= (-(vi + h_unchecked(c.norm_sqr(), params)) * dtau).exp();
        }
        sp.apply(&mut phi, half_kinetic);
        let norm = trapezoid_norm(&phi, dz);
        if !norm.is_finite() || norm <= 0.0 {
            return Err(CondensateError::NotANumber { step: steps });
        }
        let s = norm.sqrt().recip();
        phi.iter_mut().for_each(|c| *c *= s);
        mu_decay = -norm.ln() / (2.0 * dtau);
        if (mu_decay - mu_prev).abs() <= cfg.tolerance * mu_decay.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        mu_prev = mu_decay;
    }

    let mu = mu_expectation(&mut sp, &phi, vals, dz, params);
    if !mu.is_finite() {
        return Err(CondensateError::NotANumber { step: steps });
    }
    let limit = resolution_limit(v, mu, params);
    if dz > limit {
        log::warn!("grid spacing {dz:.3} µm exceeds healing-length limit {limit:.3} µm");
    }
    if !converged {
        log::warn!("ground state not converged after {steps} steps (mu {mu:.6})");
    }
    Ok(GroundState { phi: ComplexField1D::new(grid, phi)?, mu, mu_decay, steps, converged })
}

/// Thomas–Fermi density: pointwise inversion of `nonlinearity(ρ) = μ − V`
/// with μ fixed by normalization.
pub fn thomas_fermi_density(
    v: &RealField1D,
    params: &CondensateParams,
) -> Result<(RealField1D, f64), CondensateError> {
    params.validate()?;
    if params.interaction_length() <= 0.0 {
        return Err(CondensateError::InvalidParameter("Thomas-Fermi needs a positive interaction".into()));
    }
    let grid = *v.grid();
    let density_at = |mu: f64| -> Result<RealField1D, CondensateError> {
        Ok(v.map(|vi| inverse_nonlinearity(mu - vi, params)))
    };
    let mass = |mu: f64| -> Result<f64, CondensateError> { Ok(integrate(&density_at(mu)?)?) };

    let lo0 = v.min();
    let mut lo = lo0;
    let mut step = params.omega_perp;
    let mut hi = lo + step;
    let mut tries = 0;
    while mass(hi)? < 1.0 {
        lo = hi;
        step *= 2.0;
        hi += step;
        tries += 1;
        if tries > 200 || !hi.is_finite() {
            return Err(CondensateError::NoBracket);
        }
    }
    let mut mu = 0.5 * (lo + hi);
    for _ in 0..400 {
        mu = 0.5 * (lo + hi);
        let m = mass(mu)?;
        if (m - 1.0).abs() < 1e-12 || hi - lo <= 4.0 * f64::EPSILON * mu.abs().max(1.0) {
            break;
        }
        if m > 1.0 {
            hi = mu;
        } else {
            lo = mu;
        }
    }
    let rho = density_at(mu)?;
    debug_assert_eq!(*rho.grid(), grid);
    Ok((rho, mu))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasurementConfig {
    /// Additive Gaussian noise on ρ, 1/µm.
    pub noise_std: f64,
    pub seed: u64,
    pub clamp_negative: bool,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        MeasurementConfig { noise_std: 0.0, seed: 0, clamp_negative: true }
    }
}

/// Simulated density measurement. `shot` selects an independent noise draw.
pub fn measure_density(rho: &RealField1D, cfg: &MeasurementConfig, shot: u64) -> Result<RealField1D, CondensateError> {
    if let Some((index, &value)) = rho.values().iter().enumerate().find(|(_, r)| **r < 0.0) {
        return Err(CondensateError::NegativeDensity { index, value });
    }
    if !(cfg.noise_std >= 0.0 && cfg.noise_std.is_finite()) {
        return Err(CondensateError::InvalidParameter("noise std must be non-negative".into()));
    }
    if cfg.noise_std == 0.0 {
        return Ok(rho.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(shot);
    let normal = Normal::new(0.0, cfg.noise_std).expect("valid std");
    let values = rho
        .values()
        .iter()
        .map(|&r| {
            let m = r + normal.sample(&mut rng);
            if cfg.clamp_negative { m.max(0.0) } else { m }
        })
        .collect();
    Ok(RealField1D::new(*rho.grid(), values)?)
}
