//! Learning layer: density error, linearized plant, regularized
//! pseudo-inverse learning kernel and the virtual-input update.
//!
//! Around the desired state the square-root density responds to a change of
//! the virtual input roughly as `e ≈ -ᾱ (g_z * Δν)`, i.e. through the
//! transfer function `G(k) = -ᾱ F{g_z}`. The learning filter is
//! `L(k) = G*(k) / (γ + |G(k)|²)` and the update
//! `ν ← clamp(ν - L * e, 0, 1)` contracts every resolved error mode by
//! `1 - |G|²/(γ + |G|²)` in the linear regime.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::condensate::CondensateParams;
use crate::error::{FieldError, IlcError};
use crate::field::{convolve, inverse_spectrum, spectrum, RealField1D, SpatialGrid1D, Spectrum};
use crate::optics::PsfModel;

/// `√ρ_meas − √ρ_d` pointwise.
pub fn density_error(rho_meas: &RealField1D, rho_desired: &RealField1D) -> Result<RealField1D, IlcError> {
    for f in [rho_meas, rho_desired] {
        if let Some((index, &value)) = f.values().iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(IlcError::NegativeDensity { index, value });
        }
    }
    Ok(rho_meas.zip_with(rho_desired, |a, b| a.sqrt() - b.sqrt())?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GainCutoffs {
    /// Minimum optical share `V^d − V_mag`, as a fraction of `V_max`.
    pub optical_fraction: f64,
    /// Minimum occupation depth `μ^d − V^d`, as a fraction of `ω⊥`.
    pub mu_fraction: f64,
}

impl Default for GainCutoffs {
    fn default() -> Self {
        GainCutoffs { optical_fraction: 0.05, mu_fraction: 0.15 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainProfile {
    /// `α_ρ(z)` on the support, zero elsewhere.
    pub alpha: RealField1D,
    pub support: Vec<bool>,
    pub alpha_bar: f64,
}

/// Local gain `α_ρ(z) = κ E⊥max √(α_V (V^d − V_mag) / (μ^d − V^d))` with
/// `κ = 1/√(3 ω⊥ a_s N)`, restricted to where both radicands are safely
/// positive, and its maximum `ᾱ`.
#[allow(clippy::too_many_arguments)]
pub fn gain_profile(
    v_desired: &RealField1D,
    v_mag: &RealField1D,
    mu_desired: f64,
    params: &CondensateParams,
    e_perp_max: f64,
    alpha_v: f64,
    v_max: f64,
    cutoffs: &GainCutoffs,
) -> Result<GainProfile, IlcError> {
    if v_desired.grid() != v_mag.grid() {
        return Err(FieldError::GridMismatch.into());
    }
    let kappa = 1.0 / (3.0 * params.omega_perp * params.interaction_length()).sqrt();
    let eps_opt = cutoffs.optical_fraction * v_max;
    let eps_mu = cutoffs.mu_fraction * params.omega_perp;
    let mut support = Vec::with_capacity(v_desired.grid().len());
    let values: Vec<f64> = v_desired
        .values()
        .iter()
        .zip(v_mag.values())
        .map(|(&vd, &vm)| {
            let opt = vd - vm;
            let occ = mu_desired - vd;
            let inside = opt > eps_opt && occ > eps_mu;
            support.push(inside);
            if inside { kappa * e_perp_max * (alpha_v * opt / occ).sqrt() } else { 0.0 }
        })
        .collect();
    let alpha_bar = values.iter().copied().fold(0.0, f64::max);
    if !(alpha_bar > 0.0 && alpha_bar.is_finite()) {
        return Err(IlcError::EmptySupport);
    }
    Ok(GainProfile { alpha: RealField1D::new(*v_desired.grid(), values)?, support, alpha_bar })
}

/// Linearized, spatially invariant plant `G(k) = −ᾱ F{g_z}` tabulated on a
/// lag grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedModel {
    pub alpha_bar: f64,
    pub psf: PsfModel,
    pub transfer: Spectrum,
}

impl LinearizedModel {
    pub fn max_gain_sqr(&self) -> f64 {
        self.transfer.max_norm_sqr()
    }

    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for v in self.transfer.values() {
            h.update(v.re.to_le_bytes());
            h.update(v.im.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Per-mode contraction `1 − |G|²/(γ + |G|²)` of the ideal loop.
    pub fn contraction(&self, gamma: f64) -> Vec<f64> {
        self.transfer.values().iter().map(|g| 1.0 - g.norm_sqr() / (gamma + g.norm_sqr())).collect()
    }
}

/// Numeric transfer function of the PSF scaled by `−ᾱ`, on the lag grid of
/// `field_grid` so that the resulting kernel can convolve fields on it.
pub fn transfer_function(alpha_bar: f64, psf: &PsfModel, field_grid: &SpatialGrid1D) -> LinearizedModel {
    let lag = field_grid.lag_grid();
    let g = psf.g_z_field(lag);
    let transfer = spectrum(&g).map(|v| -alpha_bar * v);
    LinearizedModel { alpha_bar, psf: *psf, transfer }
}

/// Position-space learning filter.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningKernel {
    pub kernel: RealField1D,
    pub gamma: f64,
    pub model_hash: String,
}

pub const DEFAULT_GAMMA_FRACTION: f64 = 1e-2;

pub fn default_gamma(model: &LinearizedModel) -> f64 {
    DEFAULT_GAMMA_FRACTION * model.max_gain_sqr()
}

/// Inverse transform of `G*/(γ + |G|²)`, trimmed symmetrically where the
/// kernel stays below `1e-8` of its peak.
pub fn design_kernel(model: &LinearizedModel, gamma: f64) -> Result<LearningKernel, IlcError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(IlcError::InvalidRegularization(gamma));
    }
    let filter = model.transfer.map(|g| g.conj() / (gamma + g.norm_sqr()));
    let raw = inverse_spectrum(&filter).re();
    let grid = *raw.grid();
    let values = raw.values();
    let n = values.len();
    let c = (n - 1) / 2;
    let peak = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let reach = (0..n).filter(|&i| values[i].abs() >= 1e-8 * peak).map(|i| i.abs_diff(c)).max().unwrap_or(0).max(1);
    // symmetrize: real even filter, remove round-off asymmetry
    let trimmed: Vec<f64> =
        (c - reach..=c + reach).map(|i| 0.5 * (values[i] + values[2 * c - i])).collect();
    let kgrid = SpatialGrid1D::with_spacing(grid.dz(), trimmed.len())?;
    Ok(LearningKernel { kernel: RealField1D::new(kgrid, trimmed)?, gamma, model_hash: model.hash() })
}

impl LearningKernel {
    /// `(z, L(z))` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("z,kernel\n");
        for (z, v) in self.kernel.grid().samples().iter().zip(self.kernel.values()) {
            out.push_str(&format!("{z},{v}\n"));
        }
        out
    }

    /// `L * e` on the grid of `e`.
    pub fn apply(&self, e: &RealField1D) -> Result<RealField1D, IlcError> {
        let conv = convolve(e, &self.kernel)?;
        Ok(conv.field)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateOutcome {
    pub nu: RealField1D,
    /// Columns where the update hit 0 or 1.
    pub clamped: usize,
}

/// `ν_j ← clamp(ν_j − (L * e)(z_j), 0, 1)` with the convolution on the fine
/// grid of `e` and linear sampling at the column centres of `ν`.
pub fn update(nu: &RealField1D, e: &RealField1D, kernel: &LearningKernel) -> Result<UpdateOutcome, IlcError> {
    let corr = kernel.apply(e)?;
    let fine = *corr.grid();
    let mut clamped = 0;
    let values = nu
        .grid()
        .samples()
        .iter()
        .zip(nu.values())
        .map(|(&z, &v)| {
            let raw = v - fine.interpolate(corr.values(), z);
            let c = raw.clamp(0.0, 1.0);
            if c != raw {
                clamped += 1;
            }
            c
        })
        .collect();
    Ok(UpdateOutcome { nu: RealField1D::new(*nu.grid(), values)?, clamped })
}

/// The linear surrogate plant `e = −ᾱ (g_z * (ν − ν_d))` on the field grid.
#[derive(Debug, Clone)]
pub struct LinearSurrogate {
    pub alpha_bar: f64,
    kernel: RealField1D,
    pub nu_desired: RealField1D,
}

impl LinearSurrogate {
    pub fn new(alpha_bar: f64, psf: &PsfModel, nu_desired: RealField1D) -> Self {
        let kernel = psf.g_z_field(nu_desired.grid().lag_grid()).map(|g| -alpha_bar * g);
        LinearSurrogate { alpha_bar, kernel, nu_desired }
    }

    pub fn error(&self, nu: &RealField1D) -> Result<RealField1D, IlcError> {
        let dnu = nu.zip_with(&self.nu_desired, |a, b| a - b)?;
        Ok(convolve(&dnu, &self.kernel)?.field)
    }
}

/// Magnitudes `|Σ f(z_i) e^{-jkz_i} Δz|` at arbitrary wavenumbers, so that
/// modes of a field can be compared with a transfer function tabulated on
/// another grid.
pub fn mode_magnitudes(f: &RealField1D, k: &[f64]) -> Vec<f64> {
    let grid = f.grid();
    let z = grid.samples();
    k.iter()
        .map(|&k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (&zi, &fi) in z.iter().zip(f.values()) {
                let (s, c) = (k * zi).sin_cos();
                re += fi * c;
                im -= fi * s;
            }
            grid.dz() * re.hypot(im)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn grid() -> SpatialGrid1D {
        SpatialGrid1D::new(200.0, 512).unwrap()
    }

    #[test]
    fn density_error_cases() {
        let g = grid();
        let rd = RealField1D::from_fn(g, |z| (-z * z / 100.0).exp());
        let zero = density_error(&rd, &rd).unwrap();
        assert!(zero.values().iter().all(|v| *v == 0.0));
        let four = density_error(&rd.map(|r| 4.0 * r), &rd).unwrap();
        for (a, b) in four.values().iter().zip(rd.values()) {
            assert!((a - b.sqrt()).abs() < 1e-15);
        }
        assert!(density_error(&rd.map(|r| r - 0.5), &rd).is_err());
    }

    #[test]
    fn transfer_matches_gaussian() {
        let psf = PsfModel::default();
        let m = transfer_function(1.7, &psf, &grid());
        for (k, g) in m.transfer.wavenumbers().iter().zip(m.transfer.values()) {
            let exact = 1.7 * (-k * k * 2.5 * 2.5 / 2.0).exp();
            assert!((g.norm() - exact).abs() < 1e-8);
            assert!(g.im.abs() < 1e-12);
        }
        assert!((m.transfer.values()[0].re + 1.7).abs() < 1e-10);
    }

    #[test]
    fn kernel_is_even_and_rejects_bad_gamma() {
        let m = transfer_function(1.1, &PsfModel::default(), &grid());
        let k = design_kernel(&m, default_gamma(&m)).unwrap();
        let v = k.kernel.values();
        let n = v.len();
        assert!(n % 2 == 1 && n < 2 * 512 - 1);
        for i in 0..n {
            assert!((v[i] - v[n - 1 - i]).abs() < 1e-10);
        }
        assert!(design_kernel(&m, 0.0).is_err());
        assert!(design_kernel(&m, -1.0).is_err());
        let csv = k.to_csv();
        assert_eq!(csv.lines().count(), n + 1);
    }

    #[test]
    fn small_gamma_inverts_constant_plant() {
        // G ≡ g0 realized by a delta-like PSF; the kernel collapses to (1/g0) δ
        let g = grid();
        let lag = g.lag_grid();
        let mut vals = vec![Complex64::new(0.0, 0.0); lag.len()];
        vals.iter_mut().for_each(|v| *v = Complex64::new(-2.0, 0.0));
        let model = LinearizedModel { alpha_bar: 2.0, psf: PsfModel::default(), transfer: Spectrum::new(lag, vals).unwrap() };
        let k = design_kernel(&model, 1e-12).unwrap();
        let c = (k.kernel.grid().len() - 1) / 2;
        let dz = g.dz();
        assert_eq!(k.kernel.grid().len(), 3);
        assert!((k.kernel.values()[c] * dz + 0.5).abs() < 1e-9);
        assert!(k.kernel.values()[0].abs() < 1e-9 && k.kernel.values()[2].abs() < 1e-9);
    }

    #[test]
    fn update_fixed_point_and_clamping() {
        let fine = grid();
        let cols = SpatialGrid1D::with_spacing(1.0, 150).unwrap();
        let m = transfer_function(1.0, &PsfModel::default(), &fine);
        let k = design_kernel(&m, default_gamma(&m)).unwrap();
        let nu = RealField1D::from_fn(cols, |z| 0.5 + 0.2 * (z / 20.0).sin());
        let out = update(&nu, &RealField1D::zeros(fine), &k).unwrap();
        assert_eq!(out.nu, nu);
        assert_eq!(out.clamped, 0);

        // large positive error pushes ν below zero near the spot
        let e = RealField1D::from_fn(fine, |z| 50.0 * (-(z - 10.0).powi(2) / 8.0).exp());
        let out = update(&nu, &e, &k).unwrap();
        assert!(out.clamped > 0);
        assert!(out.nu.values().iter().all(|v| (0.0..=1.0).contains(v)));
        let far = cols.len() - 1;
        let dmax = out.nu.values().iter().zip(nu.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!((out.nu.values()[far] - nu.values()[far]).abs() < 1e-4 * dmax);
    }

    #[test]
    fn gain_profile_support() {
        let g = grid();
        let p = CondensateParams::default();
        let vmag = RealField1D::from_fn(g, |z| 1e-3 * z * z);
        let vd = vmag.map(|v| v + 10.0);
        let gp = gain_profile(&vd, &vmag, 20.0, &p, 8.0, 1.0, 50.0, &GainCutoffs::default()).unwrap();
        let kappa = 1.0 / (3.0 * p.omega_perp * p.interaction_length()).sqrt();
        let i = g.len() / 2;
        let expect = kappa * 8.0 * (10.0 / (20.0 - vd.values()[i])).sqrt();
        assert!((gp.alpha.values()[i] - expect).abs() < 1e-12);
        assert!(gp.alpha_bar >= expect);
        assert!(gain_profile(&vmag, &vmag, 20.0, &p, 8.0, 1.0, 50.0, &GainCutoffs::default()).is_err());
    }
}
