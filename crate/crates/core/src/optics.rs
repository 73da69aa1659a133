//! Optical truth model: DMD reflectance, incident beam, point-spread
//! function, output field on the condensate line `y = 0`, dipole potential,
//! plus the fast separable path and the optical disturbances.
//!
//! Pixel geometry: row `i` of an `n_T × n_L` pattern is centred at
//! `y_i = (i - (n_T-1)/2) Δ` and column `j` at `z_j = (j - (n_L-1)/2) Δ`, so
//! both axes are symmetric about the optical axis.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::OpticsError;
use crate::field::{ComplexField1D, RealField1D, SpatialGrid1D};

/// Lower bound on the transmission `τ(z)`.
pub const TAU_FLOOR: f64 = 1e-3;

/// Gauss–Legendre nodes/weights on [-1, 1], 8 points.
const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// Sub-intervals per pixel for transversal quadrature.
const PIXEL_SUBDIVISIONS: usize = 4;

fn gauss_legendre(a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for &(x, w) in &GL8 {
            sum += w * f(mid + 0.5 * h * x);
        }
    }
    0.5 * h * sum
}

/// Pixel centre for index `i` of `count` pixels at `pitch`, symmetric about 0.
#[inline]
pub fn pixel_center(i: usize, count: usize, pitch: f64) -> f64 {
    (i as f64 - 0.5 * (count as f64 - 1.0)) * pitch
}

/// Incident beam `E_in(y, z) = |E_in| exp(-y²/σ_y²) exp(-z²/σ_z²)`.
///
/// `sigma_z = ∞` gives a longitudinally flat beam (`p_z ≡ 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamProfile {
    pub amplitude: f64,
    pub sigma_y: f64,
    pub sigma_z: f64,
}

impl Default for BeamProfile {
    fn default() -> Self {
        BeamProfile { amplitude: 1.0, sigma_y: 13.0, sigma_z: 125.0 }
    }
}

impl BeamProfile {
    pub fn validate(&self) -> Result<(), OpticsError> {
        for (name, v) in [("amplitude", self.amplitude), ("sigma_y", self.sigma_y), ("sigma_z", self.sigma_z)] {
            if v.is_nan() || v <= 0.0 {
                return Err(OpticsError::InvalidParameter(format!("beam {name} must be positive, got {v}")));
            }
        }
        if !self.amplitude.is_finite() || !self.sigma_y.is_finite() {
            return Err(OpticsError::InvalidParameter("beam amplitude and sigma_y must be finite".into()));
        }
        Ok(())
    }

    pub fn p_y(&self, y: f64) -> f64 {
        (-(y * y) / (self.sigma_y * self.sigma_y)).exp()
    }

    pub fn p_z(&self, z: f64) -> f64 {
        if self.sigma_z.is_infinite() {
            1.0
        } else {
            (-(z * z) / (self.sigma_z * self.sigma_z)).exp()
        }
    }

    pub fn with_amplitude(self, amplitude: f64) -> Self {
        BeamProfile { amplitude, ..self }
    }
}

/// Separable point-spread function `g(y, z) = g_y(y) g_z(z)`.
///
/// `g_z` is a unit-mass Gaussian of standard deviation `sigma_z`. `g_y` is the
/// field response of a rectangular Fourier-plane aperture: a sinc with first
/// zero at `transversal_width`, truncated at its `transversal_zeros`-th zero
/// and normalized to unit mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PsfSpec", into = "PsfSpec")]
pub struct PsfModel {
    sigma_z: f64,
    transversal_width: f64,
    transversal_zeros: u32,
    transversal_norm: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct PsfSpec {
    sigma_z: f64,
    transversal_width: f64,
    transversal_zeros: u32,
}

impl TryFrom<PsfSpec> for PsfModel {
    type Error = OpticsError;
    fn try_from(s: PsfSpec) -> Result<Self, Self::Error> {
        PsfModel::new(s.sigma_z, s.transversal_width, s.transversal_zeros)
    }
}

impl From<PsfModel> for PsfSpec {
    fn from(p: PsfModel) -> Self {
        PsfSpec {
            sigma_z: p.sigma_z,
            transversal_width: p.transversal_width,
            transversal_zeros: p.transversal_zeros,
        }
    }
}

impl Default for PsfModel {
    fn default() -> Self {
        PsfModel::new(2.5, 8.0, 6).expect("default psf is valid")
    }
}

fn sinc_pi(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - (PI * x).powi(2) / 6.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

impl PsfModel {
    pub fn new(sigma_z: f64, transversal_width: f64, transversal_zeros: u32) -> Result<Self, OpticsError> {
        if !(sigma_z.is_finite() && sigma_z > 0.0) {
            return Err(OpticsError::InvalidParameter(format!("sigma_z must be positive, got {sigma_z}")));
        }
        if !(transversal_width.is_finite() && transversal_width > 0.0) {
            return Err(OpticsError::InvalidParameter(format!(
                "transversal width must be positive, got {transversal_width}"
            )));
        }
        if transversal_zeros == 0 {
            return Err(OpticsError::InvalidParameter("transversal kernel needs at least one lobe".into()));
        }
        // ∫ sinc over [-Z w, Z w], one Gauss-Legendre panel per half-lobe
        let half = transversal_zeros as f64 * transversal_width;
        let mass = gauss_legendre(-half, half, 4 * transversal_zeros as usize, |y| {
            sinc_pi(y / transversal_width)
        });
        Ok(PsfModel { sigma_z, transversal_width, transversal_zeros, transversal_norm: 1.0 / mass })
    }

    pub fn sigma_z(&self) -> f64 {
        self.sigma_z
    }

    pub fn transversal_width(&self) -> f64 {
        self.transversal_width
    }

    pub fn transversal_zeros(&self) -> u32 {
        self.transversal_zeros
    }

    /// Half-width of the transversal kernel support.
    pub fn transversal_support(&self) -> f64 {
        self.transversal_zeros as f64 * self.transversal_width
    }

    pub fn g_z(&self, z: f64) -> f64 {
        let s = self.sigma_z;
        (-(z * z) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt())
    }

    pub fn g_y(&self, y: f64) -> f64 {
        if y.abs() > self.transversal_support() {
            0.0
        } else {
            self.transversal_norm * sinc_pi(y / self.transversal_width)
        }
    }

    /// `g_z` sampled on `grid`.
    pub fn g_z_field(&self, grid: SpatialGrid1D) -> RealField1D {
        RealField1D::from_fn(grid, |z| self.g_z(z))
    }
}

/// `∫_{pixel} g_y(y - ξ) p_y(ξ) dξ` for the pixel centred at `center`.
pub fn transversal_pixel_response(psf: &PsfModel, beam: &BeamProfile, center: f64, pitch: f64, y: f64) -> f64 {
    let (a, b) = (center - 0.5 * pitch, center + 0.5 * pitch);
    // split at the kernel's truncation points so each panel is smooth
    let s = psf.transversal_support();
    let mut cuts = vec![a, b];
    for c in [y - s, y + s, y] {
        if c > a && c < b {
            cuts.push(c);
        }
    }
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    cuts.windows(2)
        .map(|w| gauss_legendre(w[0], w[1], PIXEL_SUBDIVISIONS, |xi| psf.g_y(y - xi) * beam.p_y(xi)))
        .sum()
}

/// `∫_{pixel} g_z(z - η) p_z(η) dη` for the column centred at `center`,
/// in closed form via the error function.
pub fn longitudinal_pixel_response(psf: &PsfModel, beam: &BeamProfile, center: f64, pitch: f64, z: f64) -> f64 {
    let s2 = psf.sigma_z * psf.sigma_z;
    let inv_in = if beam.sigma_z.is_infinite() { 0.0 } else { 1.0 / (beam.sigma_z * beam.sigma_z) };
    let a = 0.5 / s2 + inv_in;
    let eta0 = z / (2.0 * s2 * a);
    let envelope = if inv_in == 0.0 { 1.0 } else { (-(z * z) / (beam.sigma_z * beam.sigma_z + 2.0 * s2)).exp() };
    let ra = a.sqrt();
    let lo = ra * (center - 0.5 * pitch - eta0);
    let hi = ra * (center + 0.5 * pitch - eta0);
    let diff = if lo > 0.0 {
        libm::erfc(lo) - libm::erfc(hi)
    } else if hi < 0.0 {
        libm::erfc(-hi) - libm::erfc(-lo)
    } else {
        libm::erf(hi) - libm::erf(lo)
    };
    envelope / (psf.sigma_z * (2.0 * PI).sqrt()) * 0.5 * (PI / a).sqrt() * diff
}

/// Binary mirror states: `n_t` transversal rows (y) by `n_l` longitudinal
/// columns (z), stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DmdPattern {
    n_t: usize,
    n_l: usize,
    bits: Vec<bool>,
}

impl DmdPattern {
    pub fn zeros(n_t: usize, n_l: usize) -> Self {
        assert!(n_t >= 1 && n_l >= 1, "pattern needs at least one pixel");
        DmdPattern { n_t, n_l, bits: vec![false; n_t * n_l] }
    }

    pub fn ones(n_t: usize, n_l: usize) -> Self {
        assert!(n_t >= 1 && n_l >= 1, "pattern needs at least one pixel");
        DmdPattern { n_t, n_l, bits: vec![true; n_t * n_l] }
    }

    pub fn from_bits(n_t: usize, n_l: usize, bits: Vec<bool>) -> Result<Self, OpticsError> {
        if n_t == 0 || n_l == 0 || bits.len() != n_t * n_l {
            return Err(OpticsError::InvalidParameter(format!(
                "pattern of {n_t}x{n_l} needs {} bits, got {}",
                n_t * n_l,
                bits.len()
            )));
        }
        Ok(DmdPattern { n_t, n_l, bits })
    }

    /// Assemble from transversal columns, each of length `n_t`.
    pub fn from_columns(columns: &[&[bool]]) -> Result<Self, OpticsError> {
        let n_l = columns.len();
        let n_t = columns.first().map_or(0, |c| c.len());
        if n_t == 0 || columns.iter().any(|c| c.len() != n_t) {
            return Err(OpticsError::InvalidParameter("columns must be non-empty and equally long".into()));
        }
        let mut p = DmdPattern::zeros(n_t, n_l);
        for (j, col) in columns.iter().enumerate() {
            for (i, &b) in col.iter().enumerate() {
                p.set(i, j, b);
            }
        }
        Ok(p)
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_l(&self) -> usize {
        self.n_l
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.n_l + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        self.bits[row * self.n_l + col] = on;
    }

    pub fn column(&self, col: usize) -> Vec<bool> {
        (0..self.n_t).map(|i| self.get(i, col)).collect()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_on(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Plain portable bitmap (`P1`), one line per transversal row. Dark
    /// mirrors (0) are written as 1 ("black"), matching the PBM convention.
    pub fn to_pbm(&self) -> String {
        let mut out = format!("P1\n{} {}\n", self.n_l, self.n_t);
        for i in 0..self.n_t {
            let row: Vec<&str> = (0..self.n_l).map(|j| if self.get(i, j) { "0" } else { "1" }).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Pixel layout of the DMD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmdGeometry {
    pub n_t: usize,
    pub n_l: usize,
    pub pitch: f64,
}

impl Default for DmdGeometry {
    fn default() -> Self {
        DmdGeometry { n_t: 100, n_l: 400, pitch: 1.0 }
    }
}

impl DmdGeometry {
    pub fn validate(&self) -> Result<(), OpticsError> {
        if self.n_t == 0 || self.n_l < 2 || !(self.pitch.is_finite() && self.pitch > 0.0) {
            return Err(OpticsError::InvalidParameter(format!("invalid DMD geometry {self:?}")));
        }
        Ok(())
    }

    /// Grid of longitudinal column centres.
    pub fn column_grid(&self) -> SpatialGrid1D {
        SpatialGrid1D::with_spacing(self.pitch, self.n_l).expect("validated geometry")
    }

    pub fn row_center(&self, i: usize) -> f64 {
        pixel_center(i, self.n_t, self.pitch)
    }

    pub fn column_center(&self, j: usize) -> f64 {
        pixel_center(j, self.n_l, self.pitch)
    }
}

/// Dark spots on the output optics: `τ(z) = 1 - Σ a_k exp(-(z-z_k)²/w_k²)`,
/// floored at [`TAU_FLOOR`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransmissionDisturbance {
    pub spots: Vec<DarkSpot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DarkSpot {
    pub center: f64,
    pub width: f64,
    pub depth: f64,
}

impl TransmissionDisturbance {
    pub fn none() -> Self {
        TransmissionDisturbance { spots: Vec::new() }
    }

    pub fn validate(&self) -> Result<(), OpticsError> {
        for s in &self.spots {
            if !(s.width.is_finite() && s.width > 0.0) || !(s.depth > 0.0 && s.depth <= 1.0) || !s.center.is_finite() {
                return Err(OpticsError::InvalidParameter(format!("invalid dark spot {s:?}")));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.spots.is_empty()
    }

    pub fn tau(&self, z: f64) -> f64 {
        let dip: f64 = self
            .spots
            .iter()
            .map(|s| s.depth * (-((z - s.center) / s.width).powi(2)).exp())
            .sum();
        (1.0 - dip).max(TAU_FLOOR)
    }

    pub fn union(&self, other: &TransmissionDisturbance) -> TransmissionDisturbance {
        let mut spots = self.spots.clone();
        spots.extend_from_slice(&other.spots);
        TransmissionDisturbance { spots }
    }
}

/// Longitudinal magnetic trap with a sinusoidal ripple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagneticPotentialSpec {
    pub omega_par: f64,
    pub ripple_amplitude: f64,
    pub ripple_wavelength: f64,
    pub ripple_phase: f64,
}

impl Default for MagneticPotentialSpec {
    fn default() -> Self {
        MagneticPotentialSpec {
            omega_par: 2.0 * PI * 0.007,
            // 0.05 V_max for the default double well
            ripple_amplitude: 0.05 * 2.0 * PI * 8.0,
            ripple_wavelength: 10.0,
            ripple_phase: 0.0,
        }
    }
}

impl MagneticPotentialSpec {
    pub fn validate(&self) -> Result<(), OpticsError> {
        if !(self.omega_par > 0.0 && self.omega_par.is_finite()) {
            return Err(OpticsError::InvalidParameter(format!("omega_par must be positive, got {}", self.omega_par)));
        }
        if !(self.ripple_wavelength > 0.0 && self.ripple_wavelength.is_finite()) {
            return Err(OpticsError::InvalidParameter(format!(
                "ripple wavelength must be positive, got {}",
                self.ripple_wavelength
            )));
        }
        if !self.ripple_amplitude.is_finite() || !self.ripple_phase.is_finite() {
            return Err(OpticsError::InvalidParameter("ripple amplitude and phase must be finite".into()));
        }
        Ok(())
    }

    pub fn eval(&self, mass: f64, z: f64) -> f64 {
        0.5 * mass * self.omega_par * self.omega_par * z * z
            + self.ripple_amplitude * (2.0 * PI * z / self.ripple_wavelength + self.ripple_phase).sin()
    }
}

/// `V_mag(z) = (m ω∥²/2) z² + A sin(2π z/λ + φ)`.
pub fn magnetic_potential(spec: &MagneticPotentialSpec, mass: f64, grid: SpatialGrid1D) -> RealField1D {
    RealField1D::from_fn(grid, |z| spec.eval(mass, z))
}

/// `V_opt(z) = α_V |τ(z) E_out(0, z)|²`.
pub fn potential_from_field(
    e_out: &ComplexField1D,
    alpha_v: f64,
    tau: Option<&TransmissionDisturbance>,
) -> Result<RealField1D, OpticsError> {
    if !(alpha_v > 0.0 && alpha_v.is_finite()) {
        return Err(OpticsError::InvalidParameter(format!("alpha_V must be positive, got {alpha_v}")));
    }
    if let Some(t) = tau {
        t.validate()?;
    }
    let grid = *e_out.grid();
    let values = e_out
        .values()
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let t = tau.map_or(1.0, |t| t.tau(grid.z(i)));
            alpha_v * (e * t).norm_sqr()
        })
        .collect();
    Ok(RealField1D::new(grid, values)?)
}

/// Precomputed optical chain for one DMD geometry, beam, PSF and output grid.
///
/// Holds the per-row transversal weights at `y = 0` and the per-column
/// longitudinal responses on the output grid. Both propagation paths reuse
/// them, so building one `OpticalSystem` per scenario keeps the closed loop
/// cheap.
#[derive(Debug, Clone)]
pub struct OpticalSystem {
    geometry: DmdGeometry,
    beam: BeamProfile,
    psf: PsfModel,
    grid: SpatialGrid1D,
    row_weights: Vec<f64>,
    // column-major: columns[j][i_z]
    columns: Vec<Vec<f64>>,
}

impl OpticalSystem {
    pub fn new(
        geometry: DmdGeometry,
        beam: BeamProfile,
        psf: PsfModel,
        grid: SpatialGrid1D,
    ) -> Result<Self, OpticsError> {
        geometry.validate()?;
        beam.validate()?;
        let row_weights = (0..geometry.n_t)
            .map(|i| transversal_pixel_response(&psf, &beam, geometry.row_center(i), geometry.pitch, 0.0))
            .collect();
        let columns = (0..geometry.n_l)
            .into_par_iter()
            .map(|j| {
                let c = geometry.column_center(j);
                (0..grid.len())
                    .map(|i| longitudinal_pixel_response(&psf, &beam, c, geometry.pitch, grid.z(i)))
                    .collect()
            })
            .collect();
        Ok(OpticalSystem { geometry, beam, psf, grid, row_weights, columns })
    }

    /// Same system with a different incident amplitude; the tabulated
    /// responses do not depend on it.
    pub fn with_amplitude(mut self, amplitude: f64) -> Result<Self, OpticsError> {
        self.beam = self.beam.with_amplitude(amplitude);
        self.beam.validate()?;
        Ok(self)
    }

    pub fn geometry(&self) -> &DmdGeometry {
        &self.geometry
    }

    pub fn beam(&self) -> &BeamProfile {
        &self.beam
    }

    pub fn psf(&self) -> &PsfModel {
        &self.psf
    }

    pub fn grid(&self) -> SpatialGrid1D {
        self.grid
    }

    /// `E⊥_max`: transversal field at `y = 0` for an all-on column.
    pub fn e_perp_max(&self) -> f64 {
        self.beam.amplitude * self.row_weights.iter().sum::<f64>()
    }

    /// Beam amplitude that makes a fully-on, flat-beam DMD produce
    /// `α_V E⊥_max² = target_potential`.
    pub fn calibrated_amplitude(&self, target_potential: f64, alpha_v: f64) -> f64 {
        (target_potential / alpha_v).sqrt() / self.row_weights.iter().sum::<f64>()
    }

    /// Normalized achieved field `Ẽ⊥(0)` of every column of `pattern`.
    pub fn column_values(&self, pattern: &DmdPattern) -> Result<Vec<f64>, OpticsError> {
        self.check_pattern(pattern)?;
        let total: f64 = self.row_weights.iter().sum();
        Ok((0..pattern.n_l())
            .map(|j| {
                (0..pattern.n_t())
                    .filter(|&i| pattern.get(i, j))
                    .map(|i| self.row_weights[i])
                    .sum::<f64>()
                    / total
            })
            .collect())
    }

    fn check_pattern(&self, pattern: &DmdPattern) -> Result<(), OpticsError> {
        if pattern.n_l() != self.geometry.n_l {
            return Err(OpticsError::ColumnMismatch { expected: self.geometry.n_l, got: pattern.n_l() });
        }
        if pattern.n_t() != self.geometry.n_t {
            return Err(OpticsError::InvalidParameter(format!(
                "pattern has {} rows, DMD has {}",
                pattern.n_t(),
                self.geometry.n_t
            )));
        }
        Ok(())
    }

    /// Output field `E_out(0, z)` by direct summation over every on-pixel of
    /// the product of its transversal and longitudinal pixel integrals.
    pub fn propagate_full(&self, pattern: &DmdPattern) -> Result<ComplexField1D, OpticsError> {
        self.check_pattern(pattern)?;
        let on: Vec<(usize, usize)> = (0..pattern.n_l())
            .flat_map(|j| (0..pattern.n_t()).map(move |i| (i, j)))
            .filter(|&(i, j)| pattern.get(i, j))
            .collect();
        let values: Vec<Complex64> = (0..self.grid.len())
            .into_par_iter()
            .map(|iz| {
                let mut acc = 0.0;
                for &(i, j) in &on {
                    acc += self.row_weights[i] * self.columns[j][iz];
                }
                Complex64::new(self.beam.amplitude * acc, 0.0)
            })
            .collect();
        Ok(ComplexField1D::new(self.grid, values)?)
    }

    /// Longitudinal field `E⊥_max ∫ g_z(z-η) p_z(η) ν(η) dη` for a
    /// piecewise-constant virtual input.
    pub fn separable_field(&self, nu: &RealField1D) -> Result<RealField1D, OpticsError> {
        if nu.grid().len() != self.geometry.n_l {
            return Err(OpticsError::ColumnMismatch { expected: self.geometry.n_l, got: nu.grid().len() });
        }
        for (j, &v) in nu.values().iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(OpticsError::InputOutOfRange { column: j, value: v });
            }
        }
        let e_max = self.e_perp_max();
        let values = (0..self.grid.len())
            .into_par_iter()
            .map(|iz| {
                let mut acc = 0.0;
                for (j, &v) in nu.values().iter().enumerate() {
                    acc += v * self.columns[j][iz];
                }
                e_max * acc
            })
            .collect();
        Ok(RealField1D::new(self.grid, values)?)
    }

    /// `V_opt = α_V [E⊥_max ∫ g_z(z-η) p_z(η) ν(η) dη]²`.
    pub fn propagate_separable(&self, nu: &RealField1D, alpha_v: f64) -> Result<RealField1D, OpticsError> {
        if !(alpha_v > 0.0 && alpha_v.is_finite()) {
            return Err(OpticsError::InvalidParameter(format!("alpha_V must be positive, got {alpha_v}")));
        }
        Ok(self.separable_field(nu)?.map(|e| alpha_v * e * e))
    }
}

/// One-shot full propagation; builds an [`OpticalSystem`] internally.
pub fn propagate_full(
    pattern: &DmdPattern,
    pitch: f64,
    beam: &BeamProfile,
    psf: &PsfModel,
    grid: SpatialGrid1D,
) -> Result<ComplexField1D, OpticsError> {
    let geometry = DmdGeometry { n_t: pattern.n_t(), n_l: pattern.n_l(), pitch };
    OpticalSystem::new(geometry, *beam, *psf, grid)?.propagate_full(pattern)
}

/// One-shot separable propagation; `nu` lives on the DMD column grid.
pub fn propagate_separable(
    nu: &RealField1D,
    geometry: DmdGeometry,
    beam: &BeamProfile,
    psf: &PsfModel,
    alpha_v: f64,
    grid: SpatialGrid1D,
) -> Result<RealField1D, OpticsError> {
    OpticalSystem::new(geometry, *beam, *psf, grid)?.propagate_separable(nu, alpha_v)
}
