//! Uniform 1D grids, real/complex sampled fields, quadrature and the
//! continuous-convention Fourier transform used throughout the crate.
//!
//! Units: lengths in µm, times in ms, energies as angular frequencies in
//! rad/ms (ħ = 1). Every public interface in the crate uses this system.
//!
//! Spectra follow `F(k) = ∫ f(z) e^{-jkz} dz` with the inverse carrying the
//! `1/(2π)` factor. Wavenumbers are stored in FFT order (non-negative first,
//! then negative).

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::FieldError;

/// Kernels whose edge magnitude exceeds this fraction of the peak are flagged
/// as truncated by [`convolve`].
pub const KERNEL_EDGE_TOLERANCE: f64 = 1e-8;

/// Uniform grid on `[-L/2, L/2]` with `n_points` samples (endpoints included).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct SpatialGrid1D {
    length: f64,
    n_points: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct GridSpec {
    length: f64,
    n_points: usize,
}

impl TryFrom<GridSpec> for SpatialGrid1D {
    type Error = FieldError;
    fn try_from(spec: GridSpec) -> Result<Self, Self::Error> {
        SpatialGrid1D::new(spec.length, spec.n_points)
    }
}

impl From<SpatialGrid1D> for GridSpec {
    fn from(grid: SpatialGrid1D) -> Self {
        GridSpec { length: grid.length, n_points: grid.n_points }
    }
}

impl Default for SpatialGrid1D {
    fn default() -> Self {
        SpatialGrid1D { length: 400.0, n_points: 1024 }
    }
}

impl SpatialGrid1D {
    pub fn new(length: f64, n_points: usize) -> Result<Self, FieldError> {
        if !(length.is_finite() && length > 0.0) {
            return Err(FieldError::InvalidGrid(format!("length must be positive, got {length}")));
        }
        if n_points < 2 {
            return Err(FieldError::InvalidGrid(format!("need at least 2 points, got {n_points}")));
        }
        Ok(SpatialGrid1D { length, n_points })
    }

    /// Grid with spacing `dz` and `n_points` samples centred on zero.
    pub fn with_spacing(dz: f64, n_points: usize) -> Result<Self, FieldError> {
        if n_points < 2 {
            return Err(FieldError::InvalidGrid(format!("need at least 2 points, got {n_points}")));
        }
        Self::new(dz * (n_points - 1) as f64, n_points)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dz(&self) -> f64 {
        self.length / (self.n_points - 1) as f64
    }

    pub fn start(&self) -> f64 {
        -0.5 * self.length
    }

    #[inline]
    pub fn z(&self, i: usize) -> f64 {
        // symmetric construction keeps z(i) = -z(n-1-i) bit-exactly
        let half = 0.5 * (self.n_points - 1) as f64;
        (i as f64 - half) * self.dz()
    }

    pub fn samples(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.z(i)).collect()
    }

    /// Grid of all lags `z_i - z_j` between samples of `self`: same spacing,
    /// `2n - 1` points, twice the length. Convolution kernels live here.
    pub fn lag_grid(&self) -> SpatialGrid1D {
        SpatialGrid1D { length: 2.0 * self.length, n_points: 2 * self.n_points - 1 }
    }

    /// Wavenumbers in FFT order for a transform over this grid.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points;
        let dk = 2.0 * PI / (n as f64 * self.dz());
        (0..n)
            .map(|m| if m <= n / 2 { m as f64 * dk } else { (m as f64 - n as f64) * dk })
            .collect()
    }

    /// Linear interpolation of `values` (sampled on this grid) at `z`; zero
    /// outside the domain.
    pub fn interpolate(&self, values: &[f64], z: f64) -> f64 {
        let x = (z - self.start()) / self.dz();
        if x < 0.0 || x > (self.n_points - 1) as f64 {
            return 0.0;
        }
        let i = (x.floor() as usize).min(self.n_points - 2);
        let t = x - i as f64;
        values[i] * (1.0 - t) + values[i + 1] * t
    }

    pub fn same_spacing(&self, other: &SpatialGrid1D) -> bool {
        ((self.dz() - other.dz()) / self.dz()).abs() < 1e-12
    }
}

/// Real samples on a grid. Houses potentials (rad/ms), densities (1/µm),
/// virtual inputs and density errors.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField1D {
    grid: SpatialGrid1D,
    values: Vec<f64>,
}

impl RealField1D {
    pub fn new(grid: SpatialGrid1D, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite { index: i });
        }
        Ok(RealField1D { grid, values })
    }

    pub fn zeros(grid: SpatialGrid1D) -> Self {
        RealField1D { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: SpatialGrid1D, c: f64) -> Self {
        RealField1D { grid, values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: SpatialGrid1D, f: impl Fn(f64) -> f64) -> Self {
        RealField1D { grid, values: grid.samples().into_iter().map(f).collect() }
    }

    pub fn grid(&self) -> &SpatialGrid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RealField1D {
        RealField1D { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(
        &self,
        other: &RealField1D,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<RealField1D, FieldError> {
        check_same_grid(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(RealField1D { grid: self.grid, values })
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// L² norm `sqrt(∫ f² dz)` with trapezoidal quadrature.
    pub fn l2_norm(&self) -> f64 {
        integrate_slice(&self.grid, self.values.iter().map(|v| v * v)).sqrt()
    }

    pub fn to_complex(&self) -> ComplexField1D {
        ComplexField1D {
            grid: self.grid,
            values: self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField1D {
    grid: SpatialGrid1D,
    values: Vec<Complex64>,
}

impl ComplexField1D {
    pub fn new(grid: SpatialGrid1D, values: Vec<Complex64>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(FieldError::NonFinite { index: i });
        }
        Ok(ComplexField1D { grid, values })
    }

    pub fn grid(&self) -> &SpatialGrid1D {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// `|f|²` as a real field.
    pub fn norm_sqr(&self) -> RealField1D {
        RealField1D { grid: self.grid, values: self.values.iter().map(|v| v.norm_sqr()).collect() }
    }

    pub fn re(&self) -> RealField1D {
        RealField1D { grid: self.grid, values: self.values.iter().map(|v| v.re).collect() }
    }
}

fn check_same_grid(a: &SpatialGrid1D, b: &SpatialGrid1D) -> Result<(), FieldError> {
    if a.len() != b.len() || !a.same_spacing(b) {
        return Err(FieldError::GridMismatch);
    }
    Ok(())
}

fn integrate_slice(grid: &SpatialGrid1D, values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    let mut sum = 0.0;
    for (i, v) in values.enumerate() {
        sum += if i == 0 || i + 1 == n { 0.5 * v } else { v };
    }
    sum * grid.dz()
}

/// Trapezoidal quadrature of `f` over the grid domain.
pub fn integrate(f: &RealField1D) -> Result<f64, FieldError> {
    if let Some(i) = f.values.iter().position(|v| !v.is_finite()) {
        return Err(FieldError::NonFinite { index: i });
    }
    Ok(integrate_slice(&f.grid, f.values.iter().copied()))
}

/// Sampled spectrum `F(k_m)` of a field, tied to the grid it came from so
/// that the inverse transform can restore positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: SpatialGrid1D,
    values: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(grid: SpatialGrid1D, values: Vec<Complex64>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(Spectrum { grid, values })
    }

    /// Tabulate an analytic spectrum at the grid's wavenumbers.
    pub fn from_fn(grid: SpatialGrid1D, f: impl Fn(f64) -> Complex64) -> Self {
        Spectrum { grid, values: grid.wavenumbers().into_iter().map(f).collect() }
    }

    pub fn grid(&self) -> &SpatialGrid1D {
        &self.grid
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        self.grid.wavenumbers()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Spectrum {
        Spectrum { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn max_norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max)
    }
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if forward {
        planner.plan_fft_forward(n)
    } else {
        planner.plan_fft_inverse(n)
    }
}

/// Continuous-convention spectrum of a complex field.
pub fn spectrum_complex(f: &ComplexField1D) -> Spectrum {
    let grid = f.grid;
    let mut buf = f.values.clone();
    plan(grid.len(), true).process(&mut buf);
    let dz = grid.dz();
    let z0 = grid.start();
    for (v, k) in buf.iter_mut().zip(grid.wavenumbers()) {
        // sample i sits at z0 + i dz
        *v *= Complex64::from_polar(dz, -k * z0);
    }
    Spectrum { grid, values: buf }
}

/// Continuous-convention spectrum `∫ f(z) e^{-jkz} dz` of a real field.
pub fn spectrum(f: &RealField1D) -> Spectrum {
    spectrum_complex(&f.to_complex())
}

/// Inverse of [`spectrum_complex`]: `(1/2π) ∫ F(k) e^{jkz} dk`.
pub fn inverse_spectrum(s: &Spectrum) -> ComplexField1D {
    let grid = s.grid;
    let z0 = grid.start();
    let mut buf: Vec<Complex64> = s
        .values
        .iter()
        .zip(grid.wavenumbers())
        .map(|(&v, k)| v * Complex64::from_polar(1.0, k * z0))
        .collect();
    plan(grid.len(), false).process(&mut buf);
    let scale = 1.0 / (grid.len() as f64 * grid.dz());
    for v in buf.iter_mut() {
        *v *= scale;
    }
    ComplexField1D { grid, values: buf }
}

/// Result of a linear convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Convolution {
    pub field: RealField1D,
    /// The kernel did not decay below [`KERNEL_EDGE_TOLERANCE`] of its peak
    /// at the edges of its grid, so the result is affected by truncation.
    pub kernel_truncated: bool,
}

/// Whether `kernel` has decayed below `KERNEL_EDGE_TOLERANCE` of its peak at
/// both ends of its grid.
pub fn kernel_decayed(kernel: &RealField1D) -> bool {
    let peak = kernel.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let n = kernel.values.len();
    peak == 0.0
        || (kernel.values[0].abs() <= KERNEL_EDGE_TOLERANCE * peak
            && kernel.values[n - 1].abs() <= KERNEL_EDGE_TOLERANCE * peak)
}

/// Zero-padded linear convolution `(f * K)(z_i) = dz Σ_j f(z_j) K(z_i - z_j)`
/// evaluated on the grid of `f`.
///
/// The kernel must share the spacing of `f` and have an odd number of points
/// so that its centre sample sits at lag zero (see
/// [`SpatialGrid1D::lag_grid`]). Lags outside the kernel grid contribute zero.
pub fn convolve(f: &RealField1D, kernel: &RealField1D) -> Result<Convolution, FieldError> {
    let fg = f.grid;
    let kg = kernel.grid;
    if !fg.same_spacing(&kg) {
        return Err(FieldError::GridMismatch);
    }
    if kg.len() % 2 == 0 {
        return Err(FieldError::InvalidGrid(
            "convolution kernel needs an odd point count centred on zero".into(),
        ));
    }
    let n = fg.len();
    let nk = kg.len();
    let half = (nk - 1) / 2;
    let size = (n + nk - 1).next_power_of_two();

    let mut a = vec![Complex64::new(0.0, 0.0); size];
    let mut b = vec![Complex64::new(0.0, 0.0); size];
    for (dst, &v) in a.iter_mut().zip(&f.values) {
        dst.re = v;
    }
    for (dst, &v) in b.iter_mut().zip(&kernel.values) {
        dst.re = v;
    }
    plan(size, true).process(&mut a);
    plan(size, true).process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    plan(size, false).process(&mut a);

    // full linear convolution index i + half corresponds to output sample i
    let scale = fg.dz() / size as f64;
    let values = (0..n).map(|i| a[i + half].re * scale).collect();
    Ok(Convolution {
        field: RealField1D { grid: fg, values },
        kernel_truncated: !kernel_decayed(kernel),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(sigma: f64) -> impl Fn(f64) -> f64 {
        move |z| (-z * z / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt())
    }

    #[test]
    fn grid_is_symmetric_and_uniform() {
        let g = SpatialGrid1D::default();
        assert_eq!(g.z(0), -200.0);
        assert_eq!(g.z(1023), 200.0);
        for i in 0..g.len() {
            assert_eq!(g.z(i), -g.z(g.len() - 1 - i));
        }
        for i in 1..g.len() {
            let d = g.z(i) - g.z(i - 1);
            assert!(((d - g.dz()) / g.dz()).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(SpatialGrid1D::new(0.0, 10).is_err());
        assert!(SpatialGrid1D::new(10.0, 1).is_err());
        assert!(SpatialGrid1D::new(f64::NAN, 10).is_err());
    }

    #[test]
    fn integrate_constant() {
        let g = SpatialGrid1D::new(400.0, 1024).unwrap();
        let f = RealField1D::constant(g, 1.0);
        assert!((integrate(&f).unwrap() - 400.0).abs() < 1e-10);
    }

    #[test]
    fn integrate_odd_function_vanishes() {
        let g = SpatialGrid1D::new(400.0, 1024).unwrap();
        let f = RealField1D::from_fn(g, |z| z);
        assert!(integrate(&f).unwrap().abs() <= 1e-12 * 400.0 * 200.0);
    }

    #[test]
    fn integrate_gaussian_matches_closed_form() {
        let sigma = 2.5;
        let g = SpatialGrid1D::new(400.0, 1024).unwrap();
        let f = RealField1D::from_fn(g, |z| (-z * z / (sigma * sigma)).exp());
        let exact = sigma * PI.sqrt();
        // independent oracle: composite Simpson on a 20x finer grid
        let fine = SpatialGrid1D::new(400.0, 20481).unwrap();
        let h = fine.dz();
        let simpson: f64 = (0..fine.len())
            .map(|i| {
                let w = if i == 0 || i == fine.len() - 1 { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                w * (-fine.z(i).powi(2) / (sigma * sigma)).exp()
            })
            .sum::<f64>()
            * h
            / 3.0;
        assert!(((simpson - exact) / exact).abs() < 1e-12);
        let got = integrate(&f).unwrap();
        assert!(((got - exact) / exact).abs() < 1e-8);
    }

    #[test]
    fn integrate_rejects_non_finite() {
        let g = SpatialGrid1D::new(1.0, 3).unwrap();
        let f = RealField1D { grid: g, values: vec![0.0, f64::NAN, 0.0] };
        assert!(integrate(&f).is_err());
        assert!(RealField1D::new(g, vec![0.0, f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn delta_has_flat_spectrum() {
        let g = SpatialGrid1D::new(100.0, 201).unwrap();
        let mut v = vec![0.0; 201];
        v[100] = 1.0 / g.dz();
        let s = spectrum(&RealField1D::new(g, v).unwrap());
        for x in s.values() {
            assert!((x - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn spectrum_round_trip() {
        let g = SpatialGrid1D::new(50.0, 300).unwrap();
        let f = RealField1D::from_fn(g, |z| (0.3 * z).sin() * (-z * z / 40.0).exp() + 0.1);
        let back = inverse_spectrum(&spectrum(&f));
        let scale = f.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!((a - b.re).abs() < 1e-10 * scale);
            assert!(b.im.abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn gaussian_spectrum_matches_analytic_pair() {
        let sigma = 2.5;
        let g = SpatialGrid1D::new(400.0, 1024).unwrap();
        let f = RealField1D::from_fn(g, gaussian(sigma));
        let s = spectrum(&f);
        let ks = g.wavenumbers();
        // direct summation oracle for a handful of wavenumbers
        for &m in &[0usize, 3, 17, 100, 1000] {
            let k = ks[m];
            let direct: Complex64 = (0..g.len())
                .map(|i| Complex64::from_polar(gaussian(sigma)(g.z(i)) * g.dz(), -k * g.z(i)))
                .sum();
            assert!((direct - s.values()[m]).norm() < 1e-12);
        }
        for (v, k) in s.values().iter().zip(ks) {
            let exact = (-k * k * sigma * sigma / 2.0).exp();
            assert!((v.re - exact).abs() < 1e-8, "k={k}");
            assert!(v.im.abs() < 1e-8);
        }
    }

    fn direct_convolution(f: &RealField1D, k: &RealField1D) -> Vec<f64> {
        let n = f.grid().len();
        let half = (k.grid().len() - 1) as isize / 2;
        (0..n)
            .map(|i| {
                let mut s = 0.0;
                for j in 0..n {
                    let lag = i as isize - j as isize + half;
                    if lag >= 0 && (lag as usize) < k.grid().len() {
                        s += f.values()[j] * k.values()[lag as usize];
                    }
                }
                s * f.grid().dz()
            })
            .collect()
    }

    #[test]
    fn convolve_with_delta_is_identity() {
        let g = SpatialGrid1D::new(100.0, 256).unwrap();
        let f = RealField1D::from_fn(g, |z| (-(z - 5.0).powi(2) / 30.0).exp() * (0.2 * z).cos());
        let lag = g.lag_grid();
        let mut kv = vec![0.0; lag.len()];
        kv[(lag.len() - 1) / 2] = 1.0 / g.dz();
        let c = convolve(&f, &RealField1D::new(lag, kv).unwrap()).unwrap();
        assert!(!c.kernel_truncated);
        for (a, b) in f.values().iter().zip(c.field.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn convolve_gaussians_widths_add_in_quadrature() {
        let (s1, s2) = (3.0, 4.0);
        let g = SpatialGrid1D::new(200.0, 256).unwrap();
        let f = RealField1D::from_fn(g, gaussian(s1));
        let k = RealField1D::from_fn(g.lag_grid(), gaussian(s2));
        let c = convolve(&f, &k).unwrap();
        let expect = gaussian((s1 * s1 + s2 * s2).sqrt());
        let direct = direct_convolution(&f, &k);
        for i in 0..g.len() {
            assert!((c.field.values()[i] - expect(g.z(i))).abs() < 1e-6);
            assert!((c.field.values()[i] - direct[i]).abs() < 1e-8 * 0.08);
        }
    }

    #[test]
    fn convolve_zero_is_zero() {
        let g = SpatialGrid1D::new(100.0, 101).unwrap();
        let k = RealField1D::from_fn(g.lag_grid(), gaussian(2.0));
        let c = convolve(&RealField1D::zeros(g), &k).unwrap();
        assert!(c.field.values().iter().all(|v| v.abs() < 1e-300 || *v == 0.0));
    }

    #[test]
    fn convolve_flags_undecayed_kernel() {
        let g = SpatialGrid1D::new(100.0, 101).unwrap();
        let k = RealField1D::constant(g.lag_grid(), 1.0);
        let c = convolve(&RealField1D::constant(g, 1.0), &k).unwrap();
        assert!(c.kernel_truncated);
    }

    #[test]
    fn convolve_rejects_even_kernel() {
        let g = SpatialGrid1D::new(100.0, 100).unwrap();
        assert!(convolve(&RealField1D::zeros(g), &RealField1D::zeros(g)).is_err());
    }
}
