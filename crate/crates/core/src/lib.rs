//! Iterative learning control for shaping the optical dipole potential of a
//! quasi-1D Bose–Einstein condensate through a digital micro-mirror device.
//!
//! The crate is organized along the signal path:
//!
//! * [`field`]: grids, sampled fields, quadrature, spectra and convolution.
//! * [`optics`]: DMD reflectance, beam, point-spread function and the
//!   resulting dipole potential (full and separable paths).
//! * [`inputmap`]: binary transversal pattern optimization, the
//!   quantized look-up table and the virtual-input ↔ pattern mapping.
//! * [`condensate`]: npSE ground states by imaginary-time evolution,
//!   Thomas–Fermi densities and the measurement model.
//! * [`ilc`]: density error, linearized plant, pseudo-inverse learning
//!   kernel and the virtual-input update.
//! * [`harness`]: scenario configuration, the closed loop, disturbances,
//!   export and report.
//!
//! Units are µm, ms and rad/ms throughout (ħ = 1).

pub mod error;
pub mod field;
pub mod optics;
pub mod inputmap;
pub mod condensate;
pub mod ilc;
pub mod harness;

pub use error::{CondensateError, FieldError, HarnessError, IlcError, InputMapError, OpticsError};
