//! Scenario configuration, the closed learning loop, disturbance schedule,
//! export and report.
//!
//! One iteration of the loop maps the virtual input to a DMD pattern, runs
//! the optical truth model (with any active dark spots), solves for the
//! ground state in the resulting potential, measures the density and feeds
//! the error through the learning kernel.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::condensate::{
    ground_state, measure_density, CondensateParams, GroundState, MeasurementConfig, SolverConfig,
};
use crate::error::HarnessError;
use crate::field::{integrate, ComplexField1D, RealField1D, SpatialGrid1D};
use crate::ilc::{
    density_error, design_kernel, gain_profile, transfer_function, update, GainCutoffs, GainProfile,
    LearningKernel, LinearizedModel, DEFAULT_GAMMA_FRACTION,
};
use crate::inputmap::{build_lut, invert_pattern, map_virtual_input, Lut, OptimizerConfig, TransversalModel};
use crate::optics::{
    magnetic_potential, potential_from_field, BeamProfile, DarkSpot, DmdGeometry, DmdPattern,
    MagneticPotentialSpec, OpticalSystem, PsfModel, TransmissionDisturbance,
};

/// Cosine double well `(V_max/2)(1 + cos(k_V z))` inside `|z| ≤ 2π/k_V`,
/// `V_max` outside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesiredPotentialSpec {
    pub v_max: f64,
    pub k_v: f64,
}

impl Default for DesiredPotentialSpec {
    fn default() -> Self {
        DesiredPotentialSpec { v_max: 2.0 * std::f64::consts::PI * 8.0, k_v: 7.53e-2 }
    }
}

impl DesiredPotentialSpec {
    pub fn eval(&self, z: f64) -> f64 {
        if z.abs() <= 2.0 * std::f64::consts::PI / self.k_v {
            0.5 * self.v_max * (1.0 + (self.k_v * z).cos())
        } else {
            self.v_max
        }
    }
}

pub fn desired_potential(spec: &DesiredPotentialSpec, grid: SpatialGrid1D) -> Result<RealField1D, HarnessError> {
    if !(spec.v_max > 0.0 && spec.v_max.is_finite()) || !(spec.k_v > 0.0 && spec.k_v.is_finite()) {
        return Err(HarnessError::Config(format!("desired potential needs positive v_max and k_v, got {spec:?}")));
    }
    Ok(RealField1D::from_fn(grid, |z| spec.eval(z)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledDisturbance {
    /// First iteration at which the disturbance is present; it stays active.
    pub iteration: usize,
    pub disturbance: TransmissionDisturbance,
}

/// Union of every disturbance whose onset is at or before `n`.
pub fn inject_disturbances(schedule: &[ScheduledDisturbance], n: usize) -> TransmissionDisturbance {
    schedule
        .iter()
        .filter(|s| s.iteration <= n)
        .fold(TransmissionDisturbance::none(), |acc, s| acc.union(&s.disturbance))
}

/// Three shallow dark spots over the occupied wells, switched on at `n = 40`.
pub fn default_schedule() -> Vec<ScheduledDisturbance> {
    let spot = |center| DarkSpot { center, width: 4.0, depth: 0.3 };
    vec![ScheduledDisturbance {
        iteration: 40,
        disturbance: TransmissionDisturbance { spots: vec![spot(-45.0), spot(-36.0), spot(38.0)] },
    }]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticsConfig {
    pub dmd: DmdGeometry,
    /// Beam shape; the amplitude is replaced by the calibration below.
    pub beam: BeamProfile,
    pub psf: PsfModel,
    /// Dipole coupling, rad/ms per field².
    pub alpha_v: f64,
    /// `α_V E⊥max²` in units of `V_max`.
    pub headroom: f64,
}

impl Default for OpticsConfig {
    fn default() -> Self {
        OpticsConfig {
            dmd: DmdGeometry::default(),
            beam: BeamProfile::default(),
            psf: PsfModel::default(),
            alpha_v: 1.0,
            headroom: 1.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LutConfig {
    pub n_nu: usize,
    pub optimizer: OptimizerConfig,
}

impl Default for LutConfig {
    fn default() -> Self {
        LutConfig { n_nu: 51, optimizer: OptimizerConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    /// `γ_ν` as a fraction of `max |G|²`.
    pub gamma_fraction: f64,
    pub cutoffs: GainCutoffs,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig { gamma_fraction: DEFAULT_GAMMA_FRACTION, cutoffs: GainCutoffs::default() }
    }
}

/// What the learning update adds its correction to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Carry {
    /// The input actually applied, recovered from the pattern through the
    /// table (`f⁻¹(u)`).
    Applied,
    /// The unquantized virtual input of the previous iteration.
    Virtual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub grid: SpatialGrid1D,
    pub condensate: CondensateParams,
    pub solver: SolverConfig,
    pub optics: OpticsConfig,
    pub magnetic: MagneticPotentialSpec,
    pub lut: LutConfig,
    pub kernel: KernelConfig,
    pub desired: DesiredPotentialSpec,
    pub iterations: usize,
    pub disturbances: Vec<ScheduledDisturbance>,
    pub measurement: MeasurementConfig,
    pub nu_initial: f64,
    pub carry: Carry,
    /// Master seed of a run; mixed into the measurement noise stream.
    pub seed: u64,
    /// Iterations whose fields and pattern are written on export; empty
    /// selects the first, the last and those around each disturbance onset.
    pub export_iterations: Vec<usize>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            grid: SpatialGrid1D::default(),
            condensate: CondensateParams::default(),
            solver: SolverConfig::default(),
            optics: OpticsConfig::default(),
            magnetic: MagneticPotentialSpec::default(),
            lut: LutConfig::default(),
            kernel: KernelConfig::default(),
            desired: DesiredPotentialSpec::default(),
            iterations: 80,
            disturbances: default_schedule(),
            measurement: MeasurementConfig::default(),
            nu_initial: 0.5,
            carry: Carry::Applied,
            seed: 2020,
            export_iterations: Vec::new(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(s: &str) -> Result<Self, HarnessError> {
        let cfg: ScenarioConfig = serde_json::from_str(s).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        self.condensate.validate()?;
        self.solver.validate()?;
        self.optics.dmd.validate()?;
        self.optics.beam.validate()?;
        self.magnetic.validate()?;
        self.lut.optimizer.validate()?;
        for s in &self.disturbances {
            s.disturbance.validate()?;
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if self.lut.n_nu < 2 {
            return bad(format!("lut.n_nu must be at least 2, got {}", self.lut.n_nu));
        }
        if !(0.0..=1.0).contains(&self.nu_initial) {
            return bad(format!("nu_initial {} outside [0, 1]", self.nu_initial));
        }
        if !(self.optics.alpha_v > 0.0 && self.optics.alpha_v.is_finite()) {
            return bad("optics.alpha_v must be positive".into());
        }
        if !(self.optics.headroom > 0.0 && self.optics.headroom.is_finite()) {
            return bad("optics.headroom must be positive".into());
        }
        if !(self.kernel.gamma_fraction > 0.0 && self.kernel.gamma_fraction.is_finite()) {
            return bad("kernel.gamma_fraction must be positive".into());
        }
        if !(self.measurement.noise_std >= 0.0 && self.measurement.noise_std.is_finite()) {
            return bad("measurement.noise_std must be non-negative".into());
        }
        if self.condensate.interaction_length() <= 0.0 {
            return bad("the closed loop needs a positive scattering length".into());
        }
        let dmd_extent = self.optics.dmd.n_l as f64 * self.optics.dmd.pitch;
        if dmd_extent > self.grid.length() + self.optics.dmd.pitch {
            return bad(format!(
                "DMD spans {dmd_extent} µm but the grid only {} µm",
                self.grid.length()
            ));
        }
        Ok(())
    }

    pub fn transversal_model(&self) -> Result<TransversalModel, HarnessError> {
        Ok(TransversalModel::from_config(
            &self.optics.psf,
            &self.optics.beam,
            self.optics.dmd.n_t,
            self.optics.dmd.pitch,
            &self.lut.optimizer,
        )?)
    }

    pub fn build_lut(&self) -> Result<Lut, HarnessError> {
        Ok(build_lut(self.lut.n_nu, &self.lut.optimizer, &self.transversal_model()?)?)
    }

    /// Rejects a LUT built for different optics.
    pub fn check_lut(&self, lut: &Lut) -> Result<(), HarnessError> {
        let model = self.transversal_model()?;
        let h = &lut.header;
        if h.n_t != self.optics.dmd.n_t || h.optics_hash != model.optics_hash() {
            return Err(HarnessError::Config(format!(
                "LUT was built for other optics (n_t {}, hash {})",
                h.n_t, h.optics_hash
            )));
        }
        Ok(())
    }
}

/// Everything derived from the configuration before the loop starts.
#[derive(Debug, Clone)]
pub struct Design {
    pub grid: SpatialGrid1D,
    pub optics: OpticalSystem,
    pub v_mag: RealField1D,
    pub v_desired: RealField1D,
    pub desired_state: GroundState,
    pub rho_desired: RealField1D,
    pub gain: GainProfile,
    pub model: LinearizedModel,
    pub kernel: LearningKernel,
}

impl Design {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let grid = cfg.grid;
        let oc = &cfg.optics;
        let unit = OpticalSystem::new(oc.dmd, oc.beam.with_amplitude(1.0), oc.psf, grid)?;
        let amplitude = unit.calibrated_amplitude(oc.headroom * cfg.desired.v_max, oc.alpha_v);
        let optics = unit.with_amplitude(amplitude)?;

        let v_mag = magnetic_potential(&cfg.magnetic, cfg.condensate.mass, grid);
        let v_desired = desired_potential(&cfg.desired, grid)?;
        let desired_state = solve(&v_desired, cfg, None, 0)?;
        let rho_desired = desired_state.density();
        let peak = desired_state.peak_interaction_parameter(&cfg.condensate);
        if peak >= 1.0 {
            log::info!("desired state peak 2 a_s N rho = {peak:.3} (weak-interaction premise not met)");
        }
        let gain = gain_profile(
            &v_desired,
            &v_mag,
            desired_state.mu,
            &cfg.condensate,
            optics.e_perp_max(),
            oc.alpha_v,
            cfg.desired.v_max,
            &cfg.kernel.cutoffs,
        )?;
        let model = transfer_function(gain.alpha_bar, &oc.psf, &grid);
        let gamma = cfg.kernel.gamma_fraction * model.max_gain_sqr();
        let kernel = design_kernel(&model, gamma)?;
        log::info!(
            "design: mu_d {:.4}, alpha_bar {:.4}, E_perp_max {:.4}, kernel {} points",
            desired_state.mu,
            gain.alpha_bar,
            optics.e_perp_max(),
            kernel.kernel.grid().len()
        );
        Ok(Design { grid, optics, v_mag, v_desired, desired_state, rho_desired, gain, model, kernel })
    }

    pub fn column_grid(&self) -> SpatialGrid1D {
        self.optics.geometry().column_grid()
    }
}

/// Ground state with the configured solver; a warm start that fails to
/// converge is retried from the Thomas–Fermi profile.
fn solve(
    v: &RealField1D,
    cfg: &ScenarioConfig,
    warm: Option<&ComplexField1D>,
    iteration: usize,
) -> Result<GroundState, HarnessError> {
    let gs = ground_state(v, &cfg.condensate, &cfg.solver, warm)?;
    if gs.converged {
        return Ok(gs);
    }
    if warm.is_some() {
        log::warn!("iteration {iteration}: warm start did not converge, retrying from scratch");
        let gs = ground_state(v, &cfg.condensate, &cfg.solver, None)?;
        if gs.converged {
            return Ok(gs);
        }
        return Err(HarnessError::NotConverged { iteration, steps: gs.steps });
    }
    Err(HarnessError::NotConverged { iteration, steps: gs.steps })
}

/// What a plant reports back for one applied virtual input.
#[derive(Debug, Clone)]
pub struct PlantOutput {
    pub error: RealField1D,
    pub density: Option<RealField1D>,
    pub potential: Option<RealField1D>,
    pub optical_potential: Option<RealField1D>,
    pub pattern: Option<DmdPattern>,
    /// Quantized input the plant actually applied, when it differs from
    /// the requested one.
    pub applied: Option<RealField1D>,
    pub mu: f64,
    pub solver_steps: usize,
}

pub trait Plant {
    fn respond(&mut self, iteration: usize, nu: &RealField1D) -> Result<PlantOutput, HarnessError>;
}

/// The physics plant: optics truth model, npSE ground state, measurement.
pub struct PhysicsPlant<'a> {
    cfg: &'a ScenarioConfig,
    design: &'a Design,
    lut: &'a Lut,
    warm: Option<ComplexField1D>,
}

impl<'a> PhysicsPlant<'a> {
    pub fn new(cfg: &'a ScenarioConfig, design: &'a Design, lut: &'a Lut) -> Result<Self, HarnessError> {
        cfg.check_lut(lut)?;
        Ok(PhysicsPlant { cfg, design, lut, warm: None })
    }
}

impl Plant for PhysicsPlant<'_> {
    fn respond(&mut self, n: usize, nu: &RealField1D) -> Result<PlantOutput, HarnessError> {
        let pattern = map_virtual_input(nu, self.lut)?;
        let tau = inject_disturbances(&self.cfg.disturbances, n);
        let e_out = self.design.optics.propagate_full(&pattern)?;
        let tau = (!tau.is_empty()).then_some(tau);
        let v_opt = potential_from_field(&e_out, self.cfg.optics.alpha_v, tau.as_ref())?;
        let v = self.design.v_mag.zip_with(&v_opt, |a, b| a + b)?;
        let gs = solve(&v, self.cfg, self.warm.as_ref(), n)?;
        let meas = MeasurementConfig { seed: self.cfg.seed ^ self.cfg.measurement.seed, ..self.cfg.measurement };
        let rho = measure_density(&gs.density(), &meas, n as u64)?;
        let error = density_error(&rho, &self.design.rho_desired)?;
        let out = PlantOutput {
            error,
            density: Some(rho),
            potential: Some(v),
            optical_potential: Some(v_opt),
            applied: match self.cfg.carry {
                Carry::Applied => Some(invert_pattern(&pattern, self.lut)?),
                Carry::Virtual => None,
            },
            pattern: Some(pattern),
            mu: gs.mu,
            solver_steps: gs.steps,
        };
        self.warm = Some(gs.phi);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub n: usize,
    /// Virtual input applied at this iteration, on the column grid.
    pub nu: RealField1D,
    pub pattern: Option<DmdPattern>,
    pub potential: Option<RealField1D>,
    pub optical_potential: Option<RealField1D>,
    pub density: Option<RealField1D>,
    pub error: RealField1D,
    pub error_norm: f64,
    pub mu: f64,
    pub solver_steps: usize,
    /// Columns clamped by the update that produced the next input.
    pub clamped: usize,
}

impl IterationRecord {
    pub fn pattern_hash(&self) -> Option<String> {
        self.pattern.as_ref().map(|p| {
            let bytes: Vec<u8> = p.bits().iter().map(|&b| b as u8).collect();
            hex::encode(Sha256::digest(&bytes))
        })
    }
}

/// `‖e‖₂ = √∫ e² dz`.
pub fn error_norm(e: &RealField1D) -> Result<f64, HarnessError> {
    Ok(integrate(&e.map(|v| v * v))?.sqrt())
}

/// A loop that stopped early, with everything recorded up to the failure.
#[derive(Debug)]
pub struct LoopAbort {
    pub records: Vec<IterationRecord>,
    pub error: HarnessError,
}

/// Drive `plant` for `iterations` steps from `nu0` with the learning kernel.
pub fn drive<P: Plant>(
    plant: &mut P,
    kernel: &LearningKernel,
    nu0: RealField1D,
    iterations: usize,
) -> Result<Vec<IterationRecord>, Box<LoopAbort>> {
    let mut records: Vec<IterationRecord> = Vec::with_capacity(iterations);
    let mut nu = nu0;
    for n in 0..iterations {
        let step = plant.respond(n, &nu).and_then(|out| {
            let upd = update(out.applied.as_ref().unwrap_or(&nu), &out.error, kernel)?;
            Ok((out, upd))
        });
        let (out, upd) = match step {
            Ok(v) => v,
            Err(error) => return Err(Box::new(LoopAbort { records, error })),
        };
        let error_norm = match error_norm(&out.error) {
            Ok(v) => v,
            Err(error) => return Err(Box::new(LoopAbort { records, error })),
        };
        log::info!("iteration {n}: |e| = {error_norm:.6e}, mu = {:.5}, steps = {}", out.mu, out.solver_steps);
        records.push(IterationRecord {
            n,
            nu,
            pattern: out.pattern,
            potential: out.potential,
            optical_potential: out.optical_potential,
            density: out.density,
            error: out.error,
            error_norm,
            mu: out.mu,
            solver_steps: out.solver_steps,
            clamped: upd.clamped,
        });
        nu = upd.nu;
    }
    Ok(records)
}

/// The full closed loop of a scenario with a prepared design and LUT.
pub fn run_closed_loop(
    cfg: &ScenarioConfig,
    design: &Design,
    lut: &Lut,
) -> Result<Vec<IterationRecord>, Box<LoopAbort>> {
    let mut plant = match PhysicsPlant::new(cfg, design, lut) {
        Ok(p) => p,
        Err(error) => return Err(Box::new(LoopAbort { records: Vec::new(), error })),
    };
    let nu0 = RealField1D::constant(design.column_grid(), cfg.nu_initial);
    drive(&mut plant, &design.kernel, nu0, cfg.iterations)
}

/// `‖e^n‖ / ‖e^0‖` for every record.
pub fn error_ratios(records: &[IterationRecord]) -> Vec<f64> {
    let e0 = records.first().map_or(1.0, |r| r.error_norm);
    records.iter().map(|r| r.error_norm / e0).collect()
}

/// Iterations `n ≤ upto` with `‖e^n‖ > ‖e^{n-1}‖ + δ`, `δ = rel ‖e^0‖`.
pub fn monotonicity_violations(records: &[IterationRecord], upto: usize, rel: f64) -> Vec<usize> {
    let Some(first) = records.first() else { return Vec::new() };
    let delta = rel * first.error_norm;
    records
        .windows(2)
        .filter(|w| w[1].n <= upto && w[1].error_norm > w[0].error_norm + delta)
        .map(|w| w[1].n)
        .collect()
}

/// First iteration before `onset` whose error is within `factor` of the
/// error just before `onset`, i.e. where the run has reached its floor.
pub fn converged_from(records: &[IterationRecord], onset: usize, factor: f64) -> Option<usize> {
    let floor = records[..onset.min(records.len())].last()?.error_norm;
    records.iter().take(onset).find(|r| r.error_norm <= factor * floor).map(|r| r.n)
}

/// Mean `Σ_n |ν^{n+1} − ν^n|` per column over the unoccupied columns
/// (`ρ_d < threshold · max ρ_d`) divided by the same over the occupied
/// ones, for updates `n ∈ [from, to)`.
pub fn hidden_region_ratio(
    records: &[IterationRecord],
    rho_desired: &RealField1D,
    threshold: f64,
    from: usize,
    to: usize,
) -> Option<f64> {
    let first = records.first()?;
    let cols = *first.nu.grid();
    let fine = *rho_desired.grid();
    let peak = rho_desired.max();
    let occupied: Vec<bool> =
        cols.samples().iter().map(|&z| fine.interpolate(rho_desired.values(), z) >= threshold * peak).collect();
    let mut total = vec![0.0; cols.len()];
    for w in records.windows(2).filter(|w| w[0].n >= from && w[0].n < to) {
        for (t, (a, b)) in total.iter_mut().zip(w[0].nu.values().iter().zip(w[1].nu.values())) {
            *t += (b - a).abs();
        }
    }
    let mean = |occ: bool| {
        let (s, c) = total
            .iter()
            .zip(&occupied)
            .filter(|(_, o)| **o == occ)
            .fold((0.0, 0usize), |(s, c), (t, _)| (s + t, c + 1));
        if c == 0 { 0.0 } else { s / c as f64 }
    };
    let occ = mean(true);
    (occ > 0.0).then(|| mean(false) / occ)
}

fn default_exports(cfg: &ScenarioConfig, count: usize) -> Vec<usize> {
    if !cfg.export_iterations.is_empty() {
        return cfg.export_iterations.iter().copied().filter(|&n| n < count).collect();
    }
    let mut picks = vec![0, count.saturating_sub(1)];
    for s in &cfg.disturbances {
        picks.push(s.iteration.saturating_sub(1));
        picks.push(s.iteration);
    }
    picks.retain(|&n| n < count);
    picks.sort_unstable();
    picks.dedup();
    picks
}

fn write(path: &Path, contents: &str) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

/// Hash of the library sources compiled into this binary.
pub fn code_hash() -> String {
    let mut h = Sha256::new();
    for src in [
        include_str!("field.rs"),
        include_str!("optics.rs"),
        include_str!("inputmap.rs"),
        include_str!("condensate.rs"),
        include_str!("ilc.rs"),
        include_str!("harness.rs"),
    ] {
        h.update(src.as_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub package_version: String,
    pub code_sha256: String,
    pub lut_sha256: Option<String>,
    pub kernel_model_sha256: Option<String>,
    pub mu_desired: Option<f64>,
    pub alpha_bar: Option<f64>,
    pub e_perp_max: Option<f64>,
    pub beam_amplitude: Option<f64>,
    pub completed_iterations: usize,
    pub aborted: Option<String>,
    pub error_norms: Vec<f64>,
    pub config: ScenarioConfig,
}

/// Write `error_norms.csv`, per-iteration field CSVs and PBM patterns for the
/// selected iterations, and `run.json`.
pub fn export_records(
    records: &[IterationRecord],
    cfg: &ScenarioConfig,
    design: Option<&Design>,
    lut: Option<&Lut>,
    aborted: Option<&HarnessError>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let mut written = Vec::new();

    let mut csv = String::from("n,error_norm,mu,clamped\n");
    for r in records {
        csv.push_str(&format!("{},{},{},{}\n", r.n, r.error_norm, r.mu, r.clamped));
    }
    let p = out_dir.join("error_norms.csv");
    write(&p, &csv)?;
    written.push(p);

    for n in default_exports(cfg, records.len()) {
        let r = &records[n];
        let grid = *r.error.grid();
        let cols = *r.nu.grid();
        let mut rows = String::from("z,nu,V,V_opt,rho,e_rho\n");
        let opt = |f: &Option<RealField1D>, i: usize| f.as_ref().map_or(f64::NAN, |f| f.values()[i]);
        for i in 0..grid.len() {
            let z = grid.z(i);
            // piecewise-constant virtual input of the column covering z
            let j = ((z - cols.start()) / cols.dz()).round();
            let nu = if j >= 0.0 && (j as usize) < cols.len() { r.nu.values()[j as usize] } else { f64::NAN };
            rows.push_str(&format!(
                "{},{},{},{},{},{}\n",
                z,
                nu,
                opt(&r.potential, i),
                opt(&r.optical_potential, i),
                opt(&r.density, i),
                r.error.values()[i]
            ));
        }
        let p = out_dir.join(format!("fields_{n:03}.csv"));
        write(&p, &rows)?;
        written.push(p);

        let mut nu_rows = String::from("j,z,nu\n");
        for (j, (z, v)) in cols.samples().iter().zip(r.nu.values()).enumerate() {
            nu_rows.push_str(&format!("{j},{z},{v}\n"));
        }
        let p = out_dir.join(format!("nu_{n:03}.csv"));
        write(&p, &nu_rows)?;
        written.push(p);

        if let Some(pattern) = &r.pattern {
            let p = out_dir.join(format!("pattern_{n:03}.pbm"));
            write(&p, &pattern.to_pbm())?;
            written.push(p);
        }
    }

    let summary = RunSummary {
        package_version: env!("CARGO_PKG_VERSION").to_string(),
        code_sha256: code_hash(),
        lut_sha256: lut.map(Lut::sha256),
        kernel_model_sha256: design.map(|d| d.kernel.model_hash.clone()),
        mu_desired: design.map(|d| d.desired_state.mu),
        alpha_bar: design.map(|d| d.gain.alpha_bar),
        e_perp_max: design.map(|d| d.optics.e_perp_max()),
        beam_amplitude: design.map(|d| d.optics.beam().amplitude),
        completed_iterations: records.len(),
        aborted: aborted.map(|e| e.to_string()),
        error_norms: records.iter().map(|r| r.error_norm).collect(),
        config: cfg.clone(),
    };
    let p = out_dir.join("run.json");
    write(&p, &serde_json::to_string_pretty(&summary).expect("summary serializes"))?;
    written.push(p);
    Ok(written)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub n: usize,
    pub error_norm: f64,
    pub ratio: f64,
    pub mu: f64,
    pub clamped: usize,
    /// `‖e‖₂` recomputed from the exported fields, when present.
    pub recomputed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub max_mismatch: f64,
}

impl Report {
    pub fn table(&self) -> String {
        let mut out = format!("{:>5} {:>14} {:>11} {:>10} {:>7} {:>14}\n", "n", "|e|", "ratio", "mu", "clamp", "recomputed");
        for r in &self.rows {
            let rec = r.recomputed.map_or("-".to_string(), |v| format!("{v:.8e}"));
            out.push_str(&format!(
                "{:>5} {:>14.8e} {:>11.4e} {:>10.5} {:>7} {:>14}\n",
                r.n, r.error_norm, r.ratio, r.mu, r.clamped, rec
            ));
        }
        out.push_str(&format!("max |recomputed - recorded| = {:.3e}\n", self.max_mismatch));
        out
    }
}

fn parse_err(path: &Path, line: usize, what: &str) -> HarnessError {
    HarnessError::Config(format!("{}:{line}: {what}", path.display()))
}

/// Re-read an exported run and recompute the error norms from the field files.
pub fn report(dir: &Path) -> Result<Report, HarnessError> {
    let norms_path = dir.join("error_norms.csv");
    let text = fs::read_to_string(&norms_path).map_err(|e| HarnessError::io(&norms_path, e))?;
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(parse_err(&norms_path, ln + 1, "expected 4 columns"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| parse_err(&norms_path, ln + 1, "bad number"));
        let int = |s: &str| s.parse::<usize>().map_err(|_| parse_err(&norms_path, ln + 1, "bad integer"));
        rows.push(ReportRow {
            n: int(f[0])?,
            error_norm: num(f[1])?,
            ratio: 0.0,
            mu: num(f[2])?,
            clamped: int(f[3])?,
            recomputed: None,
        });
    }
    let e0 = rows.first().map_or(1.0, |r| r.error_norm);
    let mut max_mismatch: f64 = 0.0;
    for r in rows.iter_mut() {
        r.ratio = r.error_norm / e0;
        let p = dir.join(format!("fields_{:03}.csv", r.n));
        if !p.exists() {
            continue;
        }
        let t = fs::read_to_string(&p).map_err(|e| HarnessError::io(&p, e))?;
        let mut z = Vec::new();
        let mut e = Vec::new();
        for (ln, line) in t.lines().enumerate().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            let parse = |s: &str| s.parse::<f64>().map_err(|_| parse_err(&p, ln + 1, "bad number"));
            if f.len() != 6 {
                return Err(parse_err(&p, ln + 1, "expected 6 columns"));
            }
            z.push(parse(f[0])?);
            e.push(parse(f[5])?);
        }
        if z.len() < 2 {
            return Err(parse_err(&p, 1, "too few rows"));
        }
        let grid = SpatialGrid1D::with_spacing(z[1] - z[0], z.len())?;
        let norm = error_norm(&RealField1D::new(grid, e)?)?;
        max_mismatch = max_mismatch.max((norm - r.error_norm).abs());
        r.recomputed = Some(norm);
    }
    Ok(Report { rows, max_mismatch })
}

/// Read a `z,V` CSV and interpolate it onto `grid`.
pub fn read_potential_csv(path: &Path, grid: SpatialGrid1D) -> Result<RealField1D, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = (f.len() >= 2).then(|| (f[0].parse::<f64>(), f[1].parse::<f64>()));
        match parsed {
            Some((Ok(z), Ok(v))) if z.is_finite() && v.is_finite() => pts.push((z, v)),
            _ if ln == 0 => continue, // header
            _ => return Err(parse_err(path, ln + 1, "expected `z,V`")),
        }
    }
    if pts.len() < 2 {
        return Err(HarnessError::Config(format!("{}: need at least two samples", path.display())));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let values = grid
        .samples()
        .iter()
        .map(|&z| {
            // hold the end values outside the sampled range
            if z <= pts[0].0 {
                return pts[0].1;
            }
            if z >= pts[pts.len() - 1].0 {
                return pts[pts.len() - 1].1;
            }
            let k = pts.partition_point(|p| p.0 <= z);
            let (z0, v0) = pts[k - 1];
            let (z1, v1) = pts[k];
            v0 + (v1 - v0) * (z - z0) / (z1 - z0)
        })
        .collect();
    Ok(RealField1D::new(grid, values)?)
}

/// `z,rho,phi_re,phi_im,V` rows of a ground state.
pub fn ground_state_csv(gs: &GroundState, v: &RealField1D) -> String {
    let mut out = String::from("z,rho,phi_re,phi_im,V\n");
    let grid = gs.phi.grid();
    for (i, (phi, vi)) in gs.phi.values().iter().zip(v.values()).enumerate() {
        out.push_str(&format!("{},{},{},{},{}\n", grid.z(i), phi.norm_sqr(), phi.re, phi.im, vi));
    }
    out
}

/// Ground state of the configured potential (the desired one or a given field).
pub fn solve_ground_state(cfg: &ScenarioConfig, v: &RealField1D) -> Result<GroundState, HarnessError> {
    let gs = ground_state(v, &cfg.condensate, &cfg.solver, None)?;
    if !gs.converged {
        return Err(HarnessError::NotConverged { iteration: 0, steps: gs.steps });
    }
    Ok(gs)
}
