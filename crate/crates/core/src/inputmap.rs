//! Quasi-continuous input mapping.
//!
//! A virtual input `ν ∈ [0, 1]` is realized per DMD column by a binary
//! transversal pattern whose normalized field `Ẽ⊥(0)` equals `ν`, while
//! `Ẽ⊥(y)` stays close to `ν` over `|y| ≤ Δy`. Patterns come from a seeded
//! genetic search polished by local bit moves, and are tabulated for `n_ν`
//! evenly spaced inputs.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::InputMapError;
use crate::field::RealField1D;
use crate::optics::{pixel_center, transversal_pixel_response, BeamProfile, DmdPattern, PsfModel};

pub const LUT_FORMAT_VERSION: u32 = 1;

/// One transversal DMD column.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TransversalPattern {
    bits: Vec<bool>,
}

impl TransversalPattern {
    pub fn new(bits: Vec<bool>) -> Self {
        TransversalPattern { bits }
    }

    pub fn zeros(n: usize) -> Self {
        TransversalPattern { bits: vec![false; n] }
    }

    pub fn ones(n: usize) -> Self {
        TransversalPattern { bits: vec![true; n] }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn to_bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn from_bit_string(s: &str) -> Result<Self, InputMapError> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(InputMapError::Malformed(format!("bad bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(TransversalPattern::new)
    }
}

impl Serialize for TransversalPattern {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_bit_string())
    }
}

impl<'de> Deserialize<'de> for TransversalPattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        TransversalPattern::from_bit_string(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Genetic,
    BitflipLocalSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub population: usize,
    pub generations: usize,
    /// Cap on local-search sweeps during the polish.
    pub max_iterations: usize,
    /// Per-bit mutation probability.
    pub mutation_rate: f64,
    pub seed: u64,
    pub gamma_perp: f64,
    /// Half-width of the penalized transversal band, µm.
    pub delta_y: f64,
    /// Warm-started re-solves allowed per entry during monotonic repair.
    pub repair_retries: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            algorithm: Algorithm::Genetic,
            population: 100,
            generations: 200,
            max_iterations: 200,
            mutation_rate: 0.02,
            seed: 2020,
            gamma_perp: 0.3,
            delta_y: 4.0,
            repair_retries: 8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), InputMapError> {
        let bad = |m: &str| Err(InputMapError::InvalidConfig(m.to_string()));
        if self.population < 2 {
            return bad("population must be at least 2");
        }
        if self.generations == 0 || self.max_iterations == 0 {
            return bad("generations and max_iterations must be positive");
        }
        if !(self.mutation_rate > 0.0 && self.mutation_rate < 1.0) {
            return bad("mutation rate must lie in (0, 1)");
        }
        if !(self.gamma_perp > 0.0 && self.gamma_perp.is_finite()) {
            return bad("gamma_perp must be positive");
        }
        if !(self.delta_y > 0.0 && self.delta_y.is_finite()) {
            return bad("delta_y must be positive");
        }
        Ok(())
    }
}

/// Normalized transversal responses of every pixel of a column, tabulated at
/// `y = 0` and on the penalty band.
#[derive(Debug, Clone)]
pub struct TransversalModel {
    n_t: usize,
    pitch: f64,
    gamma_perp: f64,
    delta_y: f64,
    /// Response at y = 0, normalized so the all-on column gives exactly 1.
    center: Vec<f64>,
    /// Band sample positions with trapezoid weights and responses.
    band: Vec<(f64, f64, Vec<f64>)>,
    optics_hash: String,
}

impl TransversalModel {
    pub fn new(
        psf: &PsfModel,
        beam: &BeamProfile,
        n_t: usize,
        pitch: f64,
        gamma_perp: f64,
        delta_y: f64,
    ) -> Result<Self, InputMapError> {
        beam.validate()?;
        if n_t == 0 || !(pitch > 0.0 && pitch.is_finite()) {
            return Err(InputMapError::InvalidConfig(format!("invalid column geometry n_t={n_t}, pitch={pitch}")));
        }
        if !(gamma_perp > 0.0) || !(delta_y > 0.0) {
            return Err(InputMapError::InvalidConfig("gamma_perp and delta_y must be positive".into()));
        }
        let raw = |y: f64| -> Vec<f64> {
            (0..n_t)
                .map(|i| transversal_pixel_response(psf, beam, pixel_center(i, n_t, pitch), pitch, y))
                .collect()
        };
        let center_raw = raw(0.0);
        let e_max: f64 = center_raw.iter().sum();
        let center: Vec<f64> = center_raw.iter().map(|v| v / e_max).collect();

        // pixel-resolution samples over [-Δy, Δy]
        let intervals = ((2.0 * delta_y / pitch).round() as usize).max(2);
        let h = 2.0 * delta_y / intervals as f64;
        let band = (0..=intervals)
            .map(|q| {
                let y = -delta_y + q as f64 * h;
                let w = if q == 0 || q == intervals { 0.5 * h } else { h };
                (y, w, raw(y).into_iter().map(|v| v / e_max).collect())
            })
            .collect();

        let mut hasher = Sha256::new();
        hasher.update(
            serde_json::to_string(&(psf, beam.sigma_y, n_t, pitch)).expect("serializable optics").as_bytes(),
        );
        let optics_hash = hex::encode(hasher.finalize());
        Ok(TransversalModel { n_t, pitch, gamma_perp, delta_y, center, band, optics_hash })
    }

    pub fn from_config(
        psf: &PsfModel,
        beam: &BeamProfile,
        n_t: usize,
        pitch: f64,
        cfg: &OptimizerConfig,
    ) -> Result<Self, InputMapError> {
        Self::new(psf, beam, n_t, pitch, cfg.gamma_perp, cfg.delta_y)
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn band_points(&self) -> usize {
        self.band.len()
    }

    pub fn optics_hash(&self) -> &str {
        &self.optics_hash
    }

    /// `Ẽ⊥(0)` of a column.
    pub fn field_at_center(&self, bits: &[bool]) -> f64 {
        bits.iter().zip(&self.center).filter(|(b, _)| **b).map(|(_, r)| r).sum()
    }

    /// Objective `(|Ẽ⊥(0)| - ν)² + γ⊥ ∫_{-Δy}^{Δy} (|Ẽ⊥(η)| - ν)² dη`,
    /// evaluated from scratch.
    pub fn objective(&self, bits: &[bool], nu: f64) -> f64 {
        let sums = self.sums(bits);
        self.objective_from_sums(&sums, nu)
    }

    fn sums(&self, bits: &[bool]) -> Vec<f64> {
        let mut sums = Vec::with_capacity(1 + self.band.len());
        sums.push(self.field_at_center(bits));
        for (_, _, r) in &self.band {
            sums.push(bits.iter().zip(r).filter(|(b, _)| **b).map(|(_, v)| v).sum());
        }
        sums
    }

    fn objective_from_sums(&self, sums: &[f64], nu: f64) -> f64 {
        let d0 = sums[0].abs() - nu;
        let band: f64 = self.band.iter().zip(&sums[1..]).map(|((_, w, _), s)| w * (s.abs() - nu).powi(2)).sum();
        d0 * d0 + self.gamma_perp * band
    }

    fn apply_flip(&self, sums: &mut [f64], i: usize, on: bool) {
        let sign = if on { 1.0 } else { -1.0 };
        sums[0] += sign * self.center[i];
        for (s, (_, _, r)) in sums[1..].iter_mut().zip(&self.band) {
            *s += sign * r[i];
        }
    }
}

/// Normalized transversal field `Ẽ⊥(y)` of a column pattern.
pub fn transversal_field(pattern: &TransversalPattern, psf: &PsfModel, beam: &BeamProfile, pitch: f64, y: f64) -> f64 {
    let n = pattern.len();
    let e_max: f64 = (0..n)
        .map(|i| transversal_pixel_response(psf, beam, pixel_center(i, n, pitch), pitch, 0.0))
        .sum();
    let e: f64 = (0..n)
        .filter(|&i| pattern.bits[i])
        .map(|i| transversal_pixel_response(psf, beam, pixel_center(i, n, pitch), pitch, y))
        .sum();
    e / e_max
}

/// Best pattern found for one target input.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSolution {
    pub pattern: TransversalPattern,
    pub achieved: f64,
    pub residual: f64,
}

#[derive(Clone)]
struct Candidate {
    bits: Vec<bool>,
    sums: Vec<f64>,
    cost: f64,
}

impl Candidate {
    fn new(model: &TransversalModel, bits: Vec<bool>, nu: f64) -> Self {
        let sums = model.sums(&bits);
        let cost = model.objective_from_sums(&sums, nu);
        Candidate { bits, sums, cost }
    }
}

/// Improve `cand` by steepest single flips and on/off swaps until no move
/// helps or `max_sweeps` is reached. `floor` rejects moves whose `Ẽ⊥(0)`
/// would drop below it.
fn polish(model: &TransversalModel, cand: &mut Candidate, nu: f64, max_sweeps: usize, floor: Option<f64>) {
    let n = cand.bits.len();
    let mut trial = cand.sums.clone();
    let admissible = |s: &[f64]| floor.is_none_or(|f| s[0] >= f);
    for _ in 0..max_sweeps {
        let mut best: Option<(f64, usize, Option<usize>)> = None;
        for i in 0..n {
            trial.copy_from_slice(&cand.sums);
            model.apply_flip(&mut trial, i, !cand.bits[i]);
            let c = model.objective_from_sums(&trial, nu);
            if c < cand.cost && admissible(&trial) && best.is_none_or(|b| c < b.0) {
                best = Some((c, i, None));
            }
        }
        for i in (0..n).filter(|&i| cand.bits[i]) {
            for j in (0..n).filter(|&j| !cand.bits[j]) {
                trial.copy_from_slice(&cand.sums);
                model.apply_flip(&mut trial, i, false);
                model.apply_flip(&mut trial, j, true);
                let c = model.objective_from_sums(&trial, nu);
                if c < cand.cost && admissible(&trial) && best.is_none_or(|b| c < b.0) {
                    best = Some((c, i, Some(j)));
                }
            }
        }
        let Some((_, i, j)) = best else { break };
        cand.bits[i] = !cand.bits[i];
        if let Some(j) = j {
            cand.bits[j] = !cand.bits[j];
        }
        // refresh from scratch to keep the cached sums free of drift
        *cand = Candidate::new(model, std::mem::take(&mut cand.bits), nu);
    }
}

fn random_bits(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<bool> {
    (0..n).map(|_| rng.random_bool(p)).collect()
}

fn tournament<'a>(rng: &mut ChaCha8Rng, pop: &'a [Candidate]) -> &'a Candidate {
    let mut best = &pop[rng.random_range(0..pop.len())];
    for _ in 0..2 {
        let c = &pop[rng.random_range(0..pop.len())];
        if c.cost < best.cost {
            best = c;
        }
    }
    best
}

fn genetic(model: &TransversalModel, nu: f64, cfg: &OptimizerConfig, rng: &mut ChaCha8Rng) -> Candidate {
    let n = model.n_t;
    let p_on = nu.clamp(0.05, 0.95);
    let mut pop: Vec<Candidate> = Vec::with_capacity(cfg.population);
    pop.push(Candidate::new(model, vec![false; n], nu));
    pop.push(Candidate::new(model, vec![true; n], nu));
    while pop.len() < cfg.population {
        let bits = random_bits(rng, n, p_on);
        pop.push(Candidate::new(model, bits, nu));
    }
    let by_cost = |a: &Candidate, b: &Candidate| a.cost.total_cmp(&b.cost);
    for _ in 0..cfg.generations {
        pop.sort_by(by_cost);
        let mut next: Vec<Candidate> = pop[..2].to_vec();
        while next.len() < cfg.population {
            let a = tournament(rng, &pop);
            let b = tournament(rng, &pop);
            let bits: Vec<bool> = (0..n)
                .map(|i| {
                    let gene = if rng.random_bool(0.5) { a.bits[i] } else { b.bits[i] };
                    gene ^ rng.random_bool(cfg.mutation_rate)
                })
                .collect();
            next.push(Candidate::new(model, bits, nu));
        }
        pop = next;
    }
    pop.sort_by(by_cost);
    pop.swap_remove(0)
}

fn local_search(model: &TransversalModel, nu: f64, cfg: &OptimizerConfig, rng: &mut ChaCha8Rng) -> Candidate {
    let n = model.n_t;
    let p_on = nu.clamp(0.05, 0.95);
    let mut best = Candidate::new(model, vec![false; n], nu);
    for _ in 0..cfg.population {
        let mut c = Candidate::new(model, random_bits(rng, n, p_on), nu);
        polish(model, &mut c, nu, cfg.max_iterations, None);
        if c.cost < best.cost {
            best = c;
        }
    }
    best
}

fn finish(model: &TransversalModel, bits: Vec<bool>, nu: f64) -> PatternSolution {
    let achieved = model.field_at_center(&bits);
    let residual = model.objective(&bits, nu);
    PatternSolution { pattern: TransversalPattern::new(bits), achieved, residual }
}

/// Heuristic minimization of the transversal objective for one target `ν`.
///
/// `ν = 0` and `ν = 1` are anchored to the all-off and all-on columns: the
/// latter defines `E⊥_max` and therefore `Ẽ⊥(0) = 1`.
pub fn solve_pattern_with_rng(
    nu: f64,
    cfg: &OptimizerConfig,
    model: &TransversalModel,
    rng: &mut ChaCha8Rng,
) -> Result<PatternSolution, InputMapError> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&nu) {
        return Err(InputMapError::InputOutOfRange { column: 0, value: nu });
    }
    let n = model.n_t;
    if nu == 0.0 {
        return Ok(finish(model, vec![false; n], nu));
    }
    if nu == 1.0 {
        return Ok(finish(model, vec![true; n], nu));
    }
    let mut best = match cfg.algorithm {
        Algorithm::Genetic => genetic(model, nu, cfg, rng),
        Algorithm::BitflipLocalSearch => local_search(model, nu, cfg, rng),
    };
    polish(model, &mut best, nu, cfg.max_iterations, None);
    Ok(finish(model, best.bits, nu))
}

pub fn solve_pattern(nu: f64, cfg: &OptimizerConfig, model: &TransversalModel) -> Result<PatternSolution, InputMapError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    solve_pattern_with_rng(nu, cfg, model, &mut rng)
}

fn entry_rng(seed: u64, index: usize, attempt: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((attempt as u64) << 32) | index as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LutHeader {
    pub version: u32,
    pub n_t: usize,
    pub n_nu: usize,
    pub gamma_perp: f64,
    pub delta_y: f64,
    pub pitch: f64,
    pub optics_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LutEntry {
    pub nu: f64,
    pub bits: TransversalPattern,
    pub achieved: f64,
    pub residual: f64,
}

/// Look-up table from quantized virtual input to transversal pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lut {
    pub header: LutHeader,
    pub entries: Vec<LutEntry>,
}

/// Solve every quantized input `ν_k = k/(n_ν-1)` and enforce monotone
/// achieved values by warm-started re-solves.
pub fn build_lut(n_nu: usize, cfg: &OptimizerConfig, model: &TransversalModel) -> Result<Lut, InputMapError> {
    cfg.validate()?;
    if n_nu < 2 {
        return Err(InputMapError::InvalidConfig(format!("need n_nu >= 2, got {n_nu}")));
    }
    let nu_of = |k: usize| k as f64 / (n_nu - 1) as f64;
    let solutions: Vec<PatternSolution> = (0..n_nu)
        .into_par_iter()
        .map(|k| solve_pattern_with_rng(nu_of(k), cfg, model, &mut entry_rng(cfg.seed, k, 0)))
        .collect::<Result<_, _>>()?;
    let mut entries: Vec<LutEntry> = solutions
        .into_iter()
        .enumerate()
        .map(|(k, s)| LutEntry { nu: nu_of(k), bits: s.pattern, achieved: s.achieved, residual: s.residual })
        .collect();

    let mut failed = Vec::new();
    for k in 1..n_nu {
        if entries[k].achieved >= entries[k - 1].achieved {
            continue;
        }
        log::debug!("LUT entry {k} not monotone, repairing");
        match repair_entry(model, cfg, &entries[k - 1], entries[k].nu, k) {
            Some(s) => {
                entries[k] = LutEntry { nu: entries[k].nu, bits: s.pattern, achieved: s.achieved, residual: s.residual }
            }
            None => failed.push(k),
        }
    }
    if !failed.is_empty() {
        return Err(InputMapError::MonotonicRepair { entries: failed });
    }

    Ok(Lut {
        header: LutHeader {
            version: LUT_FORMAT_VERSION,
            n_t: model.n_t,
            n_nu,
            gamma_perp: model.gamma_perp,
            delta_y: model.delta_y,
            pitch: model.pitch,
            optics_hash: model.optics_hash.clone(),
            seed: cfg.seed,
        },
        entries,
    })
}

fn repair_entry(
    model: &TransversalModel,
    cfg: &OptimizerConfig,
    previous: &LutEntry,
    nu: f64,
    k: usize,
) -> Option<PatternSolution> {
    let floor = previous.achieved;
    for attempt in 0..cfg.repair_retries.max(1) {
        let mut rng = entry_rng(cfg.seed, k, attempt + 1);
        let mut bits = previous.bits.bits().to_vec();
        if attempt > 0 {
            // perturb the warm start on later attempts
            for b in bits.iter_mut() {
                if rng.random_bool(cfg.mutation_rate) {
                    *b = !*b;
                }
            }
        }
        let mut cand = Candidate::new(model, bits, nu);
        // greedy additions: switch on whichever pixel lowers the cost most
        loop {
            let mut best: Option<(f64, usize)> = None;
            for i in (0..model.n_t).filter(|&i| !cand.bits[i]) {
                let mut trial = cand.sums.clone();
                model.apply_flip(&mut trial, i, true);
                let c = model.objective_from_sums(&trial, nu);
                if c < cand.cost && best.is_none_or(|b| c < b.0) {
                    best = Some((c, i));
                }
            }
            let Some((_, i)) = best else { break };
            cand.bits[i] = true;
            cand = Candidate::new(model, cand.bits, nu);
        }
        polish(model, &mut cand, nu, cfg.max_iterations, Some(floor));
        let s = finish(model, cand.bits, nu);
        if s.achieved >= floor {
            return Some(s);
        }
    }
    None
}

impl Lut {
    pub fn n_nu(&self) -> usize {
        self.entries.len()
    }

    /// Nearest quantization index, ties to the lower index.
    pub fn nearest_index(&self, nu: f64) -> usize {
        let x = nu * (self.entries.len() - 1) as f64;
        let lo = x.floor();
        let k = if x - lo > 0.5 { lo + 1.0 } else { lo };
        (k.max(0.0) as usize).min(self.entries.len() - 1)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("LUT serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, InputMapError> {
        let lut: Lut = serde_json::from_str(s).map_err(|e| InputMapError::Malformed(e.to_string()))?;
        lut.validate()?;
        Ok(lut)
    }

    pub fn validate(&self) -> Result<(), InputMapError> {
        let h = &self.header;
        if h.n_nu != self.entries.len() || h.n_nu < 2 {
            return Err(InputMapError::Malformed(format!(
                "header n_nu {} but {} entries",
                h.n_nu,
                self.entries.len()
            )));
        }
        if let Some(e) = self.entries.iter().find(|e| e.bits.len() != h.n_t) {
            return Err(InputMapError::Malformed(format!("entry nu={} has {} bits, expected {}", e.nu, e.bits.len(), h.n_t)));
        }
        Ok(())
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    /// Largest `|achieved - ν|` over the table.
    pub fn max_entry_error(&self) -> f64 {
        self.entries.iter().map(|e| (e.achieved - e.nu).abs()).fold(0.0, f64::max)
    }
}

/// Assemble the full DMD pattern for a virtual input sampled at column centres.
pub fn map_virtual_input(nu: &RealField1D, lut: &Lut) -> Result<DmdPattern, InputMapError> {
    let n_t = lut.header.n_t;
    let mut pattern = DmdPattern::zeros(n_t, nu.grid().len());
    for (j, &v) in nu.values().iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(InputMapError::InputOutOfRange { column: j, value: v });
        }
        let entry = &lut.entries[lut.nearest_index(v)];
        for (i, &b) in entry.bits.bits().iter().enumerate() {
            pattern.set(i, j, b);
        }
    }
    Ok(pattern)
}

/// Recover the quantized virtual input of a pattern built from `lut`.
pub fn invert_pattern(pattern: &DmdPattern, lut: &Lut) -> Result<RealField1D, InputMapError> {
    if pattern.n_t() != lut.header.n_t {
        return Err(InputMapError::RowMismatch { expected: lut.header.n_t, got: pattern.n_t() });
    }
    let mut index: HashMap<&[bool], f64> = HashMap::new();
    for e in &lut.entries {
        index.entry(e.bits.bits()).or_insert(e.nu);
    }
    let values = (0..pattern.n_l())
        .map(|j| {
            let col = pattern.column(j);
            index.get(col.as_slice()).copied().ok_or(InputMapError::NotInvertible { column: j })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let grid = crate::field::SpatialGrid1D::with_spacing(lut.header.pitch, pattern.n_l())?;
    Ok(RealField1D::new(grid, values)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SpatialGrid1D;

    fn model(n_t: usize) -> TransversalModel {
        TransversalModel::new(&PsfModel::default(), &BeamProfile::default(), n_t, 1.0, 0.3, 4.0).unwrap()
    }

    fn quick_cfg() -> OptimizerConfig {
        OptimizerConfig { population: 40, generations: 40, ..OptimizerConfig::default() }
    }

    #[test]
    fn field_extremes() {
        let psf = PsfModel::default();
        let beam = BeamProfile::default();
        for &y in &[-3.0, 0.0, 2.5] {
            assert_eq!(transversal_field(&TransversalPattern::zeros(100), &psf, &beam, 1.0, y), 0.0);
        }
        let one = transversal_field(&TransversalPattern::ones(100), &psf, &beam, 1.0, 0.0);
        assert!((one - 1.0).abs() < 1e-15);
    }

    #[test]
    fn alternating_pattern_is_about_half() {
        let psf = PsfModel::default();
        let beam = BeamProfile::default();
        let bits: Vec<bool> = (0..100).map(|i| i % 2 == 0).collect();
        let p = TransversalPattern::new(bits.clone());
        let got = transversal_field(&p, &psf, &beam, 1.0, 0.0);
        // direct quadrature oracle over the union of on-pixels, fine midpoint rule
        let mut on = 0.0;
        let mut all = 0.0;
        for i in 0..100 {
            let c = pixel_center(i, 100, 1.0);
            let mut s = 0.0;
            for q in 0..400 {
                let xi = c - 0.5 + (q as f64 + 0.5) / 400.0;
                s += psf.g_y(-xi) * beam.p_y(xi) / 400.0;
            }
            all += s;
            if bits[i] {
                on += s;
            }
        }
        assert!((got - on / all).abs() < 1e-5);
        assert!((got - 0.5).abs() < 0.05);
    }

    #[test]
    fn model_matches_direct_field() {
        let m = model(100);
        let bits: Vec<bool> = (0..100).map(|i| (i * 37) % 11 < 5).collect();
        let direct = transversal_field(&TransversalPattern::new(bits.clone()), &PsfModel::default(), &BeamProfile::default(), 1.0, 0.0);
        assert!((m.field_at_center(&bits) - direct).abs() < 1e-14);
        assert_eq!(m.band_points(), 9);
    }

    #[test]
    fn solve_zero_and_one() {
        let m = model(100);
        let s0 = solve_pattern(0.0, &quick_cfg(), &m).unwrap();
        assert!(s0.pattern.bits().iter().all(|&b| !b));
        assert_eq!(s0.residual, 0.0);
        let s1 = solve_pattern(1.0, &quick_cfg(), &m).unwrap();
        assert!(s1.pattern.bits().iter().all(|&b| b));
        assert!((s1.achieved - 1.0).abs() < 1e-15);
        assert!(s1.residual > 0.0);
        assert!(solve_pattern(1.5, &quick_cfg(), &m).is_err());
    }

    #[test]
    fn solve_half_is_accurate_and_deterministic() {
        let m = model(100);
        let cfg = OptimizerConfig::default();
        let a = solve_pattern(0.5, &cfg, &m).unwrap();
        let b = solve_pattern(0.5, &cfg, &m).unwrap();
        assert_eq!(a, b);
        assert!((a.achieved - 0.5).abs() <= 0.05 / 50.0, "achieved {}", a.achieved);
        assert!((a.residual - m.objective(a.pattern.bits(), 0.5)).abs() < 1e-12);
    }

    #[test]
    fn local_search_variant_runs() {
        let m = model(60);
        let cfg = OptimizerConfig { algorithm: Algorithm::BitflipLocalSearch, population: 4, ..OptimizerConfig::default() };
        let s = solve_pattern(0.3, &cfg, &m).unwrap();
        assert!((s.achieved - 0.3).abs() < 0.01);
    }

    #[test]
    fn two_entry_lut_is_extremes() {
        let m = model(50);
        let lut = build_lut(2, &quick_cfg(), &m).unwrap();
        assert!(lut.entries[0].bits.bits().iter().all(|&b| !b));
        assert!(lut.entries[1].bits.bits().iter().all(|&b| b));
        assert!(build_lut(1, &quick_cfg(), &m).is_err());
    }

    #[test]
    fn nearest_index_ties_go_low() {
        let m = model(20);
        let lut = build_lut(3, &quick_cfg(), &m).unwrap();
        assert_eq!(lut.nearest_index(0.25), 0);
        assert_eq!(lut.nearest_index(0.2500001), 1);
        assert_eq!(lut.nearest_index(0.75), 1);
        assert_eq!(lut.nearest_index(1.0), 2);
    }

    #[test]
    fn lut_json_round_trip_is_exact() {
        let m = model(30);
        let lut = build_lut(6, &quick_cfg(), &m).unwrap();
        let back = Lut::from_json(&lut.to_json()).unwrap();
        assert_eq!(lut, back);
        assert_eq!(lut.to_json(), back.to_json());
        assert!(Lut::from_json("{\"header\":1}").is_err());
    }

    #[test]
    fn map_and_invert() {
        let m = model(30);
        let lut = build_lut(11, &quick_cfg(), &m).unwrap();
        let cols = SpatialGrid1D::with_spacing(1.0, 8).unwrap();
        let zero = map_virtual_input(&RealField1D::zeros(cols), &lut).unwrap();
        assert_eq!(zero.count_on(), 0);
        assert!(invert_pattern(&zero, &lut).unwrap().values().iter().all(|&v| v == 0.0));

        let nu = RealField1D::new(cols, vec![0.0, 0.1, 0.5, 0.7, 1.0, 0.3, 0.3, 0.9]).unwrap();
        let p = map_virtual_input(&nu, &lut).unwrap();
        let back = invert_pattern(&p, &lut).unwrap();
        for (a, b) in nu.values().iter().zip(back.values()) {
            assert!((a - b).abs() < 1e-15);
        }

        let mut broken = p.clone();
        broken.set(0, 2, !broken.get(0, 2));
        // flipping one bit of an interior entry leaves the LUT image
        assert!(matches!(invert_pattern(&broken, &lut), Err(InputMapError::NotInvertible { column: 2 })));

        let bad = RealField1D::new(cols, vec![0.0, 0.1, 1.1, 0.7, 1.0, 0.3, 0.3, 0.9]).unwrap();
        assert!(matches!(map_virtual_input(&bad, &lut), Err(InputMapError::InputOutOfRange { column: 2, .. })));
    }
}
