//! Scripted sweep pipelines that regenerate the headline quantitative
//! studies at desk scale and emit plot-ready CSV tables: the detuning
//! sweep, the QSL surface over dressing strength, the optical blockade
//! sweep, and the robust-control comparison.
//!
//! Every pipeline is deterministic: all randomness is derived from the
//! run seed and the grid-point index, grid points may be computed on any
//! number of workers, and rows are always assembled in grid order.
//! Per-point results are checkpointed as JSON so a killed sweep resumes
//! without recomputation and reproduces identical output.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dressed::{
    detuning_where_j_equals, dress_pair, dress_single, entangling_energy,
    strong_dressing_asymptotics, weak_dressing_asymptotics, Blockade, DressingParams,
};
use crate::error::{Error, Result};
use crate::grape::{
    derive_seed, optimize_waveform, qsl_search, ControlProblem, OptimizeOptions, QslOptions,
};
use crate::metrics::{cz_fidelity, decay_limited_fidelity, DecayMethod};
use crate::propagator::{propagate, GateSystem, PhaseWaveform, DEFAULT_SUBSTEPS};
use crate::robust::{
    optimize_robust, sensitivity_scan, EnsembleSpec, ScanAxis, SensitivityCurve,
};
use crate::units::{angular_to_mhz, mhz_to_angular};

/// Axis scaling of a sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridScale {
    Linear,
    Log,
}

/// One named sweep axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridAxis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub scale: GridScale,
}

impl GridAxis {
    pub fn linear(name: &str, min: f64, max: f64, count: usize) -> Self {
        GridAxis { name: name.into(), min, max, count, scale: GridScale::Linear }
    }

    pub fn log(name: &str, min: f64, max: f64, count: usize) -> Self {
        GridAxis { name: name.into(), min, max, count, scale: GridScale::Log }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::ConfigInvalid { field: self.name.clone(), reason };
        if self.count < 2 {
            return Err(bad(format!("axis needs >= 2 points, got {}", self.count)));
        }
        if !(self.min < self.max) {
            return Err(bad(format!("need min < max, got [{}, {}]", self.min, self.max)));
        }
        if self.scale == GridScale::Log && self.min <= 0.0 {
            return Err(bad("log axis needs min > 0".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.count;
        (0..n)
            .map(|i| {
                let f = i as f64 / (n - 1) as f64;
                match self.scale {
                    GridScale::Linear => self.min + f * (self.max - self.min),
                    GridScale::Log => self.min * (self.max / self.min).powf(f),
                }
            })
            .collect()
    }
}

/// Cartesian product of named axes, row-major (last axis fastest).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepGrid {
    pub axes: Vec<GridAxis>,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::ConfigInvalid {
                field: "grid".into(),
                reason: "sweep grid needs at least one axis".into(),
            });
        }
        for a in &self.axes {
            a.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        let per_axis: Vec<Vec<f64>> = self.axes.iter().map(|a| a.values()).collect();
        let mut out = Vec::with_capacity(self.len());
        let mut idx = vec![0usize; per_axis.len()];
        loop {
            out.push(idx.iter().zip(&per_axis).map(|(&i, vals)| vals[i]).collect());
            // Increment row-major: last axis fastest.
            let mut k = per_axis.len();
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < per_axis[k].len() {
                    break;
                }
                idx[k] = 0;
                if k == 0 {
                    return out;
                }
            }
        }
    }
}

/// Where a pipeline persists checkpoints and tables. With `dir = None`
/// everything stays in memory.
#[derive(Debug, Clone, Default)]
pub struct SweepIo {
    pub dir: Option<PathBuf>,
    pub resume: bool,
}

impl SweepIo {
    pub fn in_dir<P: AsRef<Path>>(dir: P, resume: bool) -> Self {
        SweepIo { dir: Some(dir.as_ref().to_path_buf()), resume }
    }

    fn checkpoint_path(&self, pipeline: &str, index: usize) -> Option<PathBuf> {
        self.dir
            .as_ref()
            .map(|d| d.join("checkpoints").join(format!("{pipeline}_{index:05}.json")))
    }

    fn load_checkpoint<T: DeserializeOwned>(&self, pipeline: &str, index: usize) -> Option<T> {
        if !self.resume {
            return None;
        }
        let path = self.checkpoint_path(pipeline, index)?;
        let bytes = std::fs::read(path).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    fn store_checkpoint<T: Serialize>(&self, pipeline: &str, index: usize, row: &T) -> Result<()> {
        let Some(path) = self.checkpoint_path(pipeline, index) else {
            return Ok(());
        };
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_vec_pretty(row)?)?;
        std::fs::rename(&tmp, &path)?;
        Ok(())
    }
}

/// Run `work` over every index in `0..n`, honoring checkpoints, in
/// parallel, assembling results in grid order.
fn run_points<T>(
    n: usize,
    pipeline: &str,
    io: &SweepIo,
    work: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<T>>
where
    T: Serialize + DeserializeOwned + Send,
{
    let rows: Vec<Result<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            if let Some(row) = io.load_checkpoint::<T>(pipeline, i) {
                return Ok(row);
            }
            let row = work(i)?;
            io.store_checkpoint(pipeline, i, &row)?;
            Ok(row)
        })
        .collect();
    rows.into_iter().collect()
}

fn write_table<P: AsRef<Path>>(path: P, content: &str) -> Result<()> {
    if let Some(parent) = path.as_ref().parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, content)?;
    Ok(())
}

fn fmt(x: f64) -> String {
    format!("{x:.12e}")
}

/// Heuristic QSL bracket for a microwave gate: the larger of the
/// entangling-phase bound π/J and the weak-dressing spin-flip bound
/// 1.11·(2π/Ω_μw), padded on both sides. The search extends it if needed.
fn mw_tau_bounds(params: &DressingParams) -> Result<(f64, f64)> {
    let j = entangling_energy(params)?.abs().max(1e-6);
    let spin_flip = 1.11 * std::f64::consts::TAU / params.omega_mw_ang().max(1e-9);
    let guess = (std::f64::consts::PI / j).max(spin_flip);
    Ok((0.45 * guess, 2.2 * guess))
}

// ---------------------------------------------------------------------
// Detuning sweep
// ---------------------------------------------------------------------

/// Configuration of the detuning sweep: dressed-state analytics, QSL and
/// decay-limited fidelity per laser detuning.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetuningSweepConfig {
    pub omega_l: f64,
    pub omega_mw: f64,
    /// Decay rate used for the F_r column (1/μs).
    pub gamma_r: f64,
    /// Detunings in MHz; a default grid spans [−15, 0].
    pub deltas: Vec<f64>,
    pub n_segments: usize,
    pub epsilon: f64,
    pub optimize: OptimizeOptions,
}

impl DetuningSweepConfig {
    pub fn desk_scale(seed: u64) -> Self {
        DetuningSweepConfig {
            omega_l: 10.0,
            omega_mw: 1.0,
            gamma_r: 1.0 / 150.0,
            deltas: GridAxis::linear("delta_l_mhz", -15.0, 0.0, 25).values(),
            n_segments: 40,
            epsilon: 1e-4,
            optimize: OptimizeOptions { seed, ..Default::default() },
        }
    }
}

/// One row of the detuning sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetuningPoint {
    pub delta_l_mhz: f64,
    pub j_mhz: f64,
    pub omega_mw_eff_mhz: f64,
    pub omega_mw_eff_prime_mhz: f64,
    pub gamma_eff_over_gamma_r: f64,
    pub gamma_eff_2_over_gamma_r: f64,
    pub tau_star_us: f64,
    pub t_r_us: f64,
    pub fidelity: f64,
    /// Decay-limited fidelity 1 − Γ_r·T_r.
    pub f_r: f64,
}

pub fn run_detuning_sweep(
    config: &DetuningSweepConfig,
    io: &SweepIo,
) -> Result<Vec<DetuningPoint>> {
    let rows = run_points(config.deltas.len(), "detuning", io, |i| {
        let delta = config.deltas[i];
        let mut params = DressingParams::new(config.omega_l, delta, config.omega_mw, 0.0);
        // The closed forms use Γ_r = 1 so the ratio columns come out
        // directly.
        params.gamma_r = 1.0;
        let atom = dress_single(&params);
        let pair = dress_pair(&params)?;
        params.gamma_r = 0.0;

        let mut qopts = QslOptions {
            epsilon: config.epsilon,
            optimize: config.optimize,
            ..Default::default()
        };
        qopts.optimize.seed = derive_seed(config.optimize.seed, 3, i as u64);
        let problem = ControlProblem::new(GateSystem::microwave(params), config.n_segments, 1.0);
        let qsl = qsl_search(&problem, mw_tau_bounds(&params)?, &qopts)?;
        let record = propagate(&problem.system, &qsl.waveform, DEFAULT_SUBSTEPS)?;
        Ok(DetuningPoint {
            delta_l_mhz: delta,
            j_mhz: angular_to_mhz(pair.j),
            omega_mw_eff_mhz: angular_to_mhz(atom.omega_mw_eff),
            omega_mw_eff_prime_mhz: angular_to_mhz(pair.omega_mw_eff_prime),
            gamma_eff_over_gamma_r: atom.gamma_eff,
            gamma_eff_2_over_gamma_r: pair.gamma_eff_2,
            tau_star_us: qsl.tau_star,
            t_r_us: record.t_r,
            fidelity: qsl.fidelity,
            f_r: decay_limited_fidelity(&record, config.gamma_r, DecayMethod::TrEstimate)?,
        })
    })?;
    if let Some(dir) = &io.dir {
        write_table(dir.join("detuning_sweep.csv"), &detuning_csv(config, &rows)?)?;
    }
    Ok(rows)
}

pub fn detuning_csv(config: &DetuningSweepConfig, rows: &[DetuningPoint]) -> Result<String> {
    let mut out = String::new();
    out.push_str(&format!("# params: {}\n", serde_json::to_string(config)?));
    out.push_str(
        "delta_l_mhz,j_mhz,omega_mw_eff_mhz,omega_mw_eff_prime_mhz,\
         gamma_eff_over_gamma_r,gamma_eff_2_over_gamma_r,tau_star_us,t_r_us,fidelity,f_r\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            fmt(r.delta_l_mhz),
            fmt(r.j_mhz),
            fmt(r.omega_mw_eff_mhz),
            fmt(r.omega_mw_eff_prime_mhz),
            fmt(r.gamma_eff_over_gamma_r),
            fmt(r.gamma_eff_2_over_gamma_r),
            fmt(r.tau_star_us),
            fmt(r.t_r_us),
            fmt(r.fidelity),
            fmt(r.f_r),
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// QSL surface
// ---------------------------------------------------------------------

/// Configuration of the τ*(Ω_L/Ω_μw, Δ_L/Ω_L) surface.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceConfig {
    pub omega_mw: f64,
    /// Ω_L/Ω_μw values (outer, slow axis).
    pub ratio_axis: GridAxis,
    /// Δ_L/Ω_L values, ≤ 0 (inner, fast axis).
    pub detuning_axis: GridAxis,
    pub n_segments: usize,
    pub epsilon: f64,
    pub optimize: OptimizeOptions,
}

impl SurfaceConfig {
    pub fn desk_scale(seed: u64) -> Self {
        SurfaceConfig {
            omega_mw: 1.0,
            ratio_axis: GridAxis::log("omega_l_over_omega_mw", 1.0, 16.0, 8),
            detuning_axis: GridAxis::linear("delta_l_over_omega_l", -1.75, 0.0, 8),
            n_segments: 40,
            epsilon: 1e-4,
            optimize: OptimizeOptions { seed, ..Default::default() },
        }
    }
}

/// One grid point of the QSL surface, with the weak/strong-dressing
/// asymptotic overlays evaluated at the same Ω_L.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub ratio: f64,
    pub delta_over_omega: f64,
    pub omega_l_mhz: f64,
    pub delta_l_mhz: f64,
    pub j_mhz: f64,
    pub tau_star_us: f64,
    pub t_r_us: f64,
    pub fidelity: f64,
    pub tau_wdr_us: f64,
    pub t_r_wdr_us: f64,
    pub tau_sdr_us: f64,
    pub t_r_sdr_us: f64,
    /// Set when the QSL search failed at this point.
    pub error: Option<String>,
}

pub fn run_qsl_surface(config: &SurfaceConfig, io: &SweepIo) -> Result<Vec<SurfacePoint>> {
    config.ratio_axis.validate()?;
    config.detuning_axis.validate()?;
    let grid = SweepGrid { axes: vec![config.ratio_axis.clone(), config.detuning_axis.clone()] };
    let points = grid.points();
    let rows = run_points(points.len(), "surface", io, |i| {
        let ratio = points[i][0];
        let frac = points[i][1];
        let omega_l = ratio * config.omega_mw;
        let delta_l = frac * omega_l;
        let params = DressingParams::new(omega_l, delta_l, config.omega_mw, 0.0);
        let wdr = weak_dressing_asymptotics(omega_l, config.omega_mw);
        let sdr = strong_dressing_asymptotics(omega_l);
        let j = entangling_energy(&params)?;
        let mut row = SurfacePoint {
            ratio,
            delta_over_omega: frac,
            omega_l_mhz: omega_l,
            delta_l_mhz: delta_l,
            j_mhz: angular_to_mhz(j),
            tau_star_us: f64::NAN,
            t_r_us: f64::NAN,
            fidelity: f64::NAN,
            tau_wdr_us: 1.11 * std::f64::consts::TAU / mhz_to_angular(config.omega_mw),
            t_r_wdr_us: wdr.t_r_wdr,
            tau_sdr_us: sdr.tau_limit,
            t_r_sdr_us: sdr.t_r_sdr,
            error: None,
        };
        let mut qopts = QslOptions {
            epsilon: config.epsilon,
            optimize: config.optimize,
            ..Default::default()
        };
        qopts.optimize.seed = derive_seed(config.optimize.seed, 4, i as u64);
        let problem = ControlProblem::new(GateSystem::microwave(params), config.n_segments, 1.0);
        match mw_tau_bounds(&params).and_then(|b| qsl_search(&problem, b, &qopts)) {
            Ok(qsl) => {
                let record = propagate(&problem.system, &qsl.waveform, DEFAULT_SUBSTEPS)?;
                row.tau_star_us = qsl.tau_star;
                row.t_r_us = record.t_r;
                row.fidelity = qsl.fidelity;
            }
            // Per-point failures are recorded, not fatal.
            Err(e) => row.error = Some(e.to_string()),
        }
        Ok(row)
    })?;
    if let Some(dir) = &io.dir {
        write_table(dir.join("qsl_surface.csv"), &surface_csv(config, &rows)?)?;
    }
    Ok(rows)
}

pub fn surface_csv(config: &SurfaceConfig, rows: &[SurfacePoint]) -> Result<String> {
    let mut out = String::new();
    out.push_str(&format!("# params: {}\n", serde_json::to_string(config)?));
    out.push_str(
        "ratio,delta_over_omega,omega_l_mhz,delta_l_mhz,j_mhz,tau_star_us,t_r_us,fidelity,\
         tau_wdr_us,t_r_wdr_us,tau_sdr_us,t_r_sdr_us,error\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt(r.ratio),
            fmt(r.delta_over_omega),
            fmt(r.omega_l_mhz),
            fmt(r.delta_l_mhz),
            fmt(r.j_mhz),
            fmt(r.tau_star_us),
            fmt(r.t_r_us),
            fmt(r.fidelity),
            fmt(r.tau_wdr_us),
            fmt(r.t_r_wdr_us),
            fmt(r.tau_sdr_us),
            fmt(r.t_r_sdr_us),
            r.error.as_deref().unwrap_or(""),
        ));
    }
    Ok(out)
}

/// The detuning (MHz) on the J = Ω_μw contour at a given Ω_L, if the
/// resonant peak allows it.
pub fn contour_detuning(omega_l_mhz: f64, omega_mw_mhz: f64) -> Option<f64> {
    detuning_where_j_equals(omega_l_mhz, omega_mw_mhz)
}

// ---------------------------------------------------------------------
// Optical blockade sweep
// ---------------------------------------------------------------------

/// Configuration of the optical-control QSL sweep over blockade strength.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpticalSweepConfig {
    pub omega_l: f64,
    /// V_rr/Ω_L ratios, typically log-spaced over [0.1, 100].
    pub ratios: Vec<f64>,
    pub n_segments: usize,
    pub epsilon: f64,
    pub optimize: OptimizeOptions,
}

impl OpticalSweepConfig {
    pub fn desk_scale(seed: u64) -> Self {
        OpticalSweepConfig {
            omega_l: 1.0,
            ratios: GridAxis::log("v_rr_over_omega_l", 0.1, 100.0, 15).values(),
            n_segments: 40,
            epsilon: 1e-4,
            optimize: OptimizeOptions { seed, ..Default::default() },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpticalPoint {
    pub v_rr_over_omega_l: f64,
    pub tau_star_us: f64,
    /// τ*·Ω_L, dimensionless (Ω_L angular).
    pub tau_star_omega: f64,
    pub t_r_us: f64,
    pub fidelity: f64,
    pub error: Option<String>,
}

pub fn run_optical_blockade_sweep(
    config: &OpticalSweepConfig,
    io: &SweepIo,
) -> Result<Vec<OpticalPoint>> {
    let omega_ang = mhz_to_angular(config.omega_l);
    let rows = run_points(config.ratios.len(), "optical", io, |i| {
        let ratio = config.ratios[i];
        let v_rr = Blockade::Finite(ratio * config.omega_l);
        let system = GateSystem::optical(config.omega_l, 0.0, v_rr, 0.0);
        // Strong blockade saturates near τ·Ω_L ≈ 7.6; weak blockade needs
        // τ ≈ π/V_rr of entangling phase.
        let guess = (7.0 / omega_ang).max(std::f64::consts::PI / (ratio * omega_ang));
        let mut row = OpticalPoint {
            v_rr_over_omega_l: ratio,
            tau_star_us: f64::NAN,
            tau_star_omega: f64::NAN,
            t_r_us: f64::NAN,
            fidelity: f64::NAN,
            error: None,
        };
        let mut qopts = QslOptions {
            epsilon: config.epsilon,
            optimize: config.optimize,
            ..Default::default()
        };
        qopts.optimize.seed = derive_seed(config.optimize.seed, 5, i as u64);
        let problem = ControlProblem::new(system, config.n_segments, 1.0);
        match qsl_search(&problem, (0.45 * guess, 2.2 * guess), &qopts) {
            Ok(qsl) => {
                let record = propagate(&system, &qsl.waveform, DEFAULT_SUBSTEPS)?;
                row.tau_star_us = qsl.tau_star;
                row.tau_star_omega = qsl.tau_star * omega_ang;
                row.t_r_us = record.t_r;
                row.fidelity = qsl.fidelity;
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        Ok(row)
    })?;
    if let Some(dir) = &io.dir {
        write_table(dir.join("optical_sweep.csv"), &optical_csv(config, &rows)?)?;
    }
    Ok(rows)
}

pub fn optical_csv(config: &OpticalSweepConfig, rows: &[OpticalPoint]) -> Result<String> {
    let mut out = String::new();
    out.push_str(&format!("# params: {}\n", serde_json::to_string(config)?));
    out.push_str("v_rr_over_omega_l,tau_star_us,tau_star_omega,t_r_us,fidelity,error\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt(r.v_rr_over_omega_l),
            fmt(r.tau_star_us),
            fmt(r.tau_star_omega),
            fmt(r.t_r_us),
            fmt(r.fidelity),
            r.error.as_deref().unwrap_or(""),
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// Robust comparison
// ---------------------------------------------------------------------

/// Configuration of the robust-vs-optimal comparison: optimize both
/// waveforms, then scan each against common-Rabi and single-atom-detuning
/// perturbations with and without decay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobustComparisonConfig {
    pub omega_l: f64,
    pub delta_l: f64,
    pub omega_mw: f64,
    pub gamma_r: f64,
    pub n_segments: usize,
    /// Gate time of the non-robust reference; `None` runs a QSL search.
    pub tau_optimal: Option<f64>,
    /// Robust gate time as a multiple of the reference (longer gates buy
    /// robustness).
    pub tau_factor: f64,
    pub ensemble: EnsembleSpec,
    /// Common Rabi factors for the sensitivity scan.
    pub omega_grid: Vec<f64>,
    /// Detuning offsets (MHz) on atom 1 for the sensitivity scan.
    pub delta_grid: Vec<f64>,
    pub epsilon: f64,
    pub optimize: OptimizeOptions,
}

impl RobustComparisonConfig {
    pub fn desk_scale(seed: u64) -> Self {
        RobustComparisonConfig {
            omega_l: 10.0,
            delta_l: -5.9,
            omega_mw: 1.0,
            gamma_r: 1.0 / 150.0,
            n_segments: 60,
            tau_optimal: None,
            tau_factor: 1.5,
            ensemble: EnsembleSpec::two_percent_rabi(),
            omega_grid: GridAxis::linear("omega_factor", 0.96, 1.04, 33).values(),
            delta_grid: GridAxis::linear("delta_offset", -0.6, 0.6, 33).values(),
            epsilon: 1e-4,
            optimize: OptimizeOptions { seed, ..Default::default() },
        }
    }
}

/// Everything the robust comparison produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobustComparison {
    pub tau_optimal_us: f64,
    pub tau_robust_us: f64,
    pub optimal_waveform: PhaseWaveform,
    pub robust_waveform: PhaseWaveform,
    /// Nominal unitary fidelities.
    pub optimal_fidelity: f64,
    pub robust_fidelity: f64,
    /// Nominal decay-included fidelities.
    pub optimal_fidelity_decay: f64,
    pub robust_fidelity_decay: f64,
    /// Ensemble-averaged fidelity of each waveform.
    pub optimal_ensemble_fidelity: f64,
    pub robust_ensemble_fidelity: f64,
    pub scans: Vec<LabeledCurve>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledCurve {
    /// "optimal" or "robust".
    pub waveform: String,
    pub curve: SensitivityCurve,
}

pub fn run_robust_comparison(
    config: &RobustComparisonConfig,
    io: &SweepIo,
) -> Result<RobustComparison> {
    let mut params =
        DressingParams::new(config.omega_l, config.delta_l, config.omega_mw, config.gamma_r);
    params.gamma_r = config.gamma_r;
    let unitary = GateSystem::microwave(params).with_gamma(0.0);

    // Reference (non-robust) gate at its speed limit.
    let tau_optimal = match config.tau_optimal {
        Some(t) => t,
        None => {
            let mut qopts = QslOptions {
                epsilon: config.epsilon,
                optimize: config.optimize,
                ..Default::default()
            };
            qopts.optimize.seed = derive_seed(config.optimize.seed, 6, 0);
            let problem = ControlProblem::new(unitary, config.n_segments, 1.0);
            qsl_search(&problem, mw_tau_bounds(&params)?, &qopts)?.tau_star
        }
    };
    let mut opt_opts = config.optimize;
    opt_opts.seed = derive_seed(config.optimize.seed, 6, 1);
    opt_opts.epsilon_f = opt_opts.epsilon_f.min(1e-7);
    let problem_opt = ControlProblem::new(unitary, config.n_segments, tau_optimal);
    let optimal = optimize_waveform(&problem_opt, None, &opt_opts)?;

    // Robust gate: longer, optimized on the ensemble average.
    let tau_robust = config.tau_factor * tau_optimal;
    let mut rob_opts = config.optimize;
    rob_opts.seed = derive_seed(config.optimize.seed, 6, 2);
    rob_opts.epsilon_f = rob_opts.epsilon_f.min(1e-8);
    let problem_rob = ControlProblem::new(unitary, config.n_segments, tau_robust);
    let robust = optimize_robust(&config.ensemble, &problem_rob, None, &rob_opts)?;

    let scan_problem = |tau: f64| {
        let mut p = ControlProblem::new(GateSystem::microwave(params), config.n_segments, tau);
        p.system = GateSystem::microwave(params); // carries gamma_r for decay rows
        p
    };
    let mut scans = Vec::new();
    for (label, wf, tau) in [
        ("optimal", &optimal.waveform, tau_optimal),
        ("robust", &robust.waveform, tau_robust),
    ] {
        let problem = scan_problem(tau);
        for axis in [ScanAxis::OmegaLCommon, ScanAxis::DeltaL1] {
            let grid = match axis {
                ScanAxis::OmegaLCommon => &config.omega_grid,
                ScanAxis::DeltaL1 => &config.delta_grid,
            };
            scans.push(LabeledCurve {
                waveform: label.to_string(),
                curve: sensitivity_scan(wf, &problem, axis, grid)?,
            });
        }
    }

    let decay_fidelity = |wf: &PhaseWaveform| -> Result<f64> {
        let system = GateSystem::microwave(params);
        let rec = propagate(&system, wf, DEFAULT_SUBSTEPS)?;
        decay_limited_fidelity(&rec, config.gamma_r, DecayMethod::NonHermitian)
    };
    let unitary_fidelity = |wf: &PhaseWaveform| -> Result<f64> {
        let rec = propagate(&unitary, wf, DEFAULT_SUBSTEPS)?;
        Ok(cz_fidelity(&rec.u_comp)?.fidelity)
    };

    let problem_scan_opt = scan_problem(tau_optimal);
    let problem_scan_rob = scan_problem(tau_robust);
    let result = RobustComparison {
        tau_optimal_us: tau_optimal,
        tau_robust_us: tau_robust,
        optimal_fidelity: unitary_fidelity(&optimal.waveform)?,
        robust_fidelity: unitary_fidelity(&robust.waveform)?,
        optimal_fidelity_decay: decay_fidelity(&optimal.waveform)?,
        robust_fidelity_decay: decay_fidelity(&robust.waveform)?,
        optimal_ensemble_fidelity: crate::robust::ensemble_fidelity(
            &config.ensemble,
            &problem_scan_opt,
            &optimal.waveform,
        )?,
        robust_ensemble_fidelity: crate::robust::ensemble_fidelity(
            &config.ensemble,
            &problem_scan_rob,
            &robust.waveform,
        )?,
        optimal_waveform: optimal.waveform,
        robust_waveform: robust.waveform,
        scans,
    };

    if let Some(dir) = &io.dir {
        std::fs::create_dir_all(dir)?;
        result.optimal_waveform.save(dir.join("optimal.waveform"))?;
        result.robust_waveform.save(dir.join("robust.waveform"))?;
        for labeled in &result.scans {
            let name = format!("scan_{}_{}.csv", labeled.waveform, labeled.curve.axis.label());
            let mut buf = Vec::new();
            writeln!(buf, "# params: {}", serde_json::to_string(config)?)?;
            labeled.curve.write_csv(&mut buf)?;
            std::fs::write(dir.join(name), buf)?;
        }
        std::fs::write(
            dir.join("robust_comparison.json"),
            serde_json::to_vec_pretty(&result)?,
        )?;
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points_are_row_major() {
        let grid = SweepGrid {
            axes: vec![
                GridAxis::linear("a", 0.0, 1.0, 2),
                GridAxis::linear("b", 10.0, 30.0, 3),
            ],
        };
        assert!(grid.validate().is_ok());
        let pts = grid.points();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0], vec![0.0, 10.0]);
        assert_eq!(pts[1], vec![0.0, 20.0]);
        assert_eq!(pts[2], vec![0.0, 30.0]);
        assert_eq!(pts[3], vec![1.0, 10.0]);
        assert_eq!(pts[5], vec![1.0, 30.0]);
    }

    #[test]
    fn log_axis_is_geometric() {
        let axis = GridAxis::log("v", 0.1, 100.0, 4);
        let v = axis.values();
        assert!((v[0] - 0.1).abs() < 1e-12);
        assert!((v[3] - 100.0).abs() < 1e-9);
        assert!((v[1] / v[0] - v[2] / v[1]).abs() < 1e-9);
    }

    #[test]
    fn axis_validation_rejects_degenerate_grids() {
        assert!(GridAxis::linear("x", 0.0, 1.0, 1).validate().is_err());
        assert!(GridAxis::linear("x", 1.0, 0.0, 3).validate().is_err());
        assert!(GridAxis::log("x", 0.0, 1.0, 3).validate().is_err());
    }

    #[test]
    fn contour_helper_matches_operating_point() {
        let d = contour_detuning(10.0, 1.0).unwrap();
        assert!((d + 5.9).abs() < 0.01);
        assert!(contour_detuning(2.0, 1.0).is_none());
    }

    fn tiny_optical_config(seed: u64) -> OpticalSweepConfig {
        OpticalSweepConfig {
            omega_l: 1.0,
            ratios: vec![1.0, 10.0],
            n_segments: 24,
            epsilon: 1e-3,
            optimize: OptimizeOptions {
                seed,
                restarts: 2,
                max_iters: 200,
                ..Default::default()
            },
        }
    }

    #[test]
    fn optical_sweep_checkpoints_resume_and_reproduce() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_optical_config(3);
        let io = SweepIo::in_dir(dir.path(), true);
        let rows = run_optical_blockade_sweep(&config, &io).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert!(r.error.is_none());
            assert!(r.tau_star_omega > 3.0 && r.tau_star_omega < 20.0);
        }
        let csv1 = std::fs::read(dir.path().join("optical_sweep.csv")).unwrap();

        // Re-run: checkpoints short-circuit the computation and the CSV
        // is byte-identical.
        let rows2 = run_optical_blockade_sweep(&config, &io).unwrap();
        let csv2 = std::fs::read(dir.path().join("optical_sweep.csv")).unwrap();
        assert_eq!(csv1, csv2);
        assert_eq!(rows2.len(), 2);

        // Poison a checkpoint: with resume on, the stored row is trusted,
        // which proves the second run did not recompute it.
        let ck = dir.path().join("checkpoints").join("optical_00000.json");
        let mut row: OpticalPoint =
            serde_json::from_slice(&std::fs::read(&ck).unwrap()).unwrap();
        row.tau_star_omega = 123.0;
        std::fs::write(&ck, serde_json::to_vec_pretty(&row).unwrap()).unwrap();
        let rows3 = run_optical_blockade_sweep(&config, &io).unwrap();
        assert_eq!(rows3[0].tau_star_omega, 123.0);

        // Without resume the poisoned value is recomputed.
        let io_fresh = SweepIo::in_dir(dir.path(), false);
        let rows4 = run_optical_blockade_sweep(&config, &io_fresh).unwrap();
        assert!((rows4[0].tau_star_omega - rows[0].tau_star_omega).abs() < 1e-12);
    }

    #[test]
    fn in_memory_sweep_is_deterministic() {
        let config = tiny_optical_config(9);
        let a = run_optical_blockade_sweep(&config, &SweepIo::default()).unwrap();
        let b = run_optical_blockade_sweep(&config, &SweepIo::default()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.tau_star_us.to_bits(), y.tau_star_us.to_bits());
            assert_eq!(x.fidelity.to_bits(), y.fidelity.to_bits());
        }
    }
}
