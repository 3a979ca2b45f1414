//! Piecewise-constant propagation of the gate dynamics.
//!
//! A gate is driven by an N-segment phase waveform ξ(t) = ξ_i for
//! t ∈ [i·τ/N, (i+1)·τ/N). Each segment propagator is an exact matrix
//! exponential. Because the drive phase enters as H(ξ) = D(ξ)·H(0)·D(ξ)†
//! with D(ξ) = diag(e^{iξ·n_exc}), a single eigendecomposition of H(0)
//! per sector serves every segment and every sub-step sample.
//!
//! The computational states never couple to each other, so the gate
//! splits into independent sectors: |00> is inert (φ_00 = 0), |01> and
//! |10> evolve one active atom each, |11> evolves the pair manifold.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dressed::{Blockade, DressingParams};
use crate::error::{Error, Result};
use crate::hamiltonian::{
    mw_pair_sector, mw_single_sector, optical_pair_sector, optical_single_sector, AtomLaser,
    Basis, SectorOperators,
};
use crate::linalg::EigenSystem;
use crate::units::wrap_phase;

/// Default number of trajectory sub-steps per segment.
pub const DEFAULT_SUBSTEPS: usize = 32;

/// An N-segment piecewise-constant phase waveform over duration τ (μs).
/// Phases are unconstrained reals internally and are reduced to [0, 2π)
/// for file I/O.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseWaveform {
    pub tau: f64,
    pub phases: Vec<f64>,
}

impl PhaseWaveform {
    pub fn new(tau: f64, phases: Vec<f64>) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::ConfigInvalid {
                field: "tau".into(),
                reason: format!("duration must be positive and finite, got {tau}"),
            });
        }
        if phases.is_empty() {
            return Err(Error::ConfigInvalid {
                field: "phases".into(),
                reason: "waveform needs at least one segment".into(),
            });
        }
        if let Some(bad) = phases.iter().find(|p| !p.is_finite()) {
            return Err(Error::ConfigInvalid {
                field: "phases".into(),
                reason: format!("non-finite phase {bad}"),
            });
        }
        Ok(PhaseWaveform { tau, phases })
    }

    pub fn zeros(n: usize, tau: f64) -> Self {
        PhaseWaveform::new(tau, vec![0.0; n]).expect("valid constant waveform")
    }

    pub fn n_segments(&self) -> usize {
        self.phases.len()
    }

    /// Segment duration τ/N in μs.
    pub fn dt(&self) -> f64 {
        self.tau / self.phases.len() as f64
    }

    /// Linear resampling onto `n` segments (used to warm-start an
    /// optimization from a waveform of different resolution). Sample
    /// points sit at segment midpoints.
    pub fn resampled(&self, n: usize) -> PhaseWaveform {
        let m = self.phases.len();
        if n == m {
            return self.clone();
        }
        let phases = (0..n)
            .map(|i| {
                // midpoint of target segment i in source-segment units
                let x = (i as f64 + 0.5) * m as f64 / n as f64 - 0.5;
                if x <= 0.0 {
                    self.phases[0]
                } else if x >= (m - 1) as f64 {
                    self.phases[m - 1]
                } else {
                    let k = x.floor() as usize;
                    let f = x - k as f64;
                    self.phases[k] * (1.0 - f) + self.phases[k + 1] * f
                }
            })
            .collect();
        PhaseWaveform { tau: self.tau, phases }
    }

    /// Serialize in the plain-text exchange format: `N=`, `tau_us=`, then
    /// one wrapped phase per line at 17 significant digits.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "N={}", self.phases.len())?;
        writeln!(w, "tau_us={:.16e}", self.tau)?;
        for &p in &self.phases {
            writeln!(w, "{:.16e}", wrap_phase(p))?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = |line: Option<std::io::Result<String>>, key: &str| -> Result<String> {
            let line = line.ok_or_else(|| Error::WaveformFormat(format!("missing {key} line")))??;
            line.trim()
                .strip_prefix(key)
                .map(str::to_owned)
                .ok_or_else(|| Error::WaveformFormat(format!("expected `{key}...`, got `{line}`")))
        };
        let n: usize = header(lines.next(), "N=")?
            .parse()
            .map_err(|e| Error::WaveformFormat(format!("bad N: {e}")))?;
        let tau: f64 = header(lines.next(), "tau_us=")?
            .parse()
            .map_err(|e| Error::WaveformFormat(format!("bad tau_us: {e}")))?;
        let mut phases = Vec::with_capacity(n);
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            phases.push(
                t.parse::<f64>()
                    .map_err(|e| Error::WaveformFormat(format!("bad phase `{t}`: {e}")))?,
            );
        }
        if phases.len() != n {
            return Err(Error::WaveformFormat(format!(
                "expected {n} phases, found {}",
                phases.len()
            )));
        }
        PhaseWaveform::new(tau, phases)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_to(&mut f)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        PhaseWaveform::read_from(std::io::BufReader::new(f))
    }
}

/// Which computational initial state a propagation sector serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sector {
    S01,
    S10,
    S11,
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sector::S01 => "01",
            Sector::S10 => "10",
            Sector::S11 => "11",
        })
    }
}

/// The microwave-driven dressed gate on a (possibly asymmetric) atom
/// pair. The rotating frame and the drive are fixed by `nominal`; the
/// per-atom lasers may be perturbed away from it.
#[derive(Debug, Clone, Copy)]
pub struct MicrowaveSystem {
    pub nominal: DressingParams,
    pub atom1: AtomLaser,
    pub atom2: AtomLaser,
}

/// The optical-control baseline: a laser-phase-modulated gate on
/// {|0>, |1>, |r>} atoms.
#[derive(Debug, Clone, Copy)]
pub struct OpticalSystem {
    pub omega_l: f64,
    pub delta_l: f64,
    pub v_rr: Blockade,
    pub gamma_r: f64,
}

/// A gate problem: the physical system whose drive phase is modulated.
#[derive(Debug, Clone, Copy)]
pub enum GateSystem {
    Microwave(MicrowaveSystem),
    Optical(OpticalSystem),
}

impl GateSystem {
    /// Symmetric microwave gate at the given dressing parameters.
    pub fn microwave(params: DressingParams) -> Self {
        GateSystem::Microwave(MicrowaveSystem {
            nominal: params,
            atom1: AtomLaser::of(&params),
            atom2: AtomLaser::of(&params),
        })
    }

    pub fn optical(omega_l: f64, delta_l: f64, v_rr: Blockade, gamma_r: f64) -> Self {
        GateSystem::Optical(OpticalSystem { omega_l, delta_l, v_rr, gamma_r })
    }

    pub fn gamma_r(&self) -> f64 {
        match self {
            GateSystem::Microwave(m) => m.nominal.gamma_r,
            GateSystem::Optical(o) => o.gamma_r,
        }
    }

    /// The same system with a different decay rate (e.g. zero for the
    /// unitary reference propagation).
    pub fn with_gamma(&self, gamma_r: f64) -> Self {
        let mut out = *self;
        match &mut out {
            GateSystem::Microwave(m) => m.nominal.gamma_r = gamma_r,
            GateSystem::Optical(o) => o.gamma_r = gamma_r,
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            GateSystem::Microwave(m) => m.nominal.validate(),
            GateSystem::Optical(o) => {
                if !(o.omega_l.is_finite() && o.omega_l > 0.0) {
                    return Err(Error::ConfigInvalid {
                        field: "omega_l".into(),
                        reason: "optical drive must be positive".into(),
                    });
                }
                Ok(())
            }
        }
    }

    /// The propagation sectors in fixed order [01, 10, 11].
    pub fn sectors(&self) -> Vec<(Sector, SectorOperators)> {
        match self {
            GateSystem::Microwave(m) => {
                let g = m.nominal.gamma_r;
                vec![
                    (Sector::S01, mw_single_sector(&m.atom2, &m.nominal, g)),
                    (Sector::S10, mw_single_sector(&m.atom1, &m.nominal, g)),
                    (Sector::S11, mw_pair_sector(&m.atom1, &m.atom2, &m.nominal, g)),
                ]
            }
            GateSystem::Optical(o) => vec![
                (
                    Sector::S01,
                    optical_single_sector(o.omega_l, o.delta_l, o.gamma_r),
                ),
                (
                    Sector::S10,
                    optical_single_sector(o.omega_l, o.delta_l, o.gamma_r),
                ),
                (
                    Sector::S11,
                    optical_pair_sector(o.omega_l, o.delta_l, o.v_rr, o.gamma_r),
                ),
            ],
        }
    }
}

/// Propagation output for one sector.
#[derive(Debug, Clone)]
pub struct SectorRecord {
    pub sector: Sector,
    pub basis: Basis,
    pub u_total: Array2<C64>,
    pub u_segments: Vec<Array2<C64>>,
    /// Sample times, t = 0 through τ on the sub-step grid.
    pub times: Vec<f64>,
    /// Level populations |⟨b|ψ(t)⟩|², shape (n_times, dim).
    pub populations: Array2<f64>,
    /// ∫ Σ_b N_r(b)·pop_b dt over the gate.
    pub t_k: f64,
    pub final_state: Array1<C64>,
}

/// Full propagation output across the computational basis.
#[derive(Debug, Clone)]
pub struct GateRecord {
    /// Diagonal evolution operator on {|00>, |01>, |10>, |11>}.
    pub u_comp: Array2<C64>,
    pub sectors: Vec<SectorRecord>,
    /// Rydberg time (T_01 + T_10 + T_11)/4 in μs.
    pub t_r: f64,
    /// Final state norms for each computational initial state.
    pub norms: [f64; 4],
    /// Decay rate the propagation used.
    pub gamma_r: f64,
    pub tau: f64,
}

impl GateRecord {
    pub fn diagonal(&self, k: usize) -> C64 {
        self.u_comp[(k, k)]
    }

    pub fn u01(&self) -> C64 {
        self.diagonal(1)
    }

    pub fn u10(&self) -> C64 {
        self.diagonal(2)
    }

    pub fn u11(&self) -> C64 {
        self.diagonal(3)
    }

    pub fn sector(&self, s: Sector) -> Option<&SectorRecord> {
        self.sectors.iter().find(|r| r.sector == s)
    }
}

/// Apply the phase conjugation U(ξ) = D(ξ)·U(0)·D(ξ)† where the diagonal
/// phases are ξ times the excitation counter.
pub(crate) fn conjugate_by_phase(u0: &Array2<C64>, xi: f64, exc: &[u8]) -> Array2<C64> {
    let n = u0.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let dn = f64::from(exc[i]) - f64::from(exc[j]);
        u0[(i, j)] * C64::from_polar(1.0, xi * dn)
    })
}

/// Trajectory of one explicit initial state.
#[derive(Debug, Clone)]
pub struct SectorStateRecord {
    pub times: Vec<f64>,
    pub populations: Array2<f64>,
    pub t_k: f64,
    pub final_state: Array1<C64>,
}

/// Propagate explicit initial states of one sector through a waveform.
/// States must live on the sector basis.
pub fn propagate_states(
    ops: &SectorOperators,
    wf: &PhaseWaveform,
    initial_states: &[Array1<C64>],
    substeps: usize,
) -> Result<Vec<SectorStateRecord>> {
    let dim = ops.dim();
    for s in initial_states {
        if s.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: s.len() });
        }
    }
    let m = substeps.max(1);
    let dt = wf.dt();
    let sub = dt / m as f64;
    let eig = EigenSystem::new(&ops.hamiltonian(0.0));
    let u0 = eig.propagator(dt);
    let n_r = ops.rydberg_diag();
    let exc = &ops.basis.excitation;

    let n_samples = wf.n_segments() * m + 1;
    let mut out = Vec::with_capacity(initial_states.len());
    for psi0 in initial_states {
        let mut times = Vec::with_capacity(n_samples);
        let mut pops = Array2::<f64>::zeros((n_samples, dim));
        let mut psi = psi0.clone();
        record_pops(&mut pops, 0, &psi);
        times.push(0.0);
        let mut sample = 1;
        for (i, &xi) in wf.phases.iter().enumerate() {
            let u_i = conjugate_by_phase(&u0, xi, exc);
            // Coordinates of D(ξ)†·ψ in the eigenbasis of H(0); the
            // populations are insensitive to the reverse D(ξ) rotation.
            let rotated: Array1<C64> = psi
                .iter()
                .zip(exc)
                .map(|(&a, &e)| a * C64::from_polar(1.0, -xi * f64::from(e)))
                .collect();
            let coords = eig.to_eigenbasis(&rotated);
            for step in 1..=m {
                let t = step as f64 * sub;
                let evolved = eig.evolve_coords(&coords, t);
                record_pops(&mut pops, sample, &evolved);
                times.push(i as f64 * dt + t);
                sample += 1;
            }
            psi = u_i.dot(&psi);
        }
        let t_k = rydberg_quadrature(&times, &pops, &n_r);
        out.push(SectorStateRecord { times, populations: pops, t_k, final_state: psi });
    }
    Ok(out)
}

fn record_pops(pops: &mut Array2<f64>, row: usize, psi: &Array1<C64>) {
    for (b, amp) in psi.iter().enumerate() {
        pops[(row, b)] = amp.norm_sqr();
    }
}

fn rydberg_quadrature(times: &[f64], pops: &Array2<f64>, n_r: &Array1<f64>) -> f64 {
    let weighted: Vec<f64> = (0..times.len()).map(|k| pops.row(k).dot(n_r)).collect();
    let mut acc = 0.0;
    for k in 1..times.len() {
        acc += 0.5 * (weighted[k] + weighted[k - 1]) * (times[k] - times[k - 1]);
    }
    acc
}

/// Propagate the full gate: every computational sector of `system`
/// through `wf`, recording per-segment propagators, population
/// trajectories on `substeps` sub-steps per segment, and the integrated
/// Rydberg time.
pub fn propagate(system: &GateSystem, wf: &PhaseWaveform, substeps: usize) -> Result<GateRecord> {
    system.validate()?;
    let m = substeps.max(1);
    let mut sectors = Vec::new();
    let mut u_comp = Array2::<C64>::zeros((4, 4));
    u_comp[(0, 0)] = C64::new(1.0, 0.0);
    let mut norms = [1.0f64, 0.0, 0.0, 0.0];
    let mut t_sum = 0.0;

    for (sector, ops) in system.sectors() {
        let rec = propagate_sector(&ops, sector, wf, m);
        let slot = match sector {
            Sector::S01 => 1,
            Sector::S10 => 2,
            Sector::S11 => 3,
        };
        u_comp[(slot, slot)] = rec.u_total[(0, 0)];
        norms[slot] = rec.final_state.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        t_sum += rec.t_k;
        sectors.push(rec);
    }

    Ok(GateRecord {
        u_comp,
        sectors,
        t_r: t_sum / 4.0,
        norms,
        gamma_r: system.gamma_r(),
        tau: wf.tau,
    })
}

fn propagate_sector(
    ops: &SectorOperators,
    sector: Sector,
    wf: &PhaseWaveform,
    m: usize,
) -> SectorRecord {
    let dim = ops.dim();
    let dt = wf.dt();
    let sub = dt / m as f64;
    let eig = EigenSystem::new(&ops.hamiltonian(0.0));
    let u0 = eig.propagator(dt);
    let exc = &ops.basis.excitation;
    let n_r = ops.rydberg_diag();

    let mut u_segments = Vec::with_capacity(wf.n_segments());
    let mut u_total = Array2::<C64>::eye(dim);
    let n_samples = wf.n_segments() * m + 1;
    let mut times = Vec::with_capacity(n_samples);
    let mut pops = Array2::<f64>::zeros((n_samples, dim));

    let mut psi = Array1::<C64>::zeros(dim);
    psi[0] = C64::new(1.0, 0.0); // computational state is basis index 0
    record_pops(&mut pops, 0, &psi);
    times.push(0.0);

    let mut sample = 1;
    for (i, &xi) in wf.phases.iter().enumerate() {
        let u_i = conjugate_by_phase(&u0, xi, exc);
        u_total = u_i.dot(&u_total);
        let rotated: Array1<C64> = psi
            .iter()
            .zip(exc)
            .map(|(&a, &e)| a * C64::from_polar(1.0, -xi * f64::from(e)))
            .collect();
        let coords = eig.to_eigenbasis(&rotated);
        for step in 1..=m {
            let t = step as f64 * sub;
            let evolved = eig.evolve_coords(&coords, t);
            record_pops(&mut pops, sample, &evolved);
            times.push(i as f64 * dt + t);
            sample += 1;
        }
        psi = u_i.dot(&psi);
        u_segments.push(u_i);
    }

    let t_k = rydberg_quadrature(&times, &pops, &n_r);
    SectorRecord {
        sector,
        basis: ops.basis.clone(),
        u_total,
        u_segments,
        times,
        populations: pops,
        t_k,
        final_state: psi,
    }
}

/// Rydberg time (T_01 + T_10 + T_11)/4 from a propagated record.
pub fn rydberg_time(record: &GateRecord) -> Result<f64> {
    let mut sum = 0.0;
    for s in [Sector::S01, Sector::S10, Sector::S11] {
        let rec = record
            .sector(s)
            .ok_or_else(|| Error::MissingTrajectory { sector: s.to_string() })?;
        sum += rec.t_k;
    }
    Ok(sum / 4.0)
}
