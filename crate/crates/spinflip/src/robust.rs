//! Ensemble (inhomogeneous) robust control and sensitivity analysis.
//!
//! Thermal motion and beam-pointing noise perturb each atom's laser Rabi
//! frequency and detuning; the dominant effect is uncertainty in the
//! entangling energy J. Robust waveforms maximize a weighted average of
//! the fidelity over a small ensemble of perturbed systems. Fixed
//! waveforms are characterized by re-propagating them across perturbation
//! grids, and the motional bright/dark model quantifies the J shift
//! directly.

use serde::{Deserialize, Serialize};

use crate::dressed::Branch;
use crate::error::{Error, Result};
use crate::grape::{
    optimize_objective, ControlProblem, CostKind, CostObjective, Evaluation, OptimizeOptions,
    OptimizeReport, ProblemEngine,
};
use crate::hamiltonian::{motional_hamiltonian, MotionalParams};
use crate::linalg::EigenSystem;
use crate::metrics::{cz_fidelity, decay_limited_fidelity, DecayMethod};
use crate::propagator::{propagate, GateSystem, PhaseWaveform, DEFAULT_SUBSTEPS};
use crate::units::mhz_to_angular;

/// One perturbed member of an ensemble: multiplicative factors on the
/// two laser Rabi frequencies and additive detuning offsets (MHz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationMember {
    #[serde(default = "one")]
    pub omega_factor_1: f64,
    #[serde(default = "one")]
    pub omega_factor_2: f64,
    #[serde(default)]
    pub delta_offset_1: f64,
    #[serde(default)]
    pub delta_offset_2: f64,
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

impl PerturbationMember {
    /// Common Rabi-frequency factor on both atoms.
    pub fn omega_common(factor: f64, weight: f64) -> Self {
        PerturbationMember {
            omega_factor_1: factor,
            omega_factor_2: factor,
            delta_offset_1: 0.0,
            delta_offset_2: 0.0,
            weight,
        }
    }

    pub fn nominal(weight: f64) -> Self {
        PerturbationMember::omega_common(1.0, weight)
    }
}

/// A weighted list of parameter perturbations for robust averaging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub members: Vec<PerturbationMember>,
}

impl EnsembleSpec {
    /// The ±2% Rabi-frequency ensemble used for the robust gate:
    /// weights {½ at 1.00, ¼ at 1.02, ¼ at 0.98} on both atoms.
    pub fn two_percent_rabi() -> Self {
        EnsembleSpec {
            members: vec![
                PerturbationMember::omega_common(1.00, 0.5),
                PerturbationMember::omega_common(1.02, 0.25),
                PerturbationMember::omega_common(0.98, 0.25),
            ],
        }
    }

    pub fn single_nominal() -> Self {
        EnsembleSpec { members: vec![PerturbationMember::nominal(1.0)] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::ConfigInvalid {
                field: "ensemble.members".into(),
                reason: "ensemble needs at least one member".into(),
            });
        }
        let mut total = 0.0;
        for m in &self.members {
            if !(m.weight > 0.0 && m.weight.is_finite()) {
                return Err(Error::ConfigInvalid {
                    field: "ensemble.weight".into(),
                    reason: format!("weights must be positive, got {}", m.weight),
                });
            }
            total += m.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::ConfigInvalid {
                field: "ensemble.weight".into(),
                reason: format!("weights must sum to 1, got {total}"),
            });
        }
        Ok(())
    }
}

/// Apply a perturbation to a microwave gate system. The nominal rotating
/// frame (microwave frequency) is left untouched; only the atoms' laser
/// parameters move.
pub fn perturbed_system(base: &GateSystem, member: &PerturbationMember) -> Result<GateSystem> {
    match base {
        GateSystem::Microwave(m) => {
            let mut out = *m;
            out.atom1.omega_l *= member.omega_factor_1;
            out.atom1.delta_l += member.delta_offset_1;
            out.atom2.omega_l *= member.omega_factor_2;
            out.atom2.delta_l += member.delta_offset_2;
            Ok(GateSystem::Microwave(out))
        }
        GateSystem::Optical(_) => Err(Error::ConfigInvalid {
            field: "system".into(),
            reason: "parameter ensembles are defined for the microwave gate".into(),
        }),
    }
}

struct EnsembleEngine {
    members: Vec<(f64, ProblemEngine)>,
}

impl EnsembleEngine {
    fn build(spec: &EnsembleSpec, problem: &ControlProblem) -> Result<EnsembleEngine> {
        spec.validate()?;
        problem.validate()?;
        let mut members = Vec::with_capacity(spec.members.len());
        for m in &spec.members {
            let mut p = problem.clone();
            p.system = perturbed_system(&problem.system, m)?;
            p.cost = CostKind::Fidelity;
            members.push((m.weight, ProblemEngine::build(&p)));
        }
        Ok(EnsembleEngine { members })
    }
}

impl CostObjective for EnsembleEngine {
    fn evaluate(&self, phases: &[f64]) -> Evaluation {
        let mut fidelity = 0.0;
        let mut grad = vec![0.0; phases.len()];
        for (w, engine) in &self.members {
            let e = engine.evaluate(phases);
            fidelity += w * e.fidelity;
            for (g, d) in grad.iter_mut().zip(&e.grad) {
                *g += w * d;
            }
        }
        Evaluation { fidelity, cost: fidelity, grad }
    }
}

/// Weighted average CZ fidelity of a fixed waveform over the ensemble.
pub fn ensemble_fidelity(
    spec: &EnsembleSpec,
    problem: &ControlProblem,
    wf: &PhaseWaveform,
) -> Result<f64> {
    let engine = EnsembleEngine::build(spec, problem)?;
    Ok(engine.evaluate(&wf.phases).fidelity)
}

/// Gradient of the ensemble-averaged fidelity: the weighted sum of the
/// member gradients.
pub fn ensemble_gradient(
    spec: &EnsembleSpec,
    problem: &ControlProblem,
    wf: &PhaseWaveform,
) -> Result<Vec<f64>> {
    let engine = EnsembleEngine::build(spec, problem)?;
    Ok(engine.evaluate(&wf.phases).grad)
}

/// GRAPE on the ensemble-averaged cost. Same determinism and restart
/// contracts as `optimize_waveform`; the report's `fidelity` is the
/// ensemble average and `t_r` refers to the nominal system.
pub fn optimize_robust(
    spec: &EnsembleSpec,
    problem: &ControlProblem,
    init: Option<&PhaseWaveform>,
    opts: &OptimizeOptions,
) -> Result<OptimizeReport> {
    let engine = EnsembleEngine::build(spec, problem)?;
    let mut report = optimize_objective(&engine, problem.n_segments, problem.tau, init, opts)?;
    let record = propagate(&problem.system.with_gamma(0.0), &report.waveform, DEFAULT_SUBSTEPS)?;
    report.t_r = record.t_r;
    Ok(report)
}

/// Which parameter a sensitivity scan varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanAxis {
    /// Common multiplicative factor on both atoms' Ω_L.
    OmegaLCommon,
    /// Additive detuning offset (MHz) on atom 1 only.
    DeltaL1,
}

impl ScanAxis {
    pub fn label(self) -> &'static str {
        match self {
            ScanAxis::OmegaLCommon => "omega_l_factor",
            ScanAxis::DeltaL1 => "delta_l1_offset_mhz",
        }
    }
}

/// Fidelity of a fixed waveform across a perturbation grid, with and
/// without Rydberg decay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityCurve {
    pub axis: ScanAxis,
    pub values: Vec<f64>,
    pub fidelity_unitary: Vec<f64>,
    pub fidelity_decay: Vec<f64>,
    pub t_r_us: Vec<f64>,
}

impl SensitivityCurve {
    /// CSV rows `axis_value, fidelity_unitary, fidelity_decay, t_r_us`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "axis_value,fidelity_unitary,fidelity_decay,t_r_us")?;
        for i in 0..self.values.len() {
            writeln!(
                w,
                "{:.12e},{:.12e},{:.12e},{:.12e}",
                self.values[i], self.fidelity_unitary[i], self.fidelity_decay[i], self.t_r_us[i]
            )?;
        }
        Ok(())
    }
}

/// Re-propagate a fixed waveform at each perturbed parameter set along
/// one axis. Decay-included values use the system's own γ_r.
pub fn sensitivity_scan(
    wf: &PhaseWaveform,
    problem: &ControlProblem,
    axis: ScanAxis,
    grid: &[f64],
) -> Result<SensitivityCurve> {
    problem.validate()?;
    if grid.len() < 2 {
        return Err(Error::ConfigInvalid {
            field: "grid".into(),
            reason: "scan grid needs at least two points".into(),
        });
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::ConfigInvalid {
                field: "grid".into(),
                reason: "scan grid must be strictly increasing".into(),
            });
        }
    }
    let omega_l = match &problem.system {
        GateSystem::Microwave(m) => m.nominal.omega_l,
        GateSystem::Optical(_) => {
            return Err(Error::ConfigInvalid {
                field: "system".into(),
                reason: "sensitivity scans are defined for the microwave gate".into(),
            })
        }
    };
    match axis {
        ScanAxis::OmegaLCommon => {
            if grid.iter().any(|v| (v - 1.0).abs() > 0.10 + 1e-12) {
                return Err(Error::ConfigInvalid {
                    field: "grid".into(),
                    reason: "Rabi factors are expected within ±10% of 1".into(),
                });
            }
        }
        ScanAxis::DeltaL1 => {
            if grid.iter().any(|v| v.abs() > omega_l / 2.0 + 1e-12) {
                return Err(Error::ConfigInvalid {
                    field: "grid".into(),
                    reason: "detuning offsets are expected within ±Ω_L/2".into(),
                });
            }
        }
    }

    let gamma = problem.system.gamma_r();
    let mut curve = SensitivityCurve {
        axis,
        values: grid.to_vec(),
        fidelity_unitary: Vec::with_capacity(grid.len()),
        fidelity_decay: Vec::with_capacity(grid.len()),
        t_r_us: Vec::with_capacity(grid.len()),
    };
    for &v in grid {
        let member = match axis {
            ScanAxis::OmegaLCommon => PerturbationMember::omega_common(v, 1.0),
            ScanAxis::DeltaL1 => PerturbationMember {
                omega_factor_1: 1.0,
                omega_factor_2: 1.0,
                delta_offset_1: v,
                delta_offset_2: 0.0,
                weight: 1.0,
            },
        };
        let system = perturbed_system(&problem.system, &member)?;
        let unitary = propagate(&system.with_gamma(0.0), wf, DEFAULT_SUBSTEPS)?;
        let f_unitary = cz_fidelity(&unitary.u_comp)?.fidelity;
        let f_decay = if gamma > 0.0 {
            let decayed = propagate(&system.with_gamma(gamma), wf, DEFAULT_SUBSTEPS)?;
            decay_limited_fidelity(&decayed, gamma, DecayMethod::NonHermitian)?
        } else {
            f_unitary
        };
        curve.fidelity_unitary.push(f_unitary);
        curve.fidelity_decay.push(f_decay);
        curve.t_r_us.push(unitary.t_r);
    }
    Ok(curve)
}

/// Entangling energy of the motionally perturbed pair: the |gg>-connected
/// eigenvalue of the bright/dark model minus the per-atom dressed shifts
/// at each atom's own Rabi frequency and Doppler-shifted detuning. Uses
/// the lower (red-detuned working) branch; reduces to
/// [`entangling_energy`] at the symmetric motionless point.
pub fn perturbed_entangling_energy(mp: &MotionalParams) -> Result<f64> {
    let h = motional_hamiltonian(mp);
    let eig = EigenSystem::new(&h.matrix);
    let dim = h.basis.dim();
    // Select the eigenvector adiabatically connected to |gg> (largest
    // |gg|-amplitude); equal weights signal an avoided crossing.
    let mut weights: Vec<(f64, usize)> = (0..dim)
        .map(|k| {
            let col = eig.vectors.column(k);
            let norm: f64 = col.iter().map(|c| c.norm_sqr()).sum();
            (col[0].norm_sqr() / norm, k)
        })
        .collect();
    weights.sort_by(|a, b| b.0.total_cmp(&a.0));
    let gap = weights[0].0.sqrt() - weights[1].0.sqrt();
    if gap.abs() <= 1e-9 {
        return Err(Error::DegenerateBranch { gap });
    }
    let e_gg = eig.values[weights[0].1].re;

    let single_shift = |omega_l: f64, doppler: f64| -> f64 {
        let delta_eff = mhz_to_angular(mp.delta) - doppler;
        let omega = mhz_to_angular(omega_l);
        let w = omega.hypot(delta_eff);
        match Branch::Lower {
            Branch::Lower => (-delta_eff - w) / 2.0,
            Branch::Upper => (-delta_eff + w) / 2.0,
        }
    };
    // p1 = P_com/2 + p_rel, p2 = P_com/2 − p_rel; each atom sees the
    // Doppler shift of its own momentum.
    let k_over_m = if mp.mass != 0.0 { mp.k_l / mp.mass } else { 0.0 };
    let d1 = k_over_m * (mp.p_com / 2.0 + mp.p_rel);
    let d2 = k_over_m * (mp.p_com / 2.0 - mp.p_rel);
    Ok(e_gg - single_shift(mp.omega_l1, d1) - single_shift(mp.omega_l2, d2))
}

/// Draw (p_rel, P_com) pairs from zero-mean Gaussians with the given
/// standard deviations. No default temperature is shipped; widths are the
/// caller's choice.
pub fn sample_momenta<R: rand::Rng>(
    rng: &mut R,
    sigma_p_rel: f64,
    sigma_p_com: f64,
    n: usize,
) -> Vec<(f64, f64)> {
    let mut normal = || -> f64 {
        // Box-Muller.
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    (0..n).map(|_| (sigma_p_rel * normal(), sigma_p_com * normal())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dressed::{entangling_energy, Blockade, DressingParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn fig4_params() -> DressingParams {
        DressingParams::new(10.0, -5.9, 1.0, 0.0)
    }

    fn fig4_problem(n: usize, tau: f64) -> ControlProblem {
        ControlProblem::new(GateSystem::microwave(fig4_params()), n, tau)
    }

    fn random_waveform(n: usize, tau: f64, seed: u64) -> PhaseWaveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PhaseWaveform::new(
            tau,
            (0..n).map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_member_ensemble_is_the_plain_fidelity() {
        let problem = fig4_problem(8, 1.3);
        let wf = random_waveform(8, 1.3, 1);
        let f_plain = crate::grape::waveform_fidelity(&problem, &wf).unwrap();
        let f_ens =
            ensemble_fidelity(&EnsembleSpec::single_nominal(), &problem, &wf).unwrap();
        assert!((f_plain - f_ens).abs() < 1e-14);
        // Degenerate spec: the default weights with no perturbation.
        let degenerate = EnsembleSpec {
            members: vec![
                PerturbationMember::omega_common(1.0, 0.5),
                PerturbationMember::omega_common(1.0, 0.25),
                PerturbationMember::omega_common(1.0, 0.25),
            ],
        };
        let f_deg = ensemble_fidelity(&degenerate, &problem, &wf).unwrap();
        assert!((f_plain - f_deg).abs() < 1e-14);
    }

    #[test]
    fn ensemble_gradient_matches_finite_differences() {
        let spec = EnsembleSpec::two_percent_rabi();
        let problem = fig4_problem(6, 1.2);
        let wf = random_waveform(6, 1.2, 3);
        let grad = ensemble_gradient(&spec, &problem, &wf).unwrap();
        let h = 1e-6;
        for i in 0..6 {
            let mut plus = wf.clone();
            plus.phases[i] += h;
            let mut minus = wf.clone();
            minus.phases[i] -= h;
            let fp = ensemble_fidelity(&spec, &problem, &plus).unwrap();
            let fm = ensemble_fidelity(&spec, &problem, &minus).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            assert!(
                (grad[i] - fd).abs() / fd.abs().max(1e-8) < 1e-5,
                "component {i}: {} vs {fd}",
                grad[i]
            );
        }
    }

    #[test]
    fn weights_must_sum_to_one() {
        let spec = EnsembleSpec {
            members: vec![PerturbationMember::omega_common(1.0, 0.7)],
        };
        assert!(spec.validate().is_err());
        assert!(EnsembleSpec::two_percent_rabi().validate().is_ok());
    }

    #[test]
    fn scan_recovers_nominal_fidelity_at_zero_perturbation() {
        let problem = fig4_problem(8, 1.3);
        let wf = random_waveform(8, 1.3, 5);
        let f_nominal = crate::grape::waveform_fidelity(&problem, &wf).unwrap();
        let curve = sensitivity_scan(&wf, &problem, ScanAxis::OmegaLCommon, &[0.99, 1.0, 1.01])
            .unwrap();
        assert!((curve.fidelity_unitary[1] - f_nominal).abs() < 1e-12);
        let curve =
            sensitivity_scan(&wf, &problem, ScanAxis::DeltaL1, &[-0.5, 0.0, 0.5]).unwrap();
        assert!((curve.fidelity_unitary[1] - f_nominal).abs() < 1e-12);
    }

    #[test]
    fn scan_rejects_bad_grids() {
        let problem = fig4_problem(4, 1.0);
        let wf = random_waveform(4, 1.0, 2);
        assert!(sensitivity_scan(&wf, &problem, ScanAxis::OmegaLCommon, &[1.0, 0.9]).is_err());
        assert!(sensitivity_scan(&wf, &problem, ScanAxis::OmegaLCommon, &[0.5, 1.0]).is_err());
        assert!(sensitivity_scan(&wf, &problem, ScanAxis::DeltaL1, &[-20.0, 0.0]).is_err());
    }

    #[test]
    fn scan_is_smooth_on_a_fine_grid() {
        // No jumps above 0.05 between adjacent points at 0.25% spacing.
        let problem = fig4_problem(16, 1.35);
        let opts = OptimizeOptions { seed: 11, epsilon_f: 1e-6, ..Default::default() };
        let opt = crate::grape::optimize_waveform(&problem, None, &opts).unwrap();
        let grid: Vec<f64> = (0..=16).map(|k| 0.98 + k as f64 * 0.0025).collect();
        let curve = sensitivity_scan(&opt.waveform, &problem, ScanAxis::OmegaLCommon, &grid)
            .unwrap();
        for w in curve.fidelity_unitary.windows(2) {
            assert!((w[1] - w[0]).abs() < 0.05);
        }
    }

    #[test]
    fn perturbed_j_reduces_to_entangling_energy_when_symmetric() {
        let p = fig4_params();
        let mp = MotionalParams::symmetric(&p);
        let j_motional = perturbed_entangling_energy(&mp).unwrap();
        let j_plain = entangling_energy(&p).unwrap();
        assert!((j_motional - j_plain).abs() < 1e-10 * j_plain.abs());
        // Finite blockade too.
        let mut p2 = p;
        p2.v_rr = Blockade::Finite(80.0);
        let mp2 = MotionalParams::symmetric(&p2);
        let j2_motional = perturbed_entangling_energy(&mp2).unwrap();
        let j2_plain = entangling_energy(&p2).unwrap();
        assert!((j2_motional - j2_plain).abs() < 1e-10 * j2_plain.abs());
    }

    #[test]
    fn perturbed_j_at_two_percent_rabi_matches_closed_form_oracle() {
        // Ω_L1 = Ω_L2 = 1.02·Ω_L at the operating point is the symmetric
        // problem at the inflated Rabi frequency; the quadratic closed
        // forms provide the frozen expectation.
        let mut mp = MotionalParams::symmetric(&fig4_params());
        mp.omega_l1 = 10.2;
        mp.omega_l2 = 10.2;
        let j = perturbed_entangling_energy(&mp).unwrap();
        let w = (10.2f64 * 10.2 + 5.9 * 5.9).sqrt();
        let w2 = (2.0 * 10.2f64 * 10.2 + 5.9 * 5.9).sqrt();
        let oracle_mhz = 0.5 * (-5.9 + (2.0 * w - w2));
        assert!((j - TAU * oracle_mhz).abs() < 1e-10 * TAU * oracle_mhz.abs());
    }

    #[test]
    fn doppler_enters_j_exactly_as_a_detuning_shift() {
        // With equal Rabi frequencies and p_rel = 0 the center-of-mass
        // Doppler shift is algebraically a laser-detuning shift: J'(P) =
        // J(Δ − k·P/2m). Two independent routes to the same number.
        let base = fig4_params();
        for &s_mhz in &[0.05, -0.11, 0.31] {
            let mut mp = MotionalParams::symmetric(&base);
            mp.k_l = 1.0;
            mp.mass = 1.0;
            mp.p_com = 2.0 * mhz_to_angular(s_mhz); // k·P/2m = s
            let j_motional = perturbed_entangling_energy(&mp).unwrap();
            let mut shifted = base;
            shifted.delta_l = base.delta_l - s_mhz;
            let j_shifted = entangling_energy(&shifted).unwrap();
            assert!(
                (j_motional - j_shifted).abs() < 1e-10 * j_shifted.abs(),
                "{j_motional} vs {j_shifted}"
            );
        }
    }

    #[test]
    fn doppler_slope_of_j_is_strongly_suppressed_far_from_resonance() {
        // The one-atom light shift moves at dE/ds ≈ Ω²/4Δ² per unit
        // Doppler s, but the leading sensitivity cancels in J; far from
        // resonance the residual slope is orders of magnitude below the
        // naive one-atom estimate.
        let mut p = fig4_params();
        p.delta_l = -200.0;
        let s = mhz_to_angular(0.01);
        let j_at = |doppler: f64| {
            let mut mp = MotionalParams::symmetric(&p);
            mp.k_l = 1.0;
            mp.mass = 1.0;
            mp.p_com = 2.0 * doppler;
            perturbed_entangling_energy(&mp).unwrap()
        };
        let slope = (j_at(s) - j_at(-s)) / (2.0 * s);
        let omega = p.omega_l_ang();
        let delta = p.delta_l_ang();
        let naive = omega * omega / (4.0 * delta * delta);
        assert!(slope.abs() < naive / 100.0, "slope {slope} vs naive {naive}");
    }

    #[test]
    fn bd_coupling_shifts_j_quadratically_in_relative_momentum() {
        let base = fig4_params();
        let j0 = {
            let mp = MotionalParams::symmetric(&base);
            perturbed_entangling_energy(&mp).unwrap()
        };
        let j_at = |p_rel: f64| {
            let mut mp = MotionalParams::symmetric(&base);
            mp.k_l = 1.0;
            mp.mass = 1.0;
            mp.p_rel = p_rel;
            perturbed_entangling_energy(&mp).unwrap()
        };
        let s = 0.5;
        let plus = j_at(s) - j0;
        let minus = j_at(-s) - j0;
        // With Ω_L1 = Ω_L2 the B–D coupling enters only at second order,
        // and the per-atom Doppler contributions of ±p_rel cancel.
        assert!((plus - minus).abs() < 1e-9 * j0.abs());
        let quarter = j_at(s / 2.0) - j0;
        assert!((plus / quarter - 4.0).abs() < 0.05, "ratio {}", plus / quarter);
    }

    #[test]
    fn sampled_momenta_have_requested_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws = sample_momenta(&mut rng, 2.0, 5.0, 4000);
        let mean_rel: f64 = draws.iter().map(|d| d.0).sum::<f64>() / 4000.0;
        let var_rel: f64 = draws.iter().map(|d| d.0 * d.0).sum::<f64>() / 4000.0;
        let var_com: f64 = draws.iter().map(|d| d.1 * d.1).sum::<f64>() / 4000.0;
        assert!(mean_rel.abs() < 0.15);
        assert!((var_rel.sqrt() - 2.0).abs() < 0.15);
        assert!((var_com.sqrt() - 5.0).abs() < 0.4);
    }
}
