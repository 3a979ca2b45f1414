//! Dressed-state analytics of the Rydberg-dressed level structure.
//!
//! One atom: the laser couples |a> ↔ |r> with Rabi frequency Ω_L and
//! detuning Δ_L, producing an Autler-Townes doublet split by
//! √(Ω_L² + Δ_L²) with light shifts (−Δ_L ± √(Ω_L² + Δ_L²))/2. Two
//! atoms: the symmetric pair states {|aa>, |ar>₊, |rr>} dress into a
//! triplet whose |aa>-like member carries the nonlinear two-atom shift.
//! The difference J = E⁽²⁾ − 2E⁽¹⁾ is the entangling energy that
//! blockades the second microwave spin flip.
//!
//! Branch convention: with θ ∈ [0, π) defined by tan θ = −Ω_L/Δ_L, the
//! state cos(θ/2)|a> + sin(θ/2)|r> is the lower light-shift branch for
//! every detuning sign; [`Branch::Lower`] selects it and
//! [`Branch::Upper`] the orthogonal one. For red detuning (Δ_L < 0) the
//! lower branch is the one adiabatically connected to |a>, which is the
//! operating regime everywhere in this crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::EigenSystem;
use crate::units::mhz_to_angular;

/// Which light-shift branch plays the role of the working dressed state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Light shift (−Δ_L − √(Ω_L² + Δ_L²))/2; connected to |a> for Δ_L ≤ 0.
    #[default]
    Lower,
    /// Light shift (−Δ_L + √(Ω_L² + Δ_L²))/2; connected to |a> for Δ_L > 0.
    Upper,
}

impl Branch {
    /// The ± sign this branch takes in the light-shift closed forms.
    pub fn sign(self) -> f64 {
        match self {
            Branch::Lower => -1.0,
            Branch::Upper => 1.0,
        }
    }
}

/// Van der Waals shift of |rr>. The perfect-blockade limit is represented
/// by truncating |rr> out of the basis rather than by a large number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Blockade {
    Infinite,
    /// Shift in MHz (ordinary frequency).
    Finite(f64),
}

impl Blockade {
    pub fn is_infinite(self) -> bool {
        matches!(self, Blockade::Infinite)
    }
}

/// Drive and interaction parameters of the two-atom system. Frequencies
/// are ordinary (MHz), `gamma_r` is a rate in 1/μs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DressingParams {
    /// Rydberg-laser Rabi frequency Ω_L/2π in MHz.
    pub omega_l: f64,
    /// Rydberg-laser detuning Δ_L/2π in MHz (signed).
    pub delta_l: f64,
    /// Bare microwave Rabi frequency Ω_μw/2π in MHz.
    pub omega_mw: f64,
    /// Microwave detuning from the dressed resonance in MHz. `None` means
    /// exactly resonant with the selected branch.
    pub delta_mw_override: Option<f64>,
    /// Van der Waals shift of |rr>.
    pub v_rr: Blockade,
    /// Rydberg decay rate in 1/μs.
    pub gamma_r: f64,
    pub branch: Branch,
}

impl DressingParams {
    /// Symmetric perfect-blockade parameter set on the lower branch.
    pub fn new(omega_l: f64, delta_l: f64, omega_mw: f64, gamma_r: f64) -> Self {
        DressingParams {
            omega_l,
            delta_l,
            omega_mw,
            delta_mw_override: None,
            v_rr: Blockade::Infinite,
            gamma_r,
            branch: Branch::Lower,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, reason: &str| Error::ConfigInvalid {
            field: name.into(),
            reason: reason.into(),
        };
        if !self.omega_l.is_finite() || self.omega_l < 0.0 {
            return Err(field("omega_l", "must be finite and >= 0"));
        }
        if !self.delta_l.is_finite() {
            return Err(field("delta_l", "must be finite"));
        }
        if self.omega_l == 0.0 && self.delta_l == 0.0 {
            return Err(field("omega_l", "omega_l and delta_l cannot both be zero"));
        }
        if !self.omega_mw.is_finite() || self.omega_mw < 0.0 {
            return Err(field("omega_mw", "must be finite and >= 0"));
        }
        if let Some(d) = self.delta_mw_override {
            if !d.is_finite() {
                return Err(field("delta_mw", "must be finite"));
            }
        }
        if let Blockade::Finite(v) = self.v_rr {
            if !v.is_finite() || v < 0.0 {
                return Err(field("v_rr", "must be finite and >= 0 (or infinite)"));
            }
        }
        if !self.gamma_r.is_finite() || self.gamma_r < 0.0 {
            return Err(field("gamma_r", "must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn omega_l_ang(&self) -> f64 {
        mhz_to_angular(self.omega_l)
    }

    pub fn delta_l_ang(&self) -> f64 {
        mhz_to_angular(self.delta_l)
    }

    pub fn omega_mw_ang(&self) -> f64 {
        mhz_to_angular(self.omega_mw)
    }

    pub fn delta_mw_override_ang(&self) -> f64 {
        mhz_to_angular(self.delta_mw_override.unwrap_or(0.0))
    }

    pub fn v_rr_ang(&self) -> Option<f64> {
        match self.v_rr {
            Blockade::Infinite => None,
            Blockade::Finite(v) => Some(mhz_to_angular(v)),
        }
    }
}

/// Eigenstructure of the one-atom dressed manifold. `cos_half_theta` and
/// `sin_half_theta` are the |a> and |r> amplitudes of the selected state
/// |ã>; energies are angular (rad/μs), `gamma_eff` a rate (1/μs).
#[derive(Debug, Clone, Copy)]
pub struct DressedAtom {
    pub cos_half_theta: f64,
    pub sin_half_theta: f64,
    /// One-atom light shift of the selected branch.
    pub e_ls1: f64,
    /// Light shift of the orthogonal branch.
    pub e_other: f64,
    /// Ω̃_μw = |<a|ã>|·Ω_μw.
    pub omega_mw_eff: f64,
    /// Γ_ã = |<r|ã>|²·Γ_r.
    pub gamma_eff: f64,
}

/// Eigenstructure of the two-atom dressed manifold: amplitudes of
/// {|aa>, |ar>₊, |rr>} in |ãã>, the two-atom shift, the entangling
/// energy J = E⁽²⁾ − 2E⁽¹⁾, and the effective pair drive/decay.
#[derive(Debug, Clone, Copy)]
pub struct DressedPair {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub e_ls2: f64,
    pub j: f64,
    /// Ω̃′_μw = |α·<a|ã> + β·<r|ã>/√2|·Ω_μw.
    pub omega_mw_eff_prime: f64,
    /// Γ_ãã = (β² + 2γ²)·Γ_r.
    pub gamma_eff_2: f64,
}

/// Diagonalize the one-atom a–r block.
pub fn dress_single(params: &DressingParams) -> DressedAtom {
    let omega = params.omega_l_ang();
    let delta = params.delta_l_ang();
    let w = omega.hypot(delta);
    // tan θ = −Ω_L/Δ_L with θ ∈ [0, π); the θ-state is the lower branch.
    let theta = omega.atan2(-delta);
    let (cos_half, sin_half) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let e_lower = (-delta - w) / 2.0;
    let e_upper = (-delta + w) / 2.0;
    let (amp_a, amp_r, e_sel, e_other) = match params.branch {
        Branch::Lower => (cos_half, sin_half, e_lower, e_upper),
        Branch::Upper => (-sin_half, cos_half, e_upper, e_lower),
    };
    DressedAtom {
        cos_half_theta: amp_a,
        sin_half_theta: amp_r,
        e_ls1: e_sel,
        e_other,
        omega_mw_eff: amp_a.abs() * params.omega_mw_ang(),
        gamma_eff: amp_r * amp_r * params.gamma_r,
    }
}

/// The perfect-blockade pair doublet: (α, β, E) of the selected branch in
/// {|aa>, |ar>₊}. The block has coupling √2·Ω_L/2, so it is the one-atom
/// problem at Rabi frequency √2·Ω_L.
fn pair_doublet_infinite(omega: f64, delta: f64, branch: Branch) -> (f64, f64, f64) {
    let om2 = std::f64::consts::SQRT_2 * omega;
    let w2 = om2.hypot(delta);
    let theta2 = om2.atan2(-delta);
    let (c, s) = ((theta2 / 2.0).cos(), (theta2 / 2.0).sin());
    match branch {
        Branch::Lower => (c, s, (-delta - w2) / 2.0),
        Branch::Upper => (-s, c, (-delta + w2) / 2.0),
    }
}

/// Diagonalize the two-atom dressed manifold and select the branch.
///
/// For a finite blockade the {|aa>, |ar>₊, |rr>} block is diagonalized and
/// the eigenvector adiabatically connected to the perfect-blockade branch
/// (largest overlap) is selected. If the two best candidates carry equal
/// |aa>-amplitude to within 1e−9 the parameter set sits on an avoided
/// crossing and `DegenerateBranch` is raised instead of picking a side.
pub fn dress_pair(params: &DressingParams) -> Result<DressedPair> {
    params.validate()?;
    let omega = params.omega_l_ang();
    let delta = params.delta_l_ang();
    let atom = dress_single(params);

    let (alpha, beta, gamma, e_ls2) = match params.v_rr_ang() {
        None => {
            let (a, b, e) = pair_doublet_infinite(omega, delta, params.branch);
            (a, b, 0.0, e)
        }
        Some(v) => select_finite_blockade(omega, delta, v, params.branch)?,
    };

    let j = e_ls2 - 2.0 * atom.e_ls1;
    let prime = alpha * atom.cos_half_theta
        + beta * atom.sin_half_theta / std::f64::consts::SQRT_2;
    Ok(DressedPair {
        alpha,
        beta,
        gamma,
        e_ls2,
        j,
        omega_mw_eff_prime: prime.abs() * params.omega_mw_ang(),
        gamma_eff_2: (beta * beta + 2.0 * gamma * gamma) * params.gamma_r,
    })
}

fn select_finite_blockade(
    omega: f64,
    delta: f64,
    v_rr: f64,
    branch: Branch,
) -> Result<(f64, f64, f64, f64)> {
    use ndarray::array;
    use num_complex::Complex64 as C64;

    let c = std::f64::consts::SQRT_2 * omega / 2.0;
    let z = |x: f64| C64::new(x, 0.0);
    // Couplings carry a minus sign (the |r> → −|r> gauge) so that the
    // connected eigenvector at red detuning has all-positive amplitudes,
    // matching the sign convention of the doublet closed forms.
    let m = array![
        [z(0.0), z(-c), z(0.0)],
        [z(-c), z(-delta), z(-c)],
        [z(0.0), z(-c), z(-2.0 * delta + v_rr)],
    ];
    let eig = EigenSystem::new(&m);

    let (ra, rb, _) = pair_doublet_infinite(omega, delta, branch);
    let mut candidates: Vec<(f64, [f64; 3], f64)> = Vec::with_capacity(3);
    for k in 0..3 {
        let col = eig.vectors.column(k);
        // Real symmetric input: normalize the phase and drop the imaginary
        // residue.
        let dominant = (0..3)
            .max_by(|&i, &j| col[i].norm().total_cmp(&col[j].norm()))
            .unwrap();
        let phase = col[dominant] / col[dominant].norm();
        let mut comp = [0.0f64; 3];
        let mut norm2 = 0.0;
        for i in 0..3 {
            let fixed = col[i] * phase.conj();
            debug_assert!(fixed.im.abs() < 1e-9);
            comp[i] = fixed.re;
            norm2 += comp[i] * comp[i];
        }
        let norm = norm2.sqrt();
        for item in &mut comp {
            *item /= norm;
        }
        let overlap = (ra * comp[0] + rb * comp[1]).abs();
        candidates.push((overlap, comp, eig.values[k].re));
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));

    let alpha_gap = (candidates[0].1[0].abs() - candidates[1].1[0].abs()).abs();
    if alpha_gap <= 1e-9 {
        return Err(Error::DegenerateBranch { gap: alpha_gap });
    }

    let (_, mut comp, energy) = candidates[0];
    // Fix the global sign on the dominant component.
    let dominant = (0..3)
        .max_by(|&i, &j| comp[i].abs().total_cmp(&comp[j].abs()))
        .unwrap();
    if comp[dominant] < 0.0 {
        for item in &mut comp {
            *item = -*item;
        }
    }
    Ok((comp[0], comp[1], comp[2], energy))
}

/// Entangling energy J. For a perfect blockade this is the closed form
/// ½·[Δ_L ± (√(2Ω_L² + Δ_L²) − 2√(Ω_L² + Δ_L²))] with the sign of the
/// selected branch; for finite blockade it is E⁽²⁾ − 2E⁽¹⁾ from the
/// numerical pair diagonalization. Angular frequency (rad/μs).
pub fn entangling_energy(params: &DressingParams) -> Result<f64> {
    params.validate()?;
    match params.v_rr {
        Blockade::Infinite => {
            let omega = params.omega_l_ang();
            let delta = params.delta_l_ang();
            Ok(entangling_energy_closed_form(omega, delta, params.branch))
        }
        Blockade::Finite(_) => Ok(dress_pair(params)?.j),
    }
}

/// Perfect-blockade closed form for J with an explicit branch sign; inputs
/// and output in angular units.
pub fn entangling_energy_closed_form(omega_l: f64, delta_l: f64, branch: Branch) -> f64 {
    let w = omega_l.hypot(delta_l);
    let w2 = (std::f64::consts::SQRT_2 * omega_l).hypot(delta_l);
    0.5 * (delta_l + branch.sign() * (w2 - 2.0 * w))
}

/// Red detuning (MHz, ≤ 0) at which the perfect-blockade lower-branch J
/// equals `target_j_mhz`, found by bisection on the closed form. `None`
/// when the target exceeds the resonant peak (2 − √2)·Ω_L/2.
pub fn detuning_where_j_equals(omega_l_mhz: f64, target_j_mhz: f64) -> Option<f64> {
    let omega = mhz_to_angular(omega_l_mhz);
    let target = mhz_to_angular(target_j_mhz);
    let j_at = |delta_mhz: f64| {
        entangling_energy_closed_form(omega, mhz_to_angular(delta_mhz), Branch::Lower)
    };
    if target > j_at(0.0) || target <= 0.0 {
        return None;
    }
    let mut lo = -(40.0 * omega_l_mhz);
    let mut hi = 0.0;
    // J falls monotonically with |Δ_L| on the red side.
    if j_at(lo) > target {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if j_at(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-12 * omega_l_mhz.max(1.0) {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Weak-dressing-regime optima: detuning at which J = Ω_μw and the
/// resulting Rydberg time.
#[derive(Debug, Clone, Copy)]
pub struct WeakDressing {
    /// Optimal detuning magnitude Ω_L^{4/3}/(2·Ω_μw^{1/3}), angular.
    pub delta_wdr: f64,
    /// Rydberg time 3.5/(Ω_L^{2/3}·Ω_μw^{1/3}) in μs.
    pub t_r_wdr: f64,
}

/// Asymptotics for Ω_L ≫ Ω_μw with the laser detuned so J ≈ Ω_μw.
/// Inputs are ordinary frequencies in MHz.
pub fn weak_dressing_asymptotics(omega_l_mhz: f64, omega_mw_mhz: f64) -> WeakDressing {
    let ol = mhz_to_angular(omega_l_mhz);
    let om = mhz_to_angular(omega_mw_mhz);
    WeakDressing {
        delta_wdr: ol.powf(4.0 / 3.0) / (2.0 * om.powf(1.0 / 3.0)),
        t_r_wdr: 3.5 / (ol.powf(2.0 / 3.0) * om.powf(1.0 / 3.0)),
    }
}

/// Strong-dressing (resonant) asymptotics.
#[derive(Debug, Clone, Copy)]
pub struct StrongDressing {
    /// J at Δ_L = 0: (2 − √2)·Ω_L/2, angular.
    pub j_max: f64,
    /// Rydberg time 1.66·π/Ω_L in μs.
    pub t_r_sdr: f64,
    /// Asymptotic gate time π/J_max in μs.
    pub tau_limit: f64,
}

pub fn strong_dressing_asymptotics(omega_l_mhz: f64) -> StrongDressing {
    let ol = mhz_to_angular(omega_l_mhz);
    let j_max = (2.0 - std::f64::consts::SQRT_2) * ol / 2.0;
    StrongDressing {
        j_max,
        t_r_sdr: 1.66 * std::f64::consts::PI / ol,
        tau_limit: std::f64::consts::PI / j_max,
    }
}
