//! Rotating-frame Hamiltonian assembly.
//!
//! Builders for (i) the single dressed atom on {|0>, |1>, |a>, |r>},
//! (ii) the two-atom microwave spin-flip system on the full product
//! basis, (iii) the optical-control baseline on {|0>, |1>, |r>}⊗2, and
//! (iv) the bright/dark motional-noise model, plus the non-Hermitian
//! decay term. Detunings enter as −Δ on excited diagonals. The energy of
//! |1> (and |11>) is zero, and the microwave frequency is fixed by
//! solving the a–r block so the selected dressed branch sits exactly at
//! the requested microwave detuning (default: resonance).
//!
//! A perfect blockade is represented by removing the |rr> basis state,
//! never by a large-number shift.

use ndarray::linalg::kron;
use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::dressed::{dress_single, Blockade, DressingParams};
use crate::linalg::hermiticity_defect;
use crate::units::mhz_to_angular;

/// An ordered working basis: state labels, per-state Rydberg occupancy
/// (0, 1 or 2), and the drive-excitation counter used by phase-modulated
/// propagation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub labels: Vec<String>,
    pub rydberg: Vec<u8>,
    /// Number of drive quanta absorbed in reaching this state from the
    /// computational sector: a+r count per atom for the microwave model,
    /// r count for the optical model.
    pub excitation: Vec<u8>,
}

impl Basis {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    fn product(single: &[(&str, u8, u8)], drop_rr: bool) -> Basis {
        let mut labels = Vec::new();
        let mut rydberg = Vec::new();
        let mut excitation = Vec::new();
        for &(l1, r1, e1) in single {
            for &(l2, r2, e2) in single {
                let label = format!("{l1}{l2}");
                if drop_rr && label == "rr" {
                    continue;
                }
                labels.push(label);
                rydberg.push(r1 + r2);
                excitation.push(e1 + e2);
            }
        }
        Basis { labels, rydberg, excitation }
    }

    /// One four-level atom {|0>, |1>, |a>, |r>}.
    pub fn atom() -> Basis {
        Basis {
            labels: vec!["0".into(), "1".into(), "a".into(), "r".into()],
            rydberg: vec![0, 0, 0, 1],
            excitation: vec![0, 0, 1, 1],
        }
    }

    /// Two four-level atoms, row-major product order; |rr> removed for a
    /// perfect blockade.
    pub fn two_atom(v_rr: Blockade) -> Basis {
        Basis::product(
            &[("0", 0, 0), ("1", 0, 0), ("a", 0, 1), ("r", 1, 1)],
            v_rr.is_infinite(),
        )
    }

    /// One optical-model atom {|0>, |1>, |r>}.
    pub fn optical_atom() -> Basis {
        Basis {
            labels: vec!["0".into(), "1".into(), "r".into()],
            rydberg: vec![0, 0, 1],
            excitation: vec![0, 0, 1],
        }
    }

    pub fn optical_two_atom(v_rr: Blockade) -> Basis {
        Basis::product(&[("0", 0, 0), ("1", 0, 0), ("r", 1, 1)], v_rr.is_infinite())
    }

    /// Active microwave sector of one atom: {|1>, |a>, |r>}.
    pub fn mw_single() -> Basis {
        Basis {
            labels: vec!["1".into(), "a".into(), "r".into()],
            rydberg: vec![0, 0, 1],
            excitation: vec![0, 1, 1],
        }
    }

    /// Active microwave sector of the pair: {|1>, |a>, |r>}⊗2.
    pub fn mw_pair(v_rr: Blockade) -> Basis {
        Basis::product(&[("1", 0, 0), ("a", 0, 1), ("r", 1, 1)], v_rr.is_infinite())
    }

    /// Active optical sector of one atom: {|1>, |r>}.
    pub fn optical_single() -> Basis {
        Basis {
            labels: vec!["1".into(), "r".into()],
            rydberg: vec![0, 1],
            excitation: vec![0, 1],
        }
    }

    pub fn optical_pair(v_rr: Blockade) -> Basis {
        Basis::product(&[("1", 0, 0), ("r", 1, 1)], v_rr.is_infinite())
    }

    /// Bright/dark motional basis {|gg>, |B>, |D>, |rr>}.
    pub fn motional(v_rr: Blockade) -> Basis {
        let mut labels: Vec<String> = vec!["gg".into(), "B".into(), "D".into()];
        let mut rydberg = vec![0, 1, 1];
        let mut excitation = vec![0, 1, 1];
        if !v_rr.is_infinite() {
            labels.push("rr".into());
            rydberg.push(2);
            excitation.push(2);
        }
        Basis { labels, rydberg, excitation }
    }
}

/// A square operator over a working basis.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub basis: Basis,
    pub matrix: Array2<C64>,
    pub hermitian: bool,
}

impl OperatorMatrix {
    fn new(basis: Basis, matrix: Array2<C64>) -> Self {
        let hermitian = hermiticity_defect(&matrix) < 1e-12;
        OperatorMatrix { basis, matrix, hermitian }
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }
}

/// Per-atom laser drive, for asymmetric perturbation studies. MHz units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomLaser {
    pub omega_l: f64,
    pub delta_l: f64,
}

impl AtomLaser {
    pub fn of(params: &DressingParams) -> Self {
        AtomLaser { omega_l: params.omega_l, delta_l: params.delta_l }
    }
}

/// Rotating-frame offset of |a> (angular): chosen so the selected dressed
/// branch of the *nominal* parameters sits at −δ̃_μw (zero by default).
/// Perturbed atoms see the same microwave frequency, so the same offset.
pub fn frame_offset_a(nominal: &DressingParams) -> f64 {
    let atom = dress_single(nominal);
    -nominal.delta_mw_override_ang() - atom.e_ls1
}

/// Single-atom 4×4 Hamiltonian on {|0>, |1>, |a>, |r>} at microwave phase
/// `xi`. |0> is fully decoupled.
pub fn single_atom_hamiltonian(params: &DressingParams, xi: f64) -> OperatorMatrix {
    let basis = Basis::atom();
    let delta_a = frame_offset_a(params);
    let mut h = Array2::<C64>::zeros((4, 4));
    h[(2, 2)] = C64::new(delta_a, 0.0);
    h[(3, 3)] = C64::new(delta_a - params.delta_l_ang(), 0.0);
    let mw = C64::from_polar(params.omega_mw_ang() / 2.0, xi);
    h[(2, 1)] = mw; // <a|h|1> = (Ω_μw/2)·e^{iξ}
    h[(1, 2)] = mw.conj();
    let laser = C64::new(params.omega_l_ang() / 2.0, 0.0);
    h[(3, 2)] = laser;
    h[(2, 3)] = laser;
    OperatorMatrix::new(basis, h)
}

/// Two-atom Hamiltonian h⊗1 + 1⊗h + V_rr|rr><rr| on the 16-state product
/// basis (15 when the blockade is perfect and |rr> is truncated away).
pub fn two_atom_hamiltonian(params: &DressingParams, xi: f64) -> OperatorMatrix {
    let h1 = single_atom_hamiltonian(params, xi).matrix;
    let eye = Array2::<C64>::eye(4);
    let mut h = kron(&h1, &eye) + kron(&eye, &h1);
    match params.v_rr_ang() {
        Some(v) => {
            h[(15, 15)] += C64::new(v, 0.0);
            OperatorMatrix::new(Basis::two_atom(params.v_rr), h)
        }
        None => {
            let keep: Vec<usize> = (0..15).collect();
            let reduced = select_submatrix(&h, &keep);
            OperatorMatrix::new(Basis::two_atom(Blockade::Infinite), reduced)
        }
    }
}

/// Optical-control baseline: per-atom laser coupling (Ω_L/2)·e^{iξ_L}
/// |r><1| + h.c. with −Δ_L on |r>, plus the blockade shift. 9×9, or 8×8
/// with |rr> truncated.
pub fn optical_two_atom_hamiltonian(
    omega_l_mhz: f64,
    delta_l_mhz: f64,
    v_rr: Blockade,
    xi_l: f64,
) -> OperatorMatrix {
    let mut h1 = Array2::<C64>::zeros((3, 3));
    h1[(2, 2)] = C64::new(-mhz_to_angular(delta_l_mhz), 0.0);
    let drive = C64::from_polar(mhz_to_angular(omega_l_mhz) / 2.0, xi_l);
    h1[(2, 1)] = drive;
    h1[(1, 2)] = drive.conj();
    let eye = Array2::<C64>::eye(3);
    let mut h = kron(&h1, &eye) + kron(&eye, &h1);
    match v_rr {
        Blockade::Finite(v) => {
            h[(8, 8)] += C64::new(mhz_to_angular(v), 0.0);
            OperatorMatrix::new(Basis::optical_two_atom(v_rr), h)
        }
        Blockade::Infinite => {
            let keep: Vec<usize> = (0..8).collect();
            let reduced = select_submatrix(&h, &keep);
            OperatorMatrix::new(Basis::optical_two_atom(Blockade::Infinite), reduced)
        }
    }
}

/// Parameters of the bright/dark motional model. Laser frequencies in
/// MHz; `k_l`, `mass` and the momenta only enter through the Doppler
/// combinations k·p/m, which must come out in rad/μs.
#[derive(Debug, Clone, Copy)]
pub struct MotionalParams {
    pub omega_l1: f64,
    pub omega_l2: f64,
    pub delta: f64,
    pub v_rr: Blockade,
    /// Laser wavenumber, rad/μm.
    pub k_l: f64,
    /// Atomic mass, in units consistent with the momenta.
    pub mass: f64,
    /// Relative momentum (p1 − p2)/2.
    pub p_rel: f64,
    /// Center-of-mass momentum p1 + p2.
    pub p_com: f64,
}

impl MotionalParams {
    /// Symmetric, motionless instance matching a `DressingParams` set.
    pub fn symmetric(params: &DressingParams) -> Self {
        MotionalParams {
            omega_l1: params.omega_l,
            omega_l2: params.omega_l,
            delta: params.delta_l,
            v_rr: params.v_rr,
            k_l: 0.0,
            mass: 1.0,
            p_rel: 0.0,
            p_com: 0.0,
        }
    }

    /// Bright-state coupling Ω⁺ = (Ω_L1 + Ω_L2)/√2, angular.
    pub fn omega_plus(&self) -> f64 {
        mhz_to_angular(self.omega_l1 + self.omega_l2) / std::f64::consts::SQRT_2
    }

    /// Dark-state coupling Ω⁻ = (Ω_L1 − Ω_L2)/√2, angular.
    pub fn omega_minus(&self) -> f64 {
        mhz_to_angular(self.omega_l1 - self.omega_l2) / std::f64::consts::SQRT_2
    }

    /// Bright–dark coupling k_L·p_rel/m, rad/μs.
    pub fn doppler_rel(&self) -> f64 {
        self.k_l * self.p_rel / self.mass
    }

    /// Per-excitation Doppler shift k_L·P_com/(2m), rad/μs.
    pub fn doppler_com(&self) -> f64 {
        self.k_l * self.p_com / (2.0 * self.mass)
    }
}

/// Motional Hamiltonian on {|gg>, |B>, |D>, |rr>} (|rr> truncated for a
/// perfect blockade): −Δ on the single-excitation states, −(2Δ − V_rr) on
/// |rr>, Ω±/2 ladder couplings, the relative-momentum B–D coupling, and
/// the center-of-mass Doppler shift per Rydberg excitation.
pub fn motional_hamiltonian(mp: &MotionalParams) -> OperatorMatrix {
    let basis = Basis::motional(mp.v_rr);
    let n = basis.dim();
    let delta = mhz_to_angular(mp.delta);
    let mut h = Array2::<C64>::zeros((n, n));
    let re = |x: f64| C64::new(x, 0.0);
    h[(1, 1)] = re(-delta + mp.doppler_com());
    h[(2, 2)] = re(-delta + mp.doppler_com());
    h[(0, 1)] = re(mp.omega_plus() / 2.0);
    h[(1, 0)] = re(mp.omega_plus() / 2.0);
    h[(0, 2)] = re(mp.omega_minus() / 2.0);
    h[(2, 0)] = re(mp.omega_minus() / 2.0);
    h[(1, 2)] = re(-mp.doppler_rel());
    h[(2, 1)] = re(-mp.doppler_rel());
    if let Blockade::Finite(v) = mp.v_rr {
        h[(3, 3)] = re(-(2.0 * delta - mhz_to_angular(v)) + 2.0 * mp.doppler_com());
        h[(1, 3)] = re(mp.omega_plus() / 2.0);
        h[(3, 1)] = re(mp.omega_plus() / 2.0);
        h[(2, 3)] = re(mp.omega_minus() / 2.0);
        h[(3, 2)] = re(mp.omega_minus() / 2.0);
    }
    OperatorMatrix::new(basis, h)
}

/// Non-Hermitian effective Hamiltonian H − i(Γ_r/2)·N_r, where N_r counts
/// Rydberg excitations per basis state, so |rr> decays at 2Γ_r.
pub fn apply_decay(h: &OperatorMatrix, gamma_r: f64) -> OperatorMatrix {
    let mut m = h.matrix.clone();
    for (i, &nr) in h.basis.rydberg.iter().enumerate() {
        m[(i, i)] -= C64::new(0.0, gamma_r * f64::from(nr) / 2.0);
    }
    let hermitian = h.hermitian && gamma_r == 0.0;
    OperatorMatrix { basis: h.basis.clone(), matrix: m, hermitian }
}

pub(crate) fn select_submatrix(h: &Array2<C64>, keep: &[usize]) -> Array2<C64> {
    Array2::from_shape_fn((keep.len(), keep.len()), |(i, j)| h[(keep[i], keep[j])])
}

/// Static + drive split of one propagation sector: H(ξ) = h_static +
/// e^{iξ}·drive + e^{−iξ}·drive†. The drive raises the excitation counter
/// by one, so H(ξ) = D(ξ)·H(0)·D(ξ)† with D = diag(e^{iξ·excitation}).
#[derive(Debug, Clone)]
pub struct SectorOperators {
    pub basis: Basis,
    pub h_static: Array2<C64>,
    pub drive: Array2<C64>,
}

impl SectorOperators {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn hamiltonian(&self, xi: f64) -> Array2<C64> {
        let ph = C64::from_polar(1.0, xi);
        let mut h = self.h_static.clone();
        h = h + self.drive.mapv(|x| x * ph);
        h = h + self.drive.t().mapv(|x| x.conj() * ph.conj());
        h
    }

    /// dH/dξ = i·e^{iξ}·drive − i·e^{−iξ}·drive†.
    pub fn hamiltonian_phase_derivative(&self, xi: f64) -> Array2<C64> {
        let ph = C64::i() * C64::from_polar(1.0, xi);
        let mut e = self.drive.mapv(|x| x * ph);
        e = e + self.drive.t().mapv(|x| x.conj() * ph.conj() * -1.0);
        e
    }

    /// Rydberg occupancy as a real diagonal.
    pub fn rydberg_diag(&self) -> Array1<f64> {
        self.basis.rydberg.iter().map(|&n| f64::from(n)).collect()
    }
}

/// Single active atom {|1>, |a>, |r>} of the microwave model, with its
/// own laser parameters but the shared rotating frame of `nominal`.
pub fn mw_single_sector(
    atom: &AtomLaser,
    nominal: &DressingParams,
    gamma_r: f64,
) -> SectorOperators {
    let basis = Basis::mw_single();
    let delta_a = frame_offset_a(nominal);
    let mut h = Array2::<C64>::zeros((3, 3));
    h[(1, 1)] = C64::new(delta_a, 0.0);
    h[(2, 2)] = C64::new(delta_a - mhz_to_angular(atom.delta_l), -gamma_r / 2.0);
    let laser = C64::new(mhz_to_angular(atom.omega_l) / 2.0, 0.0);
    h[(2, 1)] = laser;
    h[(1, 2)] = laser;
    let mut drive = Array2::<C64>::zeros((3, 3));
    drive[(1, 0)] = C64::new(nominal.omega_mw_ang() / 2.0, 0.0);
    SectorOperators { basis, h_static: h, drive }
}

/// Two active atoms {|1>, |a>, |r>}⊗2 of the microwave model.
pub fn mw_pair_sector(
    atom1: &AtomLaser,
    atom2: &AtomLaser,
    nominal: &DressingParams,
    gamma_r: f64,
) -> SectorOperators {
    let basis = Basis::mw_pair(nominal.v_rr);
    let delta_a = frame_offset_a(nominal);
    let single = |atom: &AtomLaser| {
        let mut h = Array2::<C64>::zeros((3, 3));
        h[(1, 1)] = C64::new(delta_a, 0.0);
        h[(2, 2)] = C64::new(delta_a - mhz_to_angular(atom.delta_l), 0.0);
        let laser = C64::new(mhz_to_angular(atom.omega_l) / 2.0, 0.0);
        h[(2, 1)] = laser;
        h[(1, 2)] = laser;
        h
    };
    let eye = Array2::<C64>::eye(3);
    let mut h = kron(&single(atom1), &eye) + kron(&eye, &single(atom2));
    if let Some(v) = nominal.v_rr_ang() {
        h[(8, 8)] += C64::new(v, 0.0);
    }
    let mut raise1 = Array2::<C64>::zeros((3, 3));
    raise1[(1, 0)] = C64::new(nominal.omega_mw_ang() / 2.0, 0.0);
    let mut drive = kron(&raise1, &eye) + kron(&eye, &raise1);

    let keep: Vec<usize> = if nominal.v_rr.is_infinite() {
        (0..9).filter(|&i| i != 8).collect()
    } else {
        (0..9).collect()
    };
    h = select_submatrix(&h, &keep);
    drive = select_submatrix(&drive, &keep);
    for (row, &i) in keep.iter().enumerate() {
        let nr = [0, 0, 1, 0, 0, 1, 1, 1, 2][i];
        h[(row, row)] -= C64::new(0.0, gamma_r * f64::from(nr) / 2.0);
    }
    SectorOperators { basis, h_static: h, drive }
}

/// Single active atom {|1>, |r>} of the optical model.
pub fn optical_single_sector(omega_l_mhz: f64, delta_l_mhz: f64, gamma_r: f64) -> SectorOperators {
    let basis = Basis::optical_single();
    let mut h = Array2::<C64>::zeros((2, 2));
    h[(1, 1)] = C64::new(-mhz_to_angular(delta_l_mhz), -gamma_r / 2.0);
    let mut drive = Array2::<C64>::zeros((2, 2));
    drive[(1, 0)] = C64::new(mhz_to_angular(omega_l_mhz) / 2.0, 0.0);
    SectorOperators { basis, h_static: h, drive }
}

/// Two active atoms {|1>, |r>}⊗2 of the optical model.
pub fn optical_pair_sector(
    omega_l_mhz: f64,
    delta_l_mhz: f64,
    v_rr: Blockade,
    gamma_r: f64,
) -> SectorOperators {
    let basis = Basis::optical_pair(v_rr);
    let mut h1 = Array2::<C64>::zeros((2, 2));
    h1[(1, 1)] = C64::new(-mhz_to_angular(delta_l_mhz), 0.0);
    let eye = Array2::<C64>::eye(2);
    let mut h = kron(&h1, &eye) + kron(&eye, &h1);
    if let Blockade::Finite(v) = v_rr {
        h[(3, 3)] += C64::new(mhz_to_angular(v), 0.0);
    }
    let mut raise1 = Array2::<C64>::zeros((2, 2));
    raise1[(1, 0)] = C64::new(mhz_to_angular(omega_l_mhz) / 2.0, 0.0);
    let mut drive = kron(&raise1, &eye) + kron(&eye, &raise1);
    let keep: Vec<usize> = if v_rr.is_infinite() { (0..3).collect() } else { (0..4).collect() };
    h = select_submatrix(&h, &keep);
    drive = select_submatrix(&drive, &keep);
    for (row, &i) in keep.iter().enumerate() {
        let nr = [0, 1, 1, 2][i];
        h[(row, row)] -= C64::new(0.0, gamma_r * f64::from(nr) / 2.0);
    }
    SectorOperators { basis, h_static: h, drive }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dressed::Branch;
    use ndarray::Array1;
    use std::f64::consts::{SQRT_2, TAU};

    fn params(omega_l: f64, delta_l: f64) -> DressingParams {
        DressingParams::new(omega_l, delta_l, 1.0, 0.01)
    }

    fn symmetrized<'a>(
        h: &'a Array2<C64>,
        basis: &'a Basis,
    ) -> impl Fn(&[(&str, f64)], &[(&str, f64)]) -> C64 + 'a {
        move |bra: &[(&str, f64)], ket: &[(&str, f64)]| {
            let mut acc = C64::new(0.0, 0.0);
            for &(bl, bw) in bra {
                for &(kl, kw) in ket {
                    let bi = basis.index_of(bl).unwrap();
                    let ki = basis.index_of(kl).unwrap();
                    acc += C64::new(bw * kw, 0.0) * h[(bi, ki)];
                }
            }
            acc
        }
    }

    #[test]
    fn undressed_single_atom_is_resonant_rabi_on_1a() {
        // Ω_L = 0 with red detuning: the a-connected branch is Lower and
        // the default frame puts |a> at zero.
        let p = params(0.0, -5.9);
        let h = single_atom_hamiltonian(&p, 0.0);
        assert!(h.hermitian);
        let m = &h.matrix;
        assert!((m[(1, 1)]).norm() < 1e-12);
        assert!((m[(2, 2)]).norm() < 1e-12);
        assert!((m[(2, 1)] - C64::new(TAU / 2.0, 0.0)).norm() < 1e-12);
        // |0> fully decoupled.
        for k in 0..4 {
            assert_eq!(m[(0, k)], C64::new(0.0, 0.0));
            assert_eq!(m[(k, 0)], C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn undressed_blue_detuning_with_upper_branch_is_resonant() {
        let mut p = params(0.0, 4.0);
        p.branch = Branch::Upper;
        let h = single_atom_hamiltonian(&p, 0.0);
        assert!(h.matrix[(2, 2)].norm() < 1e-12);
    }

    #[test]
    fn dressed_resonance_zeroes_the_selected_branch_eigenvalue() {
        let p = params(10.0, -5.9);
        let h = single_atom_hamiltonian(&p, 0.3);
        // 2×2 a–r block eigenvalues via the quadratic formula.
        let da = h.matrix[(2, 2)].re;
        let dr = h.matrix[(3, 3)].re;
        let k = h.matrix[(3, 2)].re;
        let mean = (da + dr) / 2.0;
        let rad = ((da - dr) / 2.0).hypot(k);
        let lower = mean - rad;
        assert!(lower.abs() < 1e-10, "selected branch sits at {lower}");
        // Its eigenvector matches the dressed amplitudes (in magnitude;
        // the amplitude convention differs by the |r> sign gauge).
        let atom = dress_single(&p);
        let va = k / (k * k + (lower - da) * (lower - da)).sqrt();
        let vr = (lower - da) / (k * k + (lower - da) * (lower - da)).sqrt();
        assert!((va.abs() - atom.cos_half_theta.abs()).abs() < 1e-10);
        assert!((vr.abs() - atom.sin_half_theta.abs()).abs() < 1e-10);
    }

    #[test]
    fn microwave_detuning_override_shifts_the_branch() {
        let mut p = params(10.0, -5.9);
        p.delta_mw_override = Some(0.25);
        let h = single_atom_hamiltonian(&p, 0.0);
        let da = h.matrix[(2, 2)].re;
        let dr = h.matrix[(3, 3)].re;
        let k = h.matrix[(3, 2)].re;
        let lower = (da + dr) / 2.0 - ((da - dr) / 2.0).hypot(k);
        assert!((lower + mhz_to_angular(0.25)).abs() < 1e-10);
    }

    #[test]
    fn two_atom_elements_match_the_symmetrized_expansion() {
        let p = params(10.0, -5.9);
        let xi = 0.7;
        let h = two_atom_hamiltonian(&p, xi);
        assert_eq!(h.dim(), 15);
        assert!(h.hermitian);
        let elem = symmetrized(&h.matrix, &h.basis);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // <1a_+|H|11> = √2·(Ω_μw/2)·e^{iξ}
        let got = elem(&[("1a", s), ("a1", s)], &[("11", 1.0)]);
        let expect = C64::from_polar(SQRT_2 * p.omega_mw_ang() / 2.0, xi);
        assert!((got - expect).norm() < 1e-10);
        // <ar_+|H|aa> = √2·(Ω_L/2)
        let got = elem(&[("ar", s), ("ra", s)], &[("aa", 1.0)]);
        assert!((got - C64::new(SQRT_2 * p.omega_l_ang() / 2.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn finite_blockade_keeps_rr_with_the_vdw_shift() {
        let mut p = params(10.0, -5.9);
        p.v_rr = Blockade::Finite(50.0);
        let h = two_atom_hamiltonian(&p, 0.0);
        assert_eq!(h.dim(), 16);
        let rr = h.basis.index_of("rr").unwrap();
        let single = single_atom_hamiltonian(&p, 0.0);
        let dr = single.matrix[(3, 3)];
        let expect = dr * 2.0 + C64::new(mhz_to_angular(50.0), 0.0);
        assert!((h.matrix[(rr, rr)] - expect).norm() < 1e-10);
    }

    #[test]
    fn swap_commutes_for_identical_atoms() {
        let p = params(10.0, -5.9);
        let h = two_atom_hamiltonian(&p, 1.1);
        let b = &h.basis;
        let n = b.dim();
        // Swap permutation from labels.
        let mut perm = vec![0usize; n];
        for (i, l) in b.labels.iter().enumerate() {
            let swapped: String = l.chars().rev().collect();
            perm[i] = b.index_of(&swapped).unwrap();
        }
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let d = (h.matrix[(perm[i], perm[j])] - h.matrix[(i, j)]).norm();
                worst = worst.max(d);
            }
        }
        assert!(worst < 1e-12, "swap symmetry violated by {worst}");
    }

    #[test]
    fn zero_sector_is_inert() {
        let p = params(10.0, -5.9);
        let h = two_atom_hamiltonian(&p, 0.4);
        let b = &h.basis;
        for (i, li) in b.labels.iter().enumerate() {
            for (j, lj) in b.labels.iter().enumerate() {
                let zi: Vec<bool> = li.chars().map(|c| c == '0').collect();
                let zj: Vec<bool> = lj.chars().map(|c| c == '0').collect();
                if zi != zj {
                    assert_eq!(h.matrix[(i, j)], C64::new(0.0, 0.0), "{li} <-> {lj}");
                }
            }
        }
    }

    #[test]
    fn optical_elements_match_the_symmetrized_expansion() {
        let xi = -0.3;
        let h = optical_two_atom_hamiltonian(2.0, 0.5, Blockade::Finite(40.0), xi);
        assert_eq!(h.dim(), 9);
        let elem = symmetrized(&h.matrix, &h.basis);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let got = elem(&[("1r", s), ("r1", s)], &[("11", 1.0)]);
        let expect = C64::from_polar(SQRT_2 * mhz_to_angular(2.0) / 2.0, xi);
        assert!((got - expect).norm() < 1e-10);
        let rr = h.basis.index_of("rr").unwrap();
        let expect_rr = C64::new(mhz_to_angular(-2.0 * 0.5 + 40.0), 0.0);
        assert!((h.matrix[(rr, rr)] - expect_rr).norm() < 1e-10);
    }

    #[test]
    fn noninteracting_optical_pair_is_a_kron_sum() {
        let h = optical_two_atom_hamiltonian(2.0, 1.0, Blockade::Finite(0.0), 0.2);
        let mut h1 = Array2::<C64>::zeros((3, 3));
        h1[(2, 2)] = C64::new(-mhz_to_angular(1.0), 0.0);
        let d = C64::from_polar(mhz_to_angular(2.0) / 2.0, 0.2);
        h1[(2, 1)] = d;
        h1[(1, 2)] = d.conj();
        let eye = Array2::<C64>::eye(3);
        let expect = kron(&h1, &eye) + kron(&eye, &h1);
        let worst = (&h.matrix - &expect).iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(worst < 1e-14);
    }

    #[test]
    fn motional_model_elements() {
        let mp = MotionalParams {
            omega_l1: 9.0,
            omega_l2: 11.0,
            delta: -5.9,
            v_rr: Blockade::Finite(30.0),
            k_l: 2.0,
            mass: 4.0,
            p_rel: 1.2,
            p_com: 3.0,
        };
        let h = motional_hamiltonian(&mp);
        assert!(h.hermitian);
        let b = &h.basis;
        let (gg, bb, dd, rr) = (0, 1, 2, 3);
        assert_eq!(b.labels, vec!["gg", "B", "D", "rr"]);
        assert!((h.matrix[(bb, dd)].re + mp.doppler_rel()).abs() < 1e-12);
        assert!((h.matrix[(gg, bb)].re - mp.omega_plus() / 2.0).abs() < 1e-12);
        assert!((h.matrix[(gg, dd)].re - mp.omega_minus() / 2.0).abs() < 1e-12);
        // <rr|H_com|rr> is twice the per-excitation Doppler shift.
        let rr_diag = h.matrix[(rr, rr)].re;
        let expect = -(2.0 * mhz_to_angular(-5.9) - mhz_to_angular(30.0)) + 2.0 * mp.doppler_com();
        assert!((rr_diag - expect).abs() < 1e-12);
    }

    #[test]
    fn symmetric_motionless_model_decouples_the_dark_state() {
        let p = params(10.0, -5.9);
        let mp = MotionalParams::symmetric(&p);
        let h = motional_hamiltonian(&mp);
        assert_eq!(h.dim(), 3);
        assert!((mp.omega_plus() - SQRT_2 * p.omega_l_ang()).abs() < 1e-12);
        assert_eq!(mp.omega_minus(), 0.0);
        let d = h.basis.index_of("D").unwrap();
        for k in 0..h.dim() {
            if k != d {
                assert_eq!(h.matrix[(d, k)], C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn motional_model_reduces_to_the_pair_block() {
        // At the symmetric motionless point the {|aa>, |ar>_+, |rr>} block
        // of the two-atom Hamiltonian (Ω_μw = 0) equals the motional model
        // up to the global frame offset 2δ_a.
        let mut p = params(10.0, -5.9);
        p.omega_mw = 0.0;
        p.v_rr = Blockade::Finite(25.0);
        let h2 = two_atom_hamiltonian(&p, 0.0);
        let elem = symmetrized(&h2.matrix, &h2.basis);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let aa: &[(&str, f64)] = &[("aa", 1.0)];
        let arp: &[(&str, f64)] = &[("ar", s), ("ra", s)];
        let rr: &[(&str, f64)] = &[("rr", 1.0)];
        let offset = 2.0 * frame_offset_a(&p);

        let mp = MotionalParams::symmetric(&p);
        let hm = motional_hamiltonian(&mp);
        let gg = 0;
        let b = 1;
        let r = 3;
        let pairs: Vec<(C64, C64)> = vec![
            (elem(aa, aa), hm.matrix[(gg, gg)] + C64::new(offset, 0.0)),
            (elem(arp, arp), hm.matrix[(b, b)] + C64::new(offset, 0.0)),
            (elem(rr, rr), hm.matrix[(r, r)] + C64::new(offset, 0.0)),
            (elem(aa, arp), hm.matrix[(gg, b)]),
            (elem(arp, rr), hm.matrix[(b, r)]),
            (elem(aa, rr), hm.matrix[(gg, r)]),
        ];
        for (got, expect) in pairs {
            assert!((got - expect).norm() < 1e-10, "{got} vs {expect}");
        }
    }

    #[test]
    fn decay_counts_rydberg_occupancy() {
        let mut p = params(10.0, -5.9);
        p.v_rr = Blockade::Finite(50.0);
        let h = two_atom_hamiltonian(&p, 0.0);
        let heff = apply_decay(&h, 0.02);
        assert!(!heff.hermitian);
        let b = &heff.basis;
        let one_r = b.index_of("1r").unwrap();
        let rr = b.index_of("rr").unwrap();
        assert!((heff.matrix[(one_r, one_r)].im + 0.01).abs() < 1e-15);
        assert!((heff.matrix[(rr, rr)].im + 0.02).abs() < 1e-15);
        let no_decay = apply_decay(&h, 0.0);
        assert_eq!(no_decay.matrix, h.matrix);
        assert!(no_decay.hermitian);
    }

    #[test]
    fn sector_phase_conjugation_identity() {
        // H(ξ) = D(ξ)·H(0)·D(ξ)† with D = diag(e^{iξ·excitation}).
        let p = params(10.0, -5.9);
        let sec = mw_pair_sector(&AtomLaser::of(&p), &AtomLaser::of(&p), &p, 0.01);
        let xi = 0.83;
        let h_xi = sec.hamiltonian(xi);
        let d: Array1<C64> = sec
            .basis
            .excitation
            .iter()
            .map(|&e| C64::from_polar(1.0, xi * f64::from(e)))
            .collect();
        let mut conj = sec.hamiltonian(0.0);
        for i in 0..sec.dim() {
            for j in 0..sec.dim() {
                conj[(i, j)] *= d[i] * d[j].conj();
            }
        }
        let worst = (&h_xi - &conj).iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(worst < 1e-14);
    }

    #[test]
    fn sectors_embed_in_the_full_product_hamiltonian() {
        // The pair-sector matrix is the {1,a,r}⊗2 block of the 16×16.
        let p = params(10.0, -5.9);
        let full = two_atom_hamiltonian(&p, 0.9);
        let sec = mw_pair_sector(&AtomLaser::of(&p), &AtomLaser::of(&p), &p, 0.0);
        let h_sec = sec.hamiltonian(0.9);
        for (i, li) in sec.basis.labels.iter().enumerate() {
            for (j, lj) in sec.basis.labels.iter().enumerate() {
                let fi = full.basis.index_of(li).unwrap();
                let fj = full.basis.index_of(lj).unwrap();
                assert!((full.matrix[(fi, fj)] - h_sec[(i, j)]).norm() < 1e-12);
            }
        }
    }
}
