//! GRAPE optimization of piecewise-constant phase waveforms against the
//! CZ fidelity, and quantum-speed-limit (QSL) searches built on it.
//!
//! Exact gradients: with H(ξ) = D(ξ)·H(0)·D(ξ)† each segment propagator
//! obeys dU_i/dξ_i = i·[n̂, U_i], where n̂ is the diagonal excitation
//! counter. Chaining through forward states a_i and adjoint states β_i
//! reduces every component of the gradient to the difference of two
//! overlaps, so a full gradient costs the same as one propagation. The
//! maximization over the free local phase in the fidelity needs no
//! gradient correction (the envelope is stationary there).

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::SectorOperators;
use crate::linalg::EigenSystem;
use crate::metrics::cz_fidelity_from_diagonals;
use crate::propagator::{propagate, GateSystem, PhaseWaveform, Sector, DEFAULT_SUBSTEPS};

/// What the optimizer maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    /// The CZ fidelity alone.
    #[default]
    Fidelity,
    /// Fidelity minus `tr_weight`·T_r, trading gate quality against
    /// integrated Rydberg exposure.
    FidelityMinusTrPenalty,
}

/// A waveform-optimization problem: the physical system, the waveform
/// template and the cost selector.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    pub system: GateSystem,
    pub n_segments: usize,
    pub tau: f64,
    pub cost: CostKind,
    pub tr_weight: f64,
}

impl ControlProblem {
    pub fn new(system: GateSystem, n_segments: usize, tau: f64) -> Self {
        ControlProblem { system, n_segments, tau, cost: CostKind::Fidelity, tr_weight: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.n_segments < 2 {
            return Err(Error::ConfigInvalid {
                field: "n_segments".into(),
                reason: "waveform template needs at least 2 segments".into(),
            });
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::ConfigInvalid {
                field: "tau".into(),
                reason: "gate duration must be positive".into(),
            });
        }
        Ok(())
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        let mut out = self.clone();
        out.tau = tau;
        out
    }
}

/// Optimizer settings. A fixed seed makes the whole run, including all
/// restarts, bit-for-bit reproducible.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OptimizeOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Stop early once 1 − F ≤ epsilon_f.
    pub epsilon_f: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            max_iters: 400,
            grad_tol: 1e-9,
            restarts: 4,
            seed: 0,
            epsilon_f: 1e-9,
        }
    }
}

impl OptimizeOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.restarts == 0 {
            return Err(Error::ConfigInvalid {
                field: "optimizer".into(),
                reason: "max_iters and restarts must be positive".into(),
            });
        }
        if !(self.grad_tol > 0.0) || !(self.epsilon_f > 0.0) {
            return Err(Error::ConfigInvalid {
                field: "optimizer".into(),
                reason: "tolerances must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Best-so-far fidelity after each optimizer iteration; non-decreasing.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub best_fidelity: f64,
}

/// Outcome of a (multi-start) waveform optimization.
#[derive(Debug, Clone)]
pub struct OptimizeReport {
    pub waveform: PhaseWaveform,
    pub fidelity: f64,
    /// Value of the selected cost (equals fidelity unless a T_r penalty
    /// is active).
    pub cost_value: f64,
    /// Rydberg time of the returned waveform (decay-free propagation).
    pub t_r: f64,
    pub converged: bool,
    pub iterations: usize,
    pub restarts_run: usize,
    pub trace: Vec<TracePoint>,
}

/// Deterministic seed-splitting: every consumer of randomness derives its
/// own stream as splitmix64(base ⊕ tag, index)-style hashing, so parallel
/// sweeps and restarts never share or race a generator.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(stream.wrapping_add(1)))
        .wrapping_add(0x2545_f491_4f6c_dd1du64.wrapping_mul(index.wrapping_add(1)));
    for _ in 0..2 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

struct SectorEngine {
    exc: Vec<f64>,
    n_r: Array1<f64>,
    u0: Array2<C64>,
    u0h: Array2<C64>,
    /// Sub-step propagators exp(−i·H(0)·m·dt/M), m = 1..=M; only built
    /// when the cost includes a T_r penalty.
    subs: Vec<Array2<C64>>,
    dim: usize,
}

impl SectorEngine {
    fn build(ops: &SectorOperators, dt: f64, substeps: Option<usize>) -> SectorEngine {
        let eig = EigenSystem::new(&ops.hamiltonian(0.0));
        let u0 = eig.propagator(dt);
        let u0h = u0.t().mapv(|x| x.conj());
        let subs = match substeps {
            Some(m) => (1..=m).map(|k| eig.propagator(k as f64 * dt / m as f64)).collect(),
            None => Vec::new(),
        };
        SectorEngine {
            exc: ops.basis.excitation.iter().map(|&e| f64::from(e)).collect(),
            n_r: ops.rydberg_diag(),
            u0: u0.clone(),
            u0h,
            subs,
            dim: u0.nrows(),
        }
    }

    fn rotate(&self, v: &Array1<C64>, xi: f64) -> Array1<C64> {
        v.iter()
            .zip(&self.exc)
            .map(|(&a, &e)| a * C64::from_polar(1.0, xi * e))
            .collect()
    }

    /// a_i = U(ξ)·a_{i−1} using U(ξ) = D(ξ)·U0·D(ξ)†.
    fn step_forward(&self, a: &Array1<C64>, xi: f64) -> Array1<C64> {
        self.rotate(&self.u0.dot(&self.rotate(a, -xi)), xi)
    }

    /// β_{i−1} = U(ξ)†·β_i.
    fn step_backward(&self, b: &Array1<C64>, xi: f64) -> Array1<C64> {
        self.rotate(&self.u0h.dot(&self.rotate(b, -xi)), xi)
    }

    /// Diagonal amplitude ⟨0|U(ξ⃗)|0⟩ and its exact gradient.
    ///
    /// With S_i = Σ_j exc_j·conj(β_i[j])·a_i[j], the derivative with
    /// respect to ξ_i is i·(S_i − S_{i−1}).
    fn amplitude_and_gradient(&self, phases: &[f64]) -> (C64, Vec<C64>) {
        let n = phases.len();
        let mut a = Vec::with_capacity(n + 1);
        let mut e0 = Array1::<C64>::zeros(self.dim);
        e0[0] = C64::new(1.0, 0.0);
        a.push(e0.clone());
        for (i, &xi) in phases.iter().enumerate() {
            let next = self.step_forward(&a[i], xi);
            a.push(next);
        }
        let mut beta = vec![Array1::<C64>::zeros(self.dim); n + 1];
        beta[n] = e0;
        for i in (1..=n).rev() {
            beta[i - 1] = self.step_backward(&beta[i], phases[i - 1]);
        }
        let s_val = |k: usize| -> C64 {
            a[k].iter()
                .zip(beta[k].iter())
                .zip(&self.exc)
                .map(|((&ak, &bk), &e)| bk.conj() * ak * e)
                .sum()
        };
        let mut grad = Vec::with_capacity(n);
        let mut s_prev = s_val(0);
        for i in 1..=n {
            let s_here = s_val(i);
            grad.push(C64::i() * (s_here - s_prev));
            s_prev = s_here;
        }
        (a[n][0], grad)
    }

    /// Integrated Rydberg exposure T_k of the |0⟩-index initial state and
    /// its exact gradient, on the trapezoid sub-step grid.
    fn rydberg_time_and_gradient(&self, phases: &[f64], dt: f64) -> (f64, Vec<f64>) {
        let n = phases.len();
        let m = self.subs.len();
        assert!(m > 0, "engine built without sub-step propagators");
        let sub = dt / m as f64;

        // Forward boundary states.
        let mut a = Vec::with_capacity(n + 1);
        let mut e0 = Array1::<C64>::zeros(self.dim);
        e0[0] = C64::new(1.0, 0.0);
        a.push(e0);
        for (i, &xi) in phases.iter().enumerate() {
            let next = self.step_forward(&a[i], xi);
            a.push(next);
        }

        // Trapezoid weights across the global sample grid: interior
        // samples weigh `sub`, the two endpoints `sub`/2. The t = 0
        // endpoint is ξ-independent and its value is n_r[0]·1 = 0 for
        // every sector (the computational state has no Rydberg content),
        // so it contributes to neither value nor gradient.
        let weight = |i: usize, step: usize| -> f64 {
            if i == n - 1 && step == m { sub / 2.0 } else { sub }
        };

        let rot = |v: &Array1<C64>, xi: f64| self.rotate(v, xi);
        let mut value = 0.0;
        // ψ_{i,step} = D(ξ_i)·subs[step−1]·D(ξ_i)†·a_i, populations are
        // D-invariant so the outer rotation is skipped for the value.
        let mut samples: Vec<Vec<Array1<C64>>> = Vec::with_capacity(n);
        for i in 0..n {
            let rotated = rot(&a[i], -phases[i]);
            let mut per_seg = Vec::with_capacity(m);
            for step in 1..=m {
                let psi = self.subs[step - 1].dot(&rotated);
                let p: f64 = psi
                    .iter()
                    .zip(&self.n_r)
                    .map(|(amp, &nr)| amp.norm_sqr() * nr)
                    .sum();
                value += weight(i, step) * p;
                per_seg.push(psi);
            }
            samples.push(per_seg);
        }

        // Adjoint accumulation for samples after each boundary, plus the
        // in-segment commutator term.
        let mut grad = vec![0.0f64; n];
        let mut acc = Array1::<C64>::zeros(self.dim); // A_j at boundary j = n
        for j in (0..n).rev() {
            let xi = phases[j];
            // In-segment term: −2·Σ_step w·Re[i·⟨N̂ψ|W^{(ξ)}|n̂·a_j⟩].
            let na: Array1<C64> = a[j]
                .iter()
                .zip(&self.exc)
                .map(|(&v, &e)| v * e)
                .collect();
            let na_rot = rot(&na, -xi);
            let mut in_seg = 0.0;
            for (step, psi) in samples[j].iter().enumerate() {
                let w_na = self.subs[step].dot(&na_rot);
                // ⟨N̂ψ_rot | W·(n̂a)_rot⟩; the outer D(ξ) cancels in the
                // inner product.
                let amp: C64 = psi
                    .iter()
                    .zip(w_na.iter())
                    .zip(&self.n_r)
                    .map(|((&p, &w), &nr)| p.conj() * w * nr)
                    .sum();
                in_seg += -2.0 * weight(j, step + 1) * (C64::i() * amp).re;
            }
            // After-segment term via A_j: 2·Re[i·(⟨A_j|n̂|a_{j+1}⟩ − ⟨U†A_j|n̂|a_j⟩)].
            let u_adj_acc = self.step_backward(&acc, xi);
            let s_after: C64 = acc
                .iter()
                .zip(a[j + 1].iter())
                .zip(&self.exc)
                .map(|((&b, &v), &e)| b.conj() * v * e)
                .sum();
            let s_before: C64 = u_adj_acc
                .iter()
                .zip(a[j].iter())
                .zip(&self.exc)
                .map(|((&b, &v), &e)| b.conj() * v * e)
                .sum();
            grad[j] = in_seg + 2.0 * (C64::i() * (s_after - s_before)).re;

            // A_{j−1} = U_j†·A_j + Σ_step w·(W^{(ξ)})†·N̂·ψ (at boundary j−1).
            let mut source = Array1::<C64>::zeros(self.dim);
            for (step, psi) in samples[j].iter().enumerate() {
                let npsi: Array1<C64> = psi
                    .iter()
                    .zip(&self.n_r)
                    .map(|(&v, &nr)| v * nr)
                    .collect();
                let pulled = self.subs[step].t().mapv(|x| x.conj()).dot(&npsi);
                source = source + pulled.mapv(|x| x * weight(j, step + 1));
            }
            // `source` is expressed at boundary j−1 after undoing D(ξ).
            acc = u_adj_acc + rot(&source, xi);
        }
        (value, grad)
    }
}

/// The fidelity, its gradient, and optionally the T_r penalty for one
/// phase vector.
pub(crate) struct Evaluation {
    pub(crate) fidelity: f64,
    pub(crate) cost: f64,
    /// Gradient of the cost (the quantity being maximized).
    pub(crate) grad: Vec<f64>,
}

/// Anything the quasi-Newton loop can maximize: a smooth cost with its
/// exact gradient. The plain CZ fidelity and the ensemble-averaged
/// robust cost both implement this.
pub(crate) trait CostObjective {
    fn evaluate(&self, phases: &[f64]) -> Evaluation;
}

pub(crate) struct ProblemEngine {
    sectors: Vec<(Sector, SectorEngine)>,
    cost: CostKind,
    tr_weight: f64,
    dt: f64,
    /// |01> and |10> sectors are identical for a symmetric system; the
    /// duplicate is evaluated once and reused.
    symmetric: bool,
}

impl CostObjective for ProblemEngine {
    fn evaluate(&self, phases: &[f64]) -> Evaluation {
        self.evaluate(phases)
    }
}

impl ProblemEngine {
    pub(crate) fn build(problem: &ControlProblem) -> ProblemEngine {
        let dt = problem.tau / problem.n_segments as f64;
        let substeps = match problem.cost {
            CostKind::Fidelity => None,
            CostKind::FidelityMinusTrPenalty => Some(DEFAULT_SUBSTEPS),
        };
        let symmetric = match &problem.system {
            GateSystem::Microwave(m) => m.atom1 == m.atom2,
            GateSystem::Optical(_) => true,
        };
        let sectors = problem
            .system
            .sectors()
            .into_iter()
            .filter(|(s, _)| !(symmetric && *s == Sector::S10))
            .map(|(s, ops)| (s, SectorEngine::build(&ops, dt, substeps)))
            .collect();
        ProblemEngine { sectors, cost: problem.cost, tr_weight: problem.tr_weight, dt, symmetric }
    }

    fn evaluate(&self, phases: &[f64]) -> Evaluation {
        let n = phases.len();
        let mut u = [C64::new(0.0, 0.0); 3];
        let mut du: [Vec<C64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        let mut t_r = 0.0;
        let mut dt_r = vec![0.0; n];
        for (sector, engine) in &self.sectors {
            let (amp, grad) = engine.amplitude_and_gradient(phases);
            let copies: &[usize] = match sector {
                Sector::S01 if self.symmetric => &[0, 1],
                Sector::S01 => &[0],
                Sector::S10 => &[1],
                Sector::S11 => &[2],
            };
            for &slot in copies {
                u[slot] = amp;
                du[slot] = grad.clone();
            }
            if self.cost == CostKind::FidelityMinusTrPenalty {
                let (tk, gk) = engine.rydberg_time_and_gradient(phases, self.dt);
                let mult = if *sector == Sector::S01 && self.symmetric { 2.0 } else { 1.0 };
                t_r += mult * tk / 4.0;
                for (g, &d) in dt_r.iter_mut().zip(&gk) {
                    *g += mult * d / 4.0;
                }
            }
        }

        let fit = cz_fidelity_from_diagonals(u[0], u[1], u[2]);
        let phi = fit.phi;
        let e1 = C64::from_polar(1.0, -phi);
        let e2 = C64::from_polar(1.0, -2.0 * phi);
        let z = C64::new(1.0, 0.0) + e1 * (u[0] + u[1]) - e2 * u[2];
        let mut grad = Vec::with_capacity(n);
        for i in 0..n {
            let dz = e1 * (du[0][i] + du[1][i]) - e2 * du[2][i];
            let mut g = (z.conj() * dz).re / 8.0;
            if self.cost == CostKind::FidelityMinusTrPenalty {
                g -= self.tr_weight * dt_r[i];
            }
            grad.push(g);
        }
        let cost = match self.cost {
            CostKind::Fidelity => fit.fidelity,
            CostKind::FidelityMinusTrPenalty => fit.fidelity - self.tr_weight * t_r,
        };
        Evaluation { fidelity: fit.fidelity, cost, grad }
    }
}

/// Exact gradient ∂F/∂ξ_i of the CZ fidelity for a waveform. Matches a
/// central finite-difference stencil to better than 1e−5 relative error.
pub fn fidelity_gradient(problem: &ControlProblem, wf: &PhaseWaveform) -> Result<Vec<f64>> {
    problem.validate()?;
    if wf.n_segments() != problem.n_segments {
        return Err(Error::DimensionMismatch {
            expected: problem.n_segments,
            got: wf.n_segments(),
        });
    }
    let mut fid_problem = problem.clone();
    fid_problem.cost = CostKind::Fidelity;
    let engine = ProblemEngine::build(&fid_problem);
    Ok(engine.evaluate(&wf.phases).grad)
}

/// CZ fidelity of a waveform under `problem`'s system (no penalty).
pub fn waveform_fidelity(problem: &ControlProblem, wf: &PhaseWaveform) -> Result<f64> {
    problem.validate()?;
    let mut fid_problem = problem.clone();
    fid_problem.cost = CostKind::Fidelity;
    let engine = ProblemEngine::build(&fid_problem);
    Ok(engine.evaluate(&wf.phases).fidelity)
}

struct LbfgsOutcome {
    phases: Vec<f64>,
    cost: f64,
    fidelity: f64,
    iterations: usize,
    grad_converged: bool,
    target_reached: bool,
}

/// Quasi-Newton ascent (L-BFGS two-loop with Armijo backtracking) on the
/// cost surface. Maximizes `engine`'s cost.
fn lbfgs_maximize(
    engine: &dyn CostObjective,
    x0: Vec<f64>,
    opts: &OptimizeOptions,
    trace: &mut Vec<TracePoint>,
    best_fidelity_so_far: &mut f64,
    iteration_counter: &mut usize,
) -> LbfgsOutcome {
    const HISTORY: usize = 10;
    let n = x0.len();
    let mut x = x0;
    let mut eval = engine.evaluate(&x);
    let mut best = LbfgsOutcome {
        phases: x.clone(),
        cost: eval.cost,
        fidelity: eval.fidelity,
        iterations: 0,
        grad_converged: false,
        target_reached: false,
    };
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();

    for iter in 0..opts.max_iters {
        let gmax = eval.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if eval.fidelity > best.fidelity {
            best.fidelity = eval.fidelity;
        }
        if eval.cost > best.cost {
            best.cost = eval.cost;
            best.phases = x.clone();
        }
        *best_fidelity_so_far = best_fidelity_so_far.max(best.fidelity);
        *iteration_counter += 1;
        trace.push(TracePoint { iteration: *iteration_counter, best_fidelity: *best_fidelity_so_far });
        best.iterations = iter + 1;
        if 1.0 - eval.fidelity <= opts.epsilon_f {
            best.target_reached = true;
            break;
        }
        if gmax <= opts.grad_tol {
            best.grad_converged = true;
            break;
        }

        // Two-loop recursion on the ascent direction.
        let mut d: Vec<f64> = eval.grad.clone();
        let k = s_hist.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            let a = rho_hist[i] * dot(&s_hist[i], &d);
            alpha[i] = a;
            axpy(&mut d, -a, &y_hist[i]);
        }
        if k > 0 {
            let sy = dot(&s_hist[k - 1], &y_hist[k - 1]);
            let yy = dot(&y_hist[k - 1], &y_hist[k - 1]);
            if yy > 0.0 && sy > 0.0 {
                let scale = sy / yy;
                for v in &mut d {
                    *v *= scale;
                }
            }
        }
        for i in 0..k {
            let b = rho_hist[i] * dot(&y_hist[i], &d);
            axpy(&mut d, alpha[i] - b, &s_hist[i]);
        }
        let mut dir_deriv = dot(&d, &eval.grad);
        if !(dir_deriv > 0.0) {
            // Not an ascent direction; reset to steepest ascent.
            d = eval.grad.clone();
            dir_deriv = dot(&d, &d);
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            if dir_deriv == 0.0 {
                best.grad_converged = true;
                break;
            }
        }

        // Backtracking Armijo line search.
        let mut step = 1.0;
        let c1 = 1e-4;
        let mut accepted = None;
        for _ in 0..40 {
            let mut xt = x.clone();
            axpy(&mut xt, step, &d);
            let et = engine.evaluate(&xt);
            if et.cost >= eval.cost + c1 * step * dir_deriv {
                accepted = Some((xt, et));
                break;
            }
            step *= 0.5;
        }
        let Some((xt, et)) = accepted else {
            // No improvement along the quasi-Newton direction at any step
            // size; treat as converged to numerical precision.
            best.grad_converged = true;
            break;
        };

        let mut s = vec![0.0; n];
        let mut yv = vec![0.0; n];
        for i in 0..n {
            s[i] = xt[i] - x[i];
            // y for a maximization: change of the *descent* gradient of
            // −cost, i.e. g_old − g_new keeps s·y > 0 near a maximum.
            yv[i] = eval.grad[i] - et.grad[i];
        }
        let sy = dot(&s, &yv);
        if sy > 1e-14 {
            if s_hist.len() == HISTORY {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            rho_hist.push(1.0 / sy);
            s_hist.push(s);
            y_hist.push(yv);
        }
        x = xt;
        eval = et;
    }
    if eval.cost > best.cost {
        best.cost = eval.cost;
        best.fidelity = best.fidelity.max(eval.fidelity);
        best.phases = x;
    }
    best
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Multi-start ascent over a generic objective; shared by the plain and
/// the ensemble-robust optimizers.
pub(crate) fn optimize_objective(
    objective: &dyn CostObjective,
    n_segments: usize,
    tau: f64,
    init: Option<&PhaseWaveform>,
    opts: &OptimizeOptions,
) -> Result<OptimizeReport> {
    opts.validate()?;
    let mut trace = Vec::new();
    let mut best_fidelity = 0.0f64;
    let mut iteration_counter = 0usize;
    let mut best: Option<LbfgsOutcome> = None;
    let mut restarts_run = 0;
    let mut converged = false;

    for r in 0..opts.restarts {
        let x0: Vec<f64> = if r == 0 {
            match init {
                Some(wf) => wf.resampled(n_segments).phases,
                None => vec![0.0; n_segments],
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, 1, r as u64));
            (0..n_segments)
                .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
                .collect()
        };
        let out =
            lbfgs_maximize(objective, x0, opts, &mut trace, &mut best_fidelity, &mut iteration_counter);
        restarts_run += 1;
        converged |= out.grad_converged || out.target_reached;
        let stop = out.target_reached;
        if best.as_ref().map_or(true, |b| out.cost > b.cost) {
            best = Some(out);
        }
        if stop {
            break;
        }
    }
    let best = best.expect("at least one restart ran");
    let waveform = PhaseWaveform::new(tau, best.phases)?;
    Ok(OptimizeReport {
        waveform,
        fidelity: best.fidelity,
        cost_value: best.cost,
        t_r: f64::NAN,
        converged,
        iterations: iteration_counter,
        restarts_run,
        trace,
    })
}

/// Multi-start GRAPE optimization. The first restart uses `init` when
/// given (the all-zero waveform otherwise); later restarts draw i.i.d.
/// uniform phases in [−π, π) from per-restart seeds derived from
/// `opts.seed`. Returns the best waveform found; `converged` reports
/// whether any restart met a tolerance rather than the iteration cap.
pub fn optimize_waveform(
    problem: &ControlProblem,
    init: Option<&PhaseWaveform>,
    opts: &OptimizeOptions,
) -> Result<OptimizeReport> {
    problem.validate()?;
    let engine = ProblemEngine::build(problem);
    let mut report = optimize_objective(&engine, problem.n_segments, problem.tau, init, opts)?;
    let record = propagate(&problem.system.with_gamma(0.0), &report.waveform, DEFAULT_SUBSTEPS)?;
    report.t_r = record.t_r;
    Ok(report)
}

/// Quantum-speed-limit search: the shortest duration at which the
/// optimized fidelity reaches 1 − epsilon.
#[derive(Debug, Clone)]
pub struct QslResult {
    pub tau_star: f64,
    pub fidelity: f64,
    pub waveform: PhaseWaveform,
    /// Final bracket (largest failing τ, smallest passing τ).
    pub bracket: (f64, f64),
    /// All probed durations with their best fidelities, in τ order.
    pub probes: Vec<(f64, f64)>,
}

/// Settings for [`qsl_search`].
#[derive(Debug, Clone, Copy)]
pub struct QslOptions {
    /// Target infidelity: a duration passes when 1 − F ≤ epsilon.
    pub epsilon: f64,
    /// Relative bracket width at which bisection stops.
    pub bracket_rtol: f64,
    pub optimize: OptimizeOptions,
}

impl Default for QslOptions {
    fn default() -> Self {
        QslOptions { epsilon: 1e-4, bracket_rtol: 0.01, optimize: OptimizeOptions::default() }
    }
}

/// Bisection on τ with a GRAPE optimization at each probe, warm-started
/// from the nearest converged waveform. `tau_bounds` should bracket the
/// QSL; the coarse pre-scan extends the bracket a few times if not.
pub fn qsl_search(
    problem: &ControlProblem,
    tau_bounds: (f64, f64),
    opts: &QslOptions,
) -> Result<QslResult> {
    problem.validate()?;
    let target = 1.0 - opts.epsilon;
    let mut probes: Vec<(f64, f64)> = Vec::new();
    let mut probe_index = 0u64;

    let mut probe = |tau: f64, warm: Option<&PhaseWaveform>| -> Result<(f64, PhaseWaveform)> {
        let mut popts = opts.optimize;
        popts.seed = derive_seed(opts.optimize.seed, 2, probe_index);
        popts.epsilon_f = (opts.epsilon * 0.5).min(popts.epsilon_f.max(1e-12));
        probe_index += 1;
        let report = optimize_waveform(&problem.with_tau(tau), warm, &popts)?;
        probes.push((tau, report.fidelity));
        Ok((report.fidelity, report.waveform))
    };

    let (lo_in, hi_in) = tau_bounds;
    if !(lo_in > 0.0 && hi_in > lo_in) {
        return Err(Error::ConfigInvalid {
            field: "tau_bounds".into(),
            reason: format!("need 0 < lo < hi, got ({lo_in}, {hi_in})"),
        });
    }

    // Coarse scan from long to short, warm-starting downward.
    const COARSE: usize = 5;
    let mut hi = hi_in;
    let mut pass: Option<(f64, PhaseWaveform)> = None;
    let mut fail: Option<f64> = None;
    for attempt in 0..4 {
        let lo = lo_in / 1.5f64.powi(attempt);
        let ratio = (hi / lo).powf(1.0 / (COARSE - 1) as f64);
        let taus: Vec<f64> = (0..COARSE).map(|k| hi / ratio.powi(k as i32)).collect();
        let mut warm: Option<PhaseWaveform> = pass.as_ref().map(|(_, w)| w.clone());
        for &tau in &taus {
            if pass.as_ref().is_some_and(|(t, _)| *t <= tau) {
                continue;
            }
            let (f, wf) = probe(tau, warm.as_ref())?;
            if f >= target {
                pass = Some((tau, wf.clone()));
                warm = Some(wf);
            } else {
                fail = Some(tau);
                break;
            }
        }
        match (&pass, &fail) {
            (Some(_), Some(_)) => break,
            (None, Some(_)) => {
                // Everything failed: extend upward.
                hi *= 1.5;
                fail = Some(taus[0]);
                let (f, wf) = probe(hi, None)?;
                if f >= target {
                    pass = Some((hi, wf));
                    break;
                }
                if attempt == 3 {
                    return Err(Error::BracketFailed { lo: lo_in, hi, target });
                }
            }
            (Some(_), None) => {
                // Everything passed: continue extending downward.
                if attempt == 3 {
                    break;
                }
            }
            (None, None) => unreachable!("coarse scan probes at least one tau"),
        }
    }
    let (mut hi_pass, mut best_wf) = match pass {
        Some(p) => p,
        None => return Err(Error::BracketFailed { lo: lo_in, hi, target }),
    };
    let Some(mut lo_fail) = fail else {
        // QSL is below every probe we are willing to try; report the
        // smallest passing duration with a degenerate bracket.
        let fidelity = waveform_fidelity(problem, &best_wf.resampled(problem.n_segments))?;
        probes.sort_by(|a, b| a.0.total_cmp(&b.0));
        return Ok(QslResult {
            tau_star: hi_pass,
            fidelity,
            waveform: best_wf,
            bracket: (hi_pass, hi_pass),
            probes,
        });
    };

    // Bisection.
    while hi_pass - lo_fail > opts.bracket_rtol * hi_pass {
        let mid = 0.5 * (hi_pass + lo_fail);
        let (f, wf) = probe(mid, Some(&best_wf))?;
        if f >= target {
            hi_pass = mid;
            best_wf = wf;
        } else {
            lo_fail = mid;
        }
    }

    let fidelity = probes
        .iter()
        .filter(|(t, _)| *t == hi_pass)
        .map(|(_, f)| *f)
        .fold(0.0, f64::max);
    probes.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(QslResult { tau_star: hi_pass, fidelity, waveform: best_wf, bracket: (lo_fail, hi_pass), probes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dressed::DressingParams;
    use rand::Rng;

    fn fig4_problem(n: usize, tau: f64) -> ControlProblem {
        let params = DressingParams::new(10.0, -5.9, 1.0, 0.0);
        ControlProblem::new(GateSystem::microwave(params), n, tau)
    }

    fn random_waveform(n: usize, tau: f64, seed: u64) -> PhaseWaveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PhaseWaveform::new(
            tau,
            (0..n).map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)).collect(),
        )
        .unwrap()
    }

    fn finite_difference(problem: &ControlProblem, wf: &PhaseWaveform, i: usize) -> f64 {
        let h = 1e-6;
        let mut plus = wf.clone();
        plus.phases[i] += h;
        let mut minus = wf.clone();
        minus.phases[i] -= h;
        let fp = waveform_fidelity(problem, &plus).unwrap();
        let fm = waveform_fidelity(problem, &minus).unwrap();
        (fp - fm) / (2.0 * h)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let problem = fig4_problem(12, 1.3);
        for seed in 0..3 {
            let wf = random_waveform(12, 1.3, seed);
            let grad = fidelity_gradient(&problem, &wf).unwrap();
            for i in [0, 3, 7, 11] {
                let fd = finite_difference(&problem, &wf, i);
                let scale = fd.abs().max(1e-8);
                assert!(
                    (grad[i] - fd).abs() / scale < 1e-5,
                    "component {i}: exact {} vs fd {fd}",
                    grad[i]
                );
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences_with_decay_and_asymmetry() {
        use crate::hamiltonian::AtomLaser;
        use crate::propagator::MicrowaveSystem;
        let nominal = DressingParams::new(10.0, -5.9, 1.0, 0.02);
        let system = GateSystem::Microwave(MicrowaveSystem {
            nominal,
            atom1: AtomLaser { omega_l: 10.2, delta_l: -5.9 },
            atom2: AtomLaser { omega_l: 9.9, delta_l: -5.7 },
        });
        let problem = ControlProblem::new(system, 8, 1.1);
        let wf = random_waveform(8, 1.1, 9);
        let grad = fidelity_gradient(&problem, &wf).unwrap();
        for i in [0, 4, 7] {
            let fd = finite_difference(&problem, &wf, i);
            assert!((grad[i] - fd).abs() / fd.abs().max(1e-8) < 1e-5);
        }
    }

    #[test]
    fn zero_drive_means_zero_gradient() {
        let mut params = DressingParams::new(10.0, -5.9, 1.0, 0.0);
        params.omega_mw = 0.0;
        let problem = ControlProblem::new(GateSystem::microwave(params), 6, 1.0);
        let wf = random_waveform(6, 1.0, 4);
        let grad = fidelity_gradient(&problem, &wf).unwrap();
        for g in grad {
            assert!(g.abs() < 1e-14);
        }
    }

    #[test]
    fn penalty_gradient_matches_finite_differences() {
        let mut problem = fig4_problem(6, 1.2);
        problem.cost = CostKind::FidelityMinusTrPenalty;
        problem.tr_weight = 0.7;
        let engine = ProblemEngine::build(&problem);
        let wf = random_waveform(6, 1.2, 77);
        let base = engine.evaluate(&wf.phases);
        let h = 1e-6;
        for i in 0..6 {
            let mut plus = wf.phases.clone();
            plus[i] += h;
            let mut minus = wf.phases.clone();
            minus[i] -= h;
            let fp = engine.evaluate(&plus).cost;
            let fm = engine.evaluate(&minus).cost;
            let fd = (fp - fm) / (2.0 * h);
            assert!(
                (base.grad[i] - fd).abs() / fd.abs().max(1e-7) < 2e-5,
                "component {i}: exact {} vs fd {fd}",
                base.grad[i]
            );
        }
    }

    #[test]
    fn engine_fidelity_agrees_with_propagator_route() {
        let problem = fig4_problem(10, 1.3);
        let wf = random_waveform(10, 1.3, 2);
        let via_engine = waveform_fidelity(&problem, &wf).unwrap();
        let rec = propagate(&problem.system, &wf, 2).unwrap();
        let via_record = crate::metrics::cz_fidelity(&rec.u_comp).unwrap().fidelity;
        assert!((via_engine - via_record).abs() < 1e-12);
    }

    #[test]
    fn optimizer_reaches_high_fidelity_at_fig4_point() {
        // τ = 1.3·(2π/Ω_μw) = 1.3 μs sits just above the QSL.
        let problem = fig4_problem(40, 1.3);
        let opts = OptimizeOptions { epsilon_f: 1e-5, seed: 5, ..Default::default() };
        let report = optimize_waveform(&problem, None, &opts).unwrap();
        assert!(
            report.fidelity >= 1.0 - 1e-4,
            "best fidelity {} after {} iterations",
            report.fidelity,
            report.iterations
        );
    }

    #[test]
    fn short_waveforms_cannot_reach_unit_fidelity() {
        // τ = 0.5·(2π/Ω_μw), far below the QSL.
        let problem = fig4_problem(40, 0.5);
        let opts = OptimizeOptions { restarts: 6, seed: 3, ..Default::default() };
        let report = optimize_waveform(&problem, None, &opts).unwrap();
        assert!(report.fidelity < 1.0 - 1e-2, "got {}", report.fidelity);
    }

    #[test]
    fn trace_is_nondecreasing_and_seeded_runs_are_identical() {
        let problem = fig4_problem(16, 1.3);
        let opts = OptimizeOptions { max_iters: 60, restarts: 2, seed: 42, ..Default::default() };
        let a = optimize_waveform(&problem, None, &opts).unwrap();
        let b = optimize_waveform(&problem, None, &opts).unwrap();
        assert_eq!(a.waveform.phases, b.waveform.phases);
        assert_eq!(a.fidelity.to_bits(), b.fidelity.to_bits());
        assert_eq!(a.trace.len(), b.trace.len());
        let mut last = 0.0;
        for (pa, pb) in a.trace.iter().zip(&b.trace) {
            assert_eq!(pa.best_fidelity.to_bits(), pb.best_fidelity.to_bits());
            assert!(pa.best_fidelity >= last);
            last = pa.best_fidelity;
        }
    }

    #[test]
    fn restarting_from_an_optimum_does_not_regress() {
        let problem = fig4_problem(24, 1.4);
        let opts = OptimizeOptions { epsilon_f: 1e-6, seed: 8, ..Default::default() };
        let first = optimize_waveform(&problem, None, &opts).unwrap();
        let again = optimize_waveform(&problem, Some(&first.waveform), &opts).unwrap();
        assert!(again.fidelity >= first.fidelity - 1e-9);
    }

    #[test]
    fn derive_seed_separates_streams() {
        let a = derive_seed(1, 1, 0);
        let b = derive_seed(1, 1, 1);
        let c = derive_seed(1, 2, 0);
        let d = derive_seed(2, 1, 0);
        assert!(a != b && a != c && a != d && b != c);
        assert_eq!(a, derive_seed(1, 1, 0));
    }
}
