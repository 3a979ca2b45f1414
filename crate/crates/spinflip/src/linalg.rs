//! Dense complex linear algebra for the small (≤ 16×16) matrices used
//! throughout: eigendecomposition-backed matrix exponentials and the
//! ndarray ⇄ faer conversions they need.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use ndarray::Array2;
use num_complex::Complex64 as C64;

pub(crate) fn to_faer(a: &Array2<C64>) -> Mat<C64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

pub(crate) fn from_faer(m: faer::MatRef<'_, C64>) -> Array2<C64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Eigendecomposition H = V Λ V⁻¹ of a general complex square matrix,
/// cached so that exp(−i·H·t) can be formed exactly for any t.
///
/// The Hamiltonians here are Hermitian up to a small anti-Hermitian decay
/// diagonal, far from any defective point, so the eigenvector matrix is
/// always well conditioned.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<C64>,
    /// Eigenvectors as columns.
    pub vectors: Array2<C64>,
    pub vectors_inv: Array2<C64>,
}

impl EigenSystem {
    pub fn new(h: &Array2<C64>) -> Self {
        assert_eq!(h.nrows(), h.ncols(), "eigendecomposition needs a square matrix");
        let m = to_faer(h);
        let evd = m.eigen().expect("eigendecomposition failed to converge");
        let v = evd.U().to_owned();
        let lu = PartialPivLu::new(v.as_ref());
        let vinv = lu.solve(Mat::<C64>::identity(h.nrows(), h.ncols()));
        let values = (0..h.nrows()).map(|i| evd.S()[i]).collect();
        EigenSystem {
            values,
            vectors: from_faer(v.as_ref()),
            vectors_inv: from_faer(vinv.as_ref()),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// exp(−i·H·t) = V · diag(exp(−i·λ·t)) · V⁻¹.
    pub fn propagator(&self, t: f64) -> Array2<C64> {
        let mut scaled = self.vectors.clone();
        for (k, lam) in self.values.iter().enumerate() {
            let phase = (-C64::i() * lam * t).exp();
            scaled.column_mut(k).mapv_inplace(|x| x * phase);
        }
        scaled.dot(&self.vectors_inv)
    }

    /// V⁻¹ · x, i.e. the eigenbasis coordinates of a state.
    pub fn to_eigenbasis(&self, x: &ndarray::Array1<C64>) -> ndarray::Array1<C64> {
        self.vectors_inv.dot(x)
    }

    /// Evolve eigenbasis coordinates by t and map back to the working basis.
    pub fn evolve_coords(&self, coords: &ndarray::Array1<C64>, t: f64) -> ndarray::Array1<C64> {
        let mut c = coords.clone();
        for (k, lam) in self.values.iter().enumerate() {
            c[k] *= (-C64::i() * lam * t).exp();
        }
        self.vectors.dot(&c)
    }
}

/// Convenience wrapper when the factorization is not reused.
pub fn expm_neg_i_ht(h: &Array2<C64>, t: f64) -> Array2<C64> {
    EigenSystem::new(h).propagator(t)
}

/// Max |a − a†| over all elements.
pub fn hermiticity_defect(a: &Array2<C64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Max |(u†u − 1)_{ij}|; zero for a unitary matrix.
pub fn unitarity_defect(u: &Array2<C64>) -> f64 {
    let n = u.nrows();
    let gram = u.t().mapv(|x| x.conj()).dot(u);
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            worst = worst.max((gram[(i, j)] - target).norm());
        }
    }
    worst
}
