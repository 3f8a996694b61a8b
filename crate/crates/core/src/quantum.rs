//! Finite-dimensional state/operator algebra, the time-reversal operation,
//! and scalar diagnostics (purity, entropies, trace distance).

use crate::linalg::{self, CMatrix};
use num_complex::Complex64;
use thiserror::Error;

/// Hermiticity / trace validation tolerance for constructed states.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Eigenvalues in `[-CLIP_TOL, 0)` are treated as round-off and clipped to 0.
pub const CLIP_TOL: f64 = 1e-10;
/// Below `-POSITIVITY_HARD_TOL` a state is rejected as genuinely non-positive.
pub const POSITIVITY_HARD_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum QuantumError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian: max |A - A†| = {defect:.3e}")]
    NotHermitian { defect: f64 },
    #[error("density matrix trace deviates from 1 by {defect:.3e}")]
    TraceNotOne { defect: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("purity must lie in (0, 1], got {value}")]
    PurityOutOfRange { value: f64 },
    #[error("state has eigenvalue {min_eigenvalue:.3e} below the positivity tolerance")]
    NotPositive { min_eigenvalue: f64 },
    #[error("momentum flip map must be an involution on 0..{dim}")]
    InvalidFlipMap { dim: usize },
    #[error("empty state vector")]
    EmptyState,
}

/// A density operator: Hermitian, unit trace; positivity is monitored rather
/// than enforced, since the Brownian-motion map can transiently violate it.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    data: CMatrix,
}

impl DensityMatrix {
    pub fn new(data: CMatrix) -> Result<Self, QuantumError> {
        let (rows, cols) = data.shape();
        if rows != cols || rows == 0 {
            return Err(QuantumError::NotSquare { rows, cols });
        }
        let herm = linalg::hermiticity_defect(&data);
        if herm > HERMITICITY_TOL {
            return Err(QuantumError::NotHermitian { defect: herm });
        }
        let tr = data.trace();
        let tr_defect = (tr - Complex64::new(1.0, 0.0)).norm();
        if tr_defect > HERMITICITY_TOL {
            return Err(QuantumError::TraceNotOne { defect: tr_defect });
        }
        Ok(Self { dim: rows, data })
    }

    /// `|ψ⟩⟨ψ|` from a (normalized on entry) state vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self, QuantumError> {
        let n = psi.len();
        if n == 0 {
            return Err(QuantumError::EmptyState);
        }
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(QuantumError::EmptyState);
        }
        let mut data = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                data[(i, j)] = psi[i] * psi[j].conj() / (norm * norm);
            }
        }
        Self::new(data)
    }

    /// Diagonal state from a probability vector.
    pub fn from_diagonal(p: &[f64]) -> Result<Self, QuantumError> {
        let n = p.len();
        let mut data = CMatrix::zeros(n, n);
        for (i, &pi) in p.iter().enumerate() {
            data[(i, i)] = Complex64::new(pi, 0.0);
        }
        Self::new(data)
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self, QuantumError> {
        Self::from_diagonal(&vec![1.0 / dim as f64; dim])
    }

    /// Computational-basis projector `|k⟩⟨k|`.
    pub fn basis_state(dim: usize, k: usize) -> Result<Self, QuantumError> {
        let mut p = vec![0.0; dim];
        p[k] = 1.0;
        Self::from_diagonal(&p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &CMatrix {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.data[(i, i)].re).collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::hermitian_eigenvalues(&self.data)[0]
    }

    /// True when the monitored minimum eigenvalue sits below `-CLIP_TOL`.
    pub fn positivity_violated(&self) -> bool {
        self.min_eigenvalue() < -CLIP_TOL
    }
}

/// A Hermitian observable; `label` carries its physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    dim: usize,
    data: CMatrix,
    label: Option<String>,
}

impl HermitianOperator {
    pub fn new(data: CMatrix) -> Result<Self, QuantumError> {
        Self::with_label(data, None)
    }

    pub fn with_label(data: CMatrix, label: Option<String>) -> Result<Self, QuantumError> {
        let (rows, cols) = data.shape();
        if rows != cols || rows == 0 {
            return Err(QuantumError::NotSquare { rows, cols });
        }
        let herm = linalg::hermiticity_defect(&data);
        if herm > HERMITICITY_TOL {
            return Err(QuantumError::NotHermitian { defect: herm });
        }
        Ok(Self { dim: rows, data, label })
    }

    pub fn from_real(data: &[&[f64]]) -> Result<Self, QuantumError> {
        let n = data.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, row) in data.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                m[(i, j)] = Complex64::new(x, 0.0);
            }
        }
        Self::new(m)
    }

    pub fn diagonal(energies: &[f64]) -> Self {
        let n = energies.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &e) in energies.iter().enumerate() {
            m[(i, i)] = Complex64::new(e, 0.0);
        }
        Self { dim: n, data: m, label: None }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &CMatrix {
        &self.data
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReversalBasis {
    /// Basis labels behave like positions: Θ is entrywise conjugation.
    PositionLike,
    /// Energy eigenbasis of a real Hamiltonian: conjugation alone suffices.
    EnergyEigen,
}

/// Concrete realization of the anti-unitary time-reversal operation Θ on a
/// finite basis: complex conjugation composed with an optional involutive
/// index permutation (e.g. `p -> -p` on a symmetric momentum grid).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeReversalConvention {
    basis: ReversalBasis,
    momentum_flip: Option<Vec<usize>>,
}

impl TimeReversalConvention {
    pub fn position_like() -> Self {
        Self { basis: ReversalBasis::PositionLike, momentum_flip: None }
    }

    pub fn energy_eigen() -> Self {
        Self { basis: ReversalBasis::EnergyEigen, momentum_flip: None }
    }

    /// Conjugation followed by the permutation `flip`, which must be an
    /// involution (`flip[flip[i]] == i`).
    pub fn with_flip(basis: ReversalBasis, flip: Vec<usize>) -> Result<Self, QuantumError> {
        let dim = flip.len();
        let ok = flip.iter().all(|&j| j < dim) && (0..dim).all(|i| flip[flip[i]] == i);
        if !ok {
            return Err(QuantumError::InvalidFlipMap { dim });
        }
        Ok(Self { basis, momentum_flip: Some(flip) })
    }

    /// The index-reversal flip for a symmetric momentum grid of size `dim`.
    pub fn momentum_grid(dim: usize) -> Self {
        Self {
            basis: ReversalBasis::PositionLike,
            momentum_flip: Some((0..dim).rev().collect()),
        }
    }

    pub fn basis(&self) -> ReversalBasis {
        self.basis
    }

    fn check_dim(&self, dim: usize) -> Result<(), QuantumError> {
        if let Some(flip) = &self.momentum_flip {
            if flip.len() != dim {
                return Err(QuantumError::DimensionMismatch { left: flip.len(), right: dim });
            }
        }
        Ok(())
    }

    /// Θ M Θ⁻¹ for a matrix in this basis.
    pub fn apply_to_matrix(&self, m: &CMatrix) -> Result<CMatrix, QuantumError> {
        let n = m.nrows();
        self.check_dim(n)?;
        let mut out = CMatrix::zeros(n, n);
        match &self.momentum_flip {
            None => {
                for i in 0..n {
                    for j in 0..n {
                        out[(i, j)] = m[(i, j)].conj();
                    }
                }
            }
            Some(flip) => {
                for i in 0..n {
                    for j in 0..n {
                        out[(i, j)] = m[(flip[i], flip[j])].conj();
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Θ ρ Θ⁻¹. Hermiticity and trace are preserved exactly, and applying the
/// operation twice returns the original state bit-for-bit.
pub fn time_reverse_state(
    rho: &DensityMatrix,
    conv: &TimeReversalConvention,
) -> Result<DensityMatrix, QuantumError> {
    let data = conv.apply_to_matrix(rho.data())?;
    Ok(DensityMatrix { dim: rho.dim, data })
}

/// Tr(ρ²). Real by Hermiticity.
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.data().iter().map(|z| z.norm_sqr()).sum()
}

/// Von Neumann entropy (nats) of a Gaussian-equivalent state as a function of
/// its purity ξ:
///
/// S(ξ) = (1-ξ)/(2ξ)·ln((1+ξ)/(1-ξ)) - ln(2ξ/(1+ξ)),
///
/// with the continuous limit S(1) = 0 handled explicitly.
pub fn entropy_from_purity(xi: f64) -> Result<f64, QuantumError> {
    if !(xi > 0.0 && xi <= 1.0) {
        return Err(QuantumError::PurityOutOfRange { value: xi });
    }
    if xi == 1.0 {
        return Ok(0.0);
    }
    let s = (1.0 - xi) / (2.0 * xi) * ((1.0 + xi) / (1.0 - xi)).ln()
        - (2.0 * xi / (1.0 + xi)).ln();
    Ok(s.max(0.0))
}

/// -Σ λ ln λ over the spectrum (nats), clipping round-off negatives.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64, QuantumError> {
    let vals = linalg::hermitian_eigenvalues(rho.data());
    if vals[0] < -POSITIVITY_HARD_TOL {
        return Err(QuantumError::NotPositive { min_eigenvalue: vals[0] });
    }
    let mut s = 0.0;
    for &l in &vals {
        let l = if l < 0.0 { 0.0 } else { l };
        if l > 0.0 {
            s -= l * l.ln();
        }
    }
    Ok(s)
}

/// Trace distance ½‖ρ-σ‖₁ via the singular values of the difference.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64, QuantumError> {
    if rho.dim() != sigma.dim() {
        return Err(QuantumError::DimensionMismatch { left: rho.dim(), right: sigma.dim() });
    }
    let diff = rho.data() - sigma.data();
    let svd = diff.svd(false, false);
    Ok(0.5 * svd.singular_values.iter().sum::<f64>())
}
