//! Dense complex linear algebra shared by the solver modules.
//!
//! Everything here operates on `nalgebra::DMatrix<Complex64>` at desk scale
//! (dimensions up to a few hundred), so plain dense algorithms are used
//! throughout.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Column-stacking vectorization, `vec(ρ)`.
pub fn vectorize(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vectorize`] for an `n × n` matrix.
pub fn unvectorize(v: &CVector, n: usize) -> CMatrix {
    CMatrix::from_column_slice(n, n, v.as_slice())
}

/// Largest absolute entry.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn frobenius_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Hermiticity defect, `max |A - A†|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let adj = m.adjoint();
    max_abs(&(m - adj))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut vals: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

/// Eigendecomposition of a Hermitian matrix: eigenvalues ascending together
/// with the matching unitary of column eigenvectors.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vecs.set_column(col, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

fn one_norm(m: &CMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

// Padé(13) numerator coefficients from Higham (2005); theta_13 is the
// corresponding scaling threshold.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling-and-squaring with a Padé(13) approximant.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm requires a square matrix");
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }

    let norm = one_norm(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as u32
    } else {
        0
    };
    let scale = Complex64::new((0.5f64).powi(s as i32), 0.0);
    let a1 = a * scale;

    let eye = identity(n);
    let a2 = &a1 * &a1;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let b = |i: usize| Complex64::new(PADE13[i], 0.0);
    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &eye * b(1);
    let u = &a1 * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &eye * b(0);

    let num = &v + &u;
    let den = &v - &u;
    let mut f = den
        .lu()
        .solve(&num)
        .expect("expm: Padé denominator is singular");

    for _ in 0..s {
        f = &f * &f;
    }
    f
}

/// exp(A) for a real matrix, via the complex routine.
pub fn expm_real(a: &DMatrix<f64>) -> DMatrix<f64> {
    let ac = a.map(|x| Complex64::new(x, 0.0));
    expm(&ac).map(|z| z.re)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}
