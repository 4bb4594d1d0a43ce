//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

pub type C64 = nalgebra::Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Largest entry of `|m - m^dagger|`.
pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues (ascending) of the Hermitian part of `m`.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if is_diagonal(m) {
        let mut vals: Vec<f64> = m.diagonal().iter().map(|z| z.re).collect();
        vals.sort_by(f64::total_cmp);
        return vals;
    }
    let mut vals: Vec<f64> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Eigenpairs of the Hermitian part of `m`; column `k` of the returned matrix
/// belongs to eigenvalue `k`. Order is unspecified.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    if is_diagonal(m) {
        let vals = m.diagonal().iter().map(|z| z.re).collect();
        return (vals, CMatrix::identity(m.nrows(), m.ncols()));
    }
    let eig = hermitian_part(m).symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// `exp(g)` for anti-Hermitian `g`, via the eigendecomposition of `i g`.
pub fn exp_anti_hermitian(g: &CMatrix) -> CMatrix {
    let h = g.map(|z| z * C64::i());
    let (vals, vecs) = hermitian_eigen(&h);
    // g = -i h, so exp(g) = V exp(-i lambda) V^dagger.
    let phases = DVector::from_iterator(vals.len(), vals.iter().map(|&l| C64::new(0.0, -l).exp()));
    let mut scaled = vecs.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[k];
    }
    scaled * vecs.adjoint()
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// True when every off-diagonal entry is exactly zero.
pub fn is_diagonal(m: &CMatrix) -> bool {
    let n = m.nrows();
    if n != m.ncols() {
        return false;
    }
    for j in 0..n {
        for i in 0..n {
            if i != j && m[(i, j)] != ZERO {
                return false;
            }
        }
    }
    true
}

/// Trace distance `1/2 * sum |eig(a - b)|`.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    0.5 * hermitian_eigenvalues(&(a - b)).iter().map(|l| l.abs()).sum::<f64>()
}
