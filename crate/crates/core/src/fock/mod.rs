//! States on a truncated Fock space: constructors for the standard bosonic
//! states, tensor products, partial traces and validity diagnostics.
//!
//! Every mode `i` keeps the number states `|0>, ..., |d_i - 1>`. Constructors
//! that cut off an infinite expansion renormalize on the kept levels and record
//! the weight they kept in [`DensityOperator::kept_mass`].

mod container;

pub use container::{decode_state, encode_density, encode_pure, read_state, write_state, StoredState};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, CMatrix, CVector, C64, ONE, ZERO};
use crate::quadrature::gauss_laguerre;
use crate::{Error, Result};

/// Default cap on the total Hilbert-space dimension of a single operator.
pub const DEFAULT_MAX_TOTAL_DIM: usize = 4096;

/// Tail weight above which [`coherent_state`] logs a truncation warning.
pub const COHERENT_TAIL_WARNING: f64 = 1e-10;

pub(crate) fn total_dim(mode_dims: &[usize]) -> Result<usize> {
    if mode_dims.is_empty() {
        return Err(Error::invalid("a state needs at least one mode"));
    }
    if let Some(bad) = mode_dims.iter().find(|&&d| d == 0) {
        return Err(Error::invalid(format!("mode dimension must be >= 1, got {bad}")));
    }
    mode_dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::invalid("total dimension overflows usize"))
}

/// Row-major strides: `flat = sum(n_i * strides[i])`.
pub(crate) fn strides(mode_dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; mode_dims.len()];
    for i in (0..mode_dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * mode_dims[i + 1];
    }
    s
}

/// Flat index of `digits` in a space of `target_dims`.
fn flat_index(digits: &[usize], target_strides: &[usize]) -> usize {
    digits.iter().zip(target_strides).map(|(n, s)| n * s).sum()
}

fn digits_of(mut index: usize, mode_dims: &[usize]) -> Vec<usize> {
    let mut digits = vec![0; mode_dims.len()];
    for i in (0..mode_dims.len()).rev() {
        digits[i] = index % mode_dims[i];
        index /= mode_dims[i];
    }
    digits
}

/// Map from flat indices of `small` into flat indices of the zero-padded `large` space.
pub(crate) fn embedding_map(small: &[usize], large: &[usize]) -> Result<Vec<usize>> {
    if small.len() != large.len() || small.iter().zip(large).any(|(s, l)| s > l) {
        return Err(Error::invalid(format!(
            "cannot embed mode dimensions {small:?} into {large:?}"
        )));
    }
    let large_strides = strides(large);
    Ok((0..total_dim(small)?)
        .map(|i| flat_index(&digits_of(i, small), &large_strides))
        .collect())
}

/// A normalized amplitude vector on a truncated multi-mode Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
    mode_dims: Vec<usize>,
}

impl PureState {
    /// Wraps an amplitude vector that is already normalized (within 1e-10).
    pub fn new(amplitudes: CVector, mode_dims: Vec<usize>) -> Result<Self> {
        let dim = total_dim(&mode_dims)?;
        if amplitudes.len() != dim {
            return Err(Error::invalid(format!(
                "amplitude vector has length {}, mode dimensions {mode_dims:?} need {dim}",
                amplitudes.len()
            )));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(format!("amplitude vector has norm {norm}")));
        }
        Ok(Self { amplitudes, mode_dims })
    }

    /// Normalizes any nonzero amplitude vector.
    pub fn normalized(amplitudes: CVector, mode_dims: Vec<usize>) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::invalid("cannot normalize a zero or non-finite vector"));
        }
        Self::new(amplitudes.unscale(norm), mode_dims)
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.mode_dims
    }

    pub fn n_modes(&self) -> usize {
        self.mode_dims.len()
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// The projector `|psi><psi|`.
    pub fn density(&self) -> DensityOperator {
        DensityOperator {
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
            mode_dims: self.mode_dims.clone(),
            kept_mass: 1.0,
        }
    }

    /// `<psi|a_mode|psi>` with the truncated lowering operator.
    pub fn mean_field(&self, mode: usize) -> Result<C64> {
        if mode >= self.n_modes() {
            return Err(Error::invalid(format!(
                "mode {mode} out of range for {} modes",
                self.n_modes()
            )));
        }
        let stride = strides(&self.mode_dims)[mode];
        let d = self.mode_dims[mode];
        let mut acc = ZERO;
        for x in 0..self.dim() {
            let n = (x / stride) % d;
            if n > 0 {
                acc += self.amplitudes[x - stride].conj() * self.amplitudes[x] * (n as f64).sqrt();
            }
        }
        Ok(acc)
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &PureState) -> Result<C64> {
        if self.mode_dims != other.mode_dims {
            return Err(Error::invalid("overlap of states on different spaces"));
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Zero-pads the state into larger per-mode truncations.
    pub fn embed(&self, mode_dims: &[usize]) -> Result<PureState> {
        let map = embedding_map(&self.mode_dims, mode_dims)?;
        let mut out = CVector::zeros(total_dim(mode_dims)?);
        for (i, &j) in map.iter().enumerate() {
            out[j] = self.amplitudes[i];
        }
        Ok(PureState {
            amplitudes: out,
            mode_dims: mode_dims.to_vec(),
        })
    }
}

/// A density operator on a truncated multi-mode Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: CMatrix,
    mode_dims: Vec<usize>,
    kept_mass: f64,
}

impl DensityOperator {
    /// Wraps a square matrix. Only the shape is checked; use [`validate`] for
    /// physicality.
    pub fn new(matrix: CMatrix, mode_dims: Vec<usize>) -> Result<Self> {
        let dim = total_dim(&mode_dims)?;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::invalid(format!(
                "matrix is {}x{}, mode dimensions {mode_dims:?} need {dim}x{dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self {
            matrix,
            mode_dims,
            kept_mass: 1.0,
        })
    }

    /// Diagonal operator from real populations.
    pub fn from_populations(populations: &[f64], mode_dims: Vec<usize>) -> Result<Self> {
        let diag = DVector::from_iterator(populations.len(), populations.iter().map(|&p| C64::new(p, 0.0)));
        Self::new(CMatrix::from_diagonal(&diag), mode_dims)
    }

    /// Records the probability weight the state had on the kept levels before
    /// it was renormalized.
    pub fn with_kept_mass(mut self, kept_mass: f64) -> Self {
        self.kept_mass = kept_mass;
        self
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.mode_dims
    }

    pub fn n_modes(&self) -> usize {
        self.mode_dims.len()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn kept_mass(&self) -> f64 {
        self.kept_mass
    }

    /// Weight cut off by truncation before renormalization.
    pub fn discarded_mass(&self) -> f64 {
        (1.0 - self.kept_mass).max(0.0)
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.matrix).re
    }

    pub fn is_diagonal(&self) -> bool {
        linalg::is_diagonal(&self.matrix)
    }

    /// Diagonal entries (Fock-basis populations).
    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }

    /// Photon-number distribution of one mode.
    pub fn marginal_populations(&self, mode: usize) -> Result<Vec<f64>> {
        if mode >= self.n_modes() {
            return Err(Error::invalid(format!("mode {mode} out of range")));
        }
        let stride = strides(&self.mode_dims)[mode];
        let d = self.mode_dims[mode];
        let mut out = vec![0.0; d];
        for (x, p) in self.populations().into_iter().enumerate() {
            out[(x / stride) % d] += p;
        }
        Ok(out)
    }

    /// `tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Zero-pads the operator into larger per-mode truncations.
    pub fn embed(&self, mode_dims: &[usize]) -> Result<DensityOperator> {
        if mode_dims == self.mode_dims.as_slice() {
            return Ok(self.clone());
        }
        let map = embedding_map(&self.mode_dims, mode_dims)?;
        let dim = total_dim(mode_dims)?;
        let mut out = CMatrix::zeros(dim, dim);
        for (j, &tj) in map.iter().enumerate() {
            for (i, &ti) in map.iter().enumerate() {
                out[(ti, tj)] = self.matrix[(i, j)];
            }
        }
        Ok(DensityOperator {
            matrix: out,
            mode_dims: mode_dims.to_vec(),
            kept_mass: self.kept_mass,
        })
    }

    /// Reorders the tensor factors: output mode `k` is input mode `order[k]`.
    pub fn permute_modes(&self, order: &[usize]) -> Result<DensityOperator> {
        let m = self.n_modes();
        let mut seen = vec![false; m];
        if order.len() != m || order.iter().any(|&k| k >= m || std::mem::replace(&mut seen[k], true)) {
            return Err(Error::invalid(format!("{order:?} is not a permutation of {m} modes")));
        }
        let new_dims: Vec<usize> = order.iter().map(|&k| self.mode_dims[k]).collect();
        let new_strides = strides(&new_dims);
        let map: Vec<usize> = (0..self.dim())
            .map(|x| {
                let digits = digits_of(x, &self.mode_dims);
                order.iter().zip(&new_strides).map(|(&k, s)| digits[k] * s).sum()
            })
            .collect();
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        for (j, &tj) in map.iter().enumerate() {
            for (i, &ti) in map.iter().enumerate() {
                out[(ti, tj)] = self.matrix[(i, j)];
            }
        }
        Ok(DensityOperator {
            matrix: out,
            mode_dims: new_dims,
            kept_mass: self.kept_mass,
        })
    }
}

/// Validity report for a density operator. Residuals are non-negative;
/// `min_eigenvalue` may be slightly negative for numerically noisy input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateDiagnostics {
    /// `|1 - tr(rho)|`.
    pub trace_deficit: f64,
    pub hermiticity_residual: f64,
    pub min_eigenvalue: f64,
    /// Population on basis states where some mode (with `d >= 2`) sits in its top level.
    pub tail_mass: f64,
    /// Weight removed by truncation before renormalization.
    pub discarded_mass: f64,
}

impl StateDiagnostics {
    /// Trace, hermiticity and positivity all within `tol`; tail weight is not judged.
    pub fn is_clean(&self, tol: f64) -> bool {
        self.trace_deficit <= tol && self.hermiticity_residual <= tol && self.min_eigenvalue >= -tol
    }
}

pub fn validate(rho: &DensityOperator) -> StateDiagnostics {
    let eigenvalues = linalg::hermitian_eigenvalues(&rho.matrix);
    let top_strides = strides(&rho.mode_dims);
    let tail_mass = rho
        .populations()
        .iter()
        .enumerate()
        .filter(|(x, _)| {
            rho.mode_dims
                .iter()
                .zip(&top_strides)
                .any(|(&d, &s)| d >= 2 && (x / s) % d == d - 1)
        })
        .map(|(_, p)| p.max(0.0))
        .sum();
    StateDiagnostics {
        trace_deficit: (1.0 - rho.trace()).abs(),
        hermiticity_residual: linalg::hermiticity_residual(&rho.matrix),
        min_eigenvalue: eigenvalues.first().copied().unwrap_or(0.0),
        tail_mass,
        discarded_mass: rho.discarded_mass(),
    }
}

/// Vacuum `|0, ..., 0>`.
pub fn vacuum_state(mode_dims: &[usize]) -> Result<PureState> {
    let dim = total_dim(mode_dims)?;
    let mut amplitudes = CVector::zeros(dim);
    amplitudes[0] = ONE;
    Ok(PureState {
        amplitudes,
        mode_dims: mode_dims.to_vec(),
    })
}

/// Single-mode number state `|i>` on `d` levels.
pub fn number_state(i: usize, d: usize) -> Result<PureState> {
    if i >= d {
        return Err(Error::invalid(format!("number state |{i}> does not fit in {d} levels")));
    }
    let mut amplitudes = CVector::zeros(d);
    amplitudes[i] = ONE;
    Ok(PureState {
        amplitudes,
        mode_dims: vec![d],
    })
}

/// Poisson weight of a coherent state outside the first `d` levels.
pub fn coherent_tail_mass(alpha: C64, d: usize) -> f64 {
    let mean = alpha.norm_sqr();
    let mut term = (-mean).exp();
    let mut kept = 0.0;
    for k in 0..d {
        if k > 0 {
            term *= mean / k as f64;
        }
        kept += term;
    }
    (1.0 - kept).max(0.0)
}

/// Coherent state `|alpha>` truncated to `d` levels and renormalized.
pub fn coherent_state(alpha: C64, d: usize) -> Result<PureState> {
    total_dim(&[d])?;
    let tail = coherent_tail_mass(alpha, d);
    if tail > COHERENT_TAIL_WARNING {
        log::warn!("coherent state alpha={alpha} on {d} levels drops tail weight {tail:.3e}");
    }
    let mut amplitudes = CVector::zeros(d);
    amplitudes[0] = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for k in 1..d {
        amplitudes[k] = amplitudes[k - 1] * alpha / (k as f64).sqrt();
    }
    PureState::normalized(amplitudes, vec![d])
}

/// Smallest `d` with thermal tail `(n/(n+1))^d < eps`.
pub fn thermal_dim_for_tail(mean_photons: f64, eps: f64) -> Result<usize> {
    if !(mean_photons >= 0.0) || !mean_photons.is_finite() {
        return Err(Error::invalid(format!("mean photon number must be >= 0, got {mean_photons}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("tail tolerance must lie in (0, 1), got {eps}")));
    }
    if mean_photons == 0.0 {
        return Ok(1);
    }
    let ratio = mean_photons / (mean_photons + 1.0);
    let mut d = (eps.ln() / ratio.ln()).floor().max(1.0) as usize;
    while ratio.powi(d as i32) >= eps {
        d += 1;
    }
    while d > 1 && ratio.powi(d as i32 - 1) < eps {
        d -= 1;
    }
    Ok(d)
}

/// Bose-Einstein weights `N^i / (N+1)^(i+1)` for `i < d`.
pub fn thermal_populations(mean_photons: f64, d: usize) -> Vec<f64> {
    let ratio = mean_photons / (mean_photons + 1.0);
    let mut p = 1.0 / (mean_photons + 1.0);
    (0..d)
        .map(|_| {
            let current = p;
            p *= ratio;
            current
        })
        .collect()
}

/// Thermal state of mean photon number `mean_photons`, truncated to `d`
/// levels and renormalized; the kept weight `1 - (N/(N+1))^d` is recorded.
pub fn thermal_state(mean_photons: f64, d: usize) -> Result<DensityOperator> {
    if !(mean_photons >= 0.0) || !mean_photons.is_finite() {
        return Err(Error::invalid(format!("mean photon number must be >= 0, got {mean_photons}")));
    }
    total_dim(&[d])?;
    let mut p = thermal_populations(mean_photons, d);
    let kept: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= kept);
    Ok(DensityOperator::from_populations(&p, vec![d])?.with_kept_mass(kept))
}

/// Node counts of the polar grid used by [`coherent_mixture_thermal`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolarGrid {
    pub radial: usize,
    pub angular: usize,
}

impl Default for PolarGrid {
    fn default() -> Self {
        Self {
            radial: 64,
            angular: 64,
        }
    }
}

/// Thermal state assembled as the isotropic Gaussian mixture of coherent
/// projectors, integrated on a polar grid (Gauss-Laguerre in `|alpha|^2`,
/// uniform in phase). Kept as an independent cross-check of [`thermal_state`].
pub fn coherent_mixture_thermal(mean_photons: f64, d: usize, grid: PolarGrid) -> Result<DensityOperator> {
    if !(mean_photons > 0.0) || !mean_photons.is_finite() {
        return Err(Error::invalid(format!("mean photon number must be > 0, got {mean_photons}")));
    }
    if grid.radial == 0 || grid.angular == 0 {
        return Err(Error::invalid("polar grid needs at least one node per direction"));
    }
    total_dim(&[d])?;
    // With u = |alpha|^2 the coherent projector carries exp(-u) and the
    // Gaussian weight exp(-u/N)/(pi N); d^2 alpha = du dphi / 2. Substituting
    // t = c u with c = 1 + 1/N leaves a plain Laguerre weight exp(-t).
    let c = 1.0 + 1.0 / mean_photons;
    let (nodes, weights) = gauss_laguerre(grid.radial);
    let dphi = 2.0 * std::f64::consts::PI / grid.angular as f64;
    let prefactor = 1.0 / (2.0 * std::f64::consts::PI * mean_photons * c);
    let mut acc = CMatrix::zeros(d, d);
    let mut shape = CVector::zeros(d);
    for (&t, &w) in nodes.iter().zip(&weights) {
        let r = (t / c).sqrt();
        for m in 0..grid.angular {
            let alpha = C64::from_polar(r, m as f64 * dphi);
            // alpha^k / sqrt(k!)
            shape[0] = ONE;
            for k in 1..d {
                shape[k] = shape[k - 1] * alpha / (k as f64).sqrt();
            }
            acc.gerc(C64::new(w * prefactor * dphi, 0.0), &shape, &shape, ONE);
        }
    }
    let kept = linalg::trace(&acc).re;
    Ok(DensityOperator::new(acc.unscale(kept), vec![d])?.with_kept_mass(kept))
}

/// Kronecker product `x (x) y` under the default dimension cap.
pub fn tensor(x: &DensityOperator, y: &DensityOperator) -> Result<DensityOperator> {
    tensor_with_limit(x, y, DEFAULT_MAX_TOTAL_DIM)
}

pub fn tensor_with_limit(x: &DensityOperator, y: &DensityOperator, max_dim: usize) -> Result<DensityOperator> {
    let requested = x.dim().saturating_mul(y.dim());
    if requested > max_dim {
        return Err(Error::ResourceLimit {
            requested,
            limit: max_dim,
        });
    }
    let mut mode_dims = x.mode_dims.clone();
    mode_dims.extend_from_slice(&y.mode_dims);
    Ok(DensityOperator {
        matrix: x.matrix.kronecker(&y.matrix),
        mode_dims,
        kept_mass: x.kept_mass * y.kept_mass,
    })
}

/// Pure-state tensor product.
pub fn tensor_pure(x: &PureState, y: &PureState) -> Result<PureState> {
    let mut mode_dims = x.mode_dims.clone();
    mode_dims.extend_from_slice(&y.mode_dims);
    PureState::new(x.amplitudes.kronecker(&y.amplitudes), mode_dims)
}

/// Reduced state on the modes in `keep` (sorted, duplicates ignored).
pub fn partial_trace(rho: &DensityOperator, keep: &[usize]) -> Result<DensityOperator> {
    if keep.is_empty() {
        return Err(Error::invalid("partial trace needs at least one kept mode"));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if let Some(&bad) = kept.iter().find(|&&k| k >= rho.n_modes()) {
        return Err(Error::invalid(format!("mode {bad} out of range for {} modes", rho.n_modes())));
    }
    let traced: Vec<usize> = (0..rho.n_modes()).filter(|k| !kept.contains(k)).collect();
    let all_strides = strides(&rho.mode_dims);
    let offsets = |modes: &[usize]| -> Vec<usize> {
        let dims: Vec<usize> = modes.iter().map(|&k| rho.mode_dims[k]).collect();
        let count: usize = dims.iter().product();
        (0..count)
            .map(|i| {
                digits_of(i, &dims)
                    .iter()
                    .zip(modes)
                    .map(|(n, &k)| n * all_strides[k])
                    .sum()
            })
            .collect()
    };
    let kept_offsets = offsets(&kept);
    let traced_offsets = offsets(&traced);
    let n = kept_offsets.len();
    let mut out = CMatrix::zeros(n, n);
    for (c, &oc) in kept_offsets.iter().enumerate() {
        for (r, &or) in kept_offsets.iter().enumerate() {
            out[(r, c)] = traced_offsets.iter().map(|&t| rho.matrix[(or + t, oc + t)]).sum();
        }
    }
    Ok(DensityOperator {
        matrix: out,
        mode_dims: kept.iter().map(|&k| rho.mode_dims[k]).collect(),
        kept_mass: rho.kept_mass,
    })
}

/// `tr(rho a_mode)` with the truncated lowering operator.
pub fn mean_field(rho: &DensityOperator, mode: usize) -> Result<C64> {
    if mode >= rho.n_modes() {
        return Err(Error::invalid(format!("mode {mode} out of range for {} modes", rho.n_modes())));
    }
    let stride = strides(&rho.mode_dims)[mode];
    let d = rho.mode_dims[mode];
    let mut acc = ZERO;
    for x in 0..rho.dim() {
        let n = (x / stride) % d;
        if n > 0 {
            acc += rho.matrix[(x, x - stride)] * (n as f64).sqrt();
        }
    }
    Ok(acc)
}

/// Mean photon number `tr(rho N_mode)`.
pub fn mean_photon_number(rho: &DensityOperator, mode: usize) -> Result<f64> {
    Ok(rho
        .marginal_populations(mode)?
        .iter()
        .enumerate()
        .map(|(n, p)| n as f64 * p)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn vacuum_examples() {
        let v = vacuum_state(&[3]).unwrap();
        assert_eq!(v.amplitudes().as_slice(), &[ONE, ZERO, ZERO]);
        let v = vacuum_state(&[2, 2]).unwrap();
        assert_eq!(v.amplitudes().as_slice(), &[ONE, ZERO, ZERO, ZERO]);
        let v = vacuum_state(&[1]).unwrap();
        assert_eq!(v.amplitudes().as_slice(), &[ONE]);
        assert!(matches!(vacuum_state(&[0]), Err(Error::InvalidArgument(_))));
        assert!(vacuum_state(&[]).is_err());
    }

    #[test]
    fn number_state_examples() {
        assert_eq!(number_state(0, 4).unwrap(), vacuum_state(&[4]).unwrap());
        let s = number_state(2, 4).unwrap();
        assert_eq!(s.amplitudes().as_slice(), &[ZERO, ZERO, ONE, ZERO]);
        assert!(matches!(number_state(4, 4), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn coherent_examples() {
        let z = coherent_state(ZERO, 8).unwrap();
        assert_eq!(z, vacuum_state(&[8]).unwrap());

        let s = coherent_state(c(1.0), 30).unwrap();
        let p0 = s.amplitudes()[0].norm_sqr();
        // Poisson weight exp(-1) / 0!.
        assert!((p0 - (-1.0f64).exp()).abs() < 1e-12);
        let mean = mean_photon_number(&s.density(), 0).unwrap();
        assert!((mean - 1.0).abs() < 1e-10);
    }

    #[test]
    fn coherent_tail_is_poisson_remainder() {
        // Direct Poisson remainder for |alpha|^2 = 4 beyond 6 levels.
        let mut term = (-4.0f64).exp();
        let mut tail = 0.0;
        for k in 0..200 {
            if k > 0 {
                term *= 4.0 / k as f64;
            }
            if k >= 6 {
                tail += term;
            }
        }
        assert!((coherent_tail_mass(c(2.0), 6) - tail).abs() < 1e-14);
    }

    #[test]
    fn thermal_examples() {
        let t = thermal_state(0.0, 5).unwrap();
        assert_eq!(t.populations(), vec![1.0, 0.0, 0.0, 0.0, 0.0]);

        let t = thermal_state(1.0, 30).unwrap();
        for (i, p) in t.populations().iter().enumerate() {
            // renormalized by 1/(1 - 2^-30)
            assert!((p - 0.5f64.powi(i as i32 + 1)).abs() < 1e-9);
        }
        assert!((t.discarded_mass() - 0.5f64.powi(30)).abs() < 1e-18);
        assert!(matches!(thermal_state(-0.1, 4), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn thermal_mean_converges_when_tail_is_small() {
        for &n in &[0.1, 0.5, 1.0, 2.0, 5.0] {
            let d = thermal_dim_for_tail(n, 1e-10).unwrap();
            let t = thermal_state(n, d).unwrap();
            assert!(t.discarded_mass() < 1e-9);
            assert!((mean_photon_number(&t, 0).unwrap() - n).abs() < 1e-6, "N={n}");
        }
    }

    #[test]
    fn tail_dimension_is_minimal() {
        let d = thermal_dim_for_tail(1.0, 1e-12).unwrap();
        assert_eq!(d, 40);
        assert_eq!(thermal_dim_for_tail(0.0, 1e-12).unwrap(), 1);
    }

    #[test]
    fn coherent_mixture_matches_number_basis_form() {
        let mix = coherent_mixture_thermal(0.5, 20, PolarGrid::default()).unwrap();
        let diag = thermal_state(0.5, 20).unwrap();
        assert!(linalg::max_abs(&(mix.matrix() - diag.matrix())) < 1e-6);

        let mix = coherent_mixture_thermal(1.0, 20, PolarGrid::default()).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                if i != j {
                    assert!(mix.matrix()[(i, j)].norm() < 1e-8);
                }
            }
        }
        assert!((mix.kept_mass() - (1.0 - 0.5f64.powi(20))).abs() < 1e-6);
        assert!(coherent_mixture_thermal(0.0, 5, PolarGrid::default()).is_err());
    }

    #[test]
    fn tensor_examples() {
        let rho = thermal_state(0.7, 4).unwrap();
        let one = vacuum_state(&[1]).unwrap().density();
        let t = tensor(&rho, &one).unwrap();
        assert_eq!(t.mode_dims(), &[4, 1]);
        assert!(linalg::max_abs(&(t.matrix() - rho.matrix())) < 1e-15);

        let v = vacuum_state(&[3]).unwrap().density();
        let vv = tensor(&v, &v).unwrap();
        assert_eq!(vv, vacuum_state(&[3, 3]).unwrap().density());

        let sigma = coherent_state(c(0.4), 5).unwrap().density();
        let prod = tensor(&rho, &sigma).unwrap();
        assert!((prod.trace() - rho.trace() * sigma.trace()).abs() < 1e-12);

        let big = thermal_state(1.0, 65).unwrap();
        assert!(matches!(tensor(&big, &big), Err(Error::ResourceLimit { .. })));
    }

    #[test]
    fn partial_trace_examples() {
        let rho = thermal_state(0.7, 4).unwrap();
        let sigma = coherent_state(C64::new(0.3, -0.2), 3).unwrap().density();
        let prod = tensor(&rho, &sigma).unwrap();
        let back = partial_trace(&prod, &[0]).unwrap();
        assert!(linalg::max_abs(&(back.matrix() - rho.matrix())) < 1e-12);
        let other = partial_trace(&prod, &[1]).unwrap();
        assert!(linalg::max_abs(&(other.matrix() - sigma.matrix())) < 1e-12);

        // (|00> + |11>)/sqrt(2) on two qubit-like modes.
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = PureState::new(CVector::from_vec(vec![c(h), ZERO, ZERO, c(h)]), vec![2, 2]).unwrap();
        let reduced = partial_trace(&bell.density(), &[1]).unwrap();
        assert!((reduced.matrix()[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((reduced.matrix()[(1, 1)].re - 0.5).abs() < 1e-15);
        assert!(reduced.matrix()[(0, 1)].norm() < 1e-15);

        assert!(matches!(partial_trace(&prod, &[]), Err(Error::InvalidArgument(_))));
        assert!(partial_trace(&prod, &[2]).is_err());
    }

    #[test]
    fn mean_field_examples() {
        let t = thermal_state(1.3, 12).unwrap();
        assert!(mean_field(&t, 0).unwrap().norm() < 1e-12);

        let alpha = C64::new(0.6, 0.8);
        let s = coherent_state(alpha, 40).unwrap();
        assert!((mean_field(&s.density(), 0).unwrap() - alpha).norm() < 1e-8);
        assert!((s.mean_field(0).unwrap() - alpha).norm() < 1e-8);

        let n = number_state(3, 6).unwrap();
        assert_eq!(mean_field(&n.density(), 0).unwrap(), ZERO);
    }

    #[test]
    fn mean_field_of_second_mode() {
        let alpha = C64::new(-0.3, 0.25);
        let a = coherent_state(C64::new(0.5, 0.0), 20).unwrap();
        let b = coherent_state(alpha, 20).unwrap();
        let joint = tensor_pure(&a, &b).unwrap();
        assert!((joint.mean_field(1).unwrap() - alpha).norm() < 1e-10);
        assert!((mean_field(&joint.density(), 0).unwrap() - C64::new(0.5, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn validate_examples() {
        let t = thermal_state(1.0, 30).unwrap();
        let diag = validate(&t);
        assert!((diag.tail_mass - 0.5f64.powi(30)).abs() < 1e-12);
        assert!(diag.min_eigenvalue >= 0.0);

        let v = validate(&vacuum_state(&[4]).unwrap().density());
        assert_eq!(v.trace_deficit, 0.0);
        assert_eq!(v.hermiticity_residual, 0.0);
        assert_eq!(v.tail_mass, 0.0);
        assert_eq!(v.min_eigenvalue, 0.0);

        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c(0.5);
        m[(1, 1)] = c(0.5);
        m[(0, 1)] = c(0.2);
        let bad = DensityOperator::new(m, vec![2]).unwrap();
        assert!(validate(&bad).hermiticity_residual > 0.0);
    }

    #[test]
    fn constructors_validate_cleanly() {
        let states = vec![
            vacuum_state(&[3, 2]).unwrap().density(),
            number_state(2, 5).unwrap().density(),
            coherent_state(C64::new(0.5, 0.5), 25).unwrap().density(),
            thermal_state(2.0, 30).unwrap(),
            coherent_mixture_thermal(1.0, 15, PolarGrid::default()).unwrap(),
        ];
        for s in &states {
            assert!(validate(s).is_clean(1e-10), "{:?}", validate(s));
        }
    }

    #[test]
    fn permute_and_embed() {
        let a = thermal_state(0.4, 3).unwrap();
        let b = coherent_state(C64::new(0.2, 0.1), 2).unwrap().density();
        let ab = tensor(&a, &b).unwrap();
        let ba = tensor(&b, &a).unwrap();
        let swapped = ab.permute_modes(&[1, 0]).unwrap();
        assert!(linalg::max_abs(&(swapped.matrix() - ba.matrix())) < 1e-15);
        assert!(ab.permute_modes(&[0, 0]).is_err());

        let padded = a.embed(&[5]).unwrap();
        assert_eq!(padded.dim(), 5);
        assert_eq!(padded.matrix()[(2, 2)], a.matrix()[(2, 2)]);
        assert_eq!(padded.matrix()[(4, 4)], ZERO);
        assert!(a.embed(&[2]).is_err());
    }
}
