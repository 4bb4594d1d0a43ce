//! Random input states for campaigns and searches.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::entropy::{g, spectrum_entropy};
use crate::fock::{self, strides, DensityOperator, PureState};
use crate::linalg::{self, CMatrix, CVector, C64, ZERO};
use crate::{Error, Result};

/// Per-mode mean-field magnitude accepted as zero.
pub const ZERO_MEAN_TOLERANCE: f64 = 1e-8;
/// Newton iterations allowed when removing the mean field.
pub const MAX_DISPLACEMENT_ITERATIONS: usize = 50;
/// Fresh draws attempted before the zero-mean sampler gives up.
pub const MAX_ZERO_MEAN_ATTEMPTS: usize = 64;
/// Entropy accuracy of the fixed-entropy sampler.
pub const ENTROPY_MATCH_TOLERANCE: f64 = 1e-10;

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Unit vector with independent complex Gaussian amplitudes.
pub fn haar_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CVector {
    loop {
        let v = CVector::from_iterator(dim, (0..dim).map(|_| complex_gaussian(rng)));
        let norm = v.norm();
        if norm > 1e-300 {
            return v / C64::new(norm, 0.0);
        }
    }
}

/// Haar-random unitary: QR of a complex Ginibre matrix with the phases of `R`'s diagonal absorbed.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    let z = CMatrix::from_fn(dim, dim, |_, _| complex_gaussian(rng));
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { linalg::ONE };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Haar-like pure state on `n` modes of `d` levels, without a mean-field constraint.
pub fn sample_pure<R: Rng + ?Sized>(rng: &mut R, d: usize, n: usize) -> Result<PureState> {
    check_modes(d, n)?;
    let dims = vec![d; n];
    PureState::new(haar_vector(rng, fock::total_dim(&dims)?), dims)
}

fn check_modes(d: usize, n: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::invalid(format!("truncation must be >= 2, got {d}")));
    }
    if n == 0 {
        return Err(Error::invalid("at least one mode is required"));
    }
    Ok(())
}

/// Truncated displacements `D(beta) = exp(beta a^dag - conj(beta) a)` on `d` levels.
///
/// With `X = i (a^dag - a) = V diag(l) V^dag` and `R(phi) = exp(i phi N)`,
/// `D(r e^{i phi}) = R(phi) V diag(e^{-i r l}) V^dag R(-phi)`.
#[derive(Debug, Clone)]
pub struct Displacer {
    d: usize,
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
}

impl Displacer {
    pub fn new(d: usize) -> Self {
        let mut x = CMatrix::zeros(d, d);
        for k in 1..d {
            let s = (k as f64).sqrt();
            // a^dag |k-1> = sqrt(k) |k>, so X[k, k-1] = i sqrt(k), X[k-1, k] = -i sqrt(k).
            x[(k, k - 1)] = C64::new(0.0, s);
            x[(k - 1, k)] = C64::new(0.0, -s);
        }
        let (eigenvalues, eigenvectors) = linalg::hermitian_eigen(&x);
        Self {
            d,
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn matrix(&self, beta: C64) -> CMatrix {
        let (r, phi) = (beta.norm(), beta.arg());
        let v = &self.eigenvectors;
        let mut left = v.clone();
        for (k, l) in self.eigenvalues.iter().enumerate() {
            let e = C64::from_polar(1.0, -r * l);
            for i in 0..self.d {
                left[(i, k)] *= e;
            }
        }
        let mut m = left * v.adjoint();
        for i in 0..self.d {
            for j in 0..self.d {
                m[(i, j)] *= C64::from_polar(1.0, phi * (i as f64 - j as f64));
            }
        }
        m
    }
}

/// Applies a single-mode operator to one mode of a multi-mode amplitude vector.
pub(crate) fn apply_on_mode(op: &CMatrix, amplitudes: &CVector, dims: &[usize], mode: usize) -> CVector {
    let stride = strides(dims)[mode];
    let d = dims[mode];
    let mut out = CVector::zeros(amplitudes.len());
    for x in 0..amplitudes.len() {
        if (x / stride) % d != 0 {
            continue;
        }
        for i in 0..d {
            let mut acc = ZERO;
            for j in 0..d {
                acc += op[(i, j)] * amplitudes[x + j * stride];
            }
            out[x + i * stride] = acc;
        }
    }
    out
}

/// Removes the mean field of every mode by a truncated displacement found with
/// a damped Newton iteration on `beta`. Fails if some mode does not reach
/// [`ZERO_MEAN_TOLERANCE`] within [`MAX_DISPLACEMENT_ITERATIONS`] steps.
pub fn project_zero_mean(psi: &PureState, displacer: &Displacer) -> Result<PureState> {
    let dims = psi.mode_dims().to_vec();
    let mut current = psi.clone();
    for mode in 0..dims.len() {
        if dims[mode] != displacer.dim() {
            return Err(Error::invalid("displacer truncation does not match the state"));
        }
        let base = current.amplitudes().clone();
        let shifted = |beta: C64| -> Result<PureState> {
            PureState::normalized(apply_on_mode(&displacer.matrix(beta), &base, &dims, mode), dims.clone())
        };
        let residual = |beta: C64| -> Result<(C64, PureState)> {
            let s = shifted(beta)?;
            Ok((s.mean_field(mode)?, s))
        };
        let m0 = current.mean_field(mode)?;
        if m0.norm() < 1e-13 {
            continue;
        }
        let mut beta = -m0;
        let (mut f, mut state) = residual(beta)?;
        let mut iterations = 0;
        while f.norm() >= 1e-13 {
            if iterations == MAX_DISPLACEMENT_ITERATIONS {
                break;
            }
            iterations += 1;
            let h = 1e-7;
            let (fr, _) = residual(beta + C64::new(h, 0.0))?;
            let (fi, _) = residual(beta + C64::new(0.0, h))?;
            let (j11, j21) = ((fr.re - f.re) / h, (fr.im - f.im) / h);
            let (j12, j22) = ((fi.re - f.re) / h, (fi.im - f.im) / h);
            let det = j11 * j22 - j12 * j21;
            let step = if det.abs() > 1e-14 {
                C64::new((j22 * f.re - j12 * f.im) / det, (-j21 * f.re + j11 * f.im) / det)
            } else {
                f
            };
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial = beta - step * t;
                let (ft, st) = residual(trial)?;
                if ft.norm() < f.norm() {
                    beta = trial;
                    f = ft;
                    state = st;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if f.norm() >= ZERO_MEAN_TOLERANCE {
            return Err(Error::Sampler(format!(
                "mean field of mode {mode} stuck at {:.3e} after {iterations} displacement steps",
                f.norm()
            )));
        }
        current = state;
    }
    Ok(current)
}

/// Haar-like pure state with the mean field of each mode removed.
///
/// Draws that fail to converge are discarded and redrawn, up to
/// [`MAX_ZERO_MEAN_ATTEMPTS`] times.
pub fn sample_pure_zero_mean<R: Rng + ?Sized>(rng: &mut R, d: usize, n: usize) -> Result<PureState> {
    check_modes(d, n)?;
    let displacer = Displacer::new(d);
    let mut last = None;
    for _ in 0..MAX_ZERO_MEAN_ATTEMPTS {
        match project_zero_mean(&sample_pure(rng, d, n)?, &displacer) {
            Ok(psi) => return Ok(psi),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::Sampler("no zero-mean draw".into())))
}

/// Spectrum `p_i ∝ q_i^beta` with entropy `s_target`, found by bisection on `beta`.
pub(crate) fn tempered_spectrum(q: &[f64], s_target: f64) -> Result<Vec<f64>> {
    let temper = |beta: f64| -> Vec<f64> {
        let top = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = q.iter().map(|x| (beta * (x / top).ln()).exp()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    };
    let entropy = |beta: f64| spectrum_entropy(&temper(beta));
    let (mut lo, mut hi) = (0.0, 1.0);
    while entropy(hi)? > s_target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Sampler(format!("cannot reach entropy {s_target:e} by tempering")));
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let s = entropy(mid)?;
        if (s - s_target).abs() < 0.1 * ENTROPY_MATCH_TOLERANCE {
            return Ok(temper(mid));
        }
        if s > s_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = temper(0.5 * (lo + hi));
    let s = spectrum_entropy(&p)?;
    if (s - s_target).abs() < ENTROPY_MATCH_TOLERANCE {
        Ok(p)
    } else {
        Err(Error::Sampler(format!("entropy bisection stalled at {s} for target {s_target}")))
    }
}

/// Random state on `mode_dims` with von Neumann entropy `s_target`.
///
/// A random spectrum (normalized exponential weights) is tempered,
/// `p ∝ q^beta`, with `beta` set by bisection so that `H(p) = s_target`
/// (`beta = 0` is the uniform spectrum, large `beta` approaches a pure state),
/// then conjugated by a Haar-random unitary.
pub fn sample_density_fixed_entropy_modes<R: Rng + ?Sized>(
    rng: &mut R,
    mode_dims: &[usize],
    s_target: f64,
) -> Result<DensityOperator> {
    let d = fock::total_dim(mode_dims)?;
    let s_max = (d as f64).ln();
    if !(s_target >= 0.0) || s_target > s_max + 1e-12 {
        return Err(Error::Infeasible(format!(
            "entropy {s_target} is outside [0, ln {d} = {s_max}]"
        )));
    }
    let q: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(Exp1).max(1e-300)).collect();
    let spectrum = if s_target == 0.0 {
        let top = (0..d).max_by(|&i, &j| q[i].total_cmp(&q[j])).unwrap_or(0);
        (0..d).map(|i| if i == top { 1.0 } else { 0.0 }).collect()
    } else if s_target >= s_max {
        vec![1.0 / d as f64; d]
    } else {
        tempered_spectrum(&q, s_target)?
    };
    let u = random_unitary(rng, d);
    let mut scaled = u.clone();
    for (j, p) in spectrum.iter().enumerate() {
        for i in 0..d {
            scaled[(i, j)] *= C64::new(*p, 0.0);
        }
    }
    let rho = linalg::hermitian_part(&(scaled * u.adjoint()));
    DensityOperator::new(rho, mode_dims.to_vec())
}

pub fn sample_density_fixed_entropy<R: Rng + ?Sized>(rng: &mut R, d: usize, s_target: f64) -> Result<DensityOperator> {
    sample_density_fixed_entropy_modes(rng, &[d], s_target)
}

/// Random mixed state `G G^dag / tr(G G^dag)` with `G` a `dim x rank` complex Ginibre matrix.
pub fn sample_mixed<R: Rng + ?Sized>(rng: &mut R, d: usize, n: usize) -> Result<DensityOperator> {
    check_modes(d, n)?;
    let dims = vec![d; n];
    let dim = fock::total_dim(&dims)?;
    let rank = rng.random_range(1..=dim);
    let gm = CMatrix::from_fn(dim, rank, |_, _| complex_gaussian(rng));
    let rho = &gm * gm.adjoint();
    let tr = linalg::trace(&rho).re;
    DensityOperator::new(linalg::hermitian_part(&(rho / C64::new(tr, 0.0))), dims)
}

/// Binary entropy in nats.
fn binary_entropy(w: f64) -> f64 {
    let h = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    h(w) + h(1.0 - w)
}

/// Diagonal state on `d` levels with weight on two distinct random levels,
/// the smaller weight solved by bisection so that the entropy is `s_target <= ln 2`.
pub fn sample_two_point<R: Rng + ?Sized>(rng: &mut R, d: usize, s_target: f64) -> Result<DensityOperator> {
    if d < 2 {
        return Err(Error::invalid("a two-point mixture needs at least two levels"));
    }
    if !(0.0..=std::f64::consts::LN_2).contains(&s_target) {
        return Err(Error::Infeasible(format!(
            "a two-point mixture has entropy in [0, ln 2], asked for {s_target}"
        )));
    }
    let (mut lo, mut hi) = (0.0, 0.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if binary_entropy(mid) < s_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = 0.5 * (lo + hi);
    let i = rng.random_range(0..d);
    let mut j = rng.random_range(0..d - 1);
    if j >= i {
        j += 1;
    }
    let mut p = vec![0.0; d];
    p[i] = 1.0 - w;
    p[j] = w;
    DensityOperator::from_populations(&p, vec![d])
}

/// Per-mode two-point mixture with entropy `g(K)` on each of `n` modes.
pub fn sample_two_point_product<R: Rng + ?Sized>(rng: &mut R, d: usize, n: usize, k: f64) -> Result<DensityOperator> {
    check_modes(d, n)?;
    let s = g(k)?;
    let mut rho = sample_two_point(rng, d, s)?;
    for _ in 1..n {
        rho = fock::tensor(&rho, &sample_two_point(rng, d, s)?)?;
    }
    Ok(rho)
}
