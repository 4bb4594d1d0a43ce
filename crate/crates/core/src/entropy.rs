//! Entropy functionals: von Neumann entropy, the Bose-Einstein entropy
//! `g(x) = (x+1) ln(x+1) - x ln x` with its inverse, entropy photon numbers
//! and classical entropy powers. All entropies are in nats.

use serde::{Deserialize, Serialize};

use crate::fock::DensityOperator;
use crate::linalg;
use crate::{Error, Result};

/// Eigenvalues in `[-CLIP_THRESHOLD, 0)` are treated as zero.
pub const CLIP_THRESHOLD: f64 = 1e-10;
/// Eigenvalues below `-FAILURE_THRESHOLD` make the state invalid.
pub const FAILURE_THRESHOLD: f64 = 1e-8;

const TWO_PI_E: f64 = 2.0 * std::f64::consts::PI * std::f64::consts::E;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyValue {
    pub nats: f64,
    pub n_modes: usize,
}

impl EntropyValue {
    pub fn per_mode(&self) -> f64 {
        self.nats / self.n_modes as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonNumberValue {
    pub mean_photons: f64,
}

/// `-sum p ln p` over a spectrum, with `0 ln 0 = 0`.
///
/// Entries in `[-FAILURE_THRESHOLD, 0)` count as zero; anything more negative
/// is an [`Error::InvalidState`].
pub fn spectrum_entropy(spectrum: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &p in spectrum {
        if p < -FAILURE_THRESHOLD || p.is_nan() {
            return Err(Error::InvalidState(format!("eigenvalue {p:.3e} below -{FAILURE_THRESHOLD:.0e}")));
        }
        if p > 0.0 {
            s -= p * p.ln();
        }
    }
    Ok(s.max(0.0))
}

/// `S(rho) = -tr(rho ln rho)`.
pub fn von_neumann_entropy(rho: &DensityOperator) -> Result<EntropyValue> {
    let residual = linalg::hermiticity_residual(rho.matrix());
    if residual > FAILURE_THRESHOLD {
        return Err(Error::InvalidState(format!("operator is not Hermitian (residual {residual:.3e})")));
    }
    let eigenvalues = linalg::hermitian_eigenvalues(rho.matrix());
    Ok(EntropyValue {
        nats: spectrum_entropy(&eigenvalues)?,
        n_modes: rho.n_modes(),
    })
}

/// `g(x) = (x+1) ln(x+1) - x ln x`, the entropy of a thermal state with mean
/// photon number `x`.
pub fn g(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::invalid(format!("g(x) needs x >= 0, got {x}")));
    }
    Ok(g_nonneg(x))
}

pub(crate) fn g_nonneg(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if x < 1e-8 {
        x * (1.0 - x.ln())
    } else if x.is_infinite() {
        f64::INFINITY
    } else {
        // ln(1+x) + x ln(1 + 1/x); no cancellation for large x.
        x.ln_1p() + x * (1.0 / x).ln_1p()
    }
}

/// `g'(x) = ln(1 + 1/x)`.
pub fn g_derivative(x: f64) -> f64 {
    (1.0 / x).ln_1p()
}

/// Inverse of [`g`] on `S >= 0`.
///
/// Bisection on `[0, e^S - 1]` (valid because `g(N) >= ln(N+1)`) followed by a
/// Newton polish.
pub fn g_inv(s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::invalid(format!("g_inv(S) needs S >= 0, got {s}")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let mut hi = s.exp_m1();
    if !hi.is_finite() {
        return Err(Error::NumericalFailure(format!("g_inv bracket overflows for S = {s}")));
    }
    let mut lo = 0.0;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-13 * mid.max(1e-300) {
            break;
        }
        if g_nonneg(mid) < s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    let slope = g_derivative(x);
    if slope.is_finite() && slope > 0.0 {
        let polished = x - (g_nonneg(x) - s) / slope;
        if polished > 0.0 && (g_nonneg(polished) - s).abs() <= (g_nonneg(x) - s).abs() {
            x = polished;
        }
    }
    Ok(x)
}

/// `N(rho) = g^{-1}(S(rho)/n)` for an `n`-mode state.
pub fn entropy_photon_number(rho: &DensityOperator, n_modes: usize) -> Result<PhotonNumberValue> {
    if n_modes == 0 || n_modes != rho.n_modes() {
        return Err(Error::invalid(format!(
            "mode count {n_modes} does not match the state's {} modes",
            rho.n_modes()
        )));
    }
    let s = von_neumann_entropy(rho)?;
    Ok(PhotonNumberValue {
        mean_photons: g_inv(s.nats / n_modes as f64)?,
    })
}

/// Entropy power `e^{h/n} / (2 pi e)` of an `n`-dimensional variable with
/// differential entropy `h`, taken literally with the `h = ln(2 pi e P)`
/// normalization of a Gaussian.
pub fn entropy_power(h: f64, n: usize) -> f64 {
    (h / n as f64).exp() / TWO_PI_E
}

/// Entropy power of a real scalar with differential entropy `h`, normalized
/// so that a Gaussian of variance `v` (with `h = ln(2 pi e v) / 2`) has power `v`.
pub fn real_entropy_power(h: f64) -> f64 {
    (2.0 * h).exp() / TWO_PI_E
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, thermal_state, PureState};
    use crate::linalg::C64;

    #[test]
    fn g_examples() {
        assert_eq!(g(0.0).unwrap(), 0.0);
        assert!((g(1.0).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!(matches!(g(-1e-3), Err(Error::InvalidArgument(_))));
        // closed form at 0.5
        assert!((g(0.5).unwrap() - (1.5 * 1.5f64.ln() - 0.5 * 0.5f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn g_is_bose_einstein_entropy() {
        // Direct series sum over 200 Bose-Einstein weights at N = 2.
        let n: f64 = 2.0;
        let series: f64 = (0..200)
            .map(|i| {
                let p = n.powi(i) / (n + 1.0).powi(i + 1);
                -p * p.ln()
            })
            .sum();
        assert!((g(2.0).unwrap() - series).abs() < 1e-8);
    }

    #[test]
    fn g_small_argument_branch_is_continuous() {
        let x: f64 = 1e-8;
        let series = x * (1.0 - x.ln());
        let closed = x.ln_1p() + x * (1.0 / x).ln_1p();
        assert!((series - closed).abs() < 1e-15);
        assert!((g(x * (1.0 - 1e-12)).unwrap() - series).abs() < 1e-15);
    }

    #[test]
    fn g_inv_examples() {
        assert_eq!(g_inv(0.0).unwrap(), 0.0);
        assert!((g_inv(g(3.0).unwrap()).unwrap() - 3.0).abs() < 1e-10);
        let x = g_inv(1.0).unwrap();
        // g(0.5) ~ 0.9548 < 1 < g(0.6) ~ 1.0972
        assert!(x > 0.5 && x < 0.6);
        assert!((x - 0.54).abs() < 0.01);
        assert!(matches!(g_inv(-0.1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn g_inv_round_trip_over_wide_range() {
        for k in 0..=400 {
            let s = 1e-9 + k as f64 * 0.05;
            let x = g_inv(s).unwrap();
            assert!((g(x).unwrap() - s).abs() < 1e-12, "S={s}");
        }
    }

    #[test]
    fn entropy_examples() {
        let psi = coherent_state(C64::new(0.7, -0.1), 20).unwrap();
        assert!(von_neumann_entropy(&psi.density()).unwrap().nats < 1e-12);

        let t = thermal_state(0.5, 40).unwrap();
        let expected = 1.5 * 1.5f64.ln() - 0.5 * 0.5f64.ln();
        assert!((von_neumann_entropy(&t).unwrap().nats - expected).abs() < 1e-8);
        assert!((expected - 0.954_771_2).abs() < 1e-7);

        let half = DensityOperator::from_populations(&[0.5, 0.5], vec![2]).unwrap();
        assert!((von_neumann_entropy(&half).unwrap().nats - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn entropy_rejects_negative_spectrum() {
        let bad = DensityOperator::from_populations(&[1.1, -0.1], vec![2]).unwrap();
        assert!(matches!(von_neumann_entropy(&bad), Err(Error::InvalidState(_))));
        // Dust below the clipping threshold is tolerated.
        let dusty = DensityOperator::from_populations(&[1.0 + 5e-11, -5e-11], vec![2]).unwrap();
        assert!(von_neumann_entropy(&dusty).unwrap().nats < 1e-9);
    }

    #[test]
    fn entropy_photon_number_examples() {
        let psi = PureState::normalized(
            crate::CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)]),
            vec![2],
        )
        .unwrap();
        assert!(entropy_photon_number(&psi.density(), 1).unwrap().mean_photons < 1e-12);

        let k = 1.7;
        let d = crate::fock::thermal_dim_for_tail(k, 1e-13).unwrap();
        let t = thermal_state(k, d).unwrap();
        assert!((entropy_photon_number(&t, 1).unwrap().mean_photons - k).abs() < 1e-6);

        let k = 0.8;
        let d = crate::fock::thermal_dim_for_tail(k, 1e-13).unwrap();
        let t = thermal_state(k, d).unwrap();
        let tt = crate::fock::tensor(&t, &t).unwrap();
        assert!((entropy_photon_number(&tt, 2).unwrap().mean_photons - k).abs() < 1e-6);
        assert!(entropy_photon_number(&tt, 1).is_err());
    }

    #[test]
    fn entropy_power_examples() {
        assert!((entropy_power(TWO_PI_E.ln(), 1) - 1.0).abs() < 1e-15);
        assert!((entropy_power((TWO_PI_E * 4.0).ln(), 1) - 4.0).abs() < 1e-14);
        assert!((entropy_power(0.0, 1) - 0.058_549_831_6).abs() < 1e-10);
        // Real-scalar convention: a variance-v Gaussian has power v.
        let v = 2.5;
        assert!((real_entropy_power(0.5 * (TWO_PI_E * v).ln()) - v).abs() < 1e-14);
    }
}
