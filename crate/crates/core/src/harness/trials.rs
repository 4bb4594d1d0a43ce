//! Single trials: EPnI slacks and minimum-output-entropy margins.

use serde::{Deserialize, Serialize};

use crate::entropy::{entropy_photon_number, g, von_neumann_entropy};
use crate::fock::{self, validate, DensityOperator, PureState, StateDiagnostics};
use crate::optics::{combine_product, BeamSplitter, BeamSplitterOutput, OutputArm, BOUNDARY_WARNING};
use crate::{Error, Result};

use super::sampler::ZERO_MEAN_TOLERANCE;

/// Entropy match required of a minimum-output-entropy conjecture-2 input.
pub const ENTROPY_CONSTRAINT_TOLERANCE: f64 = 1e-8;
/// Discarded weight of a truncated input above which the truncation flag is raised.
pub const INPUT_TAIL_WARNING: f64 = 1e-9;

/// Slacks of the three forms of the EPnI for one product input.
///
/// `n_a`, `n_b`, `n_c` are entropy photon numbers `g^{-1}(S / n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpniSlackReport {
    pub trial_id: u64,
    pub seed: u64,
    pub eta: f64,
    pub n_modes: usize,
    pub s_a: f64,
    pub s_b: f64,
    pub s_c: f64,
    pub n_a: f64,
    pub n_b: f64,
    pub n_c: f64,
    /// `N_c - eta N_a - (1-eta) N_b`.
    pub slack_eq12: f64,
    /// `S_c - n g(eta N_a + (1-eta) N_b)`.
    pub slack_eq13: f64,
    /// `S_c - eta S_a - (1-eta) S_b`.
    pub slack_eq14: f64,
    pub input_descriptors: String,
    pub truncation_warning: bool,
    pub boundary_mass: f64,
    pub output_diagnostics: StateDiagnostics,
}

impl EpniSlackReport {
    /// The first two slacks disagree in sign beyond `tol`.
    pub fn sign_mismatch(&self, tol: f64) -> bool {
        (self.slack_eq12 > tol && self.slack_eq13 < -tol) || (self.slack_eq12 < -tol && self.slack_eq13 > tol)
    }

    /// `slack_eq12 >= 0` without `slack_eq14 >= -tol`.
    pub fn implication_failure(&self, tol: f64) -> bool {
        self.slack_eq12 >= 0.0 && self.slack_eq14 < -tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Conjecture {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

/// Output entropy against the bound `n g((1-eta) K)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoeTrialReport {
    pub trial_id: u64,
    pub seed: u64,
    pub conjecture: Conjecture,
    pub k: f64,
    pub eta: f64,
    pub n_modes: usize,
    pub s_c: f64,
    pub bound: f64,
    pub margin: f64,
    pub input_descriptors: String,
    pub truncation_warning: bool,
    pub boundary_mass: f64,
    pub output_diagnostics: StateDiagnostics,
}

impl MoeTrialReport {
    pub fn bound_for(n_modes: usize, eta: f64, k: f64) -> f64 {
        n_modes as f64 * g((1.0 - eta) * k).expect("non-negative argument")
    }
}

fn input_truncated(rho: &DensityOperator) -> bool {
    rho.discarded_mass() > INPUT_TAIL_WARNING
}

fn output_flags(out: &BeamSplitterOutput, inputs: [&DensityOperator; 2]) -> bool {
    out.boundary_mass > BOUNDARY_WARNING || inputs.iter().any(|r| input_truncated(r))
}

/// EPnI slacks for `rho_a (x) rho_b` with an exact (lossless-arm) output.
pub fn epni_check(rho_a: &DensityOperator, rho_b: &DensityOperator, eta: f64) -> Result<EpniSlackReport> {
    epni_check_with(rho_a, rho_b, eta, OutputArm::Lossless)
}

pub fn epni_check_with(
    rho_a: &DensityOperator,
    rho_b: &DensityOperator,
    eta: f64,
    arm: OutputArm,
) -> Result<EpniSlackReport> {
    let n = rho_a.n_modes();
    if rho_b.n_modes() != n {
        return Err(Error::invalid(format!(
            "inputs have {n} and {} modes",
            rho_b.n_modes()
        )));
    }
    let bs = BeamSplitter::new(eta)?;
    let out = combine_product(rho_a, rho_b, bs, arm)?;
    let s_a = von_neumann_entropy(rho_a)?.nats;
    let s_b = von_neumann_entropy(rho_b)?.nats;
    let s_c = von_neumann_entropy(&out.state)?.nats;
    let n_a = entropy_photon_number(rho_a, n)?.mean_photons;
    let n_b = entropy_photon_number(rho_b, n)?.mean_photons;
    let n_c = entropy_photon_number(&out.state, n)?.mean_photons;
    let mixed = eta * n_a + (1.0 - eta) * n_b;
    Ok(EpniSlackReport {
        trial_id: 0,
        seed: 0,
        eta,
        n_modes: n,
        s_a,
        s_b,
        s_c,
        n_a,
        n_b,
        n_c,
        slack_eq12: n_c - mixed,
        slack_eq13: s_c - n as f64 * g(mixed)?,
        slack_eq14: s_c - eta * s_a - (1.0 - eta) * s_b,
        input_descriptors: String::new(),
        truncation_warning: output_flags(&out, [rho_a, rho_b]),
        boundary_mass: out.boundary_mass,
        output_diagnostics: validate(&out.state),
    })
}

/// Product of single-mode thermal states of mean photon number `k` on `d` levels each.
pub fn thermal_product(k: f64, d: usize, n: usize) -> Result<DensityOperator> {
    let single = fock::thermal_state(k, d)?;
    let mut rho = single.clone();
    for _ in 1..n {
        rho = fock::tensor(&rho, &single)?;
    }
    Ok(rho)
}

/// Conjecture 1: `psi_a` (zero mean field) against `rho_b`, a thermal product of mean `k`.
pub fn moe1_trial(psi_a: &PureState, rho_b: &DensityOperator, k: f64, eta: f64) -> Result<MoeTrialReport> {
    for mode in 0..psi_a.n_modes() {
        let m = psi_a.mean_field(mode)?;
        if m.norm() >= ZERO_MEAN_TOLERANCE {
            return Err(Error::RejectedInput(format!(
                "mode {mode} has mean field {m:.3e}; conjecture 1 takes zero-mean-field inputs"
            )));
        }
    }
    moe1_trial_unconstrained(psi_a, rho_b, k, eta)
}

/// Conjecture-1 margin without the zero-mean-field check (exploratory only).
pub fn moe1_trial_unconstrained(
    psi_a: &PureState,
    rho_b: &DensityOperator,
    k: f64,
    eta: f64,
) -> Result<MoeTrialReport> {
    let n = psi_a.n_modes();
    if rho_b.n_modes() != n {
        return Err(Error::invalid("signal and noise inputs must have the same number of modes"));
    }
    let bs = BeamSplitter::new(eta)?;
    let rho_a = psi_a.density();
    let out = combine_product(&rho_a, rho_b, bs, OutputArm::Lossless)?;
    moe_report(Conjecture::One, &out, [&rho_a, rho_b], n, k, eta)
}

/// Conjecture 2: vacuum signal against `rho_b` with `S(rho_b) = n g(k)`.
pub fn moe2_trial(rho_b: &DensityOperator, k: f64, eta: f64) -> Result<MoeTrialReport> {
    let n = rho_b.n_modes();
    let s_b = von_neumann_entropy(rho_b)?.nats;
    let target = n as f64 * g(k)?;
    if (s_b - target).abs() > ENTROPY_CONSTRAINT_TOLERANCE {
        return Err(Error::RejectedInput(format!(
            "S(rho_b) = {s_b} differs from n g(K) = {target} by more than {ENTROPY_CONSTRAINT_TOLERANCE:e}"
        )));
    }
    let bs = BeamSplitter::new(eta)?;
    // One level per mode holds the vacuum exactly; the lossless arm pads it.
    let vacuum = fock::vacuum_state(&vec![1; n])?.density();
    let out = combine_product(&vacuum, rho_b, bs, OutputArm::Lossless)?;
    moe_report(Conjecture::Two, &out, [&vacuum, rho_b], n, k, eta)
}

fn moe_report(
    conjecture: Conjecture,
    out: &BeamSplitterOutput,
    inputs: [&DensityOperator; 2],
    n: usize,
    k: f64,
    eta: f64,
) -> Result<MoeTrialReport> {
    let s_c = von_neumann_entropy(&out.state)?.nats;
    let bound = MoeTrialReport::bound_for(n, eta, k);
    Ok(MoeTrialReport {
        trial_id: 0,
        seed: 0,
        conjecture,
        k,
        eta,
        n_modes: n,
        s_c,
        bound,
        margin: s_c - bound,
        input_descriptors: String::new(),
        truncation_warning: output_flags(out, inputs),
        boundary_mass: out.boundary_mass,
        output_diagnostics: validate(&out.state),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{number_state, thermal_dim_for_tail, thermal_state, vacuum_state};
    use crate::linalg::C64;

    fn thermal(k: f64) -> DensityOperator {
        thermal_state(k, thermal_dim_for_tail(k, 1e-12).unwrap().max(2)).unwrap()
    }

    #[test]
    fn thermal_pairs_are_equality_cases() {
        for (na, nb, eta) in [(0.3, 1.2, 0.5), (1.0, 0.1, 0.25), (2.0, 2.0, 0.8)] {
            let r = epni_check(&thermal(na), &thermal(nb), eta).unwrap();
            assert!(r.slack_eq12.abs() < 1e-6, "{r:?}");
            assert!(r.slack_eq13.abs() < 1e-6);
            assert!(!r.truncation_warning);
        }
    }

    #[test]
    fn vacuum_and_thermal() {
        let k = 1.5;
        let r = epni_check(&vacuum_state(&[2]).unwrap().density(), &thermal(k), 0.4).unwrap();
        assert!(r.slack_eq12.abs() < 1e-6);
        assert!((r.s_c - g(0.6 * k).unwrap()).abs() < 1e-6);
        assert!(r.slack_eq14 >= 0.0);
    }

    #[test]
    fn single_photon_raises_output_entropy() {
        let b = thermal(1.0);
        let psi = number_state(1, 30).unwrap();
        let r = moe1_trial(&psi, &b, 1.0, 0.5).unwrap();
        assert!(r.margin > 0.0);
        let vac = moe1_trial(&vacuum_state(&[30]).unwrap(), &b, 1.0, 0.5).unwrap();
        assert!(vac.margin.abs() < 1e-6);
    }

    #[test]
    fn nonzero_mean_field_is_rejected() {
        let psi = fock::coherent_state(C64::new(0.5, 0.0), 10).unwrap();
        assert!(matches!(
            moe1_trial(&psi, &thermal(1.0), 1.0, 0.5),
            Err(Error::RejectedInput(_))
        ));
        assert!(moe1_trial_unconstrained(&psi, &thermal(1.0), 1.0, 0.5).is_ok());
    }

    #[test]
    fn conjecture_two_entry_check() {
        let k = 1.0;
        let r = moe2_trial(&thermal(k), k, 0.3).unwrap();
        assert!(r.margin.abs() < 1e-6);
        assert!(matches!(moe2_trial(&thermal(0.9), k, 0.3), Err(Error::RejectedInput(_))));
    }

    #[test]
    fn two_mode_thermal_product() {
        let k = 0.3;
        let d = thermal_dim_for_tail(k, 1e-10).unwrap();
        let rho_b = thermal_product(k, d, 2).unwrap();
        let r = moe2_trial(&rho_b, k, 0.5).unwrap();
        assert_eq!(r.n_modes, 2);
        assert!(r.margin.abs() < 1e-6);
        assert!((r.bound - 2.0 * g(0.15).unwrap()).abs() < 1e-15);
    }
}
