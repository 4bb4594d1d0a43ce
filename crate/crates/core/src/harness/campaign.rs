//! Seeded, parallel campaigns of EPnI and minimum-output-entropy trials.
//!
//! Trial `i` draws from a ChaCha stream keyed by `(seed, i)`, so records do not
//! depend on thread count or scheduling, and any trial can be regenerated alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::g;
use crate::fock::{self, thermal_dim_for_tail, DensityOperator, PureState, DEFAULT_MAX_TOTAL_DIM};
use crate::optics::{apply_beamsplitter_vector, combine_product, BeamSplitter, OutputArm, MAX_JOINT_DIM};
use crate::{Error, Result};

use super::sampler;
use super::trials::{
    epni_check, moe1_trial, moe1_trial_unconstrained, moe2_trial, thermal_product, EpniSlackReport, MoeTrialReport,
};

/// Largest per-mode truncation accepted for campaigns.
pub const MAX_CAMPAIGN_DIM: usize = 32;
/// Extra levels per mode used by the dossier recomputations.
pub const DOSSIER_PADDING: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ensemble {
    /// Thermal `(N_a, N_b)` pairs with means uniform in `[0, 2K]`; equality family.
    ThermalPairs,
    /// Vacuum against thermal(K); equality family.
    VacuumThermal,
    HaarPurePure,
    HaarPureThermal,
    /// Random-rank Ginibre mixed states on both inputs.
    MixedMixed,
    /// Conjecture 1 with the vacuum signal; equality family.
    Moe1Vacuum,
    Moe1ZeroMean,
    /// Conjecture 1 without the zero-mean-field constraint (exploratory).
    Moe1Unconstrained,
    /// Conjecture 2 with thermal noise input; equality family.
    Moe2Thermal,
    Moe2FixedEntropy,
    /// Conjecture 2 with a diagonal two-level mixture per mode (needs `g(K) <= ln 2`).
    Moe2TwoPoint,
}

impl Ensemble {
    pub const ALL: [Ensemble; 11] = [
        Ensemble::ThermalPairs,
        Ensemble::VacuumThermal,
        Ensemble::HaarPurePure,
        Ensemble::HaarPureThermal,
        Ensemble::MixedMixed,
        Ensemble::Moe1Vacuum,
        Ensemble::Moe1ZeroMean,
        Ensemble::Moe1Unconstrained,
        Ensemble::Moe2Thermal,
        Ensemble::Moe2FixedEntropy,
        Ensemble::Moe2TwoPoint,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Ensemble::ThermalPairs => "thermal-pairs",
            Ensemble::VacuumThermal => "vacuum-thermal",
            Ensemble::HaarPurePure => "haar-pure-pure",
            Ensemble::HaarPureThermal => "haar-pure-thermal",
            Ensemble::MixedMixed => "mixed-mixed",
            Ensemble::Moe1Vacuum => "moe1-vacuum",
            Ensemble::Moe1ZeroMean => "moe1-zero-mean",
            Ensemble::Moe1Unconstrained => "moe1-unconstrained",
            Ensemble::Moe2Thermal => "moe2-thermal",
            Ensemble::Moe2FixedEntropy => "moe2-fixed-entropy",
            Ensemble::Moe2TwoPoint => "moe2-two-point",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }

    /// Every trial is expected to sit at zero up to truncation error.
    pub fn is_equality_family(&self) -> bool {
        matches!(
            self,
            Ensemble::ThermalPairs | Ensemble::VacuumThermal | Ensemble::Moe1Vacuum | Ensemble::Moe2Thermal
        )
    }

    pub fn is_epni(&self) -> bool {
        matches!(
            self,
            Ensemble::ThermalPairs
                | Ensemble::VacuumThermal
                | Ensemble::HaarPurePure
                | Ensemble::HaarPureThermal
                | Ensemble::MixedMixed
        )
    }

    pub fn conjecture(&self) -> Option<u8> {
        match self {
            Ensemble::Moe1Vacuum | Ensemble::Moe1ZeroMean | Ensemble::Moe1Unconstrained => Some(1),
            Ensemble::Moe2Thermal | Ensemble::Moe2FixedEntropy | Ensemble::Moe2TwoPoint => Some(2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Violation threshold for equality families (truncation dominated).
    pub equality: f64,
    /// Violation threshold for inequality ensembles (eigensolver dominated).
    pub inequality_floor: f64,
    /// Slacks smaller than this in magnitude carry no sign.
    pub sign_agreement: f64,
    /// Thermal inputs keep enough levels that the discarded tail is below this.
    pub reference_tail: f64,
    /// Output diagnostics must be within this for a violation to produce a dossier.
    pub clean_diagnostics: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            equality: 1e-6,
            inequality_floor: 1e-9,
            sign_agreement: 1e-10,
            reference_tail: 1e-12,
            clean_diagnostics: 1e-8,
        }
    }
}

fn default_modes() -> usize {
    1
}

fn default_k() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub seed: u64,
    pub dim: usize,
    #[serde(default = "default_modes")]
    pub n_modes: usize,
    pub trials: usize,
    /// Transmissivities cycled over trial indices.
    pub eta: Vec<f64>,
    /// Thermal mean photon number, or the entropy parameter `S = n g(K)` for conjecture 2.
    #[serde(default = "default_k")]
    pub k: f64,
    pub ensemble: Ensemble,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl CampaignConfig {
    pub fn new(ensemble: Ensemble, seed: u64, dim: usize, trials: usize, eta: Vec<f64>) -> Self {
        Self {
            seed,
            dim,
            n_modes: 1,
            trials,
            eta,
            k: 1.0,
            ensemble,
            tolerances: Tolerances::default(),
        }
    }

    pub fn violation_threshold(&self) -> f64 {
        if self.ensemble.is_equality_family() {
            self.tolerances.equality
        } else {
            self.tolerances.inequality_floor
        }
    }

    /// Levels kept for a thermal input of mean `k`.
    pub fn reference_dim(&self, k: f64) -> Result<usize> {
        Ok(thermal_dim_for_tail(k, self.tolerances.reference_tail)?.max(self.dim))
    }

    /// Largest thermal mean used by the ensemble.
    fn max_thermal_mean(&self) -> f64 {
        match self.ensemble {
            Ensemble::ThermalPairs => 2.0 * self.k,
            _ => self.k,
        }
    }

    /// Per-mode truncations of the two inputs.
    fn input_dims(&self) -> Result<(usize, usize)> {
        let d = self.dim;
        let thermal = self.reference_dim(self.max_thermal_mean())?;
        Ok(match self.ensemble {
            Ensemble::ThermalPairs => (thermal, thermal),
            Ensemble::VacuumThermal
            | Ensemble::HaarPureThermal
            | Ensemble::Moe1Vacuum
            | Ensemble::Moe1ZeroMean
            | Ensemble::Moe1Unconstrained => (d, thermal),
            Ensemble::HaarPurePure | Ensemble::MixedMixed => (d, d),
            Ensemble::Moe2Thermal => (1, thermal),
            Ensemble::Moe2FixedEntropy | Ensemble::Moe2TwoPoint => (1, d),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be >= 1"));
        }
        if self.dim < 2 || self.dim > MAX_CAMPAIGN_DIM {
            return Err(Error::invalid(format!(
                "dim must lie in [2, {MAX_CAMPAIGN_DIM}], got {}",
                self.dim
            )));
        }
        if !(1..=2).contains(&self.n_modes) {
            return Err(Error::invalid(format!("n_modes must be 1 or 2, got {}", self.n_modes)));
        }
        if self.eta.is_empty() || self.eta.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(Error::invalid(format!("eta grid must be non-empty with values in [0, 1], got {:?}", self.eta)));
        }
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(Error::invalid(format!("K must be finite and >= 0, got {}", self.k)));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("equality", t.equality),
            ("inequality_floor", t.inequality_floor),
            ("sign_agreement", t.sign_agreement),
            ("clean_diagnostics", t.clean_diagnostics),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("tolerance {name} must be finite and >= 0")));
            }
        }
        if !(t.reference_tail > 0.0 && t.reference_tail < 1.0) {
            return Err(Error::invalid("tolerance reference_tail must lie in (0, 1)"));
        }
        let per_mode = g(self.k)?;
        match self.ensemble {
            Ensemble::Moe2TwoPoint if per_mode > std::f64::consts::LN_2 => {
                return Err(Error::Infeasible(format!(
                    "two-point inputs carry at most ln 2 per mode, but g(K) = {per_mode}"
                )))
            }
            Ensemble::Moe2FixedEntropy if per_mode > (self.dim as f64).ln() => {
                return Err(Error::Infeasible(format!(
                    "g(K) = {per_mode} exceeds ln d = {} per mode",
                    (self.dim as f64).ln()
                )))
            }
            _ => {}
        }
        let (da, db) = self.input_dims()?;
        let e = da + db - 1;
        let c_dim = e.checked_pow(self.n_modes as u32).unwrap_or(usize::MAX);
        if c_dim > DEFAULT_MAX_TOTAL_DIM || c_dim.saturating_mul(c_dim) > MAX_JOINT_DIM {
            return Err(Error::ResourceLimit {
                requested: c_dim,
                limit: DEFAULT_MAX_TOTAL_DIM.min((MAX_JOINT_DIM as f64).sqrt() as usize),
            });
        }
        Ok(())
    }

    pub fn eta_for(&self, trial: u64) -> f64 {
        self.eta[(trial % self.eta.len() as u64) as usize]
    }

    pub fn trial_rng(&self, trial: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial);
        rng
    }
}

/// A failed trial; the campaign records it and moves on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialError {
    pub trial_id: u64,
    pub seed: u64,
    pub eta: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrialRecord {
    Epni(EpniSlackReport),
    Moe(MoeTrialReport),
    Error(TrialError),
}

impl TrialRecord {
    pub fn trial_id(&self) -> u64 {
        match self {
            TrialRecord::Epni(r) => r.trial_id,
            TrialRecord::Moe(r) => r.trial_id,
            TrialRecord::Error(e) => e.trial_id,
        }
    }

    /// `slack_eq12` for EPnI trials, the margin for conjecture trials.
    pub fn value(&self) -> Option<f64> {
        match self {
            TrialRecord::Epni(r) => Some(r.slack_eq12),
            TrialRecord::Moe(r) => Some(r.margin),
            TrialRecord::Error(_) => None,
        }
    }

    fn descriptor(&self) -> Option<&str> {
        match self {
            TrialRecord::Epni(r) => Some(&r.input_descriptors),
            TrialRecord::Moe(r) => Some(&r.input_descriptors),
            TrialRecord::Error(_) => None,
        }
    }

    fn flagged(&self) -> bool {
        match self {
            TrialRecord::Epni(r) => r.truncation_warning,
            TrialRecord::Moe(r) => r.truncation_warning,
            TrialRecord::Error(_) => false,
        }
    }

    fn clean(&self, tol: f64) -> bool {
        match self {
            TrialRecord::Epni(r) => r.output_diagnostics.is_clean(tol),
            TrialRecord::Moe(r) => r.output_diagnostics.is_clean(tol),
            TrialRecord::Error(_) => false,
        }
    }
}

/// Regenerated inputs of one trial.
#[derive(Debug, Clone)]
pub enum TrialInputs {
    Product {
        rho_a: DensityOperator,
        rho_b: DensityOperator,
    },
    Moe1 {
        psi_a: PureState,
        rho_b: DensityOperator,
        constrained: bool,
    },
    Moe2 {
        rho_b: DensityOperator,
    },
}

impl TrialInputs {
    /// Both inputs as density operators; the conjecture-2 signal is the vacuum on one level per mode.
    pub fn densities(&self) -> Result<(DensityOperator, DensityOperator)> {
        Ok(match self {
            TrialInputs::Product { rho_a, rho_b } => (rho_a.clone(), rho_b.clone()),
            TrialInputs::Moe1 { psi_a, rho_b, .. } => (psi_a.density(), rho_b.clone()),
            TrialInputs::Moe2 { rho_b } => (fock::vacuum_state(&vec![1; rho_b.n_modes()])?.density(), rho_b.clone()),
        })
    }
}

fn describe_thermal(k: f64, d: usize, n: usize) -> String {
    format!("thermal(K={k}, d={d})^{n}")
}

/// Draws the inputs of trial `trial` and a human-readable description.
pub fn trial_inputs(config: &CampaignConfig, trial: u64) -> Result<(TrialInputs, String)> {
    use rand::Rng;
    let mut rng = config.trial_rng(trial);
    let (d, n, k) = (config.dim, config.n_modes, config.k);
    let thermal = |mean: f64| -> Result<(DensityOperator, String)> {
        let dim = config.reference_dim(mean)?;
        Ok((thermal_product(mean, dim, n)?, describe_thermal(mean, dim, n)))
    };
    let dims = vec![d; n];
    Ok(match config.ensemble {
        Ensemble::ThermalPairs => {
            let na = rng.random_range(0.0..=2.0 * k);
            let nb = rng.random_range(0.0..=2.0 * k);
            let (rho_a, da) = thermal(na)?;
            let (rho_b, db) = thermal(nb)?;
            (TrialInputs::Product { rho_a, rho_b }, format!("{da} | {db}"))
        }
        Ensemble::VacuumThermal => {
            let (rho_b, db) = thermal(k)?;
            let rho_a = fock::vacuum_state(&dims)?.density();
            (TrialInputs::Product { rho_a, rho_b }, format!("vacuum(d={d})^{n} | {db}"))
        }
        Ensemble::HaarPurePure => {
            let a = sampler::sample_pure(&mut rng, d, n)?.density();
            let b = sampler::sample_pure(&mut rng, d, n)?.density();
            (
                TrialInputs::Product { rho_a: a, rho_b: b },
                format!("haar-pure(d={d}, n={n}) | haar-pure(d={d}, n={n})"),
            )
        }
        Ensemble::HaarPureThermal => {
            let a = sampler::sample_pure(&mut rng, d, n)?.density();
            let (rho_b, db) = thermal(k)?;
            (TrialInputs::Product { rho_a: a, rho_b }, format!("haar-pure(d={d}, n={n}) | {db}"))
        }
        Ensemble::MixedMixed => {
            let a = sampler::sample_mixed(&mut rng, d, n)?;
            let b = sampler::sample_mixed(&mut rng, d, n)?;
            (
                TrialInputs::Product { rho_a: a, rho_b: b },
                format!("ginibre-mixed(d={d}, n={n}) | ginibre-mixed(d={d}, n={n})"),
            )
        }
        Ensemble::Moe1Vacuum | Ensemble::Moe1ZeroMean | Ensemble::Moe1Unconstrained => {
            let (psi_a, da) = match config.ensemble {
                Ensemble::Moe1Vacuum => (fock::vacuum_state(&dims)?, format!("vacuum(d={d})^{n}")),
                Ensemble::Moe1ZeroMean => (
                    sampler::sample_pure_zero_mean(&mut rng, d, n)?,
                    format!("zero-mean-pure(d={d}, n={n})"),
                ),
                _ => (
                    sampler::sample_pure(&mut rng, d, n)?,
                    format!("unconstrained-pure(d={d}, n={n}) [exploratory]"),
                ),
            };
            let (rho_b, db) = thermal(k)?;
            let constrained = config.ensemble != Ensemble::Moe1Unconstrained;
            (TrialInputs::Moe1 { psi_a, rho_b, constrained }, format!("{da} | {db}"))
        }
        Ensemble::Moe2Thermal => {
            let (rho_b, db) = thermal(k)?;
            (TrialInputs::Moe2 { rho_b }, format!("vacuum | {db}"))
        }
        Ensemble::Moe2FixedEntropy => {
            let s = n as f64 * g(k)?;
            let rho_b = sampler::sample_density_fixed_entropy_modes(&mut rng, &dims, s)?;
            (TrialInputs::Moe2 { rho_b }, format!("vacuum | fixed-entropy(S={s}, d={d}, n={n})"))
        }
        Ensemble::Moe2TwoPoint => {
            let rho_b = sampler::sample_two_point_product(&mut rng, d, n, k)?;
            let levels: Vec<String> = (0..n)
                .map(|m| {
                    let p = rho_b.marginal_populations(m).unwrap_or_default();
                    let support: Vec<String> = p
                        .iter()
                        .enumerate()
                        .filter(|(_, w)| **w > 0.0)
                        .map(|(i, _)| i.to_string())
                        .collect();
                    support.join("+")
                })
                .collect();
            (
                TrialInputs::Moe2 { rho_b },
                format!("vacuum | two-point(levels {}, d={d})", levels.join(" x ")),
            )
        }
    })
}

fn evaluate(inputs: &TrialInputs, config: &CampaignConfig, eta: f64) -> Result<TrialRecord> {
    Ok(match inputs {
        TrialInputs::Product { rho_a, rho_b } => TrialRecord::Epni(epni_check(rho_a, rho_b, eta)?),
        TrialInputs::Moe1 {
            psi_a,
            rho_b,
            constrained,
        } => TrialRecord::Moe(if *constrained {
            moe1_trial(psi_a, rho_b, config.k, eta)?
        } else {
            moe1_trial_unconstrained(psi_a, rho_b, config.k, eta)?
        }),
        TrialInputs::Moe2 { rho_b } => TrialRecord::Moe(moe2_trial(rho_b, config.k, eta)?),
    })
}

/// Runs one trial; failures become [`TrialRecord::Error`].
pub fn run_trial(config: &CampaignConfig, trial: u64) -> TrialRecord {
    let eta = config.eta_for(trial);
    let result = trial_inputs(config, trial).and_then(|(inputs, descriptor)| {
        let mut record = evaluate(&inputs, config, eta)?;
        match &mut record {
            TrialRecord::Epni(r) => {
                r.trial_id = trial;
                r.seed = config.seed;
                r.input_descriptors = descriptor;
            }
            TrialRecord::Moe(r) => {
                r.trial_id = trial;
                r.seed = config.seed;
                r.input_descriptors = descriptor;
            }
            TrialRecord::Error(_) => {}
        }
        Ok(record)
    });
    result.unwrap_or_else(|e| {
        TrialRecord::Error(TrialError {
            trial_id: trial,
            seed: config.seed,
            eta,
            message: e.to_string(),
        })
    })
}

/// Independent recomputation of a violating trial's objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recomputation {
    pub method: String,
    pub padded_dims: Vec<usize>,
    pub value: Option<f64>,
    pub error: Option<String>,
}

/// Everything needed to replay and scrutinize a violation.
#[derive(Debug, Clone)]
pub struct Dossier {
    pub record: TrialRecord,
    pub rho_a: DensityOperator,
    pub rho_b: DensityOperator,
    pub recomputations: Vec<Recomputation>,
}

fn objective_from_output(
    record: &TrialRecord,
    rho_a: &DensityOperator,
    rho_b: &DensityOperator,
    rho_c: &DensityOperator,
) -> Result<f64> {
    use crate::entropy::{entropy_photon_number, von_neumann_entropy};
    let s_c = von_neumann_entropy(rho_c)?.nats;
    match record {
        TrialRecord::Epni(r) => {
            let n = r.n_modes;
            let n_a = entropy_photon_number(rho_a, n)?.mean_photons;
            let n_b = entropy_photon_number(rho_b, n)?.mean_photons;
            let n_c = entropy_photon_number(rho_c, n)?.mean_photons;
            Ok(n_c - r.eta * n_a - (1.0 - r.eta) * n_b)
        }
        TrialRecord::Moe(r) => Ok(s_c - r.bound),
        TrialRecord::Error(_) => Err(Error::invalid("no objective for a failed trial")),
    }
}

/// Recomputes the objective twice: with the product engine on inputs padded by
/// [`DOSSIER_PADDING`] levels per mode, and with the dense joint-state route
/// (which fails with a resource error when the joint space is too large).
pub fn recompute(record: &TrialRecord, rho_a: &DensityOperator, rho_b: &DensityOperator) -> Vec<Recomputation> {
    let eta = match record {
        TrialRecord::Epni(r) => r.eta,
        TrialRecord::Moe(r) => r.eta,
        TrialRecord::Error(_) => return Vec::new(),
    };
    let pad = |rho: &DensityOperator| -> Vec<usize> { rho.mode_dims().iter().map(|d| d + DOSSIER_PADDING).collect() };
    let (pa, pb) = (pad(rho_a), pad(rho_b));
    let n = rho_a.n_modes();
    let finish = |method: &str, dims: Vec<usize>, value: Result<f64>| match value {
        Ok(v) => Recomputation {
            method: method.into(),
            padded_dims: dims,
            value: Some(v),
            error: None,
        },
        Err(e) => Recomputation {
            method: method.into(),
            padded_dims: dims,
            value: None,
            error: Some(e.to_string()),
        },
    };
    let Ok(bs) = BeamSplitter::new(eta) else {
        return Vec::new();
    };
    let sparse = (|| {
        let (a, b) = (rho_a.embed(&pa)?, rho_b.embed(&pb)?);
        let out = combine_product(&a, &b, bs, OutputArm::Lossless)?;
        objective_from_output(record, rho_a, rho_b, &out.state)
    })();
    // Dense route: both arms padded to `d_a + d_b - 1` so that no populated block is cut.
    let common: Vec<usize> = rho_a
        .mode_dims()
        .iter()
        .zip(rho_b.mode_dims())
        .map(|(x, y)| x + y - 1)
        .collect();
    let dense = (|| {
        let joint = fock::tensor_with_limit(&rho_a.embed(&common)?, &rho_b.embed(&common)?, DEFAULT_MAX_TOTAL_DIM)?;
        let pairing: Vec<(usize, usize)> = (0..n).map(|i| (i, n + i)).collect();
        let rho_c = apply_beamsplitter_vector(&joint, bs, &pairing)?;
        objective_from_output(record, rho_a, rho_b, &rho_c)
    })();
    vec![
        finish("product-engine-lossless", pa.iter().chain(&pb).cloned().collect(), sparse),
        finish("dense-joint-state", common.iter().chain(&common).cloned().collect(), dense),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub ensemble: Ensemble,
    pub seed: u64,
    pub trials: usize,
    pub completed: usize,
    pub errors: usize,
    /// `slack_eq12` for EPnI ensembles, `margin` for conjecture ensembles.
    pub objective: String,
    pub min_value: Option<f64>,
    pub max_abs_value: Option<f64>,
    pub argmin_trial: Option<u64>,
    pub argmin_descriptor: Option<String>,
    pub min_slack_eq13: Option<f64>,
    pub min_slack_eq14: Option<f64>,
    pub violation_threshold: f64,
    pub violations: usize,
    /// Violations without the truncation flag.
    pub unflagged_violations: usize,
    pub sign_mismatches: usize,
    pub implication_failures: usize,
    pub truncation_warnings: usize,
    pub dossier_trials: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub records: Vec<TrialRecord>,
    pub summary: CampaignSummary,
    pub dossiers: Vec<Dossier>,
}

fn fold_min(acc: Option<f64>, x: f64) -> Option<f64> {
    Some(acc.map_or(x, |a| a.min(x)))
}

pub fn summarize(config: &CampaignConfig, records: &[TrialRecord]) -> CampaignSummary {
    let threshold = config.violation_threshold();
    let tol = &config.tolerances;
    let mut s = CampaignSummary {
        ensemble: config.ensemble,
        seed: config.seed,
        trials: records.len(),
        completed: 0,
        errors: 0,
        objective: if config.ensemble.is_epni() { "slack_eq12" } else { "margin" }.into(),
        min_value: None,
        max_abs_value: None,
        argmin_trial: None,
        argmin_descriptor: None,
        min_slack_eq13: None,
        min_slack_eq14: None,
        violation_threshold: threshold,
        violations: 0,
        unflagged_violations: 0,
        sign_mismatches: 0,
        implication_failures: 0,
        truncation_warnings: 0,
        dossier_trials: Vec::new(),
    };
    for r in records {
        let Some(v) = r.value() else {
            s.errors += 1;
            continue;
        };
        s.completed += 1;
        if s.min_value.is_none_or(|m| v < m) {
            s.min_value = Some(v);
            s.argmin_trial = Some(r.trial_id());
            s.argmin_descriptor = r.descriptor().map(str::to_string);
        }
        s.max_abs_value = Some(s.max_abs_value.map_or(v.abs(), |m: f64| m.max(v.abs())));
        if r.flagged() {
            s.truncation_warnings += 1;
        }
        if v < -threshold {
            s.violations += 1;
            if !r.flagged() {
                s.unflagged_violations += 1;
            }
            if r.clean(tol.clean_diagnostics) {
                s.dossier_trials.push(r.trial_id());
            }
        }
        if let TrialRecord::Epni(e) = r {
            s.min_slack_eq13 = fold_min(s.min_slack_eq13, e.slack_eq13);
            s.min_slack_eq14 = fold_min(s.min_slack_eq14, e.slack_eq14);
            if e.sign_mismatch(tol.sign_agreement) {
                s.sign_mismatches += 1;
            }
            if e.implication_failure(tol.inequality_floor) {
                s.implication_failures += 1;
            }
        }
    }
    s
}

/// Runs every trial (in parallel), summarizes in trial order and builds
/// dossiers for violations with clean output diagnostics.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignResult> {
    config.validate()?;
    let records: Vec<TrialRecord> = (0..config.trials as u64)
        .into_par_iter()
        .map(|i| run_trial(config, i))
        .collect();
    let summary = summarize(config, &records);
    let dossiers = summary
        .dossier_trials
        .iter()
        .map(|&i| build_dossier(config, &records[i as usize]))
        .collect::<Result<Vec<_>>>()?;
    Ok(CampaignResult {
        records,
        summary,
        dossiers,
    })
}

pub fn build_dossier(config: &CampaignConfig, record: &TrialRecord) -> Result<Dossier> {
    let (inputs, _) = trial_inputs(config, record.trial_id())?;
    let (rho_a, rho_b) = inputs.densities()?;
    let recomputations = recompute(record, &rho_a, &rho_b);
    Ok(Dossier {
        record: record.clone(),
        rho_a,
        rho_b,
        recomputations,
    })
}
