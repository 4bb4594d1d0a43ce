//! Derivative-free search for inputs with lower output entropy than the
//! conjectured minimizers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::entropy::{g, von_neumann_entropy};
use crate::fock::{self, thermal_dim_for_tail, DensityOperator, PureState};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::optics::{BeamSplitter, FixedPort, LinearOutputMap, OutputArm};
use crate::{Error, Result};

use super::sampler::{self, project_zero_mean, Displacer};
use super::simplex::{self, SimplexOptions};
use super::trials::epni_check;

/// Largest truncation accepted for a search.
pub const MAX_SEARCH_DIM: usize = 64;
/// Objective value assigned to parameters that cannot be mapped to a valid input.
pub const INFEASIBLE_PENALTY: f64 = 1e3;
/// Progress is recorded every this many simplex iterations.
pub const TRACE_STRIDE: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Conjecture-1 margin over zero-mean-field pure signals.
    Moe1,
    /// Conjecture-2 margin over noise inputs of fixed entropy.
    Moe2,
    /// EPnI `slack_eq12` over a chosen input family.
    EpniSlack,
}

impl Objective {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "moe1" => Some(Objective::Moe1),
            "moe2" => Some(Objective::Moe2),
            "epni-slack" => Some(Objective::EpniSlack),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpniFamily {
    /// Two thermal inputs with means `5 sin^2(u)`; slack is zero on the whole family.
    #[default]
    Thermal,
    /// Two arbitrary pure inputs.
    PurePure,
}

fn default_restarts() -> usize {
    20
}

fn default_max_evaluations() -> usize {
    3000
}

fn default_reference_tail() -> f64 {
    1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub objective: Objective,
    pub seed: u64,
    pub dim: usize,
    pub k: f64,
    pub eta: f64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Objective evaluations per restart.
    #[serde(default = "default_max_evaluations")]
    pub max_evaluations: usize,
    #[serde(default)]
    pub family: EpniFamily,
    #[serde(default = "default_reference_tail")]
    pub reference_tail: f64,
}

impl SearchConfig {
    pub fn new(objective: Objective, seed: u64, dim: usize, k: f64, eta: f64) -> Self {
        Self {
            objective,
            seed,
            dim,
            k,
            eta,
            restarts: default_restarts(),
            max_evaluations: default_max_evaluations(),
            family: EpniFamily::default(),
            reference_tail: default_reference_tail(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::invalid("restarts must be >= 1"));
        }
        if self.max_evaluations == 0 {
            return Err(Error::invalid("max_evaluations must be >= 1"));
        }
        if self.dim < 2 || self.dim > MAX_SEARCH_DIM {
            return Err(Error::invalid(format!("dim must lie in [2, {MAX_SEARCH_DIM}], got {}", self.dim)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::invalid(format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(Error::invalid(format!("K must be finite and >= 0, got {}", self.k)));
        }
        if !(self.reference_tail > 0.0 && self.reference_tail < 1.0) {
            return Err(Error::invalid("reference_tail must lie in (0, 1)"));
        }
        if self.objective == Objective::Moe2 && g(self.k)? > (self.dim as f64).ln() {
            return Err(Error::Infeasible(format!(
                "g(K) = {} exceeds ln d = {}",
                g(self.k)?,
                (self.dim as f64).ln()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub restart: usize,
    pub iteration: usize,
    pub evaluations: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub start_value: f64,
    pub final_value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Best input found by a search.
#[derive(Debug, Clone, PartialEq)]
pub enum BestInput {
    Signal(PureState),
    Noise(DensityOperator),
    Pair(DensityOperator, DensityOperator),
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub config: SearchConfig,
    /// Lowest margin (or slack) found.
    pub best_value: f64,
    pub best_restart: usize,
    pub best_parameters: Vec<f64>,
    pub best_input: BestInput,
    /// `|<0|psi>|^2` of the best conjecture-1 signal.
    pub vacuum_fidelity: Option<f64>,
    /// Trace distance of the best conjecture-2 noise input to thermal(K) on the same levels.
    pub thermal_trace_distance: Option<f64>,
    pub restarts: Vec<RestartSummary>,
    pub trace: Vec<TraceEntry>,
}

/// Maps real parameters to inputs and evaluates the objective.
trait Problem {
    fn n_params(&self) -> usize;
    fn start<R: Rng>(&self, rng: &mut R) -> Vec<f64>;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn input(&self, x: &[f64]) -> Result<BestInput>;
}

fn complex_params(x: &[f64]) -> CVector {
    let d = x.len() / 2;
    CVector::from_iterator(d, (0..d).map(|i| C64::new(x[2 * i], x[2 * i + 1])))
}

fn gaussian_start<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

struct Moe1Problem {
    dim: usize,
    bound: f64,
    map: LinearOutputMap,
    displacer: Displacer,
}

impl Moe1Problem {
    fn signal(&self, x: &[f64]) -> Result<PureState> {
        let psi = PureState::normalized(complex_params(x), vec![self.dim])?;
        project_zero_mean(&psi, &self.displacer)
    }
}

impl Problem for Moe1Problem {
    fn n_params(&self) -> usize {
        2 * self.dim
    }

    fn start<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        gaussian_start(rng, self.n_params(), 1.0 / (2.0 * self.dim as f64).sqrt())
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let rho_c = self.map.apply_pure(&self.signal(x)?)?;
        Ok(von_neumann_entropy(&rho_c)?.nats - self.bound)
    }

    fn input(&self, x: &[f64]) -> Result<BestInput> {
        Ok(BestInput::Signal(self.signal(x)?))
    }
}

struct Moe2Problem {
    dim: usize,
    entropy: f64,
    bound: f64,
    map: LinearOutputMap,
}

impl Moe2Problem {
    /// Spectrum logits, then `d-1` Givens angles and `d-1` phases.
    fn noise(&self, x: &[f64]) -> Result<DensityOperator> {
        let d = self.dim;
        let top = x[..d].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let q: Vec<f64> = x[..d].iter().map(|l| (l - top).exp().max(1e-300)).collect();
        let total: f64 = q.iter().sum();
        let q: Vec<f64> = q.iter().map(|v| v / total).collect();
        let spectrum = if self.entropy == 0.0 {
            let i = (0..d).max_by(|&i, &j| q[i].total_cmp(&q[j])).unwrap_or(0);
            (0..d).map(|j| if j == i { 1.0 } else { 0.0 }).collect()
        } else if self.entropy >= (d as f64).ln() {
            vec![1.0 / d as f64; d]
        } else {
            sampler::tempered_spectrum(&q, self.entropy)?
        };
        let mut u = CMatrix::identity(d, d);
        for k in 0..d - 1 {
            let (theta, phi) = (x[d + k], x[2 * d - 1 + k]);
            let (c, s) = (theta.cos(), theta.sin());
            let e = C64::from_polar(1.0, phi);
            for r in 0..d {
                let (a, b) = (u[(r, k)], u[(r, k + 1)]);
                u[(r, k)] = a * c + b * e * s;
                u[(r, k + 1)] = -a * e.conj() * s + b * c;
            }
        }
        let mut scaled = u.clone();
        for (j, p) in spectrum.iter().enumerate() {
            for r in 0..d {
                scaled[(r, j)] *= C64::new(*p, 0.0);
            }
        }
        DensityOperator::new(linalg::hermitian_part(&(scaled * u.adjoint())), vec![d])
    }
}

impl Problem for Moe2Problem {
    fn n_params(&self) -> usize {
        3 * self.dim - 2
    }

    fn start<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        gaussian_start(rng, self.n_params(), 1.0)
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let rho_c = self.map.apply(&self.noise(x)?)?;
        Ok(von_neumann_entropy(&rho_c)?.nats - self.bound)
    }

    fn input(&self, x: &[f64]) -> Result<BestInput> {
        Ok(BestInput::Noise(self.noise(x)?))
    }
}

struct EpniProblem {
    dim: usize,
    eta: f64,
    family: EpniFamily,
    tail: f64,
}

impl EpniProblem {
    fn inputs(&self, x: &[f64]) -> Result<(DensityOperator, DensityOperator)> {
        match self.family {
            EpniFamily::Thermal => {
                let thermal = |u: f64| -> Result<DensityOperator> {
                    let mean = 5.0 * u.sin().powi(2);
                    fock::thermal_state(mean, thermal_dim_for_tail(mean, self.tail)?.max(2))
                };
                Ok((thermal(x[0])?, thermal(x[1])?))
            }
            EpniFamily::PurePure => {
                let d = self.dim;
                let a = PureState::normalized(complex_params(&x[..2 * d]), vec![d])?;
                let b = PureState::normalized(complex_params(&x[2 * d..]), vec![d])?;
                Ok((a.density(), b.density()))
            }
        }
    }
}

impl Problem for EpniProblem {
    fn n_params(&self) -> usize {
        match self.family {
            EpniFamily::Thermal => 2,
            EpniFamily::PurePure => 4 * self.dim,
        }
    }

    fn start<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self.family {
            EpniFamily::Thermal => (0..2).map(|_| rng.random_range(0.0..std::f64::consts::PI)).collect(),
            EpniFamily::PurePure => gaussian_start(rng, self.n_params(), 1.0),
        }
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let (a, b) = self.inputs(x)?;
        Ok(epni_check(&a, &b, self.eta)?.slack_eq12)
    }

    fn input(&self, x: &[f64]) -> Result<BestInput> {
        let (a, b) = self.inputs(x)?;
        Ok(BestInput::Pair(a, b))
    }
}

fn run<P: Problem>(problem: &P, config: &SearchConfig) -> Result<(f64, usize, Vec<f64>, Vec<RestartSummary>, Vec<TraceEntry>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let options = SimplexOptions {
        max_evaluations: config.max_evaluations,
        ..SimplexOptions::default()
    };
    let objective = |x: &[f64]| problem.value(x).unwrap_or(INFEASIBLE_PENALTY);
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut restarts = Vec::with_capacity(config.restarts);
    let mut trace = Vec::new();
    for restart in 0..config.restarts {
        let x0 = problem.start(&mut rng);
        let start_value = objective(&x0);
        let outcome = simplex::minimize(objective, &x0, &options, |iteration, evaluations, value| {
            if iteration % TRACE_STRIDE == 0 {
                trace.push(TraceEntry {
                    restart,
                    iteration,
                    evaluations,
                    value,
                });
            }
        });
        trace.push(TraceEntry {
            restart,
            iteration: outcome.iterations,
            evaluations: outcome.evaluations,
            value: outcome.value,
        });
        restarts.push(RestartSummary {
            restart,
            start_value,
            final_value: outcome.value,
            evaluations: outcome.evaluations,
            converged: outcome.converged,
        });
        log::debug!("restart {restart}: {start_value:.6e} -> {:.6e}", outcome.value);
        if best.as_ref().is_none_or(|b| outcome.value < b.0) {
            best = Some((outcome.value, restart, outcome.x));
        }
    }
    let (value, restart, x) = best.expect("at least one restart");
    Ok((value, restart, x, restarts, trace))
}

/// Searches for the input minimizing the chosen objective with restarted Nelder-Mead.
///
/// The conjecture objectives evaluate the output through a precomputed linear
/// map with the other input fixed; thermal inputs keep enough levels that the
/// discarded tail is below `reference_tail`, and outputs use the lossless arm.
pub fn minimize_output_entropy(config: &SearchConfig) -> Result<SearchResult> {
    config.validate()?;
    let bs = BeamSplitter::new(config.eta)?;
    let bound = g((1.0 - config.eta) * config.k)?;
    let (best_value, best_restart, best_parameters, restarts, trace, best_input) = match config.objective {
        Objective::Moe1 => {
            let rho_b = fock::thermal_state(config.k, thermal_dim_for_tail(config.k, config.reference_tail)?.max(2))?;
            let problem = Moe1Problem {
                dim: config.dim,
                bound,
                map: LinearOutputMap::new(&rho_b, FixedPort::B, config.dim, bs, OutputArm::Lossless)?,
                displacer: Displacer::new(config.dim),
            };
            let (v, r, x, rs, t) = run(&problem, config)?;
            let input = problem.input(&x)?;
            (v, r, x, rs, t, input)
        }
        Objective::Moe2 => {
            let vacuum = fock::vacuum_state(&[1])?.density();
            let problem = Moe2Problem {
                dim: config.dim,
                entropy: g(config.k)?,
                bound,
                map: LinearOutputMap::new(&vacuum, FixedPort::A, config.dim, bs, OutputArm::Lossless)?,
            };
            let (v, r, x, rs, t) = run(&problem, config)?;
            let input = problem.input(&x)?;
            (v, r, x, rs, t, input)
        }
        Objective::EpniSlack => {
            let problem = EpniProblem {
                dim: config.dim,
                eta: config.eta,
                family: config.family,
                tail: config.reference_tail,
            };
            let (v, r, x, rs, t) = run(&problem, config)?;
            let input = problem.input(&x)?;
            (v, r, x, rs, t, input)
        }
    };
    let vacuum_fidelity = match &best_input {
        BestInput::Signal(psi) => Some(psi.amplitudes()[0].norm_sqr()),
        _ => None,
    };
    let thermal_trace_distance = match &best_input {
        BestInput::Noise(rho) => {
            let reference = fock::thermal_state(config.k, config.dim)?;
            Some(linalg::trace_distance(rho.matrix(), reference.matrix()))
        }
        _ => None,
    };
    Ok(SearchResult {
        config: config.clone(),
        best_value,
        best_restart,
        best_parameters,
        best_input,
        vacuum_fidelity,
        thermal_trace_distance,
        restarts,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let mut c = SearchConfig::new(Objective::Moe1, 1, 10, 1.0, 0.5);
        assert!(c.validate().is_ok());
        c.restarts = 0;
        assert!(c.validate().is_err());
        let mut c = SearchConfig::new(Objective::Moe2, 1, 2, 5.0, 0.5);
        assert!(matches!(c.validate(), Err(Error::Infeasible(_))));
        c.dim = 65;
        assert!(c.validate().is_err());
        assert_eq!(Objective::from_name("moe3"), None);
    }

    #[test]
    fn thermal_family_slack_is_flat() {
        let mut c = SearchConfig::new(Objective::EpniSlack, 3, 4, 1.0, 0.4);
        c.restarts = 2;
        c.max_evaluations = 60;
        let r = minimize_output_entropy(&c).unwrap();
        assert!(r.best_value.abs() < 1e-6, "{}", r.best_value);
    }

    #[test]
    fn small_moe1_search_finds_vacuum() {
        let mut c = SearchConfig::new(Objective::Moe1, 5, 4, 1.0, 0.5);
        c.restarts = 3;
        c.max_evaluations = 1500;
        let r = minimize_output_entropy(&c).unwrap();
        assert!(r.best_value >= -1e-7);
        assert!(r.vacuum_fidelity.unwrap() > 0.99, "{:?} {}", r.vacuum_fidelity, r.best_value);
    }

    #[test]
    fn search_is_deterministic() {
        let mut c = SearchConfig::new(Objective::Moe2, 9, 4, 0.5, 0.5);
        c.restarts = 2;
        c.max_evaluations = 200;
        let a = minimize_output_entropy(&c).unwrap();
        let b = minimize_output_entropy(&c).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.best_parameters, b.best_parameters);
    }
}
