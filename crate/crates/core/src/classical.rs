//! Classical entropy power inequality on one-dimensional Gaussian mixtures.
//!
//! The combination `Z = sqrt(eta) X + sqrt(1-eta) Y` of independent mixtures
//! is again a mixture, so every entropy is a one-dimensional integral.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::entropy::real_entropy_power;
use crate::quadrature::integrate_adaptive;
use crate::{Error, Result};

/// Absolute tolerance of the entropy quadrature.
pub const ENTROPY_TOLERANCE: f64 = 1e-9;
/// Slacks below minus this floor are reportable.
pub const SLACK_FLOOR: f64 = 1e-6;

const MAX_PANELS: usize = 20_000;
const TWO_PI_E: f64 = 2.0 * std::f64::consts::PI * std::f64::consts::E;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Component>", into = "Vec<Component>")]
pub struct GaussianMixture1D {
    components: Vec<Component>,
}

impl TryFrom<Vec<Component>> for GaussianMixture1D {
    type Error = Error;

    fn try_from(components: Vec<Component>) -> Result<Self> {
        Self::new(components)
    }
}

impl From<GaussianMixture1D> for Vec<Component> {
    fn from(gm: GaussianMixture1D) -> Self {
        gm.components
    }
}

impl GaussianMixture1D {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("a mixture needs at least one component"));
        }
        for c in &components {
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(Error::invalid(format!("component weight {} must be positive", c.weight)));
            }
            if !(c.variance > 0.0 && c.variance.is_finite()) {
                return Err(Error::invalid(format!("component variance {} must be positive", c.variance)));
            }
            if !c.mean.is_finite() {
                return Err(Error::invalid("component mean must be finite"));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { components })
    }

    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        Self::new(vec![Component {
            weight: 1.0,
            mean,
            variance,
        }])
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn density(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|c| {
                let z = x - c.mean;
                c.weight * (-0.5 * z * z / c.variance).exp() / (2.0 * std::f64::consts::PI * c.variance).sqrt()
            })
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.mean).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.components
            .iter()
            .map(|c| c.weight * (c.variance + (c.mean - m).powi(2)))
            .sum()
    }

    /// Integration window `[min mean - 12 max sd, max mean + 12 max sd]`.
    pub fn support_window(&self) -> (f64, f64) {
        let sd = self
            .components
            .iter()
            .map(|c| c.variance.sqrt())
            .fold(0.0, f64::max);
        let lo = self.components.iter().map(|c| c.mean).fold(f64::INFINITY, f64::min);
        let hi = self.components.iter().map(|c| c.mean).fold(f64::NEG_INFINITY, f64::max);
        (lo - 12.0 * sd, hi + 12.0 * sd)
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::invalid(format!("eta must lie in [0, 1], got {eta}")));
    }
    Ok(())
}

/// Mixture of `sqrt(eta) X + sqrt(1-eta) Y` for independent `X`, `Y`.
pub fn combine(x: &GaussianMixture1D, y: &GaussianMixture1D, eta: f64) -> Result<GaussianMixture1D> {
    check_eta(eta)?;
    if eta == 1.0 {
        return Ok(x.clone());
    }
    if eta == 0.0 {
        return Ok(y.clone());
    }
    let (sx, sy) = (eta.sqrt(), (1.0 - eta).sqrt());
    let mut components = Vec::with_capacity(x.components.len() * y.components.len());
    for a in &x.components {
        for b in &y.components {
            components.push(Component {
                weight: a.weight * b.weight,
                mean: sx * a.mean + sy * b.mean,
                variance: eta * a.variance + (1.0 - eta) * b.variance,
            });
        }
    }
    // Product weights can drift from 1 by rounding; renormalize exactly.
    let total: f64 = components.iter().map(|c| c.weight).sum();
    for c in &mut components {
        c.weight /= total;
    }
    GaussianMixture1D::new(components)
}

/// Differential entropy `-int f ln f` in nats.
pub fn differential_entropy(gm: &GaussianMixture1D) -> Result<f64> {
    if let [c] = gm.components() {
        return Ok(0.5 * (TWO_PI_E * c.variance).ln());
    }
    let (a, b) = gm.support_window();
    let integrand = |x: f64| {
        let f = gm.density(x);
        if f < 1e-300 {
            0.0
        } else {
            -f * f.ln()
        }
    };
    integrate_adaptive(integrand, a, b, ENTROPY_TOLERANCE, MAX_PANELS)
        .map(|i| i.value)
        .map_err(|e| match e {
            Error::NumericalFailure(msg) => Error::NumericalFailure(format!(
                "entropy of a {}-component mixture: {msg}",
                gm.components().len()
            )),
            other => other,
        })
}

/// Entropies, entropy powers and the three inequality slacks for one `(X, Y, eta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpiSlackReport {
    pub eta: f64,
    pub h_x: f64,
    pub h_y: f64,
    pub h_z: f64,
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
    /// `P(Z) - eta P(X) - (1-eta) P(Y)`.
    pub slack_eq5: f64,
    /// `h(Z) - h(Z~)`, `Z~` the combination of Gaussians with variances `P(X)`, `P(Y)`.
    pub slack_eq6: f64,
    /// `h(Z) - eta h(X) - (1-eta) h(Y)`.
    pub slack_eq7: f64,
}

impl EpiSlackReport {
    pub fn from_entropies(h_x: f64, h_y: f64, h_z: f64, eta: f64) -> Self {
        let (p_x, p_y, p_z) = (real_entropy_power(h_x), real_entropy_power(h_y), real_entropy_power(h_z));
        let mixed_power = eta * p_x + (1.0 - eta) * p_y;
        Self {
            eta,
            h_x,
            h_y,
            h_z,
            p_x,
            p_y,
            p_z,
            slack_eq5: p_z - mixed_power,
            slack_eq6: h_z - 0.5 * (TWO_PI_E * mixed_power).ln(),
            slack_eq7: h_z - eta * h_x - (1.0 - eta) * h_y,
        }
    }

    pub fn min_slack(&self) -> f64 {
        self.slack_eq5.min(self.slack_eq6).min(self.slack_eq7)
    }

    pub fn is_violation(&self) -> bool {
        self.min_slack() < -SLACK_FLOOR
    }
}

pub fn epi_check(x: &GaussianMixture1D, y: &GaussianMixture1D, eta: f64) -> Result<EpiSlackReport> {
    let z = combine(x, y, eta)?;
    Ok(EpiSlackReport::from_entropies(
        differential_entropy(x)?,
        differential_entropy(y)?,
        differential_entropy(&z)?,
        eta,
    ))
}

/// Random mixture with 1 to `max_components` components, Dirichlet(1) weights,
/// means uniform in `[-5, 5]` and variances uniform in `[0.1, 4]`.
pub fn random_mixture<R: Rng + ?Sized>(rng: &mut R, max_components: usize) -> Result<GaussianMixture1D> {
    if max_components == 0 {
        return Err(Error::invalid("max_components must be >= 1"));
    }
    let m = rng.random_range(1..=max_components);
    let raw: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(Exp1).max(1e-12)).collect();
    let total: f64 = raw.iter().sum();
    let components = raw
        .iter()
        .map(|w| Component {
            weight: w / total,
            mean: rng.random_range(-5.0..=5.0),
            variance: rng.random_range(0.1..=4.0),
        })
        .collect();
    GaussianMixture1D::new(components)
}

/// One random `(X, Y, eta)` draw and its slacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpiTrial {
    pub trial_id: u64,
    pub seed: u64,
    pub x: GaussianMixture1D,
    pub y: GaussianMixture1D,
    pub report: EpiSlackReport,
}

/// Trial `trial` of a seeded campaign: two random mixtures and, unless fixed,
/// `eta` uniform in `[0, 1)`. Each trial has its own random stream.
pub fn random_epi_trial(seed: u64, trial: u64, max_components: usize, eta: Option<f64>) -> Result<EpiTrial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let x = random_mixture(&mut rng, max_components)?;
    let y = random_mixture(&mut rng, max_components)?;
    let eta = eta.unwrap_or_else(|| rng.random::<f64>());
    let report = epi_check(&x, &y, eta)?;
    Ok(EpiTrial {
        trial_id: trial,
        seed,
        x,
        y,
        report,
    })
}
