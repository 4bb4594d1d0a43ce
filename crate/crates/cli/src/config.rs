//! Configuration file schema and resolution of flags against it.
//!
//! A config file is TOML with an optional top-level `seed` and one optional
//! table per subcommand. Command-line flags override file values, which
//! override the built-in defaults. A run manifest (`manifest.json`) is also
//! accepted in place of a config file; its `config` member is used.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use epnilab::capacity::SweepGrid;
use epnilab::harness::campaign::Tolerances;
use epnilab::harness::search::EpniFamily;
use epnilab::harness::{CampaignConfig, Ensemble, Objective, SearchConfig};
use serde::{Deserialize, Serialize};

use crate::manifest::RunManifest;

/// Seed used when neither the command line nor the config file sets one.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<CapacitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epni: Option<CampaignSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moe: Option<CampaignSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epi: Option<EpiSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Trace, hermiticity and positivity tolerance for a state to count as valid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nbar: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<Vec<f64>>,
    /// Fill every missing grid with the default grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_grid: Option<bool>,
}

/// Shared by `[epni]` and `[moe]`; `conjecture` is only meaningful for `[moe]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conjecture: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_modes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpiSection {
    /// Mixture specification file, resolved relative to the working directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Number of random mixture pairs (used when no spec is given).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_components: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_evaluations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<EpniFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_tail: Option<f64>,
}

/// Reads a TOML config file or the `config` member of a run manifest.
pub fn load(path: &Path) -> anyhow::Result<FileConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        let manifest: RunManifest =
            serde_json::from_str(&text).with_context(|| format!("{} is not a run manifest", path.display()))?;
        return Ok(manifest.config);
    }
    toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

pub fn to_toml(config: &FileConfig) -> anyhow::Result<String> {
    Ok(toml::to_string(config)?)
}

pub fn resolve_seed(flag: Option<u64>, file: &FileConfig) -> anyhow::Result<u64> {
    let seed = flag.or(file.seed).unwrap_or(DEFAULT_SEED);
    if seed > i64::MAX as u64 {
        bail!("seed must be below 2^63 so that it round-trips through the config file");
    }
    Ok(seed)
}

/// Grid for the capacity sweep; `None` when a grid axis is missing.
pub fn resolve_capacity(section: &CapacitySection) -> Option<SweepGrid> {
    let default = SweepGrid::default();
    let fill = section.default_grid.unwrap_or(false);
    let pick = |v: &Option<Vec<f64>>, d: &Vec<f64>| v.clone().or_else(|| fill.then(|| d.clone()));
    Some(SweepGrid {
        eta: pick(&section.eta, &default.eta)?,
        nbar: pick(&section.nbar, &default.nbar)?,
        noise_n: pick(&section.noise, &default.noise_n)?,
    })
}

/// Short ensemble names accepted by `moe`, keyed by conjecture.
const MOE_SHORT_NAMES: [(u8, &str, Ensemble); 6] = [
    (1, "vacuum", Ensemble::Moe1Vacuum),
    (1, "zero-mean", Ensemble::Moe1ZeroMean),
    (1, "unconstrained", Ensemble::Moe1Unconstrained),
    (2, "thermal", Ensemble::Moe2Thermal),
    (2, "fixed-entropy", Ensemble::Moe2FixedEntropy),
    (2, "two-point", Ensemble::Moe2TwoPoint),
];

fn ensemble_names(filter: impl Fn(&Ensemble) -> bool) -> String {
    Ensemble::ALL.iter().filter(|e| filter(e)).map(|e| e.name()).collect::<Vec<_>>().join(", ")
}

fn fill_campaign(section: &CampaignSection, ensemble: Ensemble, seed: u64, defaults: (usize, usize, Vec<f64>)) -> CampaignConfig {
    let (dim, trials, eta) = defaults;
    let mut c = CampaignConfig::new(
        ensemble,
        seed,
        section.dim.unwrap_or(dim),
        section.trials.unwrap_or(trials),
        section.eta.clone().unwrap_or(eta),
    );
    c.n_modes = section.n_modes.unwrap_or(1);
    c.k = section.k.unwrap_or(1.0);
    c.tolerances = section.tolerances.unwrap_or_default();
    c
}

pub fn resolve_epni(section: &CampaignSection, seed: u64) -> anyhow::Result<CampaignConfig> {
    if section.conjecture.is_some() {
        bail!("`conjecture` belongs to the moe subcommand");
    }
    let name = section.ensemble.as_deref().unwrap_or("haar-pure-pure");
    let ensemble = Ensemble::from_name(name)
        .filter(Ensemble::is_epni)
        .ok_or_else(|| anyhow!("unknown EPnI ensemble `{name}`; expected one of {}", ensemble_names(Ensemble::is_epni)))?;
    Ok(fill_campaign(section, ensemble, seed, (8, 1000, vec![0.25, 0.5, 0.75])))
}

pub fn resolve_moe(section: &CampaignSection, seed: u64) -> anyhow::Result<CampaignConfig> {
    let conjecture = section.conjecture.unwrap_or(1);
    if !(1..=2).contains(&conjecture) {
        bail!("conjecture must be 1 or 2, got {conjecture}");
    }
    let name = section
        .ensemble
        .as_deref()
        .unwrap_or(if conjecture == 1 { "zero-mean" } else { "thermal" });
    let ensemble = MOE_SHORT_NAMES
        .iter()
        .find(|(c, n, _)| *c == conjecture && *n == name)
        .map(|(_, _, e)| *e)
        .or_else(|| Ensemble::from_name(name).filter(|e| e.conjecture() == Some(conjecture)))
        .ok_or_else(|| {
            let short: Vec<&str> = MOE_SHORT_NAMES.iter().filter(|(c, _, _)| *c == conjecture).map(|(_, n, _)| *n).collect();
            anyhow!("unknown conjecture-{conjecture} ensemble `{name}`; expected one of {}", short.join(", "))
        })?;
    Ok(fill_campaign(section, ensemble, seed, (10, 1000, vec![0.5])))
}

/// Fully populated section describing `config`, for manifests and replay.
pub fn campaign_section(config: &CampaignConfig, moe: bool) -> CampaignSection {
    let (conjecture, ensemble) = if moe {
        let (c, n, _) = MOE_SHORT_NAMES
            .iter()
            .find(|(_, _, e)| *e == config.ensemble)
            .expect("moe ensembles have short names");
        (Some(*c), n.to_string())
    } else {
        (None, config.ensemble.name().to_string())
    };
    CampaignSection {
        conjecture,
        ensemble: Some(ensemble),
        dim: Some(config.dim),
        n_modes: Some(config.n_modes),
        trials: Some(config.trials),
        eta: Some(config.eta.clone()),
        k: Some(config.k),
        tolerances: Some(config.tolerances),
    }
}

pub fn resolve_search(section: &SearchSection, seed: u64) -> anyhow::Result<SearchConfig> {
    let name = section.objective.as_deref().ok_or_else(|| anyhow!("an objective (moe1, moe2 or epni-slack) is required"))?;
    let objective =
        Objective::from_name(name).ok_or_else(|| anyhow!("unknown objective `{name}`; expected moe1, moe2 or epni-slack"))?;
    let mut c = SearchConfig::new(objective, seed, section.dim.unwrap_or(10), section.k.unwrap_or(1.0), section.eta.unwrap_or(0.5));
    if let Some(r) = section.restarts {
        c.restarts = r;
    }
    if let Some(m) = section.max_evaluations {
        c.max_evaluations = m;
    }
    if let Some(f) = section.family {
        c.family = f;
    }
    if let Some(t) = section.reference_tail {
        c.reference_tail = t;
    }
    Ok(c)
}

pub fn search_section(config: &SearchConfig) -> SearchSection {
    SearchSection {
        objective: Some(
            match config.objective {
                Objective::Moe1 => "moe1",
                Objective::Moe2 => "moe2",
                Objective::EpniSlack => "epni-slack",
            }
            .into(),
        ),
        dim: Some(config.dim),
        k: Some(config.k),
        eta: Some(config.eta),
        restarts: Some(config.restarts),
        max_evaluations: Some(config.max_evaluations),
        family: Some(config.family),
        reference_tail: Some(config.reference_tail),
    }
}
