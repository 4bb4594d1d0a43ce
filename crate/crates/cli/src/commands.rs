//! Subcommand implementations.

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::CommandFactory;
use epnilab::capacity::{self, capacity_sweep, dominance_failures, CapacityPoint};
use epnilab::classical::{epi_check, random_epi_trial, EpiSlackReport, EpiTrial, GaussianMixture1D};
use epnilab::entropy::von_neumann_entropy;
use epnilab::fock::{self, mean_field, mean_photon_number, read_state, validate, StateDiagnostics, StoredState};
use epnilab::harness::campaign::Recomputation;
use epnilab::harness::search::{BestInput, EpniFamily, RestartSummary};
use epnilab::harness::{minimize_output_entropy, run_campaign, CampaignConfig, TrialRecord};
use epnilab::Error;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{self, CampaignSection, EpiSection, FileConfig, SearchSection, StateSection};
use crate::manifest::OutputDir;
use crate::{CampaignArgs, CapacityArgs, Cli, Command, EpiArgs, SearchArgs, StateArgs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DOSSIER: u8 = 3;

/// Best search value below minus this counts as a counterexample.
pub const SEARCH_VIOLATION: f64 = 1e-7;
/// Default validity tolerance of `state`.
pub const STATE_TOLERANCE: f64 = 1e-8;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl CliError {
    fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_USAGE,
            error: error.into(),
        }
    }

    fn internal(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_INTERNAL,
            error: error.into(),
        }
    }

    /// Input-related library errors are configuration errors; the rest are internal.
    fn core(error: Error) -> Self {
        let code = match error {
            Error::InvalidArgument(_)
            | Error::ResourceLimit { .. }
            | Error::RejectedInput(_)
            | Error::Infeasible(_)
            | Error::InvalidState(_)
            | Error::Format(_) => EXIT_USAGE,
            _ => EXIT_INTERNAL,
        };
        Self {
            code,
            error: error.into(),
        }
    }
}

type CmdResult<T> = Result<T, CliError>;

trait Internal<T> {
    fn internal(self) -> CmdResult<T>;
}

impl<T> Internal<T> for anyhow::Result<T> {
    fn internal(self) -> CmdResult<T> {
        self.map_err(CliError::internal)
    }
}

/// Exits with status 2 and the subcommand's usage text.
fn missing_argument(subcommand: &str, message: &str) -> ! {
    let mut cmd = Cli::command();
    cmd.build();
    let sub = cmd.find_subcommand_mut(subcommand).expect("subcommand exists");
    sub.error(ErrorKind::MissingRequiredArgument, message).exit()
}

pub fn run(cli: Cli) -> CmdResult<u8> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage(anyhow::anyhow!("--threads must be >= 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(CliError::internal)?;
    }
    let file = match &cli.config {
        Some(path) => config::load(path).map_err(CliError::usage)?,
        None => FileConfig::default(),
    };
    let seed = config::resolve_seed(cli.seed, &file).map_err(CliError::usage)?;
    let name = match &cli.command {
        Command::Capacity(_) => "capacity",
        Command::Epni(_) => "epni",
        Command::Moe(_) => "moe",
        Command::Epi(_) => "epi",
        Command::Search(_) => "search",
        Command::State(_) => "state",
    };
    let out_root = cli.out.clone().unwrap_or_else(|| PathBuf::from("epnilab-out").join(name));
    match cli.command {
        Command::Capacity(a) => cmd_capacity(a, file, seed, &out_root),
        Command::Epni(a) => cmd_campaign(a, file, seed, &out_root, false),
        Command::Moe(a) => cmd_campaign(a, file, seed, &out_root, true),
        Command::Epi(a) => cmd_epi(a, file, seed, &out_root),
        Command::Search(a) => cmd_search(a, file, seed, &out_root),
        Command::State(a) => cmd_state(a, file, seed, &out_root),
    }
}

fn print_json<T: Serialize>(value: &T) -> CmdResult<()> {
    println!("{}", serde_json::to_string_pretty(value).map_err(CliError::internal)?);
    Ok(())
}

fn finish(out: OutputDir, subcommand: &str, seed: u64, config: FileConfig, code: u8) -> CmdResult<u8> {
    let root = out.root().to_path_buf();
    out.finish(subcommand, seed, config, code as i32).internal()?;
    eprintln!("wrote {}", root.join(crate::manifest::MANIFEST_FILE).display());
    Ok(code)
}

fn cmd_capacity(args: CapacityArgs, file: FileConfig, seed: u64, out_root: &Path) -> CmdResult<u8> {
    let mut section = file.capacity.unwrap_or_default();
    section.eta = args.eta.or(section.eta);
    section.nbar = args.nbar.or(section.nbar);
    section.noise = args.noise.or(section.noise);
    if args.default_grid {
        section.default_grid = Some(true);
    }
    let Some(grid) = config::resolve_capacity(&section) else {
        missing_argument("capacity", "--eta, --nbar and --noise are required unless --default-grid is given");
    };
    let points = capacity_sweep(&grid).map_err(CliError::core)?;
    let failures = dominance_failures(&points);

    let mut out = OutputDir::create(out_root).internal()?;
    let mut table = Vec::new();
    capacity::write_table(&points, &mut table).map_err(CliError::internal)?;
    out.write_bytes("capacity.csv", &table).internal()?;
    out.write_json("dominance.json", &failures).internal()?;
    eprintln!("{} grid points, {} ordering failures", points.len(), failures.len());
    if points.len() == 1 {
        print_point(&points[0]);
    }
    let resolved = FileConfig {
        seed: Some(seed),
        capacity: Some(config::CapacitySection {
            eta: Some(grid.eta),
            nbar: Some(grid.nbar),
            noise: Some(grid.noise_n),
            default_grid: None,
        }),
        ..Default::default()
    };
    finish(out, "capacity", seed, resolved, EXIT_OK)
}

fn print_point(p: &CapacityPoint) {
    println!(
        "c_classical={} c_homodyne={} c_heterodyne={} c_pure_loss={} c_thermal_lb={}",
        p.c_classical, p.c_homodyne, p.c_heterodyne, p.c_pure_loss, p.c_thermal_lb
    );
}

#[derive(Debug, Serialize)]
struct DossierFile<'a> {
    record: &'a TrialRecord,
    rho_a: String,
    rho_b: String,
    rho_a_dims: &'a [usize],
    rho_b_dims: &'a [usize],
    recomputations: &'a [Recomputation],
}

fn cmd_campaign(args: CampaignArgs, file: FileConfig, seed: u64, out_root: &Path, moe: bool) -> CmdResult<u8> {
    let mut section = if moe { file.moe } else { file.epni }.unwrap_or_default();
    let CampaignArgs {
        conjecture,
        ensemble,
        dim,
        n_modes,
        trials,
        eta,
        k,
    } = args;
    section = CampaignSection {
        conjecture: conjecture.or(section.conjecture),
        ensemble: ensemble.or(section.ensemble),
        dim: dim.or(section.dim),
        n_modes: n_modes.or(section.n_modes),
        trials: trials.or(section.trials),
        eta: eta.or(section.eta),
        k: k.or(section.k),
        tolerances: section.tolerances,
    };
    let config = if moe {
        config::resolve_moe(&section, seed)
    } else {
        config::resolve_epni(&section, seed)
    }
    .map_err(CliError::usage)?;
    let result = run_campaign(&config).map_err(CliError::core)?;

    let mut out = OutputDir::create(out_root).internal()?;
    out.write_jsonl("records.jsonl", &result.records).internal()?;
    out.write_json("summary.json", &result.summary).internal()?;
    for d in &result.dossiers {
        let dir = format!("dossiers/trial-{:06}", d.record.trial_id());
        let (a, b) = (format!("{dir}/rho_a.fkst"), format!("{dir}/rho_b.fkst"));
        out.write_bytes(&a, &fock::encode_density(&d.rho_a)).internal()?;
        out.write_bytes(&b, &fock::encode_density(&d.rho_b)).internal()?;
        out.write_json(
            &format!("{dir}/dossier.json"),
            &DossierFile {
                record: &d.record,
                rho_a: a.clone(),
                rho_b: b.clone(),
                rho_a_dims: d.rho_a.mode_dims(),
                rho_b_dims: d.rho_b.mode_dims(),
                recomputations: &d.recomputations,
            },
        )
        .internal()?;
    }
    print_json(&result.summary)?;
    let code = if result.dossiers.is_empty() { EXIT_OK } else { EXIT_DOSSIER };
    if code == EXIT_DOSSIER {
        eprintln!("{} counterexample dossier(s) written under {}", result.dossiers.len(), out_root.join("dossiers").display());
    }
    let name = if moe { "moe" } else { "epni" };
    let resolved = campaign_file_config(&config, seed, moe);
    finish(out, name, seed, resolved, code)
}

fn campaign_file_config(config: &CampaignConfig, seed: u64, moe: bool) -> FileConfig {
    let section = Some(config::campaign_section(config, moe));
    FileConfig {
        seed: Some(seed),
        epni: if moe { None } else { section.clone() },
        moe: if moe { section } else { None },
        ..Default::default()
    }
}

/// Mixture specification file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixtureSpec {
    eta: Option<f64>,
    x: GaussianMixture1D,
    y: GaussianMixture1D,
}

#[derive(Debug, Serialize)]
struct EpiSummary {
    pairs: usize,
    min_slack_eq5: f64,
    min_slack_eq6: f64,
    min_slack_eq7: f64,
    max_abs_slack: f64,
    violations: Vec<u64>,
}

const DEFAULT_EPI_ETA: f64 = 0.5;
const DEFAULT_MAX_COMPONENTS: usize = 5;

fn cmd_epi(args: EpiArgs, file: FileConfig, seed: u64, out_root: &Path) -> CmdResult<u8> {
    let section = file.epi.unwrap_or_default();
    let mut section = EpiSection {
        spec: args.spec.or(section.spec),
        eta: args.eta.or(section.eta),
        random: args.random.or(section.random),
        max_components: args.max_components.or(section.max_components),
    };
    let trials: Vec<EpiTrial> = match (&section.spec, section.random) {
        (Some(path), _) => {
            section.random = None;
            section.max_components = None;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(anyhow::anyhow!("cannot read mixture spec {}: {e}", path.display())))?;
            let spec: MixtureSpec = toml::from_str(&text)
                .map_err(|e| CliError::usage(anyhow::anyhow!("invalid mixture spec {}: {e}", path.display())))?;
            let eta = section.eta.or(spec.eta).unwrap_or(DEFAULT_EPI_ETA);
            section.eta = Some(eta);
            let report = epi_check(&spec.x, &spec.y, eta).map_err(CliError::core)?;
            vec![EpiTrial {
                trial_id: 0,
                seed,
                x: spec.x,
                y: spec.y,
                report,
            }]
        }
        (None, Some(n)) => {
            let max_components = section.max_components.unwrap_or(DEFAULT_MAX_COMPONENTS);
            section.max_components = Some(max_components);
            let eta = section.eta;
            if let Some(e) = eta {
                if !(0.0..=1.0).contains(&e) {
                    return Err(CliError::usage(anyhow::anyhow!("eta must lie in [0, 1], got {e}")));
                }
            }
            (0..n as u64)
                .into_par_iter()
                .map(|i| random_epi_trial(seed, i, max_components, eta))
                .collect::<Result<Vec<_>, _>>()
                .map_err(CliError::core)?
        }
        (None, None) => missing_argument("epi", "a mixture spec file or --random <pairs> is required"),
    };
    if trials.is_empty() {
        return Err(CliError::usage(anyhow::anyhow!("--random must be >= 1")));
    }

    let reports: Vec<&EpiSlackReport> = trials.iter().map(|t| &t.report).collect();
    let min = |f: fn(&EpiSlackReport) -> f64| reports.iter().map(|r| f(r)).fold(f64::INFINITY, f64::min);
    let summary = EpiSummary {
        pairs: trials.len(),
        min_slack_eq5: min(|r| r.slack_eq5),
        min_slack_eq6: min(|r| r.slack_eq6),
        min_slack_eq7: min(|r| r.slack_eq7),
        max_abs_slack: reports
            .iter()
            .map(|r| r.slack_eq5.abs().max(r.slack_eq6.abs()).max(r.slack_eq7.abs()))
            .fold(0.0, f64::max),
        violations: trials.iter().filter(|t| t.report.is_violation()).map(|t| t.trial_id).collect(),
    };
    let mut out = OutputDir::create(out_root).internal()?;
    out.write_jsonl("records.jsonl", &trials).internal()?;
    out.write_json("summary.json", &summary).internal()?;
    for t in trials.iter().filter(|t| t.report.is_violation()) {
        out.write_json(&format!("dossiers/pair-{:06}.json", t.trial_id), t).internal()?;
    }
    print_json(&summary)?;
    let code = if summary.violations.is_empty() { EXIT_OK } else { EXIT_DOSSIER };
    let resolved = FileConfig {
        seed: Some(seed),
        epi: Some(section),
        ..Default::default()
    };
    finish(out, "epi", seed, resolved, code)
}

#[derive(Debug, Serialize)]
struct SearchReport<'a> {
    objective: &'a str,
    best_value: f64,
    best_restart: usize,
    vacuum_fidelity: Option<f64>,
    thermal_trace_distance: Option<f64>,
    counterexample: bool,
    best_input: Vec<String>,
    best_parameters: &'a [f64],
    restarts: &'a [RestartSummary],
}

fn cmd_search(args: SearchArgs, file: FileConfig, seed: u64, out_root: &Path) -> CmdResult<u8> {
    let section = file.search.unwrap_or_default();
    let family = match args.family.as_deref() {
        None => section.family,
        Some("thermal") => Some(EpniFamily::Thermal),
        Some("pure-pure") => Some(EpniFamily::PurePure),
        Some(other) => {
            return Err(CliError::usage(anyhow::anyhow!("unknown family `{other}`; expected thermal or pure-pure")))
        }
    };
    let section = SearchSection {
        objective: args.objective.or(section.objective),
        dim: args.dim.or(section.dim),
        k: args.k.or(section.k),
        eta: args.eta.or(section.eta),
        restarts: args.restarts.or(section.restarts),
        max_evaluations: args.max_evaluations.or(section.max_evaluations),
        family,
        reference_tail: section.reference_tail,
    };
    let config = config::resolve_search(&section, seed).map_err(CliError::usage)?;
    let result = minimize_output_entropy(&config).map_err(CliError::core)?;

    let mut out = OutputDir::create(out_root).internal()?;
    out.write_jsonl("trace.jsonl", &result.trace).internal()?;
    let mut inputs = Vec::new();
    let mut store = |out: &mut OutputDir, name: &str, bytes: Vec<u8>| -> CmdResult<()> {
        out.write_bytes(name, &bytes).internal()?;
        inputs.push(name.to_string());
        Ok(())
    };
    match &result.best_input {
        BestInput::Signal(psi) => store(&mut out, "best_signal.fkst", fock::encode_pure(psi))?,
        BestInput::Noise(rho) => store(&mut out, "best_noise.fkst", fock::encode_density(rho))?,
        BestInput::Pair(a, b) => {
            store(&mut out, "best_rho_a.fkst", fock::encode_density(a))?;
            store(&mut out, "best_rho_b.fkst", fock::encode_density(b))?;
        }
    }
    let resolved_section = config::search_section(&config);
    let counterexample = result.best_value < -SEARCH_VIOLATION;
    let report = SearchReport {
        objective: resolved_section.objective.as_deref().unwrap_or_default(),
        best_value: result.best_value,
        best_restart: result.best_restart,
        vacuum_fidelity: result.vacuum_fidelity,
        thermal_trace_distance: result.thermal_trace_distance,
        counterexample,
        best_input: inputs,
        best_parameters: &result.best_parameters,
        restarts: &result.restarts,
    };
    out.write_json("search.json", &report).internal()?;
    if counterexample {
        out.write_json("dossiers/search-best.json", &report).internal()?;
    }
    print_json(&report)?;
    let resolved = FileConfig {
        seed: Some(seed),
        search: Some(resolved_section.clone()),
        ..Default::default()
    };
    finish(out, "search", seed, resolved, if counterexample { EXIT_DOSSIER } else { EXIT_OK })
}

#[derive(Debug, Serialize)]
struct StateReport {
    path: String,
    kind: &'static str,
    mode_dims: Vec<usize>,
    dim: usize,
    kept_mass: f64,
    trace: f64,
    purity: f64,
    entropy_nats: f64,
    mean_photons: Vec<f64>,
    mean_field: Vec<[f64; 2]>,
    diagnostics: StateDiagnostics,
    tolerance: f64,
    valid: bool,
}

fn cmd_state(args: StateArgs, file: FileConfig, seed: u64, out_root: &Path) -> CmdResult<u8> {
    let section = file.state.unwrap_or_default();
    let path = args
        .path
        .or(section.path)
        .unwrap_or_else(|| missing_argument("state", "a state file path is required"));
    let tolerance = args.tolerance.or(section.tolerance).unwrap_or(STATE_TOLERANCE);
    let stored = read_state(&path).map_err(|e| match e {
        Error::Io(_) => CliError::usage(anyhow::anyhow!("cannot read {}: {e}", path.display())),
        other => CliError::core(other),
    })?;
    let rho = stored.to_density();
    let diagnostics = validate(&rho);
    let valid = diagnostics.is_clean(tolerance);
    let n = rho.n_modes();
    let report = StateReport {
        path: path.display().to_string(),
        kind: match stored {
            StoredState::Pure(_) => "pure",
            StoredState::Density(_) => "density",
        },
        mode_dims: rho.mode_dims().to_vec(),
        dim: rho.dim(),
        kept_mass: rho.kept_mass(),
        trace: rho.trace(),
        purity: rho.purity(),
        entropy_nats: if valid {
            von_neumann_entropy(&rho).map(|e| e.nats).unwrap_or(f64::NAN)
        } else {
            f64::NAN
        },
        mean_photons: (0..n).map(|m| mean_photon_number(&rho, m).unwrap_or(f64::NAN)).collect(),
        mean_field: (0..n)
            .map(|m| mean_field(&rho, m).map(|z| [z.re, z.im]).unwrap_or([f64::NAN; 2]))
            .collect(),
        diagnostics,
        tolerance,
        valid,
    };
    let mut out = OutputDir::create(out_root).internal()?;
    out.write_json("state.json", &report).internal()?;
    print_json(&report)?;
    let resolved = FileConfig {
        seed: Some(seed),
        state: Some(StateSection {
            path: Some(path),
            tolerance: Some(tolerance),
        }),
        ..Default::default()
    };
    finish(out, "state", seed, resolved, if valid { EXIT_OK } else { EXIT_USAGE })
}
