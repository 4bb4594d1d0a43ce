//! Acceptance criteria. Each test writes one `criterion N [PASS|FAIL]` line to
//! stderr (uncaptured) before asserting.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use epnilab::capacity::{capacity_sweep, pure_loss_capacity, thermal_lower_bound, SweepGrid};
use epnilab::classical::{epi_check, random_epi_trial, GaussianMixture1D};
use epnilab::entropy::{g, g_inv, von_neumann_entropy};
use epnilab::fock::{
    coherent_mixture_thermal, partial_trace, tensor, thermal_dim_for_tail, thermal_state, vacuum_state, DensityOperator,
    PolarGrid,
};
use epnilab::harness::campaign::{run_campaign, CampaignConfig, CampaignResult, Ensemble, TrialRecord};
use epnilab::harness::sampler::sample_mixed;
use epnilab::harness::search::{minimize_output_entropy, Objective, SearchConfig};
use epnilab::harness::trials::{moe1_trial, moe2_trial};
use epnilab::linalg::{max_abs, CMatrix, C64};
use epnilab::optics::{beamsplitter_unitary, combine_product, BeamSplitter, OutputArm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, pass: bool, text: String) {
    let line = format!("criterion {id} [{}] {text}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn tail_safe_thermal(k: f64) -> DensityOperator {
    thermal_state(k, thermal_dim_for_tail(k, 1e-12).unwrap().max(2)).unwrap()
}

#[test]
fn criterion_01_thermal_entropy_identity() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for k in [0.1, 0.5, 1.0, 2.0, 5.0] {
        let s = von_neumann_entropy(&tail_safe_thermal(k)).unwrap().nats;
        worst = worst.max((s - g(k).unwrap()).abs());
    }
    let elapsed = start.elapsed();
    let pass = worst < 1e-8 && elapsed < Duration::from_secs(1);
    report(1, pass, format!("max |S(thermal(K)) - g(K)| = {worst:.3e} (< 1e-8), {elapsed:.2?} (< 1 s)"));
    assert!(pass);
}

#[test]
fn criterion_02_coherent_mixture_matches_diagonal_thermal() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for k in [0.5, 1.0] {
        // Both routes renormalize on the 20 kept levels.
        let mixture = coherent_mixture_thermal(k, 20, PolarGrid::default()).unwrap();
        let diagonal = thermal_state(k, 20).unwrap();
        worst = worst.max(max_abs(&(mixture.matrix() - diagonal.matrix())));
    }
    let elapsed = start.elapsed();
    let pass = worst < 1e-6 && elapsed < Duration::from_secs(10);
    report(2, pass, format!("max entrywise difference {worst:.3e} (< 1e-6), {elapsed:.2?} (< 10 s)"));
    assert!(pass);
}

#[test]
fn criterion_03_equality_certificates() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for k in [0.5, 1.0, 2.0] {
        let noise = thermal_state(k, thermal_dim_for_tail(k, 1e-12).unwrap().max(40)).unwrap();
        let vacuum = vacuum_state(&[40]).unwrap().density();
        for eta in [0.3, 0.5, 0.9] {
            let bs = BeamSplitter::new(eta).unwrap();
            let target = g((1.0 - eta) * k).unwrap();
            let out = combine_product(&vacuum, &noise, bs, OutputArm::Lossless).unwrap();
            worst = worst.max((von_neumann_entropy(&out.state).unwrap().nats - target).abs());
            let psi = vacuum_state(&[40]).unwrap();
            worst = worst.max(moe1_trial(&psi, &noise, k, eta).unwrap().margin.abs());
            worst = worst.max(moe2_trial(&noise, k, eta).unwrap().margin.abs());
        }
    }
    let elapsed = start.elapsed();
    let pass = worst < 1e-6 && elapsed < Duration::from_secs(30);
    report(3, pass, format!("max |S(rho_c) - g((1-eta)K)| = {worst:.3e} (< 1e-6), {elapsed:.2?} (< 30 s)"));
    assert!(pass);
}

struct Campaigns {
    results: Vec<CampaignResult>,
    elapsed: Duration,
}

fn epni_campaigns() -> &'static Campaigns {
    static CELL: OnceLock<Campaigns> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let results = [Ensemble::HaarPurePure, Ensemble::HaarPureThermal, Ensemble::MixedMixed]
            .into_iter()
            .map(|e| run_campaign(&CampaignConfig::new(e, 42, 12, 10_000, vec![0.25, 0.5, 0.75])).unwrap())
            .collect();
        Campaigns {
            results,
            elapsed: start.elapsed(),
        }
    })
}

#[test]
fn criterion_04_epni_campaign() {
    let c = epni_campaigns();
    let mut min: f64 = f64::INFINITY;
    let mut dossiers = 0;
    let mut errors = 0;
    for r in &c.results {
        min = min.min(r.summary.min_value.unwrap_or(f64::NEG_INFINITY));
        dossiers += r.dossiers.len();
        errors += r.summary.errors;
    }
    let pass = min >= -1e-9 && dossiers == 0 && errors == 0 && c.elapsed < Duration::from_secs(600);
    report(
        4,
        pass,
        format!(
            "3 x 10^4 trials, min slack_eq12 = {min:.3e} (>= -1e-9), {dossiers} dossiers, {errors} errors, {:.1?} (< 10 min)",
            c.elapsed
        ),
    );
    assert!(pass);
}

/// `g(l x + (1-l) y) >= l g(x) + (1-l) g(y)` on random triples.
fn concavity_failures(n: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    (0..n)
        .filter(|_| {
            let x = 10f64.powf(rng.random_range(-4.0..2.0));
            let y = 10f64.powf(rng.random_range(-4.0..2.0));
            let l: f64 = rng.random();
            let lhs = g(l * x + (1.0 - l) * y).unwrap();
            let rhs = l * g(x).unwrap() + (1.0 - l) * g(y).unwrap();
            lhs < rhs - 1e-12 * (1.0 + rhs.abs())
        })
        .count()
}

#[test]
fn criterion_05_implication_chain() {
    let c = epni_campaigns();
    let mut checked = 0;
    let mut failures = 0;
    for r in &c.results {
        for rec in &r.records {
            if let TrialRecord::Epni(e) = rec {
                if e.slack_eq12 >= 0.0 {
                    checked += 1;
                    if e.slack_eq14 < -1e-9 {
                        failures += 1;
                    }
                }
            }
        }
    }
    let concave = concavity_failures(10_000);
    let pass = failures == 0 && concave == 0 && checked > 0;
    report(
        5,
        pass,
        format!("{failures} of {checked} trials with slack_eq12 >= 0 have slack_eq14 < -1e-9; {concave} of 10^4 concavity failures"),
    );
    assert!(pass);
}

#[test]
fn criterion_06_moe_searches() {
    let start = Instant::now();
    let mut moe1 = SearchConfig::new(Objective::Moe1, 42, 10, 1.0, 0.5);
    moe1.restarts = 20;
    let r1 = minimize_output_entropy(&moe1).unwrap();
    let t1 = start.elapsed();
    let fidelity = r1.vacuum_fidelity.unwrap();

    let start = Instant::now();
    let mut moe2 = SearchConfig::new(Objective::Moe2, 42, 10, 1.0, 0.5);
    moe2.restarts = 20;
    let r2 = minimize_output_entropy(&moe2).unwrap();
    let t2 = start.elapsed();
    let distance = r2.thermal_trace_distance.unwrap();

    let limit = Duration::from_secs(300);
    let pass = r1.best_value >= -1e-7 && fidelity > 0.99 && t1 < limit && r2.best_value >= -1e-7 && distance < 0.05 && t2 < limit;
    report(
        6,
        pass,
        format!(
            "conjecture 1: margin {:.3e} (>= -1e-7), vacuum fidelity {fidelity:.6} (> 0.99), {t1:.1?}; conjecture 2: margin {:.3e}, trace distance to thermal {distance:.4} (< 0.05), {t2:.1?}",
            r1.best_value, r2.best_value
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_capacity_comparisons() {
    let start = Instant::now();
    let grid = SweepGrid::default();
    let points = capacity_sweep(&grid).unwrap();
    let (mut pl_het, mut pl_hom, mut lb_het, mut lb_hom, mut lb_eq) = (0, 0, 0, 0, 0);
    let (mut n_pl, mut n_lb) = (0, 0);
    for p in &points {
        let n = p.params.noise_n;
        if n == 0.0 {
            n_pl += 1;
            let pl = p.c_pure_loss.finite().unwrap();
            pl_het += usize::from(pl <= p.c_heterodyne);
            pl_hom += usize::from(pl <= p.c_homodyne);
            let exact = pure_loss_capacity(&p.params).unwrap();
            lb_eq += usize::from(thermal_lower_bound(&p.params) != exact);
        } else if [0.5, 1.0, 5.0].contains(&n) {
            n_lb += 1;
            lb_het += usize::from(p.c_thermal_lb <= p.c_heterodyne);
            lb_hom += usize::from(p.c_thermal_lb <= p.c_homodyne);
        }
    }
    let elapsed = start.elapsed();
    let pass = pl_het + pl_hom + lb_het + lb_hom + lb_eq == 0 && elapsed < Duration::from_secs(1);
    report(
        7,
        pass,
        format!(
            "N=0: pure-loss fails to exceed heterodyne at {pl_het}/{n_pl}, homodyne at {pl_hom}/{n_pl}, lb(N=0) != pure-loss at {lb_eq}/{n_pl}; \
             N in {{0.5,1,5}}: thermal lb fails to exceed heterodyne at {lb_het}/{n_lb}, homodyne at {lb_hom}/{n_lb}; {elapsed:.2?} (< 1 s)"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_classical_epi_suite() {
    let start = Instant::now();
    let mut min_random = f64::INFINITY;
    for i in 0..100 {
        min_random = min_random.min(random_epi_trial(42, i, 5, None).unwrap().report.min_slack());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut max_gauss: f64 = 0.0;
    for _ in 0..100 {
        let v = rng.random_range(0.1..4.0);
        let x = GaussianMixture1D::gaussian(rng.random_range(-5.0..5.0), v).unwrap();
        let y = GaussianMixture1D::gaussian(rng.random_range(-5.0..5.0), v).unwrap();
        let r = epi_check(&x, &y, rng.random()).unwrap();
        max_gauss = max_gauss.max(r.slack_eq5.abs()).max(r.slack_eq6.abs()).max(r.slack_eq7.abs());
    }
    let elapsed = start.elapsed();
    let pass = min_random >= -1e-6 && max_gauss < 1e-9 && elapsed < Duration::from_secs(60);
    report(
        8,
        pass,
        format!("random mixtures min slack {min_random:.3e} (>= -1e-6); i.i.d. Gaussians max |slack| {max_gauss:.3e} (< 1e-9); {elapsed:.2?} (< 1 min)"),
    );
    assert!(pass);
}

/// `exp(m)` by scaling and squaring of a Taylor series.
fn expm(m: &CMatrix) -> CMatrix {
    let norm = m.iter().map(|z| z.norm()).sum::<f64>();
    let squarings = norm.log2().ceil().max(0.0) as u32 + 1;
    let scaled = m / C64::new(2f64.powi(squarings as i32), 0.0);
    let n = m.nrows();
    let mut term = CMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..40 {
        term = &term * &scaled / C64::new(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

fn hom_oracle_error() -> f64 {
    let d = 4;
    let theta = 0.5f64.sqrt().acos();
    // Two modes, index i*d + j; generator theta (a^dag b - a b^dag).
    let mut gen = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            if i + 1 < d && j >= 1 {
                let v = theta * ((i + 1) as f64 * j as f64).sqrt();
                gen[((i + 1) * d + j - 1, i * d + j)] += C64::new(v, 0.0);
                gen[(i * d + j, (i + 1) * d + j - 1)] -= C64::new(v, 0.0);
            }
        }
    }
    let oracle = expm(&gen);
    let u = beamsplitter_unitary(BeamSplitter::new(0.5).unwrap(), d, d).unwrap();
    let mut worst: f64 = 0.0;
    for (k, l) in [(1, 1), (1, 0), (0, 1), (2, 1)] {
        let col = u.column(k, l);
        let t = k + l;
        for (m, amp) in col {
            worst = worst.max((amp - oracle[(m * d + (t - m), k * d + l)]).norm());
        }
    }
    // Hong-Ou-Mandel: no coincidence amplitude at 50:50.
    worst.max(oracle[(d + 1, d + 1)].norm())
}

#[test]
fn criterion_09_numerical_infrastructure() {
    let unitarity = beamsplitter_unitary(BeamSplitter::new(0.37).unwrap(), 32, 32)
        .unwrap()
        .unitarity_residual_on_safe_blocks();
    let hom = hom_oracle_error();
    let mut round_trip: f64 = 0.0;
    for i in 0..1000 {
        let s = 10f64.powf(-6.0 + 8.0 * i as f64 / 999.0);
        round_trip = round_trip.max((g(g_inv(s).unwrap()).unwrap() - s).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut tensor_error: f64 = 0.0;
    for _ in 0..10 {
        let a = sample_mixed(&mut rng, 3, 1).unwrap();
        let b = sample_mixed(&mut rng, 4, 1).unwrap();
        let ab = tensor(&a, &b).unwrap();
        tensor_error = tensor_error
            .max(max_abs(&(partial_trace(&ab, &[0]).unwrap().matrix() - a.matrix())))
            .max(max_abs(&(partial_trace(&ab, &[1]).unwrap().matrix() - b.matrix())));
    }
    let pass = unitarity < 1e-10 && hom < 1e-10 && round_trip < 1e-12 && tensor_error < 1e-12;
    report(
        9,
        pass,
        format!(
            "unitarity {unitarity:.3e} (< 1e-10), HOM vs expm {hom:.3e} (< 1e-10), g_inv round trip {round_trip:.3e} (< 1e-12), tensor/partial trace {tensor_error:.3e} (< 1e-12)"
        ),
    );
    assert!(pass);
}

fn epnilab(args: &[&str], out: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_epnilab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

#[test]
fn criterion_10_replay_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut identical = 0;
    let runs: [&[&str]; 3] = [
        &["epni", "--ensemble", "haar-pure-thermal", "--dim", "6", "--trials", "60", "--seed", "7"],
        &["moe", "--conjecture", "1", "--ensemble", "zero-mean", "--dim", "6", "--trials", "30"],
        &["moe", "--conjecture", "2", "--ensemble", "fixed-entropy", "--dim", "6", "--trials", "30", "--k", "0.5"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let first = dir.path().join(format!("run{i}"));
        let replay = dir.path().join(format!("replay{i}"));
        assert_eq!(epnilab(args, &first), 0);
        let manifest = first.join("manifest.json");
        assert_eq!(epnilab(&[args[0], "--config", manifest.to_str().unwrap(), "--threads", "1"], &replay), 0);
        let a = std::fs::read(first.join("records.jsonl")).unwrap();
        let b = std::fs::read(replay.join("records.jsonl")).unwrap();
        identical += usize::from(!a.is_empty() && a == b);
    }
    let pass = identical == runs.len();
    report(10, pass, format!("{identical}/{} campaigns replayed from their manifests with byte-identical records", runs.len()));
    assert!(pass);
}
