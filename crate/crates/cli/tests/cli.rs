use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epnilab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn capacity_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["capacity", "--eta", "0.5", "--nbar", "1", "--noise", "0"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let table = std::fs::read_to_string(dir.path().join("capacity.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 2);
    let cells: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(cells[3], "inf");
    let g_half = 1.5 * 1.5f64.ln() - 0.5 * 0.5f64.ln();
    assert!((cells[6].parse::<f64>().unwrap() - g_half).abs() < 1e-15);
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["subcommand"], "capacity");
    assert_eq!(manifest["seed"], 42);
    let outputs: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for f in ["capacity.csv", "dominance.json", "config.toml", "manifest.json"] {
        assert!(outputs.contains(&f), "{f} missing from {outputs:?}");
        assert!(dir.path().join(f).exists());
    }
}

#[test]
fn capacity_missing_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["capacity", "--eta", "0.5"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn thermal_pairs_campaign_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["epni", "--ensemble", "thermal-pairs", "--trials", "100"];
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&args, &a).status.code(), Some(0));
    assert_eq!(run(&args, &b).status.code(), Some(0));
    let summary = json(&a.join("summary.json"));
    assert!(summary["max_abs_value"].as_f64().unwrap() < 1e-6);
    assert_eq!(summary["violations"], 0);
    for f in ["summary.json", "records.jsonl"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
    let records = std::fs::read_to_string(a.join("records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 100);
    let first: Value = serde_json::from_str(records.lines().next().unwrap()).unwrap();
    assert_eq!(first["kind"], "epni");
    assert_eq!(first["trial_id"], 0);
}

#[test]
fn moe_equality_ensembles() {
    let dir = tempfile::tempdir().unwrap();
    for (c, e) in [("1", "vacuum"), ("2", "thermal")] {
        let out_dir = dir.path().join(e);
        let out = run(&["moe", "--conjecture", c, "--ensemble", e, "--trials", "12"], &out_dir);
        assert_eq!(out.status.code(), Some(0));
        let s = json(&out_dir.join("summary.json"));
        assert!(s["max_abs_value"].as_f64().unwrap() < 1e-6);
        assert_eq!(s["objective"], "margin");
    }
}

#[test]
fn config_file_sections_and_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 9\n[epni]\nensemble = \"mixed-mixed\"\ndim = 4\ntrials = 5\neta = [0.4]\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&["epni", "--config", cfg.to_str().unwrap(), "--trials", "7"], &out_dir);
    assert_eq!(out.status.code(), Some(0));
    let m = json(&out_dir.join("manifest.json"));
    assert_eq!(m["seed"], 9);
    assert_eq!(m["config"]["epni"]["trials"], 7);
    assert_eq!(m["config"]["epni"]["dim"], 4);
    assert_eq!(m["config"]["epni"]["ensemble"], "mixed-mixed");

    std::fs::write(&cfg, "[epni]\ndims = 4\n").unwrap();
    let out = run(&["epni", "--config", cfg.to_str().unwrap()], &dir.path().join("bad"));
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["epni", "--ensemble", "moe1-vacuum"], &dir.path().join("bad"));
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["epni", "--dim", "64"], &dir.path().join("bad"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn violations_produce_dossiers_and_exit_3() {
    // A zero equality tolerance turns the rounding-level negative margins of
    // the vacuum family into violations, which exercises the dossier path.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("strict.toml");
    std::fs::write(&cfg, "[moe]\nconjecture = 1\nensemble = \"vacuum\"\ntrials = 3\ndim = 4\n[moe.tolerances]\nequality = 0.0\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&["moe", "--config", cfg.to_str().unwrap()], &out_dir);
    let summary = json(&out_dir.join("summary.json"));
    let dossier_trials = summary["dossier_trials"].as_array().unwrap();
    assert!(!dossier_trials.is_empty());
    assert_eq!(out.status.code(), Some(3));
    let id = dossier_trials[0].as_u64().unwrap();
    let d = out_dir.join(format!("dossiers/trial-{id:06}"));
    let dossier = json(&d.join("dossier.json"));
    assert_eq!(dossier["recomputations"].as_array().unwrap().len(), 2);
    let state = run(&["state", d.join("rho_b.fkst").to_str().unwrap()], &dir.path().join("inspect"));
    assert_eq!(state.status.code(), Some(0));
    let m = json(&out_dir.join("manifest.json"));
    assert_eq!(m["exit_code"], 3);
    assert!(m["outputs"].as_array().unwrap().iter().any(|v| v.as_str().unwrap().ends_with("dossier.json")));
}

#[test]
fn epi_spec_files() {
    let dir = tempfile::tempdir().unwrap();
    let gauss = dir.path().join("gauss.toml");
    std::fs::write(&gauss, "x = [{ weight = 1.0, mean = 0.0, variance = 1.0 }]\ny = [{ weight = 1.0, mean = 0.0, variance = 1.0 }]\n").unwrap();
    let out_dir = dir.path().join("g");
    assert_eq!(run(&["epi", gauss.to_str().unwrap(), "--eta", "0.3"], &out_dir).status.code(), Some(0));
    assert!(json(&out_dir.join("summary.json"))["max_abs_slack"].as_f64().unwrap() < 1e-9);

    let bimodal = dir.path().join("bimodal.toml");
    std::fs::write(
        &bimodal,
        "eta = 0.5\nx = [{ weight = 0.5, mean = -2.0, variance = 0.5 }, { weight = 0.5, mean = 2.0, variance = 0.5 }]\ny = [{ weight = 1.0, mean = 0.0, variance = 1.0 }]\n",
    )
    .unwrap();
    let out_dir = dir.path().join("b");
    assert_eq!(run(&["epi", bimodal.to_str().unwrap()], &out_dir).status.code(), Some(0));
    let record: Value = serde_json::from_str(std::fs::read_to_string(out_dir.join("records.jsonl")).unwrap().lines().next().unwrap()).unwrap();
    assert!(record["report"]["slack_eq5"].as_f64().unwrap() > 0.0);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "x = [{ weight = 0.5, mean = 0.0, variance = 1.0 }]\ny = []\n").unwrap();
    assert_eq!(run(&["epi", bad.to_str().unwrap()], &dir.path().join("x")).status.code(), Some(2));
    assert_eq!(run(&["epi"], &dir.path().join("y")).status.code(), Some(2));
}

#[test]
fn epi_random_pairs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["epi", "--random", "15"], dir.path()).status.code(), Some(0));
    let s = json(&dir.path().join("summary.json"));
    assert_eq!(s["pairs"], 15);
    for k in ["min_slack_eq5", "min_slack_eq6", "min_slack_eq7"] {
        assert!(s[k].as_f64().unwrap() >= -1e-6);
    }
}

#[test]
fn search_trace_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["search", "moe1", "--dim", "4", "--restarts", "2", "--max-evaluations", "300"];
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&args, &a).status.code(), Some(0));
    assert_eq!(run(&args, &b).status.code(), Some(0));
    assert_eq!(std::fs::read(a.join("trace.jsonl")).unwrap(), std::fs::read(b.join("trace.jsonl")).unwrap());
    let report = json(&a.join("search.json"));
    assert!(report["vacuum_fidelity"].as_f64().is_some());
    assert!(a.join("best_signal.fkst").exists());
    let state = run(&["state", a.join("best_signal.fkst").to_str().unwrap()], &dir.path().join("s"));
    assert_eq!(state.status.code(), Some(0));
    assert_eq!(json(&dir.path().join("s/state.json"))["kind"], "pure");

    assert_eq!(run(&["search", "moe3"], &dir.path().join("c")).status.code(), Some(2));
}

#[test]
fn state_rejects_malformed_files() {
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.fkst");
    std::fs::write(&junk, b"FKSX").unwrap();
    assert_eq!(run(&["state", junk.to_str().unwrap()], &dir.path().join("o")).status.code(), Some(2));
    let missing = dir.path().join("missing.fkst");
    assert_eq!(run(&["state", missing.to_str().unwrap()], &dir.path().join("o")).status.code(), Some(2));
}
