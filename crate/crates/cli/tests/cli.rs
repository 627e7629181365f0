use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn diffuser(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diffuser"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = diffuser(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json_file(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn error_line(out: &Output) -> Value {
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = stderr.lines().filter(|l| l.starts_with('{')).collect();
    assert_eq!(lines.len(), 1, "stderr: {stderr}");
    serde_json::from_str(lines[0]).unwrap()
}

fn count_edge_lines(path: &Path) -> Vec<(usize, usize, String)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let mut parts = l.split_whitespace();
            let i = parts.next().unwrap().parse().unwrap();
            let j = parts.next().unwrap().parse().unwrap();
            (i, j, parts.next().unwrap().to_string())
        })
        .collect()
}

#[test]
fn pattern_example_writes_graph_and_stats() {
    let tmp = TempDir::new().unwrap();
    let stdout = ok(
        tmp.path(),
        &[
            "pattern", "--n", "1024", "--pattern", "local,global,random", "--window", "64",
            "--global-tokens", "64", "--random-per-token", "64", "--seed", "0", "--out", "g.json",
        ],
    );
    let printed: Value = serde_json::from_str(&stdout).unwrap();
    let stats = json_file(tmp.path().join("stats.json"));
    assert_eq!(printed, stats);

    // Recount from the edge list.
    let edges = count_edge_lines(&tmp.path().join("g.json"));
    assert_eq!(stats["nnz_total"].as_u64().unwrap() as usize, edges.len());
    for label in ["self", "local", "global", "random"] {
        let brute = edges.iter().filter(|e| e.2 == label).count();
        assert_eq!(stats["nnz_by_label"][label].as_u64().unwrap() as usize, brute, "{label}");
    }
    assert_eq!(edges.iter().filter(|e| e.0 == e.1).count(), 1024);
    let pct = 100.0 * edges.len() as f64 / (1024.0 * 1024.0);
    assert!((stats["pct_total"].as_f64().unwrap() - pct).abs() < 1e-12);

    let manifest = json_file(tmp.path().join("manifest.json"));
    assert_eq!(manifest["subcommand"], "pattern");
    assert_eq!(manifest["global"]["seed"], 0);
    assert_eq!(manifest["command"]["pattern"]["pattern"]["window"], 64);
}

#[test]
fn diffuse_with_alpha_one_returns_values() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["pattern", "--n", "64", "--window", "8", "--global-tokens", "4",
        "--random-per-token", "4", "--out", "g.json"]);
    fs::write(
        tmp.path().join("v.csv"),
        (0..64).fold(String::from("64,2\n"), |acc, i| acc + &format!("{},{}\n", i as f64 * 0.5, -(i as f64))),
    )
    .unwrap();
    ok(tmp.path(), &["diffuse", "--graph", "g.json", "--alpha", "1.0", "--steps", "5",
        "--values", "v.csv", "--out", "z.csv"]);
    assert_eq!(
        fs::read_to_string(tmp.path().join("v.csv")).unwrap(),
        fs::read_to_string(tmp.path().join("z.csv")).unwrap()
    );
}

#[test]
fn diffuse_oracle_within_truncation_bound() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["pattern", "--n", "128", "--window", "8", "--global-tokens", "4",
        "--random-per-token", "8", "--out", "g.json"]);
    let stdout = ok(tmp.path(), &["diffuse", "--graph", "g.json", "--alpha", "0.15",
        "--steps", "6", "--oracle"]);
    let report: Value = serde_json::from_str(&stdout).unwrap();
    let err = report["max_error_vs_oracle"].as_f64().unwrap();
    assert!(err <= report["truncation_bound"].as_f64().unwrap());
    assert!((report["residual_mass"].as_f64().unwrap() - 0.85f64.powi(7)).abs() < 1e-15);
}

#[test]
fn cheeger_on_four_cycle() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["pattern", "--n", "4", "--pattern", "ring", "--out", "toy_c4.json"]);
    let stdout = ok(tmp.path(), &["cheeger", "--graph", "toy_c4.json"]);
    assert!(stdout.starts_with("h=1 "), "{stdout}");
    assert!(stdout.contains("normalized λ₂=1"), "{stdout}");
    let report = json_file(tmp.path().join("cheeger.json"));
    assert_eq!(report["cheeger"]["h"], 1.0);
    assert!((report["cheeger"]["lower"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((report["cheeger"]["upper"].as_f64().unwrap() - 8f64.sqrt()).abs() < 1e-12);
    assert!((report["normalized_lambda2"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn unknown_flag_is_a_single_line_validation_error() {
    let tmp = TempDir::new().unwrap();
    let out = diffuser(tmp.path(), &["pattern", "--n", "8", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    let err = error_line(&out);
    assert_eq!(err["error"], "usage");
    assert!(err["message"].as_str().unwrap().contains("--frobnicate"));
    assert!(!tmp.path().join("manifest.json").exists());
}

#[test]
fn invalid_values_exit_one() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["pattern", "--n", "32", "--window", "4", "--global-tokens", "2",
        "--random-per-token", "2", "--out", "g.json"]);
    let out = diffuser(tmp.path(), &["diffuse", "--graph", "g.json", "--alpha", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "invalid");

    let out = diffuser(tmp.path(), &["mixing", "--graph", "g.json"]);
    assert_eq!(out.status.code(), Some(1));

    let out = diffuser(tmp.path(), &["stats", "--graph", "missing.json"]);
    assert_eq!(out.status.code(), Some(1));

    let out = diffuser(tmp.path(), &["pattern", "--n", "32", "--pattern", "local,starlike"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gradient_tolerance_breach_exits_two() {
    let tmp = TempDir::new().unwrap();
    let out = diffuser(
        tmp.path(),
        &["layer", "--n", "8", "--d", "4", "--heads", "1", "--head-dim", "4",
            "--check-grad", "--grad-tolerance", "1e-15"],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = error_line(&out);
    assert_eq!(err["error"], "tolerance_breach");
    assert_eq!(err["tolerance"], 1e-15);
    assert!(err["value"].as_f64().unwrap() > 1e-15);

    let stdout = ok(tmp.path(), &["layer", "--n", "8", "--d", "4", "--heads", "1",
        "--head-dim", "4", "--check-grad"]);
    let report: Value = serde_json::from_str(&stdout).unwrap();
    assert!(report["grad_check"]["max_rel_error"].as_f64().unwrap() <= 1e-4);
    assert_eq!(report["shape"]["ff_dim"], 16);
}

#[test]
fn layer_reuses_saved_checkpoint() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["layer", "--n", "12", "--seed", "4", "--out-dir", "a"]);
    fs::rename(tmp.path().join("a/params.json"), tmp.path().join("a/saved.json")).unwrap();
    // The manifest names its blob, so the pair still loads after the rename.
    let manifest = json_file(tmp.path().join("a/saved.json"));
    assert_eq!(manifest["d"], 16);
    assert_eq!(manifest["blob"], "params.bin");

    // Loaded weights with the same input seed reproduce the output.
    ok(tmp.path(), &["layer", "--n", "12", "--seed", "4", "--params", "a/saved.json",
        "--out-dir", "b"]);
    assert_eq!(
        fs::read(tmp.path().join("a/output.csv")).unwrap(),
        fs::read(tmp.path().join("b/output.csv")).unwrap()
    );
    assert!(!tmp.path().join("b/params.json").exists());

    let out = diffuser(tmp.path(), &["layer", "--n", "12", "--d", "8", "--params",
        "a/saved.json", "--out-dir", "c"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn repeat_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let runs: &[&[&str]] = &[
        &["pattern", "--n", "256", "--window", "16", "--global-tokens", "8",
            "--random-per-token", "8", "--seed", "3", "--out", "g.bin"],
        &["spectrum", "--graph", "../a/g.bin", "--operator", "adj"],
        &["layer", "--graph", "../a/g.bin", "--seed", "3"],
    ];
    for dir in ["a", "b"] {
        fs::create_dir(tmp.path().join(dir)).unwrap();
        for args in runs {
            ok(&tmp.path().join(dir), args);
        }
    }
    for file in ["g.bin", "stats.json", "spectrum.csv", "output.csv", "params.bin", "layer.json"] {
        let a = fs::read(tmp.path().join("a").join(file)).unwrap();
        let b = fs::read(tmp.path().join("b").join(file)).unwrap();
        assert!(a == b, "{file} differs between runs");
    }
}

#[test]
fn different_seeds_give_different_patterns() {
    let tmp = TempDir::new().unwrap();
    for seed in ["1", "2"] {
        ok(tmp.path(), &["pattern", "--n", "128", "--seed", seed, "--window", "4",
            "--global-tokens", "2", "--random-per-token", "4", "--out", &format!("g{seed}.json")]);
    }
    assert_ne!(
        fs::read(tmp.path().join("g1.json")).unwrap(),
        fs::read(tmp.path().join("g2.json")).unwrap()
    );
}

#[test]
fn help_lists_every_flag() {
    let tmp = TempDir::new().unwrap();
    let cases: &[(&str, &[&str])] = &[
        ("pattern", &["--n", "--pattern", "--window", "--global-tokens", "--random-per-token",
            "--block", "--degree", "--seed", "--out", "--out-dir", "--format"]),
        ("layer", &["--n", "--d", "--heads", "--head-dim", "--ff-dim", "--alpha", "--steps",
            "--graph", "--input", "--params", "--check-grad", "--eps", "--grad-tolerance"]),
        ("diffuse", &["--graph", "--values", "--alpha", "--steps", "--oracle", "--out"]),
        ("spectrum", &["--graph", "--operator", "--keep-self-loops", "--out"]),
        ("mixing", &["--graph", "--tmax", "--start"]),
        ("cheeger", &["--graph"]),
        ("expander", &["--graph"]),
        ("stats", &["--graph"]),
        ("check", &["--graph"]),
        ("robustness", &["--config", "--seeds", "--shifts", "--heads"]),
        ("compare-spectra", &["--config", "--presets", "--block"]),
        ("bench", &["--config", "--reps", "--value-dim"]),
    ];
    for (cmd, flags) in cases {
        let out = diffuser(tmp.path(), &[cmd, "--help"]);
        assert_eq!(out.status.code(), Some(0));
        let text = String::from_utf8(out.stdout).unwrap();
        for flag in *flags {
            assert!(text.contains(flag), "{cmd} --help lacks {flag}");
        }
    }
    let top = ok(tmp.path(), &["--help"]);
    for cmd in ["pattern", "stats", "check", "diffuse", "layer", "spectrum", "expander",
        "mixing", "cheeger", "robustness", "compare-spectra", "bench", "--replay"] {
        assert!(top.contains(cmd), "top-level help lacks {cmd}");
    }
}

#[test]
fn replay_reproduces_the_run() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["pattern", "--n", "200", "--pattern", "local,random", "--window", "6",
        "--random-per-token", "8", "--block", "4", "--seed", "11", "--out", "g.json",
        "--out-dir", "first"]);
    ok(tmp.path(), &["--replay", "first/manifest.json", "--out-dir", "second"]);
    for file in ["g.json", "stats.json"] {
        assert_eq!(
            fs::read(tmp.path().join("first").join(file)).unwrap(),
            fs::read(tmp.path().join("second").join(file)).unwrap(),
            "{file}"
        );
    }
    let mut a = json_file(tmp.path().join("first/manifest.json"));
    let mut b = json_file(tmp.path().join("second/manifest.json"));
    a["global"]["out_dir"] = Value::Null;
    b["global"]["out_dir"] = Value::Null;
    assert_eq!(a, b);

    let out = diffuser(tmp.path(), &["--replay", "first/manifest.json", "stats", "--graph", "x"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn spectrum_formats_and_operators() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["pattern", "--n", "6", "--pattern", "complete", "--out", "k6.json"]);
    ok(tmp.path(), &["spectrum", "--graph", "k6.json", "--operator", "comb"]);
    let csv = fs::read_to_string(tmp.path().join("spectrum.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "index,eigenvalue");
    assert_eq!(lines.len(), 7);
    for line in &lines[2..] {
        let value: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((value - 6.0).abs() < 1e-10, "{line}");
    }
    ok(tmp.path(), &["spectrum", "--graph", "k6.json", "--format", "json", "--out", "lap"]);
    let s = json_file(tmp.path().join("lap.json"));
    assert_eq!(s["operator"], "normalized_laplacian");
    assert_eq!(s["eigenvalues"].as_array().unwrap().len(), 6);
}

#[test]
fn mixing_and_expander_on_regular_graph() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["pattern", "--n", "64", "--pattern", "regular", "--degree", "6",
        "--seed", "2", "--out", "r.json"]);
    let report: Value = serde_json::from_str(&ok(tmp.path(), &["expander", "--graph", "r.json"])).unwrap();
    assert_eq!(report["regular"], true);
    assert_eq!(report["d_max"], 6);
    ok(tmp.path(), &["mixing", "--graph", "r.json", "--tmax", "20", "--start", "5"]);
    let csv = fs::read_to_string(tmp.path().join("mixing.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 21);
    for row in &rows {
        assert!(row[1] <= row[2] * (1.0 + 1e-9), "{row:?}");
    }
}

#[test]
fn check_reports_assumptions() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["pattern", "--n", "50", "--pattern", "local", "--window", "2", "--out", "l.json"]);
    let report: Value = serde_json::from_str(&ok(tmp.path(), &["check", "--graph", "l.json"])).unwrap();
    assert_eq!(report["has_all_self_loops"], true);
    assert_eq!(report["is_connected"], true);
    assert_eq!(report["has_identity_chain"], true);
}

#[test]
fn experiment_subcommands_write_reports() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["robustness", "--n", "48", "--window", "6", "--global-tokens", "2",
        "--random-per-token", "6", "--shifts", "1,5", "--seeds", "0,1", "--out-dir", "rob"]);
    let report = json_file(tmp.path().join("rob/report.json"));
    assert_eq!(report["trials"].as_array().unwrap().len(), 2);
    assert!(report["aggregate"]["control_shift_5"]["max"].as_f64().unwrap() < 1e-10);

    ok(tmp.path(), &["compare-spectra", "--n", "64", "--window", "4", "--global-tokens", "4",
        "--random-per-token", "4", "--block", "2", "--out-dir", "cmp"]);
    let summary = fs::read_to_string(tmp.path().join("cmp/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);

    let stdout = ok(tmp.path(), &["bench", "--n", "128", "--window", "8", "--global-tokens",
        "4", "--random-per-token", "4", "--reps", "3", "--format", "csv", "--out-dir", "bench"]);
    assert!(stdout.starts_with("seed,"));
    assert!(tmp.path().join("bench/report.json").exists());

    // A config file replaces the flags.
    fs::write(
        tmp.path().join("cfg.json"),
        r#"{"experiment": "sparsity", "n": 256, "pattern": {"window": 8}, "ns": [64, 128]}"#,
    )
    .unwrap();
    ok(tmp.path(), &["bench", "--config", "cfg.json", "--out-dir", "sp"]);
    assert!(tmp.path().join("sp/sparsity.csv").exists());
    let out = diffuser(tmp.path(), &["robustness", "--config", "cfg.json", "--out-dir", "x"]);
    assert_eq!(out.status.code(), Some(1));
}
