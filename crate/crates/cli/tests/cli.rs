use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_collective-chsh"))
        .args(args)
        .env("CHSH_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

#[test]
fn bound_tsirelson_for_one_singlet() {
    let out = run(&["bound", "--pairs", "1", "--x", "1", "--strategy", "xor"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["bound"].as_f64().unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(v["violation"], true);
    assert_eq!(v["strategy_label"], "xor");
}

#[test]
fn bound_five_pairs_carries_note() {
    let out = run(&["bound", "--pairs", "5", "--x", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["bound"].as_f64().unwrap() - 2.0008732305).abs() < 1e-9);
    assert!((v["success_prob"].as_f64().unwrap() - 488.0 / 32768.0).abs() < 1e-15);
    assert_eq!(v["violation"], true);
    assert!(v["note"].as_str().unwrap().contains("2.0087"));
}

#[test]
fn bound_two_pairs_optimized_is_xor_equivalent() {
    let out = run(&[
        "bound",
        "--pairs",
        "2",
        "--x",
        "0.5",
        "--strategy",
        "optimize",
        "--seed",
        "7",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["bound"].as_f64().unwrap() - 2.0 / 1.25f64.sqrt()).abs() < 1e-6);
    assert_eq!(v["strategy_label"], "xor_equivalent");
    assert_eq!(v["violation"], false);
}

#[test]
fn bound_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("bound.manifest.json");
    let out = run(&[
        "bound",
        "--pairs",
        "3",
        "--x",
        "0.8",
        "--format",
        "csv",
        "--manifest",
        manifest.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("n,x,strategy,bound,M,success_prob,violation")
    );
    assert!(lines
        .next()
        .unwrap()
        .starts_with("3,0.8000000000,xor,2.438399"));
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(&manifest).unwrap()).unwrap();
    assert_eq!(m["command"], "bound");
    assert_eq!(
        m["output_sha256"],
        collective_chsh_cli::sha256_hex(&out.stdout)
    );
    assert_eq!(m["params"]["pairs"], 3);
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        &["bound", "--pairs", "0", "--x", "0.5"][..],
        &["bound", "--pairs", "6", "--x", "0.5"],
        &["bound", "--pairs", "2", "--x", "1.5"],
        &["bound", "--pairs", "2"],
        &["bound", "--pairs", "2", "--x", "0.5", "--strategy", "magic"],
        &["sweep", "--pairs", "1", "--x-min", "0.6", "--x-max", "0.5"],
        &["sweep", "--pairs", "1", "--x-step", "0"],
        &["crossover", "--pairs", "1"],
        &["verify", "--cases", "0"],
        &["frobnicate"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("sweep"));
}

#[test]
fn sweep_writes_csv_companions_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("nested").join("curves.csv");
    let out = run(&[
        "sweep",
        "--pairs",
        "2,1",
        "--x-min",
        "0.5",
        "--x-max",
        "0.8",
        "--x-step",
        "0.1",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "n,x,strategy,bound,success_prob,violation");
    assert_eq!(rows.len(), 9);
    assert!(rows[1].starts_with("1,0.5000000000,xor,1.414213562"));
    assert!(rows[8].starts_with("2,0.8000000000,xor,2.498780"));
    assert!(rows[4].ends_with(",true")); // n=1, x=0.8
    assert!(rows[5].ends_with(",false")); // n=2, x=0.5
    assert!(!text.contains('\r'));

    let dat = std::fs::read_to_string(csv.with_extension("dat")).unwrap();
    assert!(dat.starts_with("# n=1\n"));
    assert!(dat.contains("\n\n\n# n=2\n"));
    let manifest_path = dir.path().join("nested").join("curves.manifest.json");
    let m: serde_json::Value =
        serde_json::from_slice(&std::fs::read(manifest_path).unwrap()).unwrap();
    assert_eq!(m["command"], "sweep");
    assert_eq!(m["seed"], 0);
    assert_eq!(
        m["output_sha256"],
        collective_chsh_cli::sha256_hex(text.as_bytes())
    );
    assert!(m["wall_time_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn sweep_to_stdout_is_repeatable() {
    let args = [
        "sweep",
        "--pairs",
        "2,3",
        "--x-min",
        "0.4",
        "--x-max",
        "0.7",
        "--x-step",
        "0.1",
        "--strategy",
        "optimize",
        "--restarts",
        "3",
        "--seed",
        "5",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().count(), 9);
    assert!(text.lines().skip(1).all(|l| l.split(',').count() == 6));
}

#[test]
fn crossover_for_two_pairs_is_not_found() {
    let out = run(&["crossover", "--pairs", "2", "--restarts", "8"]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["n"], 2);
    assert!(v["x_star"].is_null());
}

#[test]
fn verify_is_deterministic_and_passes() {
    let a = run(&["verify", "--cases", "5", "--seed", "42"]);
    let b = run(&["verify", "--cases", "5", "--seed", "42"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["passed"], true);
    assert_eq!(v["equivalence"]["case_count"], 5);
    for key in [
        "reduction",
        "symmetric_path",
        "direct_settings",
        "closed_forms",
    ] {
        assert!(
            v["equivalence"][key]["max_abs_deviation"].is_number(),
            "{key}"
        );
    }
}

#[test]
fn verify_catches_injected_fault() {
    let out = run(&["verify", "--cases", "6", "--seed", "1", "--inject-fault"]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["passed"], false);
    assert_eq!(v["fault_injected"], true);
}

#[test]
fn unwritable_output_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let target = Path::new(&blocker).join("out.csv");
    let out = run(&["sweep", "--pairs", "1", "--out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
