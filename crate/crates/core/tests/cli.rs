use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const PINNED: &str = r#"{"a": -1, "b": 0.5, "eta": 1, "x0": 1.5, "theta": 3, "seed": 42, "horizon": 200, "h": 0.001, "replications": 4}"#;

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ou-harvest"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn error_record(o: &Output) -> serde_json::Value {
    let text = String::from_utf8(o.stderr.clone()).unwrap();
    serde_json::from_str(text.trim())
        .unwrap_or_else(|_| panic!("stderr is not a JSON record: {text}"))
}

#[test]
fn sweep_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), PINNED);
    let o = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--sweep-param",
        "theta",
        "--lo",
        "1",
        "--hi",
        "6",
        "--steps",
        "11",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let golden = std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/sweep_theta.csv"),
    )
    .unwrap();
    assert_eq!(stdout(&o), golden);
}

#[test]
fn sweep_theta_curve_signs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), PINNED);
    let o = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--sweep-param",
        "theta",
        "--lo",
        "1.6",
        "--hi",
        "6",
        "--steps",
        "45",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (s_col, g_col) = (col("surrogate_a"), col("gamma_a"));
    let mut signs = Vec::new();
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        let s: f64 = cells[s_col].parse().unwrap();
        let g: f64 = cells[g_col].parse().unwrap();
        if s.abs() > 1e-9 {
            assert_eq!(s > 0.0, g > 0.0, "row {line}");
        }
        signs.push(s > 0.0);
    }
    let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    assert!(changes <= 1, "surrogate changes sign {changes} times");
}

#[test]
fn config_errors_exit_2_with_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"a": -1, "b": 0.5, "eta": 2.5, "x0": 1.5, "theta": 1.5, "seed": 1, "horizon": 1}"#,
    );
    let o = run(&["evaluate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let rec = error_record(&o);
    assert_eq!(rec["error"]["kind"], "config");
    assert_eq!(rec["error"]["message"], "eta=2.5 must be < theta=1.5");

    let cfg = write_config(dir.path(), PINNED);
    let o = run(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&[
        "evaluate",
        "--config",
        dir.path().join("missing.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_record(&o)["error"]["kind"], "config");

    let o = run(&[
        "evaluate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("no/such/dir/out.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_record(&o)["error"]["kind"], "io");
}

#[test]
fn evaluate_is_byte_identical_and_writes_out() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), PINNED);
    let out = dir.path().join("eval.json");
    let a = run(&["evaluate", "--config", cfg.to_str().unwrap()]);
    let b = run(&[
        "evaluate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(b.status.code(), Some(0));
    assert!(b.stdout.is_empty());
    assert_eq!(
        stdout(&a),
        stdout(&run(&["evaluate", "--config", cfg.to_str().unwrap()]))
    );
    let v: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    let written: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["results"], written["results"]);
    assert_eq!(written["config"]["output_path"], out.to_str().unwrap());
    assert_eq!(v["config"]["seed"], 42);
    assert!((v["results"]["rho"].as_f64().unwrap() - 0.7804532125940016).abs() < 1e-14);
}

#[test]
fn simulate_independent_of_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), PINNED);
    for format in ["json", "csv"] {
        let outputs: Vec<Vec<u8>> = ["1", "2", "8"]
            .iter()
            .map(|w| {
                let o = run(&[
                    "simulate",
                    "--config",
                    cfg.to_str().unwrap(),
                    "--workers",
                    w,
                    "--format",
                    format,
                ]);
                assert_eq!(o.status.code(), Some(0));
                o.stdout
            })
            .collect();
        assert_eq!(outputs[0], outputs[1]);
        assert_eq!(outputs[0], outputs[2]);
    }
    let reseeded = run(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "7"]);
    let base = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_ne!(reseeded.stdout, base.stdout);
}

#[test]
fn sign_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"a": -1, "b": 0.5, "eta": 2, "x0": 3, "theta": 4, "seed": 1, "horizon": 1}"#,
    );
    let o = run(&["sign", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let lower = &v["results"]["lower"];
    assert_eq!(lower["case"], "A_lower");
    assert_eq!(lower["in_positivity_region"], true);
    assert!(lower["gamma_closed_form"].as_f64().unwrap() > 0.0);
    // Re-serializing the parsed document reproduces every number exactly.
    let again: serde_json::Value =
        serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
    assert_eq!(v, again);
}

#[test]
fn validate_negative_control_fails_with_code_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &PINNED.replace("}", r#", "bridge_correction": true}"#),
    );
    let args = [
        "validate",
        "--config",
        cfg.to_str().unwrap(),
        "--paths",
        "4000",
        "--format",
        "csv",
    ];
    let ok = run(&args);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    let mut broken = args.to_vec();
    broken.extend(["--psi-denominator", "cdf"]);
    let bad = run(&broken);
    assert_eq!(bad.status.code(), Some(4));
    assert!(stdout(&bad).contains("ode_residual,false"));
    assert_eq!(error_record(&bad)["error"]["kind"], "validation");
}
