use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn eigenchan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eigenchan"))
        .args(args)
        .env_remove("EIGENCHAN_PROFILE")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn generate(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["generate", "--out", p(out)];
    args.extend_from_slice(extra);
    eigenchan(&args)
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.evcm");
    let b = dir.path().join("b.evcm");
    let flags = [
        "--class",
        "V",
        "--n",
        "2",
        "--m",
        "2",
        "--samples",
        "100000",
        "--seed",
        "7",
    ];
    assert!(generate(&a, &flags).status.success());
    assert!(generate(&b, &flags).status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(fs::metadata(&a).unwrap().len(), 64 + 100_000 * 10 * 16);
    assert!(dir.path().join("a.evcm.manifest.json").exists());
}

#[test]
fn pipeline_generate_stress_sir_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.evcm");
    let out = generate(
        &trace,
        &[
            "--n",
            "4",
            "--m",
            "4",
            "--samples",
            "10000",
            "--payload",
            "both",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let stressed = dir.path().join("s.evcm");
    let out = eigenchan(&[
        "stress",
        "--input",
        p(&trace),
        "--period",
        "2",
        "--out",
        p(&stressed),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let csv = dir.path().join("sir.csv");
    let out = eigenchan(&["sir", "--input", p(&trace), "--swap", "2", "--out", p(&csv)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t_norm,sir1_db,sir2_db,sir3_db,sir4_db"));
    assert_eq!(lines.next(), Some("0.0,300.0,300.0,300.0,300.0"));
    assert_eq!(text.lines().count(), 10_001);

    let frozen = dir.path().join("frozen.csv");
    let out = eigenchan(&[
        "sir",
        "--input",
        p(&stressed),
        "--u-update",
        "frozen",
        "--out",
        p(&frozen),
    ]);
    assert!(out.status.success());

    let analysis = dir.path().join("analysis");
    let out = eigenchan(&[
        "analyze",
        "--input",
        p(&stressed),
        "--out-dir",
        p(&analysis),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(analysis.join("h11_psd.csv").exists());
    assert!(analysis.join("h44_cdf.csv").exists());
    assert!(analysis.join("s4_cdf.csv").exists());
    let psd = fs::read_to_string(analysis.join("h12_psd.csv")).unwrap();
    assert!(psd.starts_with("f_over_fd,psd_db\n"));

    let manifest = analysis.join("analyze.manifest.json");
    let out = eigenchan(&["info", p(&manifest)]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["outputs"].as_array().unwrap().len(), 16 * 2 + 4);
    for o in v["outputs"].as_array().unwrap() {
        let len = fs::metadata(analysis.join(o["path"].as_str().unwrap()))
            .unwrap()
            .len();
        assert_eq!(o["bytes"].as_u64().unwrap(), len);
    }
}

#[test]
fn info_reports_header() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.evcm");
    assert!(generate(
        &trace,
        &["--class", "III", "--samples", "500", "--seed", "3"]
    )
    .status
    .success());
    let out = eigenchan(&["info", p(&trace)]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["header"]["class"], "III");
    assert_eq!(v["header"]["samples"], 500);
    assert_eq!(v["header"]["seed"], 3);
    assert_eq!(v["manifest"]["command"], "generate");
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "# 4x2 run\nn = 4\nm = 2\ns_ratios = 0.5\nsamples = 20000\n",
    )
    .unwrap();
    let trace = dir.path().join("t.evcm");
    let out = generate(
        &trace,
        &["--config", p(&cfg), "--seed", "1", "--kind", "values"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value =
        serde_json::from_slice(&eigenchan(&["info", p(&trace)]).stdout).unwrap();
    assert_eq!(v["header"]["n"], 4);
    assert_eq!(v["header"]["m"], 2);
    assert_eq!(v["header"]["s_f"], 8.0);
    assert_eq!(v["manifest"]["config"]["s_ratios"][0], 0.5);
}

#[test]
fn usage_errors_exit_one() {
    let out = eigenchan(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.evcm");
    let out = generate(&t, &["--n", "4", "--m", "2", "--s-ratios", "1,2,3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("s_ratios"));
    assert!(!t.exists());

    assert_eq!(
        eigenchan(&["validate", "--profile", "medium"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn io_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.evcm");
    assert!(generate(&trace, &["--samples", "200"]).status.success());
    let bytes = fs::read(&trace).unwrap();
    fs::write(&trace, &bytes[..bytes.len() - 1]).unwrap();
    let out = eigenchan(&["analyze", "--input", p(&trace), "--out-dir", p(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("length mismatch"));

    let missing = dir.path().join("nope.evcm");
    assert_eq!(eigenchan(&["info", p(&missing)]).status.code(), Some(3));
}

#[test]
fn validate_quick_on_defaults_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = eigenchan(&["validate", "--profile", "quick", "--out-dir", p(dir.path())]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    print!("{stdout}");
    assert_eq!(
        stdout
            .lines()
            .filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]"))
            .count(),
        12
    );
    assert!(dir.path().join("validate.json").exists());
    assert!(dir.path().join("validate.manifest.json").exists());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
