use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qham_core::pde::{make_burgers_preset, LinearDiffOp};

fn qham(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qham"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn linearize_burgers_m1() {
    let dir = tempfile::tempdir().unwrap();
    let o = qham(&["linearize", "--problem", "burgers", "--m", "1", "--h", "-1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("linearize.txt")).unwrap();
    for label in ["y[-1]", "y[0,0](0)", "y[0,1](1)", "y[1,1](0,0)"] {
        assert!(text.contains(label), "missing {label}");
    }
    assert!(stdout(&o).contains("max block sparsity 1 (bound 1)"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("linearize.json")).unwrap()).unwrap();
    assert!(json["config_hash"].is_string());
}

#[test]
fn linearize_reports_sparsity_at_m3() {
    let dir = tempfile::tempdir().unwrap();
    let o = qham(&["linearize", "--problem", "burgers", "--m", "3", "--h", "-1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("max block sparsity 6 (bound 6)"), "{}", stdout(&o));
}

#[test]
fn missing_m_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = qham(&["run", "--problem", "burgers", "--h", "-1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`m`"), "{}", stderr(&o));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, "problem = \"burgers\"\nm = 1\nh = -0.5\nn = 8\n").unwrap();
    let o = qham(&["run", "--config", cfg.to_str().unwrap(), "--h", "-1", "--m", "2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(dir.path().join("run_l0.csv")).unwrap();
    // m = 2 gives eight blocks, so eleven columns.
    let header = summary.lines().nth(1).unwrap();
    assert_eq!(header.split(',').count(), 11, "{header}");

    fs::write(&cfg, "problem = \"burgers\"\nm = 1\nh = -1.0\nbogus = 3\n").unwrap();
    let o = qham(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["run", "--problem", "burgers", "--m", "2", "--h", "-1", "--n", "16", "--iterations", "1"];
    for d in [&a, &b] {
        let o = qham(&args, d.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in ["run_l0.csv", "run_l1.csv", "snapshot_l0.csv", "snapshot_l1.csv", "summary.json"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between runs");
    }
    let csv = fs::read_to_string(a.path().join("run_l0.csv")).unwrap();
    let mut lines = csv.lines();
    let hash = lines.next().unwrap();
    assert!(hash.starts_with("# config-hash: ") && hash.len() == 15 + 64, "{hash}");
    assert!(lines.next().unwrap().starts_with("t,p,rel_err,norm:y[-1],"));
    // 101 samples on [0, 1] with dt = 0.01.
    assert_eq!(lines.count(), 101);
}

#[test]
fn dump_matrix_writes_matrix_market() {
    let dir = tempfile::tempdir().unwrap();
    let o = qham(&["run", "--problem", "burgers", "--m", "1", "--h", "-1", "--n", "8", "--dump-matrix"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let mtx = fs::read_to_string(dir.path().join("A_l0.mtx")).unwrap();
    assert!(mtx.starts_with("%%MatrixMarket matrix coordinate real general"));
    let vectors = fs::read_to_string(dir.path().join("vectors_l0.csv")).unwrap();
    assert_eq!(vectors.lines().nth(1), Some("index,b,y_in"));
}

#[test]
fn hcurve_writes_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let o = qham(
        &["hcurve", "--problem", "burgers", "--m", "1", "--n", "16", "--h-sweep", "-1.5:0.5:-0.5", "--workers", "2"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows[0], "h,m,l,final_rel_err,min_p,failure");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("-1.5e0,1,0,"));
    assert!(stdout(&o).contains("at h = -1"), "{}", stdout(&o));
}

#[test]
fn estimate_counts_qubits() {
    let dir = tempfile::tempdir().unwrap();
    let o = qham(
        &["estimate", "--problem", "burgers", "--m", "3", "--h", "-1", "--n", "32", "--T", "1", "--eps", "1e-3"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("qubit_count 30"), "{}", stdout(&o));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("estimate.json")).unwrap()).unwrap();
    assert_eq!(json["report"]["qubit_count"], 30);
    assert!(json["report"]["alpha_a"].as_f64().unwrap() > 0.0);
}

#[test]
fn verify_passes_on_small_case() {
    let dir = tempfile::tempdir().unwrap();
    let o = qham(
        &["verify", "--problem", "burgers", "--m", "1", "--h", "-1", "--n", "8", "--iterations", "1"],
        dir.path(),
    );
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    let csv = fs::read_to_string(dir.path().join("verify.csv")).unwrap();
    assert!(csv.lines().skip(2).all(|l| l.ends_with(",true")), "{csv}");
}

#[test]
fn verify_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = qham(
        &["verify", "--problem", "burgers", "--m", "1", "--h", "-1", "--n", "8", "--tol", "1e-30"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[derive(serde::Serialize)]
struct InlineConfig {
    problem: qham_core::pde::QuadraticPDE,
    m: usize,
    h: f64,
    n: usize,
}

#[test]
fn divergence_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut problem = make_burgers_preset();
    problem.name = "growth".into();
    problem.linear = LinearDiffOp::derivative(0, 40.0);
    problem.exact = None;
    let cfg = dir.path().join("growth.toml");
    let text = toml::to_string(&InlineConfig { problem, m: 1, h: -1.0, n: 8 }).unwrap();
    fs::write(&cfg, text).unwrap();
    let o = qham(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("diverge"), "{}", stderr(&o));
}
