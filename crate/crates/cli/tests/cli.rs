use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use maflow_core::snapshot::{parse_trace, read_snapshot};

const DISC: &str = r#"
[domain]
shape = "radial"
n = 1
nodes = 65

[initial]
kind = "quadratic"
a = 2.0
c = -1.0

[reference]
kind = "quadratic"

[flow]
scheme = "implicit"
"#;

fn maflow(mode: &str, config: &str, dir: &Path, extra: &[&str]) -> (Output, PathBuf) {
    let cfg = dir.join(format!("{mode}.toml"));
    fs::write(&cfg, config).unwrap();
    let out = dir.join(format!("out-{mode}"));
    let output = Command::new(env!("CARGO_BIN_EXE_maflow"))
        .arg(mode)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    (output, out)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn flow_mode_writes_monotone_trace() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = maflow("flow", &format!("snapshot_every = 1\n{DISC}"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["converged"], true);
    let tol_f = summary["tol_F"].as_f64().unwrap();
    let rows = parse_trace(&fs::read_to_string(out.join("trace.csv")).unwrap()).unwrap();
    assert!(rows.len() > 2);
    for w in rows.windows(2) {
        assert!(w[1].f <= w[0].f + tol_f);
    }
    assert!(rows.last().unwrap().sup_err_vs_ref.unwrap() < 1e-8);
    let monitors = fs::read_to_string(out.join("monitors.csv")).unwrap();
    assert_eq!(monitors.lines().count(), rows.len() + 1);
    let snaps = fs::read_dir(out.join("snapshots")).unwrap().count();
    assert_eq!(snaps, rows.len());
    let fin = read_snapshot(&out.join("u_final.bin")).unwrap();
    assert_eq!(fin.header.nodes, 65);
}

#[test]
fn flow_output_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (_, oa) = maflow("flow", DISC, a.path(), &[]);
    let (_, ob) = maflow("flow", DISC, b.path(), &[]);
    assert_eq!(
        fs::read(oa.join("trace.csv")).unwrap(),
        fs::read(ob.join("trace.csv")).unwrap()
    );
    assert_eq!(
        fs::read(oa.join("u_final.bin")).unwrap(),
        fs::read(ob.join("u_final.bin")).unwrap()
    );
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = maflow("flow", &format!("{DISC}\n[source]\na = 0.5\n"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("a ≤ 0"), "{}", stderr(&o));
    let (o, _) = maflow("flow", &format!("fooo = 3\n{DISC}"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fooo"));
    let missing = Command::new(env!("CARGO_BIN_EXE_maflow"))
        .args(["flow", "--config"])
        .arg(dir.path().join("absent.toml"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr(&missing).contains("absent.toml"));
}

#[test]
fn numerical_abort_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DISC.replace("scheme = \"implicit\"", "scheme = \"implicit\"\nmax_steps = 2");
    let (o, _) = maflow("flow", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn lyapunov_violation_exits_4_and_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    // a negative tolerance turns every decrease smaller than 1 into a violation
    let cfg = format!("snapshot_every = 1\n{DISC}\n[tolerances]\ntol_f = -1.0\n");
    let (o, out) = maflow("flow", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["offending_trace_row"], 1);
    let rows = parse_trace(&fs::read_to_string(out.join("trace.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
}

#[test]
fn failed_subsolution_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{DISC}\n[subsolution]\nkind = \"quadratic\"\nc = 1.0\n");
    let (o, _) = maflow("flow", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn elliptic_mode_reports_newton() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = maflow("elliptic", DISC, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&out.join("newton_report.json"));
    assert_eq!(r["converged"], true);
    let last = r["residual_history"].as_array().unwrap().last().unwrap().as_f64().unwrap();
    assert!(last <= r["tol"].as_f64().unwrap());
    let v = read_snapshot(&out.join("v_star.bin")).unwrap();
    let dr = 1.0 / 64.0;
    for (i, x) in v.values.iter().enumerate() {
        let r = i as f64 * dr;
        assert!((x - r * r).abs() < 1e-3);
    }
}

#[test]
fn functionals_mode_on_the_canonical_pair() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
[domain]
shape = "radial"
n = 1
nodes = 2049
[functionals]
u = { kind = "quadratic", a = 2.0, c = -1.0 }
v = { kind = "quadratic" }
"#;
    let (o, out) = maflow("functionals", cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&out.join("functionals.json"));
    let pi = std::f64::consts::PI;
    assert!((r["I"].as_f64().unwrap() - pi / 2.0).abs() < 1e-6);
    assert!((r["J"].as_f64().unwrap() - pi / 4.0).abs() < 1e-6);
    assert!((r["F0"].as_f64().unwrap() - pi / 4.0).abs() < 1e-6);
}

#[test]
fn verify_mode_with_seed_1() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = maflow("verify", DISC, dir.path(), &["--seed", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&out.join("verify_report.json"));
    assert_eq!(r["passed"], true);
    assert_eq!(r["seed"], 1);
    let suites = r["suites"].as_array().unwrap();
    assert_eq!(suites.len(), 12);
    assert!(suites.iter().all(|s| s["max_defect"].is_number() && s["samples"] == 200));
}
