use std::fs;
use std::path::Path;
use std::process::Command;

const EQUILIBRIUM: &str = r#"
schema_version = 1
[grid]
dim = 1
n = 32
[step]
dt_max = 0.01
t_end = 0.05
sample_every = 0.01
[initial]
kind = "equilibrium"
n = 1.5
rho = 0.5
velocity = [0.2]
"#;

fn twophase(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_twophase"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_passes_on_equilibrium_and_report_renders() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), EQUILIBRIUM);
    let out = dir.path().join("out");
    let o = twophase(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["config"]["params"]["kappa"], 1.0);

    let summary_path = out.join("summary.json");
    let missing = dir.path().join("missing.json");
    let o = twophase(&["report", summary_path.to_str().unwrap(), missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("| PASS |"));
    assert!(text.contains("SKIPPED"));
}

#[test]
fn diagnostics_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let text = EQUILIBRIUM.replace(
        "kind = \"equilibrium\"\nn = 1.5\nrho = 0.5\nvelocity = [0.2]",
        "kind = \"random-smooth\"\ncutoff = 3\namplitude = 0.1",
    );
    let cfg = write_config(dir.path(), &text);
    let mut csv = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = twophase(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--override", "seed=11", "--quiet"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        csv.push(fs::read(out.join("diagnostics.csv")).unwrap());
    }
    assert_eq!(csv[0], csv[1]);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), EQUILIBRIUM);
    let o = twophase(&["run", "--config", &cfg, "--override", "params.kappa=-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("κ>0"));
    let bad = write_config(dir.path(), &EQUILIBRIUM.replace("t_end", "t_ned"));
    assert_eq!(twophase(&["run", "--config", &bad]).status.code(), Some(2));
    let o = twophase(&["run", "--config", "/nonexistent/config.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let o = twophase(&["sweep", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failing_summary_makes_report_fail() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("summary.json");
    fs::write(&p, r#"{"kind":"run","status":"blowup","passed":false,"invariants":[{"name":"run-completed","anchor":"time integration","passed":false,"value":1.0,"bound":0.0,"detail":""}]}"#).unwrap();
    let o = twophase(&["report", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(twophase(&["report"]).status.code(), Some(0));
}

#[test]
fn checkpoint_restart_reproduces_the_final_state() {
    let dir = tempfile::tempdir().unwrap();
    let text = EQUILIBRIUM
        .replace(
            "kind = \"equilibrium\"\nn = 1.5\nrho = 0.5\nvelocity = [0.2]",
            "kind = \"sine-perturbation\"\namplitude = 0.1",
        )
        .replace("t_end = 0.05", "t_end = 0.04")
        + "[output]\ncheckpoint_every = 0.02\n";
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("full");
    let o = twophase(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for k in 0..3 {
        assert!(out.join(format!("checkpoint_{k:04}.txt")).exists());
    }
    let restart_cfg = text.replace(
        "kind = \"sine-perturbation\"\namplitude = 0.1",
        &format!("kind = \"snapshot\"\npath = \"{}\"", out.join("checkpoint_0001.txt").display()),
    );
    let cfg2 = write_config(dir.path(), &restart_cfg);
    let out2 = dir.path().join("restart");
    let o = twophase(&["run", "--config", &cfg2, "--out", out2.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(out.join("checkpoint_0002.txt")).unwrap(),
        fs::read_to_string(out2.join("checkpoint_0001.txt")).unwrap()
    );
}
