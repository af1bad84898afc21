use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tklab"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const SMALL: &str = r#"
name = "small"

[model]
n = 4
kappa1 = 1.0
kappa2 = 2.0
eta = 0.2

[initial]
kind = "explicit"
phases = [0.0, 0.4, 0.9, 1.3]
temps = [1.0, 1.4, 1.8, 2.2]

[integrator]
method = "rk45_adaptive"
t_end = 40.0

[claims]
ids = ["entropy-monotone", "conserved-g", "temp-bounds"]
"#;

fn small(dir: &Path) -> PathBuf {
    let p = dir.join("small.toml");
    fs::write(&p, SMALL).unwrap();
    p
}

#[test]
fn run_writes_artifacts_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = bin()
        .arg("run")
        .arg(small(dir.path()))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "report.json",
        "verdicts.json",
        "trajectory.csv",
        "decay.svg",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let verdicts: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("verdicts.json")).unwrap()).unwrap();
    assert_eq!(verdicts.as_array().unwrap().len(), 3);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["scenario_hash"].as_str().unwrap().len(), 64);
    let header = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(header.starts_with("t,theta_1,theta_2,theta_3,theta_4,temp_1,"));
}

#[test]
fn verify_replaces_claims() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .arg("verify")
        .arg(small(dir.path()))
        .args(["--claims", "diameter-contraction,asymptotic-temperature"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.matches("PASS").count(), 2, "{text}");
}

#[test]
fn short_horizon_fails_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .arg("verify")
        .arg(small(dir.path()))
        .args(["--set", "integrator.t_end=12", "--set", "model.kappa2=0.05"])
        .args(["--claims", "asymptotic-temperature"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn framework_violation_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .arg("verify")
        .arg(small(dir.path()))
        .args([
            "--set",
            "model.nat_freq=[0.1, -0.1, 0.2, -0.2]",
            "--claims",
            "sync-rate",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_input_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .arg("run")
        .arg(small(dir.path()))
        .args(["--set", "model.kapa1=1"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
    let o = bin()
        .args(["run", "/nonexistent/scenario.toml"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
    let o = bin()
        .args(["montecarlo", "no-such-claim", "--seed", "1"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
}

#[test]
fn sweep_reports_each_value() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("sweep.json");
    let o = bin()
        .arg("sweep")
        .arg(small(dir.path()))
        .args(["--param", "model.kappa2", "--values", "0.5,1,2"])
        .arg("--report")
        .arg(&report)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    let hashes: Vec<&str> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["scenario_hash"].as_str().unwrap())
        .collect();
    assert_eq!(hashes.len(), 3);
    assert!(hashes[0] != hashes[1] && hashes[1] != hashes[2]);
}

#[test]
fn montecarlo_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, extra: &[&str]| {
        let path = dir.path().join(name);
        let o = bin()
            .args([
                "montecarlo",
                "temp-consensus-rate",
                "--trials",
                "6",
                "--seed",
                "42",
            ])
            .args(extra)
            .arg("--report")
            .arg(&path)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
        fs::read_to_string(path).unwrap()
    };
    assert_eq!(run("a.json", &[]), run("b.json", &["--sequential"]));
}

#[test]
fn plot_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    fs::write(&csv, "t,phase_diameter\n0,1\n1,0.5\n2,0.25\n").unwrap();
    let o = bin()
        .arg("plot")
        .arg(&csv)
        .args(["--channels", "phase_diameter", "--log"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(fs::read_to_string(dir.path().join("t.svg"))
        .unwrap()
        .contains("<polyline"));
    let o = bin()
        .arg("plot")
        .arg(&csv)
        .args(["--channels", "nope"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
}

#[test]
fn bundled_scenarios_parse() {
    for entry in fs::read_dir(scenarios()).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        tklab::io::parse_scenario(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
