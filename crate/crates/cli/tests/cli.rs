use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const TINY: &str = r#"
name = "tiny"

[mesh]
kind = "channel"
width = 0.006
length = 0.004
tilt_deg = 20.0
h = 5e-4

[reference]
kind = "channel"

[physics]
c = 1500.0
b = 6e-9
rho = 1000.0
b_over_a = 5.0

[excitation]
amplitude = AMPLITUDE
frequency = 210e3

[time]
steps_per_period = 20
end_time = 2e-5
"#;

fn scenario(dir: &Path, amplitude: &str) -> PathBuf {
    let p = dir.join("tiny.toml");
    fs::write(&p, TINY.replace("AMPLITUDE", amplitude)).unwrap();
    p
}

fn westervelt(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_westervelt"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn missing_scenario_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let o = westervelt(&["run", "--scenario", "nope.toml", "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn bad_config_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let p = scenario(dir.path(), "0.01");
    let text = fs::read_to_string(&p).unwrap().replace("kind = \"channel\"\nwidth", "kind = \"disc\"\nwidth");
    fs::write(&p, text).unwrap();
    let o = westervelt(&["mesh-info", "--scenario", "tiny.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn duplicate_variants_are_rejected() {
    let dir = TempDir::new().unwrap();
    scenario(dir.path(), "0.01");
    let args = ["run", "--scenario", "tiny.toml", "--out", "o", "--variant", "1/2:a", "--variant", "0.5:adaptive"];
    assert_eq!(westervelt(&args, dir.path()).status.code(), Some(2));
}

#[test]
fn run_writes_reports_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    scenario(dir.path(), "0.01");
    let run = |out: &str, threads: &str| {
        let o = westervelt(
            &[
                "run", "--scenario", "tiny.toml", "--out", out, "--variant", "1/2:adaptive", "--variant", "0:0",
                "--threads", threads,
            ],
            dir.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("1/2:adaptive"));
    };
    run("a", "1");
    run("b", "2");
    for f in [
        "summary.csv",
        "reference.csv",
        "sigma-1_2-adaptive/errors.csv",
        "sigma-1_2-adaptive/angles.csv",
        "sigma-0-theta-0/errors.csv",
        "sigma-0-theta-0/vtk/step_000000.vtk",
    ] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs between runs");
    }
    let errors = fs::read_to_string(dir.path().join("a/sigma-0-theta-0/errors.csv")).unwrap();
    assert!(errors.starts_with("step,t,rel_err_psi,rel_err_u,energy"));
    // 84 steps, every second one
    assert_eq!(errors.lines().count(), 1 + 43);

    let base = dir.path().join("a/sigma-0-theta-0/errors.csv");
    let new = dir.path().join("a/sigma-1_2-adaptive/errors.csv");
    let o = westervelt(&["compare", base.to_str().unwrap(), new.to_str().unwrap()], dir.path());
    assert!(o.status.success());
    let line = stdout(&o).lines().find(|l| l.starts_with("improvement")).unwrap().to_string();
    assert!(!line.contains("-"), "adaptive should not be worse here: {line}");

    let o = westervelt(&["compare", base.to_str().unwrap(), base.to_str().unwrap()], dir.path());
    assert!(stdout(&o).contains("improvement: 0.00 % in psi, 0.00 % in u"));
}

#[test]
fn zero_excitation_gives_zero_errors() {
    let dir = TempDir::new().unwrap();
    scenario(dir.path(), "0.0");
    let o = westervelt(&["run", "--scenario", "tiny.toml", "--out", "o", "--variant", "1/2:adaptive"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("o/sigma-1_2-adaptive/errors.csv")).unwrap();
    for line in text.lines().skip(1) {
        let f: Vec<f64> = line.split(',').skip(2).map(|v| v.parse().unwrap()).collect();
        assert!(f.iter().all(|&v| v == 0.0), "{line}");
    }
    let angles = fs::read_to_string(dir.path().join("o/sigma-1_2-adaptive/angles.csv")).unwrap();
    assert!(angles.lines().skip(1).all(|l| l.ends_with(",0")), "no element should switch on");
}

#[test]
fn compare_rejects_empty_reports() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "step,t,rel_err_psi,rel_err_u,energy\n").unwrap();
    let full = dir.path().join("full.csv");
    fs::write(&full, "step,t,rel_err_psi,rel_err_u,energy\n0,0,0.1,0.1,0\n").unwrap();
    let o = westervelt(&["compare", "empty.csv", "full.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = westervelt(&["compare", "full.csv", "missing.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mesh_info_and_angles() {
    let dir = TempDir::new().unwrap();
    scenario(dir.path(), "0.01");
    let o = westervelt(&["mesh-info", "--scenario", "tiny.toml"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("nodes          156"), "{text}");
    assert!(text.contains("reference:"));

    let o = westervelt(&["angles", "--scenario", "tiny.toml", "--variant", "1/2:adaptive"], dir.path());
    assert!(o.status.success());
    let csv = stdout(&o);
    assert!(csv.starts_with("step,t,element,cx,cy,theta_deg,enabled"));
    assert!(csv.lines().skip(1).any(|l| l.ends_with(",1")));
}
