//! End-to-end checks of the binary: reports, determinism, exit codes.

use std::path::Path;
use std::process::Command;

fn urzeta() -> Command {
    Command::new(env!("CARGO_BIN_EXE_urzeta"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const ZETA: &str = r#"
[ring]
p = 2
a = 1
N = 8

[caps]
DT = 6

[sigma]
n = 1

[module.triv]
rank = 1
entry 1 1 = [(0, 1)]

[task.euler]
kind = euler
module = triv

[task.trace]
kind = trace
module = triv
"#;

#[test]
fn run_zeta_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "zeta.txt", ZETA);
    let out = dir.path().join("report.json");
    let status = urzeta().args(["run"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let coeffs = rep["tasks"]["euler"]["lseries"]["coeffs"].as_array().unwrap();
    for (m, c) in coeffs.iter().enumerate() {
        assert_eq!(c.as_str().unwrap(), (1u64 << m).to_string(), "zeta coefficient q^{m}");
    }
    // trace route agrees
    let tcoeffs = rep["tasks"]["trace"]["lseries"]["coeffs"].as_array().unwrap();
    for (a, b) in coeffs.iter().zip(tcoeffs) {
        let x: u64 = a.as_str().unwrap().parse().unwrap();
        let y: u64 = b.as_str().unwrap().parse().unwrap();
        assert_eq!(x % 256, y % 256);
    }
}

#[test]
fn reports_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "zeta.txt", ZETA);
    let o1 = dir.path().join("r1.json");
    let o2 = dir.path().join("r2.json");
    assert!(urzeta().args(["run"]).arg(&cfg).arg("--out").arg(&o1).status().unwrap().success());
    assert!(urzeta().args(["run"]).arg(&cfg).arg("--out").arg(&o2).status().unwrap().success());
    assert_eq!(std::fs::read(&o1).unwrap(), std::fs::read(&o2).unwrap());
}

#[test]
fn input_error_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.txt", "[ring]\np = 6\n");
    let status = urzeta().args(["run"]).arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(4));
    // q mismatch is also an input error
    let cfg2 = write(
        dir.path(),
        "badq.txt",
        &ZETA.replace("n = 1", "n = 1\nq = 4"),
    );
    let status2 = urzeta().args(["run"]).arg(&cfg2).status().unwrap();
    assert_eq!(status2.code(), Some(4));
}

#[test]
fn unsupported_surface_exit_code() {
    // n = 2 with a non-classical lift cannot run the trace formula
    let text = r#"
[ring]
p = 2
a = 1
N = 6

[caps]
DT = 3

[sigma]
n = 2
f1 = [((1 0), 1)]

[module.triv]
rank = 1
entry 1 1 = [((0 0), 1)]

[task.trace]
kind = trace
module = triv
"#;
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "n2.txt", text);
    let status = urzeta().args(["run"]).arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn verify_subset_passes() {
    let status = urzeta().args(["verify", "--suite", "3,4"]).status().unwrap();
    assert!(status.success());
}

#[test]
fn csv_side_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "zeta.txt", ZETA);
    let csv = dir.path().join("csv");
    let out = dir.path().join("r.json");
    let status = urzeta()
        .args(["run"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .arg("--csv")
        .arg(&csv)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(csv.join("trace_theta0.csv").exists());
    assert!(csv.join("trace_theta1.csv").exists());
}
