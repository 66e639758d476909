use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cblsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cblsim")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|_| panic!("stderr is JSON: {}", String::from_utf8_lossy(&out.stderr)))
}

const SPECTRUM: &str = r#"
scheme = "rb85-blue"

[cell]
temperature_c = 60.0

[[fields]]
lower = "5S1/2"
upper = "5P3/2"
rabi_mhz = 0.6

[[fields]]
lower = "5P3/2"
upper = "5D5/2"
rabi_mhz = 0.6

[scan]
axis = "delta2"
start = -30.0
stop = 30.0
points = 31

[solver]
velocity = "stationary"
"#;

const PROPAGATE: &str = r#"
scheme = "rb85-blue"

[cell]
temperature_c = 60.3

[[fields]]
lower = "5S1/2"
upper = "5P3/2"
power_mw = 0.53

[[fields]]
lower = "5P3/2"
upper = "5D5/2"
power_mw = 0.53

[solver]
steps = 20
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn vapor_density_at_sixty_celsius() {
    let v = stdout_json(&cblsim(&["vapor-density", "--celsius", "60.3"]));
    let n = v["summary"]["density_cm3"].as_f64().unwrap();
    assert!((n / 3e11 - 1.0).abs() < 0.3, "{n}");
}

#[test]
fn doppler_width_of_blue_line() {
    let v = stdout_json(&cblsim(&["doppler-width", "--wavelength-nm", "420.3", "--kelvin", "333"]));
    let w = v["summary"]["fwhm_mhz"].as_f64().unwrap();
    assert!(w > 900.0 && w < 1200.0, "{w}");
}

#[test]
fn collinear_vacuum_phase_match_closes() {
    let v = stdout_json(&cblsim(&["phase-match", "--collinear", "--vacuum"]));
    assert!(v["summary"]["relative_residual"].as_f64().unwrap() < 1e-9);
}

#[test]
fn counter_branch_leaves_twice_the_ir_wavenumber() {
    let v = stdout_json(&cblsim(&["phase-match", "--collinear", "--branch", "counter"]));
    let r = v["summary"]["residual_per_m"].as_f64().unwrap();
    let k_ir = v["summary"]["k_ir_per_m"].as_f64().unwrap();
    assert!((r / (2.0 * k_ir) - 1.0).abs() < 0.01, "{r} vs {k_ir}");
}

#[test]
fn zeeman_orders_polarizations() {
    let v = stdout_json(&cblsim(&["zeeman"]));
    let pp = v["summary"]["sigma+sigma+"]["two_step_weight"].as_f64().unwrap();
    let ll = v["summary"]["lin-par-lin"]["two_step_weight"].as_f64().unwrap();
    assert!(pp >= 2.0 * ll, "{pp} vs {ll}");
}

#[test]
fn domain_error_exits_one_with_json() {
    let out = cblsim(&["vapor-density", "--kelvin", "-5"]);
    assert_eq!(out.status.code(), Some(1));
    let e = stderr_json(&out);
    assert_eq!(e["error"]["command"], "vapor-density");
    assert_eq!(e["error"]["kind"], "domain");
}

#[test]
fn usage_error_is_machine_readable() {
    let out = cblsim(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"]["kind"], "usage");
}

#[test]
fn bad_config_reports_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &SPECTRUM.replace("temperature_c = 60.0", "temperature_k = -1.0"));
    let out = cblsim(&["scan-spectrum", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let e = stderr_json(&out);
    assert_eq!(e["error"]["kind"], "config");
    assert!(e["error"]["message"].as_str().unwrap().contains("cell.temperature"));
}

#[test]
fn unknown_key_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &SPECTRUM.replace("points = 31", "points = 31\nwidth = 3"));
    let out = cblsim(&["scan-spectrum", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr_json(&out)["error"]["message"].as_str().unwrap().to_string();
    assert!(msg.contains("width") && msg.contains("line"), "{msg}");
}

#[test]
fn scan_spectrum_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "scan.toml", SPECTRUM);
    let out_dir = dir.path().join("out");
    let v = stdout_json(&cblsim(&["scan-spectrum", "--config", &cfg, "--output-dir", out_dir.to_str().unwrap()]));
    let peak = v["summary"]["peak_detuning_mhz"].as_f64().unwrap();
    assert!(peak.abs() < 2.5, "{peak}");
    let csv = std::fs::read_to_string(out_dir.join("scan-spectrum.csv")).unwrap();
    assert!(csv.starts_with("detuning_mhz,population\n"));
    assert_eq!(csv.lines().count(), 32);
    let side: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("scan-spectrum.json")).unwrap()).unwrap();
    assert_eq!(side["config"]["run"]["scan"]["points"], 31);
    assert_eq!(side["data"], "scan-spectrum.csv");
}

#[test]
fn json_format_embeds_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    stdout_json(&cblsim(&["zeeman", "--format", "json", "--output-dir", out_dir.to_str().unwrap()]));
    let side: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("zeeman.json")).unwrap()).unwrap();
    assert_eq!(side["rows"].as_array().unwrap().len(), 4);
    assert!(!out_dir.join("zeeman.csv").exists());
}

#[test]
fn test_mode_outputs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "prop.toml", PROPAGATE);
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        stdout_json(&cblsim(&["propagate", "--config", &cfg, "--test-mode", "--output-dir", out_dir.to_str().unwrap()]));
        files.push((
            std::fs::read(out_dir.join("propagate.csv")).unwrap(),
            std::fs::read(out_dir.join("propagate.json")).unwrap(),
        ));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn curve_rejects_wrong_axis() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{PROPAGATE}\n[scan]\naxis = \"delta2\"\nstart = 1.0\nstop = 2.0\npoints = 2\n");
    let cfg = write(dir.path(), "c.toml", &text);
    let out = cblsim(&["power-curve", "--config", &cfg, "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_json(&out)["error"]["message"].as_str().unwrap().contains("scan.axis"));
}
