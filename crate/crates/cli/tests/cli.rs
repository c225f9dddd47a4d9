use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gdcycles_cli::RunConfig;
use serde_json::Value;
use tempfile::TempDir;

fn gdcycles(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gdcycles")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON document")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

const C3: &str = "x\n1\n1\n1\n-1\n";
/// Interior points plus one far example; minimal lifting dimension 7.
const BASE: &str = "x0,x1\n0.3,0\n-0.3,0.03\n0,0.3\n0.03,-0.3\n0.5,0.5\n";

#[test]
fn solve_one_dimensional_closed_form() {
    let dir = TempDir::new().unwrap();
    write(&dir, "c3.csv", C3);
    let r = report(&gdcycles(&["solve", "c3.csv"], dir.path()));
    let w = r["report"]["w_star"][0].as_f64().unwrap();
    let lambda = r["report"]["lambda_max"].as_f64().unwrap();
    assert!((w - 3f64.ln()).abs() < 1e-10);
    assert!((lambda - 3.0 / 16.0).abs() < 1e-10);
    assert_eq!(r["command"], "solve");
    assert_eq!(r["config"]["steps"], 20000);
}

#[test]
fn separable_input_exits_2_with_certificate() {
    let dir = TempDir::new().unwrap();
    write(&dir, "sep.csv", "x,y,label\n1,1,1\n-1,-1,-1\n2,0.5,1\n");
    let out = gdcycles(&["solve", "sep.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("separating direction"));
}

#[test]
fn usage_errors_exit_1() {
    let dir = TempDir::new().unwrap();
    assert_eq!(gdcycles(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(gdcycles(&["solve"], dir.path()).status.code(), Some(1));
    assert_eq!(gdcycles(&["solve", "missing.csv"], dir.path()).status.code(), Some(1));
    write(&dir, "b.csv", BASE);
    assert_eq!(gdcycles(&["lift", "b.csv", "--dim", "many"], dir.path()).status.code(), Some(1));
    assert_eq!(gdcycles(&["verify", "nonsense"], dir.path()).status.code(), Some(1));
    assert_eq!(gdcycles(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn run_converges_below_threshold_and_diverges_for_huge_gamma() {
    let dir = TempDir::new().unwrap();
    write(&dir, "c3.csv", C3);
    let r = report(&gdcycles(&["run", "c3.csv", "--gamma", "0.5"], dir.path()));
    assert_eq!(r["report"]["cycle"]["period"], 1);
    let out = gdcycles(&["run", "c3.csv", "--gamma", "1e12"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
}

#[test]
fn run_outputs_are_byte_identical_across_reruns() {
    let dir = TempDir::new().unwrap();
    write(&dir, "c3.csv", C3);
    let args = ["run", "c3.csv", "--gamma", "2.2", "--steps", "3000", "--out", "res"];
    let first = gdcycles(&args, dir.path());
    assert!(first.status.success());
    let files = ["run.json", "trajectory.csv", "spectrum.csv"];
    let before: Vec<Vec<u8>> = files.iter().map(|f| fs::read(dir.path().join("res").join(f)).unwrap()).collect();
    let second = gdcycles(&args, dir.path());
    assert_eq!(first.stdout, second.stdout);
    for (f, b) in files.iter().zip(before) {
        assert_eq!(fs::read(dir.path().join("res").join(f)).unwrap(), b, "{f} changed");
    }
}

#[test]
fn two_cycle_above_threshold_is_seen_by_run_and_spectrum() {
    let dir = TempDir::new().unwrap();
    write(&dir, "c3.csv", C3);
    let r = report(&gdcycles(&["run", "c3.csv", "--gamma", "2.2", "--out", "res"], dir.path()));
    assert_eq!(r["report"]["cycle"]["period"], 2);
    assert_eq!(r["report"]["spectral_period"], 2);
    let traj = fs::read_to_string(dir.path().join("res/trajectory.csv")).unwrap();
    assert!(traj.starts_with("# {"), "config echoed in CSV");
    assert!(traj.lines().nth(1).unwrap().starts_with("step,norm,w0"));
    let s = report(&gdcycles(&["spectrum", "res/trajectory.csv"], dir.path()));
    assert_eq!(s["report"]["period"], 2);
    assert_eq!(s["report"]["samples"], 20001);
}

#[test]
fn flags_override_config_file_which_overrides_defaults() {
    let dir = TempDir::new().unwrap();
    write(&dir, "c3.csv", C3);
    write(&dir, "cfg.toml", "gamma = 0.7\nsteps = 100\ninput = \"c3.csv\"\n[record]\nrecord_loss = true\n");
    let r = report(&gdcycles(&["run", "--config", "cfg.toml", "--steps", "50"], dir.path()));
    let cfg = &r["config"];
    assert_eq!(cfg["gamma"].as_f64(), Some(0.7));
    assert_eq!(cfg["steps"], 50);
    assert_eq!(cfg["record"]["record_loss"], true);
    assert_eq!(cfg["window"], 1024);
    assert_eq!(cfg["tol_cycle"].as_f64(), Some(1e-7));
    assert_eq!(r["report"]["steps_run"], 50);

    write(&dir, "bad.toml", "gama = 1.0\n");
    assert_eq!(gdcycles(&["run", "c3.csv", "--config", "bad.toml"], dir.path()).status.code(), Some(1));
}

#[test]
fn config_round_trips_through_toml_and_json() {
    let mut cfg = RunConfig {
        gamma: 1.0 / 3.0,
        w0: Some(vec![0.1, -2.5e-7]),
        input: Some("data.csv".into()),
        ..RunConfig::default()
    };
    cfg.lift.dim = Some(17);
    let back: RunConfig = toml::from_str(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(back, cfg);
    let json = gdcycles::io::to_json_pretty(&cfg).unwrap();
    let back: RunConfig = serde_json::from_str(&json).unwrap();
    assert_eq!(back, cfg);
    let defaults: RunConfig = toml::from_str("").unwrap();
    assert_eq!(defaults, RunConfig::default());
    assert_eq!((defaults.steps, defaults.window, defaults.tol_newton, defaults.tol_cycle), (20_000, 1024, 1e-12, 1e-7));
}

#[test]
fn lift_auto_then_solve_and_run_the_lifted_spec() {
    let dir = TempDir::new().unwrap();
    write(&dir, "b.csv", BASE);
    let r = report(&gdcycles(&["lift", "b.csv", "--out", "lifted"], dir.path()));
    let lift = &r["report"]["lift"];
    assert_eq!(lift["chosen_dim"], lift["min_dim"]);
    assert_eq!(lift["min_dim"], 7);
    let spec: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("lifted/lifted.json")).unwrap()).unwrap();
    assert_eq!(spec["ambient_dim"], 7);

    let s = report(&gdcycles(&["solve", "lifted/lifted.json"], dir.path()));
    let lambda = s["report"]["lambda_max"].as_f64().unwrap();
    let lambda_b = s["report"]["lambda_b"].as_f64().unwrap();
    assert!((lambda - lambda_b).abs() < 1e-9);
    assert_eq!(s["report"]["dim"], 7);

    let run = report(&gdcycles(&["run", "lifted/lifted.json", "--gamma", "0.9"], dir.path()));
    assert_eq!(run["report"]["cycle"]["period"], 1);
}

#[test]
fn lift_below_min_dim_warns_and_reports_pad_curvature() {
    let dir = TempDir::new().unwrap();
    write(&dir, "b.csv", BASE);
    let out = gdcycles(&["lift", "b.csv", "--dim", "5"], dir.path());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let r = report(&out);
    let lift = &r["report"]["lift"];
    let c_b = lift["c_b"].as_f64().unwrap();
    let lambda = lift["lambda_lifted"].as_f64().unwrap();
    assert!((lambda - c_b / 3.0).abs() < 1e-9);
}

#[test]
fn analyze_1d_writes_cobweb_and_lemma_report() {
    let dir = TempDir::new().unwrap();
    let r = report(&gdcycles(&["analyze-1d", "--c", "3", "--gamma", "1.8", "--out", "fig"], dir.path()));
    assert!((r["report"]["w_star"].as_f64().unwrap() - 3f64.ln()).abs() < 1e-15);
    assert_eq!(r["report"]["lemmas"]["checked"], 10_000);
    let cobweb = fs::read_to_string(dir.path().join("fig/cobweb.csv")).unwrap();
    assert_eq!(cobweb.lines().nth(1), Some("w_from,w_to,segment_kind"));
    assert_eq!(cobweb.lines().count(), 2 + 2 * 40);
    assert!(dir.path().join("fig/map.csv").exists());

    let trivial = report(&gdcycles(&["analyze-1d", "--c", "1", "--gamma", "1.5"], dir.path()));
    assert_eq!(trivial["report"]["w_star"].as_f64(), Some(0.0));

    let sweep = report(&gdcycles(&["analyze-1d", "--sweep"], dir.path()));
    assert_eq!(sweep["report"].as_array().unwrap().len(), 6);
}

#[test]
fn hunt_and_scale_and_verify() {
    let dir = TempDir::new().unwrap();
    let out = gdcycles(&["hunt", "--trials", "4", "--seed", "1", "--out", "h"], dir.path());
    assert!(out.status.success());
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("h/hunt_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["report"]["trials"], 4);

    write(&dir, "c3.csv", C3);
    let r = report(&gdcycles(&["scale", "c3.csv", "--c", "10", "--steps", "500", "--w0=-2"], dir.path()));
    assert!(r["report"]["max_deviation"].as_f64().unwrap() <= 1e-10);

    let v = gdcycles(&["verify", "derivatives", "--quick"], dir.path());
    assert!(String::from_utf8_lossy(&v.stderr).contains("[PASS] criterion 7"));
    assert_eq!(report(&v)["report"]["passed"], true);
}
