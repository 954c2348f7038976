use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn example(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("examples")
        .join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &TempDir, name: &str, v: &Value) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn ptpb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptpb"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulate(cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    ptpb(&args)
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn shipped_sinusoid_meets_the_prescribed_bound() {
    let dir = TempDir::new().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/r2_sinusoid.json");
    let out = dir.path().join("run");
    let o = simulate(&cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = read_json(&out.join("metrics.json"));
    assert_eq!(m["status"], "completed");
    let bound = (2.0f64 / 1000.0).to_degrees();
    for x in m["metrics"]["mase_q_deg"].as_array().unwrap() {
        assert!(x.as_f64().unwrap() < bound);
    }
    assert!(out.join("trace.csv").exists() && out.join("tracking.svg").exists());
}

#[test]
fn kappa_below_bound_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let mut v = example("r2_sinusoid.json");
    v["gains"]["kappa"] = json!(0.1);
    let o = simulate(
        &write_config(&dir, "c.json", &v),
        &dir.path().join("o"),
        &[],
    );
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("kappa"), "{}", stderr(&o));
}

#[test]
fn duration_shorter_than_horizon_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let mut v = example("r2_sinusoid.json");
    v["timing"]["duration"] = json!(1.0);
    let o = simulate(
        &write_config(&dir, "c.json", &v),
        &dir.path().join("o"),
        &[],
    );
    assert_eq!(code(&o), 3);
}

#[test]
fn malformed_configs_are_parse_errors() {
    let dir = TempDir::new().unwrap();
    let mut v = example("r2_sinusoid.json");
    v["gains"]["rho_typo"] = json!(1.0);
    let o = simulate(
        &write_config(&dir, "typo.json", &v),
        &dir.path().join("o"),
        &[],
    );
    assert_eq!(code(&o), 2);
    let mut v = example("r2_sinusoid.json");
    v["config_version"] = json!(99);
    assert_eq!(
        code(&simulate(
            &write_config(&dir, "ver.json", &v),
            &dir.path().join("o"),
            &[]
        )),
        2
    );
    std::fs::write(dir.path().join("bad.json"), "{").unwrap();
    assert_eq!(
        code(&simulate(
            &dir.path().join("bad.json"),
            &dir.path().join("o"),
            &[]
        )),
        2
    );
    assert_eq!(
        code(&simulate(
            &dir.path().join("missing.json"),
            &dir.path().join("o"),
            &[]
        )),
        2
    );
}

#[test]
fn failed_run_exits_with_status() {
    let dir = TempDir::new().unwrap();
    let mut v = example("r2_setpoint.json");
    v["reference"] = json!({ "type": "set_point", "q_deg": [57.0, 57.0] });
    v["initial"] = json!({ "type": "absolute", "q_deg": [0.0, 0.0] });
    v["constraints"]["u_min"] = json!([-0.5, -0.5]);
    v["constraints"]["u_max"] = json!([0.5, 0.5]);
    v["gains"]["varpi"] = json!(0.05);
    v["gains"]["c"] = json!(0.01);
    let out = dir.path().join("o");
    let o = simulate(&write_config(&dir, "c.json", &v), &out, &[]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    let m = read_json(&out.join("metrics.json"));
    assert_ne!(m["status"], "completed");
}

#[test]
fn svg_does_not_change_other_artifacts() {
    let dir = TempDir::new().unwrap();
    let mut v = example("r2_noise.json");
    v["timing"]["duration"] = json!(3.0);
    v["output"]["svg"] = json!(false);
    let cfg = write_config(&dir, "c.json", &v);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&simulate(&cfg, &a, &[])), 0);
    assert_eq!(code(&simulate(&cfg, &b, &["--svg"])), 0);
    assert!(!a.join("tracking.svg").exists() && b.join("tracking.svg").exists());
    for f in ["trace.csv", "metrics.json"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn seed_override_changes_noise() {
    let dir = TempDir::new().unwrap();
    let mut v = example("r2_noise.json");
    v["timing"]["duration"] = json!(2.5);
    let cfg = write_config(&dir, "c.json", &v);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&simulate(&cfg, &a, &["--seed", "1"])), 0);
    assert_eq!(code(&simulate(&cfg, &b, &["--seed", "2"])), 0);
    assert_ne!(
        std::fs::read(a.join("trace.csv")).unwrap(),
        std::fs::read(b.join("trace.csv")).unwrap()
    );
}

fn feasibility(cfg: &Path, out: &Path, samples: &str) -> Output {
    ptpb(&[
        "feasibility",
        "--config",
        cfg.to_str().unwrap(),
        "--samples",
        samples,
        "--out",
        out.to_str().unwrap(),
    ])
}

#[test]
fn feasibility_radii_grow_with_horizon() {
    let dir = TempDir::new().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/r2_sinusoid.json");
    let out = dir.path().join("f");
    let o = feasibility(&cfg, &out, "2000");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let reports = read_json(&out.join("feasibility.json"));
    let reports = reports.as_array().unwrap();
    assert_eq!(reports.len(), 3);
    let radii: Vec<f64> = reports
        .iter()
        .map(|r| r["viable_radius"].as_f64().unwrap())
        .collect();
    assert!(radii[0] < radii[1] && radii[1] < radii[2], "{radii:?}");
    for r in reports {
        let d = r["u_star"].as_f64().unwrap() - r["u_min"].as_f64().unwrap();
        assert!((r["d_bar"].as_f64().unwrap() - d.max(0.0)).abs() < 1e-12);
    }
    let rows = std::fs::read_to_string(out.join("viable_samples.csv")).unwrap();
    let accepted: u64 = reports
        .iter()
        .map(|r| r["mc_accepted"].as_u64().unwrap())
        .sum();
    assert_eq!(rows.lines().count() as u64, accepted + 1);
    assert!(rows.starts_with("horizon,q_1,q_2,dq_1,dq_2"));
}

#[test]
fn low_authority_gives_empty_set_not_failure() {
    let dir = TempDir::new().unwrap();
    let mut v = example("r2_sinusoid.json");
    v["feasibility"]["u_star"] = json!(1.0);
    let out = dir.path().join("f");
    let o = feasibility(&write_config(&dir, "c.json", &v), &out, "0");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for r in read_json(&out.join("feasibility.json")).as_array().unwrap() {
        assert_eq!(r["nonempty"], false);
    }
    assert!(!out.join("viable_samples.csv").exists());
}

fn sweep(cfg: &Path, out: &Path) -> Output {
    ptpb(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--jobs",
        "2",
        "--out",
        out.to_str().unwrap(),
    ])
}

#[test]
fn sweep_runs_every_cell() {
    let dir = TempDir::new().unwrap();
    let mut v = example("r2_sweep.json");
    v["timing"]["duration"] = json!(4.5);
    v["timing"]["dt"] = json!(0.002);
    let out = dir.path().join("s");
    let o = sweep(&write_config(&dir, "c.json", &v), &out);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut r = csv::Reader::from_path(out.join("summary.csv")).unwrap();
    let status = r
        .headers()
        .unwrap()
        .iter()
        .position(|h| h == "status")
        .unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 18);
    assert!(rows.iter().all(|x| &x[status] == "completed"));
    assert!(out.join("cell_017/metrics.json").exists());
}

#[test]
fn sweep_axes_are_validated() {
    let dir = TempDir::new().unwrap();
    let mut v = example("r2_sweep.json");
    v["sweep"]["offsets_deg"] = json!([]);
    assert_eq!(
        code(&sweep(
            &write_config(&dir, "empty.json", &v),
            &dir.path().join("a")
        )),
        3
    );
    let mut v = example("r2_sweep.json");
    v["sweep"] = json!({});
    assert_eq!(
        code(&sweep(
            &write_config(&dir, "none.json", &v),
            &dir.path().join("b")
        )),
        3
    );
    // a horizon beyond the run length makes that cell invalid
    let mut v = example("r2_sweep.json");
    v["timing"]["duration"] = json!(2.5);
    v["sweep"] = json!({ "horizons": [2.0, 3.0], "offsets_deg": [5.0] });
    let out = dir.path().join("c");
    assert_eq!(code(&sweep(&write_config(&dir, "cell.json", &v), &out)), 3);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.contains("completed") && summary.contains("invalid"));
}

#[test]
fn sweep_metrics_ignore_emit_flags() {
    let dir = TempDir::new().unwrap();
    let mut v = example("r2_noise.json");
    v["timing"]["duration"] = json!(2.5);
    v["sweep"] = json!({ "seeds": [3, 3] });
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&sweep(&write_config(&dir, "a.json", &v), &a)), 0);
    v["output"]["svg"] = json!(false);
    v["output"]["csv"] = json!(false);
    assert_eq!(code(&sweep(&write_config(&dir, "b.json", &v), &b)), 0);
    let m = |p: PathBuf| read_json(&p.join("metrics.json"))["metrics"].clone();
    assert_eq!(m(a.join("cell_000")), m(a.join("cell_001")));
    assert_eq!(m(a.join("cell_000")), m(b.join("cell_000")));
    assert!(!b.join("cell_000/trace.csv").exists());
}
