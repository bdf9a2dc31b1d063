//! End-to-end command tests: pipeline determinism, schema stability, exit
//! codes, and error surfaces.

use std::path::{Path, PathBuf};
use std::process::Command;

use hermflow_cli::commands::{cmd_energy, cmd_generate, cmd_integrate, cmd_verify};
use hermflow_cli::config::{QuadratureSpec, RunConfig, VelocitySpec};
use hermflow_cli::error::CliError;

fn base_config(out: &Path) -> RunConfig {
    RunConfig {
        dim: 2,
        num_points: 2,
        seed: 42,
        spread: 0.2,
        t_end: 0.2,
        dt: 1e-3,
        retraction_every: None,
        quadrature: QuadratureSpec::Trapezoid,
        output_dir: out.to_path_buf(),
        tolerances: Default::default(),
        velocity: VelocitySpec::Random,
    }
}

fn run_pipeline(config: &RunConfig) {
    let field = config.output_dir.join("field.json");
    cmd_generate(config).unwrap();
    cmd_integrate(config, &field).unwrap();
    cmd_verify(config).unwrap();
    cmd_energy(config, &field).unwrap();
}

const DATA_FILES: [&str; 5] = [
    "field.json",
    "trajectory.csv",
    "observables.csv",
    "verify.json",
    "energy.json",
];

#[test]
fn pipeline_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    run_pipeline(&base_config(&out_a));
    run_pipeline(&base_config(&out_b));
    for name in DATA_FILES {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn different_seed_changes_data() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let config_a = base_config(&out_a);
    let mut config_b = base_config(&out_b);
    config_b.seed = 43;
    cmd_generate(&config_a).unwrap();
    cmd_generate(&config_b).unwrap();
    let a = std::fs::read(out_a.join("field.json")).unwrap();
    let b = std::fs::read(out_b.join("field.json")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn csv_schema_matches_golden() {
    // A frozen full run at dim 2: the standard fiber with the conformal
    // initial direction, 10 steps. Guards both column order and the exact
    // float rendering.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut config = base_config(&out);
    config.num_points = 1;
    config.spread = 0.0;
    config.t_end = 0.01;
    config.dt = 1e-3;
    config.velocity = VelocitySpec::Explicit(vec![hermflow_cli::config::ExplicitVelocity {
        point_id: 0,
        h: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        a: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
    }]);
    let field = out.join("field.json");
    cmd_generate(&config).unwrap();
    cmd_integrate(&config, &field).unwrap();

    for name in ["trajectory.csv", "observables.csv", "field.json"] {
        let produced = std::fs::read_to_string(out.join(name)).unwrap();
        let golden_path =
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
        let golden = std::fs::read_to_string(&golden_path).unwrap();
        assert_eq!(produced, golden, "{name} deviates from the golden file");
    }
}

#[test]
fn explicit_conformal_velocity_reproduces_closed_form() {
    // Standard pair, H = A = I: at t = 1 the volume polynomial gives 2.25.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut config = base_config(&out);
    config.num_points = 1;
    config.spread = 0.0;
    config.t_end = 1.0;
    config.velocity = VelocitySpec::Explicit(vec![hermflow_cli::config::ExplicitVelocity {
        point_id: 0,
        h: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        a: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
    }]);
    let field = out.join("field.json");
    cmd_generate(&config).unwrap();
    cmd_integrate(&config, &field).unwrap();

    let observables = std::fs::read_to_string(out.join("observables.csv")).unwrap();
    let last = observables.lines().last().unwrap();
    let cols: Vec<f64> = last.split(',').map(|v| v.parse().unwrap()).collect();
    // point_id,t,compat,tang,e_density,I1,p_num,p_pred,trX_num,trX_pred,xw_dev
    assert!((cols[1] - 1.0).abs() < 1e-12);
    assert!((cols[6] - 2.25).abs() < 1e-8, "p_num = {}", cols[6]);
    assert_eq!(cols[7], 2.25);
    assert!((cols[8] - 4.0 / 3.0).abs() < 1e-8);
    // I1 stays at C = 4 along the whole run.
    for line in observables.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert!((cols[5] - 4.0).abs() < 1e-8);
    }

    // Global energy of the conformal geodesic over [0, 1] is C = 4.
    cmd_energy(&config, &field).unwrap();
    let energy: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("energy.json")).unwrap()).unwrap();
    let global = energy["global_energy"].as_f64().unwrap();
    assert!((global - 4.0).abs() < 1e-6, "global energy {global}");
}

#[test]
fn explicit_non_tangent_velocity_is_rejected() {
    // (H, A) = (I, 0) is not tangent: tr H != tr A.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut config = base_config(&out);
    config.num_points = 1;
    config.velocity = VelocitySpec::Explicit(vec![hermflow_cli::config::ExplicitVelocity {
        point_id: 0,
        h: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        a: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
    }]);
    let field = out.join("field.json");
    cmd_generate(&config).unwrap();
    let err = cmd_integrate(&config, &field).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("tangent") || err.to_string().contains("tr(H)"));
}

#[test]
fn zero_velocity_keeps_metric_columns_constant() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut config = base_config(&out);
    config.num_points = 1;
    config.t_end = 0.05;
    config.velocity = VelocitySpec::Explicit(vec![hermflow_cli::config::ExplicitVelocity {
        point_id: 0,
        h: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        a: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
    }]);
    let field = out.join("field.json");
    cmd_generate(&config).unwrap();
    cmd_integrate(&config, &field).unwrap();
    let text = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = text.lines().skip(1);
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(&cols[2..], &first[2..], "state columns changed under zero velocity");
    }
}

#[test]
fn energy_contrast_on_non_geodesic_trajectory_files() {
    // Feed the energy command a hand-built non-geodesic curve (a conformal
    // profile with the wrong exponent) and compare its probe values with the
    // integrator-produced geodesic from the same start.
    let dir = tempfile::tempdir().unwrap();
    let out_geo = dir.path().join("geo");
    let mut config = base_config(&out_geo);
    config.num_points = 1;
    config.spread = 0.0;
    config.t_end = 1.0;
    config.velocity = VelocitySpec::Explicit(vec![hermflow_cli::config::ExplicitVelocity {
        point_id: 0,
        h: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        a: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
    }]);
    let field = out_geo.join("field.json");
    cmd_generate(&config).unwrap();
    cmd_integrate(&config, &field).unwrap();
    cmd_energy(&config, &field).unwrap();
    let geo: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_geo.join("energy.json")).unwrap())
            .unwrap();
    let geo_probe_max = geo["per_point"][0]["probes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["delta_energy"].as_f64().unwrap())
        .fold(0.0f64, f64::max);

    // Synthesize trajectory/observables files for phi(t) = (1 + t/2)^4 on
    // the standard fiber: g = phi I, omega = phi Omega, X = W = phi'/phi I.
    let out_bad = dir.path().join("bad");
    std::fs::create_dir_all(&out_bad).unwrap();
    std::fs::copy(out_geo.join("field.json"), out_bad.join("field.json")).unwrap();
    let fmt = hermflow_cli::io::fmt_float;
    let mut traj = String::from(
        "point_id,t,g_0_0,g_0_1,g_1_0,g_1_1,omega_0_0,omega_0_1,omega_1_0,omega_1_1\n",
    );
    let mut obs = String::from(
        "point_id,t,compat_resid,tang_resid,e_density,I1,p_num,p_pred,trX_num,trX_pred,xw_dev\n",
    );
    let steps = 1000usize;
    for k in 0..=steps {
        let t = k as f64 / steps as f64;
        let q = 1.0 + t / 2.0;
        let phi = q.powi(4);
        let c = 2.0 / q; // tr X = 2 c with c = phi' / phi = 2 / q per slot
        let density = 2.0 * (c / 2.0) * (c / 2.0) * 2.0 * phi; // (trX^2 + trW^2) p
        traj.push_str(&format!(
            "0,{},{},{},{},{},{},{},{},{}\n",
            fmt(t),
            fmt(phi),
            fmt(0.0),
            fmt(0.0),
            fmt(phi),
            fmt(0.0),
            fmt(phi),
            fmt(-phi),
            fmt(0.0),
        ));
        obs.push_str(&format!(
            "0,{},{},{},{},{},{},{},{},{},{}\n",
            fmt(t),
            fmt(0.0),
            fmt(0.0),
            fmt(density),
            fmt(density),
            fmt(phi),
            fmt(phi),
            fmt(c),
            fmt(c),
            fmt(0.0),
        ));
    }
    std::fs::write(out_bad.join("trajectory.csv"), traj).unwrap();
    std::fs::write(out_bad.join("observables.csv"), obs).unwrap();
    let mut bad_config = config.clone();
    bad_config.output_dir = out_bad.clone();
    cmd_energy(&bad_config, &out_bad.join("field.json")).unwrap();
    let bad: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_bad.join("energy.json")).unwrap())
            .unwrap();
    let bad_probe_min = bad["per_point"][0]["probes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["delta_energy"].as_f64().unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!(
        bad_probe_min >= 100.0 * geo_probe_max,
        "contrast too small: geodesic max {geo_probe_max:.3e}, impostor min {bad_probe_min:.3e}"
    );
}

#[test]
fn verify_with_hostile_tolerances_reports_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut config = base_config(&out);
    config.tolerances.insert("structural".into(), 1e-20);
    let err = cmd_verify(&config).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["all_pass"], serde_json::Value::Bool(false));
    let invariants = report["invariants"].as_array().unwrap();
    assert!(invariants.iter().any(|i| i["pass"] == serde_json::Value::Bool(false)));
}

#[test]
fn verify_outcome_is_seed_independent() {
    let dir = tempfile::tempdir().unwrap();
    let passes = |seed: u64, sub: &str| {
        let out = dir.path().join(sub);
        let mut config = base_config(&out);
        config.seed = seed;
        cmd_verify(&config).unwrap();
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("verify.json")).unwrap())
                .unwrap();
        report["invariants"]
            .as_array()
            .unwrap()
            .iter()
            .map(|i| i["pass"].as_bool().unwrap())
            .collect::<Vec<_>>()
    };
    assert_eq!(passes(5, "s5"), passes(987_654, "s987654"));
}

#[test]
fn energy_rejects_grid_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = base_config(&out);
    let field = out.join("field.json");
    cmd_generate(&config).unwrap();
    cmd_integrate(&config, &field).unwrap();
    // Corrupt one time entry of the observables grid.
    let obs_path = out.join("observables.csv");
    let text = std::fs::read_to_string(&obs_path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut cols: Vec<String> = lines[2].split(',').map(String::from).collect();
    cols[1] = "7.7000000000000000e-3".into();
    lines[2] = cols.join(",");
    std::fs::write(&obs_path, lines.join("\n") + "\n").unwrap();
    let err = cmd_energy(&config, &field).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("non-uniform"));
}

#[test]
fn manifest_inventories_data_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = base_config(&out);
    cmd_generate(&config).unwrap();
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("run_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "generate");
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 1);
    assert_eq!(files[0]["name"], "field.json");
    let recorded = files[0]["sha256"].as_str().unwrap();
    let actual =
        hermflow_cli::io::sha256_hex(&std::fs::read(out.join("field.json")).unwrap());
    assert_eq!(recorded, actual);
    assert!(manifest["finished_unix_ms"].as_u64() >= manifest["started_unix_ms"].as_u64());
}

#[test]
fn field_errors_carry_point_ids() {
    // A field file with an incompatible pair is rejected naming the point.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    std::fs::create_dir_all(&out).unwrap();
    let bad = serde_json::json!([{
        "point_id": 7,
        "weight": 1.0,
        "g": [[4.0, 0.0], [0.0, 1.0]],
        "omega": [[0.0, 1.0], [-1.0, 0.0]],
        "frame": [[1.0, 0.0], [0.0, 1.0]],
    }]);
    let field = out.join("field.json");
    std::fs::write(&field, serde_json::to_string(&bad).unwrap()).unwrap();
    let config = base_config(&out);
    let err = cmd_integrate(&config, &field).unwrap_err();
    match &err {
        CliError::Validation(msg) => {
            assert!(msg.contains("point 7"), "message: {msg}");
            assert!(msg.contains("compatibility"), "message: {msg}");
        }
        other => panic!("expected validation error, got {other:?}"),
    }
}

// ---- binary-level tests -------------------------------------------------

fn hermflow_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hermflow"))
}

fn write_config(path: &Path, dim: usize, out: &Path, extra: &str) {
    let body = format!(
        r#"{{"dim": {dim}, "num_points": 1, "seed": 7, "spread": 0.1,
            "t_end": 0.05, "dt": 0.001, "quadrature": "trapezoid",
            "output_dir": "{}"{extra}}}"#,
        out.display()
    );
    std::fs::write(path, body).unwrap();
}

#[test]
fn binary_exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.json");
    let out = dir.path().join("out");

    // Success: exit 0.
    write_config(&config_path, 2, &out, "");
    let status = hermflow_bin()
        .args(["generate", "--config"])
        .arg(&config_path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    // Validation failure: odd dimension, exit 1 with a message on stderr.
    write_config(&config_path, 3, &out, "");
    let output = hermflow_bin()
        .args(["generate", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("dim must be even"), "stderr: {stderr}");

    // Drift failure: an impossible drift tolerance flags every row, exit 2.
    write_config(
        &config_path,
        2,
        &out,
        r#", "tolerances": {"drift": 1e-30}"#,
    );
    let status = hermflow_bin()
        .args(["generate", "--config"])
        .arg(&config_path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let output = hermflow_bin()
        .args(["integrate", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("drift"), "stderr: {stderr}");
    // Data files are still written before the drift exit.
    assert!(out.join("trajectory.csv").exists());
}

#[test]
fn thread_cap_does_not_change_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.json");
    let run_with_threads = |threads: &str, sub: &str| {
        let out = dir.path().join(sub);
        let body = format!(
            r#"{{"dim": 2, "num_points": 6, "seed": 11, "spread": 0.2,
                "t_end": 0.05, "dt": 0.001, "quadrature": "trapezoid",
                "output_dir": "{}"}}"#,
            out.display()
        );
        std::fs::write(&config_path, body).unwrap();
        for cmd in ["generate", "integrate"] {
            let status = hermflow_bin()
                .env("HERMFLOW_THREADS", threads)
                .args([cmd, "--config"])
                .arg(&config_path)
                .status()
                .unwrap();
            assert_eq!(status.code(), Some(0), "{cmd} failed with {threads} thread(s)");
        }
        std::fs::read(out.join("trajectory.csv")).unwrap()
    };
    let serial = run_with_threads("1", "serial");
    let parallel = run_with_threads("4", "parallel");
    assert_eq!(serial, parallel, "worker count changed the output bytes");
}

#[test]
fn binary_seed_and_out_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.json");
    let out = dir.path().join("out");
    let other = dir.path().join("elsewhere");
    write_config(&config_path, 2, &out, "");

    let status = hermflow_bin()
        .args(["generate", "--config"])
        .arg(&config_path)
        .args(["--seed", "99"])
        .arg("--out")
        .arg(&other)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(other.join("field.json").exists());
    assert!(!out.join("field.json").exists());
}
