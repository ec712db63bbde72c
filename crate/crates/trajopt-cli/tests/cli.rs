//! Command-line behavior: config round-tripping, exit codes, and the
//! formats of the emitted CSV files.

use std::fs;
use std::path::Path;
use std::process::Command;

use trajopt_cli::config::{config_to_string, load_config, write_config, Method, RunConfig};
use trajopt_cli::output::{emit_plot_data, fmt_float};
use trajopt_core::build_scenario;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trajopt"))
}

fn write_file(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

/// Quick config: SCP only on the straight guess, which converges in a few
/// iterations.
fn quick_config() -> &'static str {
    r#"{ "scenario": "unicycle-basic", "method": "scp", "guesses": ["straight"] }"#
}

#[test]
fn config_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    write_file(
        &path,
        r#"{
            "scenario": "unicycle-terrain",
            "method": "osscp",
            "guesses": ["over", "straight", {"waypoints": [[5.0, -1.0]]}],
            "overrides": { "rho": 2.5, "k": 30 },
            "plot_data": false
        }"#,
    );
    let cfg = load_config(&path).unwrap();
    assert_eq!(cfg.method, Method::Osscp);
    assert_eq!(cfg.overrides.rho, Some(2.5));
    assert_eq!(cfg.overrides.k, Some(30));
    assert!(!cfg.plot_data);

    // serialize -> reload -> identical structure
    let round = dir.path().join("round.json");
    write_config(&round, &cfg).unwrap();
    let cfg2 = load_config(&round).unwrap();
    assert_eq!(cfg, cfg2);

    // and the serialized text itself is stable
    assert_eq!(
        config_to_string(&cfg).unwrap(),
        config_to_string(&cfg2).unwrap()
    );
}

#[test]
fn config_rejects_unknown_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    write_file(&path, r#"{ "scenario": "unicycle-basic", "tpyo": 1 }"#);
    assert!(load_config(&path).is_err());
    let path2 = dir.path().join("bad2.json");
    write_file(
        &path2,
        r#"{ "scenario": "unicycle-basic", "overrides": { "rho_typo": 1.0 } }"#,
    );
    assert!(load_config(&path2).is_err());
}

#[test]
fn scenarios_list_prints_both_names() {
    let out = bin().args(["scenarios", "list"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = text.lines().collect();
    assert_eq!(names, vec!["unicycle-basic", "unicycle-terrain"]);
}

#[test]
fn print_defaults_emits_loadable_config() {
    let out = bin()
        .args(["config", "print-defaults", "unicycle-terrain"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let cfg: RunConfig = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cfg.scenario, "unicycle-terrain");
    assert_eq!(cfg.method, Method::Both);

    let bad = bin()
        .args(["config", "print-defaults", "no-such"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn solve_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.json");
    write_file(&cfg_path, quick_config());

    // converged run exits 0
    let out_dir = dir.path().join("ok");
    let out = bin()
        .args(["solve", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    // an iteration cap of 1 cannot converge: exit 2, files still written
    let capped = dir.path().join("capped.json");
    write_file(
        &capped,
        r#"{
            "scenario": "unicycle-basic",
            "method": "scp",
            "guesses": ["over"],
            "overrides": { "max_iters_scp": 1 }
        }"#,
    );
    let out_dir2 = dir.path().join("capped");
    let out = bin()
        .args(["solve", "--config"])
        .arg(&capped)
        .arg("--out")
        .arg(&out_dir2)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(out_dir2.join("summary.csv").exists());

    // errors exit 1: missing config file, unknown scenario, bad method flag
    let out = bin()
        .args(["solve", "--config"])
        .arg(dir.path().join("missing.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    let bad_scenario = dir.path().join("bad.json");
    write_file(&bad_scenario, r#"{ "scenario": "no-such" }"#);
    let out = bin()
        .args(["solve", "--config"])
        .arg(&bad_scenario)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = bin()
        .args(["solve", "--config"])
        .arg(&cfg_path)
        .args(["--method", "bogus"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn output_files_have_the_documented_format() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.json");
    write_file(&cfg_path, quick_config());
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["solve", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success());

    let traj = fs::read_to_string(out_dir.join("trajectories.csv")).unwrap();
    let mut lines = traj.lines();
    assert_eq!(lines.next().unwrap(), "run_id,agent_id,iter,k,t,x,y,theta,u");
    let first = lines.next().unwrap();
    let fields: Vec<&str> = first.split(',').collect();
    assert_eq!(fields.len(), 9);
    assert_eq!(fields[0], "scp-straight");
    // floats carry 12 significant digits
    assert_eq!(fields[5], fmt_float(fields[5].parse::<f64>().unwrap()));

    let residuals = fs::read_to_string(out_dir.join("residuals.csv")).unwrap();
    assert_eq!(
        residuals.lines().next().unwrap(),
        "iter,agent_id,primal_norm,dual_norm"
    );

    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,guess,cost,iterations,converged"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "scp");
    assert_eq!(row[1], "straight");
    assert_eq!(row[4], "true");

    let report = fs::read_to_string(out_dir.join("report.txt")).unwrap();
    assert!(report.contains("scenario: unicycle-basic"));

    // plot side files: one obstacle row per obstacle
    let obstacles = fs::read_to_string(out_dir.join("obstacles.csv")).unwrap();
    assert_eq!(obstacles.lines().next().unwrap(), "cx,cy,r");
    assert_eq!(obstacles.lines().count(), 1 + 3);
}

#[test]
fn terrain_heightmap_matches_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let sc = build_scenario("unicycle-terrain", &Default::default()).unwrap();
    emit_plot_data(dir.path(), &sc).unwrap();
    let field = sc.params.terrain.as_ref().unwrap();
    let text = fs::read_to_string(dir.path().join("terrain.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,y,cost");
    let mut checked = 0;
    for line in lines.step_by(97) {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        let (expected, _) = field.cost_at(nalgebra::Vector2::new(v[0], v[1]));
        assert!((v[2] - expected).abs() < 1e-12);
        checked += 1;
    }
    assert!(checked > 100);
}
