use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn porous_opt(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_porous-opt"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL: &str = "[mesh]\nn = 4\n[wells]\nsigma = 0.0625\nalpha0 = 4.0\nq_hat = 0.11\n[run]\npressure_steps = 2\nsaturation_steps = 4\n";

#[test]
fn mesh_info_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    let base = repo().join("data/meshes/two_triangles");
    let config = write_config(dir.path(), &format!("[mesh]\nfile = {:?}\n", base.to_string_lossy()));
    let out = porous_opt(&["mesh-info", "--config", &config], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    for line in ["vertices 4", "triangles 2", "edges 5", "interior_edges 1"] {
        assert!(text.lines().any(|l| l == line), "{text}");
    }
}

#[test]
fn resolved_config_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let config = repo().join("data/configs/quarter_five_spot.toml");
    let out = porous_opt(
        &["config", "--resolve", "--config", &config.to_string_lossy()],
        dir.path(),
    );
    assert!(out.status.success());
    let resolved = write_config(dir.path(), &String::from_utf8_lossy(&out.stdout));
    let again = porous_opt(&["config", "--resolve", "--config", &resolved], dir.path());
    assert!(again.status.success());
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn invalid_config_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[run]\nxi = -1.0\n");
    let out = porous_opt(&["forward", "--config", &config, "--out", "res"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let status = fs::read_to_string(dir.path().join("res/status.json")).unwrap();
    assert!(status.contains("\"exit_code\": 2") && status.contains("xi"), "{status}");
}

#[test]
fn unconverged_optimisation_exits_with_code_three_and_keeps_results() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &format!("{SMALL}max_iterations = 1\n"));
    let out = porous_opt(&["optimize", "--config", &config, "--out", "res"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(dir.path().join("res/control.csv").is_file());
    assert!(dir.path().join("res/history.csv").is_file());
}

#[test]
fn forward_writes_series_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = porous_opt(
        &["forward", "--config", &config, "--out", "res", "--save-every", "2"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let state = fs::read_to_string(dir.path().join("res/state.csv")).unwrap();
    assert!(state.starts_with("# porous-opt "));
    let vtk: Vec<_> = fs::read_dir(dir.path().join("res"))
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "vtk"))
        .collect();
    assert_eq!(vtk.len(), 3);
    let status = fs::read_to_string(dir.path().join("res/status.json")).unwrap();
    assert!(status.contains("\"exit_code\": 0"), "{status}");
}

#[test]
fn adjoint_accepts_a_control_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    fs::write(
        dir.path().join("q.csv"),
        "t,q\n0,0.01\n0.25,0.02\n0.5,0.03\n0.75,0.04\n1,0.05\n",
    )
    .unwrap();
    let out = porous_opt(
        &["adjoint", "--config", &config, "--out", "res", "--control", "q.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("res/costate.csv").is_file());
    let short = "q\n0.01\n0.02\n";
    fs::write(dir.path().join("short.csv"), short).unwrap();
    let out = porous_opt(
        &["adjoint", "--config", &config, "--out", "bad", "--control", "short.csv"],
        dir.path(),
    );
    assert!(!out.status.success());
}
