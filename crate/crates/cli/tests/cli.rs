use std::path::Path;
use std::process::{Command, Output};

fn coevo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coevo")).args(args).output().unwrap()
}

fn write_tiny(dir: &Path) {
    std::fs::write(dir.join("edges.csv"), "wave,src,dst\n1,0,1\n2,0,1\n2,1,2\n").unwrap();
    std::fs::write(dir.join("behavior.csv"), "wave,actor,value\n1,0,1\n1,1,2\n1,2,3\n2,0,2\n2,1,2\n2,2,1\n").unwrap();
    std::fs::write(dir.join("covariates.csv"), "actor,gender,age,tenure_days\n0,1,20,100\n1,2,21,300\n2,1,19,50\n").unwrap();
    std::fs::write(dir.join("data.toml"), "n_levels = 3\n").unwrap();
    std::fs::write(
        dir.join("model.toml"),
        "[effects]\nnetwork = [\"out_degree\"]\nbehavior = [\"linear_tendency\"]\n",
    )
    .unwrap();
}

#[test]
fn describe_renders_four_tables() {
    let dir = tempfile::tempdir().unwrap();
    write_tiny(dir.path());
    let out = coevo(&["describe", "--data", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for title in ["Network descriptives", "Network change", "Behavior levels", "Behavior change"] {
        assert!(text.contains(title), "{title}");
    }
    // 3 pairs, 1 tie at wave 1; Jaccard 1/2 between the waves
    assert!(text.lines().any(|l| l.split_whitespace().collect::<Vec<_>>() == ["1", "0.333", "0.667", "1"]));
    assert!(text.lines().any(|l| l.starts_with("1 => 2") && l.ends_with("0.500")));
}

#[test]
fn missing_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = coevo(&["describe", "--data", dir.path().join("absent").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    assert_eq!(coevo(&["estimate", "--data", "x"]).status.code(), Some(2));
}

#[test]
fn zero_rate_simulation_reproduces_the_observed_waves() {
    let dir = tempfile::tempdir().unwrap();
    write_tiny(dir.path());
    let p = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    std::fs::write(
        p("zero.toml"),
        "rho_net = [0.0]\nrho_beh = [0.0]\nbeta_net = [-1.0]\nbeta_beh = [0.5]\n",
    )
    .unwrap();
    let out = coevo(&[
        "simulate", "--data", &p(""), "--model", &p("model.toml"), "--params", &p("zero.toml"), "--seed", "1", "--out", &p("sim"),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let edges = std::fs::read_to_string(p("sim/simulated_edges.csv")).unwrap();
    assert_eq!(edges, "replication,wave,src,dst\n1,2,0,1\n");
    let beh = std::fs::read_to_string(p("sim/simulated_behavior.csv")).unwrap();
    assert_eq!(beh, "replication,wave,actor,value\n1,2,0,1\n1,2,1,2\n1,2,2,3\n");
}

#[test]
fn bad_parameters_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    write_tiny(dir.path());
    let p = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    std::fs::write(p("short.toml"), "rho_net = [1.0, 1.0]\nrho_beh = [1.0]\nbeta_net = [0.0]\nbeta_beh = [0.0]\n").unwrap();
    let out = coevo(&[
        "check", "--data", &p(""), "--model", &p("model.toml"), "--params", &p("short.toml"), "--seed", "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
