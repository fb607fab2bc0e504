//! The command-line front end: subcommands, outputs and exit codes.

use std::path::Path;
use std::process::{Command, Output};

use kitbash::demo;
use kitbash::functionality::ReachTarget;
use kitbash::pipeline::{bundle_tree, ObjectiveSpec};
use kitbash::Vec3;

fn kitbash(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kitbash")).args(args).output().unwrap()
}

fn scene(dir: &Path, objective: bool) -> String {
    let mut config = bundle_tree(&demo::corner_scene(2), &Default::default(), dir).unwrap();
    if objective {
        config.objective = Some(ObjectiveSpec::Reach {
            targets: vec![ReachTarget::point("block", Vec3::new(-0.3, -0.3, 0.45), Vec3::new(-0.2, -0.5, 0.45))],
        });
        config.sampler.total_steps = 6;
        config.sampler.score_samples = 4;
    }
    let path = dir.join("scene.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn validate_accepts_a_bundled_scene() {
    let dir = tempfile::tempdir().unwrap();
    let out = kitbash(&["validate", "--config", &scene(dir.path(), false)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok: 2 parts"));
}

#[test]
fn attach_metrics_and_export_write_into_out() {
    let dir = tempfile::tempdir().unwrap();
    let config = scene(dir.path(), false);
    let out = dir.path().join("run");
    let o = out.to_str().unwrap();
    for sub in ["attach", "metrics", "export"] {
        let r = kitbash(&[sub, "--config", &config, "--out", o]);
        assert_eq!(code(&r), 0, "{sub}: {}", String::from_utf8_lossy(&r.stderr));
    }
    for f in ["placements.json", "report.json", "metrics.json", "poses/manifest.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
}

#[test]
fn solve_honors_the_seed_flag() {
    let dir = tempfile::tempdir().unwrap();
    let config = scene(dir.path(), true);
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let r = kitbash(&["solve", "--config", &config, "--out", out.to_str().unwrap(), "--seed", seed, "--threads", "2"]);
        assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
        std::fs::read(out.join("trace.ndjson")).unwrap()
    };
    assert_eq!(run("5", "a"), run("5", "b"));
    assert_ne!(run("5", "c"), run("6", "d"));
}

#[test]
fn solve_without_objective_points_to_attach() {
    let dir = tempfile::tempdir().unwrap();
    let r = kitbash(&["solve", "--config", &scene(dir.path(), false), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("attach"));
}

#[test]
fn config_and_file_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ \"version\": 1, ").unwrap();
    assert_eq!(code(&kitbash(&["validate", "--config", bad.to_str().unwrap()])), 2);

    let missing = dir.path().join("nope.json");
    assert_eq!(code(&kitbash(&["validate", "--config", missing.to_str().unwrap()])), 4);

    let config = scene(dir.path(), false);
    std::fs::remove_file(dir.path().join("block.obj")).unwrap();
    let r = kitbash(&["validate", "--config", &config]);
    assert_eq!(code(&r), 4);
    assert!(String::from_utf8_lossy(&r.stderr).contains("block.obj"));
}
